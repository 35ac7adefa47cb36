//! Channel generation: Rayleigh fading with distance-based pathloss, CSI
//! corruption with per-user error variances, and deterministic sample
//! streams for training, validation, and evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{C64, CVec};

/// Which convention maps pathloss to the per-entry channel variance.
///
/// The fading model draws each antenna entry as a complex Gaussian whose
/// variance is either `sqrt(rho_k)` (the covariance written as
/// `sqrt(rho_k) I`) or plain `rho_k`. The square-root form is the default;
/// the switch exists because the two conventions disagree in the wild.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossVariance {
    Sqrt,
    Linear,
}

/// How many per-user error variances the transmitter gets to observe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKnowledge {
    /// All K variances known (the default experiment setting).
    All,
    /// A uniformly random subset size 0..=K per sample.
    Random,
    /// Exactly `known_count` entries, chosen uniformly per sample.
    Fixed,
}

fn default_antennas() -> usize {
    4
}
fn default_users() -> usize {
    4
}
fn default_cell_radius() -> f64 {
    100.0
}
fn default_reference_distance() -> f64 {
    30.0
}
fn default_pathloss_exponent() -> f64 {
    3.0
}
fn default_power_dbs() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
}
fn default_error_ratios() -> Vec<f64> {
    vec![0.005, 0.01, 0.05, 0.1, 0.3, 1.0]
}
fn default_pathloss_variance() -> PathlossVariance {
    PathlossVariance::Sqrt
}
fn default_error_knowledge() -> ErrorKnowledge {
    ErrorKnowledge::All
}

/// Simulation scenario: geometry, fading, error-ratio and power-budget sets.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transmit antennas M.
    pub antennas: usize,
    /// Single-antenna users K.
    pub users: usize,
    pub cell_radius_m: f64,
    pub reference_distance_m: f64,
    pub pathloss_exponent: f64,
    /// Power budgets in dB; samples draw uniformly from this set.
    pub power_dbs: Vec<f64>,
    /// Error ratios tau in (0, 1]; samples draw uniformly from this set.
    pub error_ratios: Vec<f64>,
    pub pathloss_variance: PathlossVariance,
    pub error_knowledge: ErrorKnowledge,
    /// Used when `error_knowledge = "fixed"`.
    pub known_count: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            antennas: default_antennas(),
            users: default_users(),
            cell_radius_m: default_cell_radius(),
            reference_distance_m: default_reference_distance(),
            pathloss_exponent: default_pathloss_exponent(),
            power_dbs: default_power_dbs(),
            error_ratios: default_error_ratios(),
            pathloss_variance: default_pathloss_variance(),
            error_knowledge: default_error_knowledge(),
            known_count: default_users(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas < 1 || self.users < 1 {
            return Err(Error::Config("antennas and users must be >= 1".into()));
        }
        if self.cell_radius_m <= 0.0 || self.reference_distance_m <= 0.0 {
            return Err(Error::Config("radii must be positive".into()));
        }
        if self.power_dbs.is_empty() {
            return Err(Error::Config("power_dbs must be non-empty".into()));
        }
        if self.error_ratios.is_empty() {
            return Err(Error::Config("error_ratios must be non-empty".into()));
        }
        if self
            .error_ratios
            .iter()
            .any(|&t| !(t > 0.0 && t <= 1.0))
        {
            return Err(Error::Config(
                "error ratios must lie in (0, 1]".into(),
            ));
        }
        if self.error_knowledge == ErrorKnowledge::Fixed && self.known_count > self.users {
            return Err(Error::Config(
                "known_count cannot exceed the number of users".into(),
            ));
        }
        Ok(())
    }

    /// Long-term pathloss at distance `d`: `1 / (1 + (d/d_ref)^alpha)`.
    pub fn pathloss(&self, distance_m: f64) -> f64 {
        1.0 / (1.0 + (distance_m / self.reference_distance_m).powf(self.pathloss_exponent))
    }

    /// Per-entry complex variance implied by pathloss `rho`.
    pub fn entry_variance(&self, rho: f64) -> f64 {
        match self.pathloss_variance {
            PathlossVariance::Sqrt => rho.sqrt(),
            PathlossVariance::Linear => rho,
        }
    }
}

/// K channel vectors of length M.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    vecs: Vec<CVec>,
}

impl ChannelSet {
    pub fn new(vecs: Vec<CVec>) -> Self {
        assert!(!vecs.is_empty(), "ChannelSet needs at least one user");
        let m = vecs[0].len();
        assert!(
            vecs.iter().all(|v| v.len() == m),
            "all channel vectors must share a length"
        );
        ChannelSet { vecs }
    }

    pub fn num_users(&self) -> usize {
        self.vecs.len()
    }

    pub fn antennas(&self) -> usize {
        self.vecs[0].len()
    }

    pub fn user(&self, k: usize) -> &CVec {
        &self.vecs[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CVec> {
        self.vecs.iter()
    }
}

/// One training/evaluation tuple: actual CSI, nominal (erroneous) CSI, the
/// per-user error variances, the linear power budget, and the mask of
/// variances known at the transmitter.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiSample {
    pub actual: ChannelSet,
    pub nominal: ChannelSet,
    pub error_var: Vec<f64>,
    pub power: f64,
    pub known: Vec<bool>,
}

impl CsiSample {
    pub fn num_users(&self) -> usize {
        self.actual.num_users()
    }

    pub fn antennas(&self) -> usize {
        self.actual.antennas()
    }

    pub fn power_db(&self) -> f64 {
        10.0 * self.power.log10()
    }
}

fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> C64 {
    let half = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * half, im * half)
}

/// Draw K Rayleigh-fading channel vectors with fresh uniform-in-disk user
/// positions.
pub fn draw_channels(cfg: &ScenarioConfig, rng: &mut impl Rng) -> ChannelSet {
    let vecs = (0..cfg.users)
        .map(|_| {
            let u: f64 = rng.random();
            let d = cfg.cell_radius_m * u.sqrt();
            let var = cfg.entry_variance(cfg.pathloss(d));
            CVec::new((0..cfg.antennas).map(|_| complex_gaussian(rng, var)).collect())
        })
        .collect();
    ChannelSet::new(vecs)
}

/// Add estimation error: each entry of `e_k` is complex Gaussian with
/// variance `eps_k = tau * ||h_k||^2`. Returns the nominal CSI and the
/// error-variance vector.
pub fn corrupt(
    h: &ChannelSet,
    tau: f64,
    rng: &mut impl Rng,
) -> Result<(ChannelSet, Vec<f64>)> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!(
            "error ratio tau must lie in (0, 1], got {tau}"
        )));
    }
    let mut nominal = Vec::with_capacity(h.num_users());
    let mut error_var = Vec::with_capacity(h.num_users());
    for hk in h.iter() {
        let eps = tau * hk.norm_sqr();
        let e = CVec::new(
            (0..hk.len())
                .map(|_| complex_gaussian(rng, eps))
                .collect(),
        );
        nominal.push(hk.add(&e));
        error_var.push(eps);
    }
    Ok((ChannelSet::new(nominal), error_var))
}

/// Namespaces for derived per-sample RNG streams.
#[derive(Clone, Copy, Debug)]
pub enum StreamPurpose {
    ParamInit,
    Training,
    Validation,
    Test(u32),
    Timing,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::ParamInit => 0,
            StreamPurpose::Training => 1,
            StreamPurpose::Validation => 2,
            StreamPurpose::Test(cell) => 0x1000 + cell as u64,
            StreamPurpose::Timing => 3,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for the (seed, purpose, counter) triple; each application of
/// `splitmix` is a bijection, so distinct triples land on distinct keys up
/// to the usual 2^-64 collision odds.
pub fn derive_key(seed: u64, purpose: u64, counter: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ purpose) ^ counter)
}

/// Deterministic, splittable source of [`CsiSample`]s. Every sample gets its
/// own counter-derived ChaCha stream, so generation order (and parallel
/// evaluation) cannot perturb the results.
#[derive(Clone, Debug)]
pub struct SampleStream {
    cfg: ScenarioConfig,
    seed: u64,
    purpose: u64,
    counter: u64,
}

impl SampleStream {
    /// Stream seeded from the scenario's own seed.
    pub fn new(cfg: &ScenarioConfig, purpose: StreamPurpose) -> Self {
        Self::with_seed(cfg, cfg.seed, purpose)
    }

    pub fn with_seed(cfg: &ScenarioConfig, seed: u64, purpose: StreamPurpose) -> Self {
        SampleStream {
            cfg: cfg.clone(),
            seed,
            purpose: purpose.tag(),
            counter: 0,
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    fn rng_for(&self, counter: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_key(self.seed, self.purpose, counter))
    }

    /// Next sample, drawing tau and P from the configured sets.
    pub fn next_sample(&mut self) -> CsiSample {
        self.next_with(None, None, None)
    }

    /// Next sample with optional forced error ratio, power (dB), and known
    /// error-variance count. Forced values are not drawn from the RNG, so a
    /// cell sweep stays sample-aligned with the unforced stream.
    pub fn next_with(
        &mut self,
        tau: Option<f64>,
        power_db: Option<f64>,
        known_count: Option<usize>,
    ) -> CsiSample {
        let mut rng = self.rng_for(self.counter);
        self.counter += 1;

        let cfg = &self.cfg;
        let actual = draw_channels(cfg, &mut rng);
        let tau = tau.unwrap_or_else(|| {
            cfg.error_ratios[rng.random_range(0..cfg.error_ratios.len())]
        });
        let (nominal, error_var) =
            corrupt(&actual, tau, &mut rng).expect("configured tau validated in (0,1]");
        let p_db = power_db
            .unwrap_or_else(|| cfg.power_dbs[rng.random_range(0..cfg.power_dbs.len())]);
        let power = 10f64.powf(p_db / 10.0);

        let k = cfg.users;
        let count = known_count.unwrap_or(match cfg.error_knowledge {
            ErrorKnowledge::All => k,
            ErrorKnowledge::Fixed => cfg.known_count,
            ErrorKnowledge::Random => rng.random_range(0..=k),
        });
        let known = draw_mask(k, count.min(k), &mut rng);

        CsiSample {
            actual,
            nominal,
            error_var,
            power,
            known,
        }
    }
}

/// Mask with exactly `count` true entries chosen uniformly among `k` users.
fn draw_mask(k: usize, count: usize, rng: &mut impl Rng) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..k).collect();
    // Partial Fisher-Yates: the first `count` slots end up a uniform subset.
    for i in 0..count {
        let j = rng.random_range(i..k);
        idx.swap(i, j);
    }
    let mut mask = vec![false; k];
    for &i in &idx[..count] {
        mask[i] = true;
    }
    mask
}

/// Draw `n` independent samples from the stream.
pub fn sample_batch(stream: &mut SampleStream, n: usize) -> Vec<CsiSample> {
    assert!(n >= 1, "batch size must be at least 1");
    (0..n).map(|_| stream.next_sample()).collect()
}
