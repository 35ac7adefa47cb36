//! Experiment runner: rate sweeps over SNR, error ratio, and known-variance
//! dimension, plus per-sample timing. Every method in an experiment scores
//! the same CsiSample stream (paired comparison), rates are always computed
//! against the actual channels, and rate sweeps are pure functions of
//! (config, seed) down to the CSV bytes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig};
use crate::beamnet::checkpoint::load_checkpoint;
use crate::beamnet::{infer_beams, NetParams};
use crate::channel::{CsiSample, SampleStream, ScenarioConfig, StreamPurpose};
use crate::error::{Error, Result};
use crate::metrics::{sum_rate, BeamSet};
use crate::training::{log_to_csv, train, TrainConfig};

/// Lossless float rendering for measured values (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Grid columns echo the configured value exactly (shortest round-trip).
fn fmt_grid(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    RateVsSnr,
    RateVsTau,
    RateVsE,
    Timing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRef {
    pub label: String,
    pub path: PathBuf,
}

fn default_methods() -> Vec<String> {
    vec![
        "dnn".into(),
        "mrt".into(),
        "zf".into(),
        "rzf".into(),
        "wmmse".into(),
    ]
}
fn default_test_samples() -> usize {
    1000
}
fn default_snr_dbs() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
}
fn default_eval_taus() -> Vec<f64> {
    vec![0.1, 1.0]
}
fn default_timing_warmup() -> usize {
    10
}

/// What to run and on how many samples. `snr_dbs` and `taus` are the
/// evaluation grids; the vs-E sweep and the timing run use the first entry
/// of each.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub methods: Vec<String>,
    pub test_samples: usize,
    pub snr_dbs: Vec<f64>,
    pub taus: Vec<f64>,
    pub timing_warmup: usize,
    /// Labeled checkpoints for `dnn:<label>` method entries.
    pub checkpoints: Vec<CheckpointRef>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::RateVsSnr,
            methods: default_methods(),
            test_samples: default_test_samples(),
            snr_dbs: default_snr_dbs(),
            taus: default_eval_taus(),
            timing_warmup: default_timing_warmup(),
            checkpoints: Vec::new(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("method list must be non-empty".into()));
        }
        if self.test_samples < 1 {
            return Err(Error::Config("test_samples must be at least 1".into()));
        }
        if self.snr_dbs.is_empty() || self.taus.is_empty() {
            return Err(Error::Config("snr_dbs and taus must be non-empty".into()));
        }
        Ok(())
    }
}

/// A concrete, runnable method.
pub enum MethodSpec {
    Dnn { label: String, params: NetParams },
    Mrt,
    Zf,
    Rzf,
    Wmmse,
}

impl MethodSpec {
    pub fn name(&self) -> String {
        match self {
            MethodSpec::Dnn { label, .. } => {
                if label == "dnn" {
                    "dnn".into()
                } else {
                    format!("dnn:{label}")
                }
            }
            MethodSpec::Mrt => "mrt".into(),
            MethodSpec::Zf => "zf".into(),
            MethodSpec::Rzf => "rzf".into(),
            MethodSpec::Wmmse => "wmmse".into(),
        }
    }
}

/// Turn method names into runnable methods, loading DL checkpoints.
/// `cli_checkpoint` backs the bare "dnn" entry; `dnn:<label>` entries load
/// from the spec's checkpoint table.
pub fn resolve_methods(
    spec: &ExperimentSpec,
    cli_checkpoint: Option<&Path>,
) -> Result<Vec<MethodSpec>> {
    let mut out = Vec::with_capacity(spec.methods.len());
    for name in &spec.methods {
        let method = match name.as_str() {
            "mrt" => MethodSpec::Mrt,
            "zf" => MethodSpec::Zf,
            "rzf" => MethodSpec::Rzf,
            "wmmse" => MethodSpec::Wmmse,
            "dnn" => {
                let path = cli_checkpoint.ok_or_else(|| {
                    Error::MissingCheckpoint(
                        "method \"dnn\" requires --checkpoint <path>".into(),
                    )
                })?;
                MethodSpec::Dnn {
                    label: "dnn".into(),
                    params: load_checkpoint(path)?,
                }
            }
            other => match other.strip_prefix("dnn:") {
                Some(label) => {
                    let entry = spec
                        .checkpoints
                        .iter()
                        .find(|c| c.label == label)
                        .ok_or_else(|| {
                            Error::MissingCheckpoint(format!(
                                "no checkpoint entry labeled \"{label}\""
                            ))
                        })?;
                    MethodSpec::Dnn {
                        label: label.to_string(),
                        params: load_checkpoint(&entry.path)?,
                    }
                }
                None => {
                    return Err(Error::Config(format!("unknown method \"{other}\"")));
                }
            },
        };
        out.push(method);
    }
    Ok(out)
}

/// Beams a method produces for one sample. Every method sees only the
/// nominal CSI (plus the error statistics and power budget).
pub fn beams_for(
    method: &MethodSpec,
    sample: &CsiSample,
    bcfg: &BaselineConfig,
) -> Result<BeamSet> {
    match method {
        MethodSpec::Dnn { params, .. } => infer_beams(params, sample),
        MethodSpec::Mrt => baselines::mrt(&sample.nominal, sample.power),
        MethodSpec::Zf => baselines::zf(&sample.nominal, sample.power),
        MethodSpec::Rzf => {
            baselines::rzf(&sample.nominal, sample.power, &sample.error_var, bcfg)
        }
        MethodSpec::Wmmse => {
            baselines::wmmse(&sample.nominal, sample.power, bcfg).map(|o| o.beams)
        }
    }
}

/// Per-sample sum rates of one method over a sample set, scored on the
/// actual channels. Parallel with order-preserving collection.
pub fn evaluate_method(
    method: &MethodSpec,
    samples: &[CsiSample],
    bcfg: &BaselineConfig,
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| beams_for(method, s, bcfg).map(|beams| sum_rate(&s.actual, &beams)))
        .collect()
}

/// Sample mean and its standard error.
pub fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Everything one experiment needs.
pub struct Experiment<'a> {
    pub scenario: &'a ScenarioConfig,
    pub train: &'a TrainConfig,
    pub baselines: &'a BaselineConfig,
    pub spec: &'a ExperimentSpec,
    pub methods: &'a [MethodSpec],
}

impl Experiment<'_> {
    /// Test set for one grid cell: a fresh counter-zero stream, so every
    /// cell of an experiment scores the same underlying channel draws and
    /// only the forced values differ.
    fn cell_samples(
        &self,
        tau: Option<f64>,
        power_db: Option<f64>,
        known_count: Option<usize>,
    ) -> Vec<CsiSample> {
        let mut stream = SampleStream::new(self.scenario, StreamPurpose::Test(0));
        (0..self.spec.test_samples)
            .map(|_| stream.next_with(tau, power_db, known_count))
            .collect()
    }

    pub fn run(&self) -> Result<String> {
        self.spec.validate()?;
        self.scenario.validate()?;
        self.baselines.validate()?;
        match self.spec.kind {
            ExperimentKind::RateVsSnr => self.run_rate_vs_snr(),
            ExperimentKind::RateVsTau => self.run_rate_vs_tau(),
            ExperimentKind::RateVsE => self.run_rate_vs_e(),
            ExperimentKind::Timing => self.run_timing(),
            ExperimentKind::Convergence => self.run_convergence(),
        }
    }

    /// Mean sum rate versus the power budget, per error ratio and method.
    pub fn run_rate_vs_snr(&self) -> Result<String> {
        let mut csv = String::from("p_db,tau,method,mean_sum_rate,std_err\n");
        for &tau in &self.spec.taus {
            for &p_db in &self.spec.snr_dbs {
                let samples = self.cell_samples(Some(tau), Some(p_db), None);
                for method in self.methods {
                    let rates = evaluate_method(method, &samples, self.baselines)?;
                    let (mean, se) = mean_and_std_err(&rates);
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt_grid(p_db),
                        fmt_grid(tau),
                        method.name(),
                        fmt_float(mean),
                        fmt_float(se)
                    ));
                }
            }
        }
        Ok(csv)
    }

    /// Mean sum rate versus the error ratio, per power budget and method.
    pub fn run_rate_vs_tau(&self) -> Result<String> {
        let mut csv = String::from("tau,p_db,method,mean_sum_rate,std_err\n");
        for &tau in &self.spec.taus {
            for &p_db in &self.spec.snr_dbs {
                let samples = self.cell_samples(Some(tau), Some(p_db), None);
                for method in self.methods {
                    let rates = evaluate_method(method, &samples, self.baselines)?;
                    let (mean, se) = mean_and_std_err(&rates);
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt_grid(tau),
                        fmt_grid(p_db),
                        method.name(),
                        fmt_float(mean),
                        fmt_float(se)
                    ));
                }
            }
        }
        Ok(csv)
    }

    /// Mean sum rate versus the number of known error variances, at the
    /// first configured (tau, P) point. Cells share channel draws; only the
    /// mask width changes. Baselines ignore the mask.
    pub fn run_rate_vs_e(&self) -> Result<String> {
        let tau = self.spec.taus[0];
        let p_db = self.spec.snr_dbs[0];
        let mut csv = String::from("e,method,mean_sum_rate,std_err\n");
        for e in 0..=self.scenario.users {
            let samples = self.cell_samples(Some(tau), Some(p_db), Some(e));
            for method in self.methods {
                let rates = evaluate_method(method, &samples, self.baselines)?;
                let (mean, se) = mean_and_std_err(&rates);
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    e,
                    method.name(),
                    fmt_float(mean),
                    fmt_float(se)
                ));
            }
        }
        Ok(csv)
    }

    /// Wall-clock per-sample solve time at the first configured tau, across
    /// the configured power budgets. Warm-up samples are excluded and the
    /// loop is single-threaded.
    pub fn run_timing(&self) -> Result<String> {
        let tau = self.spec.taus[0];
        let warmup = self.spec.timing_warmup;
        let mut csv = String::from("method,p_db,mean_us,std_us\n");
        for method in self.methods {
            for &p_db in &self.spec.snr_dbs {
                let mut stream = SampleStream::new(self.scenario, StreamPurpose::Timing);
                let samples: Vec<CsiSample> = (0..warmup + self.spec.test_samples)
                    .map(|_| stream.next_with(Some(tau), Some(p_db), None))
                    .collect();
                let mut times = Vec::with_capacity(self.spec.test_samples);
                for (i, s) in samples.iter().enumerate() {
                    let start = Instant::now();
                    let beams = beams_for(method, s, self.baselines)?;
                    let elapsed = start.elapsed().as_secs_f64() * 1e6;
                    std::hint::black_box(beams);
                    if i >= warmup {
                        times.push(elapsed);
                    }
                }
                let (mean, _) = mean_and_std_err(&times);
                let n = times.len() as f64;
                let std = if times.len() < 2 {
                    0.0
                } else {
                    (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                };
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    method.name(),
                    fmt_grid(p_db),
                    fmt_float(mean),
                    fmt_float(std)
                ));
            }
        }
        Ok(csv)
    }

    /// Run the training loop and emit its convergence log.
    pub fn run_convergence(&self) -> Result<String> {
        let state = train(self.train, self.scenario)?;
        Ok(log_to_csv(&state.log))
    }
}
