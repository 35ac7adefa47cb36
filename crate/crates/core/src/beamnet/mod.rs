//! The trainable beamformer: input feature assembly, dense forward pass with
//! batch normalization, dual softmax power heads, and the duality-based beam
//! construction layer. The network never sees the actual channels, only the
//! nominal CSI, the known error variances, and the power budget.

pub mod checkpoint;
pub mod graph;

use rand::Rng;

use crate::channel::{ChannelSet, CsiSample};
use crate::error::{Error, Result};
use crate::metrics::BeamSet;
use crate::numerics::{CMat, Tensor};

/// Running-statistics momentum for batch normalization.
pub const BN_MOMENTUM: f64 = 0.9;
/// Variance floor inside the batch-norm square root.
pub const BN_EPS: f64 = 1e-5;
/// Beam directions with a norm at or below this are rejected.
pub const DIRECTION_EPS: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `fan_in x fan_out`.
    pub weight: Tensor,
    /// `1 x fan_out`.
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

/// All trainable values plus architecture descriptor and batch-norm state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    pub antennas: usize,
    pub users: usize,
    /// Layer widths `[N_0, ..., N_L]`; `N_0 = 2MK + K + 1`, `N_L = 2K`.
    pub widths: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    /// One per hidden layer (`L - 1` entries).
    pub norms: Vec<BatchNorm>,
}

impl NetParams {
    pub fn input_dim(antennas: usize, users: usize) -> usize {
        2 * antennas * users + users + 1
    }

    pub fn output_dim(users: usize) -> usize {
        2 * users
    }

    /// Default hidden widths: five layers of `20 * M * K`.
    pub fn default_hidden(antennas: usize, users: usize) -> Vec<usize> {
        vec![20 * antennas * users; 5]
    }

    /// Fresh parameters: weights uniform in `+-1/sqrt(fan_in)`, zero biases,
    /// identity batch norm.
    pub fn new(antennas: usize, users: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(Self::input_dim(antennas, users));
        widths.extend_from_slice(hidden);
        widths.push(Self::output_dim(users));

        let mut layers = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                .collect();
            layers.push(DenseLayer {
                weight: Tensor::from_vec(fan_in, fan_out, data),
                bias: Tensor::zeros(1, fan_out),
            });
        }

        let norms = widths[1..widths.len() - 1]
            .iter()
            .map(|&n| BatchNorm {
                gamma: Tensor::from_vec(1, n, vec![1.0; n]),
                beta: Tensor::zeros(1, n),
                running_mean: Tensor::zeros(1, n),
                running_var: Tensor::from_vec(1, n, vec![1.0; n]),
            })
            .collect();

        NetParams {
            antennas,
            users,
            widths,
            layers,
            norms,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Trainable tensors in the canonical order used everywhere (optimizer
    /// buffers, graph leaves, gradients): layer weights and biases first,
    /// then batch-norm scales and shifts.
    pub fn trainable(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        for n in &self.norms {
            out.push(&n.gamma);
            out.push(&n.beta);
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        for n in &mut self.norms {
            out.push(&mut n.gamma);
            out.push(&mut n.beta);
        }
        out
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }
}

/// Input feature vector `[Re nominal; Im nominal; error variances; P_dB/30]`
/// of length `2MK + K + 1`. Variances hidden by the mask are imputed with
/// the mean of the known ones (zero when none are known).
pub fn build_input(sample: &CsiSample) -> Vec<f64> {
    let (m, k) = (sample.antennas(), sample.num_users());
    let mut x = Vec::with_capacity(2 * m * k + k + 1);
    for user in sample.nominal.iter() {
        x.extend(user.iter().map(|z| z.re));
    }
    for user in sample.nominal.iter() {
        x.extend(user.iter().map(|z| z.im));
    }
    let known: Vec<f64> = sample
        .error_var
        .iter()
        .zip(sample.known.iter())
        .filter(|(_, &m)| m)
        .map(|(&e, _)| e)
        .collect();
    let fill = if known.is_empty() {
        0.0
    } else {
        known.iter().sum::<f64>() / known.len() as f64
    };
    for (eps, &mask) in sample.error_var.iter().zip(sample.known.iter()) {
        x.push(if mask { *eps } else { fill });
    }
    x.push(sample.power_db() / 30.0);
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

/// Batch statistics observed by one batch-norm layer during a train-mode
/// forward pass; committed to the running statistics by the caller.
#[derive(Clone, Debug)]
pub struct BnStats {
    pub mean: Tensor,
    pub var: Tensor,
}

fn bn_train(z: &Tensor, norm: &BatchNorm) -> (Tensor, BnStats) {
    let mean = z.mean_rows();
    let (rows, cols) = z.shape();
    let mut centered = Tensor::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            centered.set(i, j, z.get(i, j) - mean.get(0, j));
        }
    }
    let var = centered.zip_map(&centered, |a, b| a * b).mean_rows();
    let mut out = Tensor::zeros(rows, cols);
    for j in 0..cols {
        let inv = 1.0 / (var.get(0, j) + BN_EPS).sqrt();
        let g = norm.gamma.get(0, j);
        let b = norm.beta.get(0, j);
        for i in 0..rows {
            out.set(i, j, centered.get(i, j) * inv * g + b);
        }
    }
    (out, BnStats { mean, var })
}

fn bn_eval(z: &Tensor, norm: &BatchNorm) -> Tensor {
    let (rows, cols) = z.shape();
    let mut out = Tensor::zeros(rows, cols);
    for j in 0..cols {
        let inv = 1.0 / (norm.running_var.get(0, j) + BN_EPS).sqrt();
        let g = norm.gamma.get(0, j);
        let b = norm.beta.get(0, j);
        let mu = norm.running_mean.get(0, j);
        for i in 0..rows {
            out.set(i, j, (z.get(i, j) - mu) * inv * g + b);
        }
    }
    out
}

fn affine(x: &Tensor, layer: &DenseLayer) -> Tensor {
    let mut z = x.matmul(&layer.weight);
    let (rows, cols) = z.shape();
    for i in 0..rows {
        for j in 0..cols {
            z.set(i, j, z.get(i, j) + layer.bias.get(0, j));
        }
    }
    z
}

fn forward_impl(params: &NetParams, x: &Tensor, mode: ForwardMode) -> (Tensor, Vec<BnStats>) {
    assert_eq!(
        x.cols(),
        params.widths[0],
        "input width mismatch: expected {}, got {}",
        params.widths[0],
        x.cols()
    );
    let last = params.num_layers() - 1;
    let mut h = x.clone();
    let mut stats = Vec::with_capacity(params.norms.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let z = affine(&h, layer);
        if l < last {
            let activated = match mode {
                ForwardMode::Train => {
                    let (out, st) = bn_train(&z, &params.norms[l]);
                    stats.push(st);
                    out
                }
                ForwardMode::Eval => bn_eval(&z, &params.norms[l]),
            };
            h = activated.map(|v| if v > 0.0 { v } else { 0.0 });
        } else {
            h = z;
        }
    }
    (h, stats)
}

/// Fold batch statistics into the running mean/variance.
pub fn commit_bn_stats(params: &mut NetParams, stats: &[BnStats]) {
    assert_eq!(stats.len(), params.norms.len(), "stats count mismatch");
    for (norm, st) in params.norms.iter_mut().zip(stats.iter()) {
        for j in 0..norm.running_mean.cols() {
            let rm = norm.running_mean.get(0, j);
            norm.running_mean
                .set(0, j, BN_MOMENTUM * rm + (1.0 - BN_MOMENTUM) * st.mean.get(0, j));
            let rv = norm.running_var.get(0, j);
            norm.running_var
                .set(0, j, BN_MOMENTUM * rv + (1.0 - BN_MOMENTUM) * st.var.get(0, j));
        }
    }
}

/// Dense forward pass over a batch (rows are samples). Train mode normalizes
/// with batch statistics and folds them into the running statistics; eval
/// mode is a pure function of the parameters.
pub fn forward_mlp(params: &mut NetParams, x: &Tensor, mode: ForwardMode) -> Tensor {
    let (out, stats) = forward_impl(params, x, mode);
    if mode == ForwardMode::Train {
        commit_bn_stats(params, &stats);
    }
    out
}

/// Eval-mode forward pass without the mutable borrow.
pub fn forward_eval(params: &NetParams, x: &Tensor) -> Tensor {
    forward_impl(params, x, ForwardMode::Eval).0
}

/// Downlink powers `p`, dual uplink powers `q`, and the shared budget, with
/// `sum p = sum q = P` by construction.
#[derive(Clone, Debug)]
pub struct PowerSplit {
    pub downlink: Vec<f64>,
    pub uplink: Vec<f64>,
    pub budget: f64,
}

/// Split the raw head output `z = [z_p; z_q]` into the two power vectors via
/// budget-scaled softmaxes.
pub fn power_heads(z: &[f64], budget: f64) -> PowerSplit {
    assert!(z.len().is_multiple_of(2), "head output must have even length");
    assert!(budget > 0.0, "power budget must be positive");
    let k = z.len() / 2;
    let downlink: Vec<f64> = crate::numerics::softmax_value(&z[..k])
        .into_iter()
        .map(|s| s * budget)
        .collect();
    let uplink: Vec<f64> = crate::numerics::softmax_value(&z[k..])
        .into_iter()
        .map(|s| s * budget)
        .collect();
    PowerSplit {
        downlink,
        uplink,
        budget,
    }
}

/// Regularized matched-filter direction matrix shared by all users:
/// `I_M + sum_j q_j h_j h_j^H`.
pub fn duality_matrix(channels: &ChannelSet, uplink: &[f64]) -> CMat {
    assert_eq!(channels.num_users(), uplink.len(), "uplink power count");
    let mut a = CMat::identity(channels.antennas());
    for (h, &q) in channels.iter().zip(uplink.iter()) {
        assert!(q >= 0.0, "uplink powers must be non-negative");
        a.add_outer(h, q);
    }
    a
}

/// Beam construction from the duality structure: one Cholesky factorization
/// of the shared matrix, one solve per user, unit-normalized directions
/// scaled by the downlink power split.
pub fn construct_beams(channels: &ChannelSet, split: &PowerSplit) -> Result<BeamSet> {
    let k = channels.num_users();
    assert_eq!(split.downlink.len(), k, "downlink power count");
    let a = duality_matrix(channels, &split.uplink);
    let factor = a.cholesky()?;
    let mut beams = Vec::with_capacity(k);
    for kk in 0..k {
        let u = factor.solve(channels.user(kk));
        let norm = u.norm();
        if norm <= DIRECTION_EPS {
            return Err(Error::DegenerateChannel { norm });
        }
        beams.push(u.scale_re(split.downlink[kk].sqrt() / norm));
    }
    Ok(BeamSet::new(beams))
}

/// End-to-end eval-mode inference: nominal CSI in, feasible beams out.
pub fn infer_beams(params: &NetParams, sample: &CsiSample) -> Result<BeamSet> {
    let x = Tensor::row(build_input(sample));
    let z = forward_eval(params, &x);
    let split = power_heads(z.row_slice(0), sample.power);
    construct_beams(&sample.nominal, &split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_batch, SampleStream, ScenarioConfig, StreamPurpose};
    use crate::numerics::{C64, CVec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tiny_sample() -> CsiSample {
        let h = ChannelSet::new(vec![CVec::new(vec![c(1.0, 2.0)])]);
        CsiSample {
            actual: h.clone(),
            nominal: h,
            error_var: vec![0.1],
            power: 10.0,
            known: vec![true],
        }
    }

    #[test]
    fn build_input_single_user() {
        let x = build_input(&tiny_sample());
        assert_eq!(x.len(), 4);
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
        assert!((x[2] - 0.1).abs() < 1e-15);
        assert!((x[3] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn build_input_mask_changes_only_variance_slots() {
        let cfg = ScenarioConfig {
            antennas: 2,
            users: 3,
            ..Default::default()
        };
        let mut stream = SampleStream::new(&cfg, StreamPurpose::Test(40));
        let s_full = stream.next_sample();
        let mut s_masked = s_full.clone();
        s_masked.known = vec![false; 3];
        let a = build_input(&s_full);
        let b = build_input(&s_masked);
        let mk2 = 2 * 2 * 3;
        assert_eq!(a[..mk2], b[..mk2]);
        assert_eq!(a[a.len() - 1], b[b.len() - 1]);
        assert_ne!(a[mk2..mk2 + 3], b[mk2..mk2 + 3]);
    }

    #[test]
    fn build_input_length() {
        let cfg = ScenarioConfig::default(); // M = K = 4
        let mut stream = SampleStream::new(&cfg, StreamPurpose::Test(41));
        let s = stream.next_sample();
        assert_eq!(build_input(&s).len(), 37);
    }

    #[test]
    fn zero_network_emits_zero() {
        // Zero weights and biases with gamma = 1, beta = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = NetParams::new(1, 1, &[8], &mut rng);
        for layer in &mut params.layers {
            for v in layer.weight.data_mut() {
                *v = 0.0;
            }
            for v in layer.bias.data_mut() {
                *v = 0.0;
            }
        }
        let x = Tensor::row(build_input(&tiny_sample()));
        let z = forward_eval(&params, &x);
        assert!(z.data().iter().all(|&v| v == 0.0));
        let z_train = forward_mlp(&mut params, &x, ForwardMode::Train);
        assert!(z_train.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_single_layer() {
        // One hidden layer of width 1 on a 1-D toy: identity-ish weights.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = NetParams::new(1, 1, &[1], &mut rng);
        // input dim 4 -> hidden 1 -> output 2
        params.layers[0].weight = Tensor::from_vec(4, 1, vec![1.0, 0.0, 0.0, 0.0]);
        params.layers[0].bias = Tensor::row(vec![0.5]);
        params.layers[1].weight = Tensor::from_vec(1, 2, vec![2.0, -3.0]);
        params.layers[1].bias = Tensor::row(vec![0.1, 0.2]);
        // Pick running stats so eval-mode batch norm is identity.
        params.norms[0].running_mean = Tensor::row(vec![0.0]);
        params.norms[0].running_var = Tensor::row(vec![1.0 - BN_EPS]);

        let x = Tensor::row(vec![1.0, 2.0, 0.1, 1.0 / 3.0]);
        let z = forward_eval(&params, &x);
        // hidden pre-activation 1*1 + 0.5 = 1.5, BN identity, ReLU 1.5
        assert!((z.get(0, 0) - (2.0 * 1.5 + 0.1)).abs() < 1e-12);
        assert!((z.get(0, 1) - (-3.0 * 1.5 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn eval_mode_is_batch_size_independent() {
        let cfg = ScenarioConfig {
            antennas: 2,
            users: 2,
            seed: 3,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = NetParams::new(2, 2, &[16, 16], &mut rng);
        let mut stream = SampleStream::new(&cfg, StreamPurpose::Test(42));
        let samples = sample_batch(&mut stream, 64);

        let rows: Vec<Vec<f64>> = samples.iter().map(build_input).collect();
        let n0 = rows[0].len();
        let mut batch = Tensor::zeros(64, n0);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                batch.set(i, j, v);
            }
        }
        let z_batch = forward_eval(&params, &batch);
        for (i, r) in rows.iter().enumerate() {
            let z_single = forward_eval(&params, &Tensor::row(r.clone()));
            for j in 0..z_single.cols() {
                assert!((z_batch.get(i, j) - z_single.get(0, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn train_mode_uses_batch_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = NetParams::new(1, 1, &[4], &mut rng);
        let x = Tensor::from_vec(2, 4, vec![1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let train_out = forward_mlp(&mut params, &x, ForwardMode::Train);
        let eval_out = forward_eval(&params, &x);
        let diff: f64 = train_out
            .data()
            .iter()
            .zip(eval_out.data().iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-9, "train and eval modes should disagree here");
        // and the running stats moved off their init
        assert!(params.norms[0]
            .running_mean
            .data()
            .iter()
            .any(|&v| v != 0.0));
    }

    #[test]
    fn power_heads_uniform_split() {
        let split = power_heads(&[0.0, 0.0, 0.0, 0.0], 4.0);
        assert_eq!(split.downlink, vec![2.0, 2.0]);
        assert_eq!(split.uplink, vec![2.0, 2.0]);
    }

    #[test]
    fn power_heads_saturation_is_finite() {
        let split = power_heads(&[1000.0, 0.0, 0.0, 1000.0], 5.0);
        assert!(split.downlink[0] > 5.0 - 1e-9 && split.downlink[0].is_finite());
        assert!(split.downlink[1] >= 0.0);
        assert!(split.uplink.iter().all(|q| q.is_finite()));
    }

    #[test]
    fn power_heads_budget_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let z: Vec<f64> = (0..8).map(|_| (rng.random::<f64>() - 0.5) * 20.0).collect();
            let p = 10f64.powf(rng.random::<f64>() * 3.0);
            let split = power_heads(&z, p);
            assert!((split.downlink.iter().sum::<f64>() - p).abs() <= 1e-9 * p);
            assert!((split.uplink.iter().sum::<f64>() - p).abs() <= 1e-9 * p);
        }
    }

    #[test]
    fn single_user_beam_is_full_power_matched_filter() {
        // Sherman-Morrison: (I + q h h^H)^{-1} h is proportional to h, so
        // K = 1 collapses to the matched filter at full power for any head
        // output.
        let h = CVec::new(vec![c(0.3, -1.0), c(2.0, 0.5)]);
        let channels = ChannelSet::new(vec![h.clone()]);
        let split = power_heads(&[0.73, -2.1], 7.0);
        let beams = construct_beams(&channels, &split).unwrap();
        let expect = h.scale_re(7.0f64.sqrt() / h.norm());
        for i in 0..2 {
            assert!((beams.user(0).get(i) - expect.get(i)).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_uplink_gives_matched_filter_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let channels = ChannelSet::new(
            (0..3)
                .map(|_| {
                    CVec::new(
                        (0..3)
                            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                            .collect(),
                    )
                })
                .collect(),
        );
        let split = PowerSplit {
            downlink: vec![2.0, 3.0, 1.0],
            uplink: vec![0.0, 0.0, 0.0],
            budget: 6.0,
        };
        let beams = construct_beams(&channels, &split).unwrap();
        for k in 0..3 {
            let h = channels.user(k);
            let expect = h.scale_re(split.downlink[k].sqrt() / h.norm());
            for i in 0..3 {
                assert!((beams.user(k).get(i) - expect.get(i)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn beams_match_adjugate_inverse_oracle() {
        // Explicit 2x2 complex inverse via the adjugate formula, independent
        // of the Cholesky path.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let channels = ChannelSet::new(
                (0..2)
                    .map(|_| {
                        CVec::new(
                            (0..2)
                                .map(|_| {
                                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                                })
                                .collect(),
                        )
                    })
                    .collect(),
            );
            let split = PowerSplit {
                downlink: vec![1.7, 1.3],
                uplink: vec![1.0, 2.0],
                budget: 3.0,
            };

            // A = I + sum q_j h_j h_j^H, entrywise.
            let mut a = [[c(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                    for (u, &q) in channels.iter().zip(split.uplink.iter()) {
                        v += q * u.get(i) * u.get(j).conj();
                    }
                    a[i][j] = v;
                }
            }
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let inv = [
                [a[1][1] / det, -a[0][1] / det],
                [-a[1][0] / det, a[0][0] / det],
            ];

            let beams = construct_beams(&channels, &split).unwrap();
            for k in 0..2 {
                let h = channels.user(k);
                let u = [
                    inv[0][0] * h.get(0) + inv[0][1] * h.get(1),
                    inv[1][0] * h.get(0) + inv[1][1] * h.get(1),
                ];
                let norm = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
                let scale = split.downlink[k].sqrt() / norm;
                for i in 0..2 {
                    assert!((beams.user(k).get(i) - u[i] * scale).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn inference_meets_power_constraint() {
        let cfg = ScenarioConfig {
            antennas: 2,
            users: 2,
            seed: 11,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = NetParams::new(2, 2, &[16], &mut rng);
        let mut stream = SampleStream::new(&cfg, StreamPurpose::Test(43));
        for _ in 0..100 {
            let s = stream.next_sample();
            let beams = infer_beams(&params, &s).unwrap();
            assert!((beams.total_power() - s.power).abs() <= 1e-9 * s.power);
        }
    }

    #[test]
    fn single_user_collapse_for_any_parameters() {
        let cfg = ScenarioConfig {
            antennas: 3,
            users: 1,
            seed: 13,
            ..Default::default()
        };
        let mut stream = SampleStream::new(&cfg, StreamPurpose::Test(44));
        for trial in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let params = NetParams::new(3, 1, &[12, 12], &mut rng);
            let s = stream.next_sample();
            let beams = infer_beams(&params, &s).unwrap();
            let h = s.nominal.user(0);
            let expect = h.scale_re(s.power.sqrt() / h.norm());
            for i in 0..3 {
                assert!((beams.user(0).get(i) - expect.get(i)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let channels = ChannelSet::new(vec![CVec::zeros(2), CVec::new(vec![c(1.0, 0.0), c(0.0, 1.0)])]);
        let split = PowerSplit {
            downlink: vec![1.0, 1.0],
            uplink: vec![0.5, 0.5],
            budget: 2.0,
        };
        assert!(matches!(
            construct_beams(&channels, &split),
            Err(Error::DegenerateChannel { .. })
        ));
    }

    #[test]
    fn eval_forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let params = NetParams::new(1, 1, &[8], &mut rng);
        let x = Tensor::row(build_input(&tiny_sample()));
        let a = forward_eval(&params, &x);
        let b = forward_eval(&params, &x);
        assert_eq!(a, b);
    }
}
