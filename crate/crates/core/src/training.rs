//! Unsupervised robust training: maximize the mini-batch mean sum rate
//! scored on the actual channels while the network sees only the nominal
//! CSI. Adam updates, fixed held-out validation set, best-checkpoint
//! tracking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamnet::graph::{forward_mlp_graph, register_params, sample_rate_node, GraphParams};
use crate::beamnet::{build_input, commit_bn_stats, infer_beams, BnStats, ForwardMode, NetParams};
use crate::channel::{sample_batch, CsiSample, SampleStream, ScenarioConfig, StreamPurpose};
use crate::error::{Error, Result};
use crate::metrics::sum_rate;
use crate::numerics::{NodeId, Tape, Tensor};

fn default_learning_rate() -> f64 {
    1e-3
}
fn default_batch_size() -> usize {
    1024
}
fn default_max_epochs() -> usize {
    100
}
fn default_batches_per_epoch() -> usize {
    50
}
fn default_validation_samples() -> usize {
    1000
}
fn default_patience() -> usize {
    50
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

/// Training hyperparameters. `hidden_widths = None` selects the full-size
/// architecture (five hidden layers of `20 M K`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub batches_per_epoch: usize,
    pub validation_samples: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub hidden_widths: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_learning_rate(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            batches_per_epoch: default_batches_per_epoch(),
            validation_samples: default_validation_samples(),
            patience: default_patience(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_epsilon: default_adam_eps(),
            hidden_widths: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.batches_per_epoch < 1 {
            return Err(Error::Config("batches_per_epoch must be at least 1".into()));
        }
        if self.validation_samples < 1 {
            return Err(Error::Config("validation_samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve_hidden(&self, scenario: &ScenarioConfig) -> Vec<usize> {
        self.hidden_widths
            .clone()
            .unwrap_or_else(|| NetParams::default_hidden(scenario.antennas, scenario.users))
    }
}

/// First/second Adam moments, shaped like the trainable tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &NetParams) -> Self {
        let zeros: Vec<Tensor> = params
            .trainable()
            .iter()
            .map(|t| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One row of the per-epoch training log. `train_sum_rate` is `None` for the
/// epoch-0 row, which only evaluates the freshly initialized network.
#[derive(Clone, Debug)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_sum_rate: Option<f64>,
    pub val_sum_rate: f64,
    pub best_sum_rate: f64,
}

/// Training outcome: current and best parameters plus the convergence log.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: NetParams,
    pub adam: AdamState,
    pub epoch: usize,
    pub best_val_rate: f64,
    pub best_params: NetParams,
    pub log: Vec<EpochLog>,
    /// Set when training stopped on a non-finite loss or gradient; the best
    /// checkpoint up to that point is retained.
    pub abort_reason: Option<String>,
}

/// Negated mini-batch mean sum rate as a tape node, together with the batch
/// normalization statistics of the train-mode forward pass. Pure in
/// `(params, batch)`: running statistics are returned, not applied.
pub fn batch_loss(
    tape: &mut Tape,
    params: &NetParams,
    gp: &GraphParams,
    batch: &[CsiSample],
) -> Result<(NodeId, Vec<BnStats>)> {
    assert!(!batch.is_empty(), "batch must be non-empty");
    let n0 = params.widths[0];
    let mut rows = Tensor::zeros(batch.len(), n0);
    for (i, sample) in batch.iter().enumerate() {
        let x = build_input(sample);
        assert_eq!(x.len(), n0, "feature length mismatch");
        for (j, &v) in x.iter().enumerate() {
            rows.set(i, j, v);
        }
    }
    let x_leaf = tape.leaf(rows);
    let (z, stats) = forward_mlp_graph(tape, x_leaf, gp, params, ForwardMode::Train);

    let mut rates = Vec::with_capacity(batch.len());
    for (i, sample) in batch.iter().enumerate() {
        let z_row = tape.slice_rows(z, i, 1);
        rates.push(sample_rate_node(tape, z_row, sample)?);
    }
    let total = tape.sum_nodes(&rates);
    let loss = tape.scale(total, -1.0 / batch.len() as f64);
    Ok((loss, stats))
}

/// One Adam update with bias correction. Gradients must line up with
/// [`NetParams::trainable`]; NaNs abort the step.
pub fn adam_step(
    cfg: &TrainConfig,
    state: &mut AdamState,
    params: &mut NetParams,
    grads: &[Tensor],
) -> Result<()> {
    let mut tensors = params.trainable_mut();
    assert_eq!(grads.len(), tensors.len(), "gradient count mismatch");
    for (block, g) in grads.iter().enumerate() {
        if !g.iter_finite() {
            return Err(Error::NanGradient { block });
        }
        assert_eq!(
            g.shape(),
            tensors[block].shape(),
            "gradient shape mismatch in block {block}"
        );
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.adam_beta1.powi(t);
    let bias2 = 1.0 - cfg.adam_beta2.powi(t);

    for (block, g) in grads.iter().enumerate() {
        let m = &mut state.first[block];
        let v = &mut state.second[block];
        let theta = tensors[block].data_mut();
        for (i, &gi) in g.data().iter().enumerate() {
            let mi = cfg.adam_beta1 * m.data()[i] + (1.0 - cfg.adam_beta1) * gi;
            let vi = cfg.adam_beta2 * v.data()[i] + (1.0 - cfg.adam_beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bias1;
            let v_hat = vi / bias2;
            theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
    Ok(())
}

/// Mean sum rate of the eval-mode network over a sample set. Parallel across
/// samples with a fixed-order reduction, so the result is deterministic.
pub fn mean_sum_rate(params: &NetParams, samples: &[CsiSample]) -> Result<f64> {
    let rates = samples
        .par_iter()
        .map(|s| infer_beams(params, s).map(|beams| sum_rate(&s.actual, &beams)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Run the robust training loop and return the state holding the best
/// checkpoint by validation sum rate.
pub fn train(cfg: &TrainConfig, scenario: &ScenarioConfig) -> Result<TrainState> {
    cfg.validate()?;
    scenario.validate()?;

    let hidden = cfg.resolve_hidden(scenario);
    let mut init_rng = init_rng(scenario, cfg);
    let mut params = NetParams::new(scenario.antennas, scenario.users, &hidden, &mut init_rng);

    let mut val_stream = SampleStream::new(scenario, StreamPurpose::Validation);
    let validation = sample_batch(&mut val_stream, cfg.validation_samples);
    let mut train_stream = SampleStream::new(scenario, StreamPurpose::Training);

    let mut state = TrainState {
        adam: AdamState::new(&params),
        epoch: 0,
        best_val_rate: f64::NEG_INFINITY,
        best_params: params.clone(),
        log: Vec::new(),
        abort_reason: None,
        params: params.clone(),
    };

    let val0 = mean_sum_rate(&params, &validation)?;
    if val0 >= state.best_val_rate {
        state.best_val_rate = val0;
        state.best_params = params.clone();
    }
    state.log.push(EpochLog {
        epoch: 0,
        train_sum_rate: None,
        val_sum_rate: val0,
        best_sum_rate: state.best_val_rate,
    });

    let mut epochs_since_best = 0usize;
    'outer: for epoch in 1..=cfg.max_epochs {
        let mut epoch_rate = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            let batch = sample_batch(&mut train_stream, cfg.batch_size);
            let mut tape = Tape::new();
            let gp = register_params(&mut tape, &params);
            let (loss, stats) = batch_loss(&mut tape, &params, &gp, &batch)?;
            let loss_value = tape.value(loss).as_scalar();
            if !loss_value.is_finite() {
                state.abort_reason = Some(
                    Error::NonFiniteLoss {
                        epoch,
                        value: loss_value,
                    }
                    .to_string(),
                );
                break 'outer;
            }
            epoch_rate -= loss_value;

            let grads = tape.backward(loss)?;
            let grad_tensors: Vec<Tensor> = gp
                .ordered_ids()
                .iter()
                .zip(params.trainable().iter())
                .map(|(&id, t)| grads.wrt(id, t.shape()))
                .collect();
            if let Err(e) = adam_step(cfg, &mut state.adam, &mut params, &grad_tensors) {
                state.abort_reason = Some(e.to_string());
                break 'outer;
            }
            commit_bn_stats(&mut params, &stats);
        }
        epoch_rate /= cfg.batches_per_epoch as f64;

        let val = mean_sum_rate(&params, &validation)?;
        if val >= state.best_val_rate {
            state.best_val_rate = val;
            state.best_params = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        state.epoch = epoch;
        state.log.push(EpochLog {
            epoch,
            train_sum_rate: Some(epoch_rate),
            val_sum_rate: val,
            best_sum_rate: state.best_val_rate,
        });

        if epochs_since_best >= cfg.patience {
            break;
        }
    }

    state.params = params;
    Ok(state)
}

fn init_rng(scenario: &ScenarioConfig, cfg: &TrainConfig) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let key = crate::channel::derive_key(cfg.seed ^ scenario.seed, 0, 0);
    rand_chacha::ChaCha8Rng::seed_from_u64(key)
}

/// Render the training log as the CSV the CLI writes.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_sum_rate,val_sum_rate,best_sum_rate\n");
    for row in log {
        let train = row
            .train_sum_rate
            .map(crate::experiments::fmt_float)
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch,
            train,
            crate::experiments::fmt_float(row.val_sum_rate),
            crate::experiments::fmt_float(row.best_sum_rate)
        ));
    }
    out
}
