//! Tape-backed twin of the forward pass, for training. Values match the
//! plain implementation bit for bit; the tape adds the adjoints.

use super::{BnStats, ForwardMode, NetParams, BN_EPS, DIRECTION_EPS};
use crate::channel::CsiSample;
use crate::error::{Error, Result};
use crate::metrics::sum_rate_node;
use crate::numerics::{CMat, NodeId, Tape, Tensor};

/// Leaf node ids for every trainable tensor, in [`NetParams::trainable`]
/// order.
#[derive(Clone, Debug)]
pub struct GraphParams {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
    pub gammas: Vec<NodeId>,
    pub betas: Vec<NodeId>,
}

impl GraphParams {
    /// Ids in the canonical trainable order.
    pub fn ordered_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(2 * self.weights.len() + 2 * self.gammas.len());
        for (w, b) in self.weights.iter().zip(self.biases.iter()) {
            out.push(*w);
            out.push(*b);
        }
        for (g, b) in self.gammas.iter().zip(self.betas.iter()) {
            out.push(*g);
            out.push(*b);
        }
        out
    }
}

/// Put every trainable tensor on the tape as a leaf.
pub fn register_params(tape: &mut Tape, params: &NetParams) -> GraphParams {
    let mut weights = Vec::with_capacity(params.layers.len());
    let mut biases = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        weights.push(tape.leaf(layer.weight.clone()));
        biases.push(tape.leaf(layer.bias.clone()));
    }
    let mut gammas = Vec::with_capacity(params.norms.len());
    let mut betas = Vec::with_capacity(params.norms.len());
    for norm in &params.norms {
        gammas.push(tape.leaf(norm.gamma.clone()));
        betas.push(tape.leaf(norm.beta.clone()));
    }
    GraphParams {
        weights,
        biases,
        gammas,
        betas,
    }
}

fn bn_train_graph(
    tape: &mut Tape,
    z: NodeId,
    gamma: NodeId,
    beta: NodeId,
) -> (NodeId, BnStats) {
    let mean = tape.mean_rows(z);
    let neg_mean = tape.neg(mean);
    let centered = tape.add_row(z, neg_mean);
    let sq = tape.mul(centered, centered);
    let var = tape.mean_rows(sq);
    let var_eps = tape.add_const(var, BN_EPS);
    let std = tape.sqrt(var_eps);
    let inv_std = tape.recip(std);
    let normalized = tape.mul_row(centered, inv_std);
    let scaled = tape.mul_row(normalized, gamma);
    let out = tape.add_row(scaled, beta);
    let stats = BnStats {
        mean: tape.value(mean).clone(),
        var: tape.value(var).clone(),
    };
    (out, stats)
}

fn bn_eval_graph(
    tape: &mut Tape,
    z: NodeId,
    gamma: NodeId,
    beta: NodeId,
    running_mean: &Tensor,
    running_var: &Tensor,
) -> NodeId {
    let neg_mean = tape.leaf(running_mean.map(|v| -v));
    let inv_std = tape.leaf(running_var.map(|v| 1.0 / (v + BN_EPS).sqrt()));
    let centered = tape.add_row(z, neg_mean);
    let normalized = tape.mul_row(centered, inv_std);
    let scaled = tape.mul_row(normalized, gamma);
    tape.add_row(scaled, beta)
}

/// Forward pass over a batch leaf `x` (rows are samples). Returns the raw
/// head output node (batch x 2K) and, in train mode, the per-layer batch
/// statistics for the running-stat update.
pub fn forward_mlp_graph(
    tape: &mut Tape,
    x: NodeId,
    gp: &GraphParams,
    params: &NetParams,
    mode: ForwardMode,
) -> (NodeId, Vec<BnStats>) {
    assert_eq!(
        tape.value(x).cols(),
        params.widths[0],
        "input width mismatch"
    );
    let last = params.num_layers() - 1;
    let mut h = x;
    let mut stats = Vec::with_capacity(params.norms.len());
    for l in 0..params.num_layers() {
        let prod = tape.matmul(h, gp.weights[l]);
        let z = tape.add_row(prod, gp.biases[l]);
        if l < last {
            let normalized = match mode {
                ForwardMode::Train => {
                    let (out, st) = bn_train_graph(tape, z, gp.gammas[l], gp.betas[l]);
                    stats.push(st);
                    out
                }
                ForwardMode::Eval => bn_eval_graph(
                    tape,
                    z,
                    gp.gammas[l],
                    gp.betas[l],
                    &params.norms[l].running_mean,
                    &params.norms[l].running_var,
                ),
            };
            h = tape.relu(normalized);
        } else {
            h = z;
        }
    }
    (h, stats)
}

/// Differentiable power heads and beam construction for one sample.
///
/// `z_row` is the 1 x 2K head output row for this sample. Returns the
/// realified (2M x 1) beam node per user. One SPD solve is shared by all K
/// right-hand sides, mirroring the plain path.
pub fn beams_graph(tape: &mut Tape, z_row: NodeId, sample: &CsiSample) -> Result<Vec<NodeId>> {
    let k = sample.num_users();
    let m = sample.antennas();
    assert_eq!(tape.value(z_row).shape(), (1, 2 * k), "head output shape");

    let z_col = tape.transpose(z_row);
    let zp = tape.slice_rows(z_col, 0, k);
    let zq = tape.slice_rows(z_col, k, k);
    let sp = tape.softmax(zp);
    let sq = tape.softmax(zq);
    let p_node = tape.scale(sp, sample.power);
    let q_node = tape.scale(sq, sample.power);

    // A = I_{2M} + sum_j q_j * realify(h_j h_j^H)
    let mut a = tape.leaf(Tensor::identity(2 * m));
    for j in 0..k {
        let mut outer = CMat::zeros(m);
        outer.add_outer(sample.nominal.user(j), 1.0);
        let outer_leaf = tape.leaf(outer.realify_hermitian());
        let qj = tape.slice_rows(q_node, j, 1);
        let scaled = tape.scale_by_scalar(outer_leaf, qj);
        a = tape.add(a, scaled);
    }

    // Right-hand sides: realified nominal channels, one column per user.
    let mut rhs = Tensor::zeros(2 * m, k);
    for (j, h) in sample.nominal.iter().enumerate() {
        for (i, v) in h.realify().into_iter().enumerate() {
            rhs.set(i, j, v);
        }
    }
    let rhs_leaf = tape.leaf(rhs);
    let solutions = tape.solve_spd(a, rhs_leaf)?;

    let mut beams = Vec::with_capacity(k);
    for kk in 0..k {
        let u = tape.slice_cols(solutions, kk, 1);
        let norm = tape.norm2(u);
        let norm_value = tape.value(norm).as_scalar();
        if norm_value <= DIRECTION_EPS {
            return Err(Error::DegenerateChannel { norm: norm_value });
        }
        let inv = tape.recip(norm);
        let direction = tape.scale_by_scalar(u, inv);
        let pk = tape.slice_rows(p_node, kk, 1);
        let amp = tape.sqrt(pk);
        beams.push(tape.scale_by_scalar(direction, amp));
    }
    Ok(beams)
}

/// Sum rate of one sample's beams scored against the actual channels.
pub fn sample_rate_node(tape: &mut Tape, z_row: NodeId, sample: &CsiSample) -> Result<NodeId> {
    let beams = beams_graph(tape, z_row, sample)?;
    Ok(sum_rate_node(tape, &sample.actual, &beams))
}
