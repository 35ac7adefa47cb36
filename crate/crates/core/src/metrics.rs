//! SINR, per-user achievable rate, and sum rate, in two flavors: plain f64
//! evaluation for baselines/tests and tape nodes for the training loss. Noise
//! variance is fixed at 1, so the transmit SNR equals the power budget.

use std::f64::consts::LOG2_E;

use crate::channel::ChannelSet;
use crate::numerics::{CVec, NodeId, Tape, Tensor};

/// Per-user transmit beams; beams[k] serves user k.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSet {
    beams: Vec<CVec>,
}

impl BeamSet {
    pub fn new(beams: Vec<CVec>) -> Self {
        assert!(!beams.is_empty(), "BeamSet needs at least one beam");
        let m = beams[0].len();
        assert!(
            beams.iter().all(|v| v.len() == m),
            "all beams must share a length"
        );
        BeamSet { beams }
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn antennas(&self) -> usize {
        self.beams[0].len()
    }

    pub fn user(&self, k: usize) -> &CVec {
        &self.beams[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CVec> {
        self.beams.iter()
    }

    pub fn total_power(&self) -> f64 {
        self.beams.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Rates and SINRs for one channel/beam pair.
#[derive(Clone, Debug)]
pub struct RateReport {
    /// Per-user rate in bits/s/Hz.
    pub per_user: Vec<f64>,
    pub sum: f64,
    /// Linear SINR per user.
    pub sinr: Vec<f64>,
}

fn sinr_for(h_k: &CVec, beams: &BeamSet, k: usize) -> f64 {
    let signal = h_k.dot_h(beams.user(k)).norm_sqr();
    let mut interference = 0.0;
    for (j, v_j) in beams.iter().enumerate() {
        if j != k {
            interference += h_k.dot_h(v_j).norm_sqr();
        }
    }
    signal / (interference + 1.0)
}

/// Achievable rate of user `k`: `log2(1 + SINR_k)`.
pub fn user_rate(h_k: &CVec, beams: &BeamSet, k: usize) -> f64 {
    assert_eq!(h_k.len(), beams.antennas(), "channel/beam length mismatch");
    assert!(k < beams.num_users(), "user index out of range");
    (1.0 + sinr_for(h_k, beams, k)).ln() * LOG2_E
}

/// Sum rate over all users.
pub fn sum_rate(h: &ChannelSet, beams: &BeamSet) -> f64 {
    assert_eq!(h.num_users(), beams.num_users(), "user count mismatch");
    (0..h.num_users())
        .map(|k| user_rate(h.user(k), beams, k))
        .sum()
}

pub fn rate_report(h: &ChannelSet, beams: &BeamSet) -> RateReport {
    assert_eq!(h.num_users(), beams.num_users(), "user count mismatch");
    let sinr: Vec<f64> = (0..h.num_users())
        .map(|k| sinr_for(h.user(k), beams, k))
        .collect();
    let per_user: Vec<f64> = sinr.iter().map(|&s| (1.0 + s).ln() * LOG2_E).collect();
    let sum = per_user.iter().sum();
    RateReport {
        per_user,
        sum,
        sinr,
    }
}

/// Row constants for `h^H v` on realified beams: with `v = [Re v; Im v]`,
/// `Re(h^H v) = [Re h; Im h]^T v` and `Im(h^H v) = [-Im h; Re h]^T v`.
fn gain_rows(h: &CVec) -> (Tensor, Tensor) {
    let n = h.len();
    let mut re_row = Vec::with_capacity(2 * n);
    let mut im_row = Vec::with_capacity(2 * n);
    for z in h.iter() {
        re_row.push(z.re);
        im_row.push(-z.im);
    }
    for z in h.iter() {
        re_row.push(z.im);
        im_row.push(z.re);
    }
    (Tensor::row(re_row), Tensor::row(im_row))
}

/// `|h^H v|^2` as a scalar node; `beam` is the realified 2M x 1 beam.
fn gain_sqr_node(tape: &mut Tape, h: &CVec, beam: NodeId) -> NodeId {
    let (re_row, im_row) = gain_rows(h);
    let re_const = tape.leaf(re_row);
    let im_const = tape.leaf(im_row);
    let re = tape.matmul(re_const, beam);
    let im = tape.matmul(im_const, beam);
    let re2 = tape.mul(re, re);
    let im2 = tape.mul(im, im);
    tape.add(re2, im2)
}

/// Differentiable sum rate: `beams[k]` is the realified (2M x 1) beam node
/// for user k, scored against the channels in `h`.
pub fn sum_rate_node(tape: &mut Tape, h: &ChannelSet, beams: &[NodeId]) -> NodeId {
    let k_users = h.num_users();
    assert_eq!(beams.len(), k_users, "user count mismatch");

    // Gains first: a[k][j] = |h_k^H v_j|^2.
    let mut gains = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let row: Vec<NodeId> = (0..k_users)
            .map(|j| gain_sqr_node(tape, h.user(k), beams[j]))
            .collect();
        gains.push(row);
    }

    let mut rates = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let interference: Vec<NodeId> = (0..k_users)
            .filter(|&j| j != k)
            .map(|j| gains[k][j])
            .collect();
        let denom = if interference.is_empty() {
            tape.scalar(1.0)
        } else {
            let s = tape.sum_nodes(&interference);
            tape.add_const(s, 1.0)
        };
        let sinr = tape.div(gains[k][k], denom);
        let one_plus = tape.add_const(sinr, 1.0);
        let ln = tape.log(one_plus);
        rates.push(tape.scale(ln, LOG2_E));
    }
    tape.sum_nodes(&rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{corrupt, ChannelSet};
    use crate::numerics::C64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_cvec(rng: &mut impl Rng, n: usize) -> CVec {
        CVec::new(
            (0..n)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
    }

    /// Independent re-implementation of the rate formula, kept deliberately
    /// separate from the library path.
    fn oracle_rate(h_k: &[C64], beams: &[Vec<C64>], k: usize) -> f64 {
        let inner = |a: &[C64], b: &[C64]| -> C64 {
            a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
        };
        let sig = inner(h_k, &beams[k]).norm_sqr();
        let mut itf = 0.0;
        for (j, v) in beams.iter().enumerate() {
            if j != k {
                itf += inner(h_k, v).norm_sqr();
            }
        }
        (1.0 + sig / (itf + 1.0)).log2()
    }

    #[test]
    fn single_user_unit_gain() {
        let h = CVec::new(vec![c(1.0, 0.0)]);
        let v = BeamSet::new(vec![CVec::new(vec![c(1.0, 0.0)])]);
        assert!((user_rate(&h, &v, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_two_user_case() {
        let h = ChannelSet::new(vec![
            CVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            CVec::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
        ]);
        let p = 2.0f64;
        let amp = (p / 2.0).sqrt();
        let v = BeamSet::new(vec![
            CVec::new(vec![c(amp, 0.0), c(0.0, 0.0)]),
            CVec::new(vec![c(0.0, 0.0), c(amp, 0.0)]),
        ]);
        assert!((user_rate(h.user(0), &v, 0) - 1.0).abs() < 1e-15);
        assert!((user_rate(h.user(1), &v, 1) - 1.0).abs() < 1e-15);
        assert!((sum_rate(&h, &v) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_beams_zero_rate() {
        let h = ChannelSet::new(vec![random_cvec(&mut ChaCha8Rng::seed_from_u64(1), 2)]);
        let v = BeamSet::new(vec![CVec::zeros(2)]);
        assert_eq!(sum_rate(&h, &v), 0.0);
    }

    #[test]
    fn matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h: Vec<CVec> = (0..2).map(|_| random_cvec(&mut rng, 2)).collect();
            let v: Vec<CVec> = (0..2).map(|_| random_cvec(&mut rng, 2)).collect();
            let hs = ChannelSet::new(h.clone());
            let vs = BeamSet::new(v.clone());
            let v_raw: Vec<Vec<C64>> = v.iter().map(|b| b.as_slice().to_vec()).collect();
            for k in 0..2 {
                let got = user_rate(hs.user(k), &vs, k);
                let want = oracle_rate(hs.user(k).as_slice(), &v_raw, k);
                assert!((got - want).abs() <= 1e-12, "user {k}: {got} vs {want}");
            }
            let total: f64 = (0..2)
                .map(|k| oracle_rate(hs.user(k).as_slice(), &v_raw, k))
                .sum();
            assert!((sum_rate(&hs, &vs) - total).abs() <= 1e-12);
        }
    }

    #[test]
    fn report_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = ChannelSet::new(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
        let v = BeamSet::new(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
        let report = rate_report(&h, &v);
        assert!((report.sum - report.per_user.iter().sum::<f64>()).abs() <= 1e-12);
        assert!(report.per_user.iter().all(|&r| r >= 0.0));
        assert_eq!(report.sinr.len(), 2);
        assert!((report.sum - sum_rate(&h, &v)).abs() <= 1e-12);
    }

    #[test]
    fn common_phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ChannelSet::new(vec![random_cvec(&mut rng, 3), random_cvec(&mut rng, 3)]);
        let v: Vec<CVec> = (0..2).map(|_| random_cvec(&mut rng, 3)).collect();
        let base = sum_rate(&h, &BeamSet::new(v.clone()));
        let phase = C64::from_polar(1.0, 1.2345);
        let rotated = BeamSet::new(v.iter().map(|b| b.scale(phase)).collect());
        assert!((sum_rate(&h, &rotated) - base).abs() < 1e-12);
    }

    #[test]
    fn mismatch_between_actual_and_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut distinct = 0;
        for _ in 0..20 {
            let h = ChannelSet::new(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
            let (nominal, _) = corrupt(&h, 1.0, &mut rng).unwrap();
            let v = BeamSet::new(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
            if (sum_rate(&h, &v) - sum_rate(&nominal, &v)).abs() > 0.0 {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 20);
    }

    #[test]
    fn node_agrees_with_plain_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h = ChannelSet::new(vec![random_cvec(&mut rng, 2), random_cvec(&mut rng, 2)]);
            let v: Vec<CVec> = (0..2).map(|_| random_cvec(&mut rng, 2)).collect();
            let plain = sum_rate(&h, &BeamSet::new(v.clone()));

            let mut tape = Tape::new();
            let beam_nodes: Vec<NodeId> = v
                .iter()
                .map(|b| tape.leaf(Tensor::column(b.realify())))
                .collect();
            let node = sum_rate_node(&mut tape, &h, &beam_nodes);
            assert!((tape.value(node).as_scalar() - plain).abs() <= 1e-12);
        }
    }
}
