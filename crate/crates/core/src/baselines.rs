//! Classical beamformers used for comparison: matched filter (MRT),
//! zero-forcing, regularized zero-forcing with optional error-aware loading,
//! and the iterative WMMSE algorithm with a bisected power multiplier.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{sum_rate, BeamSet};
use crate::numerics::{C64, CMat, CVec};

fn default_wmmse_max_iters() -> usize {
    200
}
fn default_wmmse_rate_tol() -> f64 {
    1e-5
}
fn default_power_tol_rel() -> f64 {
    1e-9
}
fn default_rzf_mode() -> RzfMode {
    RzfMode::Robust
}

/// Diagonal-loading rule for the regularized zero-forcing beamformer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RzfMode {
    /// Classical loading `beta = K / P`.
    Plain,
    /// Error-aware loading `beta = K (1 + mean(eps)) / P`.
    Robust,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub wmmse_max_iters: usize,
    /// Stop when the sum rate changes by less than this (bits/s/Hz).
    pub wmmse_rate_tol: f64,
    /// Power bisection tolerance, relative to the budget.
    pub power_tol_rel: f64,
    pub rzf_mode: RzfMode,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            wmmse_max_iters: default_wmmse_max_iters(),
            wmmse_rate_tol: default_wmmse_rate_tol(),
            power_tol_rel: default_power_tol_rel(),
            rzf_mode: default_rzf_mode(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.wmmse_rate_tol <= 0.0 || self.power_tol_rel <= 0.0 {
            return Err(Error::Config("baseline tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Maximum ratio transmission: matched-filter directions, equal power split.
pub fn mrt(channels: &ChannelSet, power: f64) -> Result<BeamSet> {
    let k = channels.num_users();
    let per_user = (power / k as f64).sqrt();
    let mut beams = Vec::with_capacity(k);
    for h in channels.iter() {
        let norm = h.norm();
        if norm <= 1e-14 {
            return Err(Error::DegenerateChannel { norm });
        }
        beams.push(h.scale_re(per_user / norm));
    }
    Ok(BeamSet::new(beams))
}

/// Zero-forcing: pseudo-inverse directions of the stacked channel matrix,
/// normalized, equal power split. Requires `K <= M` and full row rank.
pub fn zf(channels: &ChannelSet, power: f64) -> Result<BeamSet> {
    let k = channels.num_users();
    let m = channels.antennas();
    if k > m {
        return Err(Error::Config(format!(
            "zero-forcing needs K <= M, got K = {k}, M = {m}"
        )));
    }
    // Gram_{ij} = h_i^H h_j; the pseudo-inverse column for user k is
    // G^H Gram^{-1} e_k with G the K x M stack of h_k^H rows.
    let mut gram = CMat::zeros(k);
    for i in 0..k {
        for j in 0..k {
            gram.set(i, j, channels.user(i).dot_h(channels.user(j)));
        }
    }
    let factor = gram.cholesky()?;
    let per_user = (power / k as f64).sqrt();
    let mut beams = Vec::with_capacity(k);
    for kk in 0..k {
        let mut e = CVec::zeros(k);
        let mut e_data: Vec<C64> = e.as_slice().to_vec();
        e_data[kk] = C64::new(1.0, 0.0);
        e = CVec::new(e_data);
        let c = factor.solve(&e);
        // direction = sum_j h_j * c_j
        let mut dir = vec![C64::new(0.0, 0.0); m];
        for (j, h) in channels.iter().enumerate() {
            let cj = c.get(j);
            for (d, &hv) in dir.iter_mut().zip(h.iter()) {
                *d += hv * cj;
            }
        }
        let dir = CVec::new(dir);
        let norm = dir.norm();
        if norm <= 1e-14 {
            return Err(Error::DegenerateChannel { norm });
        }
        beams.push(dir.scale_re(per_user / norm));
    }
    Ok(BeamSet::new(beams))
}

/// Regularized zero-forcing with diagonal loading. Robust mode inflates the
/// loading by the mean known error variance.
pub fn rzf(
    channels: &ChannelSet,
    power: f64,
    error_var: &[f64],
    cfg: &BaselineConfig,
) -> Result<BeamSet> {
    assert!(power > 0.0, "power budget must be positive");
    let k = channels.num_users();
    assert_eq!(error_var.len(), k, "error variance length mismatch");
    let mean_eps = error_var.iter().sum::<f64>() / k as f64;
    let beta = match cfg.rzf_mode {
        RzfMode::Plain => k as f64 / power,
        RzfMode::Robust => k as f64 * (1.0 + mean_eps) / power,
    };
    rzf_with_loading(channels, power, beta)
}

/// Regularized zero-forcing at an explicit loading factor.
pub fn rzf_with_loading(channels: &ChannelSet, power: f64, beta: f64) -> Result<BeamSet> {
    let k = channels.num_users();
    let m = channels.antennas();
    let mut a = CMat::zeros(m);
    for h in channels.iter() {
        a.add_outer(h, 1.0);
    }
    for i in 0..m {
        a.set(i, i, a.get(i, i) + C64::new(beta, 0.0));
    }
    let factor = a.cholesky()?;
    let per_user = (power / k as f64).sqrt();
    let mut beams = Vec::with_capacity(k);
    for h in channels.iter() {
        let u = factor.solve(h);
        let norm = u.norm();
        if norm <= 1e-14 {
            return Err(Error::DegenerateChannel { norm });
        }
        beams.push(u.scale_re(per_user / norm));
    }
    Ok(BeamSet::new(beams))
}

/// WMMSE outcome: final beams plus the per-iteration sum-rate trace
/// (starting at the MRT initializer).
#[derive(Clone, Debug)]
pub struct WmmseOutcome {
    pub beams: BeamSet,
    pub iterations: usize,
    pub converged: bool,
    /// Sum rate after each iterate, `trace[0]` being the MRT start.
    pub trace: Vec<f64>,
}

/// Iterative WMMSE for sum-rate maximization under a sum power constraint.
///
/// Alternates scalar MMSE receivers, MSE weights, and the transmit update
/// `v_k = w_k u_k^* (sum_j w_j |u_j|^2 h_j h_j^H + mu I)^{-1} h_k`, with
/// `mu >= 0` bisected until the transmit power meets the budget.
pub fn wmmse(channels: &ChannelSet, power: f64, cfg: &BaselineConfig) -> Result<WmmseOutcome> {
    let k = channels.num_users();
    let m = channels.antennas();
    let mut beams = mrt(channels, power)?;
    let mut best = beams.clone();
    let mut best_rate = sum_rate(channels, &beams);
    let mut trace = vec![best_rate];
    let power_tol = cfg.power_tol_rel * power;

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.wmmse_max_iters {
        iterations += 1;

        // (i) scalar MMSE receivers.
        let mut receivers = Vec::with_capacity(k);
        for kk in 0..k {
            let h_k = channels.user(kk);
            let mut denom = 1.0;
            for v in beams.iter() {
                denom += h_k.dot_h(v).norm_sqr();
            }
            receivers.push(h_k.dot_h(beams.user(kk)) / denom);
        }

        // (ii) MSE weights w_k = 1 / (1 - Re(u_k^* h_k^H v_k)).
        let mut weights = Vec::with_capacity(k);
        for kk in 0..k {
            let cross = (receivers[kk].conj() * channels.user(kk).dot_h(beams.user(kk))).re;
            weights.push(1.0 / (1.0 - cross));
        }

        // (iii) transmit update with bisected power multiplier.
        let mut j_mat = CMat::zeros(m);
        for kk in 0..k {
            j_mat.add_outer(channels.user(kk), weights[kk] * receivers[kk].norm_sqr());
        }
        let tx_power = |mu: f64| -> Result<f64> {
            let mut a = j_mat.clone();
            for i in 0..m {
                a.set(i, i, a.get(i, i) + C64::new(mu, 0.0));
            }
            let factor = a.cholesky()?;
            let mut total = 0.0;
            for kk in 0..k {
                let y = factor.solve(channels.user(kk));
                total += weights[kk] * weights[kk] * receivers[kk].norm_sqr() * y.norm_sqr();
            }
            Ok(total)
        };

        // Power is strictly decreasing in mu. Treat a failed factorization
        // at mu = 0 (singular J) as infinite power, then grow the upper end
        // of the bracket until it undershoots the budget.
        let power_at_zero = tx_power(0.0);
        let mu = match power_at_zero {
            Ok(p0) if p0 <= power => 0.0,
            _ => {
                let mut hi = 1.0;
                let mut grow = 0;
                while tx_power(hi)? > power {
                    hi *= 2.0;
                    grow += 1;
                    if grow > 200 {
                        return Err(Error::BracketFailure(
                            "power multiplier upper bound not found".into(),
                        ));
                    }
                }
                let mut lo = 0.0;
                let mut mid = 0.5 * hi;
                for _ in 0..200 {
                    mid = 0.5 * (lo + hi);
                    let p_mid = tx_power(mid).unwrap_or(f64::INFINITY);
                    if (p_mid - power).abs() <= power_tol {
                        break;
                    }
                    if p_mid > power {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                mid
            }
        };

        let mut a = j_mat.clone();
        for i in 0..m {
            a.set(i, i, a.get(i, i) + C64::new(mu, 0.0));
        }
        let factor = a.cholesky()?;
        let mut new_beams = Vec::with_capacity(k);
        for kk in 0..k {
            let y = factor.solve(channels.user(kk));
            new_beams.push(y.scale(receivers[kk].conj() * weights[kk]));
        }
        beams = BeamSet::new(new_beams);

        let rate = sum_rate(channels, &beams);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(rate);
        if rate >= best_rate {
            best_rate = rate;
            best = beams.clone();
        }
        if (rate - prev).abs() < cfg.wmmse_rate_tol {
            converged = true;
            break;
        }
    }

    Ok(WmmseOutcome {
        beams: best,
        iterations,
        converged,
        trace,
    })
}
