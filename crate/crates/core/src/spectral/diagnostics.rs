//! Numerical evidence for the smoothness hypothesis on `C`: eigenvalue decay
//! faster than `n^-5`, the sup-norm / fourth-derivative inequality for each
//! eigenfunction, and convergence of the series bounding `<x|T^{1/2}|x>`.

use serde::{Deserialize, Serialize};

use super::SpectralDecomposition;
use crate::error::{Error, Result};

pub const MIN_FD_GRID: usize = 64;
const MIN_MODES: usize = 12;
/// Eigenvalues below this fraction of `mu_1` are treated as round-off.
const STABLE_FLOOR: f64 = 1e-12;
const REQUIRED_DECAY: f64 = 5.0;
const CAUCHY_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    /// 1-based mode index.
    pub n: usize,
    pub sup_sq: f64,
    pub d4_l2: f64,
    /// `1 + 2 ||phi^(4)||_2^{1/4}`
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessDiagnostics {
    /// Least-squares slope of `ln mu_n` against `ln n` over `fit_range`.
    pub decay_slope: f64,
    /// Inclusive 1-based mode range used for the fit.
    pub fit_range: (usize, usize),
    pub decay_pass: bool,
    pub stable_modes: usize,
    pub mode_checks: Vec<ModeCheck>,
    pub inequalities_hold: bool,
    /// `max_n mu_n ||phi_n^(4)||_2` over the stable modes.
    pub a_estimate: f64,
    /// Partial sum of `sqrt(mu_n) + 2 a^{1/4} mu_n^{1/4}` over the stable modes.
    pub bound_series_sum: f64,
    /// Power-law slope of the series terms over `fit_range`.
    pub term_slope: f64,
    /// Extrapolated remainder of the series relative to its partial sum.
    pub relative_remainder: f64,
    pub sum_converges: bool,
    pub verdict: bool,
}

pub fn smoothness_diagnostics(decomp: &SpectralDecomposition) -> Result<SmoothnessDiagnostics> {
    let m = decomp.grid().len();
    if m < MIN_FD_GRID {
        return Err(Error::GridTooCoarse {
            got: m,
            need: MIN_FD_GRID,
        });
    }
    let mu = decomp.eigenvalues();
    if mu.len() < MIN_MODES {
        return Err(Error::TooFewModes {
            got: mu.len(),
            need: MIN_MODES,
        });
    }
    let stable = mu
        .iter()
        .take_while(|&&v| v >= STABLE_FLOOR * mu[0])
        .count()
        .max(MIN_MODES.min(mu.len()));

    let lo = (stable / 8).max(2);
    let hi = (stable / 2).max(lo + 3).min(stable);
    let xs: Vec<f64> = (lo..=hi).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = (lo..=hi).map(|n| mu[n - 1].ln()).collect();
    let decay_slope = ls_slope(&xs, &ys);

    // eigenfunctions on a uniform grid for finite differences
    let h = 1.0 / (m - 1) as f64;
    let pts: Vec<f64> = (0..m).map(|i| (i as f64 * h).min(1.0)).collect();
    let ext = decomp.eval_eigenfunctions(&pts)?;
    let mut mode_checks = Vec::with_capacity(stable);
    let mut a_estimate: f64 = 0.0;
    for n in 0..stable {
        let col: Vec<_> = (0..m).map(|i| ext[(i, n)]).collect();
        let node_sup = (0..m)
            .map(|i| decomp.eigenfunctions()[(i, n)].norm())
            .fold(0.0, f64::max);
        let sup = col.iter().map(|z| z.norm()).fold(node_sup, f64::max);
        let d4 = fourth_derivative_l2(&col, h);
        let bound = 1.0 + 2.0 * d4.powf(0.25);
        let sup_sq = sup * sup;
        mode_checks.push(ModeCheck {
            n: n + 1,
            sup_sq,
            d4_l2: d4,
            bound,
            holds: sup_sq <= bound + 1e-9,
        });
        a_estimate = a_estimate.max(mu[n] * d4);
    }
    let inequalities_hold = mode_checks.iter().all(|c| c.holds);

    let a4 = a_estimate.powf(0.25);
    let terms: Vec<f64> = mu[..stable]
        .iter()
        .map(|&v| v.sqrt() + 2.0 * a4 * v.powf(0.25))
        .collect();
    let bound_series_sum = crate::special::compensated_sum(terms.iter().copied());
    let tys: Vec<f64> = (lo..=hi).map(|n| terms[n - 1].ln()).collect();
    let term_slope = ls_slope(&xs, &tys);
    let last = terms[stable - 1];
    let relative_remainder = if term_slope < -1.0 {
        last * stable as f64 / (-term_slope - 1.0) / bound_series_sum
    } else {
        f64::INFINITY
    };
    let sum_converges = relative_remainder <= CAUCHY_TOL;
    let decay_pass = decay_slope < -REQUIRED_DECAY;

    Ok(SmoothnessDiagnostics {
        decay_slope,
        fit_range: (lo, hi),
        decay_pass,
        stable_modes: stable,
        mode_checks,
        inequalities_hold,
        a_estimate,
        bound_series_sum,
        term_slope,
        relative_remainder,
        sum_converges,
        verdict: decay_pass && sum_converges && inequalities_hold,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `||f''''||_2` on a uniform grid: 5-point centred stencil inside, the same
/// stencil shifted one-sided at the two points nearest each end, trapezoid
/// rule for the norm.
fn fourth_derivative_l2(f: &[num_complex::Complex64], h: f64) -> f64 {
    let m = f.len();
    let h4 = h.powi(4);
    let stencil = |s: usize| (f[s] - f[s + 1] * 4.0 + f[s + 2] * 6.0 - f[s + 3] * 4.0 + f[s + 4]) / h4;
    let d: Vec<f64> = (0..m)
        .map(|i| {
            let start = i.saturating_sub(2).min(m - 5);
            stencil(start).norm_sqr()
        })
        .collect();
    let interior: f64 = d[1..m - 1].iter().sum();
    ((interior + 0.5 * (d[0] + d[m - 1])) * h).sqrt()
}
