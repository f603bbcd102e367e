//! Closed-form tails, bounds and asymptotes for `||phi||_2^2` and its
//! split into the top eigenspace and the orthogonal remainder.
//!
//! Everything here is a pure function of the grouped spectrum
//! `(kappa_j, g_j)`. Products over groups are accumulated as compensated
//! sums of logarithms.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::{estimate, ConditionalEnsemble};
use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::sampling::standard_complex;
use crate::special::{compensated_sum, gamma_q_int, hypoexponential_tail, ln_factorial};
use crate::spectral::SpectralDecomposition;

pub const DEFAULT_OVERLAP_MC_SAMPLES: usize = 1_000_000;
const OVERLAP_MC_SEED: u64 = 0x006F_7665_726C_6170;

/// Grouped spectrum with `kappa_1 > kappa_2 > ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    groups: Vec<(f64, usize)>,
}

impl SpectrumSummary {
    pub fn new(groups: Vec<(f64, usize)>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::arg("groups", "spectrum has no groups"));
        }
        for (i, &(k, g)) in groups.iter().enumerate() {
            if !(k > 0.0) || !k.is_finite() || g == 0 {
                return Err(Error::arg("groups", format!("group {i} = ({k}, {g}) is invalid")));
            }
            if i > 0 && k >= groups[i - 1].0 {
                return Err(Error::NoSpectralGap {
                    kappa1: groups[i - 1].0,
                    kappa2: k,
                });
            }
        }
        Ok(SpectrumSummary { groups })
    }

    pub fn from_decomposition(decomp: &SpectralDecomposition) -> Self {
        SpectrumSummary {
            groups: decomp
                .groups()
                .iter()
                .map(|g| (g.kappa, g.multiplicity))
                .collect(),
        }
    }

    pub fn groups(&self) -> &[(f64, usize)] {
        &self.groups
    }

    pub fn kappa1(&self) -> f64 {
        self.groups[0].0
    }

    pub fn g1(&self) -> usize {
        self.groups[0].1
    }

    pub fn kappa2(&self) -> Option<f64> {
        self.groups.get(1).map(|g| g.0)
    }

    pub fn orthogonal(&self) -> &[(f64, usize)] {
        &self.groups[1..]
    }

    /// `ln prod_{j>=2} (1 - rho_j)^{-g_j}` for ratios `rho_j = f(kappa_j / kappa_1)`.
    fn ln_product(&self, ratio: impl Fn(f64) -> f64) -> f64 {
        let k1 = self.kappa1();
        -compensated_sum(
            self.orthogonal()
                .iter()
                .map(|&(k, g)| g as f64 * (-ratio(k / k1)).ln_1p()),
        )
    }

    /// Tilt normalizer `Z = prod_{j>=2} (1 - kappa_j / kappa_1)^{-g_j} = E e^{U / kappa_1}`.
    pub fn tilt_normalizer(&self) -> f64 {
        self.ln_product(|x| x).exp()
    }

    /// Orthogonal variances under the tilt: `kappa_j / (1 - kappa_j / kappa_1)`.
    pub fn tilted_variances(&self) -> Vec<(f64, usize)> {
        let k1 = self.kappa1();
        self.orthogonal()
            .iter()
            .map(|&(k, g)| (k / (1.0 - k / k1), g))
            .collect()
    }
}

/// `P(||phi_par||^2 > r)` for the `Gamma(g_1, kappa_1)` law: `e^{-r/kappa_1} sum_{k<g_1} (r/kappa_1)^k / k!`.
pub fn parallel_tail(r: f64, g1: usize, kappa1: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    gamma_q_int(g1 as u32, r / kappa1)
}

/// The midpoint `a = (1/kappa_1 + 1/kappa_2) / 2`; `None` without orthogonal groups.
pub fn default_chernoff_rate(spectrum: &SpectrumSummary) -> Option<f64> {
    spectrum
        .kappa2()
        .map(|k2| 0.5 * (1.0 / spectrum.kappa1() + 1.0 / k2))
}

/// Exponential Markov bound `P(||phi_perp||^2 > u) <= e^{-a u} prod_{j>=2} (1 - a kappa_j)^{-g_j}`,
/// valid for `0 < a < 1/kappa_2`.
pub fn chernoff_bound(u: f64, a: f64, spectrum: &SpectrumSummary) -> Result<f64> {
    let upper = spectrum.kappa2().map_or(f64::INFINITY, |k2| 1.0 / k2);
    if !(a > 0.0 && a < upper) {
        return Err(Error::arg("a", format!("must lie in (0, {upper}), got {a}")));
    }
    let ln_prod = -compensated_sum(
        spectrum
            .orthogonal()
            .iter()
            .map(|&(k, g)| g as f64 * (-a * k).ln_1p()),
    );
    Ok((-a * u + ln_prod).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    /// Standard error; zero for closed forms.
    pub se: f64,
    pub method: BoundMethod,
}

/// `P(U > t)` for `U = sum_j kappa'_j Gamma(g_j, 1)`, closed form when every
/// group is simple and the partial fractions are well conditioned.
fn tilted_tail(tilted: &[(f64, usize)], t: f64, mc_samples: usize, seed: u64) -> BoundValue {
    if t <= 0.0 {
        return BoundValue {
            value: 1.0,
            se: 0.0,
            method: BoundMethod::ClosedForm,
        };
    }
    if tilted.iter().all(|&(_, g)| g == 1) {
        let means: Vec<f64> = tilted.iter().map(|&(v, _)| v).collect();
        if let Some(p) = hypoexponential_tail(&means, t) {
            return BoundValue {
                value: p,
                se: 0.0,
                method: BoundMethod::ClosedForm,
            };
        }
    }
    let factory = StreamFactory::new(seed);
    let hits: usize = (0..mc_samples as u64)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = factory.stream(i);
            let mut u = 0.0;
            for &(v, g) in tilted {
                for _ in 0..g {
                    u += v * standard_complex(&mut rng).norm_sqr();
                }
            }
            u > t
        })
        .count();
    let n = mc_samples as f64;
    let p = hits as f64 / n;
    BoundValue {
        value: p,
        se: (p * (1.0 - p) / n).sqrt(),
        method: BoundMethod::MonteCarlo,
    }
}

/// Upper bound on `P(||phî_perp||_2 > eps | ||phi||^2 > r)`:
/// `int_{eps^2 r}^inf e^{u/kappa_1} dP_perp(u) = Z P_tilted(U > eps^2 r)`.
pub fn overlap_bound(r: f64, eps: f64, spectrum: &SpectrumSummary) -> Result<BoundValue> {
    overlap_bound_with(r, eps, spectrum, DEFAULT_OVERLAP_MC_SAMPLES, OVERLAP_MC_SEED)
}

pub fn overlap_bound_with(
    r: f64,
    eps: f64,
    spectrum: &SpectrumSummary,
    mc_samples: usize,
    seed: u64,
) -> Result<BoundValue> {
    if !(eps >= 0.0) {
        return Err(Error::arg("eps", format!("must be >= 0, got {eps}")));
    }
    if !(r > 0.0) {
        return Err(Error::arg("r", format!("must be > 0, got {r}")));
    }
    if spectrum.orthogonal().is_empty() {
        return Ok(BoundValue {
            value: if eps > 0.0 { 0.0 } else { 1.0 },
            se: 0.0,
            method: BoundMethod::ClosedForm,
        });
    }
    let z = spectrum.tilt_normalizer();
    let tail = tilted_tail(&spectrum.tilted_variances(), eps * eps * r, mc_samples, seed);
    Ok(BoundValue {
        value: z * tail.value,
        se: z * tail.se,
        method: tail.method,
    })
}

/// Exact `P(||phi||^2 > r)` when every group (including the top one) is simple.
pub fn exact_norm_tail(r: f64, spectrum: &SpectrumSummary) -> Option<f64> {
    if spectrum.groups().iter().any(|&(_, g)| g != 1) {
        return None;
    }
    let means: Vec<f64> = spectrum.groups().iter().map(|&(k, _)| k).collect();
    hypoexponential_tail(&means, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Phi,
    Psi,
}

/// Large-`r` asymptote of `P(||phi||^2 > r)` (`Field::Phi`) or of
/// `P(||psi||^2 > r / kappa_1)` (`Field::Psi`).
pub fn tail_asymptote(r: f64, spectrum: &SpectrumSummary, field: Field) -> f64 {
    let k1 = spectrum.kappa1();
    let g1 = spectrum.g1();
    let x = r / k1;
    let ln_prod = match field {
        Field::Phi => spectrum.ln_product(|q| q),
        Field::Psi => spectrum.ln_product(|q| q.sqrt()),
    };
    let ln_lead = (g1 as f64 - 1.0) * x.ln() - x - ln_factorial(g1 as u32 - 1);
    let ln_lead = if g1 == 1 { -x } else { ln_lead };
    (ln_lead + ln_prod).exp()
}

/// `C_inf = prod_{j>=2} [(1 - kappa_j/kappa_1) / (1 - sqrt(kappa_j/kappa_1))]^{g_j}`.
pub fn c_infinity(spectrum: &SpectrumSummary) -> f64 {
    let k1 = spectrum.kappa1();
    compensated_sum(spectrum.orthogonal().iter().map(|&(k, g)| {
        let q = k / k1;
        g as f64 * ((-q).ln_1p() - (-q.sqrt()).ln_1p())
    }))
    .exp()
}

/// `int u e^{u/kappa_1} dP_perp(u) = Z sum_{j>=2} g_j kappa'_j`, an `r`-independent
/// cap on the conditional mean of `||phi_perp||^2`.
pub fn rho_perp_bound(spectrum: &SpectrumSummary) -> f64 {
    if spectrum.orthogonal().is_empty() {
        return 0.0;
    }
    let mean = compensated_sum(spectrum.tilted_variances().iter().map(|&(v, g)| g as f64 * v));
    spectrum.tilt_normalizer() * mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensationRow {
    pub r: f64,
    pub e_par: f64,
    pub e_par_se: f64,
    pub e_perp: f64,
    pub e_perp_se: f64,
    pub rho_bound: f64,
    /// `E_par(r) > r - rho` within 3 SE.
    pub par_flag: bool,
    /// `E_perp(r) <= rho` within 3 SE.
    pub perp_flag: bool,
    /// `E_par(r) + E_perp(r) > r`.
    pub sum_flag: bool,
}

pub fn condensation_curves(
    ensembles: &[ConditionalEnsemble],
    spectrum: &SpectrumSummary,
) -> Result<Vec<CondensationRow>> {
    let rho = rho_perp_bound(spectrum);
    ensembles
        .iter()
        .map(|e| {
            let par = estimate(e, |s| s.par_sq)?;
            let perp = estimate(e, |s| s.perp_sq)?;
            let r = e.threshold;
            Ok(CondensationRow {
                r,
                e_par: par.value,
                e_par_se: par.se,
                e_perp: perp.value,
                e_perp_se: perp.se,
                rho_bound: rho,
                par_flag: par.value + 3.0 * par.se > r - rho,
                perp_flag: perp.value - 3.0 * perp.se <= rho,
                sum_flag: par.value + perp.value > r,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MomentOutcome {
    Finite { value: f64 },
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierMoment {
    pub q: u32,
    pub lambda: f64,
    /// Divergence threshold `1 / (q kappa_1)`.
    pub lambda_q: f64,
    pub outcome: MomentOutcome,
}

/// `E e^{q lambda ||phi||^2} = prod_n (1 - q lambda mu_n)^{-1}`, finite iff
/// `q lambda kappa_1 < 1`.
pub fn amplifier_moment(eigenvalues: &[f64], q: u32, lambda: f64) -> Result<AmplifierMoment> {
    if q == 0 {
        return Err(Error::arg("q", "must be a positive integer"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::arg("lambda", format!("must be >= 0, got {lambda}")));
    }
    let kappa1 = eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(kappa1 > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let lambda_q = 1.0 / (q as f64 * kappa1);
    let ql = q as f64 * lambda;
    let outcome = if ql * kappa1 >= 1.0 {
        MomentOutcome::Divergent
    } else {
        let ln = -compensated_sum(eigenvalues.iter().map(|&mu| (-ql * mu).ln_1p()));
        MomentOutcome::Finite { value: ln.exp() }
    };
    Ok(AmplifierMoment {
        q,
        lambda,
        lambda_q,
        outcome,
    })
}

/// One formula evaluated at one parameter point, optionally against Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub formula: String,
    /// Short label of the result the row checks.
    pub tag: String,
    pub params: String,
    pub closed_form: f64,
    pub mc: Option<f64>,
    pub se: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rows: Vec<ReportRow>,
}

impl AnalysisReport {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    /// Bound row: passes when `mc <= bound + 3 se`.
    pub fn push_bound(&mut self, formula: &str, tag: &str, params: String, bound: f64, mc: f64, se: f64) {
        self.rows.push(ReportRow {
            formula: formula.into(),
            tag: tag.into(),
            params,
            closed_form: bound,
            mc: Some(mc),
            se: Some(se),
            verdict: Verdict::from_bool(mc <= bound + 3.0 * se),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn to_text(&self) -> String {
        let fmt_opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:<22} {:<28} {:>14} {:>14} {:>12} {:>7}",
            "formula", "tag", "params", "closed_form", "mc", "se", "verdict"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<22} {:<22} {:<28} {:>14} {:>14} {:>12} {:>7}",
                r.formula,
                r.tag,
                r.params,
                format!("{:.6e}", r.closed_form),
                fmt_opt(r.mc),
                fmt_opt(r.se),
                r.verdict.as_str()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_mode() -> SpectrumSummary {
        SpectrumSummary::new(vec![(1.0, 1), (0.5, 1)]).unwrap()
    }

    #[test]
    fn parallel_tail_values() {
        assert_eq!(parallel_tail(0.0, 3, 1.0), 1.0);
        assert_relative_eq!(parallel_tail(2.0, 1, 2.0), (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(
            parallel_tail(2.0, 2, 1.0),
            3.0 * (-2.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn chernoff_values() {
        let s = two_mode();
        let a = default_chernoff_rate(&s).unwrap();
        assert_relative_eq!(a, 1.5);
        assert_relative_eq!(chernoff_bound(0.0, a, &s).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            chernoff_bound(2.0, a, &s).unwrap(),
            4.0 * (-3.0f64).exp(),
            max_relative = 1e-14
        );
        assert!(chernoff_bound(1.0, 2.0, &s).is_err());
        assert!(chernoff_bound(1.0, 0.0, &s).is_err());
    }

    #[test]
    fn overlap_values() {
        let s = two_mode();
        let b0 = overlap_bound(10.0, 0.0, &s).unwrap();
        assert_relative_eq!(b0.value, 2.0, max_relative = 1e-14);
        let b = overlap_bound(10.0, 0.5, &s).unwrap();
        assert_eq!(b.method, BoundMethod::ClosedForm);
        assert_relative_eq!(b.value, 2.0 * (-2.5f64).exp(), max_relative = 1e-12);
        let single = SpectrumSummary::new(vec![(1.0, 1)]).unwrap();
        assert_eq!(overlap_bound(10.0, 0.5, &single).unwrap().value, 0.0);
    }

    #[test]
    fn overlap_monte_carlo_path_for_degenerate_groups() {
        // g_2 = 2: tilted U ~ Gamma(2, 1); P(U > t) = (1 + t) e^{-t}, Z = 4
        let s = SpectrumSummary::new(vec![(1.0, 1), (0.5, 2)]).unwrap();
        let b = overlap_bound_with(4.0, 0.5, &s, 200_000, 9).unwrap();
        assert_eq!(b.method, BoundMethod::MonteCarlo);
        let exact = 4.0 * 2.0 * (-1.0f64).exp();
        assert!((b.value - exact).abs() < 4.0 * b.se, "{b:?} vs {exact}");
    }

    #[test]
    fn asymptote_values() {
        let s = two_mode();
        let single = SpectrumSummary::new(vec![(2.0, 1)]).unwrap();
        assert_relative_eq!(
            tail_asymptote(6.0, &single, Field::Phi),
            (-3.0f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            tail_asymptote(10.0, &s, Field::Phi),
            2.0 * (-10.0f64).exp(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            tail_asymptote(10.0, &s, Field::Psi),
            (-10.0f64).exp() / (1.0 - 0.5f64.sqrt()),
            max_relative = 1e-13
        );
        let exact = exact_norm_tail(10.0, &s).unwrap();
        assert!((exact / tail_asymptote(10.0, &s, Field::Phi) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn degenerate_asymptote_has_polynomial_prefactor() {
        let s = SpectrumSummary::new(vec![(1.0, 2)]).unwrap();
        // (r/k)^{1} e^{-r/k} / 1!
        assert_relative_eq!(
            tail_asymptote(5.0, &s, Field::Phi),
            5.0 * (-5.0f64).exp(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn c_infinity_values() {
        assert_eq!(c_infinity(&SpectrumSummary::new(vec![(1.0, 3)]).unwrap()), 1.0);
        let s = SpectrumSummary::new(vec![(1.0, 1), (0.25, 1)]).unwrap();
        assert_relative_eq!(c_infinity(&s), 1.5, max_relative = 1e-14);
        assert_relative_eq!(
            c_infinity(&two_mode()),
            0.5 / (1.0 - 0.5f64.sqrt()),
            max_relative = 1e-14
        );
    }

    #[test]
    fn rho_perp_values() {
        assert_eq!(
            rho_perp_bound(&SpectrumSummary::new(vec![(1.0, 1)]).unwrap()),
            0.0
        );
        assert_relative_eq!(rho_perp_bound(&two_mode()), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn amplifier_values() {
        let m = amplifier_moment(&[1.0, 0.5], 2, 0.25).unwrap();
        assert_relative_eq!(m.lambda_q, 0.5);
        match m.outcome {
            MomentOutcome::Finite { value } => assert!((value - 8.0 / 3.0).abs() < 1e-12),
            MomentOutcome::Divergent => panic!("should be finite"),
        }
        assert_eq!(
            amplifier_moment(&[1.0, 0.5], 2, 0.5).unwrap().outcome,
            MomentOutcome::Divergent
        );
        assert_eq!(
            amplifier_moment(&[1.0, 0.5], 3, 0.0).unwrap().outcome,
            MomentOutcome::Finite { value: 1.0 }
        );
        let near = |f: f64| match amplifier_moment(&[1.0, 0.5], 2, f * 0.5).unwrap().outcome {
            MomentOutcome::Finite { value } => value,
            MomentOutcome::Divergent => f64::INFINITY,
        };
        assert!(near(0.999) > near(0.9));
    }

    #[test]
    fn summary_validation() {
        assert!(SpectrumSummary::new(vec![]).is_err());
        assert!(matches!(
            SpectrumSummary::new(vec![(1.0, 1), (1.0, 1)]),
            Err(Error::NoSpectralGap { .. })
        ));
        let s = SpectrumSummary::new(vec![(1.0, 1), (0.5, 1), (0.1, 2)]).unwrap();
        assert!(s.tilt_normalizer() >= 1.0);
        assert!(c_infinity(&s) >= 1.0);
    }

    #[test]
    fn report_text_has_one_line_per_row() {
        let mut rep = AnalysisReport::default();
        rep.push_bound(
            "chernoff_bound",
            "exponential-markov",
            "u=1".into(),
            0.5,
            0.1,
            0.01,
        );
        rep.push_bound(
            "chernoff_bound",
            "exponential-markov",
            "u=2".into(),
            0.05,
            0.2,
            0.01,
        );
        assert_eq!(rep.to_text().lines().count(), 3);
        assert!(!rep.all_pass());
    }
}
