//! Sampling the field conditioned on the rare event `||phi||_2^2 > r`.
//!
//! Two samplers are provided. Rejection is exact and unweighted but its
//! cost grows like `e^{r / kappa_1}`. The decomposition sampler splits the
//! field into its top-eigenspace part (squared norm `V`, a Gamma variable)
//! and the orthogonal remainder (squared norm `U`), which are independent:
//!
//! 1. the orthogonal coefficients are drawn from the law exponentially
//!    tilted by `e^{U / kappa_1}`, which inflates mode variances from
//!    `mu` to `mu / (1 - mu / kappa_1)`;
//! 2. the sample carries weight `e^{-U / kappa_1} Q(g_1, (r - U)^+ / kappa_1)`,
//!    at most 1;
//! 3. `V` is drawn from `Gamma(g_1, kappa_1)` truncated to `V > r - U`;
//! 4. the top-eigenspace coefficients are uniform on the complex sphere of
//!    squared radius `V`.
//!
//! Self-normalized averages over the weighted ensemble target the
//! conditional law exactly, and `Z * mean(weight)` (with `Z` the tilt
//! normalizer) is an unbiased estimate of `P(||phi||_2^2 > r)`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::sampling::{draw_coefficients, standard_complex, NormRecord, Synthesizer};
use crate::special::{compensated_sum, ln_factorial, ln_gamma_q_int};
use crate::spectral::SpectralDecomposition;

pub const DEFAULT_ATTEMPT_BUDGET: u64 = 10_000_000;
pub const DEFAULT_ESS_FLOOR: f64 = 30.0;
/// Largest `lower / scale` accepted by the truncated Gamma sampler.
pub const UNDERFLOW_LIMIT: f64 = 700.0;

const REJECTION_CHUNK: u64 = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rejection,
    Decomposition,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rejection => "rejection",
            Method::Decomposition => "decomposition",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEnsemble {
    pub threshold: f64,
    pub method: Method,
    pub samples: Vec<NormRecord>,
    pub weights: Vec<f64>,
    pub ess: f64,
    pub p_event: f64,
    pub p_event_se: f64,
    /// Rejection only: number of unconditional draws consumed.
    pub attempts: Option<u64>,
}

impl ConditionalEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        self.attempts.map(|a| self.samples.len() as f64 / a as f64)
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = compensated_sum(weights.iter().copied());
    let s2 = compensated_sum(weights.iter().map(|w| w * w));
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Plain rejection: draw unconditionally, keep iff `||phi||_2^2 > r`.
///
/// Attempt `i` uses stream `i` of `factory`; the run stops at the attempt
/// yielding the `n_target`-th acceptance, so the result does not depend on
/// the thread count.
pub fn sample_conditional_rejection(
    decomp: &SpectralDecomposition,
    r: f64,
    n_target: usize,
    factory: &StreamFactory,
    budget: u64,
) -> Result<ConditionalEnsemble> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::arg(
            "r",
            format!("threshold must be finite and >= 0, got {r}"),
        ));
    }
    if n_target == 0 {
        return Err(Error::arg("n_target", "must be at least 1"));
    }
    let synth = Synthesizer::new(decomp);
    let modes = decomp.mode_count();
    let mu = decomp.eigenvalues();
    // coefficient-space prefilter; the grid norm decides acceptance
    let prefilter = r * (1.0 - 1e-8);
    let mut samples = Vec::with_capacity(n_target);
    let mut attempts = 0u64;
    let mut start = 0u64;
    while start < budget && samples.len() < n_target {
        let end = (start + REJECTION_CHUNK).min(budget);
        let chunk: Vec<Option<NormRecord>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let draw = draw_coefficients(modes, factory, i);
                let c: f64 = draw.values.iter().zip(mu).map(|(z, m)| z.norm_sqr() * m).sum();
                if c <= prefilter {
                    return None;
                }
                let rec = synth.norms(&draw.values).expect("draw length equals mode count");
                (rec.norm2_sq > r).then_some(rec)
            })
            .collect();
        for (offset, rec) in chunk.into_iter().enumerate() {
            attempts = start + offset as u64 + 1;
            if let Some(rec) = rec {
                samples.push(rec);
                if samples.len() == n_target {
                    break;
                }
            }
        }
        start = end;
    }
    if samples.len() < n_target {
        return Err(Error::BudgetExhausted {
            attempts,
            accepted: samples.len(),
            target: n_target,
        });
    }
    let p = samples.len() as f64 / attempts as f64;
    let weights = vec![1.0; samples.len()];
    Ok(ConditionalEnsemble {
        threshold: r,
        method: Method::Rejection,
        ess: samples.len() as f64,
        samples,
        weights,
        p_event: p,
        p_event_se: (p * (1.0 - p) / attempts as f64).sqrt(),
        attempts: Some(attempts),
    })
}

/// Variances of the squared-norm modes `X = sum_n |s_n|^2 nu_n`, with the
/// first `g1` entries forming the top group.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVariances {
    nu: Vec<f64>,
    g1: usize,
}

impl ModeVariances {
    pub fn new(nu: Vec<f64>, g1: usize) -> Result<Self> {
        if nu.is_empty() || g1 == 0 || g1 > nu.len() {
            return Err(Error::arg("g1", format!("{g1} top modes out of {}", nu.len())));
        }
        if nu.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::arg("nu", "variances must be positive"));
        }
        let kappa1 = nu[0];
        if let Some(&k2) = nu[g1..].iter().find(|&&v| v >= kappa1) {
            return Err(Error::NoSpectralGap { kappa1, kappa2: k2 });
        }
        Ok(ModeVariances { nu, g1 })
    }

    /// The field `phi`: `nu_n = mu_n`.
    pub fn phi(decomp: &SpectralDecomposition) -> Result<Self> {
        Self::new(decomp.eigenvalues().to_vec(), decomp.g1())
    }

    /// `kappa_1 ||psi||_2^2`: `nu_n = sqrt(mu_n kappa_1)`, so thresholds on
    /// `||psi||_2^2` at `r / kappa_1` become thresholds at `r`.
    pub fn psi_scaled(decomp: &SpectralDecomposition) -> Result<Self> {
        let k1 = decomp.kappa1();
        let nu = decomp.eigenvalues().iter().map(|m| (m * k1).sqrt()).collect();
        Self::new(nu, decomp.g1())
    }

    pub fn kappa1(&self) -> f64 {
        self.nu[0]
    }

    pub fn g1(&self) -> usize {
        self.g1
    }

    pub fn variances(&self) -> &[f64] {
        &self.nu
    }

    /// `ln Z = -sum_{n >= g1} ln(1 - nu_n / kappa_1)`.
    pub fn ln_tilt_normalizer(&self) -> f64 {
        let k1 = self.kappa1();
        -compensated_sum(self.nu[self.g1..].iter().map(|v| (-v / k1).ln_1p()))
    }

    /// Coefficient standard deviations of the orthogonal modes under the tilt.
    fn tilted_scale(&self) -> Vec<f64> {
        let k1 = self.kappa1();
        self.nu[self.g1..]
            .iter()
            .map(|v| (1.0 / (1.0 - v / k1)).sqrt())
            .collect()
    }
}

struct TiltedDraw {
    coefficients: Vec<Complex64>,
    perp_sq: f64,
    weight: f64,
}

fn tilted_draw<R: Rng + ?Sized>(
    modes: &ModeVariances,
    scale: &[f64],
    r: f64,
    rng: &mut R,
) -> Result<TiltedDraw> {
    let k1 = modes.kappa1();
    let g1 = modes.g1;
    let mut s = vec![Complex64::new(0.0, 0.0); modes.nu.len()];
    let mut u = 0.0;
    for (k, sc) in scale.iter().enumerate() {
        let z = standard_complex(rng) * *sc;
        u += z.norm_sqr() * modes.nu[g1 + k];
        s[g1 + k] = z;
    }
    let lower = (r - u).max(0.0);
    let weight = if scale.is_empty() {
        1.0
    } else {
        (-u / k1 + ln_gamma_q_int(g1 as u32, lower / k1)).exp()
    };
    fill_parallel(modes, &mut s, lower, rng)?;
    Ok(TiltedDraw {
        coefficients: s,
        perp_sq: u,
        weight,
    })
}

/// Draw `V > lower` and place the top-group coefficients uniformly on the
/// complex sphere with `sum_{n<g1} |s_n|^2 nu_n = V`.
fn fill_parallel<R: Rng + ?Sized>(
    modes: &ModeVariances,
    s: &mut [Complex64],
    lower: f64,
    rng: &mut R,
) -> Result<f64> {
    let g1 = modes.g1;
    let v = truncated_gamma_sample(g1 as u32, modes.kappa1(), lower, rng)?;
    let mut q = 0.0;
    for (sk, &nu) in s[..g1].iter_mut().zip(&modes.nu[..g1]) {
        let z = standard_complex(rng);
        q += z.norm_sqr() * nu;
        *sk = z;
    }
    let t = (v / q).sqrt();
    for z in &mut s[..g1] {
        *z *= t;
    }
    Ok(v)
}

/// Exact weighted sampler for the field given `||phi||_2^2 > r`.
pub fn sample_conditional_decomposition(
    decomp: &SpectralDecomposition,
    r: f64,
    n: usize,
    factory: &StreamFactory,
) -> Result<ConditionalEnsemble> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::arg(
            "r",
            format!("threshold must be finite and > 0, got {r}"),
        ));
    }
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    let modes = ModeVariances::phi(decomp)?;
    if r / modes.kappa1() > UNDERFLOW_LIMIT {
        return Err(Error::Underflow(r / modes.kappa1()));
    }
    let scale = modes.tilted_scale();
    let synth = Synthesizer::new(decomp);
    let drawn: Vec<Result<(NormRecord, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.stream(i);
            let mut d = tilted_draw(&modes, &scale, r, &mut rng)?;
            let mut rec = synth.norms(&d.coefficients)?;
            // the grid norm can miss the event by round-off right at the boundary
            let mut tries = 0;
            while rec.norm2_sq <= r {
                tries += 1;
                if tries > 1000 {
                    return Err(Error::arg(
                        "r",
                        "cannot realize the conditioning event on the grid",
                    ));
                }
                fill_parallel(&modes, &mut d.coefficients, (r - d.perp_sq).max(0.0), &mut rng)?;
                rec = synth.norms(&d.coefficients)?;
            }
            Ok((rec, d.weight))
        })
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for item in drawn {
        let (rec, w) = item?;
        samples.push(rec);
        weights.push(w);
    }
    let (p_event, p_event_se) = if scale.is_empty() {
        (
            crate::special::gamma_q_int(modes.g1 as u32, r / modes.kappa1()),
            0.0,
        )
    } else {
        scaled_mean(&weights, modes.ln_tilt_normalizer().exp())
    };
    Ok(ConditionalEnsemble {
        threshold: r,
        method: Method::Decomposition,
        ess: effective_sample_size(&weights),
        samples,
        weights,
        p_event,
        p_event_se,
        attempts: None,
    })
}

fn scaled_mean(weights: &[f64], z: f64) -> (f64, f64) {
    let n = weights.len() as f64;
    let mean = compensated_sum(weights.iter().copied()) / n;
    let var = if weights.len() > 1 {
        compensated_sum(weights.iter().map(|w| (w - mean) * (w - mean))) / (n - 1.0)
    } else {
        0.0
    };
    (z * mean, z * (var / n).sqrt())
}

/// Weighted draws of the total squared norm `X` conditioned on `X > r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEnsemble {
    pub threshold: f64,
    pub totals: Vec<f64>,
    pub weights: Vec<f64>,
    pub p_event: f64,
    pub p_event_se: f64,
}

/// Coefficient-space version of the decomposition sampler for an arbitrary
/// chi-square mixture; no grid synthesis.
pub fn sample_tail(modes: &ModeVariances, r: f64, n: usize, factory: &StreamFactory) -> Result<TailEnsemble> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::arg(
            "r",
            format!("threshold must be finite and > 0, got {r}"),
        ));
    }
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if r / modes.kappa1() > UNDERFLOW_LIMIT {
        return Err(Error::Underflow(r / modes.kappa1()));
    }
    let scale = modes.tilted_scale();
    let drawn: Vec<Result<(f64, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.stream(i);
            let d = tilted_draw(modes, &scale, r, &mut rng)?;
            let total: f64 = d
                .coefficients
                .iter()
                .zip(&modes.nu)
                .map(|(z, v)| z.norm_sqr() * v)
                .sum();
            Ok((total, d.weight))
        })
        .collect();
    let mut totals = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for item in drawn {
        let (t, w) = item?;
        totals.push(t);
        weights.push(w);
    }
    let (p_event, p_event_se) = if scale.is_empty() {
        (
            crate::special::gamma_q_int(modes.g1 as u32, r / modes.kappa1()),
            0.0,
        )
    } else {
        scaled_mean(&weights, modes.ln_tilt_normalizer().exp())
    };
    Ok(TailEnsemble {
        threshold: r,
        totals,
        weights,
        p_event,
        p_event_se,
    })
}

/// Draw from `Gamma(shape, scale)` conditioned on exceeding `lower`, by
/// inverting the regularized upper incomplete gamma function.
pub fn truncated_gamma_sample<R: Rng + ?Sized>(
    shape: u32,
    scale: f64,
    lower: f64,
    rng: &mut R,
) -> Result<f64> {
    if shape == 0 {
        return Err(Error::arg("shape", "must be at least 1"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::arg("scale", format!("must be positive, got {scale}")));
    }
    if !(lower >= 0.0) || !lower.is_finite() {
        return Err(Error::arg("lower", format!("must be >= 0, got {lower}")));
    }
    let y0 = lower / scale;
    if y0 > UNDERFLOW_LIMIT {
        return Err(Error::Underflow(y0));
    }
    // u in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let ln_u = u.ln();
    if shape == 1 {
        return Ok(scale * (y0 - ln_u));
    }
    let target = ln_u + ln_gamma_q_int(shape, y0);
    let f = |y: f64| ln_gamma_q_int(shape, y) - target;
    let ln_gamma_shape = ln_factorial(shape - 1);
    let df = |y: f64| {
        let lq = ln_gamma_q_int(shape, y);
        -((shape as f64 - 1.0) * y.ln() - y - ln_gamma_shape - lq).exp()
    };
    let mut lo = y0;
    let mut step = shape as f64 + 1.0;
    let mut hi = y0 + step;
    while f(hi) > 0.0 {
        lo = hi;
        step *= 2.0;
        hi = y0 + step;
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fy = f(y);
        if fy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let d = df(y);
        let mut next = y - fy / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * next.max(1.0) || hi - lo <= 1e-15 * hi.max(1.0) {
            y = next;
            break;
        }
        y = next;
    }
    Ok(scale * y.max(y0))
}

/// Self-normalized point estimate with delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Associative weighted sums behind [`Estimate`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightedMoments {
    pub sum_w: f64,
    pub sum_w2: f64,
    pub sum_wf: f64,
    pub sum_w2f: f64,
    pub sum_w2f2: f64,
}

impl WeightedMoments {
    pub fn push(&mut self, w: f64, f: f64) {
        self.sum_w += w;
        self.sum_w2 += w * w;
        self.sum_wf += w * f;
        self.sum_w2f += w * w * f;
        self.sum_w2f2 += w * w * f * f;
    }

    pub fn merge(&mut self, other: &WeightedMoments) {
        self.sum_w += other.sum_w;
        self.sum_w2 += other.sum_w2;
        self.sum_wf += other.sum_wf;
        self.sum_w2f += other.sum_w2f;
        self.sum_w2f2 += other.sum_w2f2;
    }

    pub fn ess(&self) -> f64 {
        if self.sum_w2 > 0.0 {
            self.sum_w * self.sum_w / self.sum_w2
        } else {
            0.0
        }
    }

    pub fn estimate(&self) -> Estimate {
        let m = self.sum_wf / self.sum_w;
        // sum w^2 (f - m)^2 expanded
        let num = (self.sum_w2f2 - 2.0 * m * self.sum_w2f + m * m * self.sum_w2).max(0.0);
        Estimate {
            value: m,
            se: num.sqrt() / self.sum_w,
        }
    }
}

pub fn estimate<F>(ensemble: &ConditionalEnsemble, functional: F) -> Result<Estimate>
where
    F: Fn(&NormRecord) -> f64,
{
    estimate_weighted(
        &ensemble.samples,
        &ensemble.weights,
        functional,
        DEFAULT_ESS_FLOOR,
    )
}

pub fn estimate_weighted<T, F>(
    items: &[T],
    weights: &[f64],
    functional: F,
    ess_floor: f64,
) -> Result<Estimate>
where
    F: Fn(&T) -> f64,
{
    if items.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: items.len(),
            got: weights.len(),
        });
    }
    let w_max = weights.iter().cloned().fold(0.0, f64::max);
    if !(w_max > 0.0) {
        return Err(Error::InsufficientEss {
            ess: 0.0,
            floor: ess_floor,
        });
    }
    // rescale so tiny weights do not underflow in the squared sums
    let mut mom = WeightedMoments::default();
    for (item, &w) in items.iter().zip(weights) {
        mom.push(w / w_max, functional(item));
    }
    let ess = mom.ess();
    if ess < ess_floor {
        return Err(Error::InsufficientEss {
            ess,
            floor: ess_floor,
        });
    }
    Ok(mom.estimate())
}

/// Indicator functional `1{||phî_perp||_2 > eps}`; an undefined profile counts as 0.
pub fn overlap_indicator(eps: f64) -> impl Fn(&NormRecord) -> f64 {
    move |rec| match rec.perp_hat_l2 {
        Some(v) if v > eps => 1.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Kernel, KernelSpec};
    use crate::spectral::{build_grid, decompose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mercer(eigs: &[f64]) -> SpectralDecomposition {
        let k = Kernel::new(&KernelSpec::mercer(eigs)).unwrap();
        decompose(&k, &build_grid(32).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn zero_threshold_accepts_everything() {
        let d = mercer(&[1.0, 0.5]);
        let e = sample_conditional_rejection(&d, 0.0, 500, &StreamFactory::new(1), 1000).unwrap();
        assert_eq!(e.attempts, Some(500));
        assert_eq!(e.acceptance_rate(), Some(1.0));
        assert!(e.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn deep_threshold_exhausts_budget() {
        let d = mercer(&[1.0, 0.5]);
        let err = sample_conditional_rejection(&d, 50.0, 10, &StreamFactory::new(1), 100_000).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExhausted {
                attempts: 100_000,
                ..
            }
        ));
    }

    #[test]
    fn rejection_respects_event() {
        let d = mercer(&[1.0, 0.5]);
        let e = sample_conditional_rejection(&d, 2.0, 300, &StreamFactory::new(2), 1_000_000).unwrap();
        assert!(e.samples.iter().all(|s| s.norm2_sq > 2.0));
        assert_eq!(e.ess, 300.0);
    }

    #[test]
    fn rank_one_decomposition_is_shifted_exponential() {
        let d = mercer(&[2.0]);
        let e = sample_conditional_decomposition(&d, 10.0, 4000, &StreamFactory::new(3)).unwrap();
        assert!(e.samples.iter().all(|s| s.perp_sq == 0.0 && s.norm2_sq > 10.0));
        let est = estimate(&e, |s| s.par_sq - 10.0).unwrap();
        assert!((est.value - 2.0).abs() < 3.0 * est.se, "{est:?}");
        assert!((e.p_event - (-5.0f64).exp()).abs() < 1e-15);
        assert_eq!(estimate(&e, overlap_indicator(0.1)).unwrap().value, 0.0);
    }

    #[test]
    fn weights_bounded_and_event_holds() {
        let d = mercer(&[1.0, 0.5, 0.2]);
        let e = sample_conditional_decomposition(&d, 8.0, 2000, &StreamFactory::new(4)).unwrap();
        assert!(e.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert!(e.samples.iter().all(|s| s.norm2_sq > 8.0));
        assert!(e.ess <= e.len() as f64 + 1e-9);
    }

    #[test]
    fn no_gap_rejected() {
        let err = ModeVariances::new(vec![1.0, 1.0, 0.5], 1).unwrap_err();
        assert!(matches!(err, Error::NoSpectralGap { .. }));
    }

    #[test]
    fn truncated_gamma_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            truncated_gamma_sample(2, 1.0, 701.0, &mut rng),
            Err(Error::Underflow(_))
        ));
        assert!(truncated_gamma_sample(2, 1.0, -1.0, &mut rng).is_err());
        for _ in 0..1000 {
            let v = truncated_gamma_sample(3, 0.5, 4.0, &mut rng).unwrap();
            assert!(v >= 4.0);
        }
        // deep truncation stays finite
        let v = truncated_gamma_sample(5, 1.0, 650.0, &mut rng).unwrap();
        assert!(v > 650.0 && v < 700.0);
    }

    #[test]
    fn estimate_basics() {
        let recs = vec![0.0f64; 40];
        let vals: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let w = vec![1.0; 40];
        let e = estimate_weighted(&vals, &w, |x| *x, 30.0).unwrap();
        assert!((e.value - 19.5).abs() < 1e-12);
        let one = estimate_weighted(&recs, &w, |_| 1.0, 30.0).unwrap();
        assert_eq!(one.value, 1.0);
        assert_eq!(one.se, 0.0);
        let err = estimate_weighted(&recs[..10], &w[..10], |_| 1.0, 30.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientEss { .. }));
    }

    #[test]
    fn moments_merge_associatively() {
        let mut a = WeightedMoments::default();
        let mut b = WeightedMoments::default();
        let mut all = WeightedMoments::default();
        for i in 0..10 {
            let (w, f) = (0.5 + i as f64 * 0.1, i as f64);
            if i < 4 {
                a.push(w, f)
            } else {
                b.push(w, f)
            }
            all.push(w, f);
        }
        a.merge(&b);
        assert!((a.estimate().value - all.estimate().value).abs() < 1e-12);
        assert!((a.estimate().se - all.estimate().se).abs() < 1e-12);
    }
}
