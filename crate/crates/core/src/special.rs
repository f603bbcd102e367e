//! Scalar special functions shared by the sampler and the closed forms.

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `ln(k!)` for small integer `k` by direct summation.
pub fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `ln sum_{k<g} x^k / k!`, the log of the Erlang partial exponential sum.
///
/// Evaluated as a log-sum-exp over the terms so large `x` does not overflow.
pub fn ln_partial_exp_sum(shape: u32, x: f64) -> f64 {
    debug_assert!(shape >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    let lx = x.ln();
    let mut terms = Vec::with_capacity(shape as usize);
    let mut lf = 0.0;
    for k in 0..shape {
        if k > 0 {
            lf += (k as f64).ln();
        }
        terms.push(k as f64 * lx - lf);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln Q(g, x)` for integer shape `g >= 1`, where `Q` is the regularized
/// upper incomplete gamma function: `Q(g, x) = e^{-x} sum_{k<g} x^k / k!`.
pub fn ln_gamma_q_int(shape: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -x + ln_partial_exp_sum(shape, x)
}

/// Regularized upper incomplete gamma `Q(g, x)` for integer `g >= 1`.
pub fn gamma_q_int(shape: u32, x: f64) -> f64 {
    ln_gamma_q_int(shape, x).exp()
}

/// Tail `P(X > t)` of a sum of independent exponentials with the given
/// distinct means (the hypoexponential law).
///
/// Returns `None` when two means coincide to within `1e-12` relative or
/// when the alternating partial-fraction coefficients are so large that
/// cancellation would destroy more than about six digits.
pub fn hypoexponential_tail(means: &[f64], t: f64) -> Option<f64> {
    if means.is_empty() {
        return Some(if t < 0.0 { 1.0 } else { 0.0 });
    }
    if t <= 0.0 {
        return Some(1.0);
    }
    let rates: Vec<f64> = means.iter().map(|m| 1.0 / m).collect();
    let mut coeffs = Vec::with_capacity(rates.len());
    for (i, &ri) in rates.iter().enumerate() {
        let mut c = 1.0;
        for (j, &rj) in rates.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = rj - ri;
            if d.abs() <= 1e-12 * rj.abs().max(ri.abs()) {
                return None;
            }
            c *= rj / d;
        }
        coeffs.push(c);
    }
    let scale: f64 = coeffs.iter().map(|c| c.abs()).sum();
    if !scale.is_finite() || scale > 1e9 {
        return None;
    }
    let p = compensated_sum(coeffs.iter().zip(&rates).map(|(c, r)| c * (-r * t).exp()));
    Some(p.clamp(0.0, 1.0))
}
