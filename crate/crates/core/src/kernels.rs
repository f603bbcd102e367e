//! Covariance kernels `C(x, y)` on the unit interval.
//!
//! Three families are provided: the exponential (Ornstein-Uhlenbeck) kernel,
//! which is continuous but not differentiable on the diagonal; the
//! squared-exponential kernel, which is analytic; and a synthetic Mercer
//! kernel assembled from an explicit eigenvalue list and the complex Fourier
//! basis `e_k(x) = exp(2 pi i k x)`. The Mercer family has an exactly known
//! spectrum and is the workhorse of the oracle tests.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Exponential,
    SquaredExponential,
    MercerSynthetic,
}

impl KernelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::SquaredExponential => "squared-exponential",
            KernelFamily::MercerSynthetic => "mercer-synthetic",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "exponential" => Some(KernelFamily::Exponential),
            "squared-exponential" => Some(KernelFamily::SquaredExponential),
            "mercer-synthetic" | "mercer" => Some(KernelFamily::MercerSynthetic),
            _ => None,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of continuous derivatives of `C(x, y)` in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

impl Smoothness {
    /// True when `d^4 C / dx^4` exists and is continuous.
    pub fn has_fourth_derivative(self) -> bool {
        match self {
            Smoothness::Finite(k) => k >= 4,
            Smoothness::Infinite => true,
        }
    }
}

/// JSON form of a kernel: `{"family": ..., "ell": ..., "sigma2": ..., "mercer_eigs": [...]}`.
///
/// `family` is kept as a plain string so unknown names surface as a
/// configuration error naming the field rather than a serde message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mercer_eigs: Option<Vec<f64>>,
    /// Fourier frequencies paired with `mercer_eigs`; defaults to `0, 1, -1, 2, -2, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_modes: Option<Vec<i64>>,
}

impl KernelSpec {
    pub fn exponential(ell: f64, sigma2: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Exponential.as_str().into(),
            ell: Some(ell),
            sigma2: Some(sigma2),
            mercer_eigs: None,
            fourier_modes: None,
        }
    }

    pub fn squared_exponential(ell: f64, sigma2: f64) -> Self {
        KernelSpec {
            family: KernelFamily::SquaredExponential.as_str().into(),
            ell: Some(ell),
            sigma2: Some(sigma2),
            mercer_eigs: None,
            fourier_modes: None,
        }
    }

    pub fn mercer(eigs: &[f64]) -> Self {
        KernelSpec {
            family: KernelFamily::MercerSynthetic.as_str().into(),
            ell: None,
            sigma2: None,
            mercer_eigs: Some(eigs.to_vec()),
            fourier_modes: None,
        }
    }
}

/// Frequency of the `n`-th default Fourier basis function (0-based): `0, 1, -1, 2, -2, ...`.
pub fn default_fourier_mode(n: usize) -> i64 {
    let k = n.div_ceil(2) as i64;
    if n % 2 == 1 {
        k
    } else {
        -k
    }
}

/// `e_k(x) = exp(2 pi i k x)`, orthonormal on `[0, 1]`.
#[inline]
pub fn fourier_basis(k: i64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x)
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Exponential { ell: f64, sigma2: f64 },
    SquaredExponential { ell: f64, sigma2: f64 },
    Mercer { eigs: Vec<f64>, modes: Vec<i64> },
}

/// An immutable Hermitian covariance kernel on `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    form: Form,
    smoothness: Smoothness,
}

impl Kernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        let family = KernelFamily::parse(&spec.family).ok_or_else(|| Error::InvalidKernel {
            field: "family",
            reason: format!("unknown kernel family {:?}", spec.family),
        })?;
        let positive = |field: &'static str, v: Option<f64>| -> Result<f64> {
            match v {
                Some(v) if v.is_finite() && v > 0.0 => Ok(v),
                Some(v) => Err(Error::InvalidKernel {
                    field,
                    reason: format!("must be strictly positive, got {v}"),
                }),
                None => Err(Error::InvalidKernel {
                    field,
                    reason: "missing".into(),
                }),
            }
        };
        let form = match family {
            KernelFamily::Exponential => Form::Exponential {
                ell: positive("ell", spec.ell)?,
                sigma2: positive("sigma2", spec.sigma2)?,
            },
            KernelFamily::SquaredExponential => Form::SquaredExponential {
                ell: positive("ell", spec.ell)?,
                sigma2: positive("sigma2", spec.sigma2)?,
            },
            KernelFamily::MercerSynthetic => {
                // ell and sigma2 play no role here, but reject nonsense if given.
                if spec.ell.is_some() {
                    positive("ell", spec.ell)?;
                }
                if spec.sigma2.is_some() {
                    positive("sigma2", spec.sigma2)?;
                }
                let eigs = spec.mercer_eigs.clone().ok_or_else(|| Error::InvalidKernel {
                    field: "mercer_eigs",
                    reason: "required for the mercer-synthetic family".into(),
                })?;
                validate_mercer_eigs(&eigs)?;
                let modes = match &spec.fourier_modes {
                    Some(m) => {
                        if m.len() != eigs.len() {
                            return Err(Error::InvalidKernel {
                                field: "fourier_modes",
                                reason: format!("{} modes for {} eigenvalues", m.len(), eigs.len()),
                            });
                        }
                        let mut seen = m.clone();
                        seen.sort_unstable();
                        seen.dedup();
                        if seen.len() != m.len() {
                            return Err(Error::InvalidKernel {
                                field: "fourier_modes",
                                reason: "frequencies must be distinct".into(),
                            });
                        }
                        m.clone()
                    }
                    None => (0..eigs.len()).map(default_fourier_mode).collect(),
                };
                Form::Mercer { eigs, modes }
            }
        };
        let smoothness = match family {
            KernelFamily::Exponential => Smoothness::Finite(0),
            _ => Smoothness::Infinite,
        };
        Ok(Kernel { form, smoothness })
    }

    pub fn family(&self) -> KernelFamily {
        match self.form {
            Form::Exponential { .. } => KernelFamily::Exponential,
            Form::SquaredExponential { .. } => KernelFamily::SquaredExponential,
            Form::Mercer { .. } => KernelFamily::MercerSynthetic,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Pointwise variance scale: `sigma2` for the stationary families, the
    /// diagonal value `sum mu_n` for Mercer kernels.
    pub fn variance(&self) -> f64 {
        match &self.form {
            Form::Exponential { sigma2, .. } | Form::SquaredExponential { sigma2, .. } => *sigma2,
            Form::Mercer { eigs, .. } => eigs.iter().sum(),
        }
    }

    /// Whether `C(x, y)` is real for all arguments.
    pub fn is_real(&self) -> bool {
        match &self.form {
            Form::Mercer { modes, .. } => modes.iter().all(|&k| k == 0),
            _ => true,
        }
    }

    /// Eigenvalues and Fourier frequencies of a Mercer kernel.
    pub fn mercer_terms(&self) -> Option<(&[f64], &[i64])> {
        match &self.form {
            Form::Mercer { eigs, modes } => Some((eigs, modes)),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<Complex64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x, y });
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluate without the domain check; callers guarantee `x, y` in `[0, 1]`.
    pub fn eval_unchecked(&self, x: f64, y: f64) -> Complex64 {
        match &self.form {
            Form::Exponential { ell, sigma2 } => Complex64::new(sigma2 * (-(x - y).abs() / ell).exp(), 0.0),
            Form::SquaredExponential { ell, sigma2 } => {
                let d = x - y;
                Complex64::new(sigma2 * (-d * d / (2.0 * ell * ell)).exp(), 0.0)
            }
            Form::Mercer { eigs, modes } => eigs
                .iter()
                .zip(modes)
                .map(|(&mu, &k)| fourier_basis(k, x - y) * mu)
                .sum(),
        }
    }

    /// Real part of `C(x, y)`; exact for the real families.
    pub fn eval_real_unchecked(&self, x: f64, y: f64) -> f64 {
        self.eval_unchecked(x, y).re
    }
}

fn validate_mercer_eigs(eigs: &[f64]) -> Result<()> {
    if eigs.is_empty() {
        return Err(Error::InvalidKernel {
            field: "mercer_eigs",
            reason: "eigenvalue list is empty".into(),
        });
    }
    for (i, &mu) in eigs.iter().enumerate() {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidKernel {
                field: "mercer_eigs",
                reason: format!("entry {i} is negative or non-finite ({mu})"),
            });
        }
        if i > 0 && mu > eigs[i - 1] {
            return Err(Error::InvalidKernel {
                field: "mercer_eigs",
                reason: format!("entry {i} ({mu}) exceeds its predecessor ({})", eigs[i - 1]),
            });
        }
    }
    Ok(())
}
