//! Karhunen-Loève synthesis of the coupled fields
//!
//! ```text
//! phi(x) = sum_n s_n sqrt(mu_n) phi_n(x)
//! psi(x) = sum_n s_n (mu_n / kappa_1)^{1/4} phi_n(x)
//! ```
//!
//! from one shared draw of i.i.d. standard complex Gaussians `s_n`
//! (`E|s_n|^2 = 1`, `E s_n^2 = 0`). Sharing the coefficients is what turns
//! the sup-norm estimate `||phî_perp||_inf <= sqrt(kappa_1) B ||psi_perp||_2 / ||phi||_2`
//! into a per-sample inequality.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::spectral::SpectralDecomposition;

/// One standard complex Gaussian: independent real and imaginary parts of variance 1/2.
#[inline]
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDraw {
    pub values: Vec<Complex64>,
    pub stream: u64,
    /// ChaCha word position after the draw.
    pub counter: u64,
}

pub fn draw_coefficients(n: usize, factory: &StreamFactory, stream: u64) -> CoefficientDraw {
    let mut rng = factory.stream(stream);
    let values = (0..n).map(|_| standard_complex(&mut rng)).collect();
    CoefficientDraw {
        values,
        stream,
        counter: rng.get_word_pos() as u64,
    }
}

/// Norms and projections of one coupled sample. The profile quantities
/// (`perp_hat_*`) are `None` when `||phi||_2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub norm2_sq: f64,
    pub par_sq: f64,
    pub perp_sq: f64,
    pub psi_norm2_sq: f64,
    pub psi_perp: f64,
    pub sup_phi: f64,
    pub sup_perp: f64,
    pub perp_hat_l2: Option<f64>,
    pub sup_perp_hat: Option<f64>,
}

impl NormRecord {
    pub fn norm2(&self) -> f64 {
        self.norm2_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub coefficients: CoefficientDraw,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    pub norms: NormRecord,
}

/// Reusable synthesis state for one decomposition.
#[derive(Debug, Clone)]
pub struct Synthesizer<'a> {
    decomp: &'a SpectralDecomposition,
    phi_amp: Vec<f64>,
    psi_amp: Vec<f64>,
    g1: usize,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    phi_par: Vec<Complex64>,
    phi_perp: Vec<Complex64>,
    psi_par: Vec<Complex64>,
    psi_perp: Vec<Complex64>,
}

impl<'a> Synthesizer<'a> {
    pub fn new(decomp: &'a SpectralDecomposition) -> Self {
        let kappa1 = decomp.kappa1();
        let mu = decomp.eigenvalues();
        Synthesizer {
            decomp,
            phi_amp: mu.iter().map(|m| m.sqrt()).collect(),
            psi_amp: mu.iter().map(|m| (m / kappa1).powf(0.25)).collect(),
            g1: decomp.g1(),
        }
    }

    pub fn decomposition(&self) -> &'a SpectralDecomposition {
        self.decomp
    }

    fn fill(&self, s: &[Complex64], scratch: &mut Scratch) -> Result<()> {
        let n = self.decomp.mode_count();
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        let m = self.decomp.grid().len();
        for buf in [
            &mut scratch.phi_par,
            &mut scratch.phi_perp,
            &mut scratch.psi_par,
            &mut scratch.psi_perp,
        ] {
            buf.clear();
            buf.resize(m, Complex64::new(0.0, 0.0));
        }
        let table = self.decomp.eigenfunctions();
        for (k, &sk) in s.iter().enumerate() {
            let a_phi = sk * self.phi_amp[k];
            let a_psi = sk * self.psi_amp[k];
            let col = table.column(k);
            let (phi, psi) = if k < self.g1 {
                (&mut scratch.phi_par, &mut scratch.psi_par)
            } else {
                (&mut scratch.phi_perp, &mut scratch.psi_perp)
            };
            for i in 0..m {
                phi[i] += a_phi * col[i];
                psi[i] += a_psi * col[i];
            }
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)] // five parallel arrays
    fn record(&self, scratch: &Scratch) -> NormRecord {
        let w = &self.decomp.grid().weights;
        let mut norm2_sq = 0.0;
        let mut par_sq = 0.0;
        let mut perp_sq = 0.0;
        let mut psi_sq = 0.0;
        let mut psi_perp_sq = 0.0;
        let mut sup_phi: f64 = 0.0;
        let mut sup_perp: f64 = 0.0;
        for i in 0..w.len() {
            let phi = scratch.phi_par[i] + scratch.phi_perp[i];
            let psi = scratch.psi_par[i] + scratch.psi_perp[i];
            norm2_sq += w[i] * phi.norm_sqr();
            par_sq += w[i] * scratch.phi_par[i].norm_sqr();
            perp_sq += w[i] * scratch.phi_perp[i].norm_sqr();
            psi_sq += w[i] * psi.norm_sqr();
            psi_perp_sq += w[i] * scratch.psi_perp[i].norm_sqr();
            sup_phi = sup_phi.max(phi.norm());
            sup_perp = sup_perp.max(scratch.phi_perp[i].norm());
        }
        let norm = norm2_sq.sqrt();
        let (perp_hat_l2, sup_perp_hat) = if norm > 0.0 {
            (Some(perp_sq.sqrt() / norm), Some(sup_perp / norm))
        } else {
            (None, None)
        };
        NormRecord {
            norm2_sq,
            par_sq,
            perp_sq,
            psi_norm2_sq: psi_sq,
            psi_perp: psi_perp_sq.sqrt(),
            sup_phi,
            sup_perp,
            perp_hat_l2,
            sup_perp_hat,
        }
    }

    /// Norms only, without keeping the grid fields.
    pub fn norms(&self, s: &[Complex64]) -> Result<NormRecord> {
        let mut scratch = Scratch::default();
        self.fill(s, &mut scratch)?;
        Ok(self.record(&scratch))
    }

    pub fn synthesize(&self, coeffs: CoefficientDraw) -> Result<CoupledSample> {
        let mut scratch = Scratch::default();
        self.fill(&coeffs.values, &mut scratch)?;
        let norms = self.record(&scratch);
        let phi = scratch
            .phi_par
            .iter()
            .zip(&scratch.phi_perp)
            .map(|(a, b)| a + b)
            .collect();
        let psi = scratch
            .psi_par
            .iter()
            .zip(&scratch.psi_perp)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CoupledSample {
            coefficients: coeffs,
            phi,
            psi,
            norms,
        })
    }
}

pub fn synthesize(decomp: &SpectralDecomposition, coeffs: CoefficientDraw) -> Result<CoupledSample> {
    Synthesizer::new(decomp).synthesize(coeffs)
}

pub fn norms(sample: &CoupledSample) -> &NormRecord {
    &sample.norms
}

/// `sum_n |s_n|^2 mu_n`, the exact squared norm of the truncated field.
pub fn coefficient_norm_sq(decomp: &SpectralDecomposition, s: &[Complex64]) -> f64 {
    s.iter()
        .zip(decomp.eigenvalues())
        .map(|(z, mu)| z.norm_sqr() * mu)
        .sum()
}

/// `n` unconditional samples; sample `i` uses stream `i` of `factory`.
pub fn sample_unconditional(
    decomp: &SpectralDecomposition,
    n: usize,
    factory: &StreamFactory,
) -> Vec<NormRecord> {
    let synth = Synthesizer::new(decomp);
    let modes = decomp.mode_count();
    (0..n as u64)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, i| {
            let draw = draw_coefficients(modes, factory, i);
            synth
                .fill(&draw.values, scratch)
                .expect("draw length equals mode count");
            synth.record(scratch)
        })
        .collect()
}

/// Dense uniform grid used to audit the node-only sup norm.
#[derive(Debug, Clone)]
pub struct AuditGrid {
    points: Vec<f64>,
    /// `P x N` eigenfunction values at `points`.
    values: DMatrix<Complex64>,
    g1: usize,
    b_constant: f64,
}

impl AuditGrid {
    /// Uniform grid with `factor * M` points including both endpoints.
    pub fn new(decomp: &SpectralDecomposition, factor: usize) -> Result<Self> {
        let p = (factor.max(1) * decomp.grid().len()).max(2);
        let points: Vec<f64> = (0..p).map(|i| i as f64 / (p - 1) as f64).collect();
        let values = decomp.eval_eigenfunctions(&points)?;
        let mu = decomp.eigenvalues();
        let mut max_diag = decomp.diagonal_sqrt_profile().iter().cloned().fold(0.0, f64::max);
        for i in 0..p {
            let d: f64 = (0..mu.len())
                .map(|n| mu[n].sqrt() * values[(i, n)].norm_sqr())
                .sum();
            max_diag = max_diag.max(d);
        }
        Ok(AuditGrid {
            points,
            values,
            g1: decomp.g1(),
            b_constant: decomp.kappa1().powf(-0.25) * max_diag.sqrt(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `B` recomputed with the audit points included.
    pub fn b_constant(&self) -> f64 {
        self.b_constant
    }

    /// `max |phi_perp|` over the audit points for coefficient vector `s`.
    pub fn sup_perp(&self, decomp: &SpectralDecomposition, s: &[Complex64]) -> f64 {
        let mu = decomp.eigenvalues();
        (0..self.points.len())
            .map(|i| {
                (self.g1..mu.len())
                    .map(|n| s[n] * mu[n].sqrt() * self.values[(i, n)])
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

pub const SAMPLE_CSV_HEADER: &str = "sample_id,norm2_sq,par_sq,perp_sq,sup_perp_hat,psi_perp";

/// Per-sample dump. When `weights` is given a trailing `weight` column is added.
pub fn write_sample_csv<W: Write>(
    mut out: W,
    records: &[NormRecord],
    weights: Option<&[f64]>,
) -> std::io::Result<()> {
    match weights {
        Some(_) => writeln!(out, "{SAMPLE_CSV_HEADER},weight")?,
        None => writeln!(out, "{SAMPLE_CSV_HEADER}")?,
    }
    for (i, r) in records.iter().enumerate() {
        write!(
            out,
            "{},{},{},{},{},{}",
            i,
            r.norm2_sq,
            r.par_sq,
            r.perp_sq,
            fmt_opt(r.sup_perp_hat),
            r.psi_perp
        )?;
        match weights {
            Some(w) => writeln!(out, ",{}", w[i])?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Kernel, KernelSpec};
    use crate::spectral::{build_grid, decompose};
    use approx::assert_abs_diff_eq;

    fn mercer(eigs: &[f64]) -> SpectralDecomposition {
        let k = Kernel::new(&KernelSpec::mercer(eigs)).unwrap();
        decompose(&k, &build_grid(32).unwrap(), 1e-10).unwrap()
    }

    fn draw(values: Vec<Complex64>) -> CoefficientDraw {
        CoefficientDraw {
            values,
            stream: 0,
            counter: 0,
        }
    }

    #[test]
    fn rank_one_constant_field() {
        let d = mercer(&[2.0]);
        let s = synthesize(&d, draw(vec![Complex64::new(1.0, 0.0)])).unwrap();
        for z in &s.phi {
            assert_abs_diff_eq!(z.re, 2f64.sqrt(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.norms.norm2(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.norms.sup_phi, 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.norms.perp_sq, 0.0);
        assert_eq!(s.norms.sup_perp_hat, Some(0.0));
    }

    #[test]
    fn pure_orthogonal_excitation() {
        let d = mercer(&[1.0, 0.25]);
        let s = synthesize(&d, draw(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])).unwrap();
        assert_abs_diff_eq!(s.norms.par_sq, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.norms.perp_hat_l2.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_field_has_undefined_profile() {
        let d = mercer(&[1.0, 0.25]);
        let s = synthesize(&d, draw(vec![Complex64::new(0.0, 0.0); 2])).unwrap();
        assert!(s.norms.perp_hat_l2.is_none());
        assert!(s.norms.sup_perp_hat.is_none());
    }

    #[test]
    fn dimension_mismatch() {
        let d = mercer(&[1.0, 0.25]);
        let err = synthesize(&d, draw(vec![Complex64::new(1.0, 0.0)])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn parseval_against_coefficients() {
        let d = mercer(&[1.0, 0.5, 0.3, 0.1]);
        let f = StreamFactory::new(11);
        let synth = Synthesizer::new(&d);
        for i in 0..200 {
            let c = draw_coefficients(4, &f, i);
            let exact = coefficient_norm_sq(&d, &c.values);
            let rec = synth.norms(&c.values).unwrap();
            assert!((rec.norm2_sq - exact).abs() <= 1e-10 * exact.max(1e-300));
            assert!((rec.par_sq + rec.perp_sq - rec.norm2_sq).abs() <= 1e-10 * rec.norm2_sq);
        }
    }

    #[test]
    fn deterministic_draws() {
        let f = StreamFactory::new(5);
        assert_eq!(draw_coefficients(6, &f, 9), draw_coefficients(6, &f, 9));
        assert_ne!(
            draw_coefficients(6, &f, 9).values,
            draw_coefficients(6, &f, 10).values
        );
    }

    #[test]
    fn csv_header_and_rows() {
        let d = mercer(&[1.0, 0.5]);
        let recs = sample_unconditional(&d, 3, &StreamFactory::new(1));
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &recs, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SAMPLE_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
    }
}
