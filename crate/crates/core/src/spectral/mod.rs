//! Nyström discretization of the covariance operator.
//!
//! The integral operator `(T f)(x) = ∫ C(x, y) f(y) dy` is replaced by the
//! Hermitian matrix `A_ij = sqrt(w_i) C(x_i, x_j) sqrt(w_j)` on a
//! Gauss-Legendre grid. Its eigenvalues approximate those of the operator,
//! and an eigenvector `v` maps to the grid values `phi(x_i) = v_i / sqrt(w_i)`
//! of an eigenfunction that is orthonormal under the quadrature weights.
//!
//! Kernels with a derivative jump on the diagonal get a diagonal
//! singularity-subtraction term (`quadrature_defect`); without it the
//! leading eigenvalues of the exponential kernel converge only like `M^-2`.
//! With it the retained trace follows the partial sum of the true spectrum
//! instead of the quadrature trace `sum_i w_i C(x_i, x_i)`.

mod diagnostics;
mod grid;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Smoothness};

pub use diagnostics::{smoothness_diagnostics, ModeCheck, SmoothnessDiagnostics, MIN_FD_GRID};
pub use grid::{QuadratureGrid, MAX_GRID};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Relative discarded trace allowed when truncating the expansion.
    pub truncation_tol: f64,
    /// Eigenvalues closer than `degeneracy_tol * mu_1` share a group.
    pub degeneracy_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
        }
    }
}

/// One distinct eigenvalue `kappa` with multiplicity `g` and the indices of
/// its member modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyGroup {
    pub kappa: f64,
    pub multiplicity: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    kernel: Kernel,
    grid: QuadratureGrid,
    eigenvalues: Vec<f64>,
    /// `M x N`, column `n` holds `phi_n` at the grid nodes.
    eigenfunctions: DMatrix<Complex64>,
    groups: Vec<DegeneracyGroup>,
    trace: f64,
    sqrt_trace: f64,
    diagonal_sqrt: Vec<f64>,
    b_constant: f64,
    discarded_mass: f64,
    total_mass: f64,
    /// Diagonal singularity-subtraction correction, for kinked kernels.
    defect: Option<Vec<Complex64>>,
    options: SpectralOptions,
}

pub fn build_grid(m: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::gauss_legendre(m)
}

pub fn decompose(
    kernel: &Kernel,
    grid: &QuadratureGrid,
    truncation_tol: f64,
) -> Result<SpectralDecomposition> {
    decompose_with(
        kernel,
        grid,
        &SpectralOptions {
            truncation_tol,
            ..SpectralOptions::default()
        },
    )
}

pub fn decompose_with(
    kernel: &Kernel,
    grid: &QuadratureGrid,
    options: &SpectralOptions,
) -> Result<SpectralDecomposition> {
    let tol = options.truncation_tol;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::arg(
            "truncation_tol",
            format!("must lie in (0, 1), got {tol}"),
        ));
    }
    let dtol = options.degeneracy_tol;
    if !(dtol > 0.0 && dtol < 1e-3) {
        return Err(Error::arg(
            "degeneracy_tol",
            format!("must lie in (0, 1e-3), got {dtol}"),
        ));
    }
    let m = grid.len();
    let sqrt_w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();

    let kinked = matches!(kernel.smoothness(), Smoothness::Finite(0));
    let defect = if kinked {
        Some(quadrature_defect(kernel, grid, &grid.nodes))
    } else {
        None
    };
    let (values, vectors) = if kernel.is_real() {
        let mut a = DMatrix::<f64>::from_fn(m, m, |i, j| {
            sqrt_w[i] * kernel.eval_real_unchecked(grid.nodes[i], grid.nodes[j]) * sqrt_w[j]
        });
        if let Some(d) = &defect {
            for i in 0..m {
                a[(i, i)] += d[i].re;
            }
        }
        let a = symmetrize_real(a);
        let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0).ok_or(Error::Eigensolve(m))?;
        let vecs = eig.eigenvectors.map(|v| Complex64::new(v, 0.0));
        (eig.eigenvalues.as_slice().to_vec(), vecs)
    } else {
        let mut a = DMatrix::<Complex64>::from_fn(m, m, |i, j| {
            kernel.eval_unchecked(grid.nodes[i], grid.nodes[j]) * (sqrt_w[i] * sqrt_w[j])
        });
        if let Some(d) = &defect {
            for i in 0..m {
                a[(i, i)] += d[i];
            }
        }
        let a = symmetrize_complex(a);
        let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0).ok_or(Error::Eigensolve(m))?;
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolve(m));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let positive: Vec<(usize, f64)> = order
        .iter()
        .map(|&i| (i, values[i]))
        .filter(|&(_, v)| v > 0.0)
        .collect();
    let total_mass: f64 = positive.iter().map(|&(_, v)| v).sum();
    if positive.is_empty() || total_mass <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }

    // smallest N whose discarded tail is within tolerance
    let mut tail = 0.0;
    let mut n_keep = positive.len();
    for k in (1..positive.len()).rev() {
        let next = tail + positive[k].1;
        if next > tol * total_mass {
            break;
        }
        tail = next;
        n_keep = k;
    }
    let discarded_mass = tail;

    let eigenvalues: Vec<f64> = positive[..n_keep].iter().map(|&(_, v)| v).collect();
    let mut eigenfunctions = DMatrix::<Complex64>::zeros(m, n_keep);
    for (col, &(src, _)) in positive[..n_keep].iter().enumerate() {
        let v = vectors.column(src);
        let phase = dominant_phase(v.iter().copied());
        for i in 0..m {
            eigenfunctions[(i, col)] = v[i] * phase / sqrt_w[i];
        }
    }

    let groups = group_degeneracies(&eigenvalues, dtol);
    warn_near_degeneracies(&eigenvalues, &groups, dtol);

    let trace = crate::special::compensated_sum(eigenvalues.iter().copied());
    let sqrt_trace = crate::special::compensated_sum(eigenvalues.iter().map(|v| v.sqrt()));
    let mut decomp = SpectralDecomposition {
        kernel: kernel.clone(),
        grid: grid.clone(),
        eigenvalues,
        eigenfunctions,
        groups,
        trace,
        sqrt_trace,
        diagonal_sqrt: Vec::new(),
        b_constant: 0.0,
        discarded_mass,
        total_mass,
        defect,
        options: *options,
    };
    let (diag, b) = tc_sqrt_profile(&decomp);
    decomp.diagonal_sqrt = diag;
    decomp.b_constant = b;
    Ok(decomp)
}

const SPLIT_RULE: usize = 64;

/// `int_0^1 C(x, y) dy - sum_j w_j C(x, x_j)` for each `x`.
///
/// For kernels with a derivative jump on the diagonal the grid rule
/// integrates `C(x_i, .)` poorly. Writing
/// `int C(x, y) f(y) dy = int C(x, y) (f(y) - f(x)) dy + f(x) int C(x, y) dy`
/// and discretizing only the first term moves the error onto this diagonal
/// defect, which keeps the discrete operator Hermitian. The row integral is
/// computed with separate Gauss-Legendre rules on `[0, x]` and `[x, 1]`,
/// where the integrand is smooth.
fn quadrature_defect(kernel: &Kernel, grid: &QuadratureGrid, points: &[f64]) -> Vec<Complex64> {
    let rule = QuadratureGrid::gauss_legendre(SPLIT_RULE).expect("fixed rule size is valid");
    points
        .iter()
        .map(|&x| {
            let mut exact = Complex64::new(0.0, 0.0);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                exact += kernel.eval_unchecked(x, t * x) * (w * x);
                exact += kernel.eval_unchecked(x, x + t * (1.0 - x)) * (w * (1.0 - x));
            }
            let discrete: Complex64 = grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .map(|(&y, &w)| kernel.eval_unchecked(x, y) * w)
                .sum();
            exact - discrete
        })
        .collect()
}

fn symmetrize_real(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

fn symmetrize_complex(a: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = a.adjoint();
    (a + h).map(|z| z * 0.5)
}

/// Unit phase that makes the largest-modulus entry real and positive.
fn dominant_phase(v: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut best = Complex64::new(1.0, 0.0);
    let mut best_norm = -1.0;
    for z in v {
        // strict improvement by a relative margin keeps the choice stable
        if z.norm() > best_norm * (1.0 + 1e-9) {
            best_norm = z.norm();
            best = z;
        }
    }
    if best_norm <= 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        best.conj() / best_norm
    }
}

/// Merge consecutive descending eigenvalues within `rel_tol * mu_1` of the
/// previous member into one group.
pub fn group_degeneracies(eigenvalues: &[f64], rel_tol: f64) -> Vec<DegeneracyGroup> {
    let mut groups: Vec<DegeneracyGroup> = Vec::new();
    let Some(&top) = eigenvalues.first() else {
        return groups;
    };
    let tol = rel_tol * top;
    for (n, &mu) in eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (eigenvalues[n - 1] - mu).abs() <= tol => {
                g.members.push(n);
                g.multiplicity += 1;
            }
            _ => groups.push(DegeneracyGroup {
                kappa: mu,
                multiplicity: 1,
                members: vec![n],
            }),
        }
    }
    for g in &mut groups {
        g.kappa = g.members.iter().map(|&i| eigenvalues[i]).sum::<f64>() / g.multiplicity as f64;
    }
    groups
}

fn warn_near_degeneracies(eigenvalues: &[f64], groups: &[DegeneracyGroup], rel_tol: f64) {
    let Some(&top) = eigenvalues.first() else {
        return;
    };
    for pair in groups.windows(2) {
        let last = *pair[0].members.last().unwrap();
        let gap = eigenvalues[last] - eigenvalues[last + 1];
        if gap <= 10.0 * rel_tol * top {
            log::warn!(
                "eigenvalues {} and {} differ by {:.3e}, within 10x the grouping tolerance; \
                 grouping may be ambiguous",
                last + 1,
                last + 2,
                gap
            );
        }
    }
}

/// `<x|T^{1/2}|x> = sum_n sqrt(mu_n) |phi_n(x)|^2` at every node, and
/// `B = kappa_1^{-1/4} max_x <x|T^{1/2}|x>^{1/2}`.
pub fn tc_sqrt_profile(decomp: &SpectralDecomposition) -> (Vec<f64>, f64) {
    let m = decomp.grid.len();
    let mut diag = vec![0.0; m];
    for (n, &mu) in decomp.eigenvalues.iter().enumerate() {
        let s = mu.sqrt();
        for (i, d) in diag.iter_mut().enumerate() {
            *d += s * decomp.eigenfunctions[(i, n)].norm_sqr();
        }
    }
    let kappa1 = decomp.kappa1();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let b = kappa1.powf(-0.25) * max_diag.sqrt();
    (diag, b)
}

impl SpectralDecomposition {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<Complex64> {
        &self.eigenfunctions
    }

    pub fn groups(&self) -> &[DegeneracyGroup] {
        &self.groups
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn kappa1(&self) -> f64 {
        self.groups[0].kappa
    }

    /// Multiplicity `g_1` of the top eigenvalue.
    pub fn g1(&self) -> usize {
        self.groups[0].multiplicity
    }

    /// Whether retained mode `n` belongs to the top eigenspace.
    pub fn is_parallel(&self, n: usize) -> bool {
        n < self.groups[0].multiplicity
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn sqrt_trace(&self) -> f64 {
        self.sqrt_trace
    }

    pub fn diagonal_sqrt_profile(&self) -> &[f64] {
        &self.diagonal_sqrt
    }

    pub fn b_constant(&self) -> f64 {
        self.b_constant
    }

    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// Sum of every positive discrete eigenvalue before truncation.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn options(&self) -> &SpectralOptions {
        &self.options
    }

    /// Regroup the retained eigenvalues with a different tolerance.
    pub fn regroup(&mut self, rel_tol: f64) {
        self.groups = group_degeneracies(&self.eigenvalues, rel_tol);
        self.options.degeneracy_tol = rel_tol;
        warn_near_degeneracies(&self.eigenvalues, &self.groups, rel_tol);
        let (diag, b) = tc_sqrt_profile(self);
        self.diagonal_sqrt = diag;
        self.b_constant = b;
    }

    /// Weighted Gram matrix `sum_i w_i conj(phi_m(x_i)) phi_n(x_i)`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let weighted = DMatrix::from_fn(self.grid.len(), self.mode_count(), |i, n| {
            self.eigenfunctions[(i, n)] * self.grid.weights[i]
        });
        self.eigenfunctions.adjoint() * weighted
    }

    /// Largest entry of `|Gram - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let mut err: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).norm());
            }
        }
        err
    }

    /// Relative Frobenius error of `sum_n mu_n phi_n(x) conj(phi_n(y))` against `C` on the grid.
    pub fn reconstruction_error(&self) -> f64 {
        let m = self.grid.len();
        let scaled = DMatrix::from_fn(m, self.mode_count(), |i, n| {
            self.eigenfunctions[(i, n)] * self.eigenvalues[n]
        });
        let approx = scaled * self.eigenfunctions.adjoint();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            for j in 0..m {
                let mut c = self.kernel.eval_unchecked(self.grid.nodes[i], self.grid.nodes[j]);
                if let (Some(d), true) = (&self.defect, i == j) {
                    c += d[i] / self.grid.weights[i];
                }
                num += (approx[(i, j)] - c).norm_sqr();
                den += c.norm_sqr();
            }
        }
        (num / den).sqrt()
    }

    /// Nyström extension of the retained eigenfunctions to arbitrary points:
    /// `phi_n(u) = mu_n^{-1} sum_j w_j C(u, x_j) phi_n(x_j)`, with the
    /// diagonal defect folded in for kinked kernels. Returns a
    /// `points.len() x N` matrix.
    pub fn eval_eigenfunctions(&self, points: &[f64]) -> Result<DMatrix<Complex64>> {
        if let Some(&bad) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::OutOfDomain { x: bad, y: 0.0 });
        }
        let m = self.grid.len();
        let kmat = DMatrix::from_fn(points.len(), m, |p, j| {
            self.kernel.eval_unchecked(points[p], self.grid.nodes[j]) * self.grid.weights[j]
        });
        let mut out = kmat * &self.eigenfunctions;
        if self.defect.is_some() {
            // phi(u) (mu - defect(u)) = sum_j w_j C(u, x_j) phi(x_j)
            let defect = quadrature_defect(&self.kernel, &self.grid, points);
            for (n, &mu) in self.eigenvalues.iter().enumerate() {
                for (p, d) in defect.iter().enumerate() {
                    out[(p, n)] /= Complex64::new(mu, 0.0) - d;
                }
            }
        } else {
            for (n, &mu) in self.eigenvalues.iter().enumerate() {
                out.column_mut(n).scale_mut(1.0 / mu);
            }
        }
        Ok(out)
    }

    pub fn to_export(&self) -> SpectrumExport {
        let n = self.mode_count();
        let m = self.grid.len();
        SpectrumExport {
            eigenvalues: self.eigenvalues.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupExport {
                    kappa: g.kappa,
                    g: g.multiplicity,
                })
                .collect(),
            b: self.b_constant,
            trace: self.trace,
            grid: self.grid.clone(),
            eigenfunctions_re: (0..n)
                .map(|k| (0..m).map(|i| self.eigenfunctions[(i, k)].re).collect())
                .collect(),
            eigenfunctions_im: (0..n)
                .map(|k| (0..m).map(|i| self.eigenfunctions[(i, k)].im).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupExport {
    pub kappa: f64,
    pub g: usize,
}

/// JSON export of a decomposition; one row per eigenfunction in the
/// `eigenfunctions_re` / `eigenfunctions_im` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumExport {
    pub eigenvalues: Vec<f64>,
    pub groups: Vec<GroupExport>,
    #[serde(rename = "B")]
    pub b: f64,
    pub trace: f64,
    pub grid: QuadratureGrid,
    pub eigenfunctions_re: Vec<Vec<f64>>,
    pub eigenfunctions_im: Vec<Vec<f64>>,
}
