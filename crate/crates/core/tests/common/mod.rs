#![allow(dead_code)]

use klcond_core::kernels::{Kernel, KernelSpec};
use klcond_core::spectral::{build_grid, decompose, SpectralDecomposition};

/// Eigenvalues of `e^{-|x-y|/ell}` on `[0, 1]`, solved independently of any
/// discretization.
///
/// On `[-a, a]` with `c = 1/ell` the eigenfunctions are `cos(w x)` with
/// `w tan(w a) = c` and `sin(w x)` with `w cot(w a) = -c`; the eigenvalue is
/// `2c / (w^2 + c^2)`. With `t = w a` both conditions become sign changes of
/// smooth functions on alternating half-periods, bisected here.
pub fn exponential_kernel_eigenvalues(ell: f64, sigma2: f64, count: usize) -> Vec<f64> {
    let c = 1.0 / ell;
    let a = 0.5;
    let pi = std::f64::consts::PI;
    let bisect = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let even = |t: f64| t * t.sin() - c * a * t.cos();
    let odd = |t: f64| t * t.cos() + c * a * t.sin();
    let mut omegas = Vec::new();
    let mut j = 0.0;
    while omegas.len() < count {
        let t_even = bisect(&even, j * pi, j * pi + 0.5 * pi);
        let t_odd = bisect(&odd, j * pi + 0.5 * pi, (j + 1.0) * pi);
        omegas.push(t_even / a);
        omegas.push(t_odd / a);
        j += 1.0;
    }
    let mut mu: Vec<f64> = omegas
        .iter()
        .map(|w| sigma2 * 2.0 * c / (w * w + c * c))
        .collect();
    mu.sort_by(|x, y| y.total_cmp(x));
    mu.truncate(count);
    mu
}

pub fn mercer_decomp(eigs: &[f64], m: usize) -> SpectralDecomposition {
    let k = Kernel::new(&KernelSpec::mercer(eigs)).unwrap();
    decompose(&k, &build_grid(m).unwrap(), 1e-10).unwrap()
}

/// Two-mode reference spectrum `kappa_1 = 1`, `kappa_2 = 0.5`, both simple.
pub fn reference() -> SpectralDecomposition {
    mercer_decomp(&[1.0, 0.5], 64)
}
