mod common;

use klcond_core::kernels::{Kernel, KernelSpec};
use klcond_core::spectral::{build_grid, decompose, smoothness_diagnostics};

#[test]
fn oracle_sanity() {
    // the first even root for c = 1, a = 1/2 satisfies w tan(w/2) = 1
    let mu = common::exponential_kernel_eigenvalues(1.0, 1.0, 4);
    let w = (2.0 / mu[0] - 1.0).sqrt();
    assert!((w * (w / 2.0).tan() - 1.0).abs() < 1e-12);
    // eigenvalues sum to the trace sigma2 * |domain| = 1
    let many = common::exponential_kernel_eigenvalues(1.0, 1.0, 200_000);
    let s: f64 = many.iter().sum();
    assert!((s - 1.0).abs() < 1e-5, "{s}");
}

#[test]
fn exponential_kernel_matches_oracle() {
    let k = Kernel::new(&KernelSpec::exponential(1.0, 1.0)).unwrap();
    let d = decompose(&k, &build_grid(512).unwrap(), 1e-10).unwrap();
    let oracle = common::exponential_kernel_eigenvalues(1.0, 1.0, 10);
    for (n, (&got, &want)) in d.eigenvalues().iter().zip(&oracle).enumerate() {
        let rel = (got - want).abs() / want;
        assert!(rel <= 1e-4, "mode {n}: {got} vs {want} (rel {rel:.2e})");
    }
    // unresolved grid-scale modes may merge; the leading ones must not
    assert!(d.groups()[..10].iter().all(|g| g.multiplicity == 1));
    assert!(d.orthonormality_error() <= 1e-8);
}

#[test]
fn orthonormality_up_to_1024() {
    for (spec, m) in [
        (KernelSpec::squared_exponential(0.3, 1.0), 1024),
        (KernelSpec::exponential(0.5, 2.0), 1024),
        (KernelSpec::mercer(&[1.0, 0.7, 0.7, 0.2]), 128),
    ] {
        let k = Kernel::new(&spec).unwrap();
        let d = decompose(&k, &build_grid(m).unwrap(), 1e-10).unwrap();
        assert!(d.orthonormality_error() <= 1e-8, "{spec:?}");
    }
}

#[test]
fn gram_matrices_are_hermitian_and_psd() {
    for spec in [
        KernelSpec::exponential(0.2, 1.5),
        KernelSpec::squared_exponential(0.1, 1.0),
        KernelSpec::mercer(&[1.0, 0.5, 0.25]),
    ] {
        let k = Kernel::new(&spec).unwrap();
        let g = build_grid(96).unwrap();
        let m = g.len();
        let c = nalgebra::DMatrix::from_fn(m, m, |i, j| k.eval(g.nodes[i], g.nodes[j]).unwrap());
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..m {
            for j in 0..m {
                assert!((c[(i, j)] - c[(j, i)].conj()).norm() <= 1e-14 * scale);
            }
        }
        let eig = nalgebra::SymmetricEigen::new(c);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * k.variance(), "{spec:?}: {min}");
    }
}

#[test]
fn mercer_kernel_reproduces_series() {
    let eigs = [1.0, 0.6, 0.3, 0.05];
    let k = Kernel::new(&KernelSpec::mercer(&eigs)).unwrap();
    let modes = [0i64, 1, -1, 2];
    for i in 0..=10 {
        for j in 0..=10 {
            let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
            let want: num_complex::Complex64 = eigs
                .iter()
                .zip(modes)
                .map(|(&mu, kk)| {
                    let ang = 2.0 * std::f64::consts::PI * kk as f64;
                    num_complex::Complex64::from_polar(1.0, ang * x)
                        * num_complex::Complex64::from_polar(1.0, -ang * y)
                        * mu
                })
                .sum();
            assert!((k.eval(x, y).unwrap() - want).norm() <= 1e-12);
        }
    }
}

#[test]
fn reconstruction_and_trace() {
    for (spec, tol) in [
        (KernelSpec::squared_exponential(0.3, 1.0), 1e-10),
        (KernelSpec::exponential(1.0, 1.0), 1e-10),
        (KernelSpec::mercer(&[1.0, 0.5]), 1e-10),
    ] {
        let k = Kernel::new(&spec).unwrap();
        let g = build_grid(128).unwrap();
        let d = decompose(&k, &g, tol).unwrap();
        let err = d.reconstruction_error();
        assert!(err <= tol + 1e-6, "{spec:?}: {err}");
        if !k.smoothness().has_fourth_derivative() {
            continue;
        }
        let quad_trace = g.integrate(|x| k.eval(x, x).unwrap().re);
        assert!(
            (d.trace() - quad_trace).abs() <= (tol + 1e-8) * quad_trace,
            "{spec:?}: {} vs {quad_trace}",
            d.trace()
        );
    }
}

#[test]
fn kinked_kernel_trace_tracks_partial_spectrum() {
    // the retained modes carry the oracle's partial sum, not the full
    // quadrature trace: unresolved high modes are absent rather than aliased
    let k = Kernel::new(&KernelSpec::exponential(1.0, 1.0)).unwrap();
    let d = decompose(&k, &build_grid(128).unwrap(), 1e-10).unwrap();
    let partial: f64 = common::exponential_kernel_eigenvalues(1.0, 1.0, d.mode_count())
        .iter()
        .sum();
    assert!(
        (d.trace() - partial).abs() <= 1e-4 * partial,
        "{} vs {partial}",
        d.trace()
    );
    assert!(d.trace() < 1.0);
}

#[test]
fn grid_refinement_converges_for_smooth_kernels() {
    for spec in [
        KernelSpec::squared_exponential(0.3, 1.0),
        KernelSpec::squared_exponential(0.1, 2.0),
        KernelSpec::mercer(&[1.0, 0.5, 0.2, 0.1, 0.05]),
    ] {
        let k = Kernel::new(&spec).unwrap();
        let a = decompose(&k, &build_grid(256).unwrap(), 1e-10).unwrap();
        let b = decompose(&k, &build_grid(512).unwrap(), 1e-10).unwrap();
        for n in 0..5 {
            let (x, y) = (a.eigenvalues()[n], b.eigenvalues()[n]);
            assert!((x - y).abs() <= 1e-6 * y, "{spec:?} mode {n}: {x} vs {y}");
        }
    }
}

#[test]
fn smoothness_verdicts() {
    let se = Kernel::new(&KernelSpec::squared_exponential(0.3, 1.0)).unwrap();
    let d = decompose(&se, &build_grid(256).unwrap(), 1e-14).unwrap();
    let diag = smoothness_diagnostics(&d).unwrap();
    eprintln!("squared-exponential: {diag:#?}");
    assert!(diag.decay_slope < -5.0);
    assert!(diag.verdict);

    let ex = Kernel::new(&KernelSpec::exponential(1.0, 1.0)).unwrap();
    let d = decompose(&ex, &build_grid(512).unwrap(), 1e-10).unwrap();
    let diag = smoothness_diagnostics(&d).unwrap();
    eprintln!(
        "exponential: slope {} range {:?} term slope {} remainder {}",
        diag.decay_slope, diag.fit_range, diag.term_slope, diag.relative_remainder
    );
    assert!((diag.decay_slope.abs() - 2.0).abs() < 0.3);
    assert!(!diag.decay_pass);
    assert!(!diag.verdict);
}
