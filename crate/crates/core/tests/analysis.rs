mod common;

use klcond_core::analysis::{
    c_infinity, chernoff_bound, condensation_curves, default_chernoff_rate, exact_norm_tail, overlap_bound,
    rho_perp_bound, tail_asymptote, Field, SpectrumSummary,
};
use klcond_core::conditioning::{
    estimate, estimate_weighted, overlap_indicator, sample_conditional_decomposition, sample_tail,
    ModeVariances, DEFAULT_ESS_FLOOR,
};
use klcond_core::rng::StreamFactory;
use klcond_core::sampling::sample_unconditional;
use klcond_core::special::hypoexponential_tail;
use proptest::prelude::*;

fn two_mode() -> SpectrumSummary {
    SpectrumSummary::new(vec![(1.0, 1), (0.5, 1)]).unwrap()
}

#[test]
fn chernoff_dominates_unconditional_tail() {
    let d = common::reference();
    let s = SpectrumSummary::from_decomposition(&d);
    let a = default_chernoff_rate(&s).unwrap();
    let recs = sample_unconditional(&d, 100_000, &StreamFactory::new(61));
    let n = recs.len() as f64;
    for u in [0.5, 1.0, 2.0] {
        let p = recs.iter().filter(|r| r.perp_sq > u).count() as f64 / n;
        let bound = chernoff_bound(u, a, &s).unwrap();
        assert!(p <= bound, "u {u}: {p} > {bound}");
        // the orthogonal part is a single exponential of mean 1/2 here
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((p - (-2.0 * u).exp()).abs() < 3.0 * se);
    }
}

#[test]
fn overlap_bound_against_direct_integral() {
    // orthogonal density for means 0.5, 0.25: (e^{-2u} - e^{-4u}) / 0.25, so
    // int_t^inf e^u p(u) du = 4 (e^{-t} - e^{-3t} / 3)
    let s = SpectrumSummary::new(vec![(1.0, 1), (0.5, 1), (0.25, 1)]).unwrap();
    for (r, eps) in [(4.0, 0.5), (10.0, 0.3), (20.0, 0.7)] {
        let t: f64 = eps * eps * r;
        let want = 4.0 * ((-t).exp() - (-3.0 * t).exp() / 3.0);
        let got = overlap_bound(r, eps, &s).unwrap().value;
        assert!((got / want - 1.0).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn overlap_bound_dominates_conditional_estimates() {
    let d = common::reference();
    let s = SpectrumSummary::from_decomposition(&d);
    for (i, r) in [2.0, 5.0, 10.0, 15.0].into_iter().enumerate() {
        let e =
            sample_conditional_decomposition(&d, r, 10_000, &StreamFactory::new(70).fork(i as u64)).unwrap();
        for eps in [0.1, 0.3, 0.5] {
            let p = estimate(&e, overlap_indicator(eps)).unwrap();
            let bound = overlap_bound(r, eps, &s).unwrap().value;
            assert!(p.value <= bound + 3.0 * p.se, "r {r} eps {eps}: {p:?} > {bound}");
        }
    }
}

#[test]
fn tail_asymptote_ratio_at_ten() {
    let d = common::reference();
    let s = two_mode();
    let exact = exact_norm_tail(10.0, &s).unwrap();
    let asym = tail_asymptote(10.0, &s, Field::Phi);
    assert!((exact / asym - 1.0).abs() < 1e-4);
    let e = sample_conditional_decomposition(&d, 10.0, 10_000, &StreamFactory::new(80)).unwrap();
    let ratio = e.p_event / asym;
    assert!((0.95..=1.05).contains(&ratio), "{ratio}");
}

#[test]
fn psi_to_phi_ratio_approaches_c_infinity() {
    let d = common::reference();
    let s = two_mode();
    let phi = sample_tail(
        &ModeVariances::phi(&d).unwrap(),
        15.0,
        100_000,
        &StreamFactory::new(90),
    )
    .unwrap();
    let psi = sample_tail(
        &ModeVariances::psi_scaled(&d).unwrap(),
        15.0,
        100_000,
        &StreamFactory::new(91),
    )
    .unwrap();
    let ratio = psi.p_event / phi.p_event;
    let c = c_infinity(&s);
    assert!((ratio / c - 1.0).abs() < 0.1, "{ratio} vs {c}");
    // psi tail against its own exact hypoexponential form (means 1, sqrt(0.5))
    let exact = hypoexponential_tail(&[1.0, 0.5f64.sqrt()], 15.0).unwrap();
    assert!((psi.p_event - exact).abs() < 3.0 * psi.p_event_se + 1e-3 * exact);
}

#[test]
fn psi_overshoot_ratio_decreases_to_one() {
    // E[X 1{X > t}] / (t P(X > t)) = E[X | X > t] / t for X = ||psi||^2
    let d = common::reference();
    let modes = ModeVariances::psi_scaled(&d).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for (i, t) in [5.0, 10.0, 15.0].into_iter().enumerate() {
        let e = sample_tail(&modes, t, 20_000, &StreamFactory::new(100).fork(i as u64)).unwrap();
        let est = estimate_weighted(&e.totals, &e.weights, |x| x / t, DEFAULT_ESS_FLOOR).unwrap();
        assert!(est.value > 1.0);
        if let Some((v, se)) = prev {
            assert!(
                est.value <= v + 2.0 * se.hypot(est.se),
                "t {t}: {} after {v}",
                est.value
            );
        }
        prev = Some((est.value, est.se));
    }
    assert!(prev.unwrap().0 < 1.15);
}

#[test]
fn orthogonal_psi_share_stays_bounded() {
    let d = common::reference();
    let s = two_mode();
    let r = 15.0;
    let e = sample_conditional_decomposition(&d, r, 10_000, &StreamFactory::new(110)).unwrap();
    let est = estimate(&e, |rec| rec.psi_perp * rec.psi_perp / (r / d.kappa1())).unwrap();
    assert!(est.value <= c_infinity(&s) * 1.15, "{est:?}");
}

#[test]
fn condensation_flags_and_rho_cap() {
    let d = common::reference();
    let s = two_mode();
    let rho = rho_perp_bound(&s);
    assert!((rho - 2.0).abs() < 1e-14);
    let ens: Vec<_> = [2.0, 5.0, 10.0, 15.0]
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            sample_conditional_decomposition(&d, r, 10_000, &StreamFactory::new(120).fork(i as u64)).unwrap()
        })
        .collect();
    let rows = condensation_curves(&ens, &s).unwrap();
    for row in &rows {
        assert!(row.par_flag && row.perp_flag && row.sum_flag, "{row:?}");
        assert!(row.e_perp <= rho + 3.0 * row.e_perp_se);
    }
    // E_perp tends to the tilted mean 1 from below-ish and never exceeds the cap
    let last = rows.last().unwrap();
    assert!((last.e_perp - 1.0).abs() < 0.05, "{last:?}");
}

#[test]
fn rank_one_has_no_orthogonal_mass() {
    let d = common::mercer_decomp(&[1.5], 16);
    let s = SpectrumSummary::from_decomposition(&d);
    let ens = vec![sample_conditional_decomposition(&d, 6.0, 1000, &StreamFactory::new(1)).unwrap()];
    let rows = condensation_curves(&ens, &s).unwrap();
    assert_eq!(rows[0].e_perp, 0.0);
    assert_eq!(rho_perp_bound(&s), 0.0);
}

fn simple_spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let mut out = vec![1.0];
        out.extend(v.into_iter().filter(|&x| x < 0.999));
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn summary_constants(eigs in simple_spectrum()) {
        let s = SpectrumSummary::new(eigs.iter().map(|&k| (k, 1)).collect()).unwrap();
        prop_assert!(s.tilt_normalizer() >= 1.0);
        prop_assert!(c_infinity(&s) >= 1.0);
        prop_assert!(rho_perp_bound(&s) >= 0.0);
    }

    #[test]
    fn chernoff_dominates_exact_orthogonal_tail(eigs in simple_spectrum(), u in 0.0f64..20.0) {
        prop_assume!(eigs.len() >= 2);
        let s = SpectrumSummary::new(eigs.iter().map(|&k| (k, 1)).collect()).unwrap();
        if let Some(exact) = hypoexponential_tail(&eigs[1..], u) {
            let bound = chernoff_bound(u, default_chernoff_rate(&s).unwrap(), &s).unwrap();
            prop_assert!(exact <= bound * (1.0 + 1e-9) + 1e-12, "{exact} > {bound}");
        }
    }

    #[test]
    fn overlap_bound_monotone(eigs in simple_spectrum(), r in 0.5f64..30.0, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        prop_assume!(eigs.len() >= 2);
        let s = SpectrumSummary::new(eigs.iter().map(|&k| (k, 1)).collect()).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = overlap_bound(r, lo, &s).unwrap();
        let b = overlap_bound(r, hi, &s).unwrap();
        prop_assert!(b.value <= a.value * (1.0 + 1e-9) + 3.0 * (a.se + b.se) + 1e-12);
        prop_assert!(a.value <= s.tilt_normalizer() * (1.0 + 1e-9) + 3.0 * a.se);
    }
}
