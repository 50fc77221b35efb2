use proptest::prelude::*;

use nested_spectra::model::MultiViewParams;
use nested_spectra::theory::{
    accuracy_from_alignment, cubic_bulk_edges, lsd_density_mode2, mode2_alignment_signed,
    mode2_spike_location, mp_edges, multiview_zeta, semicircle, spike2, spike3, spike_oracle,
    stieltjes_mode2, Law, ShapeRatios, StieltjesCubic, C64,
};

// |m(s) + 1/s|·|s|² ≤ FAR_FIELD_C for |s| ≥ 100; the leading term is the law's
// mean, at most 5 over the sampled range, and the next one is O(1/|s|).
const FAR_FIELD_C: f64 = 6.0;

fn ratios() -> impl Strategy<Value = ShapeRatios> {
    (0.1..1.0f64, 0.1..1.0f64, 0.1..1.0f64).prop_map(|(a, b, c)| {
        let s = a + b + c;
        ShapeRatios::new(a / s, b / s, c / s).unwrap()
    })
}

fn upper_half() -> impl Strategy<Value = C64> {
    (-10.0..10.0f64, -4.0..1.0f64).prop_map(|(re, lg)| C64::new(re, 10f64.powf(lg)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cubic_residual_and_branch(rho in 0.05..5.0f64, c in ratios(), s in upper_half()) {
        let cubic = StieltjesCubic::new(rho, c).unwrap();
        let m = cubic.stieltjes(s).unwrap();
        prop_assert!(cubic.residual(m, s).norm() < 1e-12 * (1.0 + s.norm().powi(3)));
        prop_assert!(m.im > 0.0);
        let mc = cubic.stieltjes(s.conj()).unwrap();
        prop_assert!((mc - m.conj()).norm() <= 1e-12 * (1.0 + m.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn far_field_decay(rho in 0.05..5.0f64, c in ratios(), r in 100.0..1e4f64, arg in 0.01..3.13f64) {
        let s = C64::from_polar(r, arg);
        let m = stieltjes_mode2(s, rho, c).unwrap();
        prop_assert!((m + 1.0 / s).norm() * r * r <= FAR_FIELD_C);
    }

    #[test]
    fn fixed_point_at_detectable_spike(rho in 0.2..5.0f64, beta in 0.3..3.0f64, c in ratios()) {
        let p = spike2(rho, beta, c).unwrap();
        prop_assume!(p.detectable);
        let xi = mode2_spike_location(rho, beta, c);
        let m = stieltjes_mode2(C64::new(xi, 0.0), rho, c).unwrap();
        let want = -1.0 / (rho * (c.matrix_share2() + beta * beta));
        prop_assert!((m - want).norm() < 1e-8);
    }

    #[test]
    fn alignment_grows_with_signal(rho in 0.05..5.0f64, beta in 0.1..3.0f64, c in ratios(),
                                   d in 0.01..1.0f64) {
        let z = mode2_alignment_signed(rho, beta, c);
        prop_assert!(mode2_alignment_signed(rho + d, beta, c) >= z - 1e-12);
        prop_assert!(z <= 1.0);
        prop_assert!(accuracy_from_alignment(z) <= accuracy_from_alignment(mode2_alignment_signed(rho + d, beta, c)) + 1e-12);
        let acc = accuracy_from_alignment(z);
        prop_assert!((0.5..=1.0).contains(&acc));
    }

    #[test]
    fn multiview_is_a_substitution(p in 2usize..300, n in 1usize..150, m in 2usize..100,
                                   mu in 0.1..5.0f64, h in 0.1..3.0f64) {
        let mv = MultiViewParams::with_norms(p, 2 * n, m, mu, h, 0).unwrap();
        let direct = mode2_alignment_signed(mv.rho(), mu, mv.ratios());
        prop_assert!((multiview_zeta(&mv).unwrap() - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn oracle_and_mode3_spikes_clear_their_bulks(bt in 0.1..5.0f64, bm in 0.1..5.0f64,
                                                 c in ratios(), vs in 0.1..10.0f64,
                                                 varrho in 0.05..10.0f64) {
        let o = spike_oracle(bt, bm, c, vs).unwrap();
        prop_assert_eq!(o.detectable, o.alignment > 0.0);
        if o.detectable {
            prop_assert!(o.location > mp_edges(c).1);
        }
        let s3 = spike3(varrho).unwrap();
        prop_assert_eq!(s3.detectable, s3.alignment > 0.0);
        if s3.detectable {
            prop_assert!(s3.location > 2.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mode2_spike_clears_the_bulk(rho in 0.3..4.0f64, beta in 0.5..3.0f64, c in ratios()) {
        let p = spike2(rho, beta, c).unwrap();
        prop_assert_eq!(p.detectable, p.alignment > 0.0);
        if p.detectable {
            let (_, hi) = cubic_bulk_edges(rho, c).unwrap();
            prop_assert!(p.location > hi, "spike {} inside bulk edge {}", p.location, hi);
        }
    }
}

#[test]
fn laws_are_nonnegative_with_unit_mass() {
    let c = ShapeRatios::new(0.5, 1.0 / 3.0, 1.0 / 6.0).unwrap();
    for law in [
        Law::semicircle(),
        Law::marchenko_pastur(c),
        Law::cubic(2.0, c, 1e-6).unwrap(),
        Law::cubic(0.3, c, 1e-6).unwrap(),
    ] {
        assert!(law.density().iter().all(|&d| d >= 0.0));
        assert!((law.mass() - 1.0).abs() <= 1e-3, "{:?} mass {}", law.kind(), law.mass());
        let mut prev = 0.0;
        for &x in law.grid() {
            let f = law.cdf(x);
            assert!(f >= prev - 1e-12);
            prev = f;
        }
    }
}

#[test]
fn small_rho_degenerates_to_semicircle() {
    let c = ShapeRatios::new(0.5, 1.0 / 3.0, 1.0 / 6.0).unwrap();
    let grid: Vec<f64> = (0..=500).map(|k| -2.5 + 5.0 * k as f64 / 500.0).collect();
    let law = lsd_density_mode2(&grid, 1e-8, c, 1e-6).unwrap();
    let sup = grid
        .iter()
        .zip(law.density())
        .map(|(&x, &d)| (d - semicircle(x)).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-3, "sup-norm {sup}");
}
