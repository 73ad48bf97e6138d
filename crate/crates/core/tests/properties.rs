use cvsteer::gaussian::{db_to_variance, variance_to_db};
use cvsteer::wigner::{
    negativity_closed_form, negativity_from_purities, negativity_numeric, NegativityQuadrature,
};
use cvsteer::{ChannelParams, SqueezingSpec, SubtractedStateParams, TwoModeCovariance};
use proptest::prelude::*;

fn resource() -> impl Strategy<Value = SqueezingSpec> {
    (0.3f64..0.98, 0.0f64..0.5)
        .prop_map(|(vp, excess)| SqueezingSpec::new(vp, (1.0 + excess) / vp).unwrap())
}

fn subtracted(spec: SqueezingSpec, eta_a: f64, eta_b: f64, xi: f64) -> SubtractedStateParams {
    let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(eta_a, eta_b).unwrap())
        .unwrap();
    SubtractedStateParams::new(cm, xi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numeric_oracle_matches_closed_form(
        spec in resource(),
        eta_a in 0.1f64..=1.0,
        eta_b in 0.1f64..=1.0,
        xi in 0.05f64..=1.0,
    ) {
        let params = subtracted(spec, eta_a, eta_b, xi);
        let closed = negativity_closed_form(&params).unwrap();
        let numeric = negativity_numeric(&params, &NegativityQuadrature::default()).unwrap();
        prop_assert!((closed.value - numeric.value).abs() < 1e-6,
            "closed {} numeric {}", closed.value, numeric.value);
    }

    #[test]
    fn purity_route_matches_closed_form(
        spec in resource(),
        eta_a in 0.1f64..=1.0,
        eta_b in 0.1f64..=1.0,
        xi in 0.05f64..=1.0,
    ) {
        let params = subtracted(spec, eta_a, eta_b, xi);
        let closed = negativity_closed_form(&params).unwrap();
        let purity = negativity_from_purities(params.cm().purities(), xi).unwrap();
        prop_assert!((closed.value - purity.value).abs() < 1e-10);
        prop_assert_eq!(closed.status, purity.status);
    }

    #[test]
    fn steering_iff_negativity(
        spec in resource(),
        eta_a in 0.1f64..=1.0,
        eta_b in 0.1f64..=1.0,
    ) {
        let params = subtracted(spec, eta_a, eta_b, 1.0);
        let raw = params.cm().steerability_raw();
        prop_assume!(raw.abs() > 1e-9);
        let n = negativity_closed_form(&params).unwrap().value;
        prop_assert_eq!(raw > 0.0, n > 0.0, "G_raw {} N {}", raw, n);
    }

    #[test]
    fn negativity_ignores_alice_loss(
        spec in resource(),
        eta_a1 in 0.1f64..=1.0,
        eta_a2 in 0.1f64..=1.0,
        eta_b in 0.1f64..=1.0,
        xi in 0.05f64..=1.0,
    ) {
        let a = negativity_closed_form(&subtracted(spec, eta_a1, eta_b, xi)).unwrap().value;
        let b = negativity_closed_form(&subtracted(spec, eta_a2, eta_b, xi)).unwrap().value;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn negativity_falls_with_bob_loss(
        spec in resource(),
        eta_a in 0.1f64..=1.0,
        eta_hi in 0.1f64..=1.0,
        frac in 0.0f64..1.0,
        xi in 0.05f64..=1.0,
    ) {
        let eta_lo = (eta_hi * frac).max(0.01);
        let hi = negativity_closed_form(&subtracted(spec, eta_a, eta_hi, xi)).unwrap().value;
        let lo = negativity_closed_form(&subtracted(spec, eta_a, eta_lo, xi)).unwrap().value;
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn db_round_trip(db in -15.0f64..15.0) {
        prop_assert!((variance_to_db(db_to_variance(db)) - db).abs() < 1e-12);
    }

    #[test]
    fn physical_spectrum(spec in resource(), eta_a in 0.0f64..=1.0, eta_b in 0.0f64..=1.0) {
        let eta_a = eta_a.max(1e-3);
        let eta_b = eta_b.max(1e-3);
        let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(eta_a, eta_b).unwrap())
            .unwrap();
        let (lo, hi) = cm.symplectic_eigenvalues();
        prop_assert!(lo >= 1.0 - 1e-9 && hi >= lo);
        let p = cm.purities();
        for mu in [p.mu_a, p.mu_b, p.mu_ab] {
            prop_assert!(mu > 0.0 && mu <= 1.0 + 1e-12);
        }
    }
}
