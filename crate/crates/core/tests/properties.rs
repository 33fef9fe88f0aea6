use proptest::prelude::*;
use rfcw::microsim::{sample_disorder, SimConfig, SimInit, SimMode, Simulator};
use rfcw::model::pair_counts;
use rfcw::odeflow::{integrate, IntegratorConfig};
use rfcw::{
    g_lienard, lienard_field, seeds, vector_field_planar, ModelParams, OrderState, PlanarState,
};

proptest! {
    #[test]
    fn g_is_odd(beta in 0.01f64..10.0, h in 0.0f64..3.0, l in -20.0f64..20.0) {
        let p = ModelParams::new(beta, h).unwrap();
        prop_assert!((g_lienard(l, &p) + g_lienard(-l, &p)).abs() <= 1e-12 * (1.0 + l.abs()));
    }

    #[test]
    fn lienard_pushforward(beta in 0.1f64..6.0, h in 0.0f64..2.0, m in -1.0f64..1.0, l in -4.0f64..4.0) {
        let p = ModelParams::new(beta, h).unwrap();
        let s = PlanarState { m_sigma: m, lambda: l };
        let v = vector_field_planar(&s, &p);
        let w = lienard_field(&s.to_lienard(beta), &p);
        prop_assert!((w.y - 2.0 * (v.lambda - beta * v.m_sigma)).abs() < 1e-12 * (1.0 + beta));
        prop_assert!((w.lambda - v.lambda).abs() < 1e-12);
    }

    #[test]
    fn pair_counts_sum_to_n(n in 2usize..2000, a in 0u64..1000, b in 0u64..1000, seed in 0u64..1000) {
        let eta = sample_disorder(n, seed).unwrap();
        let plus = eta.n_plus() as u64;
        let minus = n as u64 - plus;
        let (a, b) = (a.min(plus), b.min(minus));
        let nf = n as f64;
        // realizable order state from counts (a, b, plus − a, minus − b)
        let c = [a, b, plus - a, minus - b];
        let m = (c[0] + c[1]) as f64 / nf - (c[2] + c[3]) as f64 / nf;
        let mse = (c[0] + c[3]) as f64 / nf - (c[1] + c[2]) as f64 / nf;
        let got = pair_counts(&OrderState::new(m, mse, 0.0), eta.mean(), n).unwrap();
        prop_assert_eq!(got, c);
        prop_assert_eq!(got.iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn trajectory_invariants(n in 2usize..300, beta in 0.1f64..4.0, h in 0.0f64..1.5, seed in 0u64..u64::MAX) {
        let p = ModelParams::new(beta, h).unwrap();
        let eta = sample_disorder(n, seed).unwrap();
        let cfg = SimConfig { n, t_end: 2.0, seed, record_dt: 0.1, mode: SimMode::OrderParamOnly };
        let mut sim = Simulator::new(cfg, p, &SimInit::Nearest(OrderState::new(0.0, 0.0, 0.0)), &eta).unwrap();
        let mut rng = seeds::rng_for(seed, &[seeds::STREAM_DYNAMICS]);
        let (tr, _) = sim.run_with(&mut rng, |_| {}).unwrap();
        prop_assert_eq!(tr.len(), cfg.grid_len());
        prop_assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(tr.states.iter().all(|s| s.m_sigma.abs() <= 1.0 + 1e-12 && s.m_sigma_eta.abs() <= 1.0 + 1e-12));
        prop_assert_eq!(sim.counts().iter().sum::<u64>(), n as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trapping_region_is_bounded(beta in 0.2f64..5.0, h in 0.0f64..2.0, y in -5.0f64..5.0, l in -5.0f64..5.0) {
        let p = ModelParams::new(beta, h).unwrap();
        let init = rfcw::LienardState { y, lambda: l };
        let tr = integrate(&p, init, 40.0, &IntegratorConfig::default()).unwrap();
        let r0 = 0.25 * y * y + 0.5 * l * l;
        let bound = r0.max(0.5 * (2.0 * beta / 3.0 + 1.0).powi(2) + beta * beta) * 4.0 + 10.0;
        prop_assert!(tr.states.iter().all(|s| 0.25 * s.y * s.y + 0.5 * s.lambda * s.lambda <= bound));
    }
}
