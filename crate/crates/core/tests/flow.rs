use rfcw::odeflow::{
    integrate, integrate_dense, lyapunov_u, lyapunov_u_dot, lyapunov_u_monitor, poincare_crossings,
    CrossingStatus, IntegratorConfig,
};
use rfcw::{lienard_field, LienardState, ModelParams, PlanarState};

fn params(beta: f64, h: f64) -> ModelParams {
    ModelParams::new(beta, h).unwrap()
}

/// Solution of the linear system at β = 0:
/// `y = 2c₁e^{−t} + c₂e^{−2t}`, `λ = c₁e^{−t} + c₂e^{−2t}`.
fn linear_solution(init: LienardState, t: f64) -> LienardState {
    let c1 = init.y - init.lambda;
    let c2 = 2.0 * init.lambda - init.y;
    let (e1, e2) = ((-t).exp(), (-2.0 * t).exp());
    LienardState {
        y: 2.0 * c1 * e1 + c2 * e2,
        lambda: c1 * e1 + c2 * e2,
    }
}

#[test]
fn zero_beta_matches_exponential_solution() {
    let p = ModelParams::degenerate(0.0, 0.4).unwrap();
    let init = LienardState {
        y: 1.3,
        lambda: -0.7,
    };
    let sol = integrate_dense(&p, init, 10.0, &IntegratorConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=1000 {
        let t = k as f64 * 0.01;
        let (a, b) = (sol.at(t), linear_solution(init, t));
        worst = worst
            .max((a.y - b.y).abs())
            .max((a.lambda - b.lambda).abs());
    }
    assert!(worst < 1e-8, "sup error {worst:e}");
}

#[test]
fn tighter_tolerance_reduces_error() {
    let p = ModelParams::degenerate(0.0, 0.0).unwrap();
    let init = LienardState {
        y: 1.0,
        lambda: 1.0,
    };
    let err = |rel: f64| {
        let cfg = IntegratorConfig {
            rel_tol: rel,
            abs_tol: rel * 1e-2,
            ..Default::default()
        };
        let sol = integrate_dense(&p, init, 10.0, &cfg).unwrap();
        (0..=100)
            .map(|k| {
                let t = k as f64 * 0.1;
                let (a, b) = (sol.at(t), linear_solution(init, t));
                (a.y - b.y).abs().max((a.lambda - b.lambda).abs())
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(1e-6), err(1e-9));
    assert!(fine < coarse / 50.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn planar_maps_onto_lienard() {
    let p = params(2.3, 0.8);
    let init = PlanarState {
        m_sigma: 0.4,
        lambda: -0.2,
    };
    let a = integrate_dense(&p, init, 20.0, &IntegratorConfig::default()).unwrap();
    let b = integrate_dense(
        &p,
        init.to_lienard(p.beta),
        20.0,
        &IntegratorConfig::default(),
    )
    .unwrap();
    for k in 0..=400 {
        let t = k as f64 * 0.05;
        let (x, y) = (a.at(t).to_lienard(p.beta), b.at(t));
        assert!(
            (x.y - y.y).abs() < 1e-8 && (x.lambda - y.lambda).abs() < 1e-8,
            "t = {t}"
        );
    }
}

#[test]
fn forward_then_backward_returns() {
    let p = params(1.2, 0.3);
    let init = LienardState {
        y: 0.5,
        lambda: 0.2,
    };
    let cfg = IntegratorConfig::default();
    let fwd = integrate_dense(&p, init, 3.0, &cfg).unwrap();
    let back = integrate_dense(&p, fwd.at(3.0), 3.0, &cfg.backward()).unwrap();
    let end = back.at(3.0);
    assert!(
        (end.y - init.y).abs() < 100.0 * cfg.rel_tol
            && (end.lambda - init.lambda).abs() < 100.0 * cfg.rel_tol
    );
}

#[test]
fn crossings_converge_above_threshold() {
    let p = params(2.0, 0.0);
    let cr = poincare_crossings(
        &p,
        LienardState {
            y: 0.1,
            lambda: 0.0,
        },
        30,
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert_eq!(cr.status, CrossingStatus::Complete);
    let ys = cr.ys();
    let last = ys[ys.len() - 1];
    // geometric convergence: gaps shrink by a roughly constant factor
    let gaps: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(gaps[gaps.len() - 1] < 1e-10);
    assert!((last - 1.768_467_050_524_6).abs() < 1e-8);
    for e in &cr.events {
        assert!(e.state.lambda.abs() < 1e-12);
        assert!(lienard_field(&e.state, &p).lambda > 0.0);
    }
    assert!(cr.period_estimate().is_some());
}

#[test]
fn crossings_collapse_below_threshold() {
    let p = params(1.0, 0.0);
    let cr = poincare_crossings(
        &p,
        LienardState {
            y: 0.5,
            lambda: 0.0,
        },
        500,
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert_eq!(cr.status, CrossingStatus::Converged);
    assert!(cr.ys().windows(2).all(|w| w[1] < w[0]));
    assert!(
        poincare_crossings(&p, LienardState::default(), 3, &IntegratorConfig::default()).is_err()
    );
}

#[test]
fn lyapunov_monitor() {
    let p = params(2.5, 0.6);
    let far = LienardState {
        y: 0.0,
        lambda: 2.0 * p.beta / 3.0 + 1.0,
    };
    let tr = integrate(&p, far, 30.0, &IntegratorConfig::default()).unwrap();
    let samples = lyapunov_u_monitor(&tr, &p);
    assert!(samples.iter().all(|s| !s.flagged));
    assert_eq!(
        lyapunov_u_dot(
            &LienardState {
                y: 3.0,
                lambda: 0.0
            },
            &p
        ),
        0.0
    );
    // bounded: U never exceeds its starting value by much
    let u0 = lyapunov_u(&far);
    assert!(samples.iter().all(|s| s.u <= u0 * 1.5));

    // dU/dt from central differences on the dense output
    let sol = integrate_dense(&p, far, 5.0, &IntegratorConfig::default()).unwrap();
    for k in 1..50 {
        let t = k as f64 * 0.1;
        let dt = 1e-4;
        let fd = (lyapunov_u(&sol.at(t + dt)) - lyapunov_u(&sol.at(t - dt))) / (2.0 * dt);
        assert!((fd - lyapunov_u_dot(&sol.at(t), &p)).abs() < 1e-6);
    }
}
