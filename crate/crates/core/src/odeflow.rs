//! Deterministic flow of the limit systems: the full three-dimensional
//! order-parameter system, its planar reduction and the Liénard form.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    g_lienard, lienard_field, vector_field_3d, vector_field_planar, LienardState, ModelParams,
    OrderState, PlanarState, StateRow, Trajectory,
};
use crate::ode::{Crossing, DenseSolution, DenseStep, Dopri5, OdeError, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid initial condition: {0}")]
    InvalidInit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Full3D,
    Planar,
    Lienard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub direction: Direction,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            direction: Direction::Forward,
        }
    }
}

impl IntegratorConfig {
    pub fn backward(self) -> Self {
        Self {
            direction: Direction::Backward,
            ..self
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_step: self.max_step,
        }
    }
}

/// State types that carry their own vector field.
pub trait FlowState<const D: usize>: StateRow + Send + Sync {
    const SYSTEM: System;
    fn to_arr(self) -> [f64; D];
    fn from_arr(a: [f64; D]) -> Self;
    fn field(&self, p: &ModelParams) -> Self;
}

impl FlowState<3> for OrderState {
    const SYSTEM: System = System::Full3D;
    fn to_arr(self) -> [f64; 3] {
        self.to_array()
    }
    fn from_arr(a: [f64; 3]) -> Self {
        Self::from_array(a)
    }
    fn field(&self, p: &ModelParams) -> Self {
        vector_field_3d(self, p)
    }
}

impl FlowState<2> for PlanarState {
    const SYSTEM: System = System::Planar;
    fn to_arr(self) -> [f64; 2] {
        self.to_array()
    }
    fn from_arr(a: [f64; 2]) -> Self {
        Self::from_array(a)
    }
    fn field(&self, p: &ModelParams) -> Self {
        vector_field_planar(self, p)
    }
}

impl FlowState<2> for LienardState {
    const SYSTEM: System = System::Lienard;
    fn to_arr(self) -> [f64; 2] {
        self.to_array()
    }
    fn from_arr(a: [f64; 2]) -> Self {
        Self::from_array(a)
    }
    fn field(&self, p: &ModelParams) -> Self {
        lienard_field(self, p)
    }
}

fn oriented_field<S: FlowState<D>, const D: usize>(
    p: ModelParams,
    direction: Direction,
) -> impl Fn(&[f64; D]) -> [f64; D] {
    let sign = direction.sign();
    move |y: &[f64; D]| {
        let mut v = S::from_arr(*y).field(&p).to_arr();
        v.iter_mut().for_each(|x| *x *= sign);
        v
    }
}

/// Dense solution of one of the model systems. Times are measured in the
/// integration direction: for a backward run `at(τ)` is the state at
/// physical time `−τ`.
#[derive(Debug, Clone)]
pub struct FlowSolution<S, const D: usize> {
    pub solution: DenseSolution<D>,
    pub params: ModelParams,
    pub direction: Direction,
    _state: PhantomData<S>,
}

impl<S: FlowState<D>, const D: usize> FlowSolution<S, D> {
    pub fn at(&self, t: f64) -> S {
        S::from_arr(self.solution.eval(t))
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    /// Accepted step nodes.
    pub fn trajectory(&self) -> Trajectory<S> {
        let mut tr = Trajectory::new(self.params, 0);
        for (t, y) in self.solution.nodes() {
            tr.push(t, S::from_arr(y));
        }
        tr
    }

    /// Dense output evaluated on the grid `k·dt`, `k = 0, 1, …` up to `t_end`.
    pub fn sample(&self, dt: f64) -> Trajectory<S> {
        let mut tr = Trajectory::new(self.params, 0);
        let end = self.t_end();
        let count = (end / dt + 1e-9).floor() as usize;
        for k in 0..=count {
            let t = k as f64 * dt;
            tr.push(t, self.at(t.min(end)));
        }
        tr
    }
}

/// Adaptive integration with dense output over `[0, t_end]`.
pub fn integrate_dense<S: FlowState<D>, const D: usize>(
    p: &ModelParams,
    init: S,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowSolution<S, D>, FlowError> {
    let y0 = init.to_arr();
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::InvalidInit("non-finite component".into()));
    }
    let f = oriented_field::<S, D>(*p, cfg.direction);
    let solution = crate::ode::solve(f, 0.0, y0, t_end, cfg.tolerances())?;
    Ok(FlowSolution {
        solution,
        params: *p,
        direction: cfg.direction,
        _state: PhantomData,
    })
}

/// Adaptive integration returning the accepted step nodes.
pub fn integrate<S: FlowState<D>, const D: usize>(
    p: &ModelParams,
    init: S,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<S>, FlowError> {
    Ok(integrate_dense(p, init, t_end, cfg)?.trajectory())
}

/// Orientation of a section crossing, in physical time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    /// `λ = 0` with `λ̇ > 0` (equivalently `y > 0`).
    LambdaUp,
    /// `λ = 0` with `λ̇ < 0`.
    LambdaDown,
}

impl Section {
    fn physical_sign(self) -> i8 {
        match self {
            Section::LambdaUp => 1,
            Section::LambdaDown => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionEvent {
    /// Integration time of the crossing (elapsed reversed time for backward runs).
    pub t: f64,
    pub state: LienardState,
    /// Sign of `λ̇` at the crossing in physical time.
    pub crossing_sign: i8,
}

/// Termination criteria for section-to-section integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowLimits {
    /// Collapse onto the origin when `‖(y, λ)‖` drops below this.
    pub converge_radius: f64,
    /// Escape when `‖(y, λ)‖` exceeds this.
    pub escape_radius: f64,
    /// Give up when no crossing occurs within this much integration time.
    pub max_time_between: f64,
}

impl Default for FlowLimits {
    fn default() -> Self {
        Self {
            converge_radius: 1e-9,
            escape_radius: 1e6,
            max_time_between: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowEvent {
    Crossing(SectionEvent),
    Converged { t: f64 },
    Escaped { t: f64 },
    Stalled { t: f64 },
}

type BoxedField = Box<dyn Fn(&[f64; 2]) -> [f64; 2] + Send + Sync>;

/// Integrates the Liénard system and reports successive section crossings.
pub struct SectionFlow {
    stepper: Dopri5<BoxedField, 2>,
    section: Section,
    direction: Direction,
    limits: FlowLimits,
    event_tol: f64,
    last_event_t: f64,
    /// Largest `|λ|` seen since the last crossing (step nodes and crossings only).
    pub max_abs_lambda: f64,
}

impl SectionFlow {
    pub fn new(
        p: &ModelParams,
        init: LienardState,
        section: Section,
        cfg: &IntegratorConfig,
        limits: FlowLimits,
    ) -> Result<Self, FlowError> {
        if !init.y.is_finite() || !init.lambda.is_finite() {
            return Err(FlowError::InvalidInit("non-finite component".into()));
        }
        let f: BoxedField = Box::new(oriented_field::<LienardState, 2>(*p, cfg.direction));
        let stepper = Dopri5::new(f, 0.0, init.to_arr(), cfg.tolerances())?;
        Ok(Self {
            stepper,
            section,
            direction: cfg.direction,
            limits,
            event_tol: cfg.abs_tol.min(1e-12),
            last_event_t: 0.0,
            max_abs_lambda: init.lambda.abs(),
        })
    }

    pub fn t(&self) -> f64 {
        self.stepper.t()
    }

    pub fn state(&self) -> LienardState {
        LienardState::from_arr(*self.stepper.y())
    }

    fn event_crossing(&self) -> Crossing {
        let physical_up = self.section == Section::LambdaUp;
        let forward = self.direction == Direction::Forward;
        if physical_up == forward {
            Crossing::Rising
        } else {
            Crossing::Falling
        }
    }

    fn locate(&self, step: &DenseStep<2>) -> Option<(f64, [f64; 2])> {
        step.locate(
            &|y: &[f64; 2], _: &[f64; 2]| y[1],
            self.event_crossing(),
            self.event_tol,
        )
    }

    /// Advances to the next crossing of the section or a terminal condition.
    pub fn next_event(&mut self) -> Result<FlowEvent, FlowError> {
        loop {
            let t_stop = self.last_event_t + self.limits.max_time_between;
            if self.stepper.t() >= t_stop {
                return Ok(FlowEvent::Stalled {
                    t: self.stepper.t(),
                });
            }
            let step = self.stepper.step(t_stop)?;
            self.max_abs_lambda = self.max_abs_lambda.max(step.y1[1].abs());
            if let Some((t, y)) = self.locate(&step) {
                self.last_event_t = t;
                let state = LienardState::from_arr(y);
                return Ok(FlowEvent::Crossing(SectionEvent {
                    t,
                    state,
                    crossing_sign: self.section.physical_sign(),
                }));
            }
            let r = step.y1[0].hypot(step.y1[1]);
            if r < self.limits.converge_radius {
                return Ok(FlowEvent::Converged { t: step.t1() });
            }
            if r > self.limits.escape_radius {
                return Ok(FlowEvent::Escaped { t: step.t1() });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingStatus {
    /// All requested crossings were found.
    Complete,
    /// The trajectory collapsed onto the origin first.
    Converged,
    /// The trajectory left the escape radius first.
    Escaped,
    /// No crossing within the per-crossing time budget.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossings {
    pub events: Vec<SectionEvent>,
    pub status: CrossingStatus,
}

impl Crossings {
    /// Section `y` values, in order.
    pub fn ys(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.state.y).collect()
    }

    /// Mean return time after discarding the first 20% of crossings
    /// (at least 5). `None` when too few crossings remain.
    pub fn period_estimate(&self) -> Option<f64> {
        let n = self.events.len();
        let skip = (n / 5).max(5);
        if n < skip + 2 {
            return None;
        }
        let tail = &self.events[skip..];
        Some((tail[tail.len() - 1].t - tail[0].t) / (tail.len() - 1) as f64)
    }
}

/// First `n_crossings` upward crossings of `λ = 0` (physical time).
pub fn poincare_crossings(
    p: &ModelParams,
    init: LienardState,
    n_crossings: usize,
    cfg: &IntegratorConfig,
) -> Result<Crossings, FlowError> {
    poincare_crossings_with(
        p,
        init,
        Section::LambdaUp,
        n_crossings,
        cfg,
        FlowLimits::default(),
    )
}

pub fn poincare_crossings_with(
    p: &ModelParams,
    init: LienardState,
    section: Section,
    n_crossings: usize,
    cfg: &IntegratorConfig,
    limits: FlowLimits,
) -> Result<Crossings, FlowError> {
    if init.y == 0.0 && init.lambda == 0.0 {
        return Err(FlowError::InvalidInit("the origin is a fixed point".into()));
    }
    let mut flow = SectionFlow::new(p, init, section, cfg, limits)?;
    let mut events = Vec::with_capacity(n_crossings);
    while events.len() < n_crossings {
        match flow.next_event()? {
            FlowEvent::Crossing(e) => events.push(e),
            FlowEvent::Converged { .. } => {
                return Ok(Crossings {
                    events,
                    status: CrossingStatus::Converged,
                })
            }
            FlowEvent::Escaped { .. } => {
                return Ok(Crossings {
                    events,
                    status: CrossingStatus::Escaped,
                })
            }
            FlowEvent::Stalled { .. } => {
                return Ok(Crossings {
                    events,
                    status: CrossingStatus::Stalled,
                })
            }
        }
    }
    Ok(Crossings {
        events,
        status: CrossingStatus::Complete,
    })
}

/// One sample of the Lyapunov-function monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UMonitorSample {
    pub t: f64,
    pub u: f64,
    pub u_dot: f64,
    /// `λ ≥ 2β/3` but `U̇ ≥ 0`: contradicts the trapping estimate.
    pub flagged: bool,
}

/// `U(y, λ) = y²/4 + λ²/2`.
pub fn lyapunov_u(s: &LienardState) -> f64 {
    0.25 * s.y * s.y + 0.5 * s.lambda * s.lambda
}

/// `U̇ = −λ g(λ)` along the Liénard flow.
pub fn lyapunov_u_dot(s: &LienardState, p: &ModelParams) -> f64 {
    -s.lambda * g_lienard(s.lambda, p)
}

pub fn lyapunov_u_monitor(traj: &Trajectory<LienardState>, p: &ModelParams) -> Vec<UMonitorSample> {
    let threshold = 2.0 * p.beta / 3.0;
    traj.iter()
        .map(|(t, s)| {
            let u_dot = lyapunov_u_dot(s, p);
            UMonitorSample {
                t,
                u: lyapunov_u(s),
                u_dot,
                flagged: s.lambda >= threshold && u_dot >= 0.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(beta, h).unwrap()
    }

    #[test]
    fn origin_trajectory_is_constant() {
        let p = params(2.0, 0.7);
        let tr = integrate(
            &p,
            PlanarState::default(),
            20.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr
            .states
            .iter()
            .all(|s| s.m_sigma.abs() < 1e-12 && s.lambda.abs() < 1e-12));
        let tr = integrate(
            &p,
            LienardState::default(),
            20.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr
            .states
            .iter()
            .all(|s| s.y.abs() < 1e-12 && s.lambda.abs() < 1e-12));
    }

    #[test]
    fn trajectory_times_increase_from_zero() {
        let p = params(1.0, 0.3);
        let tr = integrate(
            &p,
            OrderState::new(1.0, 0.0, 0.0),
            10.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!((tr.times.last().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn forward_then_backward_returns() {
        let p = params(1.2, 0.4);
        let init = LienardState {
            y: 0.8,
            lambda: -0.3,
        };
        let cfg = IntegratorConfig::default();
        let fwd = integrate_dense(&p, init, 5.0, &cfg).unwrap();
        let end = fwd.at(5.0);
        let back = integrate_dense(&p, end, 5.0, &cfg.backward()).unwrap();
        let s = back.at(5.0);
        assert!((s.y - init.y).abs() < 100.0 * cfg.rel_tol);
        assert!((s.lambda - init.lambda).abs() < 100.0 * cfg.rel_tol);
    }

    #[test]
    fn subcritical_beta_converges() {
        let p = params(1.0, 0.0);
        let c = poincare_crossings(
            &p,
            LienardState {
                y: 1.0,
                lambda: 0.0,
            },
            10_000,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(c.status, CrossingStatus::Converged);
        let ys = c.ys();
        assert!(ys.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn crossings_lie_on_section() {
        let p = params(2.0, 0.0);
        let cfg = IntegratorConfig::default();
        let c = poincare_crossings(
            &p,
            LienardState {
                y: 0.0,
                lambda: 2.0,
            },
            20,
            &cfg,
        )
        .unwrap();
        assert_eq!(c.status, CrossingStatus::Complete);
        for e in &c.events {
            assert!(e.state.lambda.abs() < cfg.abs_tol);
            // transversality: λ̇ = y − g(0) = y
            assert!(lienard_field(&e.state, &p).lambda > 0.0);
            assert_eq!(e.crossing_sign, 1);
        }
        assert!(c.period_estimate().is_some());
    }

    #[test]
    fn origin_rejected_as_section_start() {
        let p = params(2.0, 0.0);
        assert!(
            poincare_crossings(&p, LienardState::default(), 3, &IntegratorConfig::default())
                .is_err()
        );
    }

    #[test]
    fn u_monitor_basics() {
        let p = params(2.0, 0.5);
        let mut tr = Trajectory::new(p, 0);
        tr.push(
            0.0,
            LienardState {
                y: 1.0,
                lambda: 0.0,
            },
        );
        tr.push(
            1.0,
            LienardState {
                y: -3.0,
                lambda: 2.0,
            },
        );
        let m = lyapunov_u_monitor(&tr, &p);
        assert_eq!(m[0].u_dot, 0.0);
        assert!((m[0].u - 0.25).abs() < 1e-15);
        assert!(m[1].u_dot < 0.0 && !m[1].flagged);
    }
}
