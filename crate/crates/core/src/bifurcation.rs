//! Limit cycles of the Liénard system, the saddle-node locus `β_⋆(h)` and
//! classification of the `(h, β)` plane.
//!
//! Cycles are fixed points of the return map `P` on the half-line
//! `{λ = 0, y > 0}` (upward crossings). The stable (outer) cycle is reached
//! by iterating `P` from the trapping boundary; the unstable (inner) cycle
//! by iterating `P⁻¹`, i.e. integrating in reversed time from a small
//! perturbation of the origin. Plain iteration is accelerated by secant
//! jumps on the displacement `D(y) = P(y) − y` once the iterates converge
//! geometrically; a jump that lands in the wrong basin is rolled back.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{beta_c, LienardState, ModelParams, H_TC};
use crate::ode::Crossing;
use crate::odeflow::{
    integrate_dense, Direction, FlowError, FlowEvent, FlowLimits, IntegratorConfig, Section,
    SectionFlow,
};
use crate::stability::{beta_t, eigenvalues, StabilityError};

/// Successive section iterates closer than this count as converged.
pub const SECTION_GAP_TOL: f64 = 1e-8;
/// Hard cap on section crossings per cycle search.
pub const CROSSING_BUDGET: usize = 2000;
/// Radius of the perturbation of the origin for the reversed-time search.
pub const UNSTABLE_START: f64 = 1e-4;
/// Default distance to `β_c` (and to the `β_⋆` bracket) reported as indeterminate.
pub const BOUNDARY_TOL: f64 = 1e-3;
/// Default bracket width for `β_⋆`.
pub const BETA_STAR_TOL: f64 = 1e-4;

/// Section iterates below this, with a linearly stable origin, have collapsed.
const COLLAPSE_Y: f64 = 1e-6;
const MAX_ROLLBACKS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BifurcationError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("cycle search indeterminate after {crossings} crossings (last gap {last_gap:e})")]
    Indeterminate { last_gap: f64, crossings: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("model violation: {0}")]
    ModelViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleStability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    /// `max |λ|` over one period.
    pub amplitude: f64,
    pub period: f64,
    pub stability: CycleStability,
    /// `y` at the upward crossing of `λ = 0`.
    pub section_point: f64,
    /// Derivative of the forward return map at the section point.
    pub multiplier: f64,
    /// Section crossings spent locating the cycle.
    pub crossings: usize,
}

impl CycleInfo {
    pub fn start(&self) -> LienardState {
        LienardState {
            y: self.section_point,
            lambda: 0.0,
        }
    }
}

/// Knobs for the section-map searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSearch {
    pub integrator: IntegratorConfig,
    pub gap_tol: f64,
    pub budget: usize,
}

impl Default for CycleSearch {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            gap_tol: SECTION_GAP_TOL,
            budget: CROSSING_BUDGET,
        }
    }
}

/// Far initial condition `(y, λ) = (0, 2β/3 + 1)` on the trapping boundary.
pub fn trapping_start(p: &ModelParams) -> LienardState {
    LienardState {
        y: 0.0,
        lambda: 2.0 * p.beta / 3.0 + 1.0,
    }
}

enum Hit {
    Section { y: f64, t: f64 },
    Collapsed,
    Escaped,
    Stalled,
}

struct ReturnMap {
    p: ModelParams,
    cfg: IntegratorConfig,
}

impl ReturnMap {
    fn new(p: ModelParams, cfg: IntegratorConfig, direction: Direction) -> Self {
        Self {
            p,
            cfg: IntegratorConfig { direction, ..cfg },
        }
    }

    fn first_hit(&self, init: LienardState) -> Result<Hit, FlowError> {
        let mut flow = SectionFlow::new(
            &self.p,
            init,
            Section::LambdaUp,
            &self.cfg,
            FlowLimits::default(),
        )?;
        Ok(match flow.next_event()? {
            FlowEvent::Crossing(e) => Hit::Section {
                y: e.state.y,
                t: e.t,
            },
            FlowEvent::Converged { .. } => Hit::Collapsed,
            FlowEvent::Escaped { .. } => Hit::Escaped,
            FlowEvent::Stalled { .. } => Hit::Stalled,
        })
    }

    fn apply(&self, y: f64) -> Result<Hit, FlowError> {
        self.first_hit(LienardState { y, lambda: 0.0 })
    }
}

enum Settled {
    Fixed { y: f64, crossings: usize },
    Lost,
}

/// Return multiplier of the linearization at a stable focus, `e^{2π Re k / Im k}`.
fn linear_multiplier(p: &ModelParams) -> Option<f64> {
    if !p.origin_stable() {
        return None;
    }
    let k = eigenvalues(p).k_plus;
    (k.im.abs() > 0.0).then(|| (2.0 * PI * k.re / k.im.abs()).exp())
}

/// Iterates the section map from `init` until the iterates settle on a fixed
/// point or `lost` declares the orbit gone (collapse or escape). With
/// `linear` set, decreasing iterates contracting at that rate are inside
/// the linear regime of a stable origin and count as collapsed.
fn settle<L>(
    map: &ReturnMap,
    init: LienardState,
    lost: L,
    linear: Option<f64>,
    search: &CycleSearch,
) -> Result<Settled, BifurcationError>
where
    L: Fn(f64) -> bool,
{
    let mut crossings = 1;
    let mut cur = match map.first_hit(init)? {
        Hit::Section { y, .. } if !lost(y) => y,
        Hit::Stalled => {
            return Err(BifurcationError::Indeterminate {
                last_gap: f64::INFINITY,
                crossings,
            })
        }
        _ => return Ok(Settled::Lost),
    };
    // (y, D(y)) along the current unbroken orbit
    let mut hist: Vec<(f64, f64)> = Vec::new();
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    let mut fence: Option<f64> = None;
    let mut rollbacks = 0;
    let mut last_gap = f64::INFINITY;

    loop {
        if crossings >= search.budget {
            return Err(BifurcationError::Indeterminate {
                last_gap,
                crossings,
            });
        }
        let hit = map.apply(cur)?;
        crossings += 1;
        let next = match hit {
            Hit::Section { y, .. } if !lost(y) => Some(y),
            Hit::Stalled => {
                return Err(BifurcationError::Indeterminate {
                    last_gap,
                    crossings,
                })
            }
            _ => None,
        };
        let Some(y1) = next else {
            if jumps.is_empty() {
                return Ok(Settled::Lost);
            }
            // later jumps started from points that may already be lost
            let (pre, landing) = jumps[0];
            jumps.clear();
            fence = Some(landing);
            rollbacks += 1;
            cur = pre;
            hist.clear();
            continue;
        };
        let d = y1 - cur;
        last_gap = d.abs();

        if let Some(&(yp, dp)) = hist.last() {
            if dp * d < 0.0 {
                let (y, used) = illinois(map, &lost, (yp, dp), (cur, d), search)?;
                return Ok(Settled::Fixed {
                    y,
                    crossings: crossings + used,
                });
            }
        }
        if last_gap < search.gap_tol {
            if linear.is_some_and(|rho| y1 < 10.0 * search.gap_tol / (1.0 - rho)) {
                return Ok(Settled::Lost);
            }
            let (y, used) = polish(map, &lost, hist.last().copied(), (cur, d))?;
            return Ok(Settled::Fixed {
                y,
                crossings: crossings + used,
            });
        }
        hist.push((cur, d));
        cur = y1;

        if hist.len() < 3 {
            continue;
        }
        let n = hist.len();
        let (y_a, d_a) = hist[n - 2];
        let (y_b, d_b) = hist[n - 1];
        let r1 = d_a / hist[n - 3].1;
        let r2 = d_b / d_a;
        let geometric =
            r1 > 0.0 && r1 < 1.0 && r2 > 0.0 && r2 < 1.0 && (r2 - r1).abs() < 0.1 * (1.0 - r2);
        if let Some(rho) = linear {
            let near = |r: f64| (r - rho).abs() < 0.1 * (1.0 - rho);
            // collapse contracts y itself, not only the gaps
            let shrink = |y: f64, d: f64| near(1.0 + d / y);
            if d_b < 0.0 && near(r1) && near(r2) && shrink(y_a, d_a) && shrink(y_b, d_b) {
                if jumps.is_empty() {
                    return Ok(Settled::Lost);
                }
                // the orbit is certainly collapsing only if no jump is pending
                let (pre, landing) = jumps[0];
                jumps.clear();
                fence = Some(landing);
                rollbacks += 1;
                cur = pre;
                hist.clear();
                continue;
            }
        }
        if !geometric || rollbacks >= MAX_ROLLBACKS {
            continue;
        }
        let mut target = y_b - d_b * (y_b - y_a) / (d_b - d_a);
        let dir = d_b.signum();
        if let Some(f) = fence {
            if (target - f) * dir >= 0.0 {
                target = 0.5 * (cur + f);
            }
        }
        if (target - cur) * dir <= 4.0 * search.gap_tol || !target.is_finite() || target <= 0.0 {
            continue;
        }
        jumps.push((cur, target));
        cur = target;
        hist.clear();
    }
}

/// Modified regula falsi on `D` over a sign-changing bracket.
fn illinois<L: Fn(f64) -> bool>(
    map: &ReturnMap,
    lost: &L,
    a: (f64, f64),
    b: (f64, f64),
    search: &CycleSearch,
) -> Result<(f64, usize), BifurcationError> {
    let (mut xa, mut fa) = a;
    let (mut xb, mut fb) = b;
    let mut side = 0i8;
    let mut used = 0;
    for _ in 0..80 {
        let x = (xa * fb - xb * fa) / (fb - fa);
        let fx = displacement(map, lost, x)?;
        used += 1;
        if fx.abs() < 1e-13 * x.abs().max(1.0) || (xb - xa).abs() < 1e-13 * x.abs().max(1.0) {
            return Ok((x, used));
        }
        if fx * fb > 0.0 {
            xb = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            xa = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if used + 1 >= search.budget {
            break;
        }
    }
    let x = if fa.abs() < fb.abs() { xa } else { xb };
    Ok((x, used))
}

/// Secant refinement of an already converged iterate.
fn polish<L: Fn(f64) -> bool>(
    map: &ReturnMap,
    lost: &L,
    prev: Option<(f64, f64)>,
    last: (f64, f64),
) -> Result<(f64, usize), BifurcationError> {
    let fallback = last.0 + last.1;
    let Some(mut a) = prev else {
        return Ok((fallback, 0));
    };
    let mut b = last;
    let mut used = 0;
    for _ in 0..8 {
        if b.1 == a.1 {
            break;
        }
        let x = b.0 - b.1 * (b.0 - a.0) / (b.1 - a.1);
        if !x.is_finite() || (x - b.0).abs() > 1e3 * last.1.abs().max(1e-12) {
            break;
        }
        let fx = displacement(map, lost, x)?;
        used += 1;
        a = b;
        b = (x, fx);
        if fx.abs() < 1e-13 * x.abs().max(1.0) {
            break;
        }
    }
    let best = if b.1.abs() <= last.1.abs() {
        b.0
    } else {
        fallback
    };
    Ok((best, used))
}

fn displacement<L: Fn(f64) -> bool>(
    map: &ReturnMap,
    lost: &L,
    y: f64,
) -> Result<f64, BifurcationError> {
    match map.apply(y)? {
        Hit::Section { y: y1, .. } if !lost(y1) => Ok(y1 - y),
        _ => Err(BifurcationError::Indeterminate {
            last_gap: f64::NAN,
            crossings: 0,
        }),
    }
}

/// Period, amplitude and multiplier of the cycle through `(y*, 0)`.
fn describe(
    p: &ModelParams,
    y_star: f64,
    stability: CycleStability,
    crossings: usize,
    cfg: &IntegratorConfig,
) -> Result<CycleInfo, BifurcationError> {
    let map = ReturnMap::new(*p, *cfg, Direction::Forward);
    let period = match map.apply(y_star)? {
        Hit::Section { t, .. } => t,
        _ => {
            return Err(BifurcationError::ModelViolation(format!(
                "orbit through y = {y_star} does not return to the section"
            )))
        }
    };
    let amplitude = cycle_amplitude(
        p,
        LienardState {
            y: y_star,
            lambda: 0.0,
        },
        period,
        cfg,
    )?;
    let delta = 1e-5 * y_star.max(1e-3);
    let image = |y: f64| -> Result<f64, BifurcationError> {
        match map.apply(y)? {
            Hit::Section { y, .. } => Ok(y),
            _ => Err(BifurcationError::ModelViolation(
                "return map undefined near the cycle".into(),
            )),
        }
    };
    let multiplier = (image(y_star + delta)? - image(y_star - delta)?) / (2.0 * delta);
    Ok(CycleInfo {
        amplitude,
        period,
        stability,
        section_point: y_star,
        multiplier,
        crossings,
    })
}

/// `max |λ|` over `[0, period]` from the dense output, using the extrema
/// where `λ̇ = 0`.
pub fn cycle_amplitude(
    p: &ModelParams,
    start: LienardState,
    period: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, BifurcationError> {
    let cfg = IntegratorConfig {
        direction: Direction::Forward,
        ..*cfg
    };
    let sol = integrate_dense(p, start, period, &cfg)?;
    let mut amp = start.lambda.abs();
    for step in &sol.solution.steps {
        amp = amp.max(step.y1[1].abs());
        let slope = |_: &[f64; 2], dy: &[f64; 2]| dy[1];
        if let Some((_, y)) = step.locate(&slope, Crossing::Either, 1e-14) {
            amp = amp.max(y[1].abs());
        }
    }
    Ok(amp)
}

/// The outer, attracting cycle, reached from the trapping boundary.
/// `Ok(None)` when the orbit collapses onto the origin.
pub fn find_stable_cycle(p: &ModelParams) -> Result<Option<CycleInfo>, BifurcationError> {
    find_stable_cycle_with(p, &CycleSearch::default())
}

pub fn find_stable_cycle_with(
    p: &ModelParams,
    search: &CycleSearch,
) -> Result<Option<CycleInfo>, BifurcationError> {
    let map = ReturnMap::new(*p, search.integrator, Direction::Forward);
    let stable_origin = p.origin_stable();
    let lost = |y: f64| stable_origin && y < COLLAPSE_Y;
    match settle(&map, trapping_start(p), lost, linear_multiplier(p), search)? {
        Settled::Fixed { y, crossings } => {
            describe(p, y, CycleStability::Stable, crossings, &search.integrator).map(Some)
        }
        Settled::Lost => Ok(None),
    }
}

/// The inner, repelling cycle of the coexistence phase. Requires a linearly
/// stable origin.
pub fn find_unstable_cycle(p: &ModelParams) -> Result<Option<CycleInfo>, BifurcationError> {
    let ceiling = match find_stable_cycle(p) {
        Ok(None) => return Ok(None),
        Ok(Some(c)) => Some(c.section_point),
        Err(BifurcationError::Indeterminate { .. }) => None,
        Err(e) => return Err(e),
    };
    find_unstable_cycle_with(p, ceiling, &CycleSearch::default())
}

/// Reversed-time search; `ceiling` is the section point of the stable
/// cycle when known.
pub fn find_unstable_cycle_with(
    p: &ModelParams,
    ceiling: Option<f64>,
    search: &CycleSearch,
) -> Result<Option<CycleInfo>, BifurcationError> {
    if !p.origin_stable() {
        return Err(BifurcationError::Precondition(format!(
            "origin is not linearly stable at beta = {}, h = {}",
            p.beta, p.h
        )));
    }
    let map = ReturnMap::new(*p, search.integrator, Direction::Backward);
    let top = ceiling.unwrap_or(f64::INFINITY);
    let lost = |y: f64| y >= top;
    let start = LienardState {
        y: UNSTABLE_START,
        lambda: 0.0,
    };
    match settle(&map, start, lost, None, search)? {
        Settled::Fixed { y, crossings } => describe(
            p,
            y,
            CycleStability::Unstable,
            crossings,
            &search.integrator,
        )
        .map(Some),
        Settled::Lost => Ok(None),
    }
}

/// Where the forward orbit of a given state ends up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fate {
    Origin,
    Cycle(f64),
}

/// Forward fate of an arbitrary initial condition (section point of the
/// limiting cycle, or collapse onto the origin).
pub fn forward_fate(p: &ModelParams, init: LienardState) -> Result<Fate, BifurcationError> {
    let search = CycleSearch::default();
    let map = ReturnMap::new(*p, search.integrator, Direction::Forward);
    let stable_origin = p.origin_stable();
    let lost = |y: f64| stable_origin && y < COLLAPSE_Y;
    Ok(
        match settle(&map, init, lost, linear_multiplier(p), &search)? {
            Settled::Fixed { y, .. } => Fate::Cycle(y),
            Settled::Lost => Fate::Origin,
        },
    )
}

/// Bracket `[lo, hi]` for the saddle-node of cycles: no stable cycle at
/// `lo`, one at `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaStar {
    pub h: f64,
    pub lo: f64,
    pub hi: f64,
    /// Probes whose cycle search was indeterminate.
    pub indeterminate: Vec<f64>,
    pub probes: usize,
}

impl BetaStar {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn has_stable_cycle(beta: f64, h: f64) -> Result<Option<bool>, BifurcationError> {
    let p = ModelParams { beta, h };
    match find_stable_cycle(&p) {
        Ok(c) => Ok(Some(c.is_some())),
        Err(BifurcationError::Indeterminate { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Bisection for `β_⋆(h)` on `[β_T(h), β_c(h)]` with the predicate "a stable
/// cycle exists". Indeterminate probes are stepped around; the bracket then
/// covers them.
pub fn beta_star(h: f64, tol: f64) -> Result<BetaStar, BifurcationError> {
    if h <= H_TC {
        return Err(BifurcationError::Precondition(format!(
            "beta_star needs h > h_tc, got {h}"
        )));
    }
    if !(tol >= 1e-6) {
        return Err(BifurcationError::Precondition(format!(
            "tol must be at least 1e-6, got {tol}"
        )));
    }
    let mut lo = beta_t(h)?;
    let mut hi = beta_c(h);
    let mut probes = 2;
    if has_stable_cycle(lo, h)? == Some(true) {
        return Err(BifurcationError::ModelViolation(format!(
            "stable cycle at the lower bound beta_T = {lo} for h = {h}"
        )));
    }
    if has_stable_cycle(hi, h)? == Some(false) {
        return Err(BifurcationError::ModelViolation(format!(
            "no stable cycle at beta_c = {hi} for h = {h}"
        )));
    }
    let mut ind: Vec<f64> = Vec::new();
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let inside: Vec<f64> = ind.iter().copied().filter(|&b| b > lo && b < hi).collect();
        let mid = if inside.is_empty() {
            0.5 * (lo + hi)
        } else {
            let a = inside.iter().copied().fold(f64::INFINITY, f64::min);
            let b = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (below, above) = (a - lo, hi - b);
            if below.max(above) <= 0.5 * tol {
                break;
            }
            if below >= above {
                0.5 * (lo + a)
            } else {
                0.5 * (b + hi)
            }
        };
        probes += 1;
        match has_stable_cycle(mid, h)? {
            Some(true) => hi = mid,
            Some(false) => lo = mid,
            None => ind.push(mid),
        }
    }
    ind.sort_by(f64::total_cmp);
    Ok(BetaStar {
        h,
        lo,
        hi,
        indeterminate: ind,
        probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "FPLC")]
    CoexistFpLc,
    #[serde(rename = "LC")]
    Lc,
    #[serde(rename = "IND")]
    Indeterminate,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Fp => "FP",
            Phase::CoexistFpLc => "FPLC",
            Phase::Lc => "LC",
            Phase::Indeterminate => "IND",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseClass {
    pub class: Phase,
    pub beta_c: f64,
    pub beta_star: Option<f64>,
    pub cycles: Vec<CycleInfo>,
    /// Why the point was left indeterminate, or a diagnostic finding.
    pub note: Option<String>,
}

impl PhaseClass {
    pub fn stable_cycle(&self) -> Option<&CycleInfo> {
        self.cycles
            .iter()
            .find(|c| c.stability == CycleStability::Stable)
    }

    pub fn unstable_cycle(&self) -> Option<&CycleInfo> {
        self.cycles
            .iter()
            .find(|c| c.stability == CycleStability::Unstable)
    }
}

/// Classification with `β_⋆` computed on the fly for `h > h_tc`.
pub fn classify(p: &ModelParams) -> Result<PhaseClass, BifurcationError> {
    let star = if p.h > H_TC {
        Some(beta_star(p.h, BETA_STAR_TOL)?)
    } else {
        None
    };
    classify_with(p, BOUNDARY_TOL, star.as_ref())
}

/// Classification of one point given a precomputed `β_⋆` bracket. Points
/// within `tol` of `β_c` or of the bracket are reported indeterminate.
pub fn classify_with(
    p: &ModelParams,
    tol: f64,
    star: Option<&BetaStar>,
) -> Result<PhaseClass, BifurcationError> {
    let bc = beta_c(p.h);
    let mut out = PhaseClass {
        class: Phase::Indeterminate,
        beta_c: bc,
        beta_star: star.map(BetaStar::midpoint),
        cycles: Vec::new(),
        note: None,
    };
    if (p.beta - bc).abs() < tol {
        out.note = Some("within tolerance of beta_c".into());
        return Ok(out);
    }
    if let Some(s) = star {
        if p.beta > s.lo - tol && p.beta < s.hi + tol {
            out.note = Some("within tolerance of the beta_star bracket".into());
            return Ok(out);
        }
    }
    let stable = match find_stable_cycle(p) {
        Ok(c) => c,
        Err(BifurcationError::Indeterminate {
            last_gap,
            crossings,
        }) => {
            out.note = Some(format!(
                "stable-cycle search indeterminate ({crossings} crossings, gap {last_gap:e})"
            ));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    if !p.origin_stable() {
        match stable {
            Some(c) => {
                out.class = Phase::Lc;
                out.cycles.push(c);
            }
            None => out.note = Some("unstable origin without an attracting cycle".into()),
        }
        return Ok(out);
    }
    let Some(outer) = stable else {
        out.class = Phase::Fp;
        return Ok(out);
    };
    out.cycles.push(outer);
    match find_unstable_cycle_with(p, Some(outer.section_point), &CycleSearch::default()) {
        Ok(Some(inner)) => {
            out.cycles.push(inner);
            out.class = Phase::CoexistFpLc;
        }
        Ok(None) => {
            out.note = Some("stable cycle without an inner unstable cycle".into());
        }
        Err(BifurcationError::Indeterminate { .. }) => {
            out.class = Phase::CoexistFpLc;
            out.note = Some("inner cycle search indeterminate".into());
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Inclusive grid `start, start + step, …` up to `end` (with a small slack).
pub fn grid(start: f64, step: f64, end: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return vec![start];
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub h: f64,
    pub beta: f64,
    pub phase: PhaseClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaStarSample {
    pub h: f64,
    pub bracket: Option<BetaStar>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    /// Row-major in `h`, then `β`.
    pub points: Vec<ScanPoint>,
    pub beta_c: Vec<(f64, f64)>,
    pub beta_star: Vec<BetaStarSample>,
}

/// Classifies every grid point in parallel. Per-point failures are recorded
/// as indeterminate; the scan never aborts.
pub fn scan_phase_diagram(h_grid: &[f64], beta_grid: &[f64], tol: f64) -> PhaseScan {
    let beta_star: Vec<BetaStarSample> = h_grid
        .par_iter()
        .filter(|&&h| h > H_TC)
        .map(|&h| match beta_star(h, BETA_STAR_TOL) {
            Ok(b) => BetaStarSample {
                h,
                bracket: Some(b),
                error: None,
            },
            Err(e) => BetaStarSample {
                h,
                bracket: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let star_for = |h: f64| {
        beta_star
            .iter()
            .find(|s| s.h == h)
            .and_then(|s| s.bracket.as_ref())
    };
    let tasks: Vec<(f64, f64)> = h_grid
        .iter()
        .flat_map(|&h| beta_grid.iter().map(move |&b| (h, b)))
        .collect();
    let points = tasks
        .par_iter()
        .map(|&(h, beta)| {
            let p = ModelParams { beta, h };
            let phase = classify_with(&p, tol, star_for(h)).unwrap_or_else(|e| PhaseClass {
                class: Phase::Indeterminate,
                beta_c: beta_c(h),
                beta_star: star_for(h).map(BetaStar::midpoint),
                cycles: Vec::new(),
                note: Some(e.to_string()),
            });
            ScanPoint { h, beta, phase }
        })
        .collect();
    PhaseScan {
        points,
        beta_c: h_grid.iter().map(|&h| (h, beta_c(h))).collect(),
        beta_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(beta, h).unwrap()
    }

    #[test]
    fn no_cycle_below_threshold_at_zero_field() {
        assert!(find_stable_cycle(&params(1.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn stable_cycle_returns_to_start() {
        let p = params(2.0, 0.0);
        let c = find_stable_cycle(&p).unwrap().expect("cycle");
        assert_eq!(c.stability, CycleStability::Stable);
        assert!(c.multiplier.abs() < 1.0);
        let sol = integrate_dense(&p, c.start(), c.period, &IntegratorConfig::default()).unwrap();
        let end = sol.at(c.period);
        assert!((end.y - c.section_point).abs() < 1e-6 && end.lambda.abs() < 1e-6);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(0.0, 0.05, 1.2);
        assert_eq!(g.len(), 25);
        assert!((g[24] - 1.2).abs() < 1e-12);
        assert_eq!(grid(0.5, 0.05, 4.95).len(), 90);
    }

    #[test]
    fn unstable_search_requires_stable_origin() {
        let err =
            find_unstable_cycle_with(&params(4.0, 1.0), None, &CycleSearch::default()).unwrap_err();
        assert!(matches!(err, BifurcationError::Precondition(_)));
    }
}
