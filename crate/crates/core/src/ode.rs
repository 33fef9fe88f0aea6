//! Adaptive Dormand–Prince 5(4) stepper with dense output and event
//! localization, for small autonomous systems `ẏ = f(y)` on `[f64; D]`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
            max_step: 0.5,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), OdeError> {
        let ok = |x: f64| x > 0.0 && x <= 1e-2;
        if !ok(self.rel) || !ok(self.abs) {
            return Err(OdeError::InvalidConfig(format!(
                "tolerances must lie in (0, 1e-2], got rel = {}, abs = {}",
                self.rel, self.abs
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(OdeError::InvalidConfig(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        Ok(())
    }
}

// Butcher tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer & Wanner's contd5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])], h: f64) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One accepted step with its quartic interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    rcont: [[f64; D]; 4],
}

impl<const D: usize> DenseStep<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at time `t ∈ [t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut out = [0.0; D];
        for (i, o) in out.iter_mut().enumerate() {
            let [r2, r3, r4, r5] = [
                self.rcont[0][i],
                self.rcont[1][i],
                self.rcont[2][i],
                self.rcont[3][i],
            ];
            *o = self.y0[i] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        out
    }

    /// Time derivative of the interpolant at `t`.
    pub fn eval_derivative(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut out = [0.0; D];
        for (i, o) in out.iter_mut().enumerate() {
            let [r2, r3, r4, r5] = [
                self.rcont[0][i],
                self.rcont[1][i],
                self.rcont[2][i],
                self.rcont[3][i],
            ];
            let a = r4 + theta1 * r5;
            let b = r3 + theta * a;
            let c = r2 + theta1 * b;
            let db = a - theta * r5;
            let dc = -b + theta1 * db;
            *o = (c + theta * dc) / self.h;
        }
        out
    }
}

/// Which sign change of an event function counts as a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, before: f64, after: f64) -> bool {
        match self {
            Crossing::Rising => before < 0.0 && after >= 0.0,
            Crossing::Falling => before > 0.0 && after <= 0.0,
            Crossing::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

impl<const D: usize> DenseStep<D> {
    /// Locates a root of `event` inside this step by bisection on the
    /// interpolant followed by Newton polishing. Returns `None` when the
    /// endpoint values do not show the requested sign change.
    pub fn locate<E>(&self, event: &E, crossing: Crossing, tol: f64) -> Option<(f64, [f64; D])>
    where
        E: Fn(&[f64; D], &[f64; D]) -> f64,
    {
        let value = |t: f64| {
            let y = self.eval(t);
            let dy = self.eval_derivative(t);
            event(&y, &dy)
        };
        let e0 = value(self.t0);
        let e1 = value(self.t1());
        if !crossing.matches(e0, e1) {
            return None;
        }
        if e1 == 0.0 {
            return Some((self.t1(), self.eval(self.t1())));
        }
        let (mut lo, mut hi) = (self.t0, self.t1());
        let mut elo = e0;
        // coarse bracketing
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            let em = value(mid);
            if (em < 0.0) == (elo < 0.0) && em != 0.0 {
                lo = mid;
                elo = em;
            } else {
                hi = mid;
            }
        }
        // Newton polish inside the bracket
        let mut t = 0.5 * (lo + hi);
        for _ in 0..60 {
            let e = value(t);
            if e.abs() < tol {
                return Some((t, self.eval(t)));
            }
            if (e < 0.0) == (elo < 0.0) {
                lo = t;
                elo = e;
            } else {
                hi = t;
            }
            let dt = (hi - lo).max(f64::EPSILON * self.h.abs()) * 1e-3;
            let de = (value(t + dt) - value(t - dt)) / (2.0 * dt);
            let newton = t - e / de;
            t = if de.is_finite() && de != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        Some((t, self.eval(t)))
    }
}

/// Stateful stepper; integrates forward in its own time variable.
pub struct Dopri5<F, const D: usize> {
    f: F,
    tol: Tolerances,
    t: f64,
    y: [f64; D],
    k1: [f64; D],
    h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<F, const D: usize> Dopri5<F, D>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    pub fn new(f: F, t0: f64, y0: [f64; D], tol: Tolerances) -> Result<Self, OdeError> {
        tol.validate()?;
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t: t0 });
        }
        let k1 = f(&y0);
        let mut s = Self {
            f,
            tol,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            accepted: 0,
            rejected: 0,
        };
        s.h = s.initial_step();
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; D] {
        &self.y
    }

    fn scale(&self, a: &[f64; D], b: &[f64; D], i: usize) -> f64 {
        self.tol.abs + self.tol.rel * a[i].abs().max(b[i].abs())
    }

    fn norm(&self, v: &[f64; D], sc_a: &[f64; D], sc_b: &[f64; D]) -> f64 {
        let s: f64 = (0..D)
            .map(|i| (v[i] / self.scale(sc_a, sc_b, i)).powi(2))
            .sum();
        (s / D as f64).sqrt()
    }

    fn initial_step(&self) -> f64 {
        let d0 = self.norm(&self.y, &self.y, &self.y);
        let d1 = self.norm(&self.k1, &self.y, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let y1 = axpy(&self.y, &[(1.0, &self.k1)], h0);
        let f1 = (self.f)(&y1);
        let mut diff = [0.0; D];
        for i in 0..D {
            diff[i] = f1[i] - self.k1[i];
        }
        let d2 = self.norm(&diff, &self.y, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.tol.max_step)
    }

    /// Advances by one accepted step, never past `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<DenseStep<D>, OdeError> {
        let f = &self.f;
        loop {
            let remaining = t_stop - self.t;
            let mut h = self.h.min(self.tol.max_step);
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) && !clipped {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }
            let y = &self.y;
            let k1 = &self.k1;
            let k2 = f(&axpy(y, &[(A21, k1)], h));
            let k3 = f(&axpy(y, &[(A31, k1), (A32, &k2)], h));
            let k4 = f(&axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
            let k5 = f(&axpy(
                y,
                &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
                h,
            ));
            let k6 = f(&axpy(
                y,
                &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ));
            let y1 = axpy(
                y,
                &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
                h,
            );
            let k7 = f(&y1);
            let mut err = [0.0; D];
            for i in 0..D {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let en = self.norm(&err, y, &y1);
            if !en.is_finite() || y1.iter().any(|v| !v.is_finite()) {
                if h <= 1e-14 * self.t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t: self.t });
                }
                self.h = 0.1 * h;
                self.rejected += 1;
                continue;
            }
            if en <= 1.0 {
                let fac = if en == 0.0 {
                    5.0
                } else {
                    (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                };
                let mut rcont = [[0.0; D]; 4];
                for i in 0..D {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rcont[0][i] = dy;
                    rcont[1][i] = bspl;
                    rcont[2][i] = dy - h * k7[i] - bspl;
                    rcont[3][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let step = DenseStep {
                    t0: self.t,
                    h,
                    y0: *y,
                    y1,
                    rcont,
                };
                self.t = if clipped { t_stop } else { self.t + h };
                self.y = y1;
                self.k1 = k7;
                if !clipped {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac.min(1.0));
                }
                self.accepted += 1;
                return Ok(step);
            }
            self.rejected += 1;
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            self.h = h * fac;
            if self.h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow {
                    t: self.t,
                    h: self.h,
                });
            }
        }
    }
}

/// Continuous solution on `[t_start, t_end]` assembled from accepted steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution<const D: usize> {
    pub steps: Vec<DenseStep<D>>,
    pub y0: [f64; D],
    pub t0: f64,
}

impl<const D: usize> DenseSolution<D> {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(self.t0, |s| s.t1())
    }

    /// State at `t`, clamped to the covered interval.
    pub fn eval(&self, t: f64) -> [f64; D] {
        if self.steps.is_empty() || t <= self.t0 {
            return self.y0;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        match self.steps.get(idx) {
            Some(s) => s.eval(t),
            None => self.steps.last().map(|s| s.y1).unwrap_or(self.y0),
        }
    }

    /// Node times and states at the step boundaries, starting with `t0`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, [f64; D])> + '_ {
        std::iter::once((self.t0, self.y0)).chain(self.steps.iter().map(|s| (s.t1(), s.y1)))
    }
}

/// Integrates `ẏ = f(y)` from `(t0, y0)` to `t_end`.
pub fn solve<F, const D: usize>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    tol: Tolerances,
) -> Result<DenseSolution<D>, OdeError>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    if !(t_end > t0) {
        return Err(OdeError::InvalidConfig(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    let mut stepper = Dopri5::new(f, t0, y0, tol)?;
    let mut steps = Vec::new();
    while stepper.t() < t_end {
        steps.push(stepper.step(t_end)?);
    }
    Ok(DenseSolution { steps, y0, t0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let sol = solve(harmonic, 0.0, [1.0, 0.0], 20.0, Tolerances::default()).unwrap();
        let y = sol.eval(20.0);
        assert!((y[0] - 20f64.cos()).abs() < 1e-8, "{}", y[0]);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_accurate_between_nodes() {
        let sol = solve(harmonic, 0.0, [1.0, 0.0], 10.0, Tolerances::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            let y = sol.eval(t);
            worst = worst
                .max((y[0] - t.cos()).abs())
                .max((y[1] + t.sin()).abs());
        }
        assert!(worst < 1e-8, "worst = {worst}");
    }

    #[test]
    fn dense_derivative_matches_field() {
        let sol = solve(harmonic, 0.0, [1.0, 0.0], 3.0, Tolerances::default()).unwrap();
        let s = &sol.steps[sol.steps.len() / 2];
        let t = s.t0 + 0.37 * s.h;
        let d = s.eval_derivative(t);
        let f = harmonic(&s.eval(t));
        assert!((d[0] - f[0]).abs() < 1e-7 && (d[1] - f[1]).abs() < 1e-7);
    }

    #[test]
    fn event_location_on_cosine() {
        // y0 = cos t crosses zero downward at π/2.
        let sol = solve(harmonic, 0.0, [1.0, 0.0], 3.0, Tolerances::default()).unwrap();
        let hit = sol
            .steps
            .iter()
            .find_map(|s| s.locate(&|y: &[f64; 2], _: &[f64; 2]| y[0], Crossing::Falling, 1e-13))
            .unwrap();
        assert!(
            (hit.0 - std::f64::consts::FRAC_PI_2).abs() < 1e-9,
            "{}",
            hit.0
        );
        assert!(hit.1[0].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tolerances() {
        let tol = Tolerances {
            rel: 0.5,
            ..Tolerances::default()
        };
        assert!(solve(harmonic, 0.0, [1.0, 0.0], 1.0, tol).is_err());
        assert!(solve(harmonic, 0.0, [1.0, 0.0], -1.0, Tolerances::default()).is_err());
    }

    #[test]
    fn fixed_point_stays_put() {
        let sol = solve(harmonic, 0.0, [0.0, 0.0], 50.0, Tolerances::default()).unwrap();
        assert!(sol.nodes().all(|(_, y)| y == [0.0, 0.0]));
    }

    #[test]
    fn blow_up_is_reported() {
        // ẏ = y², y(0) = 1 blows up at t = 1.
        let r = solve(
            |y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            Tolerances::default(),
        );
        assert!(r.is_err());
    }
}
