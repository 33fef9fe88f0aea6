//! Model parameters, state types and the closed-form fields shared by every
//! other module.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Field intensity at the tricritical point, `½ ln(2 + √3)`.
pub const H_TC: f64 = 0.658_478_948_462_408_4;
/// Inverse temperature at the tricritical point.
pub const BETA_TC: f64 = 2.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: beta = {beta}, h = {h} (need beta > 0, h >= 0)")]
    InvalidParams { beta: f64, h: f64 },
    #[error("pair count for (sigma = {j}, eta = {k}) is {count}, not a nonnegative integer")]
    InconsistentCounts { j: i8, k: i8, count: f64 },
    #[error("disorder must have at least one site")]
    EmptyDisorder,
}

/// Inverse temperature `beta` and field intensity `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(beta: f64, h: f64) -> Result<Self, ModelError> {
        if !(beta > 0.0 && beta.is_finite() && h >= 0.0 && h.is_finite()) {
            return Err(ModelError::InvalidParams { beta, h });
        }
        Ok(Self { beta, h })
    }

    /// Same as [`ModelParams::new`] but also accepts `beta = 0`, the
    /// degenerate linear Liénard system used as a closed-form check.
    pub fn degenerate(beta: f64, h: f64) -> Result<Self, ModelError> {
        if beta == 0.0 && h >= 0.0 && h.is_finite() {
            return Ok(Self { beta, h });
        }
        Self::new(beta, h)
    }

    /// Hopf threshold `(3/2) cosh²h`.
    pub fn beta_c(&self) -> f64 {
        beta_c(self.h)
    }

    /// `true` when the origin is linearly stable.
    pub fn origin_stable(&self) -> bool {
        self.beta < self.beta_c()
    }
}

/// Hopf curve `β_c(h) = (3/2) cosh² h`.
pub fn beta_c(h: f64) -> f64 {
    1.5 * h.cosh().powi(2)
}

/// A ±1 spin or field value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn from_sign(v: i8) -> Option<Self> {
        match v {
            1 => Some(Spin::Up),
            -1 => Some(Spin::Down),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn flipped(self) -> Self {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Index of the `(σ = j, η = k)` sub-population, in the fixed order
/// `(+,+), (+,−), (−,+), (−,−)`.
pub fn category_index(j: Spin, k: Spin) -> usize {
    2 * usize::from(j == Spin::Down) + usize::from(k == Spin::Down)
}

/// Inverse of [`category_index`].
pub fn category_of(index: usize) -> (Spin, Spin) {
    let j = if index < 2 { Spin::Up } else { Spin::Down };
    let k = if index.is_multiple_of(2) { Spin::Up } else { Spin::Down };
    (j, k)
}

/// Quenched field realization `η ∈ {−1,+1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disorder {
    eta: Vec<Spin>,
    seed: u64,
}

impl Disorder {
    /// Draws `n` i.i.d. symmetric signs from a ChaCha8 stream keyed by `seed`.
    pub fn sample(n: usize, seed: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyDisorder);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = (0..n)
            .map(|_| {
                if rng.gen::<bool>() {
                    Spin::Up
                } else {
                    Spin::Down
                }
            })
            .collect();
        Ok(Self { eta, seed })
    }

    /// Wraps an explicit realization (used by tests and replayed runs).
    pub fn from_signs(eta: Vec<Spin>, seed: u64) -> Result<Self, ModelError> {
        if eta.is_empty() {
            return Err(ModelError::EmptyDisorder);
        }
        Ok(Self { eta, seed })
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn eta(&self) -> &[Spin] {
        &self.eta
    }

    /// Number of sites with `η = +1`.
    pub fn n_plus(&self) -> usize {
        self.eta.iter().filter(|&&e| e == Spin::Up).count()
    }

    /// Empirical mean `η̄_N`.
    pub fn mean(&self) -> f64 {
        let plus = self.n_plus() as f64;
        (2.0 * plus - self.n() as f64) / self.n() as f64
    }
}

/// Full microscopic configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub sigma: Vec<Spin>,
    pub lambda: f64,
    pub t: f64,
}

impl MicroState {
    pub fn order(&self, eta: &Disorder) -> OrderState {
        let n = self.sigma.len() as f64;
        let (mut m, mut me) = (0i64, 0i64);
        for (s, e) in self.sigma.iter().zip(eta.eta()) {
            m += i64::from(s.sign());
            me += i64::from(s.sign() * e.sign());
        }
        OrderState {
            m_sigma: m as f64 / n,
            m_sigma_eta: me as f64 / n,
            lambda: self.lambda,
        }
    }
}

/// Order parameter `(m^σ, m^{ση}, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderState {
    pub m_sigma: f64,
    pub m_sigma_eta: f64,
    pub lambda: f64,
}

impl OrderState {
    pub fn new(m_sigma: f64, m_sigma_eta: f64, lambda: f64) -> Self {
        Self {
            m_sigma,
            m_sigma_eta,
            lambda,
        }
    }

    pub fn planar(&self) -> PlanarState {
        PlanarState {
            m_sigma: self.m_sigma,
            lambda: self.lambda,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.m_sigma, self.m_sigma_eta, self.lambda]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn distance(&self, other: &OrderState) -> f64 {
        let d = [
            self.m_sigma - other.m_sigma,
            self.m_sigma_eta - other.m_sigma_eta,
            self.lambda - other.lambda,
        ];
        d.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Reduced planar state `(m^σ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    pub m_sigma: f64,
    pub lambda: f64,
}

impl PlanarState {
    /// Liénard coordinates `y = 2(λ − β m^σ)`.
    pub fn to_lienard(self, beta: f64) -> LienardState {
        LienardState {
            y: 2.0 * (self.lambda - beta * self.m_sigma),
            lambda: self.lambda,
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.m_sigma, self.lambda]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self {
            m_sigma: a[0],
            lambda: a[1],
        }
    }
}

/// Liénard state `(y, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LienardState {
    pub y: f64,
    pub lambda: f64,
}

impl LienardState {
    /// Inverse of [`PlanarState::to_lienard`]; requires `beta != 0`.
    pub fn to_planar(self, beta: f64) -> PlanarState {
        PlanarState {
            m_sigma: (self.lambda - 0.5 * self.y) / beta,
            lambda: self.lambda,
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.y, self.lambda]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self {
            y: a[0],
            lambda: a[1],
        }
    }

    pub fn norm(&self) -> f64 {
        self.y.hypot(self.lambda)
    }
}

#[inline]
fn tanh_pair(lambda: f64, h: f64) -> (f64, f64) {
    ((lambda + h).tanh(), (lambda - h).tanh())
}

/// Right-hand side of the three-dimensional limit system.
pub fn vector_field_3d(s: &OrderState, p: &ModelParams) -> OrderState {
    let (tp, tm) = tanh_pair(s.lambda, p.h);
    let dm = -2.0 * s.m_sigma + tp + tm;
    OrderState {
        m_sigma: dm,
        m_sigma_eta: -2.0 * s.m_sigma_eta + tp - tm,
        lambda: -s.lambda + p.beta * dm,
    }
}

/// Right-hand side of the planar `(m^σ, λ)` subsystem.
pub fn vector_field_planar(s: &PlanarState, p: &ModelParams) -> PlanarState {
    let (tp, tm) = tanh_pair(s.lambda, p.h);
    let dm = -2.0 * s.m_sigma + tp + tm;
    PlanarState {
        m_sigma: dm,
        lambda: -s.lambda + p.beta * dm,
    }
}

/// `g_{β,h}(λ) = 3λ − β[tanh(λ+h) + tanh(λ−h)]`.
pub fn g_lienard(lambda: f64, p: &ModelParams) -> f64 {
    let (tp, tm) = tanh_pair(lambda, p.h);
    3.0 * lambda - p.beta * (tp + tm)
}

/// Liénard drift `(ẏ, λ̇) = (−2λ, y − g(λ))`.
pub fn lienard_field(s: &LienardState, p: &ModelParams) -> LienardState {
    LienardState {
        y: -2.0 * s.lambda,
        lambda: s.y - g_lienard(s.lambda, p),
    }
}

/// Size of the `(σ = j, η = k)` sub-population implied by an order state,
/// `(N/4)(1 + kη̄ + j m^σ + jk m^{ση})`, rounded to the nearest integer.
pub fn pair_count(
    j: Spin,
    k: Spin,
    s: &OrderState,
    eta_bar: f64,
    n: usize,
) -> Result<u64, ModelError> {
    let (jv, kv) = (j.value(), k.value());
    let raw = n as f64 / 4.0 * (1.0 + kv * eta_bar + jv * s.m_sigma + jv * kv * s.m_sigma_eta);
    let rounded = raw.round();
    let tol = 1e-9 * n as f64;
    if !raw.is_finite() || rounded < 0.0 || (raw - rounded).abs() > tol.max(1e-12) {
        return Err(ModelError::InconsistentCounts {
            j: j.sign(),
            k: k.sign(),
            count: raw,
        });
    }
    Ok(rounded as u64)
}

/// All four pair counts in [`category_index`] order.
pub fn pair_counts(s: &OrderState, eta_bar: f64, n: usize) -> Result<[u64; 4], ModelError> {
    let mut out = [0u64; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let (j, k) = category_of(i);
        *slot = pair_count(j, k, s, eta_bar, n)?;
    }
    Ok(out)
}

/// Per-spin flip rate `1 − σ tanh(λ + hη)`, always in `[0, 2]`.
#[inline]
pub fn flip_rate(sigma: Spin, eta: Spin, lambda: f64, h: f64) -> f64 {
    1.0 - sigma.value() * (lambda + h * eta.value()).tanh()
}

/// Aggregate flip rate `C_N(j,k)` of the `(σ = j, η = k)` sub-population.
pub fn pair_rate(
    j: Spin,
    k: Spin,
    s: &OrderState,
    eta_bar: f64,
    p: &ModelParams,
    n: usize,
) -> Result<f64, ModelError> {
    let count = pair_count(j, k, s, eta_bar, n)?;
    Ok(count as f64 * flip_rate(j, k, s.lambda, p.h))
}

/// Row type that can be written as a trajectory CSV line.
pub trait StateRow: Copy {
    const HEADER: &'static [&'static str];
    fn values(&self) -> Vec<f64>;
}

impl StateRow for OrderState {
    const HEADER: &'static [&'static str] = &["m_sigma", "m_sigma_eta", "lambda"];
    fn values(&self) -> Vec<f64> {
        vec![self.m_sigma, self.m_sigma_eta, self.lambda]
    }
}

impl StateRow for PlanarState {
    const HEADER: &'static [&'static str] = &["m_sigma", "lambda"];
    fn values(&self) -> Vec<f64> {
        vec![self.m_sigma, self.lambda]
    }
}

impl StateRow for LienardState {
    const HEADER: &'static [&'static str] = &["y", "lambda"];
    fn values(&self) -> Vec<f64> {
        vec![self.y, self.lambda]
    }
}

/// Time-stamped sequence of states. `n == 0` marks the deterministic limit.
///
/// For backward-time integrations `times` holds the elapsed reversed time,
/// i.e. `states[i]` is the state at physical time `-times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S = OrderState> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub params: ModelParams,
    pub n: usize,
}

impl<S: Copy> Trajectory<S> {
    pub fn new(params: ModelParams, n: usize) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            params,
            n,
        }
    }

    pub fn push(&mut self, t: f64, s: S) {
        self.times.push(t);
        self.states.push(s);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, S)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.times.iter().copied().zip(self.states.iter())
    }

    pub fn map<T: Copy>(&self, f: impl Fn(&S) -> T) -> Trajectory<T> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
            params: self.params,
            n: self.n,
        }
    }
}
