//! Exact stochastic simulation of the finite-N process `(σ(t), λ_N(t))`.
//!
//! Between flips `λ` relaxes as `λ(t₀)e^{−(t−t₀)}`, so flip rates vary in
//! time. Jump times are generated by thinning against the constant bound
//! `2N` (each per-spin rate `1 − σ tanh(λ + hη)` lies in `[0, 2]`):
//!
//! 1. draw the proposal time `Exp(2N)` (uniform `u₁`),
//! 2. pick the sub-population `(j, k)` with probability `count(j,k)/N`
//!    (uniform `u₂`; in full-spin mode the same draw also picks the site),
//! 3. accept with probability `C_N(j,k) / (2N · count(j,k)/N)` (uniform `u₃`),
//!    with `λ` evaluated at the proposal time.
//!
//! Both modes consume exactly three uniforms per proposal in that order, so
//! driven by the same stream they produce identical jump sequences.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    category_index, category_of, flip_rate, pair_counts, Disorder, MicroState, ModelError,
    ModelParams, OrderState, Spin, Trajectory,
};
use crate::odeflow::{integrate_dense, FlowError, IntegratorConfig};
use crate::seeds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("initial configuration has {got} spins but the disorder has {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("thinning acceptance probability {0} outside [0, 1]")]
    RateBound(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    FullSpin,
    OrderParamOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
    pub record_dt: f64,
    pub mode: SimMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < 2 {
            return Err(SimError::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.record_dt > 0.0 && self.record_dt <= self.t_end) {
            return Err(SimError::Config(format!(
                "record_dt must lie in (0, t_end], got {}",
                self.record_dt
            )));
        }
        Ok(())
    }

    /// Number of grid points `k·record_dt ≤ t_end`.
    pub fn grid_len(&self) -> usize {
        (self.t_end / self.record_dt + 1e-9).floor() as usize + 1
    }
}

/// Initial condition for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum SimInit {
    /// Explicit spin configuration.
    Micro(MicroState),
    /// Order state that must be exactly realizable on the lattice of the disorder.
    Order(OrderState),
    /// Order state projected onto the nearest realizable lattice point.
    Nearest(OrderState),
}

/// Notification of an accepted flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    /// Sub-population index of the flipped spin before the flip.
    pub category: usize,
    /// Order state right after the flip.
    pub state: OrderState,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimDiagnostics {
    pub proposals: u64,
    pub jumps: u64,
    /// Largest acceptance probability used.
    pub max_acceptance: f64,
    /// Full-spin mode: largest |incremental − recomputed| order parameter.
    pub max_bookkeeping_drift: f64,
    /// Largest `U(t) − U(0) − β²t/4` with `U = ½(βm − λ)²`, over jumps and records.
    pub max_lyapunov_excess: f64,
}

struct SpinTable {
    sigma: Vec<Spin>,
    buckets: [Vec<u32>; 4],
    pos: Vec<u32>,
}

impl SpinTable {
    fn new(sigma: Vec<Spin>, eta: &[Spin]) -> Self {
        let mut buckets: [Vec<u32>; 4] = Default::default();
        let mut pos = vec![0u32; sigma.len()];
        for (i, (s, e)) in sigma.iter().zip(eta).enumerate() {
            let c = category_index(*s, *e);
            pos[i] = buckets[c].len() as u32;
            buckets[c].push(i as u32);
        }
        Self {
            sigma,
            buckets,
            pos,
        }
    }

    fn flip(&mut self, category: usize, offset: usize, eta: &[Spin]) {
        let site = self.buckets[category][offset] as usize;
        let bucket = &mut self.buckets[category];
        bucket.swap_remove(offset);
        if let Some(&moved) = bucket.get(offset) {
            self.pos[moved as usize] = offset as u32;
        }
        self.sigma[site] = self.sigma[site].flipped();
        let dest = category_index(self.sigma[site], eta[site]);
        self.pos[site] = self.buckets[dest].len() as u32;
        self.buckets[dest].push(site as u32);
    }
}

/// Sub-population counts realizing (or approximating) an order state.
fn counts_for(init: &SimInit, eta: &Disorder) -> Result<[u64; 4], SimError> {
    let n = eta.n();
    match init {
        SimInit::Micro(ms) => {
            if ms.sigma.len() != n {
                return Err(SimError::LengthMismatch {
                    expected: n,
                    got: ms.sigma.len(),
                });
            }
            let mut c = [0u64; 4];
            for (s, e) in ms.sigma.iter().zip(eta.eta()) {
                c[category_index(*s, *e)] += 1;
            }
            Ok(c)
        }
        SimInit::Order(s) => Ok(pair_counts(s, eta.mean(), n)?),
        SimInit::Nearest(s) => {
            let nf = n as f64;
            let eb = eta.mean();
            let plus = eta.n_plus() as u64;
            let minus = n as u64 - plus;
            let target =
                |j: f64, k: f64| nf / 4.0 * (1.0 + k * eb + j * s.m_sigma + j * k * s.m_sigma_eta);
            let a = (target(1.0, 1.0).round().max(0.0) as u64).min(plus);
            let b = (target(1.0, -1.0).round().max(0.0) as u64).min(minus);
            Ok([a, b, plus - a, minus - b])
        }
    }
}

/// Spin configuration with the given sub-population counts.
fn spins_for(counts: &[u64; 4], eta: &Disorder) -> Vec<Spin> {
    let mut up_left = [counts[0], counts[1]];
    eta.eta()
        .iter()
        .map(|e| {
            let slot = &mut up_left[usize::from(*e == Spin::Down)];
            if *slot > 0 {
                *slot -= 1;
                Spin::Up
            } else {
                Spin::Down
            }
        })
        .collect()
}

/// A single run of the finite-N dynamics.
pub struct Simulator<'a> {
    cfg: SimConfig,
    params: ModelParams,
    eta: &'a Disorder,
    counts: [u64; 4],
    spins: Option<SpinTable>,
    m_sigma: f64,
    m_sigma_eta: f64,
    lambda: f64,
    t: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        cfg: SimConfig,
        params: ModelParams,
        init: &SimInit,
        eta: &'a Disorder,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        if eta.n() != cfg.n {
            return Err(SimError::LengthMismatch {
                expected: cfg.n,
                got: eta.n(),
            });
        }
        let counts = counts_for(init, eta)?;
        let (lambda, t0) = match init {
            SimInit::Micro(ms) => (ms.lambda, ms.t),
            SimInit::Order(s) | SimInit::Nearest(s) => (s.lambda, 0.0),
        };
        if !lambda.is_finite() {
            return Err(SimError::Config("initial lambda must be finite".into()));
        }
        let nf = cfg.n as f64;
        let m_sigma =
            (counts[0] as f64 + counts[1] as f64 - counts[2] as f64 - counts[3] as f64) / nf;
        let m_sigma_eta =
            (counts[0] as f64 - counts[1] as f64 - counts[2] as f64 + counts[3] as f64) / nf;
        let spins = match cfg.mode {
            SimMode::OrderParamOnly => None,
            SimMode::FullSpin => {
                let sigma = match init {
                    SimInit::Micro(ms) => ms.sigma.clone(),
                    _ => spins_for(&counts, eta),
                };
                Some(SpinTable::new(sigma, eta.eta()))
            }
        };
        Ok(Self {
            cfg,
            params,
            eta,
            counts,
            spins,
            m_sigma,
            m_sigma_eta,
            lambda,
            t: t0,
        })
    }

    pub fn state(&self) -> OrderState {
        OrderState::new(self.m_sigma, self.m_sigma_eta, self.lambda)
    }

    pub fn counts(&self) -> [u64; 4] {
        self.counts
    }

    /// Current spins (full-spin mode only).
    pub fn sigma(&self) -> Option<&[Spin]> {
        self.spins.as_ref().map(|s| s.sigma.as_slice())
    }

    fn recomputed_drift(&self) -> f64 {
        match &self.spins {
            None => 0.0,
            Some(tab) => {
                let exact = MicroState {
                    sigma: tab.sigma.clone(),
                    lambda: self.lambda,
                    t: self.t,
                }
                .order(self.eta);
                (exact.m_sigma - self.m_sigma)
                    .abs()
                    .max((exact.m_sigma_eta - self.m_sigma_eta).abs())
            }
        }
    }

    fn lyapunov(&self, m: f64, lambda: f64) -> f64 {
        let d = self.params.beta * m - lambda;
        0.5 * d * d
    }

    /// Runs to `t_end`, drawing from `rng` and reporting every accepted flip.
    pub fn run_with<F>(
        &mut self,
        rng: &mut ChaCha8Rng,
        mut observer: F,
    ) -> Result<(Trajectory, SimDiagnostics), SimError>
    where
        F: FnMut(&JumpEvent),
    {
        let n = self.cfg.n;
        let nf = n as f64;
        let total_rate = 2.0 * nf;
        let beta = self.params.beta;
        let h = self.params.h;
        let t_start = self.t;
        let t_end = t_start + self.cfg.t_end;
        let grid_len = self.cfg.grid_len();
        let mut traj = Trajectory::new(self.params, n);
        traj.times.reserve(grid_len);
        traj.states.reserve(grid_len);
        let mut diag = SimDiagnostics::default();
        let u0 = self.lyapunov(self.m_sigma, self.lambda);
        let mut next_record = 0usize;

        loop {
            let u1: f64 = rng.gen();
            let dt = -(1.0 - u1).ln() / total_rate;
            let t_prop = self.t + dt;
            // grid points before the proposal see the decayed pre-jump state
            while next_record < grid_len {
                let tr = t_start + next_record as f64 * self.cfg.record_dt;
                if tr > t_prop || tr > t_end + 1e-12 {
                    break;
                }
                let lam = self.lambda * (-(tr - self.t)).exp();
                traj.push(
                    tr - t_start,
                    OrderState::new(self.m_sigma, self.m_sigma_eta, lam),
                );
                let excess =
                    self.lyapunov(self.m_sigma, lam) - u0 - beta * beta * (tr - t_start) / 4.0;
                diag.max_lyapunov_excess = diag.max_lyapunov_excess.max(excess);
                diag.max_bookkeeping_drift =
                    diag.max_bookkeeping_drift.max(self.recomputed_drift());
                next_record += 1;
            }
            if t_prop > t_end {
                break;
            }
            self.lambda *= (-dt).exp();
            self.t = t_prop;
            diag.proposals += 1;

            let u2: f64 = rng.gen();
            let u3: f64 = rng.gen();
            let r = ((u2 * nf) as usize).min(n - 1) as u64;
            let mut cum = 0u64;
            let mut category = 3;
            for (c, &cnt) in self.counts.iter().enumerate() {
                if r < cum + cnt {
                    category = c;
                    break;
                }
                cum += cnt;
            }
            let offset = (r - cum) as usize;
            let (j, k) = category_of(category);
            let count = self.counts[category] as f64;
            let rate = count * flip_rate(j, k, self.lambda, h);
            let acceptance = rate / (total_rate * count / nf);
            if !(0.0..=1.0).contains(&acceptance) {
                return Err(SimError::RateBound(acceptance));
            }
            diag.max_acceptance = diag.max_acceptance.max(acceptance);
            if u3 >= acceptance {
                continue;
            }

            let jv = j.value();
            self.counts[category] -= 1;
            self.counts[category_index(j.flipped(), k)] += 1;
            self.m_sigma -= 2.0 * jv / nf;
            self.m_sigma_eta -= 2.0 * jv * k.value() / nf;
            self.lambda -= 2.0 * beta * jv / nf;
            if let Some(tab) = self.spins.as_mut() {
                tab.flip(category, offset, self.eta.eta());
            }
            diag.jumps += 1;
            let excess = self.lyapunov(self.m_sigma, self.lambda)
                - u0
                - beta * beta * (self.t - t_start) / 4.0;
            diag.max_lyapunov_excess = diag.max_lyapunov_excess.max(excess);
            observer(&JumpEvent {
                t: self.t - t_start,
                category,
                state: self.state(),
            });
        }
        self.t = t_end;
        Ok((traj, diag))
    }
}

/// Simulates one sample path; the dynamics stream is keyed by `cfg.seed`.
pub fn simulate(
    cfg: &SimConfig,
    p: &ModelParams,
    init: &SimInit,
    eta: &Disorder,
) -> Result<Trajectory, SimError> {
    let mut rng = seeds::rng_for(cfg.seed, &[seeds::STREAM_DYNAMICS]);
    let mut sim = Simulator::new(*cfg, *p, init, eta)?;
    Ok(sim.run_with(&mut rng, |_| {})?.0)
}

/// Deterministic i.i.d. symmetric disorder of size `n`.
pub fn sample_disorder(n: usize, seed: u64) -> Result<Disorder, SimError> {
    Ok(Disorder::sample(n, seed)?)
}

/// One row of the law-of-large-numbers report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnRow {
    pub n: usize,
    pub mean_sup_distance: f64,
    pub std_error: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnSettings {
    pub t_end: f64,
    pub record_dt: f64,
    pub seeds_per_n: usize,
    pub root_seed: u64,
    pub mode: SimMode,
}

/// Sup over the record grid of the Euclidean distance between each
/// simulated path and the limit ODE from the same initial condition.
pub fn lln_convergence_report(
    p: &ModelParams,
    init: OrderState,
    n_list: &[usize],
    settings: &LlnSettings,
) -> Result<Vec<LlnRow>, SimError> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::Config(
            "n_list must be strictly increasing".into(),
        ));
    }
    if settings.seeds_per_n < 2 {
        return Err(SimError::Config("need at least two seeds per N".into()));
    }
    let reference = integrate_dense(p, init, settings.t_end, &IntegratorConfig::default())?;
    let reference: Vec<OrderState> = {
        let k = (settings.t_end / settings.record_dt + 1e-9).floor() as usize;
        (0..=k)
            .map(|i| reference.at((i as f64 * settings.record_dt).min(settings.t_end)))
            .collect()
    };
    let tasks: Vec<(usize, usize)> = (0..n_list.len())
        .flat_map(|a| (0..settings.seeds_per_n).map(move |b| (a, b)))
        .collect();
    let distances: Vec<Result<f64, SimError>> = tasks
        .par_iter()
        .map(|&(ni, rep)| {
            let n = n_list[ni];
            let path = [ni as u64, rep as u64];
            let eta = Disorder::sample(
                n,
                seeds::derive(
                    settings.root_seed,
                    &[path[0], path[1], seeds::STREAM_DISORDER],
                ),
            )?;
            let cfg = SimConfig {
                n,
                t_end: settings.t_end,
                seed: 0,
                record_dt: settings.record_dt,
                mode: settings.mode,
            };
            let mut rng = seeds::rng_for(
                settings.root_seed,
                &[path[0], path[1], seeds::STREAM_DYNAMICS],
            );
            let mut sim = Simulator::new(cfg, *p, &SimInit::Nearest(init), &eta)?;
            let (traj, _) = sim.run_with(&mut rng, |_| {})?;
            Ok(sup_distance(&traj.states, &reference))
        })
        .collect();
    let mut rows = Vec::with_capacity(n_list.len());
    for (ni, &n) in n_list.iter().enumerate() {
        let d: Vec<f64> = distances[ni * settings.seeds_per_n..(ni + 1) * settings.seeds_per_n]
            .iter()
            .cloned()
            .collect::<Result<_, _>>()?;
        let k = d.len() as f64;
        let mean = d.iter().sum::<f64>() / k;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        rows.push(LlnRow {
            n,
            mean_sup_distance: mean,
            std_error: (var / k).sqrt(),
            replicas: d.len(),
        });
    }
    Ok(rows)
}

/// `max_i ‖a_i − b_i‖` over the common prefix.
pub fn sup_distance(a: &[OrderState], b: &[OrderState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}
