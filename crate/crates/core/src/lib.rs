//! Simulation and bifurcation analysis of the dissipative Curie–Weiss model
//! with a quenched, symmetric ±1 random field.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: parameters, state types, vector fields and flip rates.
//! * [`microsim`]: exact finite-N stochastic dynamics (thinning).
//! * [`ode`] / [`odeflow`]: adaptive Dormand–Prince integration of the
//!   limit systems, Poincaré sections and the Lyapunov-function monitor.
//! * [`stability`]: local analysis at the origin: spectrum, Lyapunov
//!   coefficients and the study of the zeros of `g`.
//! * [`bifurcation`]: limit cycles, the saddle-node locus and phase
//!   classification.
//! * [`output`]: CSV writers shared by the command-line front end.

pub mod bifurcation;
pub mod microsim;
pub mod model;
pub mod ode;
pub mod odeflow;
pub mod output;
pub mod seeds;
pub mod stability;

pub use model::{
    g_lienard, lienard_field, pair_rate, vector_field_3d, vector_field_planar, LienardState,
    ModelParams, OrderState, PlanarState, Spin, Trajectory, BETA_TC, H_TC,
};
