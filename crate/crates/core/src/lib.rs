//! Numerical toolkit for the beating nonlinear Schrödinger equation on the
//! torus with two-mode initial data `u(0,x) = eps (alpha e^{ix} + beta e^{-ix})`.
//!
//! The crate has four computational layers plus a CLI harness:
//!
//! * [`curve`] — branch analysis of the implicit amplitude equation
//!   `lambda = y h(2 tau y^2)` with `h(xi) = |cos xi| + |sin xi|`: branch
//!   enumeration, birth and fold times, the minimal solution, the decay-rate
//!   function, and a fixed-point refinement of near-fold branch positions.
//! * [`dynamics`] — the closed-form flow of the effective two-mode
//!   Hamiltonian system, a Runge-Kutta integrator used as a cross-check, and
//!   the explicit sup-norm formulas.
//! * [`pde`] — a Strang split-step pseudospectral integrator for the full
//!   equation `i u_t + u_xx = 2 cos(2x) |u|^2 u`, with conserved-quantity
//!   tracking and a direct comparison against the two-mode approximation.
//! * [`tail`] — Gaussian tail probabilities of the sup-norm: exact l1/l2
//!   formulas, the threshold region in the amplitude plane, a log-domain
//!   tensor quadrature, an importance-sampled Monte Carlo estimator, and
//!   scaled sweeps over the amplitude parameter `eps`.
//!
//! All operations are pure functions of their inputs; randomized estimators
//! are deterministic given a seed and worker count.

pub mod cli;
pub mod curve;
pub mod dynamics;
pub mod fixtures;
pub mod pde;
pub mod tail;
pub mod verify;

/// Errors shared across the computational modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bisection bracket has no sign change on [{lo}, {hi}] (implementation defect)")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("fixed-point iteration did not converge after {iterations} steps (j = {j} is below the contraction regime)")]
    MuNonConvergence { j: u32, iterations: u32 },
    #[error("fewer than {needed} branches exist at tau = {tau} (found {found})")]
    MissingBranches { tau: f64, needed: usize, found: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("discretization instability: {0}")]
    Instability(String),
    #[error("quadrature failed to bracket the dominant cell: {0}")]
    QuadratureBracket(String),
    #[error("Monte Carlo estimate undefined: {0}")]
    DegenerateEstimate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
