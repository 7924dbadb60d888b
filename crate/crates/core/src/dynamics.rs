//! Closed-form effective dynamics of the two resonant modes.
//!
//! The reduced Hamiltonian `G = J1 + 2 K1 J1` with
//! `J1 = |u1|^2 + |u_-1|^2` and `K1 = 2 Re(u1 conj(u_-1))` generates
//!
//! ```text
//!     d/dt u1   = -i (1 + 2 K1) u1   - 2 i J1 u_-1,
//!     d/dt u_-1 = -i (1 + 2 K1) u_-1 - 2 i J1 u1.
//! ```
//!
//! `J1` and `K1` commute with `G`, so along a trajectory the system is linear
//! with constant coefficients and integrates in closed form: a common phase
//! `exp(-i t (1 + 2 K1))` times a rotation mixing the two modes at angular
//! rate `2 J1`. [`closed_form_state`] evaluates that flow exactly;
//! [`integrate_reduced`] is a classical 4th-order check against it.

use num_complex::Complex64;

use crate::{Error, Result};

/// Initial amplitudes: `u1(0) = eps * alpha`, `u_-1(0) = eps * beta`.
#[derive(Debug, Clone, Copy)]
pub struct InitialData {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub eps: f64,
}

impl InitialData {
    pub fn new(alpha: Complex64, beta: Complex64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::NonFinite("alpha/beta must be finite".into()));
        }
        Ok(InitialData { alpha, beta, eps })
    }

    /// Beating phase `Theta(t) = 2 eps^2 t (|alpha|^2 + |beta|^2)`.
    pub fn theta(&self, t: f64) -> f64 {
        2.0 * self.eps * self.eps * t * (self.alpha.norm_sqr() + self.beta.norm_sqr())
    }

    /// Time at which the beating phase reaches `theta`.
    pub fn time_for_theta(&self, theta: f64) -> f64 {
        theta / (2.0 * self.eps * self.eps * (self.alpha.norm_sqr() + self.beta.norm_sqr()))
    }
}

/// Amplitudes of the two resonant modes at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedState {
    pub u1: Complex64,
    pub u_minus1: Complex64,
    pub t: f64,
}

/// Conserved quantities of the reduced flow.
#[derive(Debug, Clone, Copy)]
pub struct ConservedSet {
    /// `|u1|^2 + |u_-1|^2`.
    pub j1: f64,
    /// `2 Re(u1 conj(u_-1))`; satisfies `|k1| <= j1`.
    pub k1: f64,
    /// Reduced Hamiltonian `j1 + 2 k1 j1`.
    pub g: f64,
    /// Mass of the two-mode field, equal to `j1`.
    pub m: f64,
}

pub fn conserved_set(state: &ReducedState) -> ConservedSet {
    let j1 = state.u1.norm_sqr() + state.u_minus1.norm_sqr();
    let k1 = 2.0 * (state.u1 * state.u_minus1.conj()).re;
    ConservedSet { j1, k1, g: j1 + 2.0 * k1 * j1, m: j1 }
}

/// Reduced Hamiltonian `G = J1 + 2 K1 J1`.
pub fn reduced_hamiltonian_g(state: &ReducedState) -> f64 {
    conserved_set(state).g
}

/// Exact flow of the reduced system.
pub fn closed_form_state(data: &InitialData, t: f64) -> ReducedState {
    let eps = data.eps;
    let theta = data.theta(t);
    let k1_rate = 4.0 * eps * eps * (data.alpha * data.beta.conj()).re;
    let phase = Complex64::from_polar(1.0, -t - k1_rate * t);
    let (c, s) = (theta.cos(), theta.sin());
    let i = Complex64::I;
    ReducedState {
        u1: eps * phase * (data.alpha * c - i * data.beta * s),
        u_minus1: eps * phase * (data.beta * c - i * data.alpha * s),
        t,
    }
}

/// Which sup-norm expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupMode {
    /// `eps [ sqrt(|a|^2 cos^2 + |b|^2 sin^2) + sqrt(|b|^2 cos^2 + |a|^2 sin^2) ]`,
    /// which drops the `Im(alpha conj(beta))` cross term.
    Paper,
    /// `|u1(t)| + |u_-1(t)|` from the closed-form state: the exact sup over
    /// `x` of the two-mode field.
    Exact,
}

/// Sup-norm of the two-mode field at time `t`.
///
/// The two modes agree whenever `Im(alpha conj(beta)) = 0` or
/// `sin(2 Theta) = 0` and differ otherwise; the difference is the dropped
/// cross term `-+ sin(2 Theta) Im(alpha conj(beta))` under each square root.
pub fn sup_norm_effective(data: &InitialData, t: f64, mode: SupMode) -> f64 {
    match mode {
        SupMode::Exact => {
            let st = closed_form_state(data, t);
            st.u1.norm() + st.u_minus1.norm()
        }
        SupMode::Paper => {
            let theta = data.theta(t);
            let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
            let (a2, b2) = (data.alpha.norm_sqr(), data.beta.norm_sqr());
            data.eps * ((a2 * c2 + b2 * s2).sqrt() + (b2 * c2 + a2 * s2).sqrt())
        }
    }
}

fn rhs(u1: Complex64, um1: Complex64) -> (Complex64, Complex64) {
    let j1 = u1.norm_sqr() + um1.norm_sqr();
    let k1 = 2.0 * (u1 * um1.conj()).re;
    let i = Complex64::I;
    let rot = -i * (1.0 + 2.0 * k1);
    (rot * u1 - 2.0 * i * j1 * um1, rot * um1 - 2.0 * i * j1 * u1)
}

fn rk4_step(u1: Complex64, um1: Complex64, dt: f64) -> (Complex64, Complex64) {
    let (k1a, k1b) = rhs(u1, um1);
    let (k2a, k2b) = rhs(u1 + 0.5 * dt * k1a, um1 + 0.5 * dt * k1b);
    let (k3a, k3b) = rhs(u1 + 0.5 * dt * k2a, um1 + 0.5 * dt * k2b);
    let (k4a, k4b) = rhs(u1 + dt * k3a, um1 + dt * k3b);
    (
        u1 + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        um1 + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    )
}

fn validate_step(data: &InitialData, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let scale = 1.0 + data.eps * data.eps * (data.alpha.norm_sqr() + data.beta.norm_sqr());
    if dt * scale > 0.1 {
        return Err(Error::InvalidInput(format!(
            "dt too large for stability: dt * (1 + eps^2 (|a|^2+|b|^2)) = {} > 0.1",
            dt * scale
        )));
    }
    Ok(0)
}

/// 4th-order integration of the reduced system, sampled every `dt`.
pub fn integrate_reduced(data: &InitialData, t_end: f64, dt: f64) -> Result<Vec<ReducedState>> {
    validate_step(data, dt)?;
    let steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut u1, mut um1) = (data.eps * data.alpha, data.eps * data.beta);
    out.push(ReducedState { u1, u_minus1: um1, t: 0.0 });
    for s in 1..=steps {
        (u1, um1) = rk4_step(u1, um1, dt);
        if !u1.is_finite() || !um1.is_finite() {
            return Err(Error::NonFinite(format!("state blew up at step {s}")));
        }
        out.push(ReducedState { u1, u_minus1: um1, t: s as f64 * dt });
    }
    Ok(out)
}

/// Terminal state only; avoids storing long trajectories.
pub fn integrate_terminal(data: &InitialData, t_end: f64, dt: f64) -> Result<ReducedState> {
    validate_step(data, dt)?;
    let steps = (t_end / dt).round() as usize;
    let (mut u1, mut um1) = (data.eps * data.alpha, data.eps * data.beta);
    for s in 1..=steps {
        (u1, um1) = rk4_step(u1, um1, dt);
        if !u1.is_finite() || !um1.is_finite() {
            return Err(Error::NonFinite(format!("state blew up at step {s}")));
        }
    }
    Ok(ReducedState { u1, u_minus1: um1, t: steps as f64 * dt })
}

/// Scaled log-probability window in the transient regime: the pair
/// `(-z0^2 / (2 sigma_a2), -rate^2 / sigma_a2)` with `rate` the decay-rate
/// function at `(z0, tau)`. The two coincide as `tau -> infinity`.
pub fn transient_rate_bounds(z0: f64, tau: f64, sigma_a2: f64) -> Result<(f64, f64)> {
    if !(sigma_a2 > 0.0) {
        return Err(Error::InvalidInput(format!("sigma_a2 must be positive, got {sigma_a2}")));
    }
    let (rate, _) = crate::curve::rate_j(z0, tau)?;
    Ok((-z0 * z0 / (2.0 * sigma_a2), -rate * rate / sigma_a2))
}
