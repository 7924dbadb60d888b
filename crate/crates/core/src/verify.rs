//! Named invariant suites behind the `verify` subcommand.
//!
//! Each check re-measures one structural property at desk scale and records
//! the measured value next to its threshold, so a failed run says what broke
//! and by how much. The full set runs in well under the ten-minute budget.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::curve;
use crate::dynamics::{self, InitialData, SupMode};
use crate::fixtures;
use crate::pde;
use crate::tail::{self, RegimeSpec, TailContext, VariancePair};
use crate::Result;

/// Outcome of one named invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub pass: bool,
    /// Measured value the threshold applies to.
    pub measured: f64,
    /// Acceptance threshold (measured must not exceed it).
    pub threshold: f64,
    pub detail: String,
}

fn check(
    suite: &'static str,
    name: &'static str,
    measured: f64,
    threshold: f64,
    detail: impl Into<String>,
) -> CheckResult {
    CheckResult { suite, name, pass: measured <= threshold, measured, threshold, detail: detail.into() }
}

pub const SUITES: [&str; 4] =
    ["implicit-curve", "effective-dynamics", "spectral-pde", "tail-probability"];

/// Runs one suite by name, or all of them for `"all"`.
pub fn run(suite: &str) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    match suite {
        "all" => {
            out.extend(implicit_curve()?);
            out.extend(effective_dynamics()?);
            out.extend(spectral_pde()?);
            out.extend(tail_probability()?);
        }
        "implicit-curve" => out.extend(implicit_curve()?),
        "effective-dynamics" => out.extend(effective_dynamics()?),
        "spectral-pde" => out.extend(spectral_pde()?),
        "tail-probability" => out.extend(tail_probability()?),
        other => {
            return Err(crate::Error::InvalidInput(format!(
                "unknown suite {other:?}; expected one of {SUITES:?} or \"all\""
            )))
        }
    }
    Ok(out)
}

fn implicit_curve() -> Result<Vec<CheckResult>> {
    const S: &str = "implicit-curve";
    let mut out = Vec::new();

    // h stays in [1, sqrt(2)] with period pi/2.
    let mut worst: f64 = 0.0;
    let mut xi = -20.0;
    while xi < 20.0 {
        let v = curve::h_eval(xi);
        worst = worst.max(1.0 - v).max(v - SQRT_2);
        worst = worst.max((curve::h_eval(xi + PI / 2.0) - v).abs());
        xi += 0.0137;
    }
    out.push(check(S, "h-range-and-period", worst, 1e-10, "max excess over [1, sqrt(2)] and period defect"));

    // Fold offsets obey the sandwich for j in [j0, 2000].
    let mut violations = 0u32;
    let mut max_scaled_gap: f64 = 0.0;
    let mut order_ok = true;
    for j in fixtures::EMPIRICAL_J0..=2000 {
        let xi_f = curve::collision_xi(j)?;
        let d = xi_f - PI / 2.0 * (j as f64 - 0.5);
        if d <= 1.0 / (SQRT_2 * PI * j as f64) || d >= SQRT_2 / (PI * (j as f64 - 0.5)) {
            violations += 1;
        }
        let tau_inf = curve::collision_tau(j, 1.0)?;
        if !(curve::dip_tau(j, 1.0) < tau_inf && tau_inf < curve::dip_tau(j + 1, 1.0)) {
            order_ok = false;
        }
        max_scaled_gap = max_scaled_gap.max(j as f64 * (tau_inf - curve::dip_tau(j, 1.0)));
    }
    out.push(check(S, "fold-offset-sandwich", violations as f64, 0.0, "violations of the offset window"));
    out.push(check(S, "fold-between-dips", if order_ok { 0.0 } else { 1.0 }, 0.0, "dip < fold < next dip"));
    out.push(check(S, "fold-dip-product-bounded", max_scaled_gap, 0.25, "max of j (tau_inf - tau_dip)"));

    // Every enumerated solution solves the implicit equation inside the band.
    let mut worst_resid: f64 = 0.0;
    let mut worst_band: f64 = 0.0;
    let mut ordered = true;
    let mut tau = 0.02;
    while tau < 30.0 {
        for lambda in [0.8, 1.0, 1.9] {
            let sols = curve::enumerate_solutions(tau, lambda)?;
            for s in &sols {
                worst_resid = worst_resid
                    .max((s.y * curve::h_eval(2.0 * tau * s.y * s.y) - lambda).abs() / lambda);
                worst_band = worst_band.max(lambda / SQRT_2 - s.y).max(s.y - lambda);
            }
            ordered &= sols.windows(2).all(|w| w[0].y < w[1].y);
        }
        tau *= 1.61;
    }
    out.push(check(S, "solution-residual", worst_resid, 1e-10, "max |y h(2 tau y^2) - lambda| / lambda"));
    out.push(check(S, "solution-band", worst_band, 1e-9, "max escape from [lambda/sqrt(2), lambda]"));
    out.push(check(S, "solution-ordering", if ordered { 0.0 } else { 1.0 }, 0.0, "strictly increasing lists"));

    // Rate function endpoints.
    let (y0, _) = curve::rate_j(1.0, 1e-6)?;
    out.push(check(S, "rate-small-tau-limit", (y0 - 1.0).abs(), 1e-4, "rate at tau = 1e-6 against z0"));
    let (yinf, _) = curve::rate_j(1.0, curve::dip_tau(300, 1.0))?;
    out.push(check(S, "rate-large-tau-limit", (yinf - 1.0 / SQRT_2).abs(), 1e-6, "rate at a deep dip against z0/sqrt(2)"));

    // Fixed-point offsets against direct bisection.
    let mut worst_mu: f64 = 0.0;
    for j in [100u32, 1000] {
        for g in 0..33 {
            let zeta = -PI + 2.0 * PI * g as f64 / 32.0;
            for sign in [curve::MuSign::Minus, curve::MuSign::Plus] {
                let fp = curve::mu_fixed_point(j, zeta, sign)?;
                let direct = curve::xi_direct(j, zeta, sign)?;
                worst_mu = worst_mu.max((curve::xi_from_mu(j, sign, fp.mu) - direct).abs());
            }
        }
    }
    out.push(check(S, "mu-fixed-point-consistency", worst_mu, 1e-9, "max |xi_fp - xi_direct| at j in {100, 1000}"));

    // Summed branch gaps against the calibrated bound.
    let mut min_margin = f64::INFINITY;
    for j in (50..=500).step_by(50) {
        let gc = curve::branch_gap_check(curve::dip_tau(j, 1.0), 1.0)?;
        min_margin = min_margin.min(gc.gap_sum / gc.bound);
    }
    out.push(check(S, "branch-gap-lower-bound", 1.0 - min_margin, 0.0, "1 - min(gap_sum / bound); negative margin passes"));

    Ok(out)
}

fn effective_dynamics() -> Result<Vec<CheckResult>> {
    const S: &str = "effective-dynamics";
    let mut out = Vec::new();
    let data = InitialData::new(Complex64::new(1.0, 0.0), Complex64::new(0.4, 0.3), 0.1)?;

    // Closed form satisfies the reduced equation (finite differences).
    let mut worst: f64 = 0.0;
    for t in [0.0, 2.2, 31.0, 404.0] {
        let dt = 1e-6;
        let plus = dynamics::closed_form_state(&data, t + dt);
        let minus = dynamics::closed_form_state(&data, t - dt);
        let st = dynamics::closed_form_state(&data, t);
        let cons = dynamics::conserved_set(&st);
        let i = Complex64::I;
        let r = (plus.u1 - minus.u1) / (2.0 * dt)
            + i * (1.0 + 2.0 * cons.k1) * st.u1
            + 2.0 * i * cons.j1 * st.u_minus1;
        worst = worst.max(r.norm() / data.eps);
    }
    out.push(check(S, "closed-form-residual", worst, 1e-4, "finite-difference residual over eps"));

    // Integrator against the closed form over ten beating periods.
    let t_end = data.time_for_theta(10.0 * PI);
    let last = dynamics::integrate_terminal(&data, t_end, 2e-3)?;
    let exact = dynamics::closed_form_state(&data, last.t);
    let err = ((last.u1 - exact.u1).norm() + (last.u_minus1 - exact.u_minus1).norm()) / data.eps;
    out.push(check(S, "integrator-terminal-error", err, 1e-8, "terminal error over eps after 10 beating periods"));

    // Invariant drift along the trajectory.
    let traj = dynamics::integrate_reduced(&data, 100.0, 2e-3)?;
    let c0 = dynamics::conserved_set(&traj[0]);
    let mut drift: f64 = 0.0;
    for st in traj.iter().skip(1) {
        let c = dynamics::conserved_set(st);
        drift = drift.max(((c.j1 - c0.j1) / c0.j1).abs());
        drift = drift.max(((c.k1 - c0.k1) / c0.j1).abs());
        drift = drift.max(((c.g - c0.g) / c0.g).abs());
    }
    out.push(check(S, "invariant-drift", drift, 1e-9, "max relative drift of J1, K1, G"));

    // l1/l2 sandwich of the amplitude pair.
    let mut worst: f64 = 0.0;
    for t in [0.0, 7.7, 99.0] {
        let st = dynamics::closed_form_state(&data, t);
        let cons = dynamics::conserved_set(&st);
        let l1 = st.u1.norm() + st.u_minus1.norm();
        worst = worst.max(cons.j1.sqrt() - l1).max(l1 - SQRT_2 * cons.j1.sqrt());
    }
    out.push(check(S, "l1-l2-sandwich", worst, 1e-12, "sqrt(J1) <= |u1|+|u-1| <= sqrt(2 J1)"));

    // The dropped-cross-term formula is minimized where sine or cosine dies.
    let floor = data.eps * (data.alpha.norm() + data.beta.norm());
    let mut min_val = f64::INFINITY;
    for k in 0..=4000 {
        let theta = PI * k as f64 / 4000.0;
        let t = data.time_for_theta(theta);
        min_val = min_val.min(dynamics::sup_norm_effective(&data, t, SupMode::Paper));
    }
    out.push(check(S, "sup-norm-floor", (min_val - floor).abs(), 1e-6, "grid minimum against eps (|alpha| + |beta|)"));

    Ok(out)
}

fn spectral_pde() -> Result<Vec<CheckResult>> {
    const S: &str = "spectral-pde";
    let mut out = Vec::new();
    let data = InitialData::new(Complex64::new(1.0, 0.0), Complex64::ZERO, 0.1)?;

    // Conservation over the standard horizon.
    let config = pde::PdeRunConfig { n: 64, dt: 1e-3, t_end: 100.0, dealias: true };
    let run = pde::solve_pde(&config, &data)?;
    let m0 = run.samples[0].mass;
    let e0 = run.samples[0].energy;
    let mut dm: f64 = 0.0;
    let mut de: f64 = 0.0;
    for s in &run.samples {
        dm = dm.max(((s.mass - m0) / m0).abs());
        de = de.max(((s.energy - e0) / e0).abs());
    }
    out.push(check(S, "mass-conservation", dm, 1e-10, "relative mass drift, t_end = 100"));
    out.push(check(S, "energy-conservation", de, 1e-8, "relative energy drift, t_end = 100"));

    // Beating period against pi / (2 eps^2 |alpha|^2) over two periods.
    let period_expect = PI / (2.0 * data.eps * data.eps * data.alpha.norm_sqr());
    let config = pde::PdeRunConfig { n: 64, dt: 1e-3, t_end: 2.2 * period_expect, dealias: true };
    let run = pde::solve_pde(&config, &data)?;
    let period = beating_period(&run).unwrap_or(f64::NAN);
    out.push(check(
        S,
        "beating-period",
        (period - period_expect).abs() / period_expect,
        0.02,
        format!("measured {period:.3} vs predicted {period_expect:.3}"),
    ));

    // Doubling the resolution leaves sampled sup-norms unchanged.
    let sup_at = |n: usize| -> Result<Vec<f64>> {
        let config = pde::PdeRunConfig { n, dt: 1e-3, t_end: 3.0, dealias: true };
        Ok(pde::solve_pde(&config, &data)?.samples.iter().map(|s| s.sup).collect())
    };
    let a = sup_at(64)?;
    let b = sup_at(128)?;
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    out.push(check(S, "resolution-stability", worst, 1e-10, "max sup-norm change under N doubling"));

    Ok(out)
}

/// Spacing between successive minima of `|u_1(t)|^2`, via parabolic
/// interpolation through each discrete minimum.
pub fn beating_period(run: &pde::PdeRun) -> Option<f64> {
    let series: Vec<(f64, f64)> = run.samples.iter().map(|s| (s.t, s.u1.norm_sqr())).collect();
    let mut minima = Vec::new();
    for w in series.windows(3) {
        let (l, c, r) = (w[0], w[1], w[2]);
        if c.1 <= l.1 && c.1 <= r.1 && (l.1 > c.1 || r.1 > c.1) {
            // Parabola through three points; vertex offset from the center.
            let denom = l.1 - 2.0 * c.1 + r.1;
            let dt = c.0 - l.0;
            let offset = if denom.abs() > 0.0 { 0.5 * (l.1 - r.1) / denom * dt } else { 0.0 };
            minima.push(c.0 + offset);
        }
    }
    if minima.len() < 2 {
        return None;
    }
    let gaps: Vec<f64> = minima.windows(2).map(|w| w[1] - w[0]).collect();
    Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

fn tail_probability() -> Result<Vec<CheckResult>> {
    const S: &str = "tail-probability";
    let mut out = Vec::new();
    let ctx = TailContext::default();

    // Closed forms against a shared Monte Carlo oracle.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let var = VariancePair::new(2.0, 1.0)?;
    let n = 1_000_000;
    let (mut hit_l1, mut hit_l2) = (0u64, 0u64);
    for _ in 0..n {
        let a2 = -var.sigma_a2 * (1.0 - rng.random::<f64>()).ln();
        let b2 = -var.sigma_b2 * (1.0 - rng.random::<f64>()).ln();
        if a2.sqrt() + b2.sqrt() > 2.0 {
            hit_l1 += 1;
        }
        if 2.0 * (a2 + b2) > 4.0 {
            hit_l2 += 1;
        }
    }
    let p1 = tail::l1_tail(2.0, &var);
    let se1 = (p1 * (1.0 - p1) / n as f64).sqrt();
    out.push(check(S, "l1-closed-form-vs-mc", (hit_l1 as f64 / n as f64 - p1).abs() / se1, 3.0, "deviation in standard errors"));
    let p2 = tail::l2_tail(2.0, &var);
    let se2 = (p2 * (1.0 - p2) / n as f64).sqrt();
    out.push(check(S, "l2-closed-form-vs-mc", (hit_l2 as f64 / n as f64 - p2).abs() / se2, 3.0, "deviation in standard errors"));

    // Quadrature against Monte Carlo at one sub-resonant configuration.
    let spec = RegimeSpec::new(1.0, 0.3, 0.0, 1.0, 10.0)?;
    let quad = tail::log_tail_quadrature(&spec, &var, 0.2, &ctx)?;
    let mc = tail::log_tail_monte_carlo(&spec, &var, 0.2, 200_000, 11, 4, &ctx)?;
    out.push(check(
        S,
        "quadrature-vs-monte-carlo",
        (quad.log_p - mc.log_p).abs(),
        3.0 * (mc.err + quad.err) + 1e-3,
        format!("log_p {:.6} vs {:.6}", quad.log_p, mc.log_p),
    ));

    // Slab inclusion with the calibrated inflation constant.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0u64;
    for &tau in &[0.5, 5.0, 50.0] {
        for &eps in &[0.3, 0.1, 0.03] {
            let lt = tail::inflated_b_threshold(1.0, tau, eps, ctx.c1);
            let mut checked = 0;
            while checked < 10_000 {
                let a = 10.0 * rng.random::<f64>();
                let b = eps * rng.random::<f64>();
                if !tail::region_b_member(a, b, tau, lt, eps, 10.0) {
                    continue;
                }
                checked += 1;
                if !tail::region_a_member(a, b, tau, 1.0, 10.0) {
                    violations += 1;
                }
            }
        }
    }
    out.push(check(S, "slab-inclusion", violations as f64, 0.0, "escapes from the threshold region"));

    // Monotonicity of the scaled tail in z0 and sigma_a2.
    let mut mono_ok = true;
    let mut prev = f64::INFINITY;
    for z0 in [0.6, 0.8, 1.0, 1.2, 1.4] {
        let spec = RegimeSpec::new(z0, 0.3, 0.0, 1.0, 14.0)?;
        let est = tail::log_tail_quadrature(&spec, &var, 0.2, &ctx)?;
        mono_ok &= est.log_p <= prev + 1e-9;
        prev = est.log_p;
    }
    let mut prev = f64::NEG_INFINITY;
    for sa2 in [1.0, 1.5, 2.0, 2.5, 3.0] {
        let spec = RegimeSpec::new(1.0, 0.3, 0.0, 1.0, 10.0)?;
        let v = VariancePair::new(sa2, 1.0)?;
        let est = tail::log_tail_quadrature(&spec, &v, 0.2, &ctx)?;
        mono_ok &= est.log_p >= prev - 1e-9;
        prev = est.log_p;
    }
    out.push(check(S, "tail-monotonicity", if mono_ok { 0.0 } else { 1.0 }, 0.0, "5-point grids in z0 and sigma_a2"));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run("bogus").is_err());
    }

    #[test]
    fn implicit_curve_suite_passes() {
        let results = run("implicit-curve").unwrap();
        for r in &results {
            assert!(r.pass, "{}: measured {} vs {} ({})", r.name, r.measured, r.threshold, r.detail);
        }
    }
}
