//! Gaussian tail probabilities of the effective sup-norm.
//!
//! `|alpha|` and `|beta|` are independent Rayleigh variables (moduli of
//! centered complex Gaussians with `E|alpha|^2 = sigma_a2`). This module
//! computes the probability that the two-mode sup-norm formula exceeds a
//! threshold, three ways:
//!
//! * exact closed forms for the l1 and l2 comparison events ([`l1_tail`],
//!   [`l2_tail`]);
//! * a log-domain tensor quadrature of the Gaussian integral over the
//!   threshold region in the rescaled amplitude plane ([`log_tail_quadrature`]);
//! * an importance-sampled Monte Carlo estimator ([`log_tail_monte_carlo`]).
//!
//! The scaled quantity `eps^{2 delta} log P` is swept over decreasing `eps`
//! by [`ldp_sweep`] and compared against the applicable limiting rate.

use serde::Serialize;

use crate::curve::h_eval;
use crate::{Error, Result};

mod mc;
mod quad;

pub use mc::{calibrate_c1, log_tail_monte_carlo};
pub use quad::log_tail_quadrature;

/// Variances of the two Gaussian mode amplitudes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariancePair {
    pub sigma_a2: f64,
    pub sigma_b2: f64,
}

impl VariancePair {
    pub fn new(sigma_a2: f64, sigma_b2: f64) -> Result<Self> {
        if !(sigma_a2 > 0.0) || !(sigma_b2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "variances must be positive, got ({sigma_a2}, {sigma_b2})"
            )));
        }
        Ok(VariancePair { sigma_a2, sigma_b2 })
    }

    pub fn max(&self) -> f64 {
        self.sigma_a2.max(self.sigma_b2)
    }

    pub fn sum(&self) -> f64 {
        self.sigma_a2 + self.sigma_b2
    }

    /// Relative-gap criterion for the numerically degenerate equal-variance
    /// closed form.
    pub fn nearly_equal(&self) -> bool {
        (self.sigma_a2 - self.sigma_b2).abs() < 1e-9 * self.sigma_a2
    }
}

/// Scalar configuration of one tail experiment: threshold `z0`, scaling
/// exponent `delta`, time exponent `gamma` (with `t = c_time eps^{-gamma}`)
/// and the domain cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeSpec {
    pub z0: f64,
    pub delta: f64,
    pub gamma: f64,
    pub c_time: f64,
    pub cutoff_c: f64,
}

impl RegimeSpec {
    pub fn new(z0: f64, delta: f64, gamma: f64, c_time: f64, cutoff_c: f64) -> Result<Self> {
        if !(z0 > 0.0) {
            return Err(Error::InvalidInput(format!("z0 must be positive, got {z0}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidInput(format!("delta must lie in (0,1), got {delta}")));
        }
        let gamma_max = 2.5 * (1.0 - delta);
        if !(0.0..gamma_max).contains(&gamma) {
            return Err(Error::InvalidInput(format!(
                "gamma must satisfy 0 <= gamma < (5/2)(1-delta) = {gamma_max}, got {gamma}"
            )));
        }
        if !(c_time > 0.0) {
            return Err(Error::InvalidInput(format!("c_time must be positive, got {c_time}")));
        }
        if cutoff_c < 10.0 * z0 {
            return Err(Error::InvalidInput(format!(
                "cutoff_c must be at least 10 z0 = {}, got {cutoff_c}",
                10.0 * z0
            )));
        }
        Ok(RegimeSpec { z0, delta, gamma, c_time, cutoff_c })
    }

    /// Rescaled time `tau = t(eps) eps^{2(1-delta)} = c_time eps^{2(1-delta)-gamma}`.
    pub fn tau(&self, eps: f64) -> f64 {
        self.c_time * eps.powf(2.0 * (1.0 - self.delta) - self.gamma)
    }
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Quadrature,
    MonteCarlo,
    ClosedForm,
}

/// A log-probability with its `eps^{2 delta}`-scaled value and an error
/// estimate (relative probability error for the quadrature, delta-method
/// standard error of `log_p` for Monte Carlo).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailEstimate {
    pub log_p: f64,
    pub scaled: f64,
    pub method: TailMethod,
    pub err: f64,
    pub eps: f64,
}

/// Calibrated constants threaded through the estimators.
#[derive(Debug, Clone, Copy)]
pub struct TailContext {
    /// Threshold inflation constant of the region inclusion.
    pub c1: f64,
    /// Sup-norm remainder constant in `lambda = z0 - c2 eps^{(1-delta)/2}`.
    pub c2: f64,
    /// Base tensor grid and refinement depth of the quadrature.
    pub quad: QuadratureSpec,
}

impl Default for TailContext {
    fn default() -> Self {
        TailContext {
            c1: crate::fixtures::CLAIM_INCLUSION_C1,
            c2: crate::fixtures::LAMBDA_SHIFT_C2,
            quad: QuadratureSpec::default(),
        }
    }
}

impl TailContext {
    /// Context with the threshold correction disabled (`lambda = z0`),
    /// used when cross-checking estimators against exact formulas.
    pub fn uncorrected() -> Self {
        TailContext { c2: 0.0, ..Default::default() }
    }
}

/// Tensor-grid geometry of the quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub base_a: usize,
    pub base_b: usize,
    pub max_refine: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { base_a: 2048, base_b: 512, max_refine: 4 }
    }
}

/// Effective `(tau, lambda)` of the rescaled tail integral at amplitude
/// `eps`: `lambda = z0 - c2 eps^{(1-delta)/2}` must stay positive.
pub fn effective_tau_lambda(spec: &RegimeSpec, eps: f64, ctx: &TailContext) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let lambda = spec.z0 - ctx.c2 * eps.powf(0.5 * (1.0 - spec.delta));
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eps too large: effective threshold {lambda} is not positive"
        )));
    }
    Ok((spec.tau(eps), lambda))
}

/// `P(|alpha| + |beta| > z)` from the exact decomposition
///
/// ```text
///     P = exp(-z^2 / (sa2 + sb2)) * I(z) + exp(-z^2 / sa2),
/// ```
///
/// with the completed-square inner integral `I` evaluated by adaptive
/// quadrature.
pub fn l1_tail(z: f64, var: &VariancePair) -> f64 {
    let (sa2, sb2) = (var.sigma_a2, var.sigma_b2);
    let s = sa2 + sb2;
    // I(z) = int_0^z (2a/sa2) exp(-(sqrt(s) a - z sa2/sqrt(s))^2 / (sa2 sb2)) da
    let coef = s.sqrt();
    let shift = z * sa2 / s.sqrt();
    let denom = sa2 * sb2;
    let f = |a: f64| {
        let d = coef * a - shift;
        (2.0 * a / sa2) * (-d * d / denom).exp()
    };
    let inner = integrate_adaptive(&f, 0.0, z, 1e-12);
    (-z * z / s).exp() * inner + (-z * z / sa2).exp()
}

/// `P(sqrt(2) sqrt(|alpha|^2 + |beta|^2) > z)`.
///
/// Equal variances: `(w/s + 1) exp(-w/s)` with `w = z^2/2`. Distinct:
/// `[sa2 exp(-w/sa2) - sb2 exp(-w/sb2)] / (sa2 - sb2)`, which is numerically
/// catastrophic near equality; below a relative gap of 1e-9 a midpoint
/// series (second-order divided difference of `s exp(-w/s)`) takes over.
pub fn l2_tail(z: f64, var: &VariancePair) -> f64 {
    let w = z * z / 2.0;
    let (sa2, sb2) = (var.sigma_a2, var.sigma_b2);
    if var.nearly_equal() {
        let m = 0.5 * (sa2 + sb2);
        let d = sa2 - sb2;
        let fp = (-w / m).exp() * (1.0 + w / m);
        let fppp = (-w / m).exp() * (w * w / m.powi(4)) * (w / m - 3.0);
        fp + fppp * d * d / 24.0
    } else {
        (sa2 * (-w / sa2).exp() - sb2 * (-w / sb2).exp()) / (sa2 - sb2)
    }
}

/// Membership in the rescaled threshold region: `a + b <= 2 cutoff_c` and
///
/// ```text
///   sqrt(a^2 cos^2 Q + b^2 sin^2 Q) + sqrt(b^2 cos^2 Q + a^2 sin^2 Q) >= lambda,
/// ```
///
/// with `Q = 2 tau (a^2 + b^2)`.
pub fn region_a_member(a: f64, b: f64, tau: f64, lambda: f64, cutoff_c: f64) -> bool {
    if a < 0.0 || b < 0.0 || a + b > 2.0 * cutoff_c {
        return false;
    }
    sup_expression(a, b, tau) >= lambda
}

/// The two-root sup-norm expression entering the region membership.
pub fn sup_expression(a: f64, b: f64, tau: f64) -> f64 {
    let q = 2.0 * tau * (a * a + b * b);
    let (c2, s2) = (q.cos().powi(2), q.sin().powi(2));
    let (a2, b2) = (a * a, b * b);
    (a2 * c2 + b2 * s2).sqrt() + (b2 * c2 + a2 * s2).sqrt()
}

/// Membership in the one-dimensional comparison slab:
/// `a in [0, cutoff_c]`, `b in [0, eps]` and `a h(2 tau a^2) >= lambda_tilde`.
pub fn region_b_member(
    a: f64,
    b: f64,
    tau: f64,
    lambda_tilde: f64,
    eps: f64,
    cutoff_c: f64,
) -> bool {
    (0.0..=cutoff_c).contains(&a) && (0.0..=eps).contains(&b) && a * h_eval(2.0 * tau * a * a) >= lambda_tilde
}

/// Inflated slab threshold `lambda + c1 sqrt(tau) eps + sqrt(eps)` for which
/// the slab is contained in the threshold region at level `lambda`.
pub fn inflated_b_threshold(lambda: f64, tau: f64, eps: f64, c1: f64) -> f64 {
    lambda + c1 * tau.sqrt() * eps + eps.sqrt()
}

/// Timescale classification of a tail experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    EqualVariance,
    SubResonant,
    Resonant,
    SuperResonant,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::EqualVariance => "equal-variance",
            Regime::SubResonant => "sub-resonant",
            Regime::Resonant => "resonant",
            Regime::SuperResonant => "super-resonant",
        }
    }
}

/// Limiting value the scaled log-probability converges to, or the
/// transient-window bracket when no single limit is established.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum RegimeTarget {
    Rate(f64),
    Bounds { upper: f64, lower: f64 },
}

pub fn classify(spec: &RegimeSpec, var: &VariancePair) -> Regime {
    if var.nearly_equal() {
        return Regime::EqualVariance;
    }
    let resonant_gamma = 2.0 * (1.0 - spec.delta);
    if spec.gamma < resonant_gamma {
        Regime::SubResonant
    } else if spec.gamma > resonant_gamma {
        Regime::SuperResonant
    } else {
        Regime::Resonant
    }
}

/// Applicable limit for the scaled log-probability.
pub fn target_for(spec: &RegimeSpec, var: &VariancePair) -> Result<RegimeTarget> {
    let z2 = spec.z0 * spec.z0;
    Ok(match classify(spec, var) {
        Regime::EqualVariance => RegimeTarget::Rate(-z2 / (2.0 * var.sigma_a2)),
        Regime::SubResonant => RegimeTarget::Rate(-z2 / var.sum()),
        Regime::SuperResonant => RegimeTarget::Rate(-z2 / (2.0 * var.max())),
        Regime::Resonant => {
            // At gamma exactly 2(1-delta) the window [lower, upper] is
            // reported instead of a single rate; tau = c_time independently
            // of eps there.
            let (upper, lower) =
                crate::dynamics::transient_rate_bounds(spec.z0, spec.c_time, var.max())?;
            RegimeTarget::Bounds { upper, lower }
        }
    })
}

/// One row of an `eps` sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub tau: f64,
    pub estimate: TailEstimate,
    pub regime: Regime,
    pub target: RegimeTarget,
}

/// Scaled log-probability along a decreasing `eps` list, with the applicable
/// regime target attached to every row. Estimates use the quadrature.
pub fn ldp_sweep(
    spec: &RegimeSpec,
    var: &VariancePair,
    eps_list: &[f64],
    ctx: &TailContext,
) -> Result<Vec<SweepRow>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("eps list must not be empty".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidInput("eps list must be strictly decreasing".into()));
        }
    }
    let regime = classify(spec, var);
    let target = target_for(spec, var)?;
    eps_list
        .iter()
        .map(|&eps| {
            let estimate = log_tail_quadrature(spec, var, eps, ctx)?;
            Ok(SweepRow { eps, tau: spec.tau(eps), estimate, regime, target })
        })
        .collect()
}

/// Adaptive Simpson integration with interval-halving error control.
fn integrate_adaptive(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if lo >= hi {
        return 0.0;
    }
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    let scale = whole.abs().max(1.0);
    recurse(f, lo, hi, fa, fm, fb, whole, tol * scale, 40)
}

/// Streaming log-sum-exp accumulator with deterministic accumulation order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        LogSumExp { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    pub(crate) fn push(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l <= self.max {
            self.sum += (l - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - l).exp() + 1.0;
            self.max = l;
        }
    }

    pub(crate) fn merge(&mut self, other: LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vp(a: f64, b: f64) -> VariancePair {
        VariancePair::new(a, b).unwrap()
    }

    #[test]
    fn l1_tail_limits_and_range() {
        let var = vp(2.0, 1.0);
        assert!((l1_tail(1e-12, &var) - 1.0).abs() < 1e-9);
        for z in [0.5, 1.0, 3.0, 8.0] {
            let p = l1_tail(z, &var);
            assert!(p > 0.0 && p < 1.0, "P({z}) = {p}");
        }
    }

    #[test]
    fn l1_tail_matches_monte_carlo_oracle() {
        // 2e6 Rayleigh pairs at z = 3, equal unit variances.
        let var = vp(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 2_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let a = (-(1.0 - rng.random::<f64>()).ln()).sqrt();
            let b = (-(1.0 - rng.random::<f64>()).ln()).sqrt();
            if a + b > 3.0 {
                hits += 1;
            }
        }
        let estimate = hits as f64 / n as f64;
        let p = l1_tail(3.0, &var);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((estimate - p).abs() < 3.0 * se, "MC {estimate} vs exact {p} (se {se})");
    }

    #[test]
    fn l1_tail_scaled_limit_monotone() {
        let var = vp(2.0, 1.0);
        let rate = -1.0 / var.sum();
        let mut prev_gap = f64::INFINITY;
        for lam in [5.0, 10.0, 20.0] {
            let scaled = l1_tail(lam, &var).ln() / (lam * lam);
            let gap = (scaled - rate).abs();
            assert!(gap < prev_gap, "gap not shrinking at lambda = {lam}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.02);
    }

    #[test]
    fn l2_tail_reference_values() {
        assert!((l2_tail(1e-12, &vp(1.0, 1.0)) - 1.0).abs() < 1e-9);
        assert!((l2_tail(1e-12, &vp(2.0, 1.0)) - 1.0).abs() < 1e-9);
        let p = l2_tail(2.0, &vp(1.0, 1.0));
        assert!((p - 3.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((p - 0.40600585).abs() < 1e-7);
    }

    #[test]
    fn l2_tail_branches_agree_near_equality() {
        let z = 1.7;
        let equal = l2_tail(z, &vp(1.0, 1.0));
        let mut prev = f64::INFINITY;
        for gap in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
            let p = l2_tail(z, &vp(1.0, 1.0 - gap));
            let lag = (p - equal).abs();
            assert!(lag < prev + 1e-15, "not converging at gap {gap}");
            assert!(lag < 2.0 * gap, "branch mismatch {lag} at gap {gap}");
            prev = lag;
        }
        // Just inside the switch threshold the series branch still agrees.
        let p = l2_tail(z, &vp(1.0, 1.0 - 1e-10));
        assert!((p - equal).abs() < 1e-9);
    }

    #[test]
    fn l2_tail_matches_monte_carlo_oracle_distinct() {
        let var = vp(2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2_000_000;
        let z = 2.0;
        let mut hits = 0u64;
        for _ in 0..n {
            let a2 = -2.0 * (1.0 - rng.random::<f64>()).ln();
            let b2 = -(1.0 - rng.random::<f64>()).ln();
            if 2.0 * (a2 + b2) > z * z {
                hits += 1;
            }
        }
        let estimate = hits as f64 / n as f64;
        let p = l2_tail(z, &var);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((estimate - p).abs() < 3.0 * se, "MC {estimate} vs exact {p}");
    }

    #[test]
    fn region_a_contains_l1_half_space_and_respects_l2_envelope() {
        // The membership expression dominates a + b pointwise, so the
        // half-space {a + b >= lambda} is always included (inside the cutoff).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let a = 3.0 * rng.random::<f64>();
            let b = 3.0 * rng.random::<f64>();
            let tau = 10.0 * rng.random::<f64>();
            let expr = sup_expression(a, b, tau);
            assert!(expr >= a + b - 1e-12);
            assert!(expr <= std::f64::consts::SQRT_2 * (a * a + b * b).sqrt() + 1e-12);
            if region_a_member(a, b, tau, 1.0, 10.0) {
                assert!(std::f64::consts::SQRT_2 * (a * a + b * b).sqrt() >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn region_a_small_tau_looks_like_half_space() {
        let lambda = 1.0;
        let tau = 1e-3 / (lambda * lambda);
        let c = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let s = lambda * 1.01 + (2.0 * c - lambda * 1.01) * rng.random::<f64>();
            let frac = rng.random::<f64>();
            let (a, b) = (s * frac, s * (1.0 - frac));
            assert!(region_a_member(a, b, tau, lambda, c), "(a,b)=({a},{b}) excluded");
        }
        // b = 0 reduces to a h(2 tau a^2) >= lambda, true at a = lambda.
        assert!(region_a_member(lambda, 0.0, 0.37, lambda, c));
    }

    #[test]
    fn region_b_reference_cases() {
        let (tau, eps, c) = (2.0, 0.1, 10.0);
        assert!(region_b_member(1.0, 0.0, tau, 1.0, eps, c));
        assert!(!region_b_member(0.69, 0.05, tau, 1.0, eps, c), "below lambda/sqrt(2)");
        assert!(!region_b_member(1.0, 0.2, tau, 1.0, eps, c), "b above the slab");
        assert!(!region_b_member(11.0, 0.0, tau, 1.0, eps, c), "a beyond cutoff");
    }

    #[test]
    fn slab_inclusion_with_calibrated_constant_smoke() {
        // Reduced-size version of the inclusion check (the acceptance suite
        // runs the full 1e5-sample grid).
        let c1 = crate::fixtures::CLAIM_INCLUSION_C1;
        let (z0, c) = (1.0, 10.0);
        for &tau in &[0.5, 5.0, 50.0] {
            for &eps in &[0.3, 0.1, 0.03] {
                let lt = inflated_b_threshold(z0, tau, eps, c1);
                let mut rng = ChaCha8Rng::seed_from_u64(17);
                let mut checked = 0;
                while checked < 5_000 {
                    let a = c * rng.random::<f64>();
                    let b = eps * rng.random::<f64>();
                    if !region_b_member(a, b, tau, lt, eps, c) {
                        continue;
                    }
                    checked += 1;
                    assert!(
                        region_a_member(a, b, tau, z0, c),
                        "tau={tau} eps={eps}: ({a},{b}) escaped"
                    );
                }
            }
        }
    }

    #[test]
    fn regime_classification_and_targets() {
        let var = vp(2.0, 1.0);
        let sub = RegimeSpec::new(1.0, 0.3, 0.0, 1.0, 10.0).unwrap();
        assert_eq!(classify(&sub, &var), Regime::SubResonant);
        match target_for(&sub, &var).unwrap() {
            RegimeTarget::Rate(r) => assert!((r + 1.0 / 3.0).abs() < 1e-15),
            _ => panic!("expected a rate"),
        }
        let sup = RegimeSpec::new(1.0, 0.3, 1.6, 1.0, 10.0).unwrap();
        assert_eq!(classify(&sup, &var), Regime::SuperResonant);
        match target_for(&sup, &var).unwrap() {
            RegimeTarget::Rate(r) => assert!((r + 0.25).abs() < 1e-15),
            _ => panic!("expected a rate"),
        }
        let equal = vp(1.0, 1.0);
        let any = RegimeSpec::new(1.0, 0.3, 0.7, 1.0, 10.0).unwrap();
        assert_eq!(classify(&any, &equal), Regime::EqualVariance);
        match target_for(&any, &equal).unwrap() {
            RegimeTarget::Rate(r) => assert!((r + 0.5).abs() < 1e-15),
            _ => panic!("expected a rate"),
        }
        let resonant = RegimeSpec::new(1.0, 0.3, 1.4, 1.0, 10.0).unwrap();
        assert_eq!(classify(&resonant, &var), Regime::Resonant);
        match target_for(&resonant, &var).unwrap() {
            RegimeTarget::Bounds { upper, lower } => {
                assert!(upper >= lower);
                assert!((upper + 0.25).abs() < 1e-12);
            }
            _ => panic!("expected bounds"),
        }
    }

    #[test]
    fn regime_spec_validation_messages() {
        let err = RegimeSpec::new(1.0, 1.5, 0.0, 1.0, 10.0).unwrap_err();
        assert!(err.to_string().contains("delta must lie in (0,1)"));
        let err = RegimeSpec::new(1.0, 0.3, 2.4, 1.0, 10.0).unwrap_err();
        assert!(err.to_string().contains("(5/2)(1-delta) = 1.75"), "{err}");
        assert!(RegimeSpec::new(1.0, 0.3, 0.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn adaptive_simpson_reference() {
        let f = |x: f64| (-x * x).exp();
        let v = integrate_adaptive(&f, 0.0, 10.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn log_sum_exp_streaming_matches_direct() {
        let logs = [-700.0, -701.5, -699.2, -f64::INFINITY, -705.0];
        let mut acc = LogSumExp::new();
        for l in logs {
            acc.push(l);
        }
        let max = -699.2f64;
        let direct: f64 = logs.iter().filter(|l| l.is_finite()).map(|l| (l - max).exp()).sum();
        assert!((acc.value() - (max + direct.ln())).abs() < 1e-12);
    }
}
