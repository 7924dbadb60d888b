//! Empirically calibrated constants.
//!
//! The analysis behind this crate guarantees several bounds only up to
//! unspecified constants. The values below were measured once with the
//! calibration routines named next to each constant and are frozen here;
//! tests re-derive them so a regression in the underlying numerics shows up
//! as a fixture mismatch.

/// Smallest fold index `j` for which the fixed-point iteration of
/// `curve::mu_fixed_point` contracts (successive-difference ratio < 0.9 over
/// a 33-point `zeta` grid, both signs) and reproduces the direct bisection
/// root to 1e-9. Derived by `curve::calibrate_j0`.
pub const EMPIRICAL_J0: u32 = 5;

/// Lower-bound constant `c` in the summed-gap check
/// `gap_sum >= c / (lambda^3 tau^2)`: half the minimum of
/// `gap_sum * lambda^3 * tau^2` over `j in [EMPIRICAL_J0, 500]` at the dip
/// times, `lambda = 1`. Derived by `fixtures::calibrate_gap_bound`.
pub const GAP_BOUND_CONSTANT: f64 = 1.17;

/// Constant `C` in the fold-neighborhood bound
/// `0 <= y_{2j+1}(tau) - lambda/sqrt(2) <= C * lambda / j` for
/// `tau in [dip_tau(j-1), dip_tau(j+1)]`: the observed maximum of
/// `j * (y - lambda/sqrt(2)) / lambda`, doubled for slack. Derived by
/// `fixtures::calibrate_cor_ctilde`.
pub const BRANCH_LIMIT_CTILDE: f64 = 1.437;

/// Threshold inflation constant of the region inclusion
/// `B(tau, lambda + C1 sqrt(tau) eps + sqrt(eps)) ⊂ A(tau, lambda)`:
/// smallest power of two passing a 1e5-sample inclusion check on the
/// `(tau, eps)` calibration grid. Derived by `tail::calibrate_c1`.
pub const CLAIM_INCLUSION_C1: f64 = 1.0;

/// Sup-norm remainder constant entering the effective tail threshold
/// `lambda = z0 - C2 * eps^{(1-delta)/2}`: twice the measured gap between
/// the pseudospectral sup-norm and the two-mode formula at the largest
/// comparison amplitude (eps = 0.2). Derived by `fixtures::calibrate_c2`.
pub const LAMBDA_SHIFT_C2: f64 = 0.0227;

/// Calibration used to freeze [`GAP_BOUND_CONSTANT`].
pub fn calibrate_gap_bound() -> crate::Result<f64> {
    let mut min_scaled = f64::INFINITY;
    for j in EMPIRICAL_J0..=500 {
        let tau = crate::curve::dip_tau(j, 1.0);
        let sols = crate::curve::enumerate_solutions(tau, 1.0)?;
        if sols.len() < 4 {
            continue;
        }
        let gap_sum = (sols[1].y - sols[0].y) + (sols[3].y - sols[2].y);
        min_scaled = min_scaled.min(gap_sum * tau * tau);
    }
    Ok(0.5 * min_scaled)
}

/// Calibration used to freeze [`BRANCH_LIMIT_CTILDE`].
pub fn calibrate_cor_ctilde() -> crate::Result<f64> {
    let lambda = 1.0;
    let mut max_scaled: f64 = 0.0;
    for j in [6u32, 8, 12, 20, 50, 100, 200, 500] {
        let lo = crate::curve::dip_tau(j - 1, lambda);
        let hi = crate::curve::dip_tau(j + 1, lambda);
        let birth = crate::curve::birth_tau(j, lambda);
        let start = lo.max(birth + 1e-9);
        for g in 0..=64 {
            let tau = start + (hi - start) * g as f64 / 64.0;
            let b = crate::curve::branch_value(2 * j + 1, tau, lambda)?;
            if !b.exists {
                continue;
            }
            let scaled = j as f64 * (b.y - lambda / std::f64::consts::SQRT_2) / lambda;
            max_scaled = max_scaled.max(scaled);
        }
    }
    Ok(2.0 * max_scaled)
}

/// Calibration used to freeze [`LAMBDA_SHIFT_C2`]: twice the sup-norm gap of
/// the two-mode formula against the full solver at eps = 0.2, tau = 0.4.
pub fn calibrate_c2() -> crate::Result<f64> {
    let eps = 0.2;
    let data = crate::dynamics::InitialData::new(
        num_complex::Complex64::new(1.0, 0.0),
        num_complex::Complex64::new(0.5, 0.0),
        eps,
    )?;
    let config = crate::pde::PdeRunConfig { n: 64, dt: 1e-3, t_end: 0.4 / (eps * eps), dealias: true };
    let (sup_gap, _tail) = crate::pde::compare_to_normal_form(&config, &data, 0.0)?;
    Ok(2.0 * sup_gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_bound_constant_matches_calibration() {
        let measured = calibrate_gap_bound().unwrap();
        assert!(
            (measured - GAP_BOUND_CONSTANT).abs() < 0.05 * measured,
            "calibration drifted: measured {measured}, fixture {GAP_BOUND_CONSTANT}"
        );
    }

    #[test]
    fn ctilde_matches_calibration() {
        let measured = calibrate_cor_ctilde().unwrap();
        assert!(
            (measured - BRANCH_LIMIT_CTILDE).abs() < 0.05 * measured,
            "calibration drifted: measured {measured}, fixture {BRANCH_LIMIT_CTILDE}"
        );
    }
}
