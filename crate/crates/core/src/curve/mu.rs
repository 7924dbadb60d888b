//! Fixed-point refinement of the branch pair flanking a fold.
//!
//! Near the j-th fold the two branch abscissas can be written as
//!
//! ```text
//!     xi_{2j-1}(tau) = pi j / 2 - pi / 4 - mu_minus,
//!     xi_{2j}(tau)   = pi j / 2 - pi / 4 + mu_plus,
//! ```
//!
//! with `tau = (pi j - 3 pi / 2 + zeta) / (2 lambda^2)`, `zeta in [-pi, pi]`.
//! On that quarter period `h(xi) = sqrt(2) cos(mu)`, so the implicit equation
//! `xi h(xi)^2 = 2 tau lambda^2` becomes
//!
//! ```text
//!     (pi j - pi/2 -+ 2 mu) cos^2(mu) = pi j - 3 pi / 2 + zeta,
//! ```
//!
//! which rearranges into the contraction `mu = Phi_{-+}(mu)` solved here by
//! direct iteration from zero. The remainder collapses to
//! `R(v) = A (v^2 - sin^2 v)`, evaluated in the cancellation-free form
//! `(v - sin v)(v + sin v)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::{collision_xi, h_eval, Segment};
use crate::{Error, Result};

/// Which member of the pair around the fold is being solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuSign {
    /// Branch `2j-1`, left of the fold: `xi = pi j/2 - pi/4 - mu`.
    Minus,
    /// Branch `2j`, right of the fold: `xi = pi j/2 - pi/4 + mu`.
    Plus,
}

impl MuSign {
    fn factor(self) -> f64 {
        match self {
            MuSign::Minus => -1.0,
            MuSign::Plus => 1.0,
        }
    }
}

/// One converged fixed point.
#[derive(Debug, Clone, Copy)]
pub struct MuFixedPoint {
    pub mu: f64,
    pub iterations: u32,
    /// Largest observed ratio of successive iterate differences.
    pub max_ratio: f64,
}

/// Offsets of both branches of the pair `(2j-1, 2j)` at one `zeta`.
#[derive(Debug, Clone, Copy)]
pub struct MuSolution {
    pub j: u32,
    pub zeta: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    /// Larger of the two iteration counts.
    pub iterations: u32,
}

/// `tau` corresponding to `(j, zeta)`: `(pi j - 3 pi/2 + zeta) / (2 lambda^2)`.
#[inline]
pub fn mu_tau(j: u32, zeta: f64, lambda: f64) -> f64 {
    (PI * j as f64 - 1.5 * PI + zeta) / (2.0 * lambda * lambda)
}

/// Branch abscissa reconstructed from an offset `mu`.
#[inline]
pub fn xi_from_mu(j: u32, sign: MuSign, mu: f64) -> f64 {
    FRAC_PI_2 * j as f64 - FRAC_PI_4 + sign.factor() * mu
}

/// `v^2 - sin^2 v` without catastrophic cancellation near zero.
#[inline]
fn v2_minus_sin2(v: f64) -> f64 {
    (v - v.sin()) * (v + v.sin())
}

fn phi(j: f64, zeta: f64, sign: f64, v: f64) -> Option<f64> {
    let a = PI * j - FRAC_PI_2 + 2.0 * sign * v;
    if a <= 0.0 {
        return None;
    }
    let remainder = a * v2_minus_sin2(v);
    let radicand = a * (PI - zeta + remainder) + 1.0;
    if radicand < 0.0 {
        return None;
    }
    Some((radicand.sqrt() + sign) / a)
}

const MAX_ITER: u32 = 500;

/// Iterates `Phi` from zero until successive iterates differ by less than
/// the root tolerance. Errors when `j` is below the contraction regime.
pub fn mu_fixed_point(j: u32, zeta: f64, sign: MuSign) -> Result<MuFixedPoint> {
    if j < 4 {
        return Err(Error::InvalidInput(format!("fold-pair coordinates need j >= 4, got {j}")));
    }
    if !(-PI..=PI).contains(&zeta) {
        return Err(Error::InvalidInput(format!("zeta must lie in [-pi, pi], got {zeta}")));
    }
    let jf = j as f64;
    let s = sign.factor();
    let mut v = 0.0_f64;
    let mut prev_diff: Option<f64> = None;
    let mut max_ratio: f64 = 0.0;
    for it in 1..=MAX_ITER {
        let next = phi(jf, zeta, s, v).ok_or(Error::MuNonConvergence { j, iterations: it })?;
        let diff = (next - v).abs();
        if let Some(p) = prev_diff {
            if p > 1e-13 && diff > 1e-13 {
                max_ratio = max_ratio.max(diff / p);
            }
        }
        v = next;
        if diff < super::ROOT_TOL {
            return Ok(MuFixedPoint { mu: v, iterations: it, max_ratio });
        }
        prev_diff = Some(diff);
    }
    Err(Error::MuNonConvergence { j, iterations: MAX_ITER })
}

/// Both offsets of the pair `(2j-1, 2j)` at one `zeta`.
pub fn mu_solution(j: u32, zeta: f64) -> Result<MuSolution> {
    let minus = mu_fixed_point(j, zeta, MuSign::Minus)?;
    let plus = mu_fixed_point(j, zeta, MuSign::Plus)?;
    Ok(MuSolution {
        j,
        zeta,
        mu_minus: minus.mu,
        mu_plus: plus.mu,
        iterations: minus.iterations.max(plus.iterations),
    })
}

/// Direct bisection for the same abscissa, used as the independent check:
/// root of `xi h(xi)^2 = pi j - 3 pi/2 + zeta` on the monotone segment
/// carrying the branch.
pub fn xi_direct(j: u32, zeta: f64, sign: MuSign) -> Result<f64> {
    let target = PI * j as f64 - 1.5 * PI + zeta;
    let fold = collision_xi(j)?;
    let seg = match sign {
        MuSign::Minus => {
            let lo = FRAC_PI_2 * (j as f64 - 1.0);
            Segment {
                lo,
                hi: fold,
                v_lo: lo,
                v_hi: fold * h_eval(fold) * h_eval(fold),
                rising: true,
                branch_index: 2 * j - 1,
                fold_k: j,
            }
        }
        MuSign::Plus => {
            let hi = FRAC_PI_2 * j as f64;
            Segment {
                lo: fold,
                hi,
                v_lo: fold * h_eval(fold) * h_eval(fold),
                v_hi: hi,
                rising: false,
                branch_index: 2 * j,
                fold_k: j,
            }
        }
    };
    super::segment_root(&seg, target, super::ROOT_TOL)
        .ok_or_else(|| Error::MissingBranches { tau: mu_tau(j, zeta, 1.0), needed: 1, found: 0 })
}

/// Smallest `j` for which the fixed-point iteration contracts (every
/// successive-difference ratio below 0.9) and reproduces the direct root to
/// 1e-9, across a 33-point `zeta` grid and both signs.
pub fn calibrate_j0() -> Result<u32> {
    'outer: for j in 4..=4096u32 {
        for g in 0..33 {
            let zeta = -PI + 2.0 * PI * g as f64 / 32.0;
            for sign in [MuSign::Minus, MuSign::Plus] {
                match (mu_fixed_point(j, zeta, sign), xi_direct(j, zeta, sign)) {
                    (Ok(fp), Ok(xi_bi)) => {
                        if fp.max_ratio >= 0.9 {
                            continue 'outer;
                        }
                        if (xi_from_mu(j, sign, fp.mu) - xi_bi).abs() > 1e-9 {
                            continue 'outer;
                        }
                    }
                    // Covers small j where one branch of the pair is not yet
                    // born inside the zeta window.
                    _ => continue 'outer,
                }
            }
        }
        return Ok(j);
    }
    Err(Error::InvalidInput("no contracting j found up to 4096".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::EMPIRICAL_J0;

    #[test]
    fn boundary_case_large_j() {
        // zeta = pi is the dip time: the minus offset collapses to zero.
        let fp = mu_fixed_point(1_000_000, PI, MuSign::Minus).unwrap();
        assert!(fp.mu >= 0.0);
        assert!(fp.mu <= 4.0 / (1_000_000f64).sqrt());
        assert!(fp.mu < 1e-9);
    }

    #[test]
    fn plus_branch_window_at_j_100() {
        let fp = mu_fixed_point(100, 0.0, MuSign::Plus).unwrap();
        assert!(fp.mu >= 1.0 / (PI * 100.0), "mu = {}", fp.mu);
        assert!(fp.mu <= 0.4);
    }

    #[test]
    fn fixed_point_matches_direct_bisection() {
        for j in [100u32, 1000] {
            for g in 0..33 {
                let zeta = -PI + 2.0 * PI * g as f64 / 32.0;
                let sol = mu_solution(j, zeta).unwrap();
                let sqrt_j = (j as f64).sqrt();
                assert!(sol.mu_minus >= (PI - zeta) / (10.0 * j as f64) - 1e-12);
                assert!(sol.mu_minus <= 4.0 / sqrt_j);
                assert!(sol.mu_plus >= 1.0 / (PI * j as f64));
                assert!(sol.mu_plus <= 4.0 / sqrt_j);
                let xi_m = xi_from_mu(j, MuSign::Minus, sol.mu_minus);
                let xi_p = xi_from_mu(j, MuSign::Plus, sol.mu_plus);
                let direct_m = xi_direct(j, zeta, MuSign::Minus).unwrap();
                let direct_p = xi_direct(j, zeta, MuSign::Plus).unwrap();
                assert!((xi_m - direct_m).abs() < 1e-9, "j={j} zeta={zeta}: {xi_m} vs {direct_m}");
                assert!((xi_p - direct_p).abs() < 1e-9, "j={j} zeta={zeta}: {xi_p} vs {direct_p}");
            }
        }
    }

    #[test]
    fn calibrated_j0_matches_fixture() {
        assert_eq!(calibrate_j0().unwrap(), EMPIRICAL_J0);
    }

    #[test]
    fn rejects_zeta_outside_window() {
        assert!(mu_fixed_point(100, 3.5, MuSign::Minus).is_err());
        assert!(mu_fixed_point(3, 0.0, MuSign::Minus).is_err());
    }
}
