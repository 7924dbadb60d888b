//! C ABI surface for the beatnls toolkit.
//!
//! Scalar computations are plain functions writing through out-pointers and
//! returning a [`BeatnlsStatus`]; the birth/fold table is exposed as an
//! opaque handle with explicit free. The matching C header is generated into
//! `include/beatnls.h` at build time.

use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatnlsStatus {
    Ok = 0,
    /// A precondition on the inputs was violated.
    InvalidArgument = 1,
    /// The computation itself failed (no bracket, no convergence, ...).
    ComputeError = 2,
    NullPointer = 3,
}

fn status_of(e: &beatnls::Error) -> BeatnlsStatus {
    match e {
        beatnls::Error::InvalidInput(_) => BeatnlsStatus::InvalidArgument,
        _ => BeatnlsStatus::ComputeError,
    }
}

/// `h(xi) = |cos xi| + |sin xi|`.
#[no_mangle]
pub extern "C" fn beatnls_h_eval(xi: f64) -> f64 {
    beatnls::curve::h_eval(xi)
}

/// Curve parametrization `tau(xi) = xi h(xi)^2 / (2 lambda^2)`.
#[no_mangle]
pub extern "C" fn beatnls_tau_of_xi(xi: f64, lambda: f64) -> f64 {
    beatnls::curve::tau_of_xi(xi, lambda)
}

/// j-th fold abscissa (the root of `h + 2 xi h' = 0` in the j-th quarter
/// period).
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn beatnls_collision_xi(j: u32, out: *mut f64) -> BeatnlsStatus {
    if out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    match beatnls::curve::collision_xi(j) {
        Ok(v) => {
            *out = v;
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Decay-rate function at `(z0, tau)`; `*out_is_jump` is set to 1 when
/// `tau` was detected as a fold time (right limit returned).
///
/// # Safety
/// `out_value` and `out_is_jump` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn beatnls_rate_j(
    z0: f64,
    tau: f64,
    out_value: *mut f64,
    out_is_jump: *mut u8,
) -> BeatnlsStatus {
    if out_value.is_null() || out_is_jump.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    match beatnls::curve::rate_j(z0, tau) {
        Ok((v, jump)) => {
            *out_value = v;
            *out_is_jump = jump as u8;
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Smallest solution of the implicit equation at `(tau, lambda)`.
///
/// # Safety
/// Non-null out-pointers to writable memory.
#[no_mangle]
pub unsafe extern "C" fn beatnls_minimal_solution(
    tau: f64,
    lambda: f64,
    out_y: *mut f64,
    out_xi: *mut f64,
    out_branch_index: *mut u32,
) -> BeatnlsStatus {
    if out_y.is_null() || out_xi.is_null() || out_branch_index.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    match beatnls::curve::minimal_solution(tau, lambda) {
        Ok(b) => {
            *out_y = b.y;
            *out_xi = b.xi;
            *out_branch_index = b.branch_index;
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Opaque birth/fold table handle.
pub struct BeatnlsBranchTable {
    inner: beatnls::curve::BranchTable,
}

/// Builds a table of the first `max_index` births and folds for `lambda`.
/// The handle must be released with [`beatnls_branch_table_free`].
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn beatnls_branch_table_new(
    lambda: f64,
    max_index: u32,
    out: *mut *mut BeatnlsBranchTable,
) -> BeatnlsStatus {
    if out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    match beatnls::curve::build_branch_table(lambda, max_index) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(BeatnlsBranchTable { inner }));
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Number of (birth, fold) rows in the table.
///
/// # Safety
/// `table` must be a live handle from [`beatnls_branch_table_new`].
#[no_mangle]
pub unsafe extern "C" fn beatnls_branch_table_len(table: *const BeatnlsBranchTable) -> u32 {
    if table.is_null() {
        return 0;
    }
    (*table).inner.max_index
}

/// Birth abscissa/time of the pair born at index `j` (1-based, `j <= len`).
///
/// # Safety
/// `table` must be a live handle; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn beatnls_branch_table_birth(
    table: *const BeatnlsBranchTable,
    j: u32,
    out_xi: *mut f64,
    out_tau: *mut f64,
) -> BeatnlsStatus {
    if table.is_null() || out_xi.is_null() || out_tau.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let table = &*table;
    match table.inner.births.get(j as usize - 1) {
        Some((_, xi, tau)) => {
            *out_xi = *xi;
            *out_tau = *tau;
            BeatnlsStatus::Ok
        }
        None => BeatnlsStatus::InvalidArgument,
    }
}

/// Fold abscissa/time of the pair dying at index `j` (1-based, `j <= len`).
///
/// # Safety
/// `table` must be a live handle; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn beatnls_branch_table_collision(
    table: *const BeatnlsBranchTable,
    j: u32,
    out_xi: *mut f64,
    out_tau: *mut f64,
) -> BeatnlsStatus {
    if table.is_null() || out_xi.is_null() || out_tau.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let table = &*table;
    match table.inner.collisions.get(j as usize - 1) {
        Some((_, xi, tau)) => {
            *out_xi = *xi;
            *out_tau = *tau;
            BeatnlsStatus::Ok
        }
        None => BeatnlsStatus::InvalidArgument,
    }
}

/// Releases a table handle. Passing NULL is a no-op.
///
/// # Safety
/// `table` must be NULL or a handle from [`beatnls_branch_table_new`] not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn beatnls_branch_table_free(table: *mut BeatnlsBranchTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Two-mode state at one time.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BeatnlsReducedState {
    pub u1_re: f64,
    pub u1_im: f64,
    pub u_minus1_re: f64,
    pub u_minus1_im: f64,
    pub t: f64,
}

/// Exact reduced two-mode flow at time `t` from data
/// `(alpha, beta, eps)`.
///
/// # Safety
/// `out` must point to a writable state struct.
#[no_mangle]
pub unsafe extern "C" fn beatnls_closed_form_state(
    alpha_re: f64,
    alpha_im: f64,
    beta_re: f64,
    beta_im: f64,
    eps: f64,
    t: f64,
    out: *mut BeatnlsReducedState,
) -> BeatnlsStatus {
    if out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let data = match beatnls::dynamics::InitialData::new(
        Complex64::new(alpha_re, alpha_im),
        Complex64::new(beta_re, beta_im),
        eps,
    ) {
        Ok(d) => d,
        Err(e) => return status_of(&e),
    };
    let st = beatnls::dynamics::closed_form_state(&data, t);
    *out = BeatnlsReducedState {
        u1_re: st.u1.re,
        u1_im: st.u1.im,
        u_minus1_re: st.u_minus1.re,
        u_minus1_im: st.u_minus1.im,
        t: st.t,
    };
    BeatnlsStatus::Ok
}

/// Which sup-norm expression to evaluate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatnlsSupMode {
    /// Formula without the imaginary cross term.
    Paper = 0,
    /// Exact two-mode sup `|u1| + |u_-1|`.
    Exact = 1,
}

/// Sup-norm of the two-mode field at time `t`.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn beatnls_sup_norm_effective(
    alpha_re: f64,
    alpha_im: f64,
    beta_re: f64,
    beta_im: f64,
    eps: f64,
    t: f64,
    mode: BeatnlsSupMode,
    out: *mut f64,
) -> BeatnlsStatus {
    if out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let data = match beatnls::dynamics::InitialData::new(
        Complex64::new(alpha_re, alpha_im),
        Complex64::new(beta_re, beta_im),
        eps,
    ) {
        Ok(d) => d,
        Err(e) => return status_of(&e),
    };
    let m = match mode {
        BeatnlsSupMode::Paper => beatnls::dynamics::SupMode::Paper,
        BeatnlsSupMode::Exact => beatnls::dynamics::SupMode::Exact,
    };
    *out = beatnls::dynamics::sup_norm_effective(&data, t, m);
    BeatnlsStatus::Ok
}

/// Parameters of one tail estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BeatnlsTailParams {
    pub z0: f64,
    pub delta: f64,
    pub gamma: f64,
    pub c_time: f64,
    pub cutoff_c: f64,
    pub sigma_a2: f64,
    pub sigma_b2: f64,
    pub eps: f64,
}

/// One tail estimate: log-probability, its scaled value and the method
/// error.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BeatnlsTailEstimate {
    pub log_p: f64,
    pub scaled: f64,
    pub err: f64,
}

fn tail_inputs(
    p: &BeatnlsTailParams,
) -> Result<(beatnls::tail::RegimeSpec, beatnls::tail::VariancePair), beatnls::Error> {
    Ok((
        beatnls::tail::RegimeSpec::new(p.z0, p.delta, p.gamma, p.c_time, p.cutoff_c)?,
        beatnls::tail::VariancePair::new(p.sigma_a2, p.sigma_b2)?,
    ))
}

/// Tail probability by tensor quadrature.
///
/// # Safety
/// `params` and `out` must be non-null and valid.
#[no_mangle]
pub unsafe extern "C" fn beatnls_log_tail_quadrature(
    params: *const BeatnlsTailParams,
    out: *mut BeatnlsTailEstimate,
) -> BeatnlsStatus {
    if params.is_null() || out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let p = &*params;
    let (spec, var) = match tail_inputs(p) {
        Ok(v) => v,
        Err(e) => return status_of(&e),
    };
    let ctx = beatnls::tail::TailContext::default();
    match beatnls::tail::log_tail_quadrature(&spec, &var, p.eps, &ctx) {
        Ok(est) => {
            *out = BeatnlsTailEstimate { log_p: est.log_p, scaled: est.scaled, err: est.err };
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Tail probability by importance-sampled Monte Carlo; deterministic for a
/// fixed `(seed, workers)`.
///
/// # Safety
/// `params` and `out` must be non-null and valid.
#[no_mangle]
pub unsafe extern "C" fn beatnls_log_tail_monte_carlo(
    params: *const BeatnlsTailParams,
    n: u64,
    seed: u64,
    workers: u32,
    out: *mut BeatnlsTailEstimate,
) -> BeatnlsStatus {
    if params.is_null() || out.is_null() {
        return BeatnlsStatus::NullPointer;
    }
    let p = &*params;
    let (spec, var) = match tail_inputs(p) {
        Ok(v) => v,
        Err(e) => return status_of(&e),
    };
    let ctx = beatnls::tail::TailContext::default();
    match beatnls::tail::log_tail_monte_carlo(&spec, &var, p.eps, n, seed, workers as usize, &ctx) {
        Ok(est) => {
            *out = BeatnlsTailEstimate { log_p: est.log_p, scaled: est.scaled, err: est.err };
            BeatnlsStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_surface() {
        assert!((beatnls_h_eval(0.0) - 1.0).abs() < 1e-15);
        let mut xi = 0.0;
        unsafe {
            assert_eq!(beatnls_collision_xi(1, &mut xi), BeatnlsStatus::Ok);
        }
        assert!((xi - 1.184_750_365_923_574).abs() < 1e-9);
        unsafe {
            assert_eq!(beatnls_collision_xi(0, &mut xi), BeatnlsStatus::InvalidArgument);
            assert_eq!(beatnls_collision_xi(1, std::ptr::null_mut()), BeatnlsStatus::NullPointer);
        }
    }

    #[test]
    fn rate_and_minimal_solution() {
        let (mut v, mut jump) = (0.0, 0u8);
        unsafe {
            assert_eq!(beatnls_rate_j(1.0, 1e-6, &mut v, &mut jump), BeatnlsStatus::Ok);
        }
        assert!(jump == 0 && (v - 1.0).abs() < 1e-4);
        let (mut y, mut xi, mut idx) = (0.0, 0.0, 0u32);
        unsafe {
            assert_eq!(
                beatnls_minimal_solution(0.3, 1.0, &mut y, &mut xi, &mut idx),
                BeatnlsStatus::Ok
            );
        }
        assert_eq!(idx, 1);
        assert!((xi - 2.0 * 0.3 * y * y).abs() < 1e-9);
    }

    #[test]
    fn branch_table_handle_lifecycle() {
        let mut table: *mut BeatnlsBranchTable = std::ptr::null_mut();
        unsafe {
            assert_eq!(beatnls_branch_table_new(1.0, 3, &mut table), BeatnlsStatus::Ok);
            assert_eq!(beatnls_branch_table_len(table), 3);
            let (mut xi, mut tau) = (0.0, 0.0);
            assert_eq!(beatnls_branch_table_birth(table, 1, &mut xi, &mut tau), BeatnlsStatus::Ok);
            assert!((tau - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
            assert_eq!(
                beatnls_branch_table_collision(table, 4, &mut xi, &mut tau),
                BeatnlsStatus::InvalidArgument
            );
            beatnls_branch_table_free(table);
            beatnls_branch_table_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn dynamics_and_tail_surface() {
        let mut st = BeatnlsReducedState { u1_re: 0.0, u1_im: 0.0, u_minus1_re: 0.0, u_minus1_im: 0.0, t: 0.0 };
        unsafe {
            assert_eq!(
                beatnls_closed_form_state(1.0, 0.0, 0.0, 0.0, 0.1, 0.0, &mut st),
                BeatnlsStatus::Ok
            );
        }
        assert!((st.u1_re - 0.1).abs() < 1e-15);

        let mut sup = 0.0;
        unsafe {
            assert_eq!(
                beatnls_sup_norm_effective(1.0, 0.0, 1.0, 0.0, 1.0, 0.0, BeatnlsSupMode::Paper, &mut sup),
                BeatnlsStatus::Ok
            );
        }
        assert!((sup - 2.0).abs() < 1e-12);

        let params = BeatnlsTailParams {
            z0: 1.0,
            delta: 0.3,
            gamma: 0.0,
            c_time: 1.0,
            cutoff_c: 10.0,
            sigma_a2: 2.0,
            sigma_b2: 1.0,
            eps: 0.2,
        };
        let mut est = BeatnlsTailEstimate { log_p: 0.0, scaled: 0.0, err: 0.0 };
        unsafe {
            assert_eq!(beatnls_log_tail_quadrature(&params, &mut est), BeatnlsStatus::Ok);
        }
        assert!(est.log_p < 0.0 && est.scaled < 0.0);
        let mut mc = BeatnlsTailEstimate { log_p: 0.0, scaled: 0.0, err: 0.0 };
        unsafe {
            assert_eq!(beatnls_log_tail_monte_carlo(&params, 50_000, 7, 2, &mut mc), BeatnlsStatus::Ok);
        }
        assert!((mc.log_p - est.log_p).abs() < 3.0 * (mc.err + est.err) + 1e-2);

        let bad = BeatnlsTailParams { delta: 1.5, ..params };
        unsafe {
            assert_eq!(beatnls_log_tail_quadrature(&bad, &mut est), BeatnlsStatus::InvalidArgument);
        }
    }
}
