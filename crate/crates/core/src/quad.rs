//! Adaptive Simpson quadrature.
//!
//! Absolute-tolerance driven, with a hard cap of 2^20 subdivisions: the
//! nonlinearities we integrate are smooth away from u = 0, so hitting the
//! cap signals a genuinely singular integrand rather than a tolerance that
//! merely needs more work.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge on [{a}, {b}] (cap of {cap} subdivisions)")]
    NoConvergence { a: f64, b: f64, cap: usize },
    #[error("integrand returned a non-finite value at {x}")]
    NonFinite { x: f64 },
}

const MAX_SUBDIVISIONS: usize = 1 << 20;

/// Integrates `f` over `[a, b]` (either orientation) to absolute accuracy
/// `tol` with adaptive Simpson subdivision.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut budget = MAX_SUBDIVISIONS;
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };
    let flo = eval(lo)?;
    let fhi = eval(hi)?;
    let mid = 0.5 * (lo + hi);
    let fmid = eval(mid)?;
    let whole = simpson(lo, hi, flo, fmid, fhi);
    let value = recurse(
        &eval, lo, hi, flo, fmid, fhi, whole, tol, 52, &mut budget,
    )?;
    Ok(sign * value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    eval: &dyn Fn(f64) -> Result<f64, QuadError>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64, QuadError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || depth == 0 {
        if depth == 0 && err.abs() > 15.0 * tol {
            return Err(QuadError::NoConvergence { a, b, cap: MAX_SUBDIVISIONS });
        }
        return Ok(left + right + err / 15.0);
    }
    if *budget < 2 {
        return Err(QuadError::NoConvergence { a, b, cap: MAX_SUBDIVISIONS });
    }
    *budget -= 2;
    let lv = recurse(eval, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?;
    let rv = recurse(eval, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?;
    Ok(lv + rv)
}
