//! The Benamou-Brenier action kernel and its proximal map.
//!
//! Per space-time node the (convexified) action is
//!
//! `K(rho, m, z) = (m^2 + z^2) / rho`   for rho > 0,
//! `K(0, 0, 0) = 0`, and `+inf` otherwise,
//!
//! the convention locked to `int (|v|^2 + |a|^2) drho` with momentum
//! `m = rho v` and source `z = rho a` (no 1/2 factors).
//!
//! Its prox reduces to a scalar cubic: writing `s = m~^2 + z~^2`, the
//! stationarity conditions of
//!
//! `min K(rho, m, z) + (|rho - rho~|^2 + |m - m~|^2 + |z - z~|^2) / (2 gamma)`
//!
//! give `m = m~ rho / (rho + 2 gamma)`, `z = z~ rho / (rho + 2 gamma)` and
//!
//! `(rho - rho~) (rho + 2 gamma)^2 = gamma s`.
//!
//! The prox takes the largest real root when it is positive and collapses
//! to `(0, 0, 0)` otherwise.

/// Largest real root of `(rho - rho_t)(rho + 2 gamma)^2 = gamma * s`.
///
/// Newton from the right: `p` is increasing and convex to the right of
/// both the inflection point and the largest root, and the starting point
/// `max(rho_t, inflection, 0) + (gamma s)^(1/3)` is provably at or beyond
/// the root, so the iteration decreases monotonically onto it.
fn largest_cubic_root(rho_t: f64, gamma: f64, s: f64) -> f64 {
    if s == 0.0 {
        return rho_t.max(-2.0 * gamma);
    }
    let p = |r: f64| (r - rho_t) * (r + 2.0 * gamma) * (r + 2.0 * gamma) - gamma * s;
    let dp = |r: f64| {
        let q = r + 2.0 * gamma;
        q * q + 2.0 * (r - rho_t) * q
    };
    let inflection = (rho_t - 4.0 * gamma) / 3.0;
    let mut r = rho_t.max(inflection).max(0.0) + (gamma * s).cbrt();
    for _ in 0..100 {
        let f = p(r);
        let d = dp(r);
        if d <= 0.0 {
            break;
        }
        let step = f / d;
        r -= step;
        if step.abs() <= 1e-16 * r.abs().max(1.0) {
            break;
        }
    }
    r
}

/// Proximal map of `gamma * K` at `(rho_t, m_t, z_t)`.
pub fn prox(rho_t: f64, m_t: f64, z_t: f64, gamma: f64) -> (f64, f64, f64) {
    debug_assert!(gamma > 0.0);
    let s = m_t * m_t + z_t * z_t;
    let root = largest_cubic_root(rho_t, gamma, s);
    if root <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let shrink = root / (root + 2.0 * gamma);
    (root, m_t * shrink, z_t * shrink)
}
