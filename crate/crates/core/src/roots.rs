//! Scalar multiplier searches used by the subproblem kernels.

use crate::error::{Error, Result};

/// Largest multiplier tried while bracketing before giving up.
const BRACKET_LIMIT: f64 = 1e300;

/// Finds `x >= 0` with `g(x) = 0` for a nondecreasing `g` with `g(0) < 0`.
///
/// `g` returns the value and the derivative. The upper end of the bracket is
/// doubled from `max(hint, 1)` until `g` turns nonnegative; the root is then
/// refined by Newton steps that fall back to bisection whenever they leave
/// the bracket. Iteration stops once the bracket is narrower than
/// `tol * max(1, hi)` or `|g| <= value_tol`.
///
/// The result never lies on the negative side of the bracket by more than
/// `value_tol`, so a constraint `g(x) >= 0` holds to that tolerance.
pub fn increasing_root<F>(
    mut g: F,
    hint: f64,
    tol: f64,
    value_tol: f64,
    what: &'static str,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let start = if hint.is_finite() && hint > 0.0 {
        hint
    } else {
        1.0
    };
    let (g0, d0) = g(start);
    if !g0.is_finite() {
        return Err(Error::NonBracketing(what));
    }
    if g0.abs() <= value_tol {
        return Ok(start);
    }
    let (mut lo, mut hi) = (0.0, start);
    if g0 < 0.0 {
        lo = start;
        hi = 2.0 * start;
        loop {
            let v = g(hi).0;
            if v >= 0.0 {
                if v <= value_tol {
                    return Ok(hi);
                }
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_LIMIT || !v.is_finite() {
                return Err(Error::NonBracketing(what));
            }
        }
    }
    // Safeguarded Newton from the warm start; the bracket guards non-convex steps.
    let (mut x, mut gx, mut dgx) = (start, g0, d0);
    for _ in 0..200 {
        if gx.abs() <= value_tol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol * hi.max(1.0) {
            return Ok(hi);
        }
        let newton = if dgx > 0.0 { x - gx / dgx } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        (gx, dgx) = g(x);
    }
    Ok(hi)
}
