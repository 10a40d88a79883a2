//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Grows `[start, hi]` geometrically until `f` changes sign, returning the
/// final `(lo, hi)` bracket. `f(start)` must be strictly negative.
pub fn grow_bracket<F>(
    func: &'static str,
    mut f: F,
    start: f64,
    limit: f64,
    factor: f64,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f0 = f(start)?;
    if f0 >= 0.0 {
        return Err(Error::Bracket {
            func,
            detail: format!("objective already non-negative at lower end {start:e}"),
        });
    }
    let mut hi = start;
    while hi < limit {
        let lo = hi;
        hi = (hi * factor).min(limit);
        if f(hi)? >= 0.0 {
            return Ok((lo, hi));
        }
    }
    Err(Error::Bracket {
        func,
        detail: format!("no sign change in [{start:e}, {limit:e}]"),
    })
}

/// Finds a root of `f` inside `[lo, hi]`, where `f(lo) < 0 <= f(hi)`.
///
/// Secant (Illinois) steps are taken while they shrink the bracket fast
/// enough; otherwise the step falls back to bisection. Stops when the bracket
/// width drops below `rel_tol` times the current estimate.
pub fn bisect_secant<F>(func: &'static str, mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            func,
            detail: format!("f({a:e}) and f({b:e}) have the same sign"),
        });
    }
    // Illinois bookkeeping: which end was retained on the previous step.
    let mut side = 0i8;
    for _ in 0..200 {
        let width = b - a;
        if width.abs() <= rel_tol * 0.5 * (a + b).abs() {
            return Ok(0.5 * (a + b));
        }
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > a.min(b) && x < a.max(b)) || !x.is_finite() {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        // Force a bisection when the secant step barely moved the bracket.
        if (b - a).abs() > 0.5 * width.abs() {
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
        }
    }
    Err(Error::Convergence {
        func,
        iterations: 200,
        detail: format!("bracket [{a:e}, {b:e}] did not shrink to tolerance"),
    })
}
