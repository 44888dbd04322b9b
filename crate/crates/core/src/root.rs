// SPDX-License-Identifier: Apache-2.0

//! Scalar root finding: safeguarded Newton–Raphson with a bisection fallback,
//! and plain bisection that returns its final bracket.

use crate::error::{Error, Result};

/// Iterations without contraction before the hybrid solver abandons Newton.
const STALL_LIMIT: usize = 5;
const MAX_BISECTIONS: usize = 2_000;

/// Final bracket of a bisection run. `lower` keeps the sign the function had
/// at the original lower end, `upper` the sign at the original upper end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn same_sign(a: f64, b: f64) -> bool {
    (a < 0.0) == (b < 0.0)
}

fn no_root(lower: f64, upper: f64, gap_lower: f64, gap_upper: f64) -> Error {
    Error::NoRoot {
        lower,
        upper,
        gap_lower,
        gap_upper,
    }
}

/// Bisects `f` on `[lower, upper]` until the bracket is narrower than
/// `rel_tol * max(1, |upper|)` or cannot shrink further in floating point.
///
/// The sign convention treats `0.0` as non-negative, so an exact zero at an
/// end counts as a sign change.
pub fn bisect<F>(f: F, lower: f64, upper: f64, rel_tol: f64) -> Result<Bracket>
where
    F: Fn(f64) -> f64,
{
    let (f_lo, f_hi) = (f(lower), f(upper));
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NonFinite(format!(
            "bisection endpoint values {f_lo}, {f_hi}"
        )));
    }
    if same_sign(f_lo, f_hi) {
        return Err(no_root(lower, upper, f_lo, f_hi));
    }
    let mut bracket = Bracket { lower, upper };
    for _ in 0..MAX_BISECTIONS {
        if bracket.width() <= rel_tol * bracket.upper.abs().max(1.0) {
            break;
        }
        let mid = bracket.midpoint();
        if mid <= bracket.lower || mid >= bracket.upper {
            break;
        }
        let f_mid = f(mid);
        if f_mid.is_nan() {
            return Err(Error::NonFinite(format!("f({mid}) is NaN")));
        }
        if same_sign(f_mid, f_lo) {
            bracket.lower = mid;
        } else {
            bracket.upper = mid;
        }
    }
    Ok(bracket)
}

/// Newton–Raphson on a sign-changing bracket with a central-difference
/// derivative. A Newton step that leaves the current bracket is replaced by a
/// bisection step; after [`STALL_LIMIT`] non-contracting steps, or once
/// `max_newton_iters` is used up, the solver continues by pure bisection.
///
/// Returns the first iterate with `|f(x)| <= tol(x)`.
pub fn newton_bisect<F, T>(
    f: F,
    lower: f64,
    upper: f64,
    initial: f64,
    tol: T,
    max_newton_iters: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lower, upper);
    let (fa, fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::NonFinite(format!(
            "endpoint values {fa}, {fb} on [{a}, {b}]"
        )));
    }
    if fa.abs() <= tol(a) {
        return Ok(a);
    }
    if fb.abs() <= tol(b) {
        return Ok(b);
    }
    if same_sign(fa, fb) {
        return Err(no_root(a, b, fa, fb));
    }
    let lower_negative = fa < 0.0;

    let mut x = if initial > a && initial < b {
        initial
    } else {
        0.5 * (a + b)
    };
    let mut previous_step = f64::INFINITY;
    let mut stalls = 0;

    for _ in 0..max_newton_iters {
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::NonFinite(format!("f({x}) is NaN")));
        }
        if fx.abs() <= tol(x) {
            return Ok(x);
        }
        if (fx < 0.0) == lower_negative {
            a = x;
        } else {
            b = x;
        }

        let h = (1e-6 * x.abs()).max(1e-6).min(0.5 * x.abs());
        let slope = (f(x + h) - f(x - h)) / (2.0 * h);
        let step = -fx / slope;
        let candidate = x + step;

        if !candidate.is_finite() || candidate <= a || candidate >= b {
            x = 0.5 * (a + b);
            continue;
        }
        if step.abs() >= previous_step {
            stalls += 1;
            if stalls >= STALL_LIMIT {
                break;
            }
        } else {
            stalls = 0;
        }
        previous_step = step.abs();
        x = candidate;
    }

    // Pure bisection on whatever bracket Newton left behind.
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (a + b);
        let f_mid = f(mid);
        if f_mid.is_nan() {
            return Err(Error::NonFinite(format!("f({mid}) is NaN")));
        }
        if f_mid.abs() <= tol(mid) {
            return Ok(mid);
        }
        if mid <= a || mid >= b || iterations >= MAX_BISECTIONS {
            return Err(Error::NoConvergence {
                iterations: max_newton_iters + iterations,
            });
        }
        if (f_mid < 0.0) == lower_negative {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
}
