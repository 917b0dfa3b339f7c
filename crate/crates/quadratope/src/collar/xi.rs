//! The smoothing profile that exchanges linear and quadratic collar
//! parameters.
//!
//! `xi` is a strictly increasing reparametrization of `[0, delta)` that is
//! `t^2` near zero and the identity beyond `delta/2`. Pushing collar
//! coordinates through it turns the square-root singularity of quadratic
//! corner coordinates into something smooth, which is the whole trick behind
//! the corner-smoothing self-map.

use crate::error::{Error, Result};

/// Strictly monotone C-infinity profile: `t^2` below the blend window,
/// identity above it, smoothly interpolated in between.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingFunction {
    delta: f64,
    lo: f64,
    hi: f64,
}

/// The standard flat bump `exp(-1/s)` for `s > 0`, zero otherwise.
fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn bump_derivative(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp() / (s * s)
    } else {
        0.0
    }
}

/// Smooth step: 0 at 0, 1 at 1, flat at both ends.
fn step(s: f64) -> f64 {
    let a = bump(s);
    let b = bump(1.0 - s);
    a / (a + b)
}

fn step_derivative(s: f64) -> f64 {
    let a = bump(s);
    let b = bump(1.0 - s);
    let w = a + b;
    (bump_derivative(s) * b + a * bump_derivative(1.0 - s)) / (w * w)
}

const GRID: usize = 10_000;
const MAX_SUBDIVISIONS: u32 = 40;

impl SmoothingFunction {
    /// Build the profile for collar width `delta`. The blend window starts
    /// as `[delta/10, delta/2]`; if the monotonicity grid check fails (which
    /// happens for widths beyond 2, where `t^2` already overtakes `t`), the
    /// window is halved toward its lower end until the check passes or the
    /// subdivision budget runs out.
    pub fn new(delta: f64) -> Result<Self> {
        assert!(delta > 0.0 && delta.is_finite());
        let lo = delta / 10.0;
        let mut hi = delta / 2.0;
        for subdivisions in 0..=MAX_SUBDIVISIONS {
            let candidate = SmoothingFunction { delta, lo, hi };
            if candidate.monotone_on_grid() {
                return Ok(candidate);
            }
            if subdivisions == MAX_SUBDIVISIONS {
                break;
            }
            hi = lo + (hi - lo) / 2.0;
        }
        Err(Error::MonotonicityFailure {
            lo,
            hi,
            subdivisions: MAX_SUBDIVISIONS,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Above this threshold the profile is exactly the identity.
    pub fn identity_threshold(&self) -> f64 {
        self.hi
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.lo {
            t * t
        } else if t >= self.hi {
            t
        } else {
            let s = (t - self.lo) / (self.hi - self.lo);
            let beta = step(s);
            (1.0 - beta) * t * t + beta * t
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.lo {
            2.0 * t
        } else if t >= self.hi {
            1.0
        } else {
            let width = self.hi - self.lo;
            let s = (t - self.lo) / width;
            let beta = step(s);
            (1.0 - beta) * 2.0 * t + beta + step_derivative(s) / width * (t - t * t)
        }
    }

    /// Inverse by region dispatch: closed forms outside the blend window,
    /// monotone bisection plus a Newton polish inside it.
    pub fn inverse(&self, y: f64) -> f64 {
        assert!(y >= 0.0);
        if y <= self.eval(self.lo) {
            return y.sqrt();
        }
        if y >= self.hi {
            return y;
        }
        let (mut a, mut b) = (self.lo, self.hi);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if self.eval(mid) < y {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut t = 0.5 * (a + b);
        for _ in 0..4 {
            let d = self.derivative(t);
            if d > 0.0 {
                t -= (self.eval(t) - y) / d;
                t = t.clamp(a - (b - a), b + (b - a));
            }
        }
        t
    }

    /// Positive derivative at every grid point, and strictly increasing
    /// values between consecutive points. The value check matters once the
    /// blend window shrinks below the grid spacing: the derivative samples
    /// then miss the window entirely, but a decreasing jump across it still
    /// shows up in the values.
    fn monotone_on_grid(&self) -> bool {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=GRID {
            let t = self.delta * k as f64 / GRID as f64;
            if t > 0.0 && self.derivative(t) <= 0.0 {
                return false;
            }
            let v = self.eval(t);
            if v <= prev {
                return false;
            }
            prev = v;
        }
        true
    }
}
