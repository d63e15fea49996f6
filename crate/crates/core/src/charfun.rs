//! The characteristic quasi-polynomial `s - lambda - gamma e^{-s tau}` and an
//! argument-principle counter for its zeros in the closed right half-plane.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentParams, ToleranceProfile};

const INITIAL_SAMPLES_PER_EDGE: usize = 64;
const MAX_SAMPLES_PER_EDGE: usize = 1 << 18;
const NEWTON_MAX_ITER: usize = 100;

/// `f(s) = s - lambda - gamma e^{-s tau}`; `1/f` is the (1,1) entry of the
/// component resolvent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicFn {
    pub lambda: Complex64,
    pub gamma: Complex64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCount {
    pub count: usize,
    pub contour: Rect,
    pub min_modulus_on_contour: f64,
}

impl CharacteristicFn {
    pub fn new(lambda: Complex64, gamma: Complex64, tau: f64) -> Self {
        Self { lambda, gamma, tau }
    }

    pub fn from_params(p: &ComponentParams) -> Self {
        Self::new(p.lambda, p.gamma, p.tau)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        s - self.lambda - self.gamma * (-s * self.tau).exp()
    }

    pub fn derivative(&self, s: Complex64) -> Complex64 {
        1.0 + self.tau * self.gamma * (-s * self.tau).exp()
    }

    /// Any zero with `Re s >= 0` satisfies `|s| <= |lambda| + |gamma|`.
    pub fn right_half_plane_bound(&self) -> f64 {
        self.lambda.norm() + self.gamma.norm()
    }
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// Total phase change of `f` along the boundary of `rect` with `n` samples per
/// edge: `(winding, largest single-step increment, min |f| sampled)`.
fn trace(f: &CharacteristicFn, rect: &Rect, n: usize) -> (f64, f64, f64) {
    let corners = rect.corners();
    let mut total = 0.0;
    let mut max_step = 0.0f64;
    let mut min_mod = f64::INFINITY;
    let mut prev = f.eval(corners[0]);
    min_mod = min_mod.min(prev.norm());
    for e in 0..4 {
        let (p0, p1) = (corners[e], corners[(e + 1) % 4]);
        for j in 1..=n {
            let s = p0 + (p1 - p0) * (j as f64 / n as f64);
            let v = f.eval(s);
            min_mod = min_mod.min(v.norm());
            let step = (v / prev).arg();
            max_step = max_step.max(step.abs());
            total += step;
            prev = v;
        }
    }
    (total / (2.0 * PI), max_step, min_mod)
}

/// Counts zeros of `f` inside `rect` by phase tracking along its boundary.
///
/// The sampling density doubles until two successive passes give the same
/// winding number and every step changes the phase by less than `pi/2`.
pub fn count_roots_in(f: &CharacteristicFn, rect: Rect, tol: &ToleranceProfile) -> Result<RootCount> {
    let mut n = INITIAL_SAMPLES_PER_EDGE;
    let mut previous: Option<i64> = None;
    loop {
        let (winding, max_step, min_mod) = trace(f, &rect, n);
        if min_mod < 10.0 * tol.root_tol {
            return Err(Error::ContourTooClose { min_modulus: min_mod });
        }
        let rounded = winding.round();
        if max_step < FRAC_PI_2 && (winding - rounded).abs() < 1e-6 {
            let w = rounded as i64;
            if previous == Some(w) {
                return Ok(RootCount {
                    count: w.max(0) as usize,
                    contour: rect,
                    min_modulus_on_contour: min_mod,
                });
            }
            previous = Some(w);
        } else {
            previous = None;
        }
        if n >= MAX_SAMPLES_PER_EDGE {
            // phase keeps jumping at full resolution: a zero sits on the contour
            return Err(Error::ContourTooClose { min_modulus: min_mod });
        }
        n *= 2;
    }
}

/// Number of zeros with `Re s >= 0`, counted over `[0, R] x [-R, R]` with
/// `R = |lambda| + |gamma| + 1`.
pub fn count_unstable_roots(f: &CharacteristicFn, tol: &ToleranceProfile) -> Result<RootCount> {
    count_unstable_roots_with_radius(f, f.right_half_plane_bound() + 1.0, tol)
}

/// As [`count_unstable_roots`] with an explicit box half-width.
pub fn count_unstable_roots_with_radius(
    f: &CharacteristicFn,
    radius: f64,
    tol: &ToleranceProfile,
) -> Result<RootCount> {
    let rect = Rect {
        re_min: 0.0,
        re_max: radius,
        im_min: -radius,
        im_max: radius,
    };
    count_roots_in(f, rect, tol)
}

/// Newton iteration from `seed` until `|f(s)| < root_tol`.
pub fn refine_root(f: &CharacteristicFn, seed: Complex64, tol: &ToleranceProfile) -> Result<Complex64> {
    let mut s = seed;
    for it in 0..NEWTON_MAX_ITER {
        let v = f.eval(s);
        if v.norm() < tol.root_tol {
            return Ok(s);
        }
        let d = f.derivative(s);
        if d.norm() < 1e-14 {
            return Err(Error::NoConvergence {
                iterations: it,
                message: format!("derivative vanishes at s = {s}"),
            });
        }
        s -= v / d;
        if !(s.re.is_finite() && s.im.is_finite()) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        message: format!("Newton iteration from {seed} did not converge"),
    })
}
