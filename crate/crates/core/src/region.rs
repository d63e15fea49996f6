//! The sets `Lambda_{tau,a}`: the values `eta = gamma e^{-i b tau}` for which
//! every root of `s - a - eta e^{-s tau}` lies in the open left half-plane.
//!
//! All three branches share the shape
//!
//! ```text
//! |Arg eta| > theta(|eta|)
//! ```
//!
//! with `x = sqrt(|eta|^2 - a^2)` and the critical angle
//!
//! | branch      | theta(r)                    | radial range      |
//! |-------------|-----------------------------|-------------------|
//! | `a < 0`     | `tau x + atan(x / |a|)`     | `[|a|, |eta_pi|]` |
//! | `a = 0`     | `tau r + pi/2`              | `(0, pi/(2 tau))` |
//! | `0 < a`     | `tau x - atan(x / a) + pi`  | `[a, |eta_pi|]`   |
//!
//! plus `Re eta + a < 0`, `|eta| < |eta_pi|`, and for `a < 0` the union with
//! the open disc of radius `|a|`. `Arg` is the principal value in `(-pi, pi]`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ToleranceProfile;

const BISECTION_MAX_ITER: usize = 200;

/// Delay and real part of the generator eigenvalue defining one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    tau: f64,
    a: f64,
    /// `|eta_pi|` (or `pi/(2 tau)` when `a = 0`); `None` when the region is
    /// empty (`a = 1/tau`).
    outer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionBranch {
    NegA,
    ZeroA,
    PosA,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub member: bool,
    pub branch: RegionBranch,
    /// Member through the disc `|eta| < |a|` (only for `a < 0`).
    pub via_disc: bool,
    /// Signed slack of the binding inequality: positive inside, non-positive
    /// outside. Mixes radial and angular units, so use it as a band filter
    /// rather than a metric distance.
    pub distance_hint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub points: Vec<Complex64>,
    pub closed: bool,
}

impl RegionParams {
    pub fn new(tau: f64, a: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::DelayNonPositive(tau));
        }
        if !a.is_finite() {
            return Err(Error::InvalidArgument(format!("a must be finite, got {a}")));
        }
        if a > 1.0 / tau {
            return Err(Error::EigenvalueOutOfRange { re: a, limit: 1.0 / tau });
        }
        let outer = if a == 0.0 {
            Some(PI / (2.0 * tau))
        } else {
            solve_eta_pi(tau, a)
        };
        Ok(Self { tau, a, outer })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn branch(&self) -> RegionBranch {
        if self.a < 0.0 {
            RegionBranch::NegA
        } else if self.a == 0.0 {
            RegionBranch::ZeroA
        } else {
            RegionBranch::PosA
        }
    }

    /// Outer radius of the region: `|eta_pi|`, or `pi/(2 tau)` for `a = 0`.
    pub fn outer_radius(&self) -> Option<f64> {
        self.outer
    }

    /// Smallest modulus on the non-disc part of the region.
    pub fn inner_radius(&self) -> f64 {
        self.a.abs()
    }

    /// Critical angle `theta(r)`; for `a < 0` and `r < |a|` it is continued
    /// by zero (the disc), for `a > 0` and `r < a` it is undefined.
    pub fn critical_angle(&self, r: f64) -> Option<f64> {
        let (tau, a) = (self.tau, self.a);
        match self.branch() {
            RegionBranch::ZeroA => Some(tau * r + FRAC_PI_2),
            RegionBranch::NegA => {
                let x = radial(r, a);
                Some(tau * x + (x / -a).atan())
            }
            RegionBranch::PosA => {
                if r < a {
                    None
                } else {
                    let x = radial(r, a);
                    Some(tau * x - (x / a).atan() + PI)
                }
            }
        }
    }
}

fn radial(r: f64, a: f64) -> f64 {
    ((r - a.abs()) * (r + a.abs())).max(0.0).sqrt()
}

/// Bisection for a root of an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solve_eta_pi(tau: f64, a: f64) -> Option<f64> {
    let x = if a < 0.0 {
        // tau x + atan(x/|a|) increases from 0 and exceeds pi at x = pi/tau
        let h = |x: f64| tau * x + (x / -a).atan() - PI;
        bisect(0.0, PI / tau, h)
    } else {
        // g(x) = tau x - atan(x/a): convex, g(0) = 0, g'(0) = tau - 1/a
        if a * tau >= 1.0 {
            return None;
        }
        let g = |x: f64| tau * x - (x / a).atan();
        let x_min = (a / tau - a * a).sqrt();
        bisect(x_min, FRAC_PI_2 / tau + 1.0, g)
    };
    Some(x.hypot(a))
}

/// `|eta_pi|` for `a != 0`.
pub fn eta_pi(rp: &RegionParams) -> Result<f64> {
    if rp.a == 0.0 {
        return Err(Error::InvalidArgument(
            "eta_pi is defined for a != 0; the a = 0 radius is pi/(2 tau)".into(),
        ));
    }
    rp.outer.ok_or_else(|| {
        Error::NoRoot(format!(
            "a = {} equals 1/tau: tau x - atan(x/a) > 0 for every x > 0, the region is empty",
            rp.a
        ))
    })
}

/// Principal argument in `(-pi, pi]`.
pub fn principal_arg(eta: Complex64) -> f64 {
    let t = eta.im.atan2(eta.re);
    if t == -PI {
        PI
    } else {
        t
    }
}

/// Membership of `eta` in `Lambda_{tau,a}`. Points within `root_tol` of the
/// boundary are classified as non-members.
pub fn contains(rp: &RegionParams, eta: Complex64, tol: &ToleranceProfile) -> MembershipVerdict {
    let r = eta.norm();
    let angle = principal_arg(eta).abs();
    let a = rp.a;
    let branch = rp.branch();
    let outer_slack = rp.outer.map_or(f64::NEG_INFINITY, |o| o - r);

    let (hint, disc_slack) = match branch {
        RegionBranch::NegA => {
            let disc = -a - r;
            let theta = rp.critical_angle(r).unwrap_or(0.0);
            let rest = (-(eta.re + a)).min(outer_slack).min(angle - theta);
            (disc.max(rest), Some(disc))
        }
        RegionBranch::ZeroA => {
            let theta = rp.critical_angle(r).unwrap_or(FRAC_PI_2);
            let hint = r.min(-eta.re).min(outer_slack).min(angle - theta);
            (hint, None)
        }
        RegionBranch::PosA => {
            let half_plane = -(eta.re + a);
            // |Re eta| > a forces |eta| > a, so theta is defined past this check
            let hint = if half_plane <= 0.0 {
                half_plane
            } else {
                let theta = rp.critical_angle(r).unwrap_or(PI);
                half_plane.min(outer_slack).min(angle - theta)
            };
            (hint, None)
        }
    };
    let member = hint > tol.root_tol;
    MembershipVerdict {
        member,
        branch,
        via_disc: member && disc_slack.is_some_and(|d| d > tol.root_tol),
        distance_hint: hint,
    }
}

/// `| |Arg eta| - theta(|eta|) |`: how far a point is from the angular
/// boundary equation of its branch.
pub fn boundary_residual(rp: &RegionParams, eta: Complex64) -> f64 {
    let theta = rp.critical_angle(eta.norm()).unwrap_or(f64::NAN);
    (principal_arg(eta).abs() - theta).abs()
}

/// Samples the outer boundary as a closed, conjugate-symmetric polyline.
///
/// `n_points` radii are taken uniformly between the inner limit of the branch
/// and the outer radius; each contributes `r e^{i theta(r)}` to the upper arc
/// and its conjugate to the lower arc (points on the real axis only once).
pub fn boundary(rp: &RegionParams, n_points: usize) -> Result<RegionBoundary> {
    if n_points < 16 {
        return Err(Error::InvalidArgument(format!(
            "n_points must be at least 16, got {n_points}"
        )));
    }
    let outer = rp.outer.ok_or_else(|| {
        Error::DegenerateRegion(format!("Lambda_{{tau,a}} is empty for a = {} = 1/tau", rp.a))
    })?;
    let inner = rp.inner_radius();
    let first = usize::from(rp.branch() == RegionBranch::ZeroA);
    let mut upper = Vec::with_capacity(n_points);
    for j in first..n_points {
        let r = if j == n_points - 1 {
            outer
        } else {
            inner + (outer - inner) * j as f64 / (n_points - 1) as f64
        };
        let Some(theta) = rp.critical_angle(r) else { continue };
        if (0.0..=PI).contains(&theta) {
            upper.push(Complex64::from_polar(r, theta));
        }
    }
    if upper.is_empty() {
        return Err(Error::DegenerateRegion(
            "angular condition infeasible at every sampled radius".into(),
        ));
    }
    let on_axis = |z: &Complex64| z.im.abs() <= 1e-12 * z.norm().max(1.0);
    let lower: Vec<Complex64> = upper
        .iter()
        .rev()
        .filter(|z| !on_axis(z))
        .map(|z| z.conj())
        .collect();
    let mut points = upper;
    points.extend(lower);
    Ok(RegionBoundary { points, closed: true })
}
