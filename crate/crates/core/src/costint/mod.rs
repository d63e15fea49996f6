//! The cost integral
//!
//! ```text
//! J = (1/2pi) int_R dw / |i w - lambda - gamma e^{-i w tau}|^2
//! ```
//!
//! evaluated three ways: branch closed forms, a residue assembly at the two
//! poles of `(s + conj(lambda))(s - lambda) + |gamma|^2`, and adaptive
//! quadrature of the defining integral.

pub mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentParams, ToleranceProfile};
use crate::region::{contains, RegionParams};

const MAX_PANELS: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostBranch {
    /// `|gamma| < |a|`
    Ja,
    /// `|gamma| = |a|`
    Je,
    /// `|gamma| > |a|`
    Jgamma,
    /// `lambda = 0`
    J0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMethod {
    ClosedForm,
    Residue,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostResult {
    pub value: f64,
    pub branch: CostBranch,
    pub method: CostMethod,
    /// Error estimate; zero for the closed form and the residue route.
    pub est_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolePair {
    #[serde(with = "crate::model::complex_serde")]
    pub z1: Complex64,
    #[serde(with = "crate::model::complex_serde")]
    pub z2: Complex64,
    pub double_root: bool,
}

/// Branch selected by comparing `|gamma|` with `|Re lambda|`, relative to
/// `max(|a|, 1)`.
pub fn classify_branch(p: &ComponentParams, tol: &ToleranceProfile) -> CostBranch {
    let a = p.lambda.re.abs();
    let g = p.gamma.norm();
    if (g - a).abs() <= tol.branch_tol * a.max(1.0) {
        CostBranch::Je
    } else if g < a {
        CostBranch::Ja
    } else {
        CostBranch::Jgamma
    }
}

/// Validates `p` and checks `gamma e^{-i b tau}` against `Lambda_{tau,a}`.
/// Returns `(a, eta)`.
fn admissible(p: &ComponentParams, tol: &ToleranceProfile) -> Result<(f64, Complex64)> {
    p.validate()?;
    let (a, eta) = p.reduced();
    let rp = RegionParams::new(p.tau, a)?;
    let v = contains(&rp, eta, tol);
    if !v.member {
        return Err(Error::NotInRegion(format!(
            "gamma e^(-i b tau) = {eta} is not in Lambda_(tau={}, a={a}) (slack {:e})",
            p.tau, v.distance_hint
        )));
    }
    Ok((a, eta))
}

fn checked(value: f64, den: f64, tol: &ToleranceProfile) -> Result<f64> {
    if den.abs() < 1e3 * tol.root_tol || !value.is_finite() {
        return Err(Error::DenominatorNearZero { value: den });
    }
    Ok(value)
}

fn j_e_value(a: f64, eta: Complex64, tau: f64, tol: &ToleranceProfile) -> Result<f64> {
    let den = eta.re + a;
    checked(0.5 * (a * tau - 1.0) / den, den, tol)
}

/// Closed-form value for the branch picked by [`classify_branch`].
pub fn j_closed(p: &ComponentParams, tol: &ToleranceProfile) -> Result<CostResult> {
    let (a, eta) = admissible(p, tol)?;
    let tau = p.tau;
    let g = p.gamma.norm();
    let branch = classify_branch(p, tol);
    let value = match branch {
        CostBranch::Je => j_e_value(a, eta, tau, tol)?,
        CostBranch::Ja => {
            // numerator and denominator divided by e^{r tau}
            let r = ((a.abs() - g) * (a.abs() + g)).sqrt();
            let e = (-2.0 * r * tau).exp();
            let em1 = (-2.0 * r * tau).exp_m1();
            let num = -a * em1 - r * (1.0 + e);
            let den = 2.0 * eta.re * (-r * tau).exp() + a * (1.0 + e) + r * em1;
            checked(num / (2.0 * r * den), den, tol)?
        }
        CostBranch::Jgamma | CostBranch::J0 => {
            let w = ((g - a.abs()) * (g + a.abs())).sqrt();
            let (s, c) = (w * tau).sin_cos();
            let den = eta.re + a * c + w * s;
            checked((a * s - w * c) / (2.0 * w * den), den, tol)?
        }
    };
    Ok(CostResult {
        value,
        branch,
        method: CostMethod::ClosedForm,
        est_error: 0.0,
    })
}

/// `J` for `lambda = 0`: `-cos(|gamma| tau) / (2 (Re gamma + |gamma| sin(|gamma| tau)))`.
pub fn j_zero(gamma: Complex64, tau: f64, tol: &ToleranceProfile) -> Result<CostResult> {
    let p = ComponentParams::new(Complex64::new(0.0, 0.0), gamma, Complex64::new(1.0, 0.0), tau);
    admissible(&p, tol)?;
    let g = gamma.norm();
    let (s, c) = (g * tau).sin_cos();
    let den = gamma.re + g * s;
    let value = checked(-c / (2.0 * den), den, tol)?;
    Ok(CostResult {
        value,
        branch: CostBranch::J0,
        method: CostMethod::ClosedForm,
        est_error: 0.0,
    })
}

/// Roots of `(s + conj(lambda))(s - lambda) + |gamma|^2`.
///
/// `|gamma| < |a|`: `z1,2 = -/+ r + i b` with `r = sqrt(a^2 - |gamma|^2)`;
/// `|gamma| > |a|`: `z1,2 = i b +/- i w` with `w = sqrt(|gamma|^2 - a^2)`;
/// otherwise the double root `i b`.
pub fn poles(p: &ComponentParams, tol: &ToleranceProfile) -> PolePair {
    let (a, b) = (p.lambda.re, p.lambda.im);
    let g = p.gamma.norm();
    match classify_branch(p, tol) {
        CostBranch::Je => PolePair {
            z1: Complex64::new(0.0, b),
            z2: Complex64::new(0.0, b),
            double_root: true,
        },
        CostBranch::Ja => {
            let r = ((a.abs() - g) * (a.abs() + g)).sqrt();
            PolePair {
                z1: Complex64::new(-r, b),
                z2: Complex64::new(r, b),
                double_root: false,
            }
        }
        CostBranch::Jgamma | CostBranch::J0 => {
            let w = ((g - a.abs()) * (g + a.abs())).sqrt();
            PolePair {
                z1: Complex64::new(0.0, b + w),
                z2: Complex64::new(0.0, b - w),
                double_root: false,
            }
        }
    }
}

/// Residue assembly
/// `J = [(lambda - z1) E1(z1) + (z2 - lambda) E1(z2)] / (z2 - z1)` with
/// `E1(s) = 1 / (s - lambda - gamma e^{-s tau})`.
pub fn j_residue(p: &ComponentParams, tol: &ToleranceProfile) -> Result<CostResult> {
    let (a, eta) = admissible(p, tol)?;
    let tau = p.tau;
    let branch = classify_branch(p, tol);
    let pp = poles(p, tol);
    if pp.double_root {
        return Ok(CostResult {
            value: j_e_value(a, eta, tau, tol)?,
            branch,
            method: CostMethod::Residue,
            est_error: 0.0,
        });
    }
    let gap = (pp.z2 - pp.z1).norm();
    if gap <= 1e3 * tol.root_tol {
        return Err(Error::NearDegenerate { gap });
    }
    let value = match branch {
        CostBranch::Ja => {
            // Work in the shifted frame (lambda -> a, gamma -> eta), where
            // z1 = -r, z2 = r. (a - z1) E1(z1) is rewritten with
            // q = conj(eta) e^{-r tau} / (r - a) so that eta -> 0 and
            // large r tau stay finite.
            let g = p.gamma.norm();
            let r = ((a.abs() - g) * (a.abs() + g)).sqrt();
            let shrink = (-r * tau).exp();
            let q = eta.conj() * shrink / (r - a);
            let t1 = -q / (q - 1.0);
            let t2 = (r - a) / (r - a - eta * shrink);
            (t1 + t2).re / (2.0 * r)
        }
        _ => {
            let lambda = p.lambda;
            let e1 = |s: Complex64| 1.0 / (s - lambda - p.gamma * (-s * tau).exp());
            let (z1, z2) = (pp.z1, pp.z2);
            let j = ((lambda - z1) * e1(z1) + (z2 - lambda) * e1(z2)) / (z2 - z1);
            if !j.re.is_finite() {
                return Err(Error::DenominatorNearZero { value: 0.0 });
            }
            j.re
        }
    };
    Ok(CostResult {
        value,
        branch,
        method: CostMethod::Residue,
        est_error: 0.0,
    })
}

/// Adaptive Gauss-Kronrod quadrature of the defining integral to absolute
/// accuracy `quad_tol`.
///
/// The Lorentzian `1/((w - b)^2 + c^2)`, `c^2 = a^2 + |gamma|^2`, is
/// subtracted and its integral over the real line added back exactly. The truncation `X` is chosen
/// so that the remainder's tail is at most `quad_tol/2`, using
/// `|(w-b)^2 + c^2 - |i w - lambda - gamma e^{-i w tau}|^2| <= 2|gamma|(|w - b| + |a|)`
/// and `|i w - lambda - ...| >= |w - b| - |a| - |gamma|`.
pub fn j_quadrature(p: &ComponentParams, quad_tol: f64, tol: &ToleranceProfile) -> Result<CostResult> {
    if !(quad_tol.is_finite() && quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    admissible(p, tol)?;
    let branch = if p.lambda == Complex64::new(0.0, 0.0) {
        CostBranch::J0
    } else {
        classify_branch(p, tol)
    };
    let (lambda, gamma, tau) = (p.lambda, p.gamma, p.tau);
    let (a, b) = (lambda.re, lambda.im);
    let g = gamma.norm();
    let c2 = a * a + g * g;
    let c = c2.sqrt();
    let m = a.abs() + g;

    let tail = |x: f64| {
        let shrink = 1.0 - m / x;
        (2.0 * g / (x * x) + 4.0 * a.abs() * g / (3.0 * x * x * x)) / (shrink * shrink) / (2.0 * PI)
    };
    let mut x = 2.0 * m + 1.0;
    while tail(x) > 0.5 * quad_tol {
        x *= 2.0;
    }
    // shrink back towards the smallest admissible X
    let (mut lo, mut hi) = (0.5 * x, x);
    if lo > 2.0 * m + 1.0 {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > 0.5 * quad_tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = hi;
    }

    let integrand = |w: f64| {
        let v = Complex64::new(0.0, w) - lambda - gamma * Complex64::from_polar(1.0, -w * tau);
        let nu = w - b;
        (1.0 / v.norm_sqr() - 1.0 / (nu * nu + c2)) / (2.0 * PI)
    };
    let width = (PI / tau).min(2.0 * x / 64.0);
    let panels = ((2.0 * x / width).ceil() as usize).max(1);
    let res = quadrature::integrate(
        integrand,
        b - x,
        b + x,
        panels,
        0.5 * quad_tol,
        MAX_PANELS.max(4 * panels),
    );
    if !res.converged {
        return Err(Error::ToleranceNotMet {
            estimate: res.error,
            tol: quad_tol,
        });
    }
    // (1/2pi) int_R dw / ((w - b)^2 + c^2)
    let reference = 0.5 / c;
    Ok(CostResult {
        value: res.value + reference,
        branch,
        method: CostMethod::Quadrature,
        est_error: res.error + tail(x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn cp(lambda: Complex64, gamma: Complex64, tau: f64) -> ComponentParams {
        ComponentParams::new(lambda, gamma, Complex64::new(1.0, 0.0), tau)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn no_delay_term() {
        let p = ComponentParams::real(-1.0, 0.0, 1.0, 1.0);
        let j = j_closed(&p, &tol()).unwrap();
        assert_eq!(j.branch, CostBranch::Ja);
        assert!((j.value - 0.5).abs() < 1e-15);
        assert!((j_residue(&p, &tol()).unwrap().value - 0.5).abs() < 1e-15);
        let q = j_quadrature(&p, 1e-9, &tol()).unwrap();
        assert!((q.value - 0.5).abs() < 1e-9);
        assert!(q.est_error <= 1e-9);
    }

    #[test]
    fn small_delay_gain() {
        let p = ComponentParams::real(-1.0, 0.3, 1.0, 1.0);
        let j = j_closed(&p, &tol()).unwrap().value;
        // dense Gauss-Legendre evaluation of the defining integral (reference-subtracted)
        assert!((j - 0.590_041_048_544_156).abs() < 1e-12, "{j}");
        assert!((j_residue(&p, &tol()).unwrap().value - j).abs() < 1e-10);
        assert!((j_quadrature(&p, 1e-9, &tol()).unwrap().value - j).abs() < 1e-8);
    }

    #[test]
    fn double_root_branch() {
        let p = ComponentParams::real(-1.0, -1.0, 1.0, 1.0);
        let j = j_closed(&p, &tol()).unwrap();
        assert_eq!(j.branch, CostBranch::Je);
        assert!((j.value - 0.5).abs() < 1e-15);
        let r = j_residue(&p, &tol()).unwrap();
        assert_eq!(r.value, j.value);
        let q = j_quadrature(&p, 1e-9, &tol()).unwrap();
        assert!((q.value - 0.5).abs() < 1e-8);
        // gamma = +1 puts the real root at s = 0
        let p = ComponentParams::real(-1.0, 1.0, 1.0, 1.0);
        assert!(matches!(j_closed(&p, &tol()), Err(Error::NotInRegion(_))));
    }

    #[test]
    fn zero_lambda() {
        let j = j_zero(c(-1.0, 0.0), 1.0, &tol()).unwrap().value;
        let expected = -(1.0f64).cos() / (2.0 * (-1.0 + (1.0f64).sin()));
        assert!((j - expected).abs() < 1e-15);
        assert!((j - 1.7041).abs() < 1e-4);
        let p = ComponentParams::real(0.0, -1.0, 1.0, 1.0);
        assert!((j_quadrature(&p, 1e-9, &tol()).unwrap().value - j).abs() < 1e-7);
        assert!((j_closed(&p, &tol()).unwrap().value - j).abs() < 1e-13);

        let j = j_zero(c(-0.1, 0.0), 1.0, &tol()).unwrap().value;
        assert!((j - 5.526_777_952_429_53).abs() < 1e-10, "{j}");
        assert!(matches!(
            j_zero(c(-2.0, 0.0), 1.0, &tol()),
            Err(Error::NotInRegion(_))
        ));
        let p = ComponentParams::real(0.0, -1.6, 1.0, 1.0);
        assert!(matches!(
            j_quadrature(&p, 1e-9, &tol()),
            Err(Error::NotInRegion(_))
        ));
    }

    #[test]
    fn pole_examples() {
        let t = tol();
        let pp = poles(&ComponentParams::real(-1.0, 0.3, 1.0, 1.0), &t);
        assert!((pp.z1 - c(-(0.91f64).sqrt(), 0.0)).norm() < 1e-15);
        assert!((pp.z2 - c((0.91f64).sqrt(), 0.0)).norm() < 1e-15);
        assert!(!pp.double_root);

        let pp = poles(&ComponentParams::real(-1.0, 1.0, 1.0, 1.0), &t);
        assert!(pp.double_root);
        assert_eq!(pp.z1, c(0.0, 0.0));
        assert_eq!(pp.z2, c(0.0, 0.0));

        let lambda = c(-1.0, 2.0);
        let pp = poles(&cp(lambda, c(3.0, 0.0), 1.0), &t);
        let s8 = (8.0f64).sqrt();
        assert!((pp.z1 - c(0.0, 2.0 + s8)).norm() < 1e-15);
        assert!((pp.z2 - c(0.0, 2.0 - s8)).norm() < 1e-15);
        for z in [pp.z1, pp.z2] {
            let res = (z + lambda.conj()) * (z - lambda) + 9.0;
            assert!(res.norm() < t.root_tol, "{res}");
        }
    }

    #[test]
    fn complex_coefficients() {
        let p = cp(c(-1.0, 1.0), c(0.0, 0.3), 1.0);
        let r = j_residue(&p, &tol()).unwrap().value;
        let q = j_quadrature(&p, 1e-9, &tol()).unwrap().value;
        assert!((r - q).abs() < 1e-9, "{r} vs {q}");
        assert!((r - 0.577_800_768_288_746).abs() < 1e-12);
        assert!((j_closed(&p, &tol()).unwrap().value - r).abs() < 1e-12);
    }

    #[test]
    fn gamma_zero_reduction() {
        for i in 0..=99 {
            let a = -10.0 + 9.9 * i as f64 / 99.0;
            let p = ComponentParams::real(a, 0.0, 1.0, 1.3);
            let j = j_closed(&p, &tol()).unwrap().value;
            let exact = 0.5 / a.abs();
            assert!(((j - exact) / exact).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn branch_continuity() {
        let t = tol();
        for (a, phase, tau) in [(-1.0, 2.5, 1.0), (-3.0, 3.0, 0.5), (-0.4, PI, 2.0)] {
            let dir = Complex64::from_polar(1.0, phase);
            let je = j_closed(&cp(c(a, 0.0), dir * a.abs(), tau), &t).unwrap();
            assert_eq!(je.branch, CostBranch::Je);
            let delta = 10.0 * t.branch_tol * a.abs().max(1.0);
            for g in [a.abs() - delta, a.abs() + delta] {
                let j = j_closed(&cp(c(a, 0.0), dir * g, tau), &t).unwrap();
                assert_ne!(j.branch, CostBranch::Je);
                assert!(((j.value - je.value) / je.value).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn large_r_tau_does_not_overflow() {
        let p = ComponentParams::real(-500.0, 100.0, 1.0, 3.0);
        let j = j_closed(&p, &tol()).unwrap().value;
        assert!(j.is_finite() && j > 0.0);
        assert!((j_residue(&p, &tol()).unwrap().value - j).abs() < 1e-12);
    }
}
