//! Admissibility certificates for single components and truncated systems.
//!
//! A component is infinite-time admissible with
//! `||Phi_inf(u)||^2 <= (1 + tau) |b|^2 J ||u||^2`, and the whole system is
//! admissible when `C_k = |b_k|^2 J_k` is summable. Summability past the
//! truncation is certified with a ratio test on `C_K..C_N`.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costint::{j_closed, j_quadrature, CostBranch};
use crate::error::{Error, Result};
use crate::model::{complex_serde, ComponentParams, DiagonalDelaySystem, Preset, SequenceRule, ToleranceProfile};
use crate::region::{contains, RegionParams};

/// Default cap on the empirical ratio used for the tail bound.
pub const DEFAULT_Q_CAP: f64 = 0.95;
/// Fraction of components re-checked by quadrature in paranoid mode.
pub const PARANOID_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentCertificate {
    pub k: usize,
    #[serde(with = "complex_serde")]
    pub lambda: Complex64,
    #[serde(with = "complex_serde")]
    pub gamma: Complex64,
    #[serde(with = "complex_serde")]
    pub b: Complex64,
    pub tau: f64,
    pub member: bool,
    pub distance_hint: f64,
    pub branch: Option<CostBranch>,
    #[serde(rename = "J_k")]
    pub j: Option<f64>,
    #[serde(rename = "C_k")]
    pub c: Option<f64>,
    /// `(1 + tau) C_k`
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedAdmissible,
    Inconclusive,
    HypothesisViolated(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParanoidSummary {
    pub seed: u64,
    pub checked: Vec<usize>,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub q_cap: f64,
    pub tau: f64,
    pub partial_sum: f64,
    pub tail_bound: Option<f64>,
    pub empirical_ratio: Option<f64>,
    pub verdict: Verdict,
    pub global_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paranoid: Option<ParanoidSummary>,
    pub certificates: Vec<ComponentCertificate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// `C_N / C_{N-1}`
    pub empirical: f64,
    /// `|b_N|^2/|b_{N-1}|^2 * |a_{N-1}|/|a_N|`, when `a_N != 0`.
    pub analytic: Option<f64>,
}

fn certificate(k: usize, p: &ComponentParams, tol: &ToleranceProfile, direct: bool) -> Result<ComponentCertificate> {
    let p = p.validate()?;
    let (a, eta) = p.reduced();
    let rp = RegionParams::new(p.tau, a)?;
    let v = contains(&rp, eta, tol);
    let mut cert = ComponentCertificate {
        k,
        lambda: p.lambda,
        gamma: p.gamma,
        b: p.b,
        tau: p.tau,
        member: v.member,
        distance_hint: v.distance_hint,
        branch: None,
        j: None,
        c: None,
        bound: None,
    };
    if !v.member {
        return Ok(cert);
    }
    let (j, branch) = if direct {
        // C_k = |b_k|^2 (-cos(|mu| tau)) / (2 (Re mu + |mu| sin(|mu| tau))), mu = gamma
        let g = p.gamma.norm();
        let (s, c) = (g * p.tau).sin_cos();
        let den = p.gamma.re + g * s;
        if den.abs() < 1e3 * tol.root_tol {
            return Err(Error::DenominatorNearZero { value: den });
        }
        (-c / (2.0 * den), CostBranch::J0)
    } else {
        let r = j_closed(&p, tol)?;
        (r.value, r.branch)
    };
    let c = p.b.norm_sqr() * j;
    cert.branch = Some(branch);
    cert.j = Some(j);
    cert.c = Some(c);
    cert.bound = Some((1.0 + p.tau) * c);
    Ok(cert)
}

/// Certificate for one component; `member = false` and no bound when
/// `gamma e^{-i b tau}` is outside `Lambda_{tau,a}`.
pub fn component_bound(p: &ComponentParams, tol: &ToleranceProfile) -> Result<ComponentCertificate> {
    certificate(1, p, tol, false)
}

/// Coefficient of the direct-delay system `z' = A z(t - tau) + B u` for one
/// eigenvalue `lambda_k` of `A`: the component `(0, lambda_k)`.
pub fn direct_component_coeff(
    lambda_k: Complex64,
    b_k: Complex64,
    tau: f64,
    tol: &ToleranceProfile,
) -> Result<ComponentCertificate> {
    let p = ComponentParams::new(Complex64::new(0.0, 0.0), lambda_k, b_k, tau);
    let cert = certificate(1, &p, tol, true)?;
    if !cert.member {
        return Err(Error::NotInRegion(format!(
            "lambda_k = {lambda_k} is not in Lambda_(tau={tau}, 0)"
        )));
    }
    Ok(cert)
}

/// Heat-equation system: `lambda_k = -k^2`.
pub fn heat_preset(gamma: SequenceRule, b: SequenceRule, tau: f64, n: usize) -> Result<DiagonalDelaySystem> {
    DiagonalDelaySystem::heat(gamma, b, tau, n)
}

/// Certificates for `k = 1..=n`, computed in parallel, ordered by `k`.
pub fn certificates(sys: &DiagonalDelaySystem, n: usize, tol: &ToleranceProfile) -> Result<Vec<ComponentCertificate>> {
    if n == 0 || n > sys.n() {
        return Err(Error::Index(format!(
            "truncation N = {n} outside 1..={}",
            sys.n()
        )));
    }
    let direct = sys.preset() == Preset::Direct;
    (1..=n)
        .into_par_iter()
        .map(|k| certificate(k, &sys.component(k)?, tol, direct))
        .collect()
}

fn check_indices(sys: &DiagonalDelaySystem, n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::Index(format!("need 1 <= K < N, got K = {k}, N = {n}")));
    }
    if n > sys.n() {
        return Err(Error::Index(format!(
            "N = {n} exceeds the system truncation {}",
            sys.n()
        )));
    }
    Ok(())
}

fn ratio(next: f64, cur: f64) -> f64 {
    if next == 0.0 {
        0.0
    } else {
        next / cur
    }
}

/// Whole-system check on `k <= n` with the ratio test over `C_K..C_N`.
pub fn system_check(
    sys: &DiagonalDelaySystem,
    n: usize,
    k: usize,
    q_cap: f64,
    tol: &ToleranceProfile,
) -> Result<SystemReport> {
    check_indices(sys, n, k)?;
    if !(q_cap > 0.0 && q_cap < 1.0) {
        return Err(Error::InvalidArgument(format!("q_cap must lie in (0, 1), got {q_cap}")));
    }
    let certs = certificates(sys, n, tol)?;
    let partial_sum: f64 = certs.iter().filter_map(|c| c.c).sum();
    let mut report = SystemReport {
        n,
        k,
        q_cap,
        tau: sys.tau(),
        partial_sum,
        tail_bound: None,
        empirical_ratio: None,
        verdict: Verdict::Inconclusive,
        global_bound: None,
        paranoid: None,
        certificates: Vec::new(),
    };
    if let Some(bad) = certs.iter().find(|c| !c.member) {
        report.verdict = Verdict::HypothesisViolated(bad.k);
        report.certificates = certs;
        return Ok(report);
    }
    let c: Vec<f64> = certs.iter().map(|c| c.c.unwrap_or(0.0)).collect();
    let q = (k..n)
        .map(|i| ratio(c[i], c[i - 1]))
        .fold(0.0f64, |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) });
    report.empirical_ratio = Some(q);
    if q <= q_cap {
        let tail = c[n - 1] * q / (1.0 - q);
        report.tail_bound = Some(tail);
        report.global_bound = Some((1.0 + sys.tau()) * (partial_sum + tail));
        report.verdict = Verdict::CertifiedAdmissible;
    }
    report.certificates = certs;
    Ok(report)
}

/// [`system_check`] followed by a quadrature re-check of a random 5% of
/// the components (at least one), drawn from a seeded generator.
pub fn system_check_paranoid(
    sys: &DiagonalDelaySystem,
    n: usize,
    k: usize,
    q_cap: f64,
    seed: u64,
    tol: &ToleranceProfile,
) -> Result<SystemReport> {
    let mut report = system_check(sys, n, k, q_cap, tol)?;
    let members: Vec<&ComponentCertificate> = report.certificates.iter().filter(|c| c.member).collect();
    let count = ((members.len() as f64 * PARANOID_FRACTION).ceil() as usize).min(members.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<&ComponentCertificate> =
        sample(&mut rng, members.len(), count).into_iter().map(|i| members[i]).collect();
    picked.sort_by_key(|c| c.k);

    let diffs = picked
        .par_iter()
        .map(|cert| {
            let p = ComponentParams::new(cert.lambda, cert.gamma, cert.b, cert.tau);
            let j = cert.j.expect("member certificates carry J");
            let quad = j_quadrature(&p, tol.quad_tol, tol)?.value;
            if (quad - j).abs() > 1e-6 * (1.0 + j) {
                return Err(Error::QuadratureMismatch {
                    k: cert.k,
                    closed: j,
                    quadrature: quad,
                });
            }
            Ok((quad - j).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    report.paranoid = Some(ParanoidSummary {
        seed,
        checked: picked.iter().map(|c| c.k).collect(),
        max_abs_diff: diffs.into_iter().fold(0.0, f64::max),
    });
    Ok(report)
}

/// `C_N / C_{N-1}` next to the heat-type prediction
/// `|b_N|^2/|b_{N-1}|^2 * |a_{N-1}|/|a_N|`.
pub fn ratio_limit_estimate(
    sys: &DiagonalDelaySystem,
    k: usize,
    n: usize,
    tol: &ToleranceProfile,
) -> Result<RatioEstimate> {
    check_indices(sys, n, k)?;
    let direct = sys.preset() == Preset::Direct;
    let mut pair = [None, None];
    for (slot, i) in pair.iter_mut().zip([n - 1, n]) {
        let cert = certificate(i, &sys.component(i)?, tol, direct)?;
        if !cert.member {
            return Err(Error::NotInRegion(format!("component {i} violates the region hypothesis")));
        }
        *slot = Some(cert);
    }
    let [prev, last] = pair.map(|c| c.expect("filled above"));
    let empirical = ratio(last.c.unwrap_or(0.0), prev.c.unwrap_or(0.0));
    let (a_prev, a_last) = (prev.lambda.re.abs(), last.lambda.re.abs());
    let analytic = (a_last > 0.0 && prev.b.norm_sqr() > 0.0)
        .then(|| last.b.norm_sqr() / prev.b.norm_sqr() * a_prev / a_last);
    Ok(RatioEstimate { empirical, analytic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costint::j_zero;
    use std::f64::consts::FRAC_PI_2;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    #[test]
    fn component_examples() {
        let c = component_bound(&ComponentParams::real(-1.0, 0.0, 1.0, 1.0), &tol()).unwrap();
        assert_eq!(c.c, Some(0.5));
        assert_eq!(c.bound, Some(1.0));

        let c = component_bound(&ComponentParams::real(-1.0, 0.3, 2.0, 1.0), &tol()).unwrap();
        let jq = 0.590_041_048_544_156;
        assert!((c.c.unwrap() - 4.0 * jq).abs() < 1e-10);
        assert!((c.bound.unwrap() - 8.0 * jq).abs() < 1e-10);
        assert!((c.c.unwrap() - 2.36).abs() < 0.01);

        let c = component_bound(&ComponentParams::real(0.0, -1.6, 1.0, 1.0), &tol()).unwrap();
        assert!(!c.member);
        assert_eq!(c.bound, None);
    }

    #[test]
    fn direct_examples() {
        let c = direct_component_coeff(Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0), 1.0, &tol()).unwrap();
        let j0 = j_zero(Complex64::new(-1.0, 0.0), 1.0, &tol()).unwrap().value;
        assert!((c.c.unwrap() - j0).abs() <= 1e-15 * j0);
        assert!((c.bound.unwrap() - 2.0 * j0).abs() < 1e-15);

        let near = direct_component_coeff(Complex64::new(-FRAC_PI_2 + 0.2, 0.0), Complex64::new(1.0, 0.0), 1.0, &tol())
            .unwrap();
        assert!(near.c.unwrap().is_finite() && near.c.unwrap() > j0);

        assert!(matches!(
            direct_component_coeff(Complex64::new(-1.6, 0.0), Complex64::new(1.0, 0.0), 1.0, &tol()),
            Err(Error::NotInRegion(_))
        ));
    }

    #[test]
    fn heat_system_certifies() {
        let sys = heat_preset(
            SequenceRule::constant(0.1),
            SequenceRule::geometric(1.0, 0.5),
            1.0,
            50,
        )
        .unwrap();
        let r = system_check(&sys, 40, 10, DEFAULT_Q_CAP, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedAdmissible);
        assert!(r.empirical_ratio.unwrap() <= 0.3);
        let r50 = system_check(&sys, 50, 10, DEFAULT_Q_CAP, &tol()).unwrap();
        assert!(((r50.partial_sum - r.partial_sum) / r.partial_sum).abs() < 1e-6);
    }

    #[test]
    fn summable_but_ratio_one_is_inconclusive() {
        let sys = heat_preset(SequenceRule::constant(0.0), SequenceRule::constant(1.0), 1.0, 40).unwrap();
        let r = system_check(&sys, 40, 10, 0.9, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.tail_bound, None);
        for c in &r.certificates {
            let k = c.k as f64;
            assert!((c.c.unwrap() - 0.5 / (k * k)).abs() < 1e-15);
        }
    }

    #[test]
    fn violated_component_is_reported() {
        let mut values = vec![Complex64::new(-1.0, 0.0); 5];
        values[2] = Complex64::new(-2.0, 0.0);
        let sys = DiagonalDelaySystem::from_rules(
            1.0,
            SequenceRule::constant(0.0),
            SequenceRule::Explicit { values },
            SequenceRule::constant(1.0),
            5,
        )
        .unwrap();
        let r = system_check(&sys, 5, 2, DEFAULT_Q_CAP, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisViolated(3));
        assert_eq!(r.global_bound, None);
    }

    #[test]
    fn heat_with_growing_gamma_flags_first_component() {
        let sys = heat_preset(SequenceRule::power(1.0, 1.0), SequenceRule::geometric(1.0, 0.5), 1.0, 50).unwrap();
        let r = system_check(&sys, 50, 10, DEFAULT_Q_CAP, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisViolated(1));
    }

    #[test]
    fn bounded_real_eigenvalues() {
        let sys = DiagonalDelaySystem::direct(
            SequenceRule::power(-FRAC_PI_2 + 0.1, -2.0),
            SequenceRule::geometric(1.0, 0.9),
            1.0,
            60,
        )
        .unwrap();
        let r = system_check(&sys, 60, 20, DEFAULT_Q_CAP, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedAdmissible);
        assert!(r.certificates.iter().all(|c| c.branch == Some(CostBranch::J0)));
    }

    #[test]
    fn index_errors() {
        let sys = heat_preset(SequenceRule::constant(0.1), SequenceRule::geometric(1.0, 0.5), 1.0, 10).unwrap();
        assert!(matches!(system_check(&sys, 10, 10, 0.9, &tol()), Err(Error::Index(_))));
        assert!(matches!(system_check(&sys, 11, 2, 0.9, &tol()), Err(Error::Index(_))));
        assert!(matches!(system_check(&sys, 10, 2, 1.0, &tol()), Err(Error::InvalidArgument(_))));
        assert!(matches!(ratio_limit_estimate(&sys, 10, 10, &tol()), Err(Error::Index(_))));
    }

    #[test]
    fn ratio_estimates() {
        let rho: f64 = 0.7;
        let sys = heat_preset(SequenceRule::constant(0.0), SequenceRule::geometric(1.0, rho), 1.0, 30).unwrap();
        let e = ratio_limit_estimate(&sys, 5, 30, &tol()).unwrap();
        let expected = rho * rho * (29.0f64 / 30.0).powi(2);
        assert!((e.empirical - expected).abs() < 1e-12);
        assert!((e.analytic.unwrap() - expected).abs() < 1e-12);

        let sys = heat_preset(SequenceRule::constant(0.0), SequenceRule::power(1.0, -1.0), 1.0, 30).unwrap();
        let e = ratio_limit_estimate(&sys, 5, 30, &tol()).unwrap();
        assert!((e.empirical - (29.0f64 / 30.0).powi(4)).abs() < 1e-12);
        assert!(e.empirical < 1.0);
    }

    #[test]
    fn paranoid_recheck_agrees() {
        let sys = heat_preset(SequenceRule::constant(0.3), SequenceRule::geometric(1.0, 0.5), 1.0, 40).unwrap();
        let r = system_check_paranoid(&sys, 40, 10, DEFAULT_Q_CAP, 7, &tol()).unwrap();
        let p = r.paranoid.unwrap();
        assert_eq!(p.checked.len(), 2);
        assert!(p.max_abs_diff < 1e-8);
    }
}
