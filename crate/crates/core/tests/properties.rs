use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use ra_core::admissibility::system_check;
use ra_core::charfun::{count_unstable_roots, count_unstable_roots_with_radius, CharacteristicFn};
use ra_core::costint::{j_closed, j_quadrature, j_residue};
use ra_core::ddesim::{simulate_component, DampedSinusoid, InitialData, InputSignal};
use ra_core::model::{
    parse_system_spec, reduce_params, ComponentParams, DiagonalDelaySystem, SequenceRule, ToleranceProfile,
};
use ra_core::region::{contains, RegionParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn tol() -> ToleranceProfile {
    ToleranceProfile::default()
}

/// Admissible component, or `None` when the draw lands outside the region
/// or too close to its boundary or the `|gamma| = |a|` band.
fn admissible(tau: f64, a: f64, b: f64, radius_frac: f64, phase: f64) -> Option<ComponentParams> {
    let t = tol();
    let rp = RegionParams::new(tau, a).ok()?;
    let eta = Complex64::from_polar(radius_frac * rp.outer_radius()?, phase);
    let v = contains(&rp, eta, &t);
    if !v.member || v.distance_hint <= 1e-3 || (eta.norm() - a.abs()).abs() <= 1e-3 * a.abs().max(1.0) {
        return None;
    }
    Some(ComponentParams::new(c(a, b), eta * Complex64::from_polar(1.0, b * tau), c(1.0, 0.0), tau))
}

fn sinusoid() -> impl Strategy<Value = DampedSinusoid> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..2.0f64, 0.0..5.0f64, -PI..PI).prop_map(|(re, im, decay, freq, phase)| {
        DampedSinusoid {
            amplitude: c(re, im),
            decay,
            freq,
            phase,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn reduction_keeps_gamma_modulus(
        lr in -5.0..5.0f64, li in -20.0..20.0f64, gr in -5.0..5.0f64, gi in -5.0..5.0f64, tau in 0.01..10.0f64,
    ) {
        let gamma = c(gr, gi);
        let (a, eta) = reduce_params(c(lr, li), gamma, tau);
        prop_assert_eq!(a, lr);
        prop_assert!((eta.norm() - gamma.norm()).abs() <= 1e-14 * (1.0 + gamma.norm()));
    }

    #[test]
    fn membership_is_conjugate_symmetric(
        tau in 0.1..5.0f64, a in -3.0..1.0f64, x in -4.0..4.0f64, y in -4.0..4.0f64,
    ) {
        let Ok(rp) = RegionParams::new(tau, a) else { return Ok(()) };
        let t = tol();
        let up = contains(&rp, c(x, y), &t);
        let down = contains(&rp, c(x, -y), &t);
        prop_assert_eq!(up.member, down.member);
    }

    #[test]
    fn cost_is_positive(
        tau in 0.1..5.0f64, a in -4.0..0.9f64, b in -2.0..2.0f64, r in 0.0..1.0f64, phase in -PI..PI,
    ) {
        let Some(p) = admissible(tau, a / tau.max(1.0), b, r, phase) else { return Ok(()) };
        let j = j_closed(&p, &tol()).unwrap();
        prop_assert!(j.value > 0.0, "J = {} for {:?}", j.value, p);
    }

    #[test]
    fn cost_ignores_frequency_shift(
        tau in 0.2..3.0f64, a in -3.0..0.0f64, b in -2.0..2.0f64, r in 0.0..1.0f64, phase in -PI..PI,
        shift in -5.0..5.0f64,
    ) {
        let Some(p) = admissible(tau, a, b, r, phase) else { return Ok(()) };
        let mut q = p;
        q.lambda += c(0.0, shift);
        q.gamma *= Complex64::from_polar(1.0, shift * tau);
        let t = tol();
        let jp = j_quadrature(&p, 1e-9, &t).unwrap().value;
        let jq = j_quadrature(&q, 1e-9, &t).unwrap().value;
        prop_assert!((jp - jq).abs() <= 1e-7 * (1.0 + jp), "{} vs {}", jp, jq);
    }

    #[test]
    fn three_routes_agree(
        tau in 0.1..5.0f64, a in -4.0..0.9f64, b in -2.0..2.0f64, r in 0.0..1.0f64, phase in -PI..PI,
    ) {
        let Some(p) = admissible(tau, a / tau.max(1.0), b, r, phase) else { return Ok(()) };
        let t = tol();
        let j = j_closed(&p, &t).unwrap().value;
        let res = j_residue(&p, &t).unwrap().value;
        let quad = j_quadrature(&p, 1e-9, &t).unwrap().value;
        prop_assert!((j - res).abs() <= 1e-9 * (1.0 + j), "closed {} residue {}", j, res);
        prop_assert!((j - quad).abs() <= 1e-6 * (1.0 + j), "closed {} quadrature {}", j, quad);
    }

    #[test]
    fn spec_round_trips(
        g0 in -1.0..1.0f64, ratio in 0.1..0.9f64, tau in 0.2..3.0f64, n in 1usize..50,
    ) {
        let sys = DiagonalDelaySystem::heat(SequenceRule::constant(g0), SequenceRule::geometric(1.0, ratio), tau, n).unwrap();
        let back = parse_system_spec(&sys.to_spec_string()).unwrap();
        prop_assert_eq!(back, sys);
    }

    #[test]
    fn root_count_is_conjugate_symmetric(
        a in -2.0..1.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64,
    ) {
        let t = tol();
        let up = count_unstable_roots(&CharacteristicFn::new(c(a, 0.0), c(x, y), 1.0), &t);
        let down = count_unstable_roots(&CharacteristicFn::new(c(a, 0.0), c(x, -y), 1.0), &t);
        if let (Ok(up), Ok(down)) = (up, down) {
            prop_assert_eq!(up.count, down.count);
        }
    }

    #[test]
    fn root_count_stable_under_larger_box(
        lr in -2.0..1.0f64, li in -2.0..2.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64,
    ) {
        let t = tol();
        let f = CharacteristicFn::new(c(lr, li), c(x, y), 1.0);
        let base = count_unstable_roots(&f, &t);
        let big = count_unstable_roots_with_radius(&f, 2.0 * f.right_half_plane_bound() + 5.0, &t);
        if let (Ok(base), Ok(big)) = (base, big) {
            prop_assert_eq!(base.count, big.count);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(16) })]

    #[test]
    fn simulation_is_linear(
        u1 in prop::collection::vec(sinusoid(), 1..3),
        u2 in prop::collection::vec(sinusoid(), 1..3),
        ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64,
        lambda in -2.0..0.5f64, gamma in -1.0..1.0f64,
    ) {
        let t = tol();
        let p = ComponentParams::new(c(lambda, 0.3), c(gamma, 0.2), c(1.0, -0.5), 1.0);
        let u1 = InputSignal::DampedSinusoids { terms: u1 };
        let u2 = InputSignal::DampedSinusoids { terms: u2 };
        let (alpha, beta) = (c(ar, ai), c(br, bi));
        let mixed = InputSignal::combine(alpha, &u1, beta, &u2).unwrap();
        let run = |u: &InputSignal| simulate_component(&p, u, &InitialData::zero(16), 5.0, 16, &t).unwrap();
        let (z1, z2, zm) = (run(&u1), run(&u2), run(&mixed));
        let scale = 1.0 + zm.solution().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for ((x1, x2), xm) in z1.solution().iter().zip(z2.solution()).zip(zm.solution()) {
            prop_assert!((alpha * x1 + beta * x2 - xm).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn admissibility_monotone_in_n(
        g0 in -0.9..0.9f64, ratio in 0.2..0.8f64, tau in 0.5..2.0f64, n in 6usize..30,
    ) {
        let t = tol();
        let sys = DiagonalDelaySystem::heat(SequenceRule::constant(g0), SequenceRule::geometric(1.0, ratio), tau, n + 5).unwrap();
        let small = system_check(&sys, n, 3, 0.95, &t).unwrap();
        let large = system_check(&sys, n + 5, 3, 0.95, &t).unwrap();
        prop_assert!(large.partial_sum >= small.partial_sum);
        for r in [&small, &large] {
            if let Some(g) = r.global_bound {
                prop_assert!(g >= (1.0 + tau) * r.partial_sum);
            }
        }
    }
}
