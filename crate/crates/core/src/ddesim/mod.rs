//! Method-of-steps RK4 integration of `z' = lambda z + gamma z(t - tau) + b u`
//! on a grid aligned to the delay, and empirical checks of the admissibility
//! bound on the extended-state norm `|z(t)|^2 + int_{t-tau}^t |z|^2`.

pub mod input;

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::component_bound;
use crate::error::{Error, Result};
use crate::model::{ComponentParams, DiagonalDelaySystem, ToleranceProfile};

pub use input::{DampedSinusoid, InputSignal};

/// Smallest accepted number of steps per delay interval.
pub const MIN_STEPS_PER_DELAY: usize = 8;
/// `(|lambda| + |gamma|) dt` above this triggers step halving.
pub const MAX_STEP_STIFFNESS: f64 = 0.25;
/// Relative slack allowed on the sup ratio in [`verify_bound`].
pub const BOUND_TOLERANCE: f64 = 1e-3;
/// How many delay intervals a jump is tracked for when choosing
/// interpolation stencils and step splits.
const KINK_GENERATIONS: usize = 4;
const GRID_EPS: f64 = 1e-9;

/// Initial state `x` and history samples `f(-tau + j tau/m)`, `j = 0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub x: Complex64,
    pub history: Vec<Complex64>,
}

impl InitialData {
    pub fn zero(m: usize) -> Self {
        Self::constant(Complex64::new(0.0, 0.0), m)
    }

    pub fn constant(c: Complex64, m: usize) -> Self {
        Self {
            x: c,
            history: vec![c; m + 1],
        }
    }
}

/// Solution samples on `{-tau, -tau + dt, ..., t_end}` with `dt = tau/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    tau: f64,
    m: usize,
    m_requested: usize,
    steps: usize,
    values: Vec<Complex64>,
    even: Vec<f64>,
    odd: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub sup_ratio: f64,
    pub t_at_max: f64,
    #[serde(rename = "J_used")]
    pub j_used: f64,
    /// `(1 + tau) |b|^2 J`
    pub bound_constant: f64,
    pub steps_per_delay: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemTrajectory {
    pub times: Vec<f64>,
    /// `sum_k ||v_k(t)||^2` at `times`.
    pub aggregate: Vec<f64>,
    pub components: Vec<Trajectory>,
}

impl Trajectory {
    fn new(tau: f64, m: usize, m_requested: usize, steps: usize, values: Vec<Complex64>) -> Self {
        let mut even = Vec::with_capacity(values.len() + 1);
        let mut odd = Vec::with_capacity(values.len() + 1);
        let (mut e, mut o) = (0.0, 0.0);
        even.push(0.0);
        odd.push(0.0);
        for (i, v) in values.iter().enumerate() {
            if i % 2 == 0 {
                e += v.norm_sqr();
            } else {
                o += v.norm_sqr();
            }
            even.push(e);
            odd.push(o);
        }
        Self {
            tau,
            m,
            m_requested,
            steps,
            values,
            even,
            odd,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Steps per delay interval actually used.
    pub fn steps_per_delay(&self) -> usize {
        self.m
    }

    /// Steps per delay interval that were asked for.
    pub fn requested_steps_per_delay(&self) -> usize {
        self.m_requested
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.m as f64
    }

    pub fn t_end(&self) -> f64 {
        self.steps as f64 * self.dt()
    }

    /// Number of steps taken after `t = 0`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// `z(j dt)` for `j = 0..=steps`.
    pub fn solution(&self) -> &[Complex64] {
        &self.values[self.m..]
    }

    /// Samples on `[-tau, 0]`.
    pub fn history(&self) -> &[Complex64] {
        &self.values[..=self.m]
    }

    fn index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let j = x.round();
        if !t.is_finite() || t < 0.0 || (x - j).abs() > GRID_EPS * (1.0 + x.abs()) || j as usize > self.steps {
            return Err(Error::OffGrid(t));
        }
        Ok(self.m + j as usize)
    }

    /// `z(t)` for a grid time `t >= 0`.
    pub fn z(&self, t: f64) -> Result<Complex64> {
        Ok(self.values[self.index(t)?])
    }

    fn parity_sum(&self, lo: usize, hi: usize, parity: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        let p = if parity == 0 { &self.even } else { &self.odd };
        p[hi + 1] - p[lo]
    }

    fn norm_at(&self, i: usize) -> f64 {
        let (lo, m) = (i - self.m, self.m);
        let f = |k: usize| self.values[k].norm_sqr();
        let dt = self.dt();
        let ends = f(lo) + f(i);
        let integral = if m % 2 == 0 {
            let four = self.parity_sum(lo + 1, i - 1, (lo + 1) % 2);
            let two = self.parity_sum(lo + 2, i - 2, lo % 2);
            dt / 3.0 * (ends + 4.0 * four + 2.0 * two)
        } else {
            let inner = self.parity_sum(lo + 1, i - 1, 0) + self.parity_sum(lo + 1, i - 1, 1);
            dt * (0.5 * ends + inner)
        };
        f(i) + integral
    }

    /// `|z(t)|^2 + int_{t-tau}^t |z|^2` with composite Simpson (trapezoid
    /// when `m` is odd) on the grid.
    pub fn extended_norm(&self, t: f64) -> Result<f64> {
        Ok(self.norm_at(self.index(t)?))
    }

    /// Extended norm at every grid time `0, dt, ..., t_end`.
    pub fn norm_series(&self) -> Vec<f64> {
        (self.m..self.values.len()).map(|i| self.norm_at(i)).collect()
    }

    /// CSV rows `t,re_z,im_z,extended_norm` for every `stride`-th grid time.
    pub fn write_csv(&self, w: &mut impl Write, stride: usize) -> io::Result<()> {
        writeln!(w, "t,re_z,im_z,extended_norm")?;
        let stride = stride.max(1);
        for j in (0..=self.steps).step_by(stride) {
            let z = self.values[self.m + j];
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.time(j),
                z.re,
                z.im,
                self.norm_at(self.m + j)
            )?;
        }
        Ok(())
    }
}

/// Smallest `m 2^j` with `(|lambda| + |gamma|) tau / (m 2^j) <= 0.25`.
pub fn effective_steps(p: &ComponentParams, m: usize) -> usize {
    let rate = p.lambda.norm() + p.gamma.norm();
    let mut m_eff = m;
    while rate * p.tau / m_eff as f64 > MAX_STEP_STIFFNESS && m_eff < (1 << 24) {
        m_eff *= 2;
    }
    m_eff
}

fn lagrange4(xs: [f64; 4], ys: [Complex64; 4], x: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += ys[i] * w;
    }
    acc
}

/// Solution buffer with interpolation that keeps stencils on one side of
/// known derivative jumps. Positions are in steps from `t = -tau`.
struct Buffer<'a> {
    values: &'a [Complex64],
    kinks: &'a [f64],
}

impl Buffer<'_> {
    fn stencil_ok(&self, lo: f64, hi: f64) -> bool {
        !self.kinks.iter().any(|&k| k > lo + GRID_EPS && k < hi - GRID_EPS)
    }

    fn at(&self, pos: f64, known: usize) -> Complex64 {
        let i = pos.floor();
        if pos - i < GRID_EPS {
            return self.values[i as usize];
        }
        if i + 1.0 - pos < GRID_EPS {
            return self.values[i as usize + 1];
        }
        let i = i as i64;
        for s in [i - 1, i, i - 2, i + 1, i - 3] {
            if s < 0 || s + 3 > known as i64 {
                continue;
            }
            let (lo, hi) = ((s as f64).min(pos), ((s + 3) as f64).max(pos));
            if !self.stencil_ok(lo, hi) {
                continue;
            }
            let s = s as usize;
            let xs = [s as f64, s as f64 + 1.0, s as f64 + 2.0, s as f64 + 3.0];
            let ys = [self.values[s], self.values[s + 1], self.values[s + 2], self.values[s + 3]];
            return lagrange4(xs, ys, pos);
        }
        // no kink-free stencil: fall back to linear interpolation
        let w = pos - i as f64;
        self.values[i as usize] * (1.0 - w) + self.values[i as usize + 1] * w
    }
}

/// Resamples history given on `m` intervals onto `m_eff = m 2^j` intervals.
fn refine_history(history: &[Complex64], m: usize, m_eff: usize) -> Vec<Complex64> {
    if m_eff == m {
        return history.to_vec();
    }
    let ratio = (m_eff / m) as f64;
    (0..=m_eff)
        .map(|j| {
            let x = j as f64 / ratio;
            let i = x.floor() as usize;
            if x == i as f64 {
                return history[i];
            }
            let s = i.saturating_sub(1).min(m - 3);
            let xs = [s as f64, s as f64 + 1.0, s as f64 + 2.0, s as f64 + 3.0];
            let ys = [history[s], history[s + 1], history[s + 2], history[s + 3]];
            lagrange4(xs, ys, x)
        })
        .collect()
}

/// Integrates one component from `init` up to the first grid time at or
/// after `t_end`.
///
/// `m` is the requested number of steps per delay interval; it is doubled
/// while `(|lambda| + |gamma|) dt > 0.25` so that stiff components stay
/// within the RK4 stability region. The history must carry `m + 1`
/// samples on `[-tau, 0]`.
pub fn simulate_component(
    p: &ComponentParams,
    u: &InputSignal,
    init: &InitialData,
    t_end: f64,
    m: usize,
    tol: &ToleranceProfile,
) -> Result<Trajectory> {
    let p = p.validate()?;
    if m < MIN_STEPS_PER_DELAY {
        return Err(Error::StepTooCoarse(m));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    if init.history.len() != m + 1 {
        return Err(Error::InvalidArgument(format!(
            "history needs m + 1 = {} samples, got {}",
            m + 1,
            init.history.len()
        )));
    }
    let f0 = init.history[m];
    if (f0 - init.x).norm() > tol.root_tol {
        return Err(Error::IncompatibleInit {
            f0: f0.to_string(),
            x: init.x.to_string(),
        });
    }

    let tau = p.tau;
    let m_eff = effective_steps(&p, m);
    let dt = tau / m_eff as f64;
    let x = t_end / dt;
    let steps = if (x - x.round()).abs() <= GRID_EPS * (1.0 + x) {
        x.round() as usize
    } else {
        x.ceil() as usize
    };

    // jumps of u (and the start at t = 0) together with their echoes
    let mut breaks: Vec<f64> = Vec::new();
    for d in std::iter::once(0.0).chain(u.discontinuities()) {
        for j in 0..=KINK_GENERATIONS {
            breaks.push(d + j as f64 * tau);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= GRID_EPS * dt);
    let kinks: Vec<f64> = breaks.iter().map(|t| (t + tau) / dt).collect();

    let mut values = refine_history(&init.history, m, m_eff);
    values[m_eff] = init.x;
    values.reserve(steps);

    let (lambda, gamma, b) = (p.lambda, p.gamma, p.b);
    let mut next_break = 0usize;
    for n in 0..steps {
        let t0 = n as f64 * dt;
        let t1 = (n + 1) as f64 * dt;
        let mut nodes = vec![t0];
        while next_break < breaks.len() && breaks[next_break] <= t0 + GRID_EPS * dt {
            next_break += 1;
        }
        let mut j = next_break;
        while j < breaks.len() && breaks[j] < t1 - GRID_EPS * dt {
            nodes.push(breaks[j]);
            j += 1;
        }
        nodes.push(t1);

        let known = m_eff + n;
        let buf = Buffer {
            values: &values,
            kinks: &kinks,
        };
        let mut y = values[known];
        for w in nodes.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = hi - lo;
            let rhs = |t: f64, y: Complex64| {
                lambda * y + gamma * buf.at(t / dt, known) + b * u.value_on(t, lo, hi)
            };
            let k1 = rhs(lo, y);
            let k2 = rhs(lo + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(lo + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(hi, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        values.push(y);
    }
    Ok(Trajectory::new(tau, m_eff, m, steps, values))
}

/// Sup over grid times `t <= t_end` of
/// `||v(t)||^2 / ((1 + tau) |b|^2 J ||u||^2_{L^2(0,t)})` from zero initial
/// data, with `0/0 = 0`.
pub fn verify_bound(
    p: &ComponentParams,
    u: &InputSignal,
    t_end: f64,
    m: usize,
    tol: &ToleranceProfile,
) -> Result<BoundCheckReport> {
    let cert = component_bound(p, tol)?;
    let j = cert.j.ok_or_else(|| {
        Error::NotInRegion(format!(
            "gamma e^(-i b tau) for lambda = {}, gamma = {} lies outside the stability region",
            p.lambda, p.gamma
        ))
    })?;
    let constant = cert.bound.expect("member certificates carry a bound");
    let tr = simulate_component(p, u, &InitialData::zero(m), t_end, m, tol)?;
    let mut sup = 0.0f64;
    let mut t_at = 0.0;
    for (jdx, norm) in tr.norm_series().into_iter().enumerate() {
        let t = tr.time(jdx);
        let denom = constant * u.energy(t);
        let r = if norm == 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            norm / denom
        };
        if r > sup {
            sup = r;
            t_at = t;
        }
    }
    Ok(BoundCheckReport {
        sup_ratio: sup,
        t_at_max: t_at,
        j_used: j,
        bound_constant: constant,
        steps_per_delay: tr.steps_per_delay(),
        passed: sup <= 1.0 + BOUND_TOLERANCE,
    })
}

/// Simulates components `1..=n` from zero data and sums their extended
/// norms on the coarse grid `dt = tau/m`.
pub fn simulate_system(
    sys: &DiagonalDelaySystem,
    u: &InputSignal,
    n: usize,
    t_end: f64,
    m: usize,
    tol: &ToleranceProfile,
) -> Result<SystemTrajectory> {
    if n == 0 || n > sys.n() {
        return Err(Error::Index(format!("N = {n} outside 1..={}", sys.n())));
    }
    let components = (1..=n)
        .into_par_iter()
        .map(|k| {
            let p = sys.component(k)?;
            simulate_component(&p, u, &InitialData::zero(m), t_end, m, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let dt = sys.tau() / m as f64;
    let steps = components[0].steps() / (components[0].steps_per_delay() / m);
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let aggregate = times
        .iter()
        .enumerate()
        .map(|(j, _)| {
            components
                .iter()
                .map(|tr| tr.norm_at(tr.m + j * (tr.m / m)))
                .sum()
        })
        .collect();
    Ok(SystemTrajectory {
        times,
        aggregate,
        components,
    })
}
