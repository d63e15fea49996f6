//! Square-integrable input signals with exact `L^2(0, t)` energy.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{complex_serde, parse_complex};

/// One term `amplitude * e^{-decay t} * cos(freq t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedSinusoid {
    #[serde(with = "complex_serde")]
    pub amplitude: Complex64,
    pub decay: f64,
    pub freq: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    /// `amplitude` on `[t0, t1)`, zero elsewhere.
    Indicator {
        t0: f64,
        t1: f64,
        #[serde(with = "complex_serde")]
        amplitude: Complex64,
    },
    /// Piecewise-linear interpolation of `values[j]` at `t = j dt`, zero after
    /// the last sample.
    Sampled {
        dt: f64,
        #[serde(with = "complex_serde::vec")]
        values: Vec<Complex64>,
    },
    /// Finite sum of damped sinusoids on `[0, inf)`.
    DampedSinusoids { terms: Vec<DampedSinusoid> },
}

/// `int_0^t e^{c s} ds`
fn exp_integral(c: Complex64, t: f64) -> Complex64 {
    let x = c * t;
    if x.norm() < 1e-3 {
        t * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0))))
    } else {
        (x.exp() - 1.0) / c
    }
}

impl InputSignal {
    pub fn zero() -> Self {
        InputSignal::DampedSinusoids { terms: Vec::new() }
    }

    pub fn indicator(t0: f64, t1: f64, amplitude: impl Into<Complex64>) -> Result<Self> {
        Self::Indicator {
            t0,
            t1,
            amplitude: amplitude.into(),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        match &self {
            Self::Indicator { t0, t1, amplitude } => {
                if !(t0.is_finite() && t1.is_finite() && *t0 >= 0.0 && t1 >= t0) {
                    return Err(Error::InvalidArgument(format!(
                        "indicator needs 0 <= t0 <= t1, got [{t0}, {t1}]"
                    )));
                }
                if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
                    return Err(Error::InvalidArgument("indicator amplitude must be finite".into()));
                }
            }
            Self::Sampled { dt, values } => {
                if !(dt.is_finite() && *dt > 0.0) {
                    return Err(Error::InvalidArgument(format!("sample step must be positive, got {dt}")));
                }
                if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                    return Err(Error::InvalidArgument("samples must be finite".into()));
                }
            }
            Self::DampedSinusoids { terms } => {
                for t in terms {
                    let ok = t.amplitude.re.is_finite()
                        && t.amplitude.im.is_finite()
                        && t.freq.is_finite()
                        && t.phase.is_finite()
                        && t.decay.is_finite();
                    if !ok {
                        return Err(Error::InvalidArgument("sinusoid parameters must be finite".into()));
                    }
                    if t.decay <= 0.0 && t.amplitude != Complex64::new(0.0, 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "decay must be positive for a square-integrable input, got {}",
                            t.decay
                        )));
                    }
                }
            }
        }
        Ok(self)
    }

    /// `u(t)`, right-continuous; zero for `t < 0`.
    pub fn value(&self, t: f64) -> Complex64 {
        self.limit(t, false)
    }

    /// Value of the piece of `u` covering the open interval `(lo, hi)`,
    /// evaluated at `t in [lo, hi]`: at `t = hi` this is the left limit.
    pub fn value_on(&self, t: f64, lo: f64, hi: f64) -> Complex64 {
        self.limit(t, t >= hi && hi > lo)
    }

    fn limit(&self, t: f64, from_left: bool) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        if t < 0.0 || (t == 0.0 && from_left) {
            return zero;
        }
        let inside = |lo: f64, hi: f64| {
            if from_left {
                t > lo && t <= hi
            } else {
                t >= lo && t < hi
            }
        };
        match self {
            Self::Indicator { t0, t1, amplitude } => {
                if inside(*t0, *t1) {
                    *amplitude
                } else {
                    zero
                }
            }
            Self::Sampled { dt, values } => {
                if values.len() < 2 {
                    return zero;
                }
                let last = (values.len() - 1) as f64 * dt;
                if !inside(0.0, last) && !(t == 0.0 && !from_left) {
                    return zero;
                }
                let x = (t / dt).min((values.len() - 1) as f64);
                let j = (x.floor() as usize).min(values.len() - 2);
                let w = x - j as f64;
                values[j] * (1.0 - w) + values[j + 1] * w
            }
            Self::DampedSinusoids { terms } => terms
                .iter()
                .map(|s| s.amplitude * (-s.decay * t).exp() * (s.freq * t + s.phase).cos())
                .sum(),
        }
    }

    /// Times in `[0, inf)` where `u` jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            Self::Indicator { t0, t1, amplitude } => {
                if *amplitude == Complex64::new(0.0, 0.0) || t0 == t1 {
                    Vec::new()
                } else if *t0 == 0.0 {
                    vec![*t1]
                } else {
                    vec![*t0, *t1]
                }
            }
            Self::Sampled { dt, values } => match values.last() {
                Some(v) if *v != Complex64::new(0.0, 0.0) => vec![(values.len() - 1) as f64 * dt],
                _ => Vec::new(),
            },
            Self::DampedSinusoids { .. } => Vec::new(),
        }
    }

    /// End of the support, `inf` for damped sinusoids.
    pub fn support_end(&self) -> f64 {
        match self {
            Self::Indicator { t1, .. } => *t1,
            Self::Sampled { dt, values } => values.len().saturating_sub(1) as f64 * dt,
            Self::DampedSinusoids { terms } => {
                if terms.is_empty() {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `||u||^2_{L^2(0, t)}`, exact for every variant.
    pub fn energy(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Indicator { t0, t1, amplitude } => amplitude.norm_sqr() * (t1.min(t) - t0).max(0.0),
            Self::Sampled { dt, values } => {
                if values.len() < 2 {
                    return 0.0;
                }
                let mut total = 0.0;
                for j in 0..values.len() - 1 {
                    let start = j as f64 * dt;
                    if start >= t {
                        break;
                    }
                    let x = (t - start).min(*dt);
                    let p = values[j];
                    let d = (values[j + 1] - p) / *dt;
                    total += p.norm_sqr() * x + (p.conj() * d).re * x * x + d.norm_sqr() * x * x * x / 3.0;
                }
                total
            }
            Self::DampedSinusoids { terms } => {
                // cos A cos B = (cos(A - B) + cos(A + B)) / 2
                let mut total = 0.0;
                for p in terms {
                    for q in terms {
                        let amp = p.amplitude * q.amplitude.conj();
                        let decay = -(p.decay + q.decay);
                        let diff = Complex64::from_polar(1.0, p.phase - q.phase)
                            * exp_integral(Complex64::new(decay, p.freq - q.freq), t);
                        let sum = Complex64::from_polar(1.0, p.phase + q.phase)
                            * exp_integral(Complex64::new(decay, p.freq + q.freq), t);
                        total += (amp * 0.5 * (diff.re + sum.re)).re;
                    }
                }
                total.max(0.0)
            }
        }
    }

    /// `alpha u1 + beta u2` for two damped-sinusoid signals.
    pub fn combine(alpha: Complex64, u1: &Self, beta: Complex64, u2: &Self) -> Result<Self> {
        match (u1, u2) {
            (Self::DampedSinusoids { terms: a }, Self::DampedSinusoids { terms: b }) => {
                let scale = |c: Complex64, t: &DampedSinusoid| DampedSinusoid {
                    amplitude: c * t.amplitude,
                    ..*t
                };
                let terms = a.iter().map(|t| scale(alpha, t)).chain(b.iter().map(|t| scale(beta, t))).collect();
                Ok(Self::DampedSinusoids { terms })
            }
            _ => Err(Error::InvalidArgument(
                "only damped-sinusoid inputs can be combined".into(),
            )),
        }
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("bad {what} `{field}` in input spec")))
}

impl FromStr for InputSignal {
    type Err = Error;

    /// Accepted forms:
    ///
    /// - `zero`
    /// - `indicator:t0:t1:amplitude`
    /// - `dsin:amplitude:decay:freq:phase[,amplitude:decay:freq:phase...]`
    /// - `grid:dt:v0;v1;...`
    ///
    /// Amplitudes and samples may be complex literals such as `1-2i`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let signal = match kind {
            "zero" if rest.is_empty() => Self::zero(),
            "indicator" => {
                let f: Vec<&str> = rest.split(':').collect();
                if f.len() != 3 {
                    return Err(Error::InvalidArgument(format!(
                        "indicator expects t0:t1:amplitude, got `{rest}`"
                    )));
                }
                Self::Indicator {
                    t0: parse_f64(f[0], "t0")?,
                    t1: parse_f64(f[1], "t1")?,
                    amplitude: parse_complex(f[2])?,
                }
            }
            "dsin" => {
                let mut terms = Vec::new();
                for term in rest.split(',') {
                    let f: Vec<&str> = term.split(':').collect();
                    if f.len() != 4 {
                        return Err(Error::InvalidArgument(format!(
                            "dsin term expects amplitude:decay:freq:phase, got `{term}`"
                        )));
                    }
                    terms.push(DampedSinusoid {
                        amplitude: parse_complex(f[0])?,
                        decay: parse_f64(f[1], "decay")?,
                        freq: parse_f64(f[2], "freq")?,
                        phase: parse_f64(f[3], "phase")?,
                    });
                }
                Self::DampedSinusoids { terms }
            }
            "grid" => {
                let (dt, values) = rest.split_once(':').ok_or_else(|| {
                    Error::InvalidArgument(format!("grid expects dt:v0;v1;..., got `{rest}`"))
                })?;
                let values = values
                    .split(';')
                    .map(parse_complex)
                    .collect::<Result<Vec<_>>>()?;
                Self::Sampled {
                    dt: parse_f64(dt, "dt")?,
                    values,
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown input spec `{s}` (expected zero, indicator:..., dsin:..., grid:...)"
                )))
            }
        };
        signal.validated()
    }
}
