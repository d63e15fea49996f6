//! Shared domain types: component parameters, tolerances and the diagonal
//! system description together with its JSON spec document.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Absolute tolerance for the cost-integral quadrature.
    pub quad_tol: f64,
    /// Tolerance for scalar root solves and boundary classification.
    pub root_tol: f64,
    /// Relative tolerance for the `|gamma|` vs `|a|` branch choice.
    pub branch_tol: f64,
    /// Exclusion band used when comparing region membership to root counts.
    pub boundary_eps: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            quad_tol: 1e-9,
            root_tol: 1e-12,
            branch_tol: 1e-9,
            boundary_eps: 1e-6,
        }
    }
}

impl ToleranceProfile {
    pub fn validate(self) -> Result<Self> {
        for (name, v) in [
            ("quad_tol", self.quad_tol),
            ("root_tol", self.root_tol),
            ("branch_tol", self.branch_tol),
            ("boundary_eps", self.boundary_eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        Ok(self)
    }
}

/// Serde adapter writing complex numbers as `[re, im]`; a bare number is
/// accepted on input as a real value.
pub mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Pair([f64; 2]),
        Real(f64),
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => Complex64::new(re, im),
            Repr::Real(re) => Complex64::new(re, 0.0),
        })
    }

    pub mod vec {
        use super::*;

        #[derive(Serialize, Deserialize)]
        #[serde(transparent)]
        struct Wrap(#[serde(with = "super")] Complex64);

        pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|z| Wrap(*z)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
            let v: Vec<Wrap> = Vec::deserialize(d)?;
            Ok(v.into_iter().map(|w| w.0).collect())
        }
    }
}

/// Parses `"a+bi"` style complex literals (`"-1"`, `"2i"`, `"-i"`, `"1e-3-2.5i"`).
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidArgument(format!("malformed complex number `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return s
            .parse::<f64>()
            .ok()
            .filter(|re| re.is_finite())
            .map(|re| Complex64::new(re, 0.0))
            .ok_or_else(bad);
    };
    // split at the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re_part, im_part) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

/// The `(a, gamma e^{-i b tau})` reduction with `lambda = a + ib`.
///
/// Everything downstream depends on `lambda` only through `a` and on `gamma`
/// only through the rotated value.
pub fn reduce_params(lambda: Complex64, gamma: Complex64, tau: f64) -> (f64, Complex64) {
    let rot = Complex64::from_polar(1.0, -lambda.im * tau);
    (lambda.re, gamma * rot)
}

/// One scalar retarded component `z' = lambda z + gamma z(t - tau) + b u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    #[serde(with = "complex_serde")]
    pub lambda: Complex64,
    #[serde(with = "complex_serde")]
    pub gamma: Complex64,
    #[serde(with = "complex_serde")]
    pub b: Complex64,
    pub tau: f64,
}

impl ComponentParams {
    pub fn new(lambda: Complex64, gamma: Complex64, b: Complex64, tau: f64) -> Self {
        Self { lambda, gamma, b, tau }
    }

    /// Real-valued shorthand, mostly for tests and examples.
    pub fn real(lambda: f64, gamma: f64, b: f64, tau: f64) -> Self {
        Self::new(lambda.into(), gamma.into(), b.into(), tau)
    }

    /// Checks `tau > 0` and `Re(lambda) <= 1/tau`; returns the value unchanged.
    pub fn validate(self) -> Result<Self> {
        let finite = [self.lambda, self.gamma, self.b]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "component parameters must be finite".into(),
            ));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::DelayNonPositive(self.tau));
        }
        let limit = 1.0 / self.tau;
        if self.lambda.re > limit {
            return Err(Error::EigenvalueOutOfRange {
                re: self.lambda.re,
                limit,
            });
        }
        Ok(self)
    }

    /// `(a, gamma e^{-i b tau})`, see [`reduce_params`].
    pub fn reduced(&self) -> (f64, Complex64) {
        reduce_params(self.lambda, self.gamma, self.tau)
    }

    /// True when `Re(lambda) = 1/tau`: accepted by validation, but the region
    /// is empty there.
    pub fn boundary_hypothesis(&self) -> bool {
        self.lambda.re == 1.0 / self.tau
    }
}

/// Free validation entry point mirroring [`ComponentParams::validate`].
pub fn validate_component(p: ComponentParams) -> Result<ComponentParams> {
    p.validate()
}

/// A sequence `k -> value` for `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceRule {
    /// `value` for every k.
    Constant {
        #[serde(with = "complex_serde")]
        value: Complex64,
    },
    /// `coeff * k^exponent`.
    Power {
        #[serde(with = "complex_serde")]
        coeff: Complex64,
        exponent: f64,
    },
    /// `coeff * ratio^k`.
    Geometric {
        #[serde(with = "complex_serde")]
        coeff: Complex64,
        #[serde(with = "complex_serde")]
        ratio: Complex64,
    },
    /// Values for `k = 1..=values.len()`.
    Explicit {
        #[serde(with = "complex_serde::vec")]
        values: Vec<Complex64>,
    },
}

impl SequenceRule {
    pub fn constant(value: impl Into<Complex64>) -> Self {
        Self::Constant { value: value.into() }
    }

    pub fn power(coeff: impl Into<Complex64>, exponent: f64) -> Self {
        Self::Power {
            coeff: coeff.into(),
            exponent,
        }
    }

    pub fn geometric(coeff: impl Into<Complex64>, ratio: impl Into<Complex64>) -> Self {
        Self::Geometric {
            coeff: coeff.into(),
            ratio: ratio.into(),
        }
    }

    /// Evaluates the rule at 1-based index `k`; `None` past the end of an
    /// explicit list.
    pub fn eval(&self, k: usize) -> Option<Complex64> {
        match self {
            Self::Constant { value } => Some(*value),
            Self::Power { coeff, exponent } => Some(coeff * (k as f64).powf(*exponent)),
            Self::Geometric { coeff, ratio } => Some(coeff * ratio.powu(k as u32)),
            Self::Explicit { values } => k.checked_sub(1).and_then(|i| values.get(i).copied()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Explicit components or three free rules.
    #[default]
    Generic,
    /// `lambda_k = -k^2`, the Dirichlet Laplacian on `(0, pi)`.
    Heat,
    /// `z' = A z(t - tau) + B u`: each component is `(0, mu_k)` where `mu_k`
    /// comes from `lambda_rule`.
    Direct,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Generic => "generic",
            Preset::Heat => "heat",
            Preset::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitComponent {
    #[serde(with = "complex_serde")]
    pub lambda: Complex64,
    #[serde(with = "complex_serde")]
    pub gamma: Complex64,
    #[serde(with = "complex_serde")]
    pub b: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

/// A diagonal retarded system truncated at `n` components.
///
/// Constructed only through [`parse_system_spec`] or the builders below, all
/// of which validate every component `k <= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalDelaySystem {
    tau: f64,
    #[serde(default)]
    preset: Preset,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_rule: Option<SequenceRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_rule: Option<SequenceRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_rule: Option<SequenceRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    explicit_components: Vec<ExplicitComponent>,
}

impl DiagonalDelaySystem {
    pub fn from_rules(
        tau: f64,
        lambda: SequenceRule,
        gamma: SequenceRule,
        b: SequenceRule,
        n: usize,
    ) -> Result<Self> {
        Self {
            tau,
            preset: Preset::Generic,
            n: Some(n),
            lambda_rule: Some(lambda),
            gamma_rule: Some(gamma),
            b_rule: Some(b),
            explicit_components: Vec::new(),
        }
        .validated()
    }

    /// `lambda_k = -k^2` with the given delay and control rules.
    pub fn heat(gamma: SequenceRule, b: SequenceRule, tau: f64, n: usize) -> Result<Self> {
        Self {
            tau,
            preset: Preset::Heat,
            n: Some(n),
            lambda_rule: None,
            gamma_rule: Some(gamma),
            b_rule: Some(b),
            explicit_components: Vec::new(),
        }
        .validated()
    }

    /// Direct-delay system with generator eigenvalues from `lambda`.
    pub fn direct(lambda: SequenceRule, b: SequenceRule, tau: f64, n: usize) -> Result<Self> {
        Self {
            tau,
            preset: Preset::Direct,
            n: Some(n),
            lambda_rule: Some(lambda),
            gamma_rule: None,
            b_rule: Some(b),
            explicit_components: Vec::new(),
        }
        .validated()
    }

    pub fn explicit(tau: f64, components: Vec<ExplicitComponent>) -> Result<Self> {
        Self {
            tau,
            preset: Preset::Generic,
            n: None,
            lambda_rule: None,
            gamma_rule: None,
            b_rule: None,
            explicit_components: components,
        }
        .validated()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    /// Truncation index.
    pub fn n(&self) -> usize {
        self.n.unwrap_or(self.explicit_components.len())
    }

    /// Component `k` (1-based).
    pub fn component(&self, k: usize) -> Result<ComponentParams> {
        if k == 0 || k > self.n() {
            return Err(Error::Index(format!(
                "component {k} outside 1..={}",
                self.n()
            )));
        }
        let missing = |field: &str| {
            Error::validation(field, format!("rule is not defined at k = {k}"))
        };
        let rule = |r: &Option<SequenceRule>, field: &str| {
            r.as_ref()
                .ok_or_else(|| Error::validation(field, "missing"))?
                .eval(k)
                .ok_or_else(|| missing(field))
        };
        let p = if !self.explicit_components.is_empty() {
            let c = self.explicit_components[k - 1];
            if let Some(t) = c.tau {
                if t != self.tau {
                    return Err(Error::validation(
                        format!("explicit_components[{}].tau", k - 1),
                        format!("component delay {t} differs from system delay {}", self.tau),
                    ));
                }
            }
            ComponentParams::new(c.lambda, c.gamma, c.b, self.tau)
        } else {
            let b = rule(&self.b_rule, "b_rule")?;
            match self.preset {
                Preset::Generic => ComponentParams::new(
                    rule(&self.lambda_rule, "lambda_rule")?,
                    rule(&self.gamma_rule, "gamma_rule")?,
                    b,
                    self.tau,
                ),
                Preset::Heat => ComponentParams::new(
                    Complex64::new(-((k * k) as f64), 0.0),
                    rule(&self.gamma_rule, "gamma_rule")?,
                    b,
                    self.tau,
                ),
                Preset::Direct => ComponentParams::new(
                    Complex64::new(0.0, 0.0),
                    rule(&self.lambda_rule, "lambda_rule")?,
                    b,
                    self.tau,
                ),
            }
        };
        p.validate().map_err(|e| match e {
            Error::Validation { .. } => e,
            other => Error::validation(format!("component {k}"), other.to_string()),
        })
    }

    pub fn components(&self) -> impl Iterator<Item = Result<ComponentParams>> + '_ {
        (1..=self.n()).map(move |k| self.component(k))
    }

    /// Serialises back to the spec document.
    pub fn to_spec_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("system spec serialises")
    }

    fn validated(self) -> Result<Self> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::validation("tau", format!("must be positive, got {}", self.tau)));
        }
        let has_rules =
            self.lambda_rule.is_some() || self.gamma_rule.is_some() || self.b_rule.is_some();
        if !self.explicit_components.is_empty() {
            if has_rules {
                return Err(Error::validation(
                    "explicit_components",
                    "cannot be combined with sequence rules",
                ));
            }
            if self.preset != Preset::Generic {
                return Err(Error::validation(
                    "preset",
                    format!("explicit components require the generic preset, got {}", self.preset),
                ));
            }
            if let Some(n) = self.n {
                if n != self.explicit_components.len() {
                    return Err(Error::validation(
                        "N",
                        format!(
                            "N = {n} but {} explicit components were given",
                            self.explicit_components.len()
                        ),
                    ));
                }
            }
        } else {
            if !has_rules {
                return Err(Error::validation(
                    "explicit_components",
                    "system has no components",
                ));
            }
            let (need_lambda, need_gamma) = match self.preset {
                Preset::Generic => (true, true),
                Preset::Heat => (false, true),
                Preset::Direct => (true, false),
            };
            for (present, needed, field) in [
                (self.lambda_rule.is_some(), need_lambda, "lambda_rule"),
                (self.gamma_rule.is_some(), need_gamma, "gamma_rule"),
                (self.b_rule.is_some(), true, "b_rule"),
            ] {
                if present && !needed {
                    return Err(Error::validation(
                        field,
                        format!("not allowed with the {} preset", self.preset),
                    ));
                }
                if !present && needed {
                    return Err(Error::validation(field, "missing"));
                }
            }
            match self.n {
                None => return Err(Error::validation("N", "required with sequence rules")),
                Some(0) => return Err(Error::validation("N", "must be at least 1")),
                Some(_) => {}
            }
        }
        for k in 1..=self.n() {
            self.component(k)?;
        }
        Ok(self)
    }
}

/// Parses and validates a system-spec JSON document.
pub fn parse_system_spec(text: &str) -> Result<DiagonalDelaySystem> {
    let sys: DiagonalDelaySystem = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    sys.validated()
}

impl FromStr for DiagonalDelaySystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_system_spec(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reduce_params_examples() {
        let (a, g) = reduce_params(c(-1.0, 0.0), c(0.3, 0.0), 1.0);
        assert_eq!(a, -1.0);
        assert_eq!(g, c(0.3, 0.0));

        let (a, g) = reduce_params(c(-1.0, PI), c(1.0, 0.0), 1.0);
        assert_eq!(a, -1.0);
        assert!((g - c(-1.0, 0.0)).norm() < 1e-15);

        let (a, g) = reduce_params(c(0.0, 1.0), c(0.0, 1.0), PI / 2.0);
        assert_eq!(a, 0.0);
        assert!((g - c(1.0, 0.0)).norm() < 1e-15);
        assert!((g.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_component_examples() {
        assert!(ComponentParams::real(-1.0, 0.3, 1.0, 1.0).validate().is_ok());
        assert!(matches!(
            ComponentParams::real(2.0, 0.0, 1.0, 1.0).validate(),
            Err(Error::EigenvalueOutOfRange { .. })
        ));
        assert!(matches!(
            ComponentParams::real(0.0, -1.0, 1.0, 0.0).validate(),
            Err(Error::DelayNonPositive(_))
        ));
        // a = 1/tau is admitted and flagged
        let p = ComponentParams::real(0.5, 0.0, 1.0, 2.0).validate().unwrap();
        assert!(p.boundary_hypothesis());
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("-1").unwrap(), c(-1.0, 0.0));
        assert_eq!(parse_complex("0.3").unwrap(), c(0.3, 0.0));
        assert_eq!(parse_complex("1+2i").unwrap(), c(1.0, 2.0));
        assert_eq!(parse_complex("-1-0.5i").unwrap(), c(-1.0, -0.5));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("1e-3+2e-1i").unwrap(), c(1e-3, 0.2));
        assert_eq!(parse_complex("-1.5e+2-3E-1j").unwrap(), c(-150.0, -0.3));
        assert_eq!(parse_complex(" 3 - 4i ").unwrap(), c(3.0, -4.0));
        for bad in ["", "abc", "1+", "1+2k", "nan", "1++2i"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn heat_spec_parses() {
        let text = r#"{
            "tau": 1.0,
            "preset": "heat",
            "N": 50,
            "gamma_rule": {"kind": "constant", "value": 0.1},
            "b_rule": {"kind": "geometric", "coeff": 1, "ratio": 0.5}
        }"#;
        let sys = parse_system_spec(text).unwrap();
        assert_eq!(sys.n(), 50);
        for k in 1..=50 {
            let p = sys.component(k).unwrap();
            assert_eq!(p.lambda, c(-((k * k) as f64), 0.0));
            assert_eq!(p.gamma, c(0.1, 0.0));
            assert!((p.b.re - 0.5f64.powi(k as i32)).abs() < 1e-18);
        }
    }

    #[test]
    fn direct_preset_moves_eigenvalues_into_the_delay_slot() {
        let sys = DiagonalDelaySystem::direct(
            SequenceRule::power(-1.0, -2.0),
            SequenceRule::constant(1.0),
            1.0,
            5,
        )
        .unwrap();
        let p = sys.component(2).unwrap();
        assert_eq!(p.lambda, c(0.0, 0.0));
        assert_eq!(p.gamma, c(-0.25, 0.0));
    }

    #[test]
    fn empty_component_list_is_rejected() {
        let err = parse_system_spec(r#"{"tau": 1.0, "explicit_components": []}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
    }

    #[test]
    fn mixed_delays_are_rejected() {
        let text = r#"{
            "tau": 1.0,
            "explicit_components": [
                {"lambda": [-1, 0], "gamma": [0.3, 0], "b": [1, 0], "tau": 1.0},
                {"lambda": [-2, 0], "gamma": [0.3, 0], "b": [1, 0], "tau": 2.0}
            ]
        }"#;
        let err = parse_system_spec(text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field.contains("[1].tau")), "{err}");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_system_spec("{\n  \"tau\": 1.0,\n  \"bogus\": 3\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rule_validation() {
        // heat preset may not carry its own lambda rule
        let text = r#"{"tau": 1, "preset": "heat", "N": 3,
            "lambda_rule": {"kind": "constant", "value": -1},
            "gamma_rule": {"kind": "constant", "value": 0.1},
            "b_rule": {"kind": "constant", "value": 1}}"#;
        assert!(parse_system_spec(text).is_err());
        // explicit list shorter than N
        let text = r#"{"tau": 1, "N": 3,
            "lambda_rule": {"kind": "explicit", "values": [-1, -2]},
            "gamma_rule": {"kind": "constant", "value": 0.1},
            "b_rule": {"kind": "constant", "value": 1}}"#;
        assert!(parse_system_spec(text).is_err());
        // eigenvalue beyond 1/tau
        let text = r#"{"tau": 1, "N": 2,
            "lambda_rule": {"kind": "explicit", "values": [-1, 2]},
            "gamma_rule": {"kind": "constant", "value": 0.1},
            "b_rule": {"kind": "constant", "value": 1}}"#;
        assert!(parse_system_spec(text).is_err());
        assert!(DiagonalDelaySystem::heat(
            SequenceRule::constant(0.1),
            SequenceRule::constant(1.0),
            1.0,
            0
        )
        .is_err());
    }
}
