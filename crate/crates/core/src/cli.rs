//! The `ra` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 a mathematical
//! hypothesis does not hold, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::admissibility::{system_check, system_check_paranoid, Verdict, DEFAULT_Q_CAP};
use crate::charfun::{count_unstable_roots, CharacteristicFn};
use crate::costint::{classify_branch, j_closed, j_quadrature, j_residue, CostBranch, CostResult};
use crate::ddesim::{simulate_component, simulate_system, verify_bound, InitialData, InputSignal};
use crate::error::{Error, ErrorClass, Result};
use crate::model::{parse_complex, parse_system_spec, ComponentParams, DiagonalDelaySystem, ToleranceProfile};
use crate::region::{boundary, contains, RegionParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Admissibility certificates for diagonal retarded delay systems.
#[derive(Debug, Parser)]
#[command(name = "ra", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundary polyline of the stability region as CSV (u,v).
    Region {
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long = "n", default_value_t = 256)]
        n_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region membership and right-half-plane root count for one component.
    Stability {
        #[command(flatten)]
        comp: ComponentArgs,
    },
    /// Cost integral J by closed form, residues, quadrature or all three.
    Cost {
        #[command(flatten)]
        comp: ComponentArgs,
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
        #[arg(long, default_value_t = 1e-9)]
        quad_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Whole-system certificate for a system spec file.
    Admissible {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_Q_CAP)]
        q_cap: f64,
        /// Re-check a random 5% of the components by quadrature.
        #[arg(long)]
        paranoid: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory CSV for one component or the aggregate norm of a system.
    Simulate {
        #[command(flatten)]
        target: SimTarget,
        #[command(flatten)]
        sim: SimArgs,
        /// Write every `stride`-th grid point.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical check of the admissibility bound along a simulation.
    Verify {
        #[command(flatten)]
        target: SimTarget,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_Q_CAP)]
        q_cap: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Residue,
    Quadrature,
    All,
}

#[derive(Debug, Args)]
pub struct ComponentArgs {
    #[arg(long, allow_hyphen_values = true)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg)]
    lambda: Complex64,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg)]
    gamma: Complex64,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg, default_value = "1")]
    b: Complex64,
}

#[derive(Debug, Args)]
pub struct SimTarget {
    /// System spec file; use with --N instead of the component flags.
    #[arg(long, conflicts_with_all = ["lambda", "gamma", "b"])]
    spec: Option<PathBuf>,
    #[arg(long = "N", requires = "spec")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg)]
    lambda: Option<Complex64>,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg)]
    gamma: Option<Complex64>,
    #[arg(long, allow_hyphen_values = true, value_parser = complex_arg)]
    b: Option<Complex64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// zero | indicator:t0:t1:amp | dsin:amp:decay:freq:phase[,...] | grid:dt:v0;v1;...
    #[arg(long, allow_hyphen_values = true)]
    input: String,
    #[arg(long = "t-end")]
    t_end: f64,
    #[arg(long, default_value_t = 64)]
    m: usize,
}

fn complex_arg(s: &str) -> std::result::Result<Complex64, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

enum Target {
    Component(ComponentParams),
    System(DiagonalDelaySystem, usize),
}

impl SimTarget {
    fn resolve(&self) -> Result<Target> {
        if let Some(path) = &self.spec {
            let sys = load_spec(path)?;
            if let Some(t) = self.tau {
                if t != sys.tau() {
                    return Err(Error::validation("tau", "--tau conflicts with the spec file"));
                }
            }
            let n = self.n.unwrap_or(sys.n());
            return Ok(Target::System(sys, n));
        }
        let missing = |f: &str| Error::InvalidArgument(format!("--{f} is required without --spec"));
        let p = ComponentParams::new(
            self.lambda.ok_or_else(|| missing("lambda"))?,
            self.gamma.ok_or_else(|| missing("gamma"))?,
            self.b.unwrap_or(Complex64::new(1.0, 0.0)),
            self.tau.ok_or_else(|| missing("tau"))?,
        );
        Ok(Target::Component(p.validate()?))
    }
}

impl ComponentArgs {
    fn params(&self) -> Result<ComponentParams> {
        ComponentParams::new(self.lambda, self.gamma, self.b, self.tau).validate()
    }
}

fn load_spec(path: &PathBuf) -> Result<DiagonalDelaySystem> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_system_spec(&text)
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, body: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write output: {e}"));
    match path {
        Some(p) => fs::write(p, body)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(body).map_err(io),
    }
}

fn json(value: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct CostReport {
    #[serde(with = "crate::model::complex_serde")]
    lambda: Complex64,
    #[serde(with = "crate::model::complex_serde")]
    gamma: Complex64,
    tau: f64,
    branch: CostBranch,
    results: Vec<CostResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    deltas: Vec<Delta>,
}

#[derive(Serialize)]
struct Delta {
    pair: String,
    abs: f64,
}

#[derive(Serialize)]
struct SystemBoundReport {
    #[serde(rename = "N")]
    n: usize,
    global_bound: f64,
    sup_ratio: f64,
    t_at_max: f64,
    passed: bool,
}

fn cmd_region(tau: f64, a: f64, n: usize, out: &mut dyn Write, path: &Option<PathBuf>) -> Result<i32> {
    let rp = RegionParams::new(tau, a)?;
    let b = boundary(&rp, n)?;
    let mut s = String::from("u,v\n");
    for z in &b.points {
        s.push_str(&format!("{:.16e},{:.16e}\n", z.re, z.im));
    }
    emit(out, path, s.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_stability(p: &ComponentParams, tol: &ToleranceProfile, out: &mut dyn Write) -> Result<i32> {
    let (a, eta) = p.reduced();
    let rp = RegionParams::new(p.tau, a)?;
    let member = contains(&rp, eta, tol).member;
    let roots = count_unstable_roots(&CharacteristicFn::from_params(p), tol)?.count;
    let region = if member { "member" } else { "non-member" };
    let (word, code) = match (member, roots) {
        (true, 0) => ("STABLE", EXIT_OK),
        (false, r) if r > 0 => ("UNSTABLE", EXIT_OK),
        _ => ("INCONSISTENT", EXIT_NUMERICAL),
    };
    let line = format!("{word} region={region} roots_in_C+={roots}\n");
    emit(out, &None, line.as_bytes())?;
    Ok(code)
}

fn cmd_cost(
    p: &ComponentParams,
    method: Method,
    quad_tol: f64,
    tol: &ToleranceProfile,
    out: &mut dyn Write,
    path: &Option<PathBuf>,
) -> Result<i32> {
    let mut results = Vec::new();
    if matches!(method, Method::Closed | Method::All) {
        results.push(j_closed(p, tol)?);
    }
    if matches!(method, Method::Residue | Method::All) {
        results.push(j_residue(p, tol)?);
    }
    if matches!(method, Method::Quadrature | Method::All) {
        results.push(j_quadrature(p, quad_tol, tol)?);
    }
    let mut deltas = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            deltas.push(Delta {
                pair: format!("{:?}-{:?}", results[i].method, results[j].method),
                abs: (results[i].value - results[j].value).abs(),
            });
        }
    }
    let report = CostReport {
        lambda: p.lambda,
        gamma: p.gamma,
        tau: p.tau,
        branch: classify_branch(p, tol),
        results,
        deltas,
    };
    emit(out, path, &json(&report))?;
    Ok(EXIT_OK)
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::HypothesisViolated(_) => EXIT_HYPOTHESIS,
        _ => EXIT_OK,
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let tol = ToleranceProfile::default();
    match cli.command {
        Command::Region { tau, a, n_points, out: path } => cmd_region(tau, a, n_points, out, &path),
        Command::Stability { comp } => cmd_stability(&comp.params()?, &tol, out),
        Command::Cost {
            comp,
            method,
            quad_tol,
            out: path,
        } => cmd_cost(&comp.params()?, method, quad_tol, &tol, out, &path),
        Command::Admissible {
            spec,
            n,
            k,
            q_cap,
            paranoid,
            seed,
            out: path,
        } => {
            let sys = load_spec(&spec)?;
            let n = n.unwrap_or(sys.n());
            let report = if paranoid {
                system_check_paranoid(&sys, n, k, q_cap, seed, &tol)?
            } else {
                system_check(&sys, n, k, q_cap, &tol)?
            };
            emit(out, &path, &json(&report))?;
            Ok(verdict_code(report.verdict))
        }
        Command::Simulate {
            target,
            sim,
            stride,
            out: path,
        } => {
            let u: InputSignal = sim.input.parse()?;
            let mut buf = Vec::new();
            match target.resolve()? {
                Target::Component(p) => {
                    let tr = simulate_component(&p, &u, &InitialData::zero(sim.m), sim.t_end, sim.m, &tol)?;
                    tr.write_csv(&mut buf, stride * (tr.steps_per_delay() / sim.m))
                        .expect("writing to memory");
                }
                Target::System(sys, n) => {
                    let st = simulate_system(&sys, &u, n, sim.t_end, sim.m, &tol)?;
                    buf.extend_from_slice(b"t,aggregate_norm\n");
                    for (t, v) in st.times.iter().zip(&st.aggregate).step_by(stride.max(1)) {
                        buf.extend_from_slice(format!("{t:.16e},{v:.16e}\n").as_bytes());
                    }
                }
            }
            emit(out, &path, &buf)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            target,
            sim,
            k,
            q_cap,
            out: path,
        } => {
            let u: InputSignal = sim.input.parse()?;
            match target.resolve()? {
                Target::Component(p) => {
                    let r = verify_bound(&p, &u, sim.t_end, sim.m, &tol)?;
                    emit(out, &path, &json(&r))?;
                    Ok(if r.passed { EXIT_OK } else { EXIT_NUMERICAL })
                }
                Target::System(sys, n) => {
                    let k = k.ok_or_else(|| Error::InvalidArgument("--K is required with --spec".into()))?;
                    let report = system_check(&sys, n, k, q_cap, &tol)?;
                    let bound = match (report.verdict, report.global_bound) {
                        (Verdict::CertifiedAdmissible, Some(g)) => g,
                        (Verdict::HypothesisViolated(bad), _) => {
                            return Err(Error::NotInRegion(format!("component {bad} violates the region hypothesis")))
                        }
                        _ => {
                            return Err(Error::InvalidArgument(
                                "system is not certified (inconclusive ratio test); raise --q-cap or N".into(),
                            ))
                        }
                    };
                    let st = simulate_system(&sys, &u, n, sim.t_end, sim.m, &tol)?;
                    let (mut sup, mut t_at) = (0.0f64, 0.0);
                    for (t, v) in st.times.iter().zip(&st.aggregate) {
                        let denom = bound * u.energy(*t);
                        let r = if *v == 0.0 {
                            0.0
                        } else if denom == 0.0 {
                            f64::INFINITY
                        } else {
                            v / denom
                        };
                        if r > sup {
                            sup = r;
                            t_at = *t;
                        }
                    }
                    let passed = sup <= 1.0 + crate::ddesim::BOUND_TOLERANCE;
                    let r = SystemBoundReport {
                        n,
                        global_bound: bound,
                        sup_ratio: sup,
                        t_at_max: t_at,
                        passed,
                    };
                    emit(out, &path, &json(&r))?;
                    Ok(if passed { EXIT_OK } else { EXIT_NUMERICAL })
                }
            }
        }
    }
}

/// Caps the global rayon pool at `RA_THREADS` when set.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RA_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("RA_THREADS must be a positive integer, got `{v}`")))?;
        // a second call in the same process finds the pool already built
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Hypothesis => EXIT_HYPOTHESIS,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli, out));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
