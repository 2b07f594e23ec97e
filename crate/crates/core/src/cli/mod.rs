//! Command-line front end: problem files in, reports out.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 failed check,
//! 3 degenerate or inconclusive outcome, 4 solver non-convergence.

pub mod problem;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::duality::{alm_dual_value, alm_scaled_dual, bolza_dual_value, check_domain_condition, check_martingale_density};
use crate::error::{Error, Result};
use crate::extended::INF;
use crate::integrand::Structure;
use crate::optimality::{self, Certificate, Verdict};
use crate::solver::{self, Method, SolveResult, SolveStatus, SolverOptions};
use crate::tree::StochasticProcess;

pub use problem::{parse_problem_file, parse_problem_str, LoadedProblem, ProblemFile};
pub use report::{Report, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

pub const THREADS_ENV: &str = "STOCHDUAL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Dualize,
    Gap,
    Check,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Checker {
    Saddle,
    Kkt,
    Alm,
    EulerLagrange,
    Hamiltonian,
    Cps,
}

impl Checker {
    pub fn for_family(family: &str) -> Checker {
        match family {
            "constrained" => Checker::Kkt,
            "alm" => Checker::Alm,
            "bolza" => Checker::EulerLagrange,
            "kabanov" => Checker::Cps,
            _ => Checker::Saddle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Polyhedral,
    Subgradient,
}

/// Certificates and duality bounds for convex stochastic programs on
/// scenario trees.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "stochdual", version)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Solver feasibility tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the subgradient method.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Multiplier of the subgradient step size.
    #[arg(long)]
    pub step_constant: Option<f64>,
    /// Optimality checker; defaults to the one matching the model family.
    #[arg(long, value_enum)]
    pub checker: Option<Checker>,
    /// Tolerance on certificate residuals.
    #[arg(long, default_value_t = optimality::DEFAULT_TOL)]
    pub check_tol: f64,
    /// Largest duality gap reported as closed.
    #[arg(long, default_value_t = 1e-5)]
    pub gap_tol: f64,
    /// Emit the report as JSON instead of aligned text.
    #[arg(long)]
    pub json: bool,
}

/// Parses arguments, runs the command and renders the report. Returns the
/// exit code and the text for standard output or standard error.
pub fn main_with_args<I, T>(args: I) -> (i32, String, bool)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return (if ok { EXIT_OK } else { EXIT_USAGE }, e.render().to_string(), !ok);
        }
    };
    if let Err(e) = thread_cap() {
        return (EXIT_USAGE, format!("error: {e}\n"), true);
    }
    match run_file(&args) {
        Ok(report) => {
            let text = if args.json { report.to_json() + "\n" } else { report.to_text() };
            (report.exit_code, text, false)
        }
        Err(e) => (EXIT_USAGE, format!("error: {e}\n"), true),
    }
}

/// Reads the parallelism cap. The solvers are sequential, so any positive
/// value is honored trivially.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Parse {
                path: THREADS_ENV.into(),
                message: format!("expected a positive integer, found {s:?}"),
            }),
        },
    }
}

pub fn run_file(args: &Args) -> Result<Report> {
    let bytes = std::fs::read(&args.file).map_err(|e| Error::Io(format!("{}: {e}", args.file.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Parse {
        path: "<root>".into(),
        message: e.to_string(),
    })?;
    let loaded = parse_problem_str(&text)?;
    Ok(run(args, &loaded, &digest(&bytes, args)))
}

/// SHA-256 over the file bytes and the flags that affect the results.
pub fn digest(bytes: &[u8], args: &Args) -> String {
    let flags = serde_json::json!({
        "command": args.command,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "method": args.method,
        "step_constant": args.step_constant,
        "checker": args.checker,
        "check_tol": args.check_tol,
        "gap_tol": args.gap_tol,
    });
    let mut h = Sha256::new();
    h.update(bytes);
    h.update(flags.to_string().as_bytes());
    hex::encode(h.finalize())
}

pub fn solver_options(args: &Args, loaded: &LoadedProblem) -> SolverOptions {
    let mut opts = SolverOptions::default();
    loaded.solver.apply(&mut opts);
    if let Some(t) = args.tol {
        opts.tol = t;
    }
    if let Some(n) = args.max_iter {
        opts.max_iter = n;
    }
    if let Some(m) = args.method {
        opts.method = match m {
            MethodArg::Polyhedral => Method::Polyhedral,
            MethodArg::Subgradient => Method::Subgradient,
        };
    }
    if let Some(c) = args.step_constant {
        opts.step_constant = c;
    }
    opts
}

fn method_name(opts: &SolverOptions) -> &'static str {
    match opts.method {
        Method::Polyhedral => "polyhedral",
        Method::Subgradient => "subgradient",
    }
}

fn status_exit(s: SolveStatus) -> i32 {
    match s {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::MaxIter => EXIT_NO_CONVERGENCE,
        SolveStatus::Infeasible | SolveStatus::Unbounded => EXIT_INCONCLUSIVE,
    }
}

fn severity(code: i32) -> u8 {
    match code {
        EXIT_OK => 0,
        EXIT_INCONCLUSIVE => 1,
        EXIT_CHECK_FAIL => 2,
        EXIT_NO_CONVERGENCE => 3,
        _ => 4,
    }
}

fn escalate(report: &mut Report, code: i32) {
    if severity(code) > severity(report.exit_code) {
        report.exit_code = code;
    }
}

struct Context<'a> {
    args: &'a Args,
    loaded: &'a LoadedProblem,
    opts: SolverOptions,
    primal: Option<SolveResult>,
    dual: Option<(SolveResult, StochasticProcess)>,
}

impl Context<'_> {
    fn primal(&mut self, report: &mut Report) -> Result<SolveResult> {
        if self.primal.is_none() {
            let r = solver::solve_primal(&self.loaded.problem, &self.loaded.u, &self.opts)?;
            report.solver.push(report::Diagnostics::new("primal", method_name(&self.opts), &r));
            report.values.primal = Some(Value(r.value));
            escalate(report, status_exit(r.status));
            self.primal = Some(r);
        }
        Ok(self.primal.clone().expect("set above"))
    }

    fn dual(&mut self, report: &mut Report) -> Result<(SolveResult, StochasticProcess)> {
        if self.dual.is_none() {
            // the dual is a compiled program whatever the primal method
            let opts = SolverOptions {
                method: Method::Polyhedral,
                ..self.opts
            };
            let (r, v) = solver::solve_dual_pair(&self.loaded.problem, &self.loaded.u, &opts)?;
            report.solver.push(report::Diagnostics::new("dual", "polyhedral", &r));
            report.values.dual = Some(Value(r.value));
            escalate(report, status_exit(r.status));
            self.dual = Some((r, v));
        }
        Ok(self.dual.clone().expect("set above"))
    }
}

/// Executes `args.command` on a loaded problem.
pub fn run(args: &Args, loaded: &LoadedProblem, digest: &str) -> Report {
    let mut report = Report::new(&format!("{:?}", args.command).to_lowercase(), &loaded.family, digest.into());
    let mut ctx = Context {
        args,
        loaded,
        opts: solver_options(args, loaded),
        primal: None,
        dual: None,
    };
    let outcome = match args.command {
        Command::Solve => ctx.primal(&mut report).map(|_| ()),
        Command::Dualize => dualize(&mut ctx, &mut report),
        Command::Gap => gap(&mut ctx, &mut report),
        Command::Check => check(&mut ctx, &mut report),
        Command::Report => dualize(&mut ctx, &mut report)
            .and_then(|_| gap(&mut ctx, &mut report))
            .and_then(|_| check(&mut ctx, &mut report)),
    };
    if let Err(e) = outcome {
        report.notes.push(format!("error: {e}"));
        escalate(&mut report, EXIT_USAGE);
    }
    report
}

fn named(name: &str, value: f64) -> report::Named {
    report::Named {
        name: name.into(),
        value: Value(value),
    }
}

fn dualize(ctx: &mut Context, report: &mut Report) -> Result<()> {
    let (dual, _) = ctx.dual(report)?;
    let p = &ctx.loaded.problem;
    let u = &ctx.loaded.u;
    let y = &dual.optimizer;
    let tol = ctx.args.check_tol;
    if dual.status != SolveStatus::Optimal {
        return Ok(());
    }
    let mut values = Vec::new();
    let d = solver::dual_objective(p, y)?;
    values.push(named("dual_objective", d.value));
    values.push(named("orthocomplement_bound", solver::dual_via_orthocomplement(p, y)?.value));
    match p.integrand().structure() {
        Structure::Alm { prices, .. } => {
            let m = check_martingale_density(p.tree(), y, prices, tol)?;
            values.push(named("martingale_residual", m.residual));
            values.push(named("alm_dual_value", alm_dual_value(p, u, y, tol)?));
            let scaled = alm_scaled_dual(p, u, y, tol)?;
            values.push(named("scaled_dual_lambda", scaled.lambda));
            values.push(named("scaled_dual_value", scaled.value));
            let tree = p.tree();
            let last = tree.stage_count() - 1;
            let mean: f64 = (0..tree.leaf_count()).map(|l| tree.probability(l) * y.get(last, l)[0]).sum();
            if mean.abs() > tol {
                for l in 0..tree.leaf_count() {
                    let q = tree.probability(l) * y.get(last, l)[0] / mean;
                    values.push(named(&format!("risk_neutral_weight[{l}]"), q));
                }
            }
        }
        Structure::Bolza { .. } => values.push(named("bolza_dual_value", bolza_dual_value(p, u, y, tol)?)),
        _ => {}
    }
    report.dual_representation = values;
    match check_domain_condition(p, y) {
        Ok(dc) => report.verdicts.push(report::VerdictEntry::new(
            "domain_condition",
            &format!("{:?}", dc.verdict).to_lowercase(),
        )),
        Err(e) => report.notes.push(format!("domain condition not evaluated: {e}")),
    }
    Ok(())
}

fn gap(ctx: &mut Context, report: &mut Report) -> Result<()> {
    let primal = ctx.primal(report)?;
    let (dual, _) = ctx.dual(report)?;
    let gap = if primal.value == INF || dual.value == -INF {
        INF
    } else {
        primal.value - dual.value
    };
    report.values.gap = Some(Value(gap));
    let closed = gap <= ctx.args.gap_tol;
    report.verdicts.push(report::VerdictEntry::new("gap_status", if closed { "closed" } else { "open" }));
    if !closed {
        report.notes.push(format!("duality gap {gap:e} exceeds {:e}", ctx.args.gap_tol));
        escalate(report, EXIT_INCONCLUSIVE);
    }
    Ok(())
}

/// First `m` components of every stage of a `2m`-dimensional process.
fn head(proc: &StochasticProcess, skip: usize) -> StochasticProcess {
    let dims: Vec<usize> = proc.dims().iter().map(|d| d / 2).collect();
    StochasticProcess::from_fn(&dims, proc.leaf_count(), |t, leaf, i| proc.get(t, leaf)[skip * dims[t] + i])
}

fn check(ctx: &mut Context, report: &mut Report) -> Result<()> {
    let loaded = ctx.loaded;
    let p = &loaded.problem;
    let u = &loaded.u;
    let tol = ctx.args.check_tol;
    let x = match &loaded.x {
        Some(x) => x.clone(),
        None => {
            let r = ctx.primal(report)?;
            if r.status != SolveStatus::Optimal {
                report.notes.push("no primal candidate: the primal solve did not reach optimality".into());
                return Ok(());
            }
            r.optimizer
        }
    };
    let (y, solved_v) = match &loaded.y {
        Some(y) => (y.clone(), None),
        None => {
            let (r, v) = ctx.dual(report)?;
            if r.status != SolveStatus::Optimal {
                report.notes.push("no dual candidate: the dual solve did not reach optimality".into());
                return Ok(());
            }
            (r.optimizer, Some(v))
        }
    };
    let v = loaded
        .v
        .clone()
        .or(solved_v)
        .unwrap_or_else(|| StochasticProcess::zeros(p.x_dims(), p.tree().leaf_count()));
    let checker = ctx.args.checker.unwrap_or_else(|| Checker::for_family(&loaded.family));
    let result = match checker {
        Checker::Saddle => optimality::check_saddle(p, &x, u, &y, &v, tol),
        Checker::Kkt => optimality::check_kkt(p, &x, u, &y, &v, tol),
        Checker::Alm => optimality::check_alm(p, &x, u, &y, tol),
        Checker::EulerLagrange => optimality::check_euler_lagrange(p, &x, u, &y, tol),
        Checker::Hamiltonian => optimality::check_hamiltonian_system(p, &x, u, &y, tol),
        Checker::Cps => optimality::check_consistent_price_system(p, &head(&x, 0), &head(&x, 1), &head(u, 0), &head(&y, 0), tol),
    };
    let cert = match result {
        Ok(c) => c,
        Err(e @ (Error::TagMismatch { .. } | Error::DimensionMismatch { .. })) => return Err(e),
        Err(e) => {
            report.notes.push(format!("candidate rejected: {e}"));
            escalate(report, EXIT_CHECK_FAIL);
            return Ok(());
        }
    };
    let value_gap = certificate_value_gap(ctx, &x, &y, &cert);
    report.certificates.push(report::CertificateEntry::new(&cert, value_gap));
    report
        .verdicts
        .push(report::VerdictEntry::new("certificate", &format!("{:?}", cert.verdict).to_lowercase()));
    escalate(
        report,
        match cert.verdict {
            Verdict::Pass => EXIT_OK,
            Verdict::Fail => EXIT_CHECK_FAIL,
            Verdict::Degenerate => EXIT_INCONCLUSIVE,
        },
    );
    Ok(())
}

/// `E f(x, u) - (<u, y> - E f*(v, y))` using the full dual `y`, since the
/// price-system checker works with its asset-dimension head only.
fn certificate_value_gap(ctx: &Context, x: &StochasticProcess, y: &StochasticProcess, cert: &Certificate) -> Option<f64> {
    let p = &ctx.loaded.problem;
    let full = Certificate { y: y.clone(), ..cert.clone() };
    optimality::certificate_gap(p, x, &ctx.loaded.u, &full).ok()
}
