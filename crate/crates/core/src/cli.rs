//! Command-line front end.
//!
//! Values come from three layers: built-in defaults, an optional flat
//! `key = value` config file, and flags. Flags win over the file, the file
//! wins over defaults. The output directory defaults to `$CFFCM_OUTPUT_DIR`
//! or the working directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    emit_report, example4_problem, run_study, solve_and_measure, ConvergenceReport, Example4Case, ReportFormat,
    ScalarConfig, Signal, SpatialConfig, StudyConfig, TemporalConfig,
};
use crate::error::{Error, Result};
use crate::solver::{LinearSolver, ProblemSpec};
use crate::timestep::MultiTermOperator;

pub const OUTPUT_DIR_ENV: &str = "CFFCM_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cffcm",
    version,
    about = "Caputo-Fabrizio fractional diffusion solver and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Direct vs fast CF derivative sweeps against closed forms
    DerivativeBench(Params),
    /// One march of the three-term problem (or the zero problem)
    Solve(Params),
    /// Error and rate at t = T for a ladder of time steps
    TemporalStudy(Params),
    /// Error against polynomial degree at a tiny time step
    SpatialStudy(Params),
}

#[derive(Debug, Clone, Default, Args)]
struct Params {
    /// Flat `key = value` file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Order(s), comma separated
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Term weights, comma separated
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<f64>>,
    /// Polynomial degree(s)
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Number(s) of time steps
    #[arg(long, value_delimiter = ',')]
    nt: Option<Vec<usize>>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// Domain length
    #[arg(long)]
    s: Option<f64>,
    /// Time step (spatial study)
    #[arg(long)]
    dt: Option<f64>,
    /// CG relative residual tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Linear solver: cg or cholesky
    #[arg(long)]
    solver: Option<String>,
    /// Order set of the three-term problem: 1, 2, 3 or 4
    #[arg(long)]
    case: Option<u8>,
    /// power4, cos5 or exp5
    #[arg(long)]
    signal: Option<String>,
    /// Problem for `solve`: example4 or homogeneous
    #[arg(long)]
    problem: Option<String>,
    /// Timed repetitions per ladder point
    #[arg(long)]
    repeats: Option<usize>,
    /// Report path
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| Error::Config(format!("{key}: cannot parse '{}': {e}", v.trim())))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{}': {e}", value.trim())))
}

impl Params {
    fn from_config_text(text: &str, origin: &Path) -> Result<Self> {
        let mut p = Params::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected 'key = value'", origin.display(), lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "alpha" => p.alpha = Some(parse_list(key, value)?),
                "d" => p.d = Some(parse_list(key, value)?),
                "n" => p.n = Some(parse_list(key, value)?),
                "nt" => p.nt = Some(parse_list(key, value)?),
                "t" => p.t = Some(parse_one(key, value)?),
                "s" => p.s = Some(parse_one(key, value)?),
                "dt" => p.dt = Some(parse_one(key, value)?),
                "tol" => p.tol = Some(parse_one(key, value)?),
                "solver" => p.solver = Some(value.to_owned()),
                "case" => p.case = Some(parse_one(key, value)?),
                "signal" => p.signal = Some(value.to_owned()),
                "problem" => p.problem = Some(value.to_owned()),
                "repeats" => p.repeats = Some(parse_one(key, value)?),
                "output" => p.output = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!(
                        "{}:{}: unknown key '{other}'",
                        origin.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(p)
    }

    /// Fields set in `self` take precedence over those in `lower`.
    fn over(self, lower: Params) -> Params {
        Params {
            config: self.config,
            alpha: self.alpha.or(lower.alpha),
            d: self.d.or(lower.d),
            n: self.n.or(lower.n),
            nt: self.nt.or(lower.nt),
            t: self.t.or(lower.t),
            s: self.s.or(lower.s),
            dt: self.dt.or(lower.dt),
            tol: self.tol.or(lower.tol),
            solver: self.solver.or(lower.solver),
            case: self.case.or(lower.case),
            signal: self.signal.or(lower.signal),
            problem: self.problem.or(lower.problem),
            repeats: self.repeats.or(lower.repeats),
            output: self.output.or(lower.output),
        }
    }

    fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut mark = |set: bool, k| {
            if set {
                keys.push(k)
            }
        };
        mark(self.alpha.is_some(), "alpha");
        mark(self.d.is_some(), "d");
        mark(self.n.is_some(), "n");
        mark(self.nt.is_some(), "nt");
        mark(self.t.is_some(), "t");
        mark(self.s.is_some(), "s");
        mark(self.dt.is_some(), "dt");
        mark(self.tol.is_some(), "tol");
        mark(self.solver.is_some(), "solver");
        mark(self.case.is_some(), "case");
        mark(self.signal.is_some(), "signal");
        mark(self.problem.is_some(), "problem");
        mark(self.repeats.is_some(), "repeats");
        keys
    }

    fn only(&self, command: &str, allowed: &[&str]) -> Result<()> {
        match self.set_keys().into_iter().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Config(format!("--{k} does not apply to {command}"))),
            None => Ok(()),
        }
    }

    fn linear_solver(&self) -> Result<LinearSolver> {
        let tol = self.tol.unwrap_or(crate::solver::CG_DEFAULT_TOL);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Config(format!("--tol must lie in (0, 1), got {tol}")));
        }
        match self.solver.as_deref().unwrap_or("cg") {
            "cg" => Ok(LinearSolver::ConjugateGradient { tol, max_iter: None }),
            "cholesky" if self.tol.is_none() => Ok(LinearSolver::Cholesky),
            "cholesky" => Err(Error::Config("--tol applies only to --solver cg".into())),
            other => Err(Error::Config(format!("unknown solver '{other}' (cg, cholesky)"))),
        }
    }

    /// `(weights, alphas)` from `--case`, then `--d` / `--alpha`.
    fn terms(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let case = Example4Case::from_number(self.case.unwrap_or(1))?;
        let weights = self.d.clone().unwrap_or_else(|| Example4Case::WEIGHTS.to_vec());
        let alphas = self.alpha.clone().unwrap_or_else(|| case.alphas().to_vec());
        MultiTermOperator::new(&weights, &alphas)?;
        Ok((weights, alphas))
    }

    fn single<T: Copy>(key: &str, v: &Option<Vec<T>>) -> Result<Option<T>> {
        match v.as_deref() {
            None => Ok(None),
            Some([x]) => Ok(Some(*x)),
            Some(_) => Err(Error::Config(format!("--{key} takes a single value here"))),
        }
    }
}

/// What the binary will do, with every value resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    DerivativeBench {
        study: ScalarConfig,
        output: PathBuf,
    },
    Solve {
        problem: SolveProblem,
        weights: Vec<f64>,
        alphas: Vec<f64>,
        degree: usize,
        steps: usize,
        horizon: f64,
        length: f64,
        solver: LinearSolver,
        output: PathBuf,
    },
    TemporalStudy {
        study: TemporalConfig,
        output: PathBuf,
    },
    SpatialStudy {
        study: SpatialConfig,
        output: PathBuf,
        plot_output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveProblem {
    Example4,
    Homogeneous,
}

/// Failure to produce a [`RunConfig`].
#[derive(Debug)]
pub enum CliError {
    /// Rejected by the argument parser, or `--help` / `--version`.
    Usage(clap::Error),
    Config(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e)
    }
}

fn output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Usage)?;
    Ok(resolve(cli.command)?)
}

fn layered(flags: Params) -> Result<Params> {
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Params::from_config_text(&text, path)?
        }
        None => Params::default(),
    };
    Ok(flags.over(file))
}

fn resolve(command: Command) -> Result<RunConfig> {
    let dir = output_dir();
    match command {
        Command::DerivativeBench(p) => {
            let p = layered(p)?;
            p.only("derivative-bench", &["alpha", "nt", "t", "signal", "repeats"])?;
            let signal: Signal = p.signal.as_deref().unwrap_or("power4").parse()?;
            let mut study = ScalarConfig {
                signal,
                ..ScalarConfig::default()
            };
            if let Some(a) = Params::single("alpha", &p.alpha)? {
                study.alpha = a;
            }
            if let Some(nt) = p.nt {
                study.steps = nt;
            }
            if let Some(t) = p.t {
                study.horizon = t;
            }
            if let Some(r) = p.repeats {
                study.repeats = r;
            }
            crate::cf::FractionalOrder::new(study.alpha)?;
            crate::cf::TimeGrid::new(study.horizon, 1)?;
            check_ladder(&study.steps)?;
            let output = p
                .output
                .unwrap_or_else(|| dir.join(format!("derivative_bench_{}.csv", signal.id())));
            Ok(RunConfig::DerivativeBench { study, output })
        }
        Command::Solve(p) => {
            let p = layered(p)?;
            p.only(
                "solve",
                &["alpha", "d", "n", "nt", "t", "s", "tol", "solver", "case", "problem"],
            )?;
            let problem = match p.problem.as_deref().unwrap_or("example4") {
                "example4" => SolveProblem::Example4,
                "homogeneous" => SolveProblem::Homogeneous,
                other => {
                    return Err(Error::Config(format!(
                        "unknown problem '{other}' (example4, homogeneous)"
                    )))
                }
            };
            let (weights, alphas) = p.terms()?;
            let degree = Params::single("n", &p.n)?.unwrap_or(20);
            let steps = Params::single("nt", &p.nt)?.unwrap_or(160);
            let horizon = p.t.unwrap_or(1.0);
            let length = p.s.unwrap_or(std::f64::consts::PI);
            if degree < 2 {
                return Err(Error::Config(format!("--n must be at least 2, got {degree}")));
            }
            crate::cf::TimeGrid::new(horizon, steps)?;
            if !(length > 0.0 && length.is_finite()) {
                return Err(Error::Config(format!("--s must be positive, got {length}")));
            }
            let solver = p.linear_solver()?;
            let output = p.output.unwrap_or_else(|| dir.join("solve.csv"));
            Ok(RunConfig::Solve {
                problem,
                weights,
                alphas,
                degree,
                steps,
                horizon,
                length,
                solver,
                output,
            })
        }
        Command::TemporalStudy(p) => {
            let p = layered(p)?;
            p.only(
                "temporal-study",
                &["alpha", "d", "n", "nt", "t", "tol", "solver", "case"],
            )?;
            let (weights, alphas) = p.terms()?;
            let mut study = TemporalConfig {
                weights,
                alphas,
                solver: p.linear_solver()?,
                ..TemporalConfig::default()
            };
            if let Some(n) = Params::single("n", &p.n)? {
                study.degree = n;
            }
            if let Some(nt) = p.nt {
                study.steps = nt;
            }
            if let Some(t) = p.t {
                study.horizon = t;
            }
            if study.degree < 2 {
                return Err(Error::Config(format!("--n must be at least 2, got {}", study.degree)));
            }
            crate::cf::TimeGrid::new(study.horizon, 1)?;
            check_ladder(&study.steps)?;
            let output = p.output.unwrap_or_else(|| dir.join("temporal_study.csv"));
            Ok(RunConfig::TemporalStudy { study, output })
        }
        Command::SpatialStudy(p) => {
            let p = layered(p)?;
            p.only(
                "spatial-study",
                &["alpha", "d", "n", "dt", "t", "tol", "solver", "case"],
            )?;
            let (weights, alphas) = p.terms()?;
            let mut study = SpatialConfig {
                weights,
                alphas,
                solver: p.linear_solver()?,
                ..SpatialConfig::default()
            };
            if let Some(n) = p.n {
                study.degrees = n;
            }
            if let Some(dt) = p.dt {
                study.dt = dt;
            }
            if let Some(t) = p.t {
                study.t_end = t;
            }
            study.steps()?;
            if study.degrees.first().is_some_and(|&n| n < 2)
                || study.degrees.windows(2).any(|w| w[1] <= w[0])
                || study.degrees.is_empty()
            {
                return Err(Error::Config(format!(
                    "--n must be a strictly increasing list of degrees >= 2, got {:?}",
                    study.degrees
                )));
            }
            let output = p.output.unwrap_or_else(|| dir.join("spatial_study.csv"));
            let plot_output = output.with_extension("dat");
            Ok(RunConfig::SpatialStudy {
                study,
                output,
                plot_output,
            })
        }
    }
}

fn check_ladder(steps: &[usize]) -> Result<()> {
    if steps.is_empty() || steps.contains(&0) || steps.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Config(format!(
            "--nt must be a ladder where each entry doubles the previous, got {steps:?}"
        )));
    }
    Ok(())
}

fn last_summary(report: &ConvergenceReport) -> String {
    let Some(row) = report.rows.last() else {
        return String::new();
    };
    let mut parts = Vec::new();
    for (i, name) in report.error_names.iter().enumerate() {
        let rate = row.rates[i].map(|r| format!(" (rate {r:.4})")).unwrap_or_default();
        parts.push(format!("{name}={:.4e}{rate}", row.errors[i]));
    }
    format!("{}={} {}", report.resolution_name, row.resolution, parts.join(" "))
}

/// Runs the command and returns the one-line summary.
pub fn run(config: &RunConfig) -> Result<String> {
    match config {
        RunConfig::DerivativeBench { study, output } => {
            let report = run_study(&StudyConfig::Scalar(study.clone()))?;
            emit_report(&report, ReportFormat::Csv, output)?;
            Ok(format!(
                "derivative-bench {}: {} -> {}",
                study.signal.id(),
                last_summary(&report),
                output.display()
            ))
        }
        RunConfig::Solve {
            problem,
            weights,
            alphas,
            degree,
            steps,
            horizon,
            length,
            solver,
            output,
        } => {
            let mt = MultiTermOperator::new(weights, alphas)?;
            let spec = match problem {
                SolveProblem::Example4 => {
                    let mut spec = example4_problem(mt, *horizon)?;
                    spec.length = *length;
                    spec
                }
                SolveProblem::Homogeneous => ProblemSpec::homogeneous(*length, *horizon, mt)?,
            };
            let start = Instant::now();
            let norms = solve_and_measure(&spec, *degree, *steps, *solver)?;
            let cpu = start.elapsed().as_secs_f64();
            let mut report = ConvergenceReport::new("dt", &["e_inf", "e_0", "e_1"], &["cpu"]);
            report.push(horizon / *steps as f64, norms.to_vec(), vec![cpu]);
            let report = report
                .with_meta("study", "solve")
                .with_meta("N", degree)
                .with_meta("N_T", steps)
                .with_meta("horizon", horizon);
            emit_report(&report, ReportFormat::Csv, output)?;
            Ok(format!(
                "solve N={degree} N_T={steps} t={horizon}: {} -> {}",
                last_summary(&report),
                output.display()
            ))
        }
        RunConfig::TemporalStudy { study, output } => {
            let report = run_study(&StudyConfig::Temporal(study.clone()))?;
            emit_report(&report, ReportFormat::Csv, output)?;
            Ok(format!(
                "temporal-study N={}: {} -> {}",
                study.degree,
                last_summary(&report),
                output.display()
            ))
        }
        RunConfig::SpatialStudy {
            study,
            output,
            plot_output,
        } => {
            let report = run_study(&StudyConfig::Spatial(study.clone()))?;
            emit_report(&report, ReportFormat::Csv, output)?;
            emit_report(&report, ReportFormat::PlotData, plot_output)?;
            Ok(format!(
                "spatial-study dt={}: {} -> {}",
                study.dt,
                last_summary(&report),
                output.display()
            ))
        }
    }
}

/// Parses, runs, prints, and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&config) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        parse_args(std::iter::once("cffcm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let RunConfig::DerivativeBench { study, .. } =
            parse(&["derivative-bench", "--signal", "power4", "--alpha", "0.5"])
        else {
            panic!()
        };
        assert_eq!(study, ScalarConfig::default());

        let RunConfig::TemporalStudy { study, .. } = parse(&["temporal-study", "--case", "2"]) else {
            panic!()
        };
        assert_eq!(study.alphas, vec![0.3, 0.5, 0.7]);
        assert_eq!(study.weights, vec![1.0, 2.0, 3.0]);
        assert_eq!(study.degree, 20);
        assert_eq!(study.steps, vec![160, 320, 640, 1280, 2560]);
    }

    #[test]
    fn config_file_layering() {
        let text = "# comment\nalpha = 0.2, 0.4\nd = 1, 1  # trailing\nn = 12\n";
        let file = Params::from_config_text(text, Path::new("x.conf")).unwrap();
        let flags = Params {
            n: Some(vec![16]),
            ..Params::default()
        };
        let p = flags.over(file);
        assert_eq!(p.n, Some(vec![16]));
        assert_eq!(p.alpha, Some(vec![0.2, 0.4]));
        assert_eq!(p.d, Some(vec![1.0, 1.0]));
        assert!(Params::from_config_text("bogus = 1", Path::new("x")).is_err());
        assert!(Params::from_config_text("alpha 0.5", Path::new("x")).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |args: &[&str]| parse_args(std::iter::once("cffcm").chain(args.iter().copied()));
        assert!(matches!(bad(&[]), Err(CliError::Usage(_))));
        assert!(matches!(bad(&["solve", "--bogus", "1"]), Err(CliError::Usage(_))));
        assert!(matches!(bad(&["solve", "--alpha", "1.5"]), Err(CliError::Config(_))));
        assert!(matches!(
            bad(&["derivative-bench", "--d", "1"]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            bad(&["temporal-study", "--nt", "10,30"]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(bad(&["solve", "--case", "7"]), Err(CliError::Config(_))));
        assert!(matches!(bad(&["solve", "--solver", "lu"]), Err(CliError::Config(_))));
    }
}
