//! Convergence and timing studies.
//!
//! Three kinds of study are provided: scalar derivative sweeps against closed
//! forms, temporal refinement of the three-term manufactured problem at fixed
//! degree, and spectral refinement at a tiny time step. Each produces a
//! [`ConvergenceReport`] that can be written as CSV or as plot data.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::cf::{
    cf_exact_cos, cf_exact_exp, cf_exact_power, fast_sweep, l1_sweep, FractionalOrder, SampledSignal, TimeGrid,
};
use crate::error::{Error, Result};
use crate::solver::{solve_with, ExactSolution, LinearSolver, ProblemSpec, SolveOptions};
use crate::spectral::error_norms;
use crate::timestep::MultiTermOperator;

/// Test signals for the scalar study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// `t^4`
    Power4,
    /// `cos 5t`
    Cos5,
    /// `exp 5t`
    Exp5,
}

impl Signal {
    pub const ALL: [Signal; 3] = [Signal::Power4, Signal::Cos5, Signal::Exp5];

    pub fn id(self) -> &'static str {
        match self {
            Signal::Power4 => "power4",
            Signal::Cos5 => "cos5",
            Signal::Exp5 => "exp5",
        }
    }

    pub fn eval(self, t: f64) -> f64 {
        match self {
            Signal::Power4 => t.powi(4),
            Signal::Cos5 => (5.0 * t).cos(),
            Signal::Exp5 => (5.0 * t).exp(),
        }
    }

    /// Exact CF derivative of the signal at `t`.
    pub fn exact(self, order: FractionalOrder, t: f64) -> Result<f64> {
        match self {
            Signal::Power4 => Ok(cf_exact_power(4, order, t)),
            Signal::Cos5 => Ok(cf_exact_cos(5.0, order, t)),
            Signal::Exp5 => cf_exact_exp(5.0, order, t),
        }
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown signal '{s}' (power4, cos5, exp5)")))
    }
}

/// Order sets of the three-term manufactured problem; weights are `(1, 2, 3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example4Case {
    One,
    Two,
    Three,
    Four,
}

impl Example4Case {
    pub const ALL: [Example4Case; 4] = [
        Example4Case::One,
        Example4Case::Two,
        Example4Case::Three,
        Example4Case::Four,
    ];
    pub const WEIGHTS: [f64; 3] = [1.0, 2.0, 3.0];

    pub fn number(self) -> u8 {
        match self {
            Example4Case::One => 1,
            Example4Case::Two => 2,
            Example4Case::Three => 3,
            Example4Case::Four => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Example4Case::ALL
            .into_iter()
            .find(|c| c.number() == n)
            .ok_or_else(|| Error::Config(format!("case must be 1, 2, 3 or 4, got {n}")))
    }

    pub fn alphas(self) -> [f64; 3] {
        match self {
            Example4Case::One => [0.5, 0.5, 0.5],
            Example4Case::Two => [0.3, 0.5, 0.7],
            Example4Case::Three => [0.2, 0.3, 0.4],
            Example4Case::Four => [0.6, 0.7, 0.8],
        }
    }

    pub fn operator(self) -> MultiTermOperator {
        MultiTermOperator::new(&Self::WEIGHTS, &self.alphas()).expect("valid built-in case")
    }
}

/// Forcing that makes `u = (1 + t^2) sin x` solve `P u = u_xx + f`.
pub fn forcing_example4(mt: &MultiTermOperator, x: f64, t: f64) -> f64 {
    let mut bracket = 1.0 + t * t;
    for &(d, order) in mt.terms() {
        let beta = order.beta();
        bracket += d / (1.0 - order.alpha())
            * (2.0 / beta * t - 2.0 / (beta * beta) + (-beta * t).exp() * 2.0 / (beta * beta));
    }
    x.sin() * bracket
}

/// The three-term manufactured problem on `(0, pi) x (0, T]` with its exact solution.
pub fn example4_problem(mt: MultiTermOperator, horizon: f64) -> Result<ProblemSpec> {
    let forcing_mt = mt.clone();
    Ok(ProblemSpec::new(
        PI,
        horizon,
        mt,
        Arc::new(f64::sin),
        Arc::new(move |x, t| forcing_example4(&forcing_mt, x, t)),
    )?
    .with_exact(ExactSolution {
        value: Arc::new(|x: f64, t: f64| (1.0 + t * t) * x.sin()),
        dx: Arc::new(|x: f64, t: f64| (1.0 + t * t) * x.cos()),
    }))
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// `dt` for temporal ladders, `N` for spatial ones.
    pub resolution: f64,
    pub errors: Vec<f64>,
    /// `log2(E_prev / E)`; `None` on the first row.
    pub rates: Vec<Option<f64>>,
    pub cpu: Vec<f64>,
    /// `log2(CPU / CPU_prev)`; `None` on the first row.
    pub cpu_rates: Vec<Option<f64>>,
}

/// Errors, rates and timings along a resolution ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub resolution_name: String,
    pub error_names: Vec<String>,
    pub cpu_names: Vec<String>,
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

fn log2_ratio(num: f64, den: f64) -> Option<f64> {
    let r = (num / den).log2();
    r.is_finite().then_some(r)
}

impl ConvergenceReport {
    pub fn new(resolution_name: &str, error_names: &[&str], cpu_names: &[&str]) -> Self {
        Self {
            resolution_name: resolution_name.to_owned(),
            error_names: error_names.iter().map(|s| s.to_string()).collect(),
            cpu_names: cpu_names.iter().map(|s| s.to_string()).collect(),
            metadata: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Appends a row; rates are taken against the previous row.
    pub fn push(&mut self, resolution: f64, errors: Vec<f64>, cpu: Vec<f64>) {
        assert_eq!(errors.len(), self.error_names.len(), "error column count");
        assert_eq!(cpu.len(), self.cpu_names.len(), "cpu column count");
        let (rates, cpu_rates) = match self.rows.last() {
            None => (vec![None; errors.len()], vec![None; cpu.len()]),
            Some(prev) => (
                prev.errors
                    .iter()
                    .zip(&errors)
                    .map(|(p, e)| log2_ratio(*p, *e))
                    .collect(),
                prev.cpu.iter().zip(&cpu).map(|(p, c)| log2_ratio(*c, *p)).collect(),
            ),
        };
        self.rows.push(ReportRow {
            resolution,
            errors,
            rates,
            cpu,
            cpu_rates,
        });
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.error_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.errors[i]).collect())
    }

    pub fn rate_column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.error_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.rates[i]).collect())
    }

    pub fn cpu_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.cpu_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.cpu[i]).collect())
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![self.resolution_name.clone()];
        h.extend(self.error_names.iter().cloned());
        h.extend(self.error_names.iter().map(|n| format!("rate_{n}")));
        h.extend(self.cpu_names.iter().cloned());
        h.extend(self.cpu_names.iter().map(|n| format!("{n}_rate")));
        h
    }

    pub fn to_csv(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let opt = |v: &Option<f64>| v.map(num).unwrap_or_default();
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for r in &self.rows {
            let mut fields = vec![num(r.resolution)];
            fields.extend(r.errors.iter().map(|&e| num(e)));
            fields.extend(r.rates.iter().map(opt));
            fields.extend(r.cpu.iter().map(|&c| num(c)));
            fields.extend(r.cpu_rates.iter().map(opt));
            w.write_record(&fields).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("ascii output"));
        out
    }

    /// Two columns `(resolution, log10 error)`, one block per error column,
    /// blocks separated by a blank line.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.error_names.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# {} log10({name})", self.resolution_name);
            for r in &self.rows {
                let _ = writeln!(out, "{} {:.10e}", r.resolution, r.errors[i].log10());
            }
        }
        out
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let metadata = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .map(|m| {
                m.split_once('=')
                    .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                    .ok_or_else(|| format!("metadata line without '=': #{m}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let cols: Vec<String> = reader
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_owned)
            .collect();
        let n_err = cols.iter().filter(|c| c.starts_with("rate_")).count();
        let n_cpu = cols.iter().filter(|c| c.ends_with("_rate")).count();
        if cols.is_empty() || cols.len() != 1 + 2 * n_err + 2 * n_cpu {
            return Err(format!("unexpected header {cols:?}"));
        }
        let cpu_start = 1 + 2 * n_err;
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let mut rows = Vec::new();
        for record in reader.records() {
            let f = record.map_err(|e| e.to_string())?;
            let f: Vec<&str> = f.iter().collect();
            let nums = |r: &[&str]| r.iter().map(|s| num(s)).collect::<std::result::Result<Vec<_>, _>>();
            let opts = |r: &[&str]| r.iter().map(|s| opt(s)).collect::<std::result::Result<Vec<_>, _>>();
            rows.push(ReportRow {
                resolution: num(f[0])?,
                errors: nums(&f[1..1 + n_err])?,
                rates: opts(&f[1 + n_err..cpu_start])?,
                cpu: nums(&f[cpu_start..cpu_start + n_cpu])?,
                cpu_rates: opts(&f[cpu_start + n_cpu..])?,
            });
        }
        Ok(Self {
            resolution_name: cols[0].clone(),
            error_names: cols[1..1 + n_err].to_vec(),
            cpu_names: cols[cpu_start..cpu_start + n_cpu].to_vec(),
            metadata,
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    PlotData,
}

/// Writes `report` to `path`.
pub fn emit_report(report: &ConvergenceReport, format: ReportFormat, path: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::domain("refusing to write an empty report"));
    }
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::PlotData => report.to_plot_data(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ConvergenceReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConvergenceReport::parse_csv(&text).map_err(|message| Error::Parse {
        path: path.to_owned(),
        message,
    })
}

/// Median wall time of `repeats` runs after one discarded warm-up run.
/// With `repeats == 0` the closure runs once, untimed warm-up excluded.
pub fn time_median<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut out = f()?;
    if repeats == 0 {
        return Ok((0.0, out));
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        out = std::hint::black_box(f()?);
        samples.push(start.elapsed().as_secs_f64());
    }
    samples.sort_by(f64::total_cmp);
    Ok((samples[repeats / 2], out))
}

fn check_doubling(steps: &[usize]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::Config("empty resolution ladder".into()));
    }
    if steps.contains(&0) || steps.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Config(format!(
            "step ladder must halve dt at each row, got {steps:?}"
        )));
    }
    Ok(())
}

/// Scalar derivative study: direct L1 sweep vs fast recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarConfig {
    pub signal: Signal,
    pub alpha: f64,
    pub horizon: f64,
    /// `N_T` values, each twice the previous.
    pub steps: Vec<usize>,
    /// Timed repetitions per ladder point; `0` skips timing.
    pub repeats: usize,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self {
            signal: Signal::Power4,
            alpha: 0.5,
            horizon: 2.0,
            steps: vec![5000, 10000, 20000, 40000, 80000],
            repeats: 5,
        }
    }
}

/// Temporal refinement of the three-term problem at fixed degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConfig {
    pub weights: Vec<f64>,
    pub alphas: Vec<f64>,
    pub degree: usize,
    pub horizon: f64,
    pub steps: Vec<usize>,
    pub solver: LinearSolver,
}

impl TemporalConfig {
    pub fn for_case(case: Example4Case) -> Self {
        Self {
            weights: Example4Case::WEIGHTS.to_vec(),
            alphas: case.alphas().to_vec(),
            degree: 20,
            horizon: 1.0,
            steps: vec![160, 320, 640, 1280, 2560],
            solver: LinearSolver::default(),
        }
    }
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self::for_case(Example4Case::One)
    }
}

/// Degree refinement of the three-term problem at a tiny time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialConfig {
    pub weights: Vec<f64>,
    pub alphas: Vec<f64>,
    pub degrees: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub solver: LinearSolver,
}

impl SpatialConfig {
    pub fn for_case(case: Example4Case) -> Self {
        Self {
            weights: Example4Case::WEIGHTS.to_vec(),
            alphas: case.alphas().to_vec(),
            degrees: (4..=24).step_by(2).collect(),
            dt: 1e-6,
            t_end: 0.01,
            solver: LinearSolver::default(),
        }
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Config(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self::for_case(Example4Case::One)
    }
}

/// Any of the three studies.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyConfig {
    Scalar(ScalarConfig),
    Temporal(TemporalConfig),
    Spatial(SpatialConfig),
}

pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    match config {
        StudyConfig::Scalar(c) => scalar_study(c),
        StudyConfig::Temporal(c) => temporal_study(c),
        StudyConfig::Spatial(c) => spatial_study(c),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Columns `E1` (direct) and `E2` (fast) at the last node, timings of whole
/// sweeps, and the largest `|F - L| / (1 + |L|)` over every step in
/// metadata key `max_equivalence_gap`.
pub fn scalar_study(config: &ScalarConfig) -> Result<ConvergenceReport> {
    check_doubling(&config.steps)?;
    let order = FractionalOrder::new(config.alpha)?;
    let exact = config.signal.exact(order, config.horizon)?;
    let mut report = ConvergenceReport::new("dt", &["E1", "E2"], &["cpu_direct", "cpu_fast"]);
    let mut gap = 0.0_f64;
    for &n in &config.steps {
        let grid = TimeGrid::new(config.horizon, n)?;
        let signal = SampledSignal::from_fn(grid, |t| config.signal.eval(t));
        let (cpu_l1, direct) = time_median(config.repeats, || Ok(l1_sweep(&signal, order)))?;
        let (cpu_fast, fast) = time_median(config.repeats, || fast_sweep(&signal, order))?;
        for (l, f) in direct.iter().zip(&fast) {
            gap = gap.max((f - l).abs() / (1.0 + l.abs()));
        }
        let e1 = (exact - direct[n - 1]).abs();
        let e2 = (exact - fast[n - 1]).abs();
        report.push(grid.dt(), vec![e1, e2], vec![cpu_l1, cpu_fast]);
    }
    Ok(report
        .with_meta("study", "scalar")
        .with_meta("signal", config.signal.id())
        .with_meta("alpha", config.alpha)
        .with_meta("horizon", config.horizon)
        .with_meta("max_equivalence_gap", format!("{gap:.6e}")))
}

/// Columns `e_inf`, `e_0`, `e_1` at `t = T`; `e_1` is the standard H1 norm.
pub fn temporal_study(config: &TemporalConfig) -> Result<ConvergenceReport> {
    check_doubling(&config.steps)?;
    let mt = MultiTermOperator::new(&config.weights, &config.alphas)?;
    let spec = example4_problem(mt, config.horizon)?;
    let mut report = ConvergenceReport::new("dt", &["e_inf", "e_0", "e_1"], &["cpu"]);
    for &n in &config.steps {
        let start = Instant::now();
        let norms = solve_and_measure(&spec, config.degree, n, config.solver)?;
        let cpu = start.elapsed().as_secs_f64();
        report.push(config.horizon / n as f64, norms.to_vec(), vec![cpu]);
    }
    Ok(report
        .with_meta("study", "temporal")
        .with_meta("d", join(&config.weights))
        .with_meta("alpha", join(&config.alphas))
        .with_meta("N", config.degree)
        .with_meta("horizon", config.horizon))
}

/// Same columns as [`temporal_study`], one row per degree.
pub fn spatial_study(config: &SpatialConfig) -> Result<ConvergenceReport> {
    if config.degrees.is_empty() || config.degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "degree ladder must be strictly increasing, got {:?}",
            config.degrees
        )));
    }
    let steps = config.steps()?;
    let mt = MultiTermOperator::new(&config.weights, &config.alphas)?;
    let spec = example4_problem(mt, config.t_end)?;
    let mut report = ConvergenceReport::new("N", &["e_inf", "e_0", "e_1"], &["cpu"]);
    for &n in &config.degrees {
        let start = Instant::now();
        let norms = solve_and_measure(&spec, n, steps, config.solver)?;
        let cpu = start.elapsed().as_secs_f64();
        report.push(n as f64, norms.to_vec(), vec![cpu]);
    }
    Ok(report
        .with_meta("study", "spatial")
        .with_meta("d", join(&config.weights))
        .with_meta("alpha", join(&config.alphas))
        .with_meta("dt", config.dt)
        .with_meta("t_end", config.t_end))
}

/// `[sup, L2, H1]` errors of the march at the final time; the H1 norm uses
/// unit weight on the derivative.
pub fn solve_and_measure(spec: &ProblemSpec, degree: usize, steps: usize, solver: LinearSolver) -> Result<[f64; 3]> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config("problem has no exact solution".into()))?;
    let sol = solve_with(
        spec,
        degree,
        steps,
        SolveOptions {
            solver,
            record_norms: false,
        },
    )?;
    let t = sol.time;
    let e = error_norms(|x| (exact.value)(x, t), |x| (exact.dx)(x, t), &sol.field, 1.0)?;
    Ok([e.sup, e.l2, e.h1])
}
