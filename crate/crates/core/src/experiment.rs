//! Configured experiment runs: config parsing, method wiring, reports.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Keys:
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `problem` | `poisson1d`, `poisson2d`, `poisson3d`, `matrix_file` | `poisson2d` |
//! | `grid` | interior points per axis, e.g. `63x63` | `63x63` |
//! | `matrix_file`, `rhs_file` | Matrix Market paths | |
//! | `ranks` | simulated ranks, one subdomain each | `16` |
//! | `overlap` | overlap layers `δ` | `2` |
//! | `method` | `psc`, `ssc`, `srsc`, `prsc`, `ssc_alpha` | `prsc` |
//! | `solver` | `fgmres`, `stationary` | `fgmres` |
//! | `colorized` | `true` / `false` | `false` |
//! | `prsc_scaling` | `multiplicity`, `none` | `multiplicity` |
//! | `partition` | `contiguous`, `greedy` | `contiguous` |
//! | `restart`, `tol`, `max_iters` | solver controls | `30`, `1e-8`, `10000` |
//! | `fault_schedule` | schedule file path, or inline records joined by `;` | empty |
//! | `enforce_a1` | `true` / `false` | `true` |
//! | `detection_latency` | iterations | `0` |
//! | `random_failures`, `random_horizon` | seeded repaired fail-stops | `0`, `100` |
//! | `seed` | integer | `0` |
//! | `output_dir` | directory for `history.csv` and `summary.json` | none |
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faultsim::{validate_schedule, FaultSchedule, FaultSimulator, Violation};
use crate::krylov::{fgmres, stationary_solve, FlexiblePreconditioner, SolveReport, SolverConfig, Sweep};
use crate::partition::{OverlapPartition, PartitionStrategy};
use crate::problems::{ProblemKind, ProblemSpec, SparseSystem};
use crate::redundancy::{PairingMap, PrscScaling, ResilientOperator, ResilientVariant};
use crate::schwarz::{SchwarzOperator, SchwarzVariant};
use crate::subspace::SolverKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Psc,
    Ssc,
    Srsc,
    Prsc,
    /// Compromised SSC, failed subdomain corrected with `α_j I`.
    SscAlpha,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Psc => "psc",
            Method::Ssc => "ssc",
            Method::Srsc => "srsc",
            Method::Prsc => "prsc",
            Method::SscAlpha => "ssc_alpha",
        }
    }

    pub fn needs_pairing(self) -> bool {
        matches!(self, Method::Srsc | Method::Prsc | Method::SscAlpha)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psc" => Ok(Method::Psc),
            "ssc" => Ok(Method::Ssc),
            "srsc" => Ok(Method::Srsc),
            "prsc" => Ok(Method::Prsc),
            "ssc_alpha" => Ok(Method::SscAlpha),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterSolver {
    Fgmres,
    Stationary,
}

impl OuterSolver {
    pub fn name(self) -> &'static str {
        match self {
            OuterSolver::Fgmres => "fgmres",
            OuterSolver::Stationary => "stationary",
        }
    }
}

impl std::str::FromStr for OuterSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgmres" => Ok(OuterSolver::Fgmres),
            "stationary" => Ok(OuterSolver::Stationary),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub n_ranks: usize,
    pub overlap: usize,
    pub method: Method,
    pub solver: OuterSolver,
    pub colorized: bool,
    pub prsc_scaling: PrscScaling,
    pub partition: PartitionStrategy,
    pub solver_config: SolverConfig,
    pub fault_schedule: FaultSchedule,
    pub random_failures: usize,
    pub random_horizon: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::poisson(&[63, 63]),
            n_ranks: 16,
            overlap: 2,
            method: Method::Prsc,
            solver: OuterSolver::Fgmres,
            colorized: false,
            prsc_scaling: PrscScaling::Multiplicity,
            partition: PartitionStrategy::Contiguous,
            solver_config: SolverConfig::default(),
            fault_schedule: FaultSchedule::empty(),
            random_failures: 0,
            random_horizon: 100,
            seed: 0,
            output_dir: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{value}`"))),
    }
}

fn parse_grid(value: &str) -> Result<Vec<usize>> {
    value
        .split(['x', 'X', ','])
        .map(|t| parse_value::<usize>("grid", t.trim()))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let mut cfg = Self::default();
        let mut grid: Option<Vec<usize>> = None;
        let mut kind: Option<ProblemKind> = None;
        let mut matrix_file = None;
        let mut rhs_file = None;
        let mut schedule_value: Option<String> = None;
        let mut enforce_a1 = true;
        let mut latency = 0;
        let mut seen = BTreeMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "problem" => kind = Some(value.parse()?),
                "grid" => grid = Some(parse_grid(value)?),
                "matrix_file" => matrix_file = Some(resolve(value)),
                "rhs_file" => rhs_file = Some(resolve(value)),
                "ranks" | "n_ranks" => cfg.n_ranks = parse_value(key, value)?,
                "overlap" | "delta" => cfg.overlap = parse_value(key, value)?,
                "method" => cfg.method = value.parse()?,
                "solver" => cfg.solver = value.parse()?,
                "colorized" => cfg.colorized = parse_bool(key, value)?,
                "prsc_scaling" => cfg.prsc_scaling = value.parse()?,
                "partition" => cfg.partition = value.parse()?,
                "restart" => cfg.solver_config.restart = parse_value(key, value)?,
                "tol" => cfg.solver_config.tol = parse_value(key, value)?,
                "max_iters" => cfg.solver_config.max_iters = parse_value(key, value)?,
                "fault_schedule" => schedule_value = Some(value.to_string()),
                "enforce_a1" => enforce_a1 = parse_bool(key, value)?,
                "detection_latency" => latency = parse_value(key, value)?,
                "random_failures" => cfg.random_failures = parse_value(key, value)?,
                "random_horizon" => cfg.random_horizon = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "output_dir" => cfg.output_dir = Some(resolve(value)),
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }

        let kind = kind.unwrap_or(if matrix_file.is_some() {
            ProblemKind::MatrixFile
        } else {
            ProblemKind::Poisson2d
        });
        cfg.problem = match kind {
            ProblemKind::MatrixFile => {
                let mut p = ProblemSpec::matrix_file(
                    matrix_file.ok_or_else(|| Error::Config("matrix_file problem needs `matrix_file`".into()))?,
                );
                p.rhs_path = rhs_file;
                p
            }
            k => {
                let dims = grid.unwrap_or_else(|| vec![63; k.dimension().expect("generated")]);
                let mut p = ProblemSpec::poisson(&dims);
                if p.kind != k {
                    return Err(Error::Config(format!(
                        "{} needs {} grid dimensions, got {}",
                        k.name(),
                        k.dimension().expect("generated"),
                        dims.len()
                    )));
                }
                if matrix_file.is_some() || rhs_file.is_some() {
                    return Err(Error::Config("matrix_file/rhs_file given for a generated problem".into()));
                }
                p.kind = k;
                p
            }
        };

        let mut schedule = match schedule_value {
            None => FaultSchedule::empty(),
            Some(v) => {
                let candidate = resolve(&v);
                if candidate.is_file() {
                    FaultSchedule::from_file(&candidate)?
                } else {
                    FaultSchedule::parse(&v)?
                }
            }
        };
        schedule.enforce_a1 = enforce_a1;
        cfg.fault_schedule = schedule.with_detection_latency(latency);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.solver_config.validate()?;
        if self.n_ranks == 0 {
            return Err(Error::Config("ranks must be at least 1".into()));
        }
        if self.method.needs_pairing() {
            PairingMap::new(self.n_ranks)?;
        }
        if self.solver == OuterSolver::Stationary && matches!(self.method, Method::Psc | Method::Prsc) {
            return Err(Error::Config(format!(
                "{} is used as a preconditioner only; pick solver = fgmres",
                self.method.name()
            )));
        }
        Ok(())
    }

    /// Canonical `key = value` form; parsing it back gives the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Config echo used in summaries.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("problem".into(), self.problem.kind.name().into());
        if self.problem.kind == ProblemKind::MatrixFile {
            if let Some(p) = &self.problem.file_path {
                m.insert("matrix_file".into(), p.display().to_string());
            }
            if let Some(p) = &self.problem.rhs_path {
                m.insert("rhs_file".into(), p.display().to_string());
            }
        } else {
            let g: Vec<String> = self.problem.grid_dims.iter().map(|d| d.to_string()).collect();
            m.insert("grid".into(), g.join("x"));
        }
        m.insert("ranks".into(), self.n_ranks.to_string());
        m.insert("overlap".into(), self.overlap.to_string());
        m.insert("method".into(), self.method.name().into());
        m.insert("solver".into(), self.solver.name().into());
        m.insert("colorized".into(), self.colorized.to_string());
        m.insert("partition".into(), self.partition.name().into());
        m.insert("prsc_scaling".into(), self.prsc_scaling.name().into());
        m.insert("restart".into(), self.solver_config.restart.to_string());
        m.insert("tol".into(), format!("{:e}", self.solver_config.tol));
        m.insert("max_iters".into(), self.solver_config.max_iters.to_string());
        let sched: Vec<String> = self.fault_schedule.events().iter().map(|e| e.to_string()).collect();
        if !sched.is_empty() {
            m.insert("fault_schedule".into(), sched.join("; "));
        }
        m.insert("enforce_a1".into(), self.fault_schedule.enforce_a1.to_string());
        m.insert(
            "detection_latency".into(),
            self.fault_schedule.detection_latency.to_string(),
        );
        m.insert("random_failures".into(), self.random_failures.to_string());
        m.insert("random_horizon".into(), self.random_horizon.to_string());
        m.insert("seed".into(), self.seed.to_string());
        if let Some(d) = &self.output_dir {
            m.insert("output_dir".into(), d.display().to_string());
        }
        m
    }

    /// The schedule actually used: the configured events plus any seeded
    /// random fail-stops.
    pub fn effective_schedule(&self) -> Result<FaultSchedule> {
        if self.random_failures == 0 {
            return Ok(self.fault_schedule.clone());
        }
        let extra = FaultSchedule::random_fail_stops(
            self.n_ranks,
            self.random_failures,
            self.random_horizon,
            self.seed,
        )?;
        let mut events = self.fault_schedule.events().to_vec();
        events.extend_from_slice(extra.events());
        Ok(FaultSchedule::new(events, self.fault_schedule.enforce_a1)?
            .with_detection_latency(self.fault_schedule.detection_latency))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub converged: bool,
    pub iterations: usize,
    pub final_relres: f64,
    pub messages: u64,
    pub local_solves: u64,
    pub n_dofs: usize,
    pub residual_history: Vec<f64>,
    pub n_alive: Vec<usize>,
    pub config: BTreeMap<String, String>,
    /// Set when the run stopped on the divergence guard.
    pub diagnostic: Option<String>,
    /// Seconds; informational only.
    pub wall_time_s: f64,
}

impl Summary {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// `iter,relres,n_alive` rows.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,relres,n_alive\n");
        for (k, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(s, "{k},{r:e},{}", self.n_alive.get(k).copied().unwrap_or(0));
        }
        s
    }

    /// Everything except the wall time.
    pub fn same_outcome(&self, other: &Summary) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        a == *other
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: SolveReport,
    pub solution: Vec<f64>,
    pub summary: Summary,
}

enum MethodOp {
    Schwarz(SchwarzOperator),
    Resilient(ResilientOperator),
}

/// Method operator driven by the fault simulator, one simulator step per
/// outer iteration.
struct Driver {
    op: MethodOp,
    sim: FaultSimulator,
    alive: Vec<bool>,
}

impl Driver {
    fn step(&mut self, iteration: usize, v: Option<&mut [f64]>) -> Result<()> {
        let step = self.sim.advance(iteration)?;
        if let MethodOp::Resilient(op) = &mut self.op {
            op.handle_step(&step, v)?;
        }
        self.alive = step.alive;
        Ok(())
    }

    fn masked(&self) -> Option<&[bool]> {
        self.alive.iter().any(|a| !a).then_some(&self.alive[..])
    }
}

impl FlexiblePreconditioner for Driver {
    fn apply(&mut self, iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        self.step(iteration, None)?;
        let mask = self.masked().map(|m| m.to_vec());
        match &mut self.op {
            MethodOp::Schwarz(op) => op.apply(r, mask.as_deref()),
            MethodOp::Resilient(op) => op.apply(r, &self.alive),
        }
    }

    fn active_ranks(&self) -> Option<Vec<usize>> {
        Some((0..self.alive.len()).filter(|&r| self.alive[r]).collect())
    }

    fn messages(&self) -> u64 {
        match &self.op {
            MethodOp::Schwarz(_) => 0,
            MethodOp::Resilient(op) => op.messages(),
        }
    }

    fn local_solves(&self) -> u64 {
        match &self.op {
            MethodOp::Schwarz(op) => op.local_solves(),
            MethodOp::Resilient(op) => op.local_solves(),
        }
    }
}

impl Sweep for Driver {
    fn sweep(&mut self, iteration: usize, v: &mut [f64], f: &[f64]) -> Result<()> {
        self.step(iteration, Some(v))?;
        let mask = self.masked().map(|m| m.to_vec());
        match &mut self.op {
            MethodOp::Schwarz(op) => op.sweep_in_place(v, f, mask.as_deref()),
            MethodOp::Resilient(op) => op.sweep(v, f, &self.alive),
        }
    }

    fn active_ranks(&self) -> Option<Vec<usize>> {
        FlexiblePreconditioner::active_ranks(self)
    }

    fn messages(&self) -> u64 {
        FlexiblePreconditioner::messages(self)
    }

    fn local_solves(&self) -> u64 {
        FlexiblePreconditioner::local_solves(self)
    }
}

fn violations_to_error(v: &[Violation]) -> Error {
    Error::Schedule(format!("invalid fault schedule: {v:?}"))
}

/// Builds the problem, partition and method, runs the outer solver and
/// writes `history.csv` / `summary.json` when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let started = Instant::now();
    let system = config.problem.build()?;
    run_on_system(config, &system, started)
}

/// Like [`run_experiment`] but on a caller-supplied system; the config's
/// `problem` entry is only echoed.
pub fn run_with_system(config: &ExperimentConfig, system: &SparseSystem) -> Result<ExperimentOutcome> {
    config.validate()?;
    run_on_system(config, system, Instant::now())
}

fn run_on_system(config: &ExperimentConfig, system: &SparseSystem, started: Instant) -> Result<ExperimentOutcome> {
    let a = system.matrix.clone();
    let partition = OverlapPartition::build(&a, config.n_ranks, config.partition, config.overlap)?;
    let schedule = config.effective_schedule()?;

    if config.method.needs_pairing() || config.n_ranks % 2 == 0 {
        let pairing = PairingMap::new(config.n_ranks)?;
        let horizon = Some(config.solver_config.max_iters);
        let violations = validate_schedule(&schedule, &pairing, horizon);
        let relevant: Vec<Violation> = violations
            .into_iter()
            .filter(|v| config.method.needs_pairing() || !matches!(v, Violation::PairWide { .. }))
            .collect();
        if !relevant.is_empty() {
            return Err(violations_to_error(&relevant));
        }
    } else if let Some(e) = schedule.events().iter().find(|e| e.rank >= config.n_ranks) {
        return Err(Error::Schedule(format!("event `{e}` names a rank beyond {}", config.n_ranks)));
    }

    let colorized_variant = if config.colorized {
        SchwarzVariant::SscColorized
    } else {
        SchwarzVariant::Ssc
    };
    let op = match config.method {
        Method::Psc => MethodOp::Schwarz(SchwarzOperator::new(a.clone(), partition, SolverKind::Exact, SchwarzVariant::Psc)?),
        Method::Ssc => MethodOp::Schwarz(SchwarzOperator::new(a.clone(), partition, SolverKind::Exact, colorized_variant)?),
        Method::Srsc => MethodOp::Resilient(ResilientOperator::new(a.clone(), partition, ResilientVariant::Srsc, config.colorized)?),
        Method::Prsc => {
            let mut op = ResilientOperator::new(a.clone(), partition, ResilientVariant::Prsc, false)?;
            op.set_prsc_scaling(config.prsc_scaling);
            MethodOp::Resilient(op)
        }
        Method::SscAlpha => MethodOp::Resilient(ResilientOperator::new(
            a.clone(),
            partition,
            ResilientVariant::CompromisedSscAlpha,
            config.colorized,
        )?),
    };
    let mut driver = Driver {
        op,
        sim: FaultSimulator::new(schedule, config.n_ranks)?,
        alive: vec![true; config.n_ranks],
    };

    let result = match config.solver {
        OuterSolver::Fgmres => fgmres(&a, &system.rhs, &mut driver, &config.solver_config),
        OuterSolver::Stationary => stationary_solve(&a, &system.rhs, &mut driver, &config.solver_config),
    };
    let (solution, report, diagnostic) = match result {
        Ok((x, r)) => (x, r, None),
        Err(e @ Error::Divergence { .. }) => {
            let report = SolveReport {
                converged: false,
                messages: FlexiblePreconditioner::messages(&driver),
                local_solves: FlexiblePreconditioner::local_solves(&driver),
                ..SolveReport::default()
            };
            (Vec::new(), report, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };

    let mut n_alive = Vec::with_capacity(report.residual_history.len());
    if !report.residual_history.is_empty() {
        n_alive.push(report.active_ranks_per_iter.first().map_or(config.n_ranks, |s| s.len()));
        n_alive.extend(report.active_ranks_per_iter.iter().map(|s| s.len()));
    }
    let summary = Summary {
        converged: report.converged,
        iterations: report.iterations,
        final_relres: report.final_relres(),
        messages: report.messages,
        local_solves: report.local_solves,
        n_dofs: a.n_rows(),
        residual_history: report.residual_history.clone(),
        n_alive,
        config: config.echo(),
        diagnostic,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("history.csv"), summary.history_csv())?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(ExperimentOutcome {
        report,
        solution,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `iterations(b) / iterations(a)`.
    pub iteration_ratio: f64,
    /// `messages(b) - messages(a)`.
    pub message_overhead: i64,
    /// `local_solves(b) - local_solves(a)`.
    pub local_solve_overhead: i64,
    /// Largest `|log10 relres_a[k] - log10 relres_b[k]|` over the common
    /// prefix of the histories.
    pub history_max_log10_gap: f64,
    pub common_prefix: usize,
    pub identical: bool,
}

const SAME_PROBLEM_KEYS: [&str; 6] = ["problem", "grid", "matrix_file", "ranks", "overlap", "partition"];

/// Compares two runs of the same problem and partition.
pub fn compare_runs(a: &Summary, b: &Summary) -> Result<Comparison> {
    for key in SAME_PROBLEM_KEYS {
        if a.config.get(key) != b.config.get(key) {
            return Err(Error::Mismatch(format!(
                "runs differ in `{key}`: {:?} vs {:?}",
                a.config.get(key),
                b.config.get(key)
            )));
        }
    }
    let common = a.residual_history.len().min(b.residual_history.len());
    let gap = a.residual_history[..common]
        .iter()
        .zip(&b.residual_history[..common])
        .map(|(x, y)| {
            if x == y {
                0.0
            } else {
                (x.log10() - y.log10()).abs()
            }
        })
        .fold(0.0f64, f64::max);
    let ratio = if a.iterations == 0 {
        if b.iterations == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        b.iterations as f64 / a.iterations as f64
    };
    Ok(Comparison {
        iteration_ratio: ratio,
        message_overhead: b.messages as i64 - a.messages as i64,
        local_solve_overhead: b.local_solves as i64 - a.local_solves as i64,
        history_max_log10_gap: gap,
        common_prefix: common,
        identical: a.same_outcome(b),
    })
}
