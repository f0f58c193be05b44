//! Experiment specs, seeded run batches and their CSV/JSON output.
//!
//! An [`ExperimentSpec`] names one problem, a list of solvers and a number of
//! runs. [`resolve`] materializes every solver parameter through the
//! parameter builders; [`execute`] runs `runs x solvers` independent jobs
//! (run `i` uses seed `base + i`); [`write_outputs`] writes one trace CSV per
//! job, `summary.csv`, `manifest.json` and `timings.csv`. Only the timings
//! depend on the machine, so the other files are byte-reproducible.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::batch::{run_batch, Parallelism};
use crate::error::Error;
use crate::estimator::{Objective, ScheduleMode, SmoothingSchedule};
use crate::manifold::{Manifold, Point};
use crate::problems::{
    gen_ls_data, QuarticProblem, SimplexLsProblem, SphereQuadraticProblem, DEFAULT_LS_NOISE,
};
use crate::solvers::{
    params_asymptotic, params_fosp, params_rzgd, params_sosp, pzgd, razgd, rzgd, Multipliers,
    ProblemConstants, SolverConfig, StepSchedule, TangentOption, Trace, DEFAULT_MAX_OUTER,
    DEFAULT_QUERY_BUDGET,
};

pub const SUMMARY_HEADER: &str = "solver,run_id,final_f,queries,termination,escaped_saddle";
pub const TIMINGS_HEADER: &str = "solver,run_id,elapsed_ms";

/// Decay factor of the default inner schedule of `razgd_II`.
pub const DEFAULT_ASYMPTOTIC_BETA: f64 = 0.9;

/// Failures of the harness, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver `{label}` run {run} failed: {source}")]
    Solver {
        label: String,
        run: usize,
        #[source]
        source: Error,
    },
    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Solver { .. } => 3,
            HarnessError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `sum x_i^4 / 4 - y sum x_i + d y^2 / 2` on `R^{d+1}`, started at the saddle.
    Quartic { d: usize },
    /// `|Ax - b|^2` on the simplex, started at the barycentre.
    SimplexLs {
        m: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// Rayleigh quotient of a random symmetric matrix on the sphere.
    SphereQuadratic { d: usize, seed: u64 },
}

fn default_noise() -> f64 {
    DEFAULT_LS_NOISE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "razgd_I")]
    RazgdI,
    #[serde(rename = "razgd_I_perturbed")]
    RazgdIPerturbed,
    #[serde(rename = "razgd_II")]
    RazgdII,
    #[serde(rename = "rzgd")]
    Rzgd,
    #[serde(rename = "pzgd")]
    Pzgd,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::RazgdI => "razgd_I",
            SolverKind::RazgdIPerturbed => "razgd_I_perturbed",
            SolverKind::RazgdII => "razgd_II",
            SolverKind::Rzgd => "rzgd",
            SolverKind::Pzgd => "pzgd",
        }
    }
}

/// One solver entry: problem constants for the builders plus optional
/// explicit overrides of individual parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: SolverKind,
    /// Output label; defaults to the kind name. Must be unique.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub epsilon: f64,
    pub l: f64,
    pub rho: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_radius")]
    pub b: f64,
    #[serde(default)]
    pub multipliers: Multipliers,
    /// Sets both smoothing schedules to this constant (bypasses the guard).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_outer: Option<SmoothingSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_inner: Option<SmoothingSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Step sizes of `pzgd`; defaults to the constant `eta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepSchedule>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_radius() -> f64 {
    1.0
}

impl SolverSpec {
    pub fn new(kind: SolverKind, epsilon: f64, l: f64, rho: f64) -> Self {
        Self {
            kind,
            label: None,
            epsilon,
            l,
            rho,
            delta: default_delta(),
            b: default_radius(),
            multipliers: Multipliers::default(),
            mu: None,
            mu_outer: None,
            mu_inner: None,
            eta: None,
            theta: None,
            big_b: None,
            cap_k: None,
            r: None,
            steps: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub query_budget: u64,
    pub max_outer: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            query_budget: DEFAULT_QUERY_BUDGET,
            max_outer: DEFAULT_MAX_OUTER,
            wall_clock_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub problem: ProblemSpec,
    pub solvers: Vec<SolverSpec>,
    pub runs: usize,
    /// Base seed; run `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
}

/// Parses a spec from JSON text. Errors name the JSON path of the offending
/// value.
pub fn parse_spec_str(text: &str) -> Result<ExperimentSpec, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn parse_spec(path: &Path) -> Result<ExperimentSpec, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_spec_str(&text)
}

/// Problem data built from a [`ProblemSpec`].
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Quartic(QuarticProblem),
    SimplexLs(SimplexLsProblem),
    SphereQuadratic(SphereQuadraticProblem),
}

impl ProblemInstance {
    pub fn build(spec: &ProblemSpec) -> Result<Self, HarnessError> {
        let cfg = |e: Error| HarnessError::Config(format!("problem: {e}"));
        Ok(match *spec {
            ProblemSpec::Quartic { d } => {
                ProblemInstance::Quartic(QuarticProblem::new(d).map_err(cfg)?)
            }
            ProblemSpec::SimplexLs { m, d, seed, noise } => {
                ProblemInstance::SimplexLs(gen_ls_data(m, d, seed, noise).map_err(cfg)?)
            }
            ProblemSpec::SphereQuadratic { d, seed } => {
                if d < 2 {
                    return Err(HarnessError::Config(format!(
                        "problem: sphere needs d >= 2, got {d}"
                    )));
                }
                ProblemInstance::SphereQuadratic(
                    SphereQuadraticProblem::random(d, seed).map_err(cfg)?,
                )
            }
        })
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            ProblemInstance::Quartic(p) => p.manifold(),
            ProblemInstance::SimplexLs(p) => p.manifold(),
            ProblemInstance::SphereQuadratic(p) => p.manifold(),
        }
    }

    pub fn start(&self) -> Point {
        match self {
            ProblemInstance::Quartic(p) => p.saddle(),
            ProblemInstance::SimplexLs(p) => p.barycentre(),
            ProblemInstance::SphereQuadratic(p) => p.default_start(),
        }
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        match self {
            ProblemInstance::Quartic(p) => p.eval(z),
            ProblemInstance::SimplexLs(p) => p.eval(z),
            ProblemInstance::SphereQuadratic(p) => p.eval(z),
        }
    }

    pub fn escape_rule(&self) -> EscapeRule {
        match self {
            ProblemInstance::Quartic(p) => EscapeRule {
                threshold: Some(-(p.d() as f64) / 8.0),
                definition:
                    "final_f < -d/8, halfway from the saddle value 0 to the global minimum -d/4"
                        .into(),
            },
            ProblemInstance::SimplexLs(_) => EscapeRule {
                threshold: None,
                definition: "always true: the objective is convex on the simplex and has no saddle"
                    .into(),
            },
            ProblemInstance::SphereQuadratic(p) => {
                let ev = p.eigenvalues();
                EscapeRule {
                    threshold: Some(0.5 * (ev[0] + ev[1])),
                    definition:
                        "final_f < (lambda_1 + lambda_2)/2, below every non-minimal critical value"
                            .into(),
                }
            }
        }
    }
}

/// Problem-specific definition of `escaped_saddle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRule {
    /// `None` means the predicate is constantly true.
    pub threshold: Option<f64>,
    pub definition: String,
}

impl EscapeRule {
    pub fn holds(&self, final_f: f64) -> bool {
        self.threshold.is_none_or(|t| final_f < t)
    }
}

/// A solver entry with every parameter materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSolver {
    pub label: String,
    pub kind: SolverKind,
    pub inputs: SolverSpec,
    /// Configuration of run 0; run `i` differs only in `seed`.
    pub config: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepSchedule>,
}

impl ResolvedSolver {
    pub fn config_for_run(&self, base_seed: u64, run: usize) -> SolverConfig {
        let mut cfg = self.config.clone();
        cfg.seed = base_seed.wrapping_add(run as u64);
        cfg
    }

    /// Runs this solver once on `problem`.
    pub fn run(&self, problem: &ProblemInstance, cfg: &SolverConfig) -> crate::Result<Trace> {
        let m = problem.manifold();
        let x0 = problem.start();
        let mut f = Objective::new(|z: &DVector<f64>| problem.eval(z));
        match self.kind {
            SolverKind::RazgdI | SolverKind::RazgdIPerturbed => {
                razgd(&mut f, &m, &x0, cfg, TangentOption::I)
            }
            SolverKind::RazgdII => razgd(&mut f, &m, &x0, cfg, TangentOption::II),
            SolverKind::Rzgd => rzgd(&mut f, &m, &x0, cfg),
            SolverKind::Pzgd => {
                let steps = self.steps.unwrap_or(StepSchedule::Constant(cfg.eta));
                pzgd(&mut f, &m, &x0, cfg, steps)
            }
        }
    }
}

/// The fully resolved experiment; serialized as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub problem: ProblemSpec,
    pub manifold: Manifold,
    pub start: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub budgets: Budgets,
    pub escaped_saddle: EscapeRule,
    pub solvers: Vec<ResolvedSolver>,
}

/// Builds one solver's configuration from its spec entry.
pub fn resolve_solver(
    s: &SolverSpec,
    dim: usize,
    budgets: &Budgets,
) -> Result<ResolvedSolver, HarnessError> {
    let label = s.label().to_string();
    let cfg_err = |e: Error| HarnessError::Config(format!("solver `{label}`: {e}"));
    let c = ProblemConstants {
        l: s.l,
        rho: s.rho,
        b: s.b,
        dim,
    };
    let mut cfg = match s.kind {
        SolverKind::RazgdI => params_fosp(s.epsilon, &c, &s.multipliers),
        SolverKind::RazgdIPerturbed => params_sosp(s.epsilon, s.delta, &c, &s.multipliers),
        SolverKind::RazgdII => params_fosp(s.epsilon, &c, &s.multipliers).and_then(|base| {
            let schedule = s.mu_inner.unwrap_or(SmoothingSchedule::geometric(
                base.mu_inner.mu0,
                DEFAULT_ASYMPTOTIC_BETA,
            ));
            params_asymptotic(s.epsilon, &c, &s.multipliers, schedule)
        }),
        SolverKind::Rzgd | SolverKind::Pzgd => params_rzgd(s.epsilon, &c, &s.multipliers),
    }
    .map_err(cfg_err)?;
    if let Some(mu) = s.mu {
        cfg.mu_outer = SmoothingSchedule::constant(mu);
        cfg.mu_inner = SmoothingSchedule::constant(mu);
    }
    if let Some(v) = s.mu_outer {
        cfg.mu_outer = v;
    }
    if let Some(v) = s.mu_inner {
        cfg.mu_inner = v;
    }
    if s.kind == SolverKind::RazgdII && cfg.mu_inner.mode == ScheduleMode::Constant {
        return Err(HarnessError::Config(format!(
            "solver `{label}`: razgd_II needs a decaying mu_inner schedule"
        )));
    }
    cfg.eta = s.eta.unwrap_or(cfg.eta);
    cfg.theta = s.theta.unwrap_or(cfg.theta);
    cfg.big_b = s.big_b.unwrap_or(cfg.big_b);
    cfg.cap_k = s.cap_k.unwrap_or(cfg.cap_k);
    cfg.r = s.r.unwrap_or(cfg.r);
    cfg.query_budget = budgets.query_budget;
    cfg.max_outer = budgets.max_outer;
    cfg.wall_clock_s = budgets.wall_clock_s;
    cfg.validate().map_err(cfg_err)?;
    if s.steps.is_some() && s.kind != SolverKind::Pzgd {
        return Err(HarnessError::Config(format!(
            "solver `{label}`: `steps` only applies to pzgd"
        )));
    }
    let steps = match s.kind {
        SolverKind::Pzgd => Some(s.steps.unwrap_or(StepSchedule::Constant(cfg.eta))),
        _ => None,
    };
    Ok(ResolvedSolver {
        label,
        kind: s.kind,
        inputs: s.clone(),
        config: cfg,
        steps,
    })
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Validates `spec` and materializes all defaults.
pub fn resolve(spec: &ExperimentSpec) -> Result<(Manifest, ProblemInstance), HarnessError> {
    if spec.runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    if spec.solvers.is_empty() {
        return Err(HarnessError::Config(
            "at least one solver is required".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for s in &spec.solvers {
        let label = s.label();
        if !valid_label(label) {
            return Err(HarnessError::Config(format!(
                "solver label `{label}` may only contain ASCII letters, digits, `_`, `-` and `.`"
            )));
        }
        if !seen.insert(label) {
            return Err(HarnessError::Config(format!(
                "duplicate solver label `{label}`"
            )));
        }
    }
    let problem = ProblemInstance::build(&spec.problem)?;
    let m = problem.manifold();
    let solvers = spec
        .solvers
        .iter()
        .map(|s| resolve_solver(s, m.dim(), &spec.budgets))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        name: spec.name.clone(),
        problem: spec.problem.clone(),
        manifold: m,
        start: problem.start().iter().copied().collect(),
        runs: spec.runs,
        seed: spec.seed,
        budgets: spec.budgets,
        escaped_saddle: problem.escape_rule(),
        solvers,
    };
    Ok((manifest, problem))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub run_id: usize,
    pub final_f: f64,
    pub queries: u64,
    pub termination: String,
    pub escaped_saddle: bool,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Trace,
}

impl RunOutput {
    pub fn trace_file_name(&self) -> String {
        format!("trace_{}_{}.csv", self.summary.solver, self.summary.run_id)
    }
}

/// Runs every (solver, run) pair. Outputs are ordered by solver, then run.
pub fn execute(
    manifest: &Manifest,
    problem: &ProblemInstance,
    mode: Parallelism,
) -> Result<Vec<RunOutput>, HarnessError> {
    let jobs: Vec<(usize, usize)> = (0..manifest.solvers.len())
        .flat_map(|s| (0..manifest.runs).map(move |r| (s, r)))
        .collect();
    let results = run_batch(jobs, mode, |(s, run)| {
        let solver = &manifest.solvers[s];
        let cfg = solver.config_for_run(manifest.seed, run);
        let started = Instant::now();
        let trace = solver
            .run(problem, &cfg)
            .map_err(|source| HarnessError::Solver {
                label: solver.label.clone(),
                run,
                source,
            })?;
        let final_f = trace.final_value();
        Ok(RunOutput {
            summary: RunSummary {
                solver: solver.label.clone(),
                run_id: run,
                final_f,
                queries: trace.total_queries(),
                termination: trace.termination.to_string(),
                escaped_saddle: manifest.escaped_saddle.holds(final_f),
                elapsed_ms: started.elapsed().as_millis() as u64,
            },
            trace,
        })
    });
    results.into_iter().collect()
}

pub fn summary_csv(outputs: &[RunOutput]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for o in outputs {
        let s = &o.summary;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.solver, s.run_id, s.final_f, s.queries, s.termination, s.escaped_saddle
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn timings_csv(outputs: &[RunOutput]) -> String {
    let mut out = String::from(TIMINGS_HEADER);
    out.push('\n');
    for o in outputs {
        let s = &o.summary;
        writeln!(out, "{},{},{}", s.solver, s.run_id, s.elapsed_ms)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Writes traces, `summary.csv`, `manifest.json` and `timings.csv` into `dir`.
pub fn write_outputs(
    dir: &Path,
    manifest: &Manifest,
    outputs: &[RunOutput],
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
    };
    for o in outputs {
        write(&o.trace_file_name(), &o.trace.to_csv())?;
    }
    write("summary.csv", &summary_csv(outputs))?;
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest is always serializable");
    json.push('\n');
    write("manifest.json", &json)?;
    write("timings.csv", &timings_csv(outputs))
}

/// Resolves, runs and writes an experiment.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    mode: Parallelism,
) -> Result<Vec<RunSummary>, HarnessError> {
    let (manifest, problem) = resolve(spec)?;
    let outputs = execute(&manifest, &problem, mode)?;
    write_outputs(out_dir, &manifest, &outputs)?;
    Ok(outputs.into_iter().map(|o| o.summary).collect())
}

/// Ready-made specs: `quartic`, `simplex` and `sphere`.
pub fn demo_spec(name: &str) -> Option<ExperimentSpec> {
    match name {
        "quartic" => {
            let solver = |mu: f64, label: &str| SolverSpec {
                label: Some(label.into()),
                mu: Some(mu),
                ..SolverSpec::new(SolverKind::RazgdIPerturbed, 1e-4, 25.0, 6.0)
            };
            Some(ExperimentSpec {
                name: "quartic_saddle_escape".into(),
                problem: ProblemSpec::Quartic { d: 20 },
                solvers: vec![solver(0.01, "razgd_mu0.01"), solver(0.3, "razgd_mu0.3")],
                runs: 10,
                seed: 0,
                budgets: Budgets {
                    query_budget: 2_000_000,
                    ..Budgets::default()
                },
            })
        }
        "simplex" => Some(ExperimentSpec {
            name: "simplex_least_squares".into(),
            problem: ProblemSpec::SimplexLs {
                m: 200,
                d: 20,
                seed: 0,
                noise: DEFAULT_LS_NOISE,
            },
            solvers: vec![
                SolverSpec::new(SolverKind::RazgdI, 1e-1, 50.0, 1.0),
                SolverSpec::new(SolverKind::Rzgd, 1e-1, 50.0, 1.0),
                SolverSpec::new(SolverKind::Pzgd, 1e-1, 50.0, 1.0),
            ],
            runs: 5,
            seed: 0,
            budgets: Budgets {
                query_budget: 500_000,
                ..Budgets::default()
            },
        }),
        "sphere" => Some(ExperimentSpec {
            name: "sphere_rayleigh_quotient".into(),
            problem: ProblemSpec::SphereQuadratic { d: 10, seed: 0 },
            solvers: vec![
                SolverSpec::new(SolverKind::RazgdIPerturbed, 1e-3, 20.0, 20.0),
                SolverSpec::new(SolverKind::Rzgd, 1e-3, 20.0, 20.0),
                SolverSpec::new(SolverKind::Pzgd, 1e-3, 20.0, 20.0),
            ],
            runs: 5,
            seed: 0,
            budgets: Budgets {
                query_budget: 500_000,
                ..Budgets::default()
            },
        }),
        _ => None,
    }
}

pub const DEMO_NAMES: [&str; 3] = ["quartic", "simplex", "sphere"];
