//! Command-line front end: `generate | run | sweep | validate | bound`.
//!
//! Exit codes: 0 success, 1 I/O or other runtime failure, 2 usage error,
//! 3 infeasible instance, 4 validation failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{regret_bound, run_experiment, run_policy, Axis, ExperimentSpec, PolicyKind, RunParams, Sweep};
use crate::error::{Error, Result};
use crate::model::{path_length, ArrivalTrace, CostModel};
use crate::policy::{run_rosc, GammaPolicy, RoscConfig};
use crate::validate::{run_check, CheckResult, CHECKS};
use crate::workloads::{
    GeneratorParams, Lifetime, PiecewiseParams, PoissonParams, PredictionOracle, ReplacementParams,
};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rosc", version, about = "Online service caching simulator")]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace (CSV plus JSON sidecar).
    Generate(GenerateArgs),
    /// Run one policy on one trace.
    Run(RunArgs),
    /// Sweep parameters over several seeds and policies.
    Sweep(SweepArgs),
    /// Run the randomized oracle suites.
    Validate(ValidateArgs),
    /// Evaluate the regret bound.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Replacement,
    Poisson,
    Piecewise,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "replacement")]
    pub model: Model,
    /// Generator parameters as JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Requests per slot (replacement, piecewise).
    #[arg(long = "U")]
    pub u: Option<u64>,
    #[arg(long)]
    pub zipf: Option<f64>,
    /// Mean rank lifetime in slots (replacement).
    #[arg(long)]
    pub lifetime: Option<f64>,
    /// Keep only the first n default groups (poisson).
    #[arg(long)]
    pub groups: Option<usize>,
    /// Birth rate applied to every group (poisson).
    #[arg(long)]
    pub birth_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Capacities for which the path length is reported.
    #[arg(long = "M", value_delimiter = ',', default_value = "10")]
    pub m: Vec<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value = "trace")]
    pub name: String,
}

#[derive(Debug, Args, Clone)]
pub struct ParamFlags {
    /// Run parameters as JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// β*/α.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long = "W")]
    pub w: Option<usize>,
    #[arg(long = "K")]
    pub k: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prediction noise weight.
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// Let RHC and CHC see noisy predictions as well.
    #[arg(long)]
    pub noisy_baselines: bool,
    /// Offline descent sweeps of the pseudo-optimum.
    #[arg(long)]
    pub iterations: Option<usize>,
}

impl ParamFlags {
    fn resolve(&self) -> Result<RunParams> {
        let mut p: RunParams = match &self.config {
            Some(path) => read_json(path)?,
            None => RunParams::default(),
        };
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.ratio {
            p.ratio = v;
        }
        if let Some(v) = self.m {
            p.capacity = v;
        }
        if let Some(v) = self.w {
            p.window = v;
        }
        if let Some(v) = self.k {
            p.paths = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.r {
            p.noise = v;
        }
        if self.noisy_baselines {
            p.noisy_baselines = true;
        }
        if let Some(v) = self.iterations {
            p.pseudo_iterations = v;
        }
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub policy: String,
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use γ = √(H_T/T) from the trace's path length.
    #[arg(long)]
    pub theorem_gamma: bool,
    /// Also write the per-slot decisions.
    #[arg(long)]
    pub decisions: bool,
    #[arg(long, default_value = "run_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment spec as JSON; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// β*/α = 200, M = 10, W = 10, K = 100, γ = 0.05, R = 0 on the
    /// replacement workload.
    #[arg(long)]
    pub paper_defaults: bool,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Number of seeds, `0..n`.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Explicit seed list.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip the per-run cost files.
    #[arg(long)]
    pub no_runs: bool,
    #[arg(long, default_value = "sweep_out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// Projection comparisons.
    #[arg(long, default_value_t = 10_000)]
    pub cases: usize,
    /// Trace/window instances for the online-offline comparison.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Ensemble updates.
    #[arg(long, default_value_t = 1000)]
    pub updates: usize,
    /// Tiny instances for the regret ceiling.
    #[arg(long, default_value_t = 20)]
    pub tiny: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Read N, T, U and H_T from a trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// β*.
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    #[arg(long = "M", default_value_t = 10)]
    pub m: usize,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long = "U")]
    pub u: Option<f64>,
    #[arg(long = "K", default_value_t = 100)]
    pub k: u32,
    #[arg(long = "W", default_value_t = 10)]
    pub w: usize,
    /// Path length H_T.
    #[arg(long = "H")]
    pub h: Option<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::Dimension { .. } | Error::Parse(_) | Error::Json(_) => EXIT_USAGE,
        Error::OverBudget(_) => EXIT_INFEASIBLE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => cmd_generate(a, cli.verbose),
        Command::Run(a) => cmd_run(a, cli.verbose),
        Command::Sweep(a) => cmd_sweep(a, cli.verbose),
        Command::Validate(a) => cmd_validate(a),
        Command::Bound(a) => cmd_bound(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn generator_params(a: &GenerateArgs) -> Result<GeneratorParams> {
    let mut params = match (&a.config, a.model) {
        (Some(path), _) => read_json(path)?,
        (None, Model::Replacement) => GeneratorParams::Replacement(ReplacementParams::default()),
        (None, Model::Poisson) => GeneratorParams::Poisson(PoissonParams::default()),
        (None, Model::Piecewise) => GeneratorParams::Piecewise(PiecewiseParams::default()),
    };
    match &mut params {
        GeneratorParams::Replacement(p) => {
            p.N = a.n.unwrap_or(p.N);
            p.T = a.t.unwrap_or(p.T);
            p.U = a.u.unwrap_or(p.U);
            p.zipf_exponent = a.zipf.unwrap_or(p.zipf_exponent);
            if let Some(mean) = a.lifetime {
                p.lifetime = Lifetime::Geometric { mean };
            }
        }
        GeneratorParams::Poisson(p) => {
            p.N = a.n.unwrap_or(p.N);
            p.T = a.t.unwrap_or(p.T);
            if let Some(g) = a.groups {
                if g == 0 || g > p.groups.len() {
                    return Err(Error::invalid(format!(
                        "--groups must be in 1..={}",
                        p.groups.len()
                    )));
                }
                p.groups.truncate(g);
            }
            if let Some(rate) = a.birth_rate {
                for g in &mut p.groups {
                    g.birth_rate = rate;
                }
            }
        }
        GeneratorParams::Piecewise(p) => {
            p.N = a.n.unwrap_or(p.N);
            p.T = a.t.unwrap_or(p.T);
            p.U = a.u.unwrap_or(p.U);
            p.zipf_exponent = a.zipf.unwrap_or(p.zipf_exponent);
        }
    }
    Ok(params)
}

fn cmd_generate(a: &GenerateArgs, verbose: bool) -> Result<i32> {
    let params = generator_params(a)?;
    let trace = params.generate(a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let csv = a.out.join(format!("{}.csv", a.name));
    trace.write_csv(&csv)?;
    params.meta(&trace, a.seed)?.write(a.out.join(format!("{}.json", a.name)))?;
    write_json(
        &a.out.join("effective_config.json"),
        &serde_json::json!({ "command": "generate", "seed": a.seed, "generator": params }),
    )?;
    if trace.total_requests() == 0.0 {
        eprintln!("warning: the generated trace has no requests");
    }
    for &m in &a.m {
        let h = path_length(&trace, m);
        say!(
            "M={m}: path length {h} ({:.4} per slot)",
            h / trace.horizon() as f64
        );
    }
    if verbose {
        eprintln!("wrote {}", csv.display());
    }
    Ok(EXIT_OK)
}

fn cmd_run(a: &RunArgs, verbose: bool) -> Result<i32> {
    let kind: PolicyKind = a.policy.parse()?;
    let params = a.params.resolve()?;
    let trace = ArrivalTrace::read_csv(&a.trace)?;
    let mut gamma = GammaPolicy::Fixed(params.gamma);
    let rec = if kind == PolicyKind::Rosc && a.theorem_gamma {
        gamma = GammaPolicy::Theorem {
            path_length: path_length(&trace, params.capacity),
            horizon: trace.horizon(),
        };
        let cost = params.cost(trace.services())?;
        let oracle = PredictionOracle::noisy(&trace, params.noise, params.window, a.seed)?;
        let cfg = RoscConfig::new(cost, params.window, params.paths, a.seed).with_gamma(gamma);
        run_rosc(&trace, &oracle, &cfg)?
    } else {
        run_policy(kind, &trace, &params, a.seed)?
    };
    rec.write(&a.out, kind.name())?;
    if a.decisions {
        let path = a.out.join(format!("{}_decisions.csv", kind.name()));
        fs::write(&path, rec.decisions_csv_string()).map_err(|e| Error::io(&path, e))?;
    }
    write_json(
        &a.out.join("effective_config.json"),
        &serde_json::json!({
            "command": "run",
            "policy": kind,
            "trace": a.trace,
            "seed": a.seed,
            "params": params,
            "gamma_policy": gamma,
        }),
    )?;
    say!("{} total cost {} ({} slots)", kind, rec.total_cost, rec.horizon());
    if verbose {
        eprintln!("runtime {:.3} ms", rec.runtime_ms);
    }
    Ok(EXIT_OK)
}

fn sweep_spec(a: &SweepArgs) -> Result<ExperimentSpec> {
    let mut spec = match &a.spec {
        Some(path) => read_json(path)?,
        None => ExperimentSpec {
            workload: GeneratorParams::Replacement(ReplacementParams::default()),
            seeds: (0..10).collect(),
            policies: vec![PolicyKind::Rosc, PolicyKind::Rhc, PolicyKind::Chc, PolicyKind::Sopt],
            base: RunParams::default(),
            sweeps: Vec::new(),
            jobs: 1,
            write_runs: true,
        },
    };
    if a.paper_defaults {
        spec.base = RunParams::default();
        spec.workload = GeneratorParams::Replacement(ReplacementParams::default());
    }
    if let Some(model) = a.model {
        spec.workload = match model {
            Model::Replacement => GeneratorParams::Replacement(ReplacementParams::default()),
            Model::Poisson => GeneratorParams::Poisson(PoissonParams::default()),
            Model::Piecewise => GeneratorParams::Piecewise(PiecewiseParams::default()),
        };
    }
    let (n, t) = match &mut spec.workload {
        GeneratorParams::Replacement(p) => (&mut p.N, &mut p.T),
        GeneratorParams::Poisson(p) => (&mut p.N, &mut p.T),
        GeneratorParams::Piecewise(p) => (&mut p.N, &mut p.T),
    };
    *n = a.n.unwrap_or(*n);
    *t = a.t.unwrap_or(*t);
    let flags = ParamFlags {
        config: None,
        ..a.params.clone()
    };
    if let Some(path) = &a.params.config {
        spec.base = read_json(path)?;
    }
    spec.base = apply_flags(spec.base, &flags);
    match (&a.axis, &a.values) {
        (Some(axis), Some(values)) => {
            spec.sweeps = vec![Sweep {
                axis: axis.parse::<Axis>()?,
                values: values.clone(),
            }]
        }
        (None, None) => {}
        _ => return Err(Error::invalid("--axis and --values go together")),
    }
    if let Some(n) = a.seeds {
        spec.seeds = (0..n as u64).collect();
    }
    if let Some(list) = &a.seed_list {
        spec.seeds = list.clone();
    }
    if let Some(p) = &a.policies {
        spec.policies = p.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(j) = a.jobs {
        spec.jobs = j.max(1);
    }
    if a.no_runs {
        spec.write_runs = false;
    }
    spec.validate()?;
    Ok(spec)
}

fn apply_flags(mut p: RunParams, f: &ParamFlags) -> RunParams {
    p.alpha = f.alpha.unwrap_or(p.alpha);
    p.ratio = f.ratio.unwrap_or(p.ratio);
    p.capacity = f.m.unwrap_or(p.capacity);
    p.window = f.w.unwrap_or(p.window);
    p.paths = f.k.unwrap_or(p.paths);
    p.gamma = f.gamma.unwrap_or(p.gamma);
    p.noise = f.r.unwrap_or(p.noise);
    p.noisy_baselines |= f.noisy_baselines;
    p.pseudo_iterations = f.iterations.unwrap_or(p.pseudo_iterations);
    p
}

fn cmd_sweep(a: &SweepArgs, verbose: bool) -> Result<i32> {
    let spec = sweep_spec(a)?;
    write_json(&a.out.join("effective_config.json"), &spec)?;
    let report = run_experiment(&spec, Some(&a.out))?;
    for p in &report.points {
        let label = p.axis.map_or("base".to_string(), |ax| format!("{}={}", ax.name(), p.value));
        say!(
            "{label} {}: cost/slot {:.4} runtime {:.2} ms{}",
            p.policy,
            p.mean_cost_per_slot,
            p.mean_runtime_ms,
            if p.failures.is_empty() {
                String::new()
            } else {
                format!(" ({} failed)", p.failures.len())
            }
        );
        if verbose {
            for f in &p.failures {
                eprintln!("  {label} {}: {f}", p.policy);
            }
        }
    }
    Ok(if report.failed() { EXIT_FAILURE } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    passed: bool,
    checks: Vec<CheckResult>,
}

fn cmd_validate(a: &ValidateArgs) -> Result<i32> {
    let names: Vec<String> = match &a.checks {
        Some(list) => list.clone(),
        None => CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    let mut checks = Vec::new();
    for name in &names {
        let size = match name.as_str() {
            "projection" => a.cases,
            "lemma1" => a.instances,
            "sampler" => a.updates,
            "regret-bound" => a.tiny,
            _ => 0,
        };
        checks.push(run_check(name, size, a.seed)?);
    }
    let report = ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_bound(a: &BoundArgs) -> Result<i32> {
    let (mut n, mut t, mut u, mut h) = (a.n, a.t, a.u, a.h);
    if let Some(path) = &a.trace {
        let trace = ArrivalTrace::read_csv(path)?;
        n = n.or(Some(trace.services()));
        t = t.or(Some(trace.horizon()));
        u = u.or(Some(trace.cap_or_max()));
        h = h.or(Some(path_length(&trace, a.m)));
    }
    let missing = |what: &str| Error::invalid(format!("--{what} is required without --trace"));
    let (n, t, u, h) = (
        n.ok_or_else(|| missing("N"))?,
        t.ok_or_else(|| missing("T"))?,
        u.ok_or_else(|| missing("U"))?,
        h.ok_or_else(|| missing("H"))?,
    );
    let gamma = if h > 0.0 && t > 0 { (h / t as f64).sqrt() } else { 0.05 };
    let cost = CostModel::uniform(a.alpha, a.beta, n, a.m, gamma)?;
    let bound = regret_bound(&cost, n, t, u, a.k, a.w, h)?;
    say!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "N": n, "T": t, "U": u, "H_T": h, "K": a.k, "W": a.w, "M": a.m,
            "alpha": a.alpha, "beta_star": a.beta, "gamma": gamma,
            "bound": bound,
        }))?
    );
    Ok(EXIT_OK)
}
