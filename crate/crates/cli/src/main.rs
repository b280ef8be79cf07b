//! `spre` command-line experiment runner.
//!
//! Exit status is 0 on success, 2 when the configuration is invalid and 1
//! when a run fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spre::design::{sequential_loop, CostModel, LoopConfig, DEFAULT_CANDIDATES};
use spre::experiment::{
    run_calibration, run_convergence, run_sparsity_trace, write_json, write_rows_csv, DesignChoice, ExperimentConfig,
    IndexMode, Method, Problem, ProblemSpec, FLOCK_OFFSET,
};
use spre::extrapolate::{mre_extrapolate, mre_select_subset};
use spre::flocking::{simulate_qoi, trajectory, FlockParams, RepulsionMode};
use spre::io::read_dataset_file;
use spre::model_select::{optimize_kernel, stepwise_select};
use spre::problems::{reference_design, ReferenceDesign};
use spre::{Covariance, Dataset, Design, Extrapolant, IndexSet, KernelFamily, KernelSpec};

enum CliError {
    Config(String),
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "spre",
    version,
    about = "Probabilistic extrapolation of simulator output to zero tolerance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimates along a halving ladder of designs, as CSV rows.
    Converge(ExperimentArgs),
    /// Standardised errors of the methods that report a variance, as CSV rows.
    Calibrate(ExperimentArgs),
    /// Stepwise-selected index sets along the ladder, as JSON.
    Sparsity(ExperimentArgs),
    /// Sequential budgeted design, one JSON line per round.
    Design(DesignArgs),
    /// A single flocking simulation.
    Flock(FlockArgs),
    /// Posterior at the origin for a CSV dataset.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Cubature,
    EdSynthetic,
    Flocking,
}

#[derive(Clone, Copy, ValueEnum)]
enum Repulsion {
    AsPrinted,
    Repulsive,
}

impl From<Repulsion> for RepulsionMode {
    fn from(r: Repulsion) -> Self {
        match r {
            Repulsion::AsPrinted => RepulsionMode::AsPrinted,
            Repulsion::Repulsive => RepulsionMode::Repulsive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexModeArg {
    Fixed,
    Stepwise,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// Cubature dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Cubature smoothness.
    #[arg(long)]
    s: Option<u32>,
    /// Noise seed (ed-synthetic) or initial-position seed (flocking).
    #[arg(long)]
    seed: Option<u64>,
    /// Tracked flocking agent.
    #[arg(long)]
    agent: Option<usize>,
    #[arg(long, value_enum)]
    repulsion: Option<Repulsion>,
}

impl ProblemArgs {
    /// The problem named on the command line, or `base` with any overrides.
    fn resolve(&self, base: Option<ProblemSpec>) -> CliResult<ProblemSpec> {
        let spec = match (self.problem, base) {
            (Some(ProblemKind::Cubature), _) => ProblemSpec::Cubature { d: 1, s: 0 },
            (Some(ProblemKind::EdSynthetic), _) => ProblemSpec::EdSynthetic { seed: 0 },
            (Some(ProblemKind::Flocking), _) => ProblemSpec::Flocking {
                seed: 0,
                agent: 0,
                repulsion: RepulsionMode::AsPrinted,
            },
            (None, Some(spec)) => spec,
            (None, None) => return Err(config_err("no problem given; use --problem or a config file")),
        };
        Ok(match spec {
            ProblemSpec::Cubature { d, s } => ProblemSpec::Cubature {
                d: self.d.unwrap_or(d),
                s: self.s.unwrap_or(s),
            },
            ProblemSpec::EdSynthetic { seed } => ProblemSpec::EdSynthetic {
                seed: self.seed.unwrap_or(seed),
            },
            ProblemSpec::Flocking { seed, agent, repulsion } => ProblemSpec::Flocking {
                seed: self.seed.unwrap_or(seed),
                agent: self.agent.unwrap_or(agent),
                repulsion: self.repulsion.map(Into::into).unwrap_or(repulsion),
            },
        })
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated subset of RAW, MRE, SPRE, GRE.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated kernel families.
    #[arg(long, value_delimiter = ',')]
    kernels: Option<Vec<String>>,
    /// Comma-separated exponents m, giving h = (1/2)^m.
    #[arg(long, value_delimiter = ',')]
    exponents: Option<Vec<u32>>,
    /// Shorthand for exponents 0..=M.
    #[arg(long, conflicts_with = "exponents")]
    max_exponent: Option<u32>,
    #[arg(long, value_enum)]
    index_mode: Option<IndexModeArg>,
    /// Fixed index set as JSON, e.g. "[[0],[2]]".
    #[arg(long)]
    index_set: Option<String>,
    /// Named reference design to scale.
    #[arg(long)]
    design: Option<String>,
    /// Write results here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Record wall-clock times per row.
    #[arg(long)]
    timing: bool,
}

fn parse_list<T: FromStr>(items: &[String]) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(config_err))
        .collect()
}

fn parse_index_set(json: &str) -> CliResult<IndexSet> {
    serde_json::from_str(json).map_err(|e| config_err(format!("bad index set {json:?}: {e}")))
}

impl ExperimentArgs {
    fn build(&self) -> CliResult<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                let c: ExperimentConfig =
                    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                Some(c)
            }
            None => None,
        };
        let spec = self.problem.resolve(config.as_ref().map(|c| c.problem.clone()))?;
        let mut c = match config.take() {
            Some(mut c) => {
                c.problem = spec;
                c
            }
            None => ExperimentConfig::new(spec),
        };
        if let Some(m) = &self.methods {
            c.methods = parse_list::<Method>(m)?;
        }
        if let Some(k) = &self.kernels {
            c.kernels = parse_list::<KernelFamily>(k)?;
        }
        if let Some(e) = &self.exponents {
            c.exponents = e.clone();
        }
        if let Some(m) = self.max_exponent {
            c.exponents = (0..=m).collect();
        }
        if let Some(mode) = self.index_mode {
            c.index_mode = match mode {
                IndexModeArg::Fixed => IndexMode::Fixed,
                IndexModeArg::Stepwise => IndexMode::Stepwise,
            };
        }
        if let Some(a) = &self.index_set {
            c.index_set = Some(parse_index_set(a)?);
        }
        if let Some(d) = &self.design {
            c.design = Some(DesignChoice::Named(d.parse().map_err(config_err)?));
        }
        if let Some(seed) = self.problem.seed {
            c.seed = seed;
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        c.timing |= self.timing;
        c.validate().map_err(config_err)?;
        let problem = Problem::from_spec(&c.problem).map_err(config_err)?;
        if let Some(a) = &c.index_set {
            if a.dim() != problem.dim() {
                return Err(config_err(format!(
                    "index set has dimension {}, problem has {}",
                    a.dim(),
                    problem.dim()
                )));
            }
        }
        Ok(c)
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| runtime_err(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_experiment(cmd: &Command, args: &ExperimentArgs) -> CliResult<()> {
    let config = args.build()?;
    if matches!(cmd, Command::Calibrate(_)) && !config.methods.iter().any(|m| m.has_variance()) {
        return Err(config_err("calibration needs SPRE or GRE among the methods"));
    }
    if matches!(cmd, Command::Sparsity(_)) && matches!(args.index_mode, Some(IndexModeArg::Fixed)) {
        return Err(config_err("sparsity traces need --index-mode stepwise"));
    }
    let out = open_output(config.output.as_deref())?;
    match cmd {
        Command::Converge(_) => {
            let rows = run_convergence(&config).map_err(runtime_err)?;
            write_rows_csv(&rows, out).map_err(runtime_err)
        }
        Command::Calibrate(_) => {
            let rows = run_calibration(&config).map_err(runtime_err)?;
            write_rows_csv(&rows, out).map_err(runtime_err)
        }
        Command::Sparsity(_) => {
            let mut config = config;
            config.index_mode = IndexMode::Stepwise;
            let trace = run_sparsity_trace(&config).map_err(runtime_err)?;
            write_json(&trace, out).map_err(runtime_err)
        }
        _ => unreachable!("not an experiment subcommand"),
    }
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Cost budget per round.
    #[arg(long, default_value_t = 2.0)]
    budget: f64,
    #[arg(long, default_value_t = 7)]
    rounds: usize,
    /// Candidate batches per round.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidates: usize,
    /// Seed of the candidate search; defaults to --seed.
    #[arg(long)]
    search_seed: Option<u64>,
    #[arg(long, default_value = "white-noise")]
    kernel: String,
    /// Named reference design for the initial data.
    #[arg(long)]
    design: Option<String>,
    /// Factor applied to the initial design.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct DesignSummary {
    index_set: IndexSet,
    theta: Vec<f64>,
    loocv: Option<f64>,
    n_points: usize,
    estimate: f64,
    variance: f64,
}

fn run_design(args: &DesignArgs) -> CliResult<()> {
    let spec = args.problem.resolve(None)?;
    if matches!(spec, ProblemSpec::Cubature { .. }) {
        return Err(config_err(
            "cubature widths must be reciprocal integers; design search needs a continuous problem",
        ));
    }
    if !(args.budget > 0.0 && args.budget.is_finite()) {
        return Err(config_err(format!("budget {} must be positive", args.budget)));
    }
    if args.candidates == 0 {
        return Err(config_err("need at least one candidate"));
    }
    let family: KernelFamily = args.kernel.parse().map_err(config_err)?;
    let problem = Problem::from_spec(&spec).map_err(config_err)?;
    // The synthetic problem starts from the unscaled two-dimensional cubature
    // design; others from their own base design.
    let (base, default_scale) = match (&args.design, &spec) {
        (Some(name), _) => (reference_design(name.parse().map_err(config_err)?), 1.0),
        (None, ProblemSpec::EdSynthetic { .. }) => (reference_design(ReferenceDesign::Cubature2), 2.0),
        (None, _) => (problem.default_design().map_err(config_err)?, 1.0),
    };
    let scale = args.scale.unwrap_or(default_scale);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(config_err(format!("scale {scale} must be positive")));
    }
    let initial_design: Design = base.scaled(scale);
    if initial_design.dim() != problem.dim() {
        return Err(config_err(format!(
            "design has dimension {}, problem has {}",
            initial_design.dim(),
            problem.dim()
        )));
    }

    let initial = Dataset::from_fn(initial_design, |x| problem.eval(x)).map_err(runtime_err)?;
    let loop_config = LoopConfig {
        family,
        budget_per_round: args.budget,
        rounds: args.rounds,
        n_candidates: args.candidates,
        rng_seed: args.search_seed.or(args.problem.seed).unwrap_or(0),
    };
    let sim = |x: &[f64]| problem.eval(x);
    let outcome = sequential_loop(&initial, &CostModel::ReciprocalProduct, &loop_config, &sim).map_err(runtime_err)?;

    let model = Extrapolant::fit(
        &outcome.trace.chosen,
        &Covariance::from(outcome.trace.kernel()),
        &outcome.data,
    )
    .and_then(|m| m.predict_at_zero())
    .map_err(runtime_err)?;
    let mut out = open_output(args.output.as_deref())?;
    for r in &outcome.rounds {
        write_line(&mut out, r)?;
    }
    write_line(
        &mut out,
        &DesignSummary {
            index_set: outcome.trace.chosen.clone(),
            theta: outcome.trace.theta.clone(),
            loocv: outcome.trace.loocv,
            n_points: outcome.data.len(),
            estimate: model.mean,
            variance: model.variance,
        },
    )?;
    out.flush().map_err(runtime_err)
}

fn write_line<T: Serialize>(out: &mut dyn Write, v: &T) -> CliResult<()> {
    let json = serde_json::to_string(v).map_err(runtime_err)?;
    writeln!(out, "{json}").map_err(runtime_err)
}

#[derive(Args)]
struct FlockArgs {
    /// Time step.
    #[arg(long, default_value_t = FLOCK_OFFSET[0])]
    x1: f64,
    /// Repulsion softening.
    #[arg(long, default_value_t = FLOCK_OFFSET[1])]
    x2: f64,
    /// Cutoff width.
    #[arg(long, default_value_t = FLOCK_OFFSET[2])]
    x3: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0)]
    agent: usize,
    #[arg(long, default_value_t = 60)]
    agents: usize,
    #[arg(long, value_enum, default_value = "as-printed")]
    repulsion: Repulsion,
    /// Also write every agent's trajectory as CSV (t, agent, u1, u2).
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Serialize)]
struct FlockSummary {
    seed: u64,
    agent: usize,
    x: [f64; 3],
    t_final: f64,
    qoi: f64,
}

fn run_flock(args: &FlockArgs) -> CliResult<()> {
    let mut p = FlockParams::new(args.x1, args.x2, args.x3);
    p.seed = args.seed;
    p.t_final = args.t_final;
    p.tracked_agent = args.agent;
    p.n_agents = args.agents;
    p.repulsion = args.repulsion.into();
    p.validate().map_err(config_err)?;

    let qoi = simulate_qoi(&p).map_err(runtime_err)?;
    if let Some(path) = &args.trajectory {
        let traj = trajectory(&p).map_err(runtime_err)?;
        let mut w = open_output(Some(path))?;
        writeln!(w, "t,agent,u1,u2").map_err(runtime_err)?;
        for (t, positions) in &traj {
            for (i, u) in positions.iter().enumerate() {
                writeln!(w, "{t},{i},{},{}", u[0], u[1]).map_err(runtime_err)?;
            }
        }
        w.flush().map_err(runtime_err)?;
    }
    let summary = FlockSummary {
        seed: p.seed,
        agent: p.tracked_agent,
        x: [p.x1, p.x2, p.x3],
        t_final: p.t_final,
        qoi,
    };
    println!("{}", serde_json::to_string(&summary).map_err(runtime_err)?);
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Spre,
    Mre,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns x_1..x_d, f and optionally cost.
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "spre")]
    method: FitMethod,
    #[arg(long, default_value = "white-noise")]
    kernel: String,
    /// Index set as JSON; chosen by stepwise search when omitted. MRE uses
    /// the dim(A) points closest to the origin.
    #[arg(long)]
    index_set: Option<String>,
}

#[derive(Serialize)]
struct FitSummary {
    method: &'static str,
    n_points: usize,
    index_set: IndexSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loocv: Option<f64>,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_dev: Option<f64>,
}

fn run_fit(args: &FitArgs) -> CliResult<()> {
    let family: KernelFamily = args.kernel.parse().map_err(config_err)?;
    let fixed = args.index_set.as_deref().map(parse_index_set).transpose()?;
    let data = read_dataset_file(&args.dataset).map_err(config_err)?;
    if let Some(a) = &fixed {
        if a.dim() != data.dim() {
            return Err(config_err(format!(
                "index set has dimension {}, data has {}",
                a.dim(),
                data.dim()
            )));
        }
    }
    let summary = match args.method {
        FitMethod::Mre => {
            let a = fixed.ok_or_else(|| config_err("MRE needs --index-set"))?;
            let estimate = mre_select_subset(&a, &data)
                .and_then(|sub| mre_extrapolate(&a, &sub))
                .map_err(runtime_err)?;
            FitSummary {
                method: "MRE",
                n_points: data.len(),
                index_set: a,
                kernel: None,
                loocv: None,
                estimate,
                variance: None,
                std_dev: None,
            }
        }
        FitMethod::Spre => {
            let (a, kernel, loocv) = match fixed {
                Some(a) => {
                    let (k, l) = match optimize_kernel(&a, family, &data) {
                        Ok((k, l)) => (k, Some(l)),
                        // Too few points to cross-validate: keep the default kernel.
                        Err(_) => (KernelSpec::initial(family), None),
                    };
                    (a, k, l)
                }
                None => {
                    let t = stepwise_select(&data, family).map_err(runtime_err)?;
                    let k = t.kernel();
                    (t.chosen, k, t.loocv)
                }
            };
            let post = Extrapolant::fit(&a, &Covariance::from(kernel.clone()), &data)
                .and_then(|m| m.predict_at_zero())
                .map_err(runtime_err)?;
            FitSummary {
                method: "SPRE",
                n_points: data.len(),
                index_set: a,
                kernel: Some(kernel),
                loocv,
                estimate: post.mean,
                variance: Some(post.variance),
                std_dev: Some(post.variance.sqrt()),
            }
        }
    };
    write_json(&summary, io::stdout().lock()).map_err(runtime_err)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        cmd @ (Command::Converge(a) | Command::Calibrate(a) | Command::Sparsity(a)) => run_experiment(cmd, a),
        Command::Design(a) => run_design(a),
        Command::Flock(a) => run_flock(a),
        Command::Fit(a) => run_fit(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
