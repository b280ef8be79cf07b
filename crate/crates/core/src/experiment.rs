//! Experiment drivers: convergence ladders, calibration checks and index-set
//! traces over a family of scaled designs, with CSV/JSON output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreError};
use crate::extrapolate::{abs_error, mre_extrapolate, mre_select_subset, rel_error, Dataset, Posterior};
use crate::flocking::{simulate_qoi, FlockParams, RepulsionMode};
use crate::index_poly::{Design, IndexSet, MultiIndex};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::model_select::{fit_model, optimize_model, stepwise_select_with, ModelKind, SelectionTrace};
use crate::problems::{reference_design, CubatureProblem, EdSynthetic, ReferenceDesign, ScaledDesignFamily};

/// Offset added to the flocking tolerances so that `x = 0` is a runnable
/// configuration with a computable reference value.
pub const FLOCK_OFFSET: [f64; 3] = [0.1, 1e-15, 0.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Raw,
    Mre,
    Spre,
    Gre,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "RAW",
            Method::Mre => "MRE",
            Method::Spre => "SPRE",
            Method::Gre => "GRE",
        }
    }

    pub fn has_variance(self) -> bool {
        matches!(self, Method::Spre | Method::Gre)
    }
}

impl std::str::FromStr for Method {
    type Err = SpreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RAW" => Ok(Method::Raw),
            "MRE" => Ok(Method::Mre),
            "SPRE" => Ok(Method::Spre),
            "GRE" => Ok(Method::Gre),
            _ => Err(SpreError::invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Cubature {
        d: usize,
        s: u32,
    },
    EdSynthetic {
        seed: u64,
    },
    /// The flocking QoI at `x + FLOCK_OFFSET`.
    Flocking {
        seed: u64,
        #[serde(default)]
        agent: usize,
        #[serde(default)]
        repulsion: RepulsionMode,
    },
}

/// A problem ready to evaluate.
#[derive(Clone, Debug)]
pub enum Problem {
    Cubature(CubatureProblem),
    EdSynthetic(EdSynthetic),
    Flocking(FlockParams),
}

impl Problem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        match *spec {
            ProblemSpec::Cubature { d, s } => Ok(Problem::Cubature(CubatureProblem::new(d, s)?)),
            ProblemSpec::EdSynthetic { seed } => Ok(Problem::EdSynthetic(EdSynthetic::new(seed))),
            ProblemSpec::Flocking { seed, agent, repulsion } => {
                let mut p = FlockParams::new(FLOCK_OFFSET[0], FLOCK_OFFSET[1], FLOCK_OFFSET[2]);
                p.seed = seed;
                p.tracked_agent = agent;
                p.repulsion = repulsion;
                p.validate()?;
                Ok(Problem::Flocking(p))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Cubature(c) => c.dim(),
            Problem::EdSynthetic(_) => 2,
            Problem::Flocking(_) => 3,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Problem::Cubature(c) => format!("cubature-d{}-s{}", c.dim(), c.smoothness()),
            Problem::EdSynthetic(e) => format!("ed-synthetic-{}", e.noise_seed),
            Problem::Flocking(p) => format!("flocking-{}", p.seed),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Problem::Cubature(c) => c.eval(x),
            Problem::EdSynthetic(e) => e.eval(x),
            Problem::Flocking(p) => {
                let shifted: Vec<f64> = x.iter().zip(FLOCK_OFFSET).map(|(a, b)| a + b).collect();
                simulate_qoi(&p.with_tolerances(&shifted)?)
            }
        }
    }

    pub fn truth(&self) -> Result<f64> {
        match self {
            Problem::Cubature(c) => Ok(c.truth()),
            Problem::EdSynthetic(e) => Ok(e.truth()),
            Problem::Flocking(p) => simulate_qoi(p),
        }
    }

    /// The design the experiments scale.
    pub fn default_design(&self) -> Result<Design> {
        match self {
            Problem::Cubature(c) => ReferenceDesign::cubature(c.dim())
                .map(reference_design)
                .ok_or_else(|| SpreError::UnknownDesign(format!("cubature-d{}", c.dim()))),
            Problem::EdSynthetic(_) => Ok(ed_default_design()),
            Problem::Flocking(_) => Ok(reference_design(ReferenceDesign::CaseStudy)),
        }
    }

    /// Index set used in fixed mode: the even-power expansion for cubature,
    /// the true set for the synthetic function and the affine set for
    /// flocking.
    pub fn default_index_set(&self) -> IndexSet {
        match self {
            Problem::Cubature(c) => cubature_index_set(c.dim(), c.smoothness()),
            Problem::EdSynthetic(_) => EdSynthetic::true_index_set(),
            Problem::Flocking(_) => IndexSet::total_degree(3, 1),
        }
    }

    /// Index set whose leading terms set the GRE scaling.
    pub fn default_gre_set(&self) -> IndexSet {
        match self {
            Problem::Cubature(c) => cubature_index_set(c.dim(), c.smoothness().max(1)),
            _ => self.default_index_set(),
        }
    }
}

/// `{2α : |α| ≤ s}`, the monomials of the midpoint-rule error expansion.
pub fn cubature_index_set(dim: usize, s: u32) -> IndexSet {
    let mut indices = Vec::new();
    for order in 0..=s {
        for alpha in MultiIndex::all_of_order(dim, order) {
            indices.push(MultiIndex::new(alpha.exponents().iter().map(|e| 2 * e).collect()));
        }
    }
    IndexSet::new(indices).expect("valid index set")
}

/// A 3 × 3 grid on `[1/4, 1]²` for the synthetic function.
fn ed_default_design() -> Design {
    let levels = [0.25, 0.5, 1.0];
    let points = levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| vec![a, b]))
        .collect();
    Design::new(points).expect("valid design")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMode {
    #[default]
    Fixed,
    Stepwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignChoice {
    Named(ReferenceDesign),
    Points(Design),
}

fn default_methods() -> Vec<Method> {
    vec![Method::Raw, Method::Mre, Method::Spre]
}

fn default_kernels() -> Vec<KernelFamily> {
    vec![KernelFamily::WhiteNoise]
}

fn default_exponents() -> Vec<u32> {
    (0..=10).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelFamily>,
    /// `h = (1/2)^m` for each listed `m`.
    #[serde(default = "default_exponents")]
    pub exponents: Vec<u32>,
    #[serde(default)]
    pub index_mode: IndexMode,
    /// Overrides the problem's fixed index set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_set: Option<IndexSet>,
    /// Overrides the problem's base design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<std::path::PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Record wall-clock times; rows are then no longer byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        ExperimentConfig {
            problem,
            methods: default_methods(),
            kernels: default_kernels(),
            exponents: default_exponents(),
            index_mode: IndexMode::Fixed,
            index_set: None,
            design: None,
            output: None,
            seed: 0,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(SpreError::invalid("at least one method is required"));
        }
        if self.exponents.is_empty() {
            return Err(SpreError::invalid("at least one scaling exponent is required"));
        }
        if self.methods.contains(&Method::Spre) && self.kernels.is_empty() {
            return Err(SpreError::invalid("SPRE needs at least one kernel family"));
        }
        if self.exponents.iter().any(|&m| m > 1000) {
            return Err(SpreError::invalid("scaling exponents above 1000 underflow"));
        }
        Ok(())
    }

    fn base_design(&self, problem: &Problem) -> Result<Design> {
        let design = match &self.design {
            None => problem.default_design()?,
            Some(DesignChoice::Named(r)) => reference_design(*r),
            Some(DesignChoice::Points(d)) => d.clone(),
        };
        if design.dim() != problem.dim() {
            return Err(SpreError::DimensionMismatch {
                expected: problem.dim(),
                found: design.dim(),
            });
        }
        Ok(design)
    }

    fn family(&self, problem: &Problem) -> Result<ScaledDesignFamily> {
        Ok(ScaledDesignFamily::halving(self.base_design(problem)?, &self.exponents))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub method: Method,
    /// Empty for methods without a kernel.
    pub kernel: String,
    pub h: f64,
    pub estimate: Option<f64>,
    pub variance: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
    /// JSON list of multi-indices; empty for RAW.
    #[serde(rename = "chosen_A")]
    pub chosen_a: String,
    /// JSON list of kernel parameters.
    pub theta: String,
    pub wall_time_ms: Option<f64>,
    pub error: String,
}

struct Outcome {
    estimate: f64,
    posterior: Option<Posterior>,
    chosen: Option<IndexSet>,
    kernel: Option<KernelSpec>,
}

/// The observation nearest the origin; ties keep the earlier one.
pub fn raw_estimate(data: &Dataset) -> Result<f64> {
    let norm = |p: &[f64]| p.iter().map(|c| c * c).sum::<f64>();
    (0..data.len())
        .min_by(|&a, &b| {
            norm(data.design().point(a))
                .total_cmp(&norm(data.design().point(b)))
                .then(a.cmp(&b))
        })
        .map(|i| data.values()[i])
        .ok_or(SpreError::InsufficientData {
            needed: 1,
            available: 0,
        })
}

fn fit_kind(
    kind: ModelKind,
    mode: IndexMode,
    fixed: &IndexSet,
    family: KernelFamily,
    data: &Dataset,
) -> Result<Outcome> {
    let (chosen, kernel) = match mode {
        IndexMode::Fixed => (fixed.clone(), optimize_model(kind, fixed, family, data)?.0),
        IndexMode::Stepwise => {
            let trace: SelectionTrace = stepwise_select_with(kind, data, family)?;
            let kernel = trace.kernel();
            (trace.chosen, kernel)
        }
    };
    let post = fit_model(kind, &chosen, &kernel, data)?.predict_at_zero()?;
    Ok(Outcome {
        estimate: post.mean,
        posterior: Some(post),
        chosen: Some(chosen),
        kernel: Some(kernel),
    })
}

fn run_method(
    method: Method,
    family: Option<KernelFamily>,
    config: &ExperimentConfig,
    problem: &Problem,
    data: &Dataset,
) -> Result<Outcome> {
    let fixed = config.index_set.clone().unwrap_or_else(|| problem.default_index_set());
    match method {
        Method::Raw => Ok(Outcome {
            estimate: raw_estimate(data)?,
            posterior: None,
            chosen: None,
            kernel: None,
        }),
        Method::Mre => {
            let subset = mre_select_subset(&fixed, data)?;
            Ok(Outcome {
                estimate: mre_extrapolate(&fixed, &subset)?,
                posterior: None,
                chosen: Some(fixed),
                kernel: None,
            })
        }
        Method::Spre => fit_kind(
            ModelKind::Spre,
            config.index_mode,
            &fixed,
            family.expect("SPRE rows carry a kernel"),
            data,
        ),
        Method::Gre => {
            let gre_set = config.index_set.clone().unwrap_or_else(|| problem.default_gre_set());
            fit_kind(
                ModelKind::Gre,
                config.index_mode,
                &gre_set,
                KernelFamily::WhiteNoise,
                data,
            )
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

fn make_row(
    problem: &str,
    method: Method,
    family: Option<KernelFamily>,
    h: f64,
    truth: Option<f64>,
    result: Result<Outcome>,
    elapsed: Option<f64>,
) -> ResultRow {
    let kernel = family.map(|f| f.name().to_string()).unwrap_or_default();
    let mut row = ResultRow {
        problem: problem.to_string(),
        method,
        kernel,
        h,
        estimate: None,
        variance: None,
        abs_error: None,
        rel_error: None,
        chosen_a: String::new(),
        theta: String::new(),
        wall_time_ms: elapsed,
        error: String::new(),
    };
    match result {
        Err(e) => row.error = e.to_string(),
        Ok(out) => {
            row.estimate = Some(out.estimate);
            row.variance = out.posterior.map(|p| p.variance);
            row.abs_error = truth.map(|t| abs_error(out.estimate, t));
            row.rel_error = match (out.posterior, truth) {
                (Some(p), Some(t)) => rel_error(&p, t).ok(),
                _ => None,
            };
            row.chosen_a = out.chosen.as_ref().map(to_json).unwrap_or_default();
            row.theta = out.kernel.as_ref().map(|k| to_json(&k.theta())).unwrap_or_default();
        }
    }
    row
}

fn method_slots(config: &ExperimentConfig, methods: &[Method]) -> Vec<(Method, Option<KernelFamily>)> {
    let mut slots = Vec::new();
    for &m in methods {
        match m {
            Method::Spre => slots.extend(config.kernels.iter().map(|&k| (m, Some(k)))),
            Method::Gre => slots.push((m, Some(KernelFamily::WhiteNoise))),
            _ => slots.push((m, None)),
        }
    }
    slots
}

fn run_rows(config: &ExperimentConfig, methods: &[Method]) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let problem = Problem::from_spec(&config.problem)?;
    let family = config.family(&problem)?;
    let truth = problem.truth()?;
    let name = problem.name();
    let slots = method_slots(config, methods);

    let designs: Vec<(f64, Design)> = family.designs().collect();
    let datasets: Vec<Result<Dataset>> = designs
        .par_iter()
        .map(|(_, d)| Dataset::from_fn(d.clone(), |x| problem.eval(x)))
        .collect();

    let tasks: Vec<(usize, Method, Option<KernelFamily>)> = (0..designs.len())
        .flat_map(|i| slots.iter().map(move |&(m, k)| (i, m, k)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(i, method, fam)| {
            let h = designs[i].0;
            let start = Instant::now();
            let result = match &datasets[i] {
                Ok(data) => run_method(method, fam, config, &problem, data),
                Err(e) => Err(e.clone()),
            };
            let elapsed = config.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            make_row(&name, method, fam, h, Some(truth), result, elapsed)
        })
        .collect();
    Ok(rows)
}

/// One row per `(h, method, kernel)`, in ladder order then method order.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_rows(config, &config.methods)
}

/// As [`run_convergence`], restricted to the methods that report a variance.
pub fn run_calibration(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let methods: Vec<Method> = config.methods.iter().copied().filter(|m| m.has_variance()).collect();
    if methods.is_empty() {
        return Err(SpreError::invalid("calibration needs SPRE or GRE"));
    }
    run_rows(config, &methods)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityRecord {
    pub h: f64,
    pub kernel: KernelFamily,
    pub chosen: Option<IndexSet>,
    pub theta: Vec<f64>,
    pub loocv: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityTrace {
    pub problem: String,
    pub records: Vec<SparsityRecord>,
}

/// The stepwise-selected index set at every scaling, for each kernel family.
pub fn run_sparsity_trace(config: &ExperimentConfig) -> Result<SparsityTrace> {
    config.validate()?;
    if config.index_mode != IndexMode::Stepwise {
        return Err(SpreError::invalid("sparsity traces need the stepwise index mode"));
    }
    if config.kernels.is_empty() {
        return Err(SpreError::invalid("at least one kernel family is required"));
    }
    let problem = Problem::from_spec(&config.problem)?;
    let designs: Vec<(f64, Design)> = config.family(&problem)?.designs().collect();
    let tasks: Vec<(usize, KernelFamily)> = (0..designs.len())
        .flat_map(|i| config.kernels.iter().map(move |&k| (i, k)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(i, kernel)| {
            let (h, design) = &designs[i];
            let result = Dataset::from_fn(design.clone(), |x| problem.eval(x))
                .and_then(|data| stepwise_select_with(ModelKind::Spre, &data, kernel));
            match result {
                Ok(t) => SparsityRecord {
                    h: *h,
                    kernel,
                    chosen: Some(t.chosen),
                    theta: t.theta,
                    loocv: t.loocv,
                    error: String::new(),
                },
                Err(e) => SparsityRecord {
                    h: *h,
                    kernel,
                    chosen: None,
                    theta: Vec::new(),
                    loocv: None,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    Ok(SparsityTrace {
        problem: problem.name(),
        records,
    })
}

/// Least-squares slope of `log₂ abs_error` against `log₂ h`, using only rows
/// whose error exceeds `100×` the smallest positive error among `rows`.
pub fn estimate_slope(rows: &[&ResultRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.abs_error.map(|e| (r.h, e)))
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .collect();
    let floor = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let used: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, e)| *e > 100.0 * floor)
        .map(|(h, e)| (h.log2(), e.log2()))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 12] = [
    "problem",
    "method",
    "kernel",
    "h",
    "estimate",
    "variance",
    "abs_error",
    "rel_error",
    "chosen_A",
    "theta",
    "wall_time_ms",
    "error",
];

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.method.name().to_string(),
            r.kernel.clone(),
            r.h.to_string(),
            fmt_opt(r.estimate),
            fmt_opt(r.variance),
            fmt_opt(r.abs_error),
            fmt_opt(r.rel_error),
            r.chosen_a.clone(),
            r.theta.clone(),
            fmt_opt(r.wall_time_ms),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    Ok(())
}
