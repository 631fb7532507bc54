//! JSON scenarios: a graph, a control set, a task and its parameters.
//! Running one yields a summary with named assertions plus CSV detail
//! files; identical inputs give byte-identical output.
//!
//! ```json
//! {
//!   "name": "c4-weak-obs",
//!   "graph": {"family": "cycle", "n": 4},
//!   "subset": {"parity": "even"},
//!   "task": "weak-obs",
//!   "params": {"T": 6, "delta": 0.5, "r": 2, "samples": 1000, "seed": 7}
//! }
//! ```
//!
//! Graph families: `path {n}`, `cycle {n}`, `torus {p, q}`,
//! `cyclic-cover {base, k}`, `random {n, p, seed}`, `file {path}`. Subsets:
//! `{"ids": [...]}`, `{"parity": "even" | "odd"}`, `{"file": path}`,
//! `{"all": true}`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{
    self, hautus_obstruction, mode_invariance_check, stabilize, synth_control, verify_control_with,
    ControlSignal, Duhamel, HAUTUS_TOL,
};
use crate::error::{Error, Result};
use crate::families;
use crate::graph::io::{load_graph, load_subset};
use crate::graph::{
    build_cyclic_cover, folner_ratio_exact, validate_assumptions, validate_covering, CoveringMap,
    MetricKind, VertexSet, WeightedGraph,
};
use crate::observability::{
    exact_obs_constant, random_unit_state, up_sweep, verify_weak_obs, weak_obs_constants, Geometry,
};
use crate::report::{csv_string, ext, fmt_f64, to_json};
use crate::spectral::{eigendecompose, SpectralDecomposition};
use crate::stochastic::{
    far_vertex_sequence, fk_estimate, necessity_bounds_check, sample_ctmc_path, stream_rng, Ctmc,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSource {
    Path { n: usize },
    Cycle { n: usize },
    Torus { p: usize, q: usize },
    CyclicCover { base: Box<GraphSource>, k: usize },
    Random { n: usize, p: f64, seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsetSource {
    Ids(Vec<String>),
    Parity(Parity),
    File(PathBuf),
    All(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Validate,
    Spectrum,
    UpSweep,
    WeakObs,
    Control,
    NonNull,
    Necessity,
    Stabilize,
    Stochastic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "T", default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default, with = "ext::option")]
    pub r: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub periods: Option<usize>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Vertex ids.
    #[serde(default)]
    pub x: Option<Vec<String>>,
    /// Initial state, one value per vertex.
    #[serde(default)]
    pub f0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphSource,
    #[serde(default)]
    pub subset: Option<SubsetSource>,
    pub task: Task,
    #[serde(default)]
    pub params: Params,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a scenario; relative file references resolve against its
    /// directory, and a missing name defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s = Self::parse(&fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        s.graph.rebase(dir);
        if let Some(SubsetSource::File(p)) = &mut s.subset {
            *p = dir.join(&*p);
        }
        if s.name.is_none() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned());
        }
        Ok(s)
    }
}

impl GraphSource {
    fn rebase(&mut self, dir: &Path) {
        match self {
            GraphSource::File { path } => *path = dir.join(&*path),
            GraphSource::CyclicCover { base, .. } => base.rebase(dir),
            _ => {}
        }
    }
}

/// The graph of a source, with the covering map for covers.
pub fn build_family(source: &GraphSource) -> Result<(WeightedGraph, Option<CoveringMap>)> {
    Ok(match source {
        GraphSource::Path { n } => (families::path(*n)?, None),
        GraphSource::Cycle { n } => (families::cycle(*n)?, None),
        GraphSource::Torus { p, q } => (families::torus(*p, *q)?, None),
        GraphSource::Random { n, p, seed } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParams(format!("edge probability {p}")));
            }
            (families::random_connected(*n, *p, *seed)?, None)
        }
        GraphSource::File { path } => (load_graph(path)?, None),
        GraphSource::CyclicCover { base, k } => {
            let (b, _) = build_family(base)?;
            let cover = build_cyclic_cover(&b, *k)?;
            (cover.cover().clone(), Some(cover))
        }
    })
}

fn build_subset(g: &WeightedGraph, source: Option<&SubsetSource>) -> Result<Option<VertexSet>> {
    Ok(match source {
        None => None,
        Some(SubsetSource::Ids(ids)) => Some(g.subset(ids)?),
        Some(SubsetSource::Parity(p)) => Some(families::parity_subset(g, *p == Parity::Even)),
        Some(SubsetSource::File(path)) => Some(load_subset(g, path)?),
        Some(SubsetSource::All(true)) => Some(g.all_vertices()),
        Some(SubsetSource::All(false)) => Some(VertexSet::new(g.len(), [])),
    })
}

/// One named inequality checked by a task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    #[serde(with = "ext")]
    pub value: f64,
    #[serde(with = "ext")]
    pub bound: f64,
}

impl Assertion {
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Assertion {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Assertion {
            name: name.into(),
            passed: value >= bound,
            value,
            bound,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Assertion {
            name: name.into(),
            passed: ok,
            value: v,
            bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub subset: Option<Vec<String>>,
}

/// The JSON summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub task: Task,
    pub seed: Option<u64>,
    pub passed: bool,
    pub graph: GraphSummary,
    pub assertions: Vec<Assertion>,
    pub results: TaskResults,
}

impl Summary {
    pub fn failed_assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

/// A completed run: the summary and the CSV files to write next to it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub csv: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TaskResults {
    Validate(ValidateResults),
    Spectrum(SpectrumResults),
    UpSweep(UpSweepResults),
    WeakObs(WeakObsResults),
    Control(ControlResults),
    NonNull(NonNullResults),
    Necessity(NecessityResults),
    Stabilize(control::StabilizationReport),
    Stochastic(StochasticResults),
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateResults {
    pub assumptions: crate::graph::AssumptionReport,
    pub geometry_combinatorial: Option<Geometry>,
    pub geometry_length: Option<Geometry>,
    /// Exact `b(D, X \ D) / m(D)` as `p/q`.
    pub folner_ratio: Option<String>,
    pub covering: Option<CoverCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverCheck {
    pub valid: bool,
    pub violation: Option<crate::graph::CoveringViolation>,
    pub base_vertices: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResults {
    #[serde(with = "ext::vec")]
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    #[serde(with = "ext")]
    pub max_residual: f64,
    #[serde(with = "ext")]
    pub orthonormality_defect: f64,
    #[serde(with = "ext")]
    pub norm_h_plus_1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpSweepResults {
    pub points: usize,
    pub applicable_points: usize,
    pub reports: Vec<crate::observability::UpReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakObsResults {
    pub constants: crate::observability::WeakObsConstants,
    pub verification: crate::observability::WeakObsVerification,
    #[serde(with = "ext")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlResults {
    #[serde(with = "ext")]
    pub alpha: f64,
    pub constants: Option<crate::observability::WeakObsConstants>,
    /// `‖u‖` in the dual time norm, when observation constants are known.
    #[serde(with = "ext::option")]
    pub dual_cost: Option<f64>,
    pub synthesized: control::ControlResult,
    /// Relative gap between exact and quadrature propagation.
    #[serde(with = "ext")]
    pub resimulation_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionSummary {
    #[serde(with = "ext")]
    pub eigenvalue: f64,
    pub dimension: usize,
    /// `‖φ|_D‖` for the returned basis, maximized.
    #[serde(with = "ext")]
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonNullResults {
    #[serde(rename = "T", with = "ext")]
    pub t: f64,
    pub obstructions: Vec<ObstructionSummary>,
    #[serde(with = "ext")]
    pub exact_obs_constant: f64,
    pub trials: usize,
    #[serde(with = "ext")]
    pub max_mode_residual: f64,
    /// `e^{-λT} ‖P_obstruction f0‖ / ‖f0‖` for the probe state.
    #[serde(with = "ext::option")]
    pub floor: Option<f64>,
    pub unreachable_reported: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityResults {
    pub far_vertices: crate::stochastic::FarVertexSequence,
    pub reports: Vec<crate::stochastic::NecessityReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StochasticResults {
    #[serde(rename = "T", with = "ext")]
    pub t: f64,
    pub start: String,
    #[serde(with = "ext")]
    pub exact: f64,
    pub estimates: Vec<crate::stochastic::McEstimate>,
    pub within_4_stderr: usize,
    pub jump_samples: usize,
    /// `(neighbor id, empirical frequency, exact probability)`.
    pub first_jump: Vec<(String, f64, f64)>,
    pub seed: u64,
}

/// Context shared by the tasks.
struct Ctx<'a> {
    g: &'a WeightedGraph,
    cover: Option<&'a CoveringMap>,
    d: Option<&'a VertexSet>,
    p: &'a Params,
    verbose: bool,
}

impl Ctx<'_> {
    fn need<T: Copy>(&self, v: Option<T>, what: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidParams(format!("task needs parameter `{what}`")))
    }

    fn subset(&self) -> Result<&VertexSet> {
        self.d
            .ok_or_else(|| Error::InvalidParams("task needs a subset".into()))
    }

    fn seed(&self) -> u64 {
        self.p.seed.unwrap_or(0)
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn vertices(&self) -> Result<Vec<usize>> {
        let ids = self
            .p
            .x
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("task needs parameter `x`".into()))?;
        ids.iter().map(|id| self.g.index_of(id)).collect()
    }

    fn initial_state(&self, sd: &SpectralDecomposition) -> Result<DVector<f64>> {
        match &self.p.f0 {
            Some(v) if v.len() == self.g.len() => Ok(DVector::from_column_slice(v)),
            Some(v) => Err(Error::DimensionMismatch {
                expected: self.g.len(),
                got: v.len(),
            }),
            None => Ok(random_unit_state(sd, self.seed(), 0)),
        }
    }
}

/// Runs a scenario; `seed` overrides the scenario's own seed.
pub fn run_scenario(scenario: &Scenario, seed: Option<u64>, verbose: bool) -> Result<Outcome> {
    let mut params = scenario.params.clone();
    if seed.is_some() {
        params.seed = seed;
    }
    let (g, cover) = build_family(&scenario.graph)?;
    let d = build_subset(&g, scenario.subset.as_ref())?;
    let ctx = Ctx {
        g: &g,
        cover: cover.as_ref(),
        d: d.as_ref(),
        p: &params,
        verbose,
    };
    ctx.log(format!("graph: {} vertices, {} edges", g.len(), g.edges().count()));
    let mut csv = Vec::new();
    let mut checks = Vec::new();
    let results = match scenario.task {
        Task::Validate => TaskResults::Validate(task_validate(&ctx, &mut checks)?),
        Task::Spectrum => TaskResults::Spectrum(task_spectrum(&ctx, &mut checks, &mut csv)?),
        Task::UpSweep => TaskResults::UpSweep(task_up_sweep(&ctx, &mut checks, &mut csv)?),
        Task::WeakObs => TaskResults::WeakObs(task_weak_obs(&ctx, &mut checks)?),
        Task::Control => TaskResults::Control(task_control(&ctx, &mut checks, &mut csv)?),
        Task::NonNull => TaskResults::NonNull(task_non_null(&ctx, &mut checks, &mut csv)?),
        Task::Necessity => TaskResults::Necessity(task_necessity(&ctx, &mut checks, &mut csv)?),
        Task::Stabilize => TaskResults::Stabilize(task_stabilize(&ctx, &mut checks, &mut csv)?),
        Task::Stochastic => TaskResults::Stochastic(task_stochastic(&ctx, &mut checks, &mut csv)?),
    };
    for a in &checks {
        ctx.log(format!(
            "{} {}: {} vs {}",
            if a.passed { "ok  " } else { "FAIL" },
            a.name,
            fmt_f64(a.value),
            fmt_f64(a.bound)
        ));
    }
    let summary = Summary {
        scenario: scenario.name.clone().unwrap_or_else(|| "scenario".into()),
        task: scenario.task,
        seed: params.seed,
        passed: checks.iter().all(|a| a.passed),
        graph: GraphSummary {
            vertices: g.len(),
            edges: g.edges().count(),
            subset: d.as_ref().map(|d| d.iter().map(|x| g.id(x).to_string()).collect()),
        },
        assertions: checks,
        results,
    };
    Ok(Outcome { summary, csv })
}

/// Writes `summary.json` and the CSV files into `dir`, returning the paths.
pub fn emit_report(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    fs::write(&summary, to_json(&outcome.summary)?)?;
    written.push(summary);
    for (name, body) in &outcome.csv {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn task_validate(ctx: &Ctx, checks: &mut Vec<Assertion>) -> Result<ValidateResults> {
    let assumptions = validate_assumptions(ctx.g);
    checks.push(Assertion::holds("connected", assumptions.connected));
    let proper = ctx.d.filter(|d| !d.is_empty() && !d.is_full());
    let (comb, len) = match proper {
        Some(d) => (
            Some(Geometry::compute(ctx.g, d, MetricKind::Combinatorial)?),
            Some(Geometry::compute(ctx.g, d, MetricKind::Length)?),
        ),
        None => (None, None),
    };
    if let Some(gl) = &len {
        checks.push(Assertion::holds("relatively_dense", gl.covering_radius.is_finite()));
    }
    let folner_ratio = match ctx.d {
        Some(d) if !d.is_empty() => Some(folner_ratio_exact(ctx.g, d)?.to_string()),
        _ => None,
    };
    let covering = ctx.cover.map(|c| {
        let res = validate_covering(c);
        CoverCheck {
            valid: res.is_ok(),
            violation: res.err(),
            base_vertices: c.base().len(),
        }
    });
    if let Some(c) = &covering {
        checks.push(Assertion::holds("covering_axioms", c.valid));
    }
    Ok(ValidateResults {
        assumptions,
        geometry_combinatorial: comb,
        geometry_length: len,
        folner_ratio,
        covering,
    })
}

fn task_spectrum(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<SpectrumResults> {
    let sd = eigendecompose(ctx.g)?;
    let scale = sd.lambda_max() + 1.0;
    checks.push(Assertion::le("eigen_residual", sd.max_residual(), 1e-10 * scale));
    checks.push(Assertion::le("orthonormality_defect", sd.orthonormality_defect(), 1e-10));
    let mut rows = Vec::new();
    for (k, group) in sd.groups().iter().enumerate() {
        for i in group.clone() {
            rows.push(vec![i.to_string(), fmt_f64(sd.eigenvalue(i)), k.to_string()]);
        }
    }
    csv.push(("spectrum.csv".into(), csv_string(&["index", "eigenvalue", "group"], rows)?));
    Ok(SpectrumResults {
        eigenvalues: sd.eigenvalues().to_vec(),
        multiplicities: sd.groups().iter().map(|g| g.len()).collect(),
        max_residual: sd.max_residual(),
        orthonormality_defect: sd.orthonormality_defect(),
        norm_h_plus_1: sd.op_norm_h_plus_1(),
    })
}

fn task_up_sweep(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<UpSweepResults> {
    let d = ctx.subset()?;
    let sd = eigendecompose(ctx.g)?;
    let reports = up_sweep(ctx.g, &sd, d)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows = reports.iter().map(|r| {
        vec![
            fmt_f64(r.sup_i),
            fmt_f64(r.sharp_constant),
            r.applicable.to_string(),
            opt(r.guaranteed_bound),
            r.volume_applicable.to_string(),
            opt(r.volume_bound),
        ]
    });
    csv.push((
        "up_sweep.csv".into(),
        csv_string(
            &["sup_i", "sharp_constant", "applicable", "guaranteed_bound", "volume_applicable", "volume_bound"],
            rows,
        )?,
    ));
    for r in &reports {
        if let Some(b) = r.guaranteed_bound {
            checks.push(Assertion::le(format!("sharp_le_bound@{}", fmt_f64(r.sup_i)), r.sharp_constant, b));
        }
        if let Some(b) = r.volume_bound {
            checks.push(Assertion::le(format!("sharp_le_volume_bound@{}", fmt_f64(r.sup_i)), r.sharp_constant, b));
        }
    }
    Ok(UpSweepResults {
        points: reports.len(),
        applicable_points: reports.iter().filter(|r| r.applicable).count(),
        reports,
    })
}

fn task_weak_obs(ctx: &Ctx, checks: &mut Vec<Assertion>) -> Result<WeakObsResults> {
    let d = ctx.subset()?;
    let t = ctx.need(ctx.p.t, "T")?;
    let delta = ctx.need(ctx.p.delta, "delta")?;
    let r = ctx.need(ctx.p.r, "r")?;
    let sd = eigendecompose(ctx.g)?;
    let constants = weak_obs_constants(ctx.g, &sd, d, t, delta, r)?;
    let samples = ctx.p.samples.unwrap_or(1000);
    ctx.log(format!("checking {} probes", 2 * ctx.g.len() + samples));
    let verification = verify_weak_obs(&sd, d, &constants, samples, ctx.seed())?;
    let tolerance = 1e-9 * (constants.k + constants.alpha + 1.0);
    checks.push(Assertion::ge("min_slack", verification.min_slack, -tolerance));
    Ok(WeakObsResults {
        constants,
        verification,
        tolerance,
    })
}

fn task_control(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<ControlResults> {
    let d = ctx.subset()?;
    let t = ctx.need(ctx.p.t, "T")?;
    let sd = eigendecompose(ctx.g)?;
    let constants = match (ctx.p.delta, ctx.p.r) {
        (Some(delta), Some(r)) => Some(weak_obs_constants(ctx.g, &sd, d, t, delta, r)?),
        _ => None,
    };
    let alpha = match (ctx.p.alpha, &constants) {
        (Some(a), _) => a,
        (None, Some(c)) => c.alpha,
        (None, None) => return Err(Error::InvalidParams("task needs `alpha` or `delta` and `r`".into())),
    };
    let f0 = ctx.initial_state(&sd)?;
    let (signal, synthesized) = synth_control(&sd, d, t, &f0, alpha)?;
    let quad = verify_control_with(&sd, &f0, &signal, Duhamel::Quadrature)?;
    let gap = (quad.final_vector() - synthesized.final_vector()).norm();
    let resimulation_gap = if synthesized.final_norm > 0.0 {
        gap / synthesized.final_norm
    } else {
        gap
    };
    let f0_norm = synthesized.initial_norm;
    checks.push(Assertion::le("achieved_alpha", synthesized.achieved_alpha, alpha));
    checks.push(Assertion::le("resimulation_gap", resimulation_gap, 1e-8));
    checks.push(Assertion::le(
        "energy_vs_l2",
        (synthesized.energy - synthesized.costs.l2.powi(2)).abs(),
        1e-8 * synthesized.energy.max(f64::MIN_POSITIVE),
    ));
    // The duality bound covers every target at or above the constant α.
    let dual_cost = match constants.as_ref().filter(|c| alpha >= c.alpha) {
        Some(c) => {
            let cost = signal.lr_norm(c.dual_index())?;
            checks.push(Assertion::le("dual_cost", cost, c.k * f0_norm * (1.0 + 1e-6)));
            Some(cost)
        }
        None => None,
    };
    csv.push(("control.csv".into(), signal.to_csv(ctx.g)?));
    Ok(ControlResults {
        alpha,
        constants,
        dual_cost,
        synthesized,
        resimulation_gap,
    })
}

fn task_non_null(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<NonNullResults> {
    let d = ctx.subset()?;
    let t = ctx.need(ctx.p.t, "T")?;
    let trials = ctx.p.samples.unwrap_or(50);
    let seed = ctx.seed();
    let sd = eigendecompose(ctx.g)?;
    let obstructions = hautus_obstruction(&sd, d, HAUTUS_TOL);
    let exact = exact_obs_constant(&sd, d, t)?;
    checks.push(Assertion::holds("obstruction_found", !obstructions.is_empty()));
    checks.push(Assertion::holds("exact_obs_constant_infinite", exact.is_infinite()));

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (k, o) in obstructions.iter().enumerate() {
        let residual = o
            .vectors
            .iter()
            .map(|phi| sd.restricted_norm(phi, d))
            .fold(0.0, f64::max);
        checks.push(Assertion::le(format!("obstruction_{k}_vanishes_on_D"), residual, 1e-10));
        summaries.push(ObstructionSummary {
            eigenvalue: o.eigenvalue,
            dimension: o.vectors.len(),
            residual,
        });
        for (j, phi) in o.vectors.iter().enumerate() {
            for x in 0..ctx.g.len() {
                rows.push(vec![
                    fmt_f64(o.eigenvalue),
                    j.to_string(),
                    ctx.g.id(x).to_string(),
                    fmt_f64(phi[x]),
                ]);
            }
        }
    }
    csv.push((
        "obstructions.csv".into(),
        csv_string(&["eigenvalue", "basis_index", "vertex", "value"], rows)?,
    ));

    let mut max_mode_residual: f64 = 0.0;
    let mut floor = None;
    let mut unreachable_reported = None;
    if let Some(o) = obstructions.first() {
        let phi = &o.vectors[0];
        let grid: Vec<f64> = (0..=64).map(|k| t * k as f64 / 64.0).collect();
        for trial in 0..trials {
            let mut rng = stream_rng(seed, trial as u64);
            let samples = DMatrix::from_fn(d.len(), grid.len(), |_, _| {
                rand::Rng::random_range(&mut rng, -1.0..1.0)
            });
            let u = ControlSignal::sampled(ctx.g, d.clone(), grid.clone(), samples)?;
            let f0 = random_unit_state(&sd, seed ^ 0x5eed, trial);
            max_mode_residual = max_mode_residual.max(mode_invariance_check(&sd, phi, o.eigenvalue, &f0, &u)?);
        }
        checks.push(Assertion::le("mode_invariance_residual", max_mode_residual, 1e-9));

        // Probe with the obstruction plus an observable perturbation.
        let f0 = phi + random_unit_state(&sd, seed, trials) * 0.5;
        let f0_norm = sd.norm(&f0);
        let level = (-o.eigenvalue * t).exp() * sd.inner(&f0, phi).abs() / f0_norm;
        floor = Some(level);
        let outcome = synth_control(&sd, d, t, &f0, 0.5 * level);
        let reported = matches!(outcome, Err(Error::TargetUnreachable { .. }));
        checks.push(Assertion::holds("target_below_floor_unreachable", reported));
        unreachable_reported = Some(reported);
    }
    Ok(NonNullResults {
        t,
        obstructions: summaries,
        exact_obs_constant: exact,
        trials,
        max_mode_residual,
        floor,
        unreachable_reported,
    })
}

fn task_necessity(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<NecessityResults> {
    let d = ctx.subset()?;
    let xs = ctx.vertices()?;
    let t_grid = ctx
        .p
        .t_grid
        .clone()
        .ok_or_else(|| Error::InvalidParams("task needs parameter `t_grid`".into()))?;
    let sd = eigendecompose(ctx.g)?;
    let far = far_vertex_sequence(ctx.g, d, ctx.p.n_max.unwrap_or(ctx.g.len()))?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &x in &xs {
        let rep = necessity_bounds_check(&sd, d, x, &t_grid)?;
        for row in &rep.rows {
            let tag = format!("x={},t={}", ctx.g.id(x), fmt_f64(row.t));
            checks.push(Assertion::ge(format!("lower_bound[{tag}]"), row.lower_margin, -1e-12));
            checks.push(Assertion::ge(format!("erlang_bound[{tag}]"), row.upper_margin, -1e-12));
            rows.push(vec![
                ctx.g.id(x).to_string(),
                rep.distance.to_string(),
                fmt_f64(row.t),
                fmt_f64(row.norm),
                fmt_f64(row.lower_bound),
                fmt_f64(row.restricted_sq),
                fmt_f64(row.erlang_bound),
            ]);
        }
        reports.push(rep);
    }
    csv.push((
        "necessity.csv".into(),
        csv_string(
            &["x", "distance", "t", "norm", "lower_bound", "restricted_sq", "erlang_bound"],
            rows,
        )?,
    ));
    Ok(NecessityResults {
        far_vertices: far,
        reports,
    })
}

fn task_stabilize(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<control::StabilizationReport> {
    let d = ctx.subset()?;
    let t = ctx.need(ctx.p.t, "T")?;
    let alpha = ctx.need(ctx.p.alpha, "alpha")?;
    let periods = ctx.p.periods.unwrap_or(10);
    let sd = eigendecompose(ctx.g)?;
    let f0 = ctx.initial_state(&sd)?;
    let rep = stabilize(&sd, d, t, alpha, periods, &f0)?;
    let f0_norm = rep.period_norms[0];
    for (k, n) in rep.period_norms.iter().enumerate() {
        checks.push(Assertion::le(
            format!("period_{k}"),
            *n,
            alpha.powi(k as i32) * f0_norm + 1e-8,
        ));
    }
    checks.push(Assertion::le("envelope", rep.max_envelope_ratio, 1.0 + 1e-9));
    csv.push((
        "stabilization.csv".into(),
        csv_string(
            &["t", "norm"],
            rep.trajectory.iter().map(|(s, n)| vec![fmt_f64(*s), fmt_f64(*n)]),
        )?,
    ));
    Ok(rep)
}

fn task_stochastic(
    ctx: &Ctx,
    checks: &mut Vec<Assertion>,
    csv: &mut Vec<(String, String)>,
) -> Result<StochasticResults> {
    let t = ctx.need(ctx.p.t, "T")?;
    let x = *ctx
        .vertices()?
        .first()
        .ok_or_else(|| Error::InvalidParams("`x` is empty".into()))?;
    let n = ctx.p.samples.unwrap_or(20_000);
    let repeats = ctx.p.repeats.unwrap_or(100);
    let seed = ctx.seed();
    let sd = eigendecompose(ctx.g)?;
    let f = match (&ctx.p.f0, ctx.d) {
        (Some(_), _) => ctx.initial_state(&sd)?,
        (None, Some(d)) => DVector::from_fn(ctx.g.len(), |y, _| if d.contains(y) { 1.0 } else { 0.0 }),
        (None, None) => DVector::from_fn(ctx.g.len(), |y, _| if y == x { 1.0 } else { 0.0 }),
    };
    let exact = sd.semigroup_apply(t, &f)?[x];
    let mut estimates = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        estimates.push(fk_estimate(ctx.g, &f, t, x, n, seed.wrapping_add(rep as u64))?);
    }
    let within = estimates
        .iter()
        .filter(|e| (e.mean - exact).abs() <= 4.0 * e.stderr)
        .count();
    let needed = (repeats * 99).div_ceil(100);
    checks.push(Assertion::ge("fk_within_4_stderr", within as f64, needed as f64));

    let jump_samples = 100_000;
    let chain = Ctmc::new(ctx.g);
    let neighbors = ctx.g.neighbors(x);
    let mut counts = vec![0usize; neighbors.len()];
    for k in 0..jump_samples {
        if let Some((_, y)) = chain.step(x, &mut stream_rng(seed ^ 0x7a3f_1e2d, k as u64)) {
            let slot = neighbors.iter().position(|&(z, _)| z == y).expect("neighbor");
            counts[slot] += 1;
        }
    }
    let total_b: f64 = neighbors.iter().map(|&(_, b)| b).sum();
    let mut first_jump = Vec::new();
    for (slot, &(y, b)) in neighbors.iter().enumerate() {
        let p = b / total_b;
        let freq = counts[slot] as f64 / jump_samples as f64;
        let se = (p * (1.0 - p) / jump_samples as f64).sqrt();
        checks.push(Assertion::le(format!("first_jump_to_{}", ctx.g.id(y)), (freq - p).abs(), 4.0 * se));
        first_jump.push((ctx.g.id(y).to_string(), freq, p));
    }

    let path = sample_ctmc_path(ctx.g, x, t, seed)?;
    csv.push(("path.csv".into(), path.to_csv(ctx.g)?));
    csv.push((
        "fk_estimates.csv".into(),
        csv_string(
            &["repeat", "seed", "mean", "stderr", "exact"],
            estimates.iter().enumerate().map(|(k, e)| {
                vec![k.to_string(), e.seed.to_string(), fmt_f64(e.mean), fmt_f64(e.stderr), fmt_f64(exact)]
            }),
        )?,
    ));
    Ok(StochasticResults {
        t,
        start: ctx.g.id(x).to_string(),
        exact,
        estimates,
        within_4_stderr: within,
        jump_samples,
        first_jump,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(json: &str) -> Scenario {
        Scenario::parse(json).unwrap()
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(Scenario::parse("{"), Err(Error::Parse(_))));
        assert!(matches!(
            Scenario::parse(r#"{"graph": {"family": "moebius"}, "task": "spectrum"}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            Scenario::parse(r#"{"graph": {"family": "cycle", "n": 4}, "task": "spectrum", "params": {"typo": 1}}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn families_build() {
        let s = scenario(
            r#"{"graph": {"family": "cyclic-cover", "base": {"family": "cycle", "n": 4}, "k": 2}, "task": "validate"}"#,
        );
        let (g, cover) = build_family(&s.graph).unwrap();
        assert_eq!(g.len(), 8);
        assert!(validate_covering(cover.as_ref().unwrap()).is_ok());
        let out = run_scenario(&s, None, false).unwrap();
        assert!(out.passed());
    }

    #[test]
    fn weak_obs_scenario_echoes_constants() {
        let s = scenario(
            r#"{"graph": {"family": "cycle", "n": 4}, "subset": {"parity": "even"}, "task": "weak-obs",
                "params": {"T": 6, "delta": 0.5, "r": 2, "samples": 50, "seed": 3}}"#,
        );
        let out = run_scenario(&s, None, false).unwrap();
        assert!(out.passed());
        let json = to_json(&out.summary).unwrap();
        assert!(json.contains("\"lambda\": 1.6666666666666666e-1"), "{json}");
        assert!(json.contains("\"kappa\": 6.0000000000000000e2"));
        assert!(json.contains("\"seed\": 3"));
    }

    #[test]
    fn missing_parameters_are_validation_errors() {
        let s = scenario(r#"{"graph": {"family": "cycle", "n": 4}, "subset": {"ids": ["0"]}, "task": "control"}"#);
        assert!(matches!(run_scenario(&s, None, false), Err(Error::InvalidParams(_))));
        let s = scenario(r#"{"graph": {"family": "cycle", "n": 4}, "subset": {"ids": ["9"]}, "task": "up-sweep"}"#);
        assert!(matches!(run_scenario(&s, None, false), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn seed_override_is_echoed() {
        let s = scenario(
            r#"{"graph": {"family": "path", "n": 2}, "task": "stochastic",
                "params": {"T": 1, "x": ["0"], "samples": 200, "repeats": 3, "seed": 1}}"#,
        );
        let out = run_scenario(&s, Some(42), false).unwrap();
        assert_eq!(out.summary.seed, Some(42));
        match &out.summary.results {
            TaskResults::Stochastic(r) => assert_eq!(r.seed, 42),
            other => panic!("{other:?}"),
        }
    }
}
