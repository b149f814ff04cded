//! End-to-end workflow: data ingestion, basis fitting, prior estimation,
//! penalty-grid BIC tuning, dual-regime fitting with model choice, oracle
//! certification, metrics, and figure-data emission. The CLI is a thin
//! wrapper over this module.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{gram, BasisConfig, BasisSystem};
use crate::bnb::{self, SolveOptions, Termination};
use crate::error::{Error, Result};
use crate::graph::{Dag, EdgeSet, GraphJson, ShdBreakdown};
use crate::mip::{ConstraintSets, MipOptions, MipProblem, VarianceMode};
use crate::oracle;
use crate::priors::{self, GreedyLearner, RegSpec};
use crate::rng;
use crate::score::{
    bic_equal, bic_unequal, profile_score, profile_score_eqvar, FittedModelJson, Support,
};
use crate::sem::{self, Dataset, SemSpec};

/// Penalty grid: explicit values of `lambda^2`, or the scale family
/// `cbar * p (log p)^2 / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    Explicit(Vec<f64>),
    ScaleFamily { cbars: Vec<f64> },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        // brackets the theory rate p (log p)^2 / n
        LambdaGrid::ScaleFamily {
            cbars: vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

impl LambdaGrid {
    pub fn values(&self, p: usize, n: usize) -> Result<Vec<f64>> {
        let values = match self {
            LambdaGrid::Explicit(values) => values.clone(),
            LambdaGrid::ScaleFamily { cbars } => {
                let logp = (p.max(2) as f64).ln();
                let scale = p as f64 * logp * logp / n as f64;
                cbars.iter().map(|c| c * scale).collect()
            }
        };
        if values.is_empty() {
            return Err(Error::InvalidInput("penalty grid is empty".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("penalty values must be nonnegative".into()));
        }
        Ok(values)
    }
}

/// Variance-regime policy for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitVarianceMode {
    Unequal,
    Equal,
    /// Fit both regimes and keep the smaller BIC.
    #[default]
    Auto,
}

impl FitVarianceMode {
    fn regimes(self) -> Vec<VarianceMode> {
        match self {
            FitVarianceMode::Unequal => vec![VarianceMode::Unequal],
            FitVarianceMode::Equal => vec![VarianceMode::Equal],
            FitVarianceMode::Auto => vec![VarianceMode::Unequal, VarianceMode::Equal],
        }
    }
}

/// Bootstrap-and-neighborhood prior estimation options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    /// Super-structure threshold.
    #[serde(default = "default_tau_super")]
    pub tau_super: f64,
    /// Partial-order threshold (0.95 is the recommended operating point).
    #[serde(default = "default_tau_partial")]
    pub tau_partial: f64,
    /// Stable-set threshold (1 keeps only unanimous edges).
    #[serde(default = "default_tau_stable")]
    pub tau_stable: f64,
    /// Also run group-lasso neighborhood selection and take the union.
    #[serde(default = "default_true")]
    pub neighborhood: bool,
}

fn default_bootstrap_b() -> usize {
    50
}
fn default_tau_super() -> f64 {
    0.3
}
fn default_tau_partial() -> f64 {
    0.95
}
fn default_tau_stable() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            bootstrap_b: default_bootstrap_b(),
            tau_super: default_tau_super(),
            tau_partial: default_tau_partial(),
            tau_stable: default_tau_stable(),
            neighborhood: default_true(),
        }
    }
}

/// Externally supplied constraint edges (1-indexed pairs). Any set given
/// here replaces the corresponding estimated set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExternalSets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superstructure: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_order: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<Vec<[usize; 2]>>,
}

/// Solver options exposed through the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `None` applies the default policy `0.1 lambda^2 / log p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_early: Option<f64>,
    /// Per-solve wall-clock budget; `None` applies the `60 p` seconds
    /// default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edges: Option<usize>,
    /// Emit a progress line to stderr every this many solver nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress_every: Option<u64>,
}

fn default_workers() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau_early: None,
            time_limit_secs: None,
            node_limit: None,
            workers: 1,
            max_edges: None,
            progress_every: None,
        }
    }
}

/// Full fit configuration; the JSON schema mirrors the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub basis: BasisConfig,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
    #[serde(default)]
    pub variance_mode: FitVarianceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalSets>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
}

impl FitConfig {
    pub fn new(basis: BasisConfig) -> Self {
        FitConfig {
            basis,
            lambda_grid: LambdaGrid::default(),
            variance_mode: FitVarianceMode::default(),
            priors: None,
            external: None,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn time_limit(&self, p: usize) -> Result<Duration> {
        let secs = self.solver.time_limit_secs.unwrap_or(60.0 * p as f64);
        if !(secs > 0.0) {
            return Err(Error::InvalidInput("time limit must be positive".into()));
        }
        Ok(Duration::from_secs_f64(secs))
    }
}

/// One solved grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub lambda_sq: f64,
    pub regime: VarianceMode,
    pub bic: f64,
    pub objective: f64,
    pub gap: f64,
    pub edges: usize,
    pub nodes_explored: u64,
    pub termination: Termination,
    pub timed_out: bool,
    /// The cell's fitted edges (1-indexed), for post-hoc metrics.
    pub graph_edges: Vec<[usize; 2]>,
    /// Structural Hamming distance to a reference graph, when one is
    /// attached afterwards (plot emission).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shd: Option<usize>,
    pub time_ms: u64,
}

impl GridRow {
    /// Attach the SHD against a reference graph.
    pub fn attach_shd(&mut self, p: usize, truth: &Dag) -> Result<()> {
        let edges: Vec<(usize, usize)> = self
            .graph_edges
            .iter()
            .map(|&[k, j]| (k - 1, j - 1))
            .collect();
        let dag = Dag::from_edges(p, &edges)?;
        self.shd = Some(crate::graph::shd_dags(&dag, truth)?);
        Ok(())
    }
}

/// Constraint sets in 1-indexed JSON form.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SetsJson {
    pub superstructure: Vec<[usize; 2]>,
    pub partial_order: Vec<[usize; 2]>,
    pub stable: Vec<[usize; 2]>,
}

impl SetsJson {
    fn from_sets(sets: &ConstraintSets) -> Self {
        let conv = |e: &EdgeSet| e.iter().map(|(k, j)| [k + 1, j + 1]).collect();
        SetsJson {
            superstructure: conv(&sets.superstructure),
            partial_order: conv(&sets.partial_order),
            stable: conv(&sets.stable),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub data_hash: String,
    pub version: String,
}

/// Complete fit output. `time_ms` fields and `wall_time_ms` are the only
/// run-dependent values; [`FitResult::canonical_json_string`] strips them
/// for byte-level reproducibility checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub graph: GraphJson,
    pub model: FittedModelJson,
    pub chosen_regime: VarianceMode,
    pub chosen_lambda_sq: f64,
    pub chosen_bic: f64,
    /// BIC of the chosen support refitted under both regimes.
    pub bic_unequal: f64,
    pub bic_equal: f64,
    pub grid: Vec<GridRow>,
    pub constraint_sets: SetsJson,
    pub all_cells_timed_out: bool,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
    pub wall_time_ms: u64,
}

impl FitResult {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with timing fields removed (identical for identical
    /// `(config, data, seed)` in single-worker mode).
    pub fn canonical_json_string(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        strip_timing(&mut value);
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn dag(&self) -> Result<Dag> {
        Dag::from_json(&self.graph)
    }
}

fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("time_ms");
            map.remove("wall_time_ms");
            for (_, v) in map.iter_mut() {
                strip_timing(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items.iter_mut() {
                strip_timing(v);
            }
        }
        _ => {}
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn edges_from_json(p: usize, pairs: &[[usize; 2]]) -> Result<EdgeSet> {
    let mut set = EdgeSet::new(p);
    for &[k, j] in pairs {
        if k == 0 || j == 0 {
            return Err(Error::InvalidInput("external sets use 1-indexed nodes".into()));
        }
        set.insert(k - 1, j - 1)?;
    }
    Ok(set)
}

/// Estimate the constraint sets for a fit: bootstrap proportions with the
/// greedy baseline learner, a group-lasso neighborhood union sized at
/// twice the baseline's edge count, and thresholding; external sets
/// replace their estimated counterparts.
pub fn estimate_sets(
    config: &FitConfig,
    data: &Dataset,
    system: &BasisSystem,
) -> Result<ConstraintSets> {
    let p = data.p();
    let mut sets = match &config.priors {
        None => ConstraintSets::full(p),
        Some(prior) => {
            let learner = GreedyLearner {
                basis: *config.basis(),
                penalty: None,
            };
            let report = priors::bootstrap_proportions(
                data,
                prior.bootstrap_b,
                &learner,
                rng::derive(config.seed, "priors", 0),
            )?;
            let neighborhood = if prior.neighborhood {
                let reference = priors::greedy_baseline(data, config.basis(), None)?;
                let target = (2 * reference.edge_count()).max(1);
                Some(
                    priors::neighborhood_select(
                        data,
                        system,
                        RegSpec::Auto {
                            target_pairs: target,
                        },
                    )?
                    .edges,
                )
            } else {
                None
            };
            priors::build_sets(
                &report,
                prior.tau_super,
                prior.tau_partial,
                prior.tau_stable,
                neighborhood.as_ref(),
            )?
        }
    };
    if let Some(external) = &config.external {
        let superstructure = match &external.superstructure {
            Some(pairs) => edges_from_json(p, pairs)?,
            None => sets.superstructure.clone(),
        };
        let partial = match &external.partial_order {
            Some(pairs) => edges_from_json(p, pairs)?,
            None => sets.partial_order.clone(),
        };
        let stable = match &external.stable {
            Some(pairs) => edges_from_json(p, pairs)?,
            None => sets.stable.clone(),
        };
        sets = ConstraintSets::new(superstructure, partial, stable)?;
    }
    Ok(sets)
}

impl FitConfig {
    fn basis(&self) -> &BasisConfig {
        &self.basis
    }
}

/// Run the full pipeline on an in-memory dataset.
pub fn fit(config: &FitConfig, data: &Dataset) -> Result<FitResult> {
    let start = std::time::Instant::now();
    let p = data.p();
    let n = data.n();
    let mut warnings = Vec::new();
    if n <= p {
        warnings.push(format!(
            "n = {} does not exceed p = {}; estimates will be unstable",
            n, p
        ));
    }

    let config_json = serde_json::to_string(config)?;
    let data_hash = sha_hex(data.to_csv_string().as_bytes());

    let system = BasisSystem::fit(&config.basis, data)?;
    let gm = Arc::new(gram(&system, data)?);
    let sets = estimate_sets(config, data, &system)?;
    let lambda_values = config.lambda_grid.values(p, n)?;
    let time_limit = config.time_limit(p)?;

    let mut grid: Vec<GridRow> = Vec::new();
    let mut reports = Vec::new();
    for regime in config.variance_mode.regimes() {
        // the big-M pilot depends only on the candidate set and regime
        let mut problem: Option<MipProblem> = None;
        for &lambda_sq in &lambda_values {
            let cell_problem = match &problem {
                None => {
                    let built = MipProblem::build(
                        Arc::clone(&gm),
                        lambda_sq,
                        sets.clone(),
                        MipOptions {
                            mode: regime,
                            max_edges: config.solver.max_edges,
                            big_m: None,
                            eps_diag: crate::mip::EPS_DIAG,
                        },
                    )?;
                    problem = Some(built.clone());
                    built
                }
                Some(base) => base.with_lambda_sq(lambda_sq)?,
            };
            let options = SolveOptions {
                tau_early: config.solver.tau_early,
                time_limit: Some(time_limit),
                node_limit: config.solver.node_limit,
                workers: config.solver.workers,
                progress_every: config.solver.progress_every,
                progress_stderr: config.solver.progress_every.is_some(),
                ..SolveOptions::default()
            };
            let report = bnb::solve(&cell_problem, &options)?;
            let support = &report.incumbent.support;
            let bic = match regime {
                VarianceMode::Unequal => {
                    let gamma = report
                        .incumbent
                        .model
                        .gamma()
                        .expect("unequal incumbent carries gamma");
                    bic_unequal(gamma, support, &gm, n)?
                }
                VarianceMode::Equal => match &report.incumbent.model {
                    bnb::FittedModel::Equal { b, .. } => bic_equal(b, support, &gm, n)?,
                    _ => unreachable!("regime mismatch"),
                },
            };
            grid.push(GridRow {
                lambda_sq,
                regime,
                bic,
                objective: report.upper,
                gap: report.gap,
                edges: support.edge_count(),
                nodes_explored: report.nodes_explored,
                termination: report.termination,
                timed_out: report.termination == Termination::TimeLimit,
                graph_edges: support.edges().iter().map(|&(k, j)| [k + 1, j + 1]).collect(),
                shd: None,
                time_ms: report.wall_time.as_millis() as u64,
            });
            reports.push(report);
        }
    }

    let best_idx = grid
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.bic.partial_cmp(&b.bic).unwrap())
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    let chosen = &reports[best_idx];
    let chosen_row = &grid[best_idx];
    let (dag, theta) = bnb::extract_graph(chosen)?;

    // score breakdown and both-regime BICs on the chosen support
    let support = Support::from_dag(&dag);
    let profile = profile_score(&support, &gm, 0.0)?;
    let eq_profile = profile_score_eqvar(&support, &gm, 0.0)?;
    let contributions: Vec<f64> = match chosen_row.regime {
        VarianceMode::Unequal => profile.per_node.iter().map(|c| c.contribution).collect(),
        VarianceMode::Equal => eq_profile.omegas.clone(),
    };
    let bic_u = bic_unequal(&profile.gamma, &support, &gm, n)?;
    let bic_e = bic_equal(&eq_profile.b, &support, &gm, n)?;

    let all_cells_timed_out = grid.iter().all(|row| row.timed_out);
    Ok(FitResult {
        graph: dag.to_json(),
        model: FittedModelJson::from_theta(&theta, &contributions),
        chosen_regime: chosen_row.regime,
        chosen_lambda_sq: chosen_row.lambda_sq,
        chosen_bic: chosen_row.bic,
        bic_unequal: bic_u,
        bic_equal: bic_e,
        grid,
        constraint_sets: SetsJson::from_sets(&sets),
        all_cells_timed_out,
        warnings,
        provenance: Provenance {
            config_hash: sha_hex(config_json.as_bytes()),
            data_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Read a CSV dataset and run [`fit`].
pub fn fit_csv(config: &FitConfig, data_path: &Path) -> Result<FitResult> {
    let data = Dataset::read_csv(data_path)?;
    fit(config, &data)
}

/// Simulate a dataset and write the CSV plus the ground-truth graph JSON.
pub fn simulate_to_files(
    spec: &SemSpec,
    n: usize,
    seed: u64,
    csv_path: &Path,
    truth_path: Option<&Path>,
) -> Result<Dataset> {
    let data = sem::sample(spec, n, seed)?;
    data.write_csv(csv_path)?;
    if let Some(path) = truth_path {
        let dag = spec.dag()?;
        std::fs::write(path, serde_json::to_string_pretty(&dag.to_json())?)?;
    }
    Ok(data)
}

/// Certification outcome for one penalty/regime cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyCell {
    pub lambda_sq: f64,
    pub regime: VarianceMode,
    pub solver_objective: f64,
    pub oracle_objective: f64,
    pub delta: f64,
    pub oracle_margin: f64,
    pub edge_sets_match: bool,
    pub pass: bool,
}

/// Oracle cross-check report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyReport {
    pub cells: Vec<CertifyCell>,
    pub pass: bool,
}

/// Cross-check the branch-and-bound solver against exhaustive enumeration
/// on identical Gram and penalty (requires `p <= 5`). Both searches honor
/// the super-structure; partial-order and stable sets are not applied
/// here. A cell passes iff the objectives agree within `1e-6` relative.
pub fn certify(config: &FitConfig, data: &Dataset) -> Result<CertifyReport> {
    let p = data.p();
    if p > crate::graph::MAX_ENUMERATION_NODES {
        return Err(Error::InvalidInput(format!(
            "certification enumerates all DAGs and needs p <= {}, got {}",
            crate::graph::MAX_ENUMERATION_NODES,
            p
        )));
    }
    let system = BasisSystem::fit(&config.basis, data)?;
    let gm = Arc::new(gram(&system, data)?);
    let restrict = config
        .external
        .as_ref()
        .and_then(|e| e.superstructure.as_ref())
        .map(|pairs| edges_from_json(p, pairs))
        .transpose()?;
    let superstructure = restrict.clone().unwrap_or_else(|| EdgeSet::complete(p));
    let sets = ConstraintSets::new(superstructure, EdgeSet::new(p), EdgeSet::new(p))?;
    let lambda_values = config.lambda_grid.values(p, data.n())?;
    let time_limit = config.time_limit(p)?;

    let mut cells = Vec::new();
    for regime in config.variance_mode.regimes() {
        for &lambda_sq in &lambda_values {
            let problem = MipProblem::build(
                Arc::clone(&gm),
                lambda_sq,
                sets.clone(),
                MipOptions {
                    mode: regime,
                    ..MipOptions::default()
                },
            )?;
            let report = bnb::solve(
                &problem,
                &SolveOptions {
                    tau_early: Some(0.0),
                    time_limit: Some(time_limit),
                    workers: config.solver.workers,
                    ..SolveOptions::default()
                },
            )?;
            let oracle_result =
                oracle::exact_search(&gm, lambda_sq, regime, restrict.as_ref(), false)?;
            let delta = report.upper - oracle_result.best_score;
            let tol = 1e-6 * oracle_result.best_score.abs().max(1.0);
            let solver_dag = report.incumbent.support.to_dag()?;
            cells.push(CertifyCell {
                lambda_sq,
                regime,
                solver_objective: report.upper,
                oracle_objective: oracle_result.best_score,
                delta,
                oracle_margin: oracle_result.margin,
                edge_sets_match: solver_dag == oracle_result.best,
                pass: delta.abs() <= tol,
            });
        }
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok(CertifyReport { cells, pass })
}

/// SHD decomposition between two graph JSON documents.
pub fn metrics_from_json(estimated: &str, truth: &str) -> Result<ShdBreakdown> {
    let est = Dag::from_json_str(estimated)?;
    let tru = Dag::from_json_str(truth)?;
    crate::graph::shd_breakdown(&est, &tru)
}

/// Grid-table CSV with the fixed column order
/// `lambda_sq,regime,bic,objective,gap,edges,nodes,termination,shd,time_ms`
/// (`shd` is empty when no reference graph was attached).
pub fn emit_grid_csv(rows: &[GridRow]) -> String {
    let mut s =
        String::from("lambda_sq,regime,bic,objective,gap,edges,nodes,termination,shd,time_ms\n");
    for row in rows {
        let shd = row.shd.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{:?},{},{}\n",
            row.lambda_sq,
            row.regime,
            row.bic,
            row.objective,
            row.gap,
            row.edges,
            row.nodes_explored,
            row.termination,
            shd,
            row.time_ms
        ));
    }
    s
}

/// One aggregated trial batch for recovery curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub method: String,
    pub recovery_rate: f64,
    pub mean_shd: f64,
}

/// Trial-batch CSV with the fixed column order
/// `n,method,recovery_rate,shd`.
pub fn emit_trials_csv(rows: &[TrialRow]) -> String {
    let mut s = String::from("n,method,recovery_rate,shd\n");
    for row in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            row.n, row.method, row.recovery_rate, row.mean_shd
        ));
    }
    s
}
