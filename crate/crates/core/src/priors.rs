//! Search-space restrictions estimated from data: a super-structure via
//! group-lasso neighborhood selection, and partial-order / stable sets via
//! thresholded bootstrap selection proportions with cycle-avoiding
//! sequential addition. The greedy profile-score hill-climb doubles as the
//! baseline learner applied to bootstrap replicates.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{gram, BasisConfig, BasisSystem};
use crate::bnb::greedy_search;
use crate::error::{Error, Result};
use crate::graph::{Dag, EdgeSet};
use crate::mip::{ConstraintSets, MipOptions, MipProblem};
use crate::rng;
use crate::sem::Dataset;

const KKT_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 20_000;

/// Regularization choice for neighborhood selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegSpec {
    Fixed(f64),
    /// Increase the penalty along a geometric ladder until the selected
    /// super-structure has at most this many (undirected) pairs.
    Auto { target_pairs: usize },
}

/// Group-lasso outcome for one response node.
#[derive(Debug, Clone)]
pub struct NodeGroupLasso {
    pub node: usize,
    /// Active neighbor nodes (nonzero coefficient groups).
    pub neighbors: Vec<usize>,
    /// Group coefficient norms indexed by the other-node order.
    pub group_norms: Vec<f64>,
    /// Max gradient norm over inactive groups (KKT: must be <= reg + tol).
    pub kkt_inactive_max: f64,
    /// Max stationarity residual over active groups (KKT: must be <= tol).
    pub kkt_active_max: f64,
    pub sweeps: usize,
}

/// Result of neighborhood selection across all nodes.
#[derive(Debug, Clone)]
pub struct NeighborhoodResult {
    /// OR-rule symmetrized selection as bidirected pairs.
    pub edges: EdgeSet,
    pub reg: f64,
    pub per_node: Vec<NodeGroupLasso>,
}

/// Standardized design for one response node: centered unit-norm basis
/// columns grouped by source node.
struct NodeDesign {
    /// Group source nodes, aligned with `blocks`.
    sources: Vec<usize>,
    /// Per group: n x r column-major standardized values (dead columns
    /// dropped, so r may be smaller than the basis size).
    blocks: Vec<Vec<f64>>,
    widths: Vec<usize>,
    lipschitz: Vec<f64>,
    y: Vec<f64>,
    n: usize,
}

fn build_design(data: &Dataset, system: &BasisSystem, j: usize) -> Result<NodeDesign> {
    let n = data.n();
    let p = data.p();
    let r = system.r();
    // raw basis columns per node
    let mut vals = vec![0.0; r];
    let mut sources = Vec::new();
    let mut blocks = Vec::new();
    let mut widths = Vec::new();
    for k in 0..p {
        if k == j {
            continue;
        }
        let col = data.column(k);
        let mut block = vec![0.0; n * r];
        for (i, &x) in col.iter().enumerate() {
            system.evaluate_into(k, x, &mut vals)?;
            for (rr, &v) in vals.iter().enumerate() {
                block[rr * n + i] = v;
            }
        }
        // center and standardize to unit empirical norm, dropping
        // numerically constant columns
        let mut kept: Vec<f64> = Vec::new();
        let mut width = 0;
        for rr in 0..r {
            let slice = &mut block[rr * n..(rr + 1) * n];
            let mean = slice.iter().sum::<f64>() / n as f64;
            for v in slice.iter_mut() {
                *v -= mean;
            }
            let norm = (slice.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            if norm > 1e-10 {
                kept.extend(slice.iter().map(|v| v / norm));
                width += 1;
            }
        }
        if width == 0 {
            continue;
        }
        sources.push(k);
        widths.push(width);
        blocks.push(kept);
    }
    let y_raw = data.column(j);
    let y_mean = y_raw.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = y_raw.iter().map(|v| v - y_mean).collect();

    // block Lipschitz constants: largest eigenvalue of (Phi_k' Phi_k) / n
    let mut lipschitz = Vec::with_capacity(blocks.len());
    for (b, &w) in blocks.iter().zip(&widths) {
        let mut gram_block = nalgebra::DMatrix::zeros(w, w);
        for a in 0..w {
            for c in a..w {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += b[a * n + i] * b[c * n + i];
                }
                acc /= n as f64;
                gram_block[(a, c)] = acc;
                gram_block[(c, a)] = acc;
            }
        }
        let eig = gram_block.symmetric_eigenvalues();
        lipschitz.push(eig.iter().copied().fold(0.0f64, f64::max).max(1e-12));
    }
    Ok(NodeDesign {
        sources,
        blocks,
        widths,
        lipschitz,
        y,
        n,
    })
}

struct NodeFitState {
    coefs: Vec<Vec<f64>>,
    residual: Vec<f64>,
}

impl NodeFitState {
    fn fresh(design: &NodeDesign) -> Self {
        NodeFitState {
            coefs: design.widths.iter().map(|&w| vec![0.0; w]).collect(),
            residual: design.y.clone(),
        }
    }
}

/// Block coordinate descent with groupwise soft-thresholding, to KKT
/// stationarity `KKT_TOL`. Returns the per-group norms and KKT residuals.
fn group_lasso_fit(
    design: &NodeDesign,
    reg: f64,
    state: &mut NodeFitState,
) -> Result<(Vec<f64>, f64, f64, usize)> {
    let n = design.n;
    let groups = design.blocks.len();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for g in 0..groups {
            let w = design.widths[g];
            let block = &design.blocks[g];
            let l = design.lipschitz[g];
            // u = v + (1/(L n)) Phi' r
            let mut u = vec![0.0; w];
            for (a, slot) in u.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += block[a * n + i] * state.residual[i];
                }
                *slot = state.coefs[g][a] + acc / (l * n as f64);
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let shrink = if reg.is_infinite() || norm <= reg / l {
                0.0
            } else {
                1.0 - reg / (l * norm)
            };
            for (a, &ua) in u.iter().enumerate() {
                let new = ua * shrink;
                let delta = new - state.coefs[g][a];
                if delta != 0.0 {
                    for i in 0..n {
                        state.residual[i] -= delta * block[a * n + i];
                    }
                    state.coefs[g][a] = new;
                }
            }
        }

        // KKT residuals at the current point
        let mut inactive_max = 0.0f64;
        let mut active_max = 0.0f64;
        let mut worst = 0.0f64;
        for g in 0..groups {
            let w = design.widths[g];
            let block = &design.blocks[g];
            let mut grad = vec![0.0; w];
            for (a, slot) in grad.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += block[a * n + i] * state.residual[i];
                }
                *slot = acc / n as f64;
            }
            let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let vnorm = state.coefs[g].iter().map(|v| v * v).sum::<f64>().sqrt();
            if vnorm == 0.0 {
                inactive_max = inactive_max.max(gnorm);
                if reg.is_finite() {
                    worst = worst.max((gnorm - reg).max(0.0));
                }
            } else {
                let mut resid = 0.0;
                for (a, &ga) in grad.iter().enumerate() {
                    let d = ga - reg * state.coefs[g][a] / vnorm;
                    resid += d * d;
                }
                let resid = resid.sqrt();
                active_max = active_max.max(resid);
                worst = worst.max(resid);
            }
        }
        if worst <= KKT_TOL {
            let norms = state
                .coefs
                .iter()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            return Ok((norms, inactive_max, active_max, sweeps));
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Convergence(format!(
                "group lasso stalled with KKT residual {:.3e} after {} sweeps",
                worst, sweeps
            )));
        }
    }
}

/// Largest penalty with any active group, per node design.
fn reg_max(design: &NodeDesign) -> f64 {
    let n = design.n;
    let mut m = 0.0f64;
    for (g, block) in design.blocks.iter().enumerate() {
        let w = design.widths[g];
        let mut acc = 0.0;
        for a in 0..w {
            let mut dot = 0.0;
            for i in 0..n {
                dot += block[a * n + i] * design.y[i];
            }
            dot /= n as f64;
            acc += dot * dot;
        }
        m = m.max(acc.sqrt());
    }
    m
}

/// Group-lasso neighborhood selection: regress every node on the basis
/// groups of all other nodes and keep a pair whenever either direction's
/// group is active (OR rule). In auto mode the penalty increases along a
/// geometric ladder until the pair count reaches the target.
pub fn neighborhood_select(
    data: &Dataset,
    system: &BasisSystem,
    reg: RegSpec,
) -> Result<NeighborhoodResult> {
    let p = data.p();
    let designs: Vec<NodeDesign> = (0..p)
        .map(|j| build_design(data, system, j))
        .collect::<Result<_>>()?;

    let run_at = |reg_value: f64, states: &mut Vec<NodeFitState>| -> Result<NeighborhoodResult> {
        let mut per_node = Vec::with_capacity(p);
        let mut edges = EdgeSet::new(p);
        for (j, design) in designs.iter().enumerate() {
            let (norms, inactive_max, active_max, sweeps) =
                group_lasso_fit(design, reg_value, &mut states[j])?;
            let neighbors: Vec<usize> = design
                .sources
                .iter()
                .zip(&norms)
                .filter(|(_, &nv)| nv > 0.0)
                .map(|(&k, _)| k)
                .collect();
            for &k in &neighbors {
                edges.insert(k, j)?;
                edges.insert(j, k)?;
            }
            per_node.push(NodeGroupLasso {
                node: j,
                neighbors,
                group_norms: norms,
                kkt_inactive_max: inactive_max,
                kkt_active_max: active_max,
                sweeps,
            });
        }
        Ok(NeighborhoodResult {
            edges,
            reg: reg_value,
            per_node,
        })
    };

    let mut states: Vec<NodeFitState> = designs.iter().map(NodeFitState::fresh).collect();
    match reg {
        RegSpec::Fixed(v) => {
            if !(v >= 0.0) {
                return Err(Error::InvalidInput("reg must be nonnegative".into()));
            }
            run_at(v, &mut states)
        }
        RegSpec::Auto { target_pairs } => {
            let top = designs.iter().map(reg_max).fold(0.0f64, f64::max);
            if top == 0.0 {
                return run_at(0.0, &mut states);
            }
            // ascending ladder; warm starts carry over since solutions
            // shrink as the penalty grows
            let ladder: Vec<f64> = (0..=40).map(|i| top * 0.8f64.powi(40 - i)).collect();
            let mut last = None;
            for reg_value in ladder {
                let result = run_at(reg_value, &mut states)?;
                let pairs = result.edges.len() / 2;
                let done = pairs <= target_pairs;
                last = Some(result);
                if done {
                    break;
                }
            }
            Ok(last.expect("ladder is nonempty"))
        }
    }
}

/// Forward-backward hill-climb on the profile score over the full
/// candidate set; the stand-in baseline learner for bootstrap replicates.
/// `penalty` defaults to the BIC rate `log(n)/n`.
pub fn greedy_baseline(
    data: &Dataset,
    basis: &BasisConfig,
    penalty: Option<f64>,
) -> Result<Dag> {
    let system = BasisSystem::fit(basis, data)?;
    let gm = Arc::new(gram(&system, data)?);
    let lambda_sq = penalty.unwrap_or_else(|| (data.n() as f64).ln() / data.n() as f64);
    let problem = MipProblem::build(
        gm,
        lambda_sq,
        ConstraintSets::full(data.p()),
        MipOptions::default(),
    )?;
    greedy_search(&problem)?.to_dag()
}

/// A structure learner applicable to bootstrap replicates.
pub trait BootstrapLearner: Sync {
    fn fit(&self, data: &Dataset, seed: u64) -> Result<Dag>;
}

/// Default learner: the greedy baseline with a fresh basis per replicate.
#[derive(Debug, Clone)]
pub struct GreedyLearner {
    pub basis: BasisConfig,
    /// `None` applies the BIC rate of the replicate.
    pub penalty: Option<f64>,
}

impl BootstrapLearner for GreedyLearner {
    fn fit(&self, data: &Dataset, _seed: u64) -> Result<Dag> {
        greedy_baseline(data, &self.basis, self.penalty)
    }
}

impl<F> BootstrapLearner for F
where
    F: Fn(&Dataset, u64) -> Result<Dag> + Sync,
{
    fn fit(&self, data: &Dataset, seed: u64) -> Result<Dag> {
        self(data, seed)
    }
}

/// Edge selection proportions across bootstrap replicates.
#[derive(Debug, Clone)]
pub struct BootstrapReport {
    pub p: usize,
    pub b: usize,
    /// Row-major p x p matrix; entry (k, j) is the fraction of successful
    /// replicates whose fitted graph contains k -> j.
    pub proportions: Vec<f64>,
    pub replicate_seeds: Vec<u64>,
    pub failures: usize,
}

impl BootstrapReport {
    pub fn proportion(&self, from: usize, to: usize) -> f64 {
        self.proportions[from * self.p + to]
    }

    /// Matrix CSV with a header row of column names.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let names: Vec<String> = (1..=self.p).map(|j| format!("X{}", j)).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for k in 0..self.p {
            for j in 0..self.p {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{}", self.proportion(k, j)));
            }
            s.push('\n');
        }
        s
    }
}

/// Resample the rows with replacement `b` times, fit the learner on each
/// replicate (in parallel, with per-replicate derived seeds), and report
/// per-edge selection proportions. Replicate failures are skipped unless
/// they exceed 20% of `b`.
pub fn bootstrap_proportions<L: BootstrapLearner>(
    data: &Dataset,
    b: usize,
    learner: &L,
    seed: u64,
) -> Result<BootstrapReport> {
    if b == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let p = data.p();
    let n = data.n();
    let replicate_seeds: Vec<u64> = (0..b).map(|i| rng::derive(seed, "bootstrap", i as u64)).collect();
    let fits: Vec<Option<Dag>> = replicate_seeds
        .par_iter()
        .map(|&rep_seed| {
            use rand::Rng;
            let mut r = rng::stream(rep_seed, "rows", 0);
            let indices: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let replicate = data.resample(&indices);
            learner.fit(&replicate, rep_seed).ok()
        })
        .collect();

    let failures = fits.iter().filter(|f| f.is_none()).count();
    if failures * 5 > b {
        return Err(Error::Convergence(format!(
            "{} of {} bootstrap replicates failed",
            failures, b
        )));
    }
    let successes = b - failures;
    let mut counts = vec![0usize; p * p];
    for dag in fits.into_iter().flatten() {
        for (k, j) in dag.edges() {
            counts[k * p + j] += 1;
        }
    }
    let proportions = counts
        .into_iter()
        .map(|c| c as f64 / successes as f64)
        .collect();
    Ok(BootstrapReport {
        p,
        b,
        proportions,
        replicate_seeds,
        failures,
    })
}

/// Threshold the selection proportions into nested constraint sets.
///
/// The super-structure keeps every edge at or above `tau_super` (plus the
/// optional neighborhood-selection union); the partial-order set adds
/// edges at or above `tau_partial` sequentially in decreasing proportion
/// (lexicographic tie-break), omitting any edge that would close a cycle;
/// the stable set is the subset of accepted partial-order edges at or
/// above `tau_stable`. Nesting holds by construction.
pub fn build_sets(
    report: &BootstrapReport,
    tau_super: f64,
    tau_partial: f64,
    tau_stable: f64,
    extra_superstructure: Option<&EdgeSet>,
) -> Result<ConstraintSets> {
    if !(0.0 <= tau_super && tau_super <= tau_partial && tau_partial <= tau_stable) {
        return Err(Error::InvalidInput(
            "thresholds must satisfy 0 <= tau_super <= tau_partial <= tau_stable".into(),
        ));
    }
    let p = report.p;
    let mut superstructure = EdgeSet::new(p);
    for k in 0..p {
        for j in 0..p {
            if k != j && report.proportion(k, j) >= tau_super {
                superstructure.insert(k, j)?;
            }
        }
    }
    if let Some(extra) = extra_superstructure {
        superstructure = superstructure.union(extra);
    }

    // sequential cycle-avoiding addition in decreasing proportion
    let mut candidates: Vec<(usize, usize)> = superstructure
        .iter()
        .filter(|&(k, j)| report.proportion(k, j) >= tau_partial)
        .collect();
    candidates.sort_by(|&a, &b| {
        report
            .proportion(b.0, b.1)
            .partial_cmp(&report.proportion(a.0, a.1))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut partial = EdgeSet::new(p);
    for (k, j) in candidates {
        let mut trial = partial.clone();
        trial.insert(k, j)?;
        if trial.is_acyclic() {
            partial = trial;
        }
    }

    let mut stable = EdgeSet::new(p);
    for (k, j) in partial.iter() {
        if report.proportion(k, j) >= tau_stable {
            stable.insert(k, j)?;
        }
    }
    ConstraintSets::new(superstructure, partial, stable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::{sample, EdgeFunction, EdgeSpec, SemSpec};

    fn chain_data(n: usize, seed: u64) -> Dataset {
        let spec = SemSpec::new(
            3,
            vec![
                EdgeSpec::new(0, 1, EdgeFunction::CosMix),
                EdgeSpec::new(1, 2, EdgeFunction::CosMix),
            ],
            vec![0.8, 0.25, 0.25],
            seed,
        )
        .unwrap();
        sample(&spec, n, seed).unwrap()
    }

    #[test]
    fn infinite_reg_selects_nothing() {
        let data = chain_data(200, 1);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let result = neighborhood_select(&data, &system, RegSpec::Fixed(f64::INFINITY)).unwrap();
        assert!(result.edges.is_empty());
    }

    #[test]
    fn zero_reg_selects_everything() {
        let data = chain_data(300, 2);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let result = neighborhood_select(&data, &system, RegSpec::Fixed(0.0)).unwrap();
        // unpenalized least squares leaves every group active
        for node in &result.per_node {
            assert_eq!(node.neighbors.len(), 2, "node {:?}", node);
        }
        assert_eq!(result.edges.len(), 6);
    }

    #[test]
    fn chain_neighborhoods_recovered_at_moderate_reg() {
        let data = chain_data(600, 3);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let result = neighborhood_select(&data, &system, RegSpec::Fixed(0.02)).unwrap();
        assert!(result.edges.contains(0, 1) && result.edges.contains(1, 0));
        assert!(result.edges.contains(1, 2) && result.edges.contains(2, 1));

        // least-squares cross-check: for node 1 the selected neighbor set
        // must fit at least as well as any unselected single neighbor
        let g = gram(&system, &data).unwrap();
        let with_0 = crate::score::node_least_squares(&g, 1, &[0]).unwrap().omega;
        let with_2 = crate::score::node_least_squares(&g, 1, &[2]).unwrap().omega;
        let base = crate::score::node_least_squares(&g, 1, &[]).unwrap().omega;
        assert!(with_0 < base && with_2 < base);
    }

    #[test]
    fn kkt_conditions_hold_at_convergence() {
        let data = chain_data(250, 4);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        for reg in [0.005, 0.05, 0.3] {
            let result = neighborhood_select(&data, &system, RegSpec::Fixed(reg)).unwrap();
            for node in &result.per_node {
                assert!(
                    node.kkt_inactive_max <= reg + KKT_TOL,
                    "inactive gradient {} exceeds reg {}",
                    node.kkt_inactive_max,
                    reg
                );
                assert!(
                    node.kkt_active_max <= KKT_TOL,
                    "active residual {}",
                    node.kkt_active_max
                );
            }
        }
    }

    #[test]
    fn auto_mode_hits_target_size() {
        let data = chain_data(400, 5);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let result = neighborhood_select(&data, &system, RegSpec::Auto { target_pairs: 2 }).unwrap();
        assert!(result.edges.len() / 2 <= 2);
        assert!(result.reg > 0.0);
    }

    #[test]
    fn bootstrap_single_replicate_is_binary() {
        let data = chain_data(150, 6);
        let learner = GreedyLearner {
            basis: BasisConfig::spline(2, 1),
            penalty: None,
        };
        let report = bootstrap_proportions(&data, 1, &learner, 9).unwrap();
        assert!(report
            .proportions
            .iter()
            .all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(report.replicate_seeds.len(), 1);
    }

    #[test]
    fn strong_edge_has_high_selection_proportion() {
        let spec = SemSpec::new(
            2,
            vec![EdgeSpec::new(0, 1, EdgeFunction::CosMix)],
            vec![1.0, 0.25],
            7,
        )
        .unwrap();
        let data = sample(&spec, 400, 7).unwrap();
        let learner = GreedyLearner {
            basis: BasisConfig::spline(2, 1),
            penalty: None,
        };
        let report = bootstrap_proportions(&data, 20, &learner, 11).unwrap();
        assert!(
            report.proportion(0, 1) > 0.8,
            "proportion {}",
            report.proportion(0, 1)
        );
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn bootstrap_determinism() {
        let data = chain_data(120, 8);
        let learner = GreedyLearner {
            basis: BasisConfig::spline(2, 1),
            penalty: None,
        };
        let a = bootstrap_proportions(&data, 8, &learner, 5).unwrap();
        let b = bootstrap_proportions(&data, 8, &learner, 5).unwrap();
        assert_eq!(a.proportions, b.proportions);
    }

    fn report_from(p: usize, entries: &[(usize, usize, f64)]) -> BootstrapReport {
        let mut proportions = vec![0.0; p * p];
        for &(k, j, v) in entries {
            proportions[k * p + j] = v;
        }
        BootstrapReport {
            p,
            b: 100,
            proportions,
            replicate_seeds: vec![],
            failures: 0,
        }
    }

    #[test]
    fn thresholds_above_one_disable_sets() {
        let report = report_from(3, &[(0, 1, 0.9), (1, 2, 0.7)]);
        let sets = build_sets(&report, 0.5, 1.1, 1.1, None).unwrap();
        assert!(sets.partial_order.is_empty());
        assert!(sets.stable.is_empty());
        assert_eq!(sets.superstructure.len(), 2);
    }

    #[test]
    fn sequential_rule_drops_cycle_closing_edge() {
        let report = report_from(2, &[(0, 1, 0.9), (1, 0, 0.85)]);
        let sets = build_sets(&report, 0.5, 0.8, 1.0, None).unwrap();
        assert!(sets.partial_order.contains(0, 1));
        assert!(!sets.partial_order.contains(1, 0));
        assert!(sets.superstructure.contains(1, 0));
    }

    #[test]
    fn nesting_and_monotonicity() {
        let report = report_from(
            3,
            &[(0, 1, 0.97), (1, 2, 0.96), (2, 0, 0.5), (0, 2, 1.0)],
        );
        let sets = build_sets(&report, 0.3, 0.95, 1.0, None).unwrap();
        assert!(sets.stable.is_subset_of(&sets.partial_order));
        assert!(sets.partial_order.is_subset_of(&sets.superstructure));
        assert!(sets.partial_order.is_acyclic());
        assert!(sets.stable.contains(0, 2));
        assert!(sets.partial_order.contains(0, 1));

        // raising a threshold never enlarges its set
        let tighter = build_sets(&report, 0.3, 0.97, 1.0, None).unwrap();
        assert!(tighter.partial_order.is_subset_of(&sets.partial_order));
        let looser_stable = build_sets(&report, 0.3, 0.95, 0.96, None).unwrap();
        assert!(sets.stable.is_subset_of(&looser_stable.stable));
    }

    #[test]
    fn threshold_ordering_violation_rejected() {
        let report = report_from(2, &[(0, 1, 0.9)]);
        assert!(build_sets(&report, 0.9, 0.5, 1.0, None).is_err());
    }

    #[test]
    fn neighborhood_union_enters_superstructure() {
        let report = report_from(2, &[(0, 1, 0.9)]);
        let mut extra = EdgeSet::new(2);
        extra.insert(1, 0).unwrap();
        let sets = build_sets(&report, 0.8, 0.95, 1.0, Some(&extra)).unwrap();
        assert!(sets.superstructure.contains(0, 1));
        assert!(sets.superstructure.contains(1, 0));
    }
}
