//! Mixed-integer problem assembly.
//!
//! The problem minimizes the Gram-form objective over the scaled
//! coefficient matrix, binary edge indicators `g_kj`, and layer values
//! `psi in [1, p]^p`, subject to:
//!
//! - big-M bounds `-M g_kj <= Gamma_{j, col(r,k)} <= M g_kj` per candidate
//!   edge and basis index;
//! - the aggregate intercept bound `|Gamma_{j,const}| <= M sum_k g_kj`;
//! - `eps_diag <= Gamma_jj <= M` (the strict positivity of the diagonal is
//!   realized with a small floor since the log objective diverges at 0);
//! - layered-network acyclicity `1 - p + p g_kj <= psi_j - psi_k`;
//! - optional edge budget `sum g <= max_edges`;
//! - injected constraint sets: candidates restricted to the
//!   super-structure, `psi_k + 1 <= psi_j` for partial-order edges, and
//!   `g = 1` fixed on the stable set.
//!
//! The equal-variance variant drops the log terms and pins the identity
//! block of the coefficient matrix.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::GramMatrix;
use crate::error::{Error, Result};
use crate::graph::{is_acyclic, EdgeSet};
use crate::score::{node_least_squares, Support};

/// Diagonal floor standing in for the strict inequality `Gamma_jj > 0`.
pub const EPS_DIAG: f64 = 1e-6;

/// Which noise-variance regime the objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    Unequal,
    Equal,
}

impl std::fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarianceMode::Unequal => write!(f, "unequal"),
            VarianceMode::Equal => write!(f, "equal"),
        }
    }
}

/// The three nested search-space restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSets {
    /// Candidate edges (may contain two-cycles).
    pub superstructure: EdgeSet,
    /// Edges whose order is predetermined: `psi_k < psi_j`.
    pub partial_order: EdgeSet,
    /// Edges fixed to be present.
    pub stable: EdgeSet,
}

impl ConstraintSets {
    /// No restriction: every ordered pair is a candidate.
    pub fn full(p: usize) -> Self {
        ConstraintSets {
            superstructure: EdgeSet::complete(p),
            partial_order: EdgeSet::new(p),
            stable: EdgeSet::new(p),
        }
    }

    pub fn new(superstructure: EdgeSet, partial_order: EdgeSet, stable: EdgeSet) -> Result<Self> {
        let sets = ConstraintSets {
            superstructure,
            partial_order,
            stable,
        };
        sets.validate()?;
        Ok(sets)
    }

    pub fn validate(&self) -> Result<()> {
        if self.partial_order.p() != self.superstructure.p()
            || self.stable.p() != self.superstructure.p()
        {
            return Err(Error::Mip("constraint sets disagree on p".into()));
        }
        if !self.stable.is_subset_of(&self.partial_order)
            || !self.partial_order.is_subset_of(&self.superstructure)
        {
            return Err(Error::Mip(
                "nesting violated: need stable within partial_order within superstructure".into(),
            ));
        }
        if !self.partial_order.is_acyclic() {
            return Err(Error::Mip("partial-order set contains a cycle".into()));
        }
        Ok(())
    }
}

/// Options controlling problem construction.
#[derive(Debug, Clone)]
pub struct MipOptions {
    pub mode: VarianceMode,
    /// Optional cardinality budget on the edge count.
    pub max_edges: Option<usize>,
    /// Explicit big-M; estimated from a pilot fit when absent.
    pub big_m: Option<f64>,
    pub eps_diag: f64,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            mode: VarianceMode::Unequal,
            max_edges: None,
            big_m: None,
            eps_diag: EPS_DIAG,
        }
    }
}

/// A fully assembled problem instance, immutable and shareable across
/// solver workers.
#[derive(Debug, Clone)]
pub struct MipProblem {
    gram: Arc<GramMatrix>,
    lambda_sq: f64,
    mode: VarianceMode,
    big_m: f64,
    eps_diag: f64,
    /// Candidate edges in lexicographic order (the super-structure).
    candidates: Vec<(usize, usize)>,
    /// Positions of candidates fixed to one (the stable set).
    forced: Vec<usize>,
    /// Partial-order edges (`psi_k < psi_j`).
    order: Vec<(usize, usize)>,
    max_edges: Option<usize>,
    sets: ConstraintSets,
}

impl MipProblem {
    /// Assemble a problem from its Gram matrix, penalty, restriction sets,
    /// and options.
    pub fn build(
        gram: Arc<GramMatrix>,
        lambda_sq: f64,
        sets: ConstraintSets,
        options: MipOptions,
    ) -> Result<Self> {
        if !(lambda_sq >= 0.0) {
            return Err(Error::Mip("lambda^2 must be nonnegative".into()));
        }
        if sets.superstructure.p() != gram.p() {
            return Err(Error::Mip("constraint sets and gram disagree on p".into()));
        }
        sets.validate()?;
        let candidates: Vec<(usize, usize)> = sets.superstructure.iter().collect();
        let forced = sets
            .stable
            .iter()
            .map(|e| {
                candidates
                    .binary_search(&e)
                    .map_err(|_| Error::Mip("stable edge outside super-structure".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let order: Vec<(usize, usize)> = sets.partial_order.iter().collect();
        let big_m = match options.big_m {
            Some(m) if m > 0.0 => m,
            Some(m) => return Err(Error::Mip(format!("big-M must be positive, got {}", m))),
            None => estimate_big_m(&gram, &candidates, options.mode)?,
        };
        Ok(MipProblem {
            gram,
            lambda_sq,
            mode: options.mode,
            big_m,
            eps_diag: options.eps_diag,
            candidates,
            forced,
            order,
            max_edges: options.max_edges,
            sets,
        })
    }

    pub fn p(&self) -> usize {
        self.gram.p()
    }

    pub fn r(&self) -> usize {
        self.gram.r()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn gram_arc(&self) -> Arc<GramMatrix> {
        Arc::clone(&self.gram)
    }

    pub fn lambda_sq(&self) -> f64 {
        self.lambda_sq
    }

    pub fn mode(&self) -> VarianceMode {
        self.mode
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn eps_diag(&self) -> f64 {
        self.eps_diag
    }

    pub fn candidates(&self) -> &[(usize, usize)] {
        &self.candidates
    }

    pub fn forced(&self) -> &[usize] {
        &self.forced
    }

    pub fn order(&self) -> &[(usize, usize)] {
        &self.order
    }

    pub fn max_edges(&self) -> Option<usize> {
        self.max_edges
    }

    pub fn sets(&self) -> &ConstraintSets {
        &self.sets
    }

    /// Position of a candidate edge, if it is one.
    pub fn candidate_index(&self, from: usize, to: usize) -> Option<usize> {
        self.candidates.binary_search(&(from, to)).ok()
    }

    /// Candidate positions entering node `j`.
    pub fn incoming(&self, j: usize) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&i| self.candidates[i].1 == j)
            .collect()
    }

    /// Rebuild with a different big-M (bound sensitivity checks).
    pub fn with_big_m(&self, big_m: f64) -> Result<Self> {
        if !(big_m > 0.0) {
            return Err(Error::Mip("big-M must be positive".into()));
        }
        let mut out = self.clone();
        out.big_m = big_m;
        Ok(out)
    }

    /// Rebuild with a different penalty on the same Gram and sets.
    pub fn with_lambda_sq(&self, lambda_sq: f64) -> Result<Self> {
        if !(lambda_sq >= 0.0) {
            return Err(Error::Mip("lambda^2 must be nonnegative".into()));
        }
        let mut out = self.clone();
        out.lambda_sq = lambda_sq;
        Ok(out)
    }

    /// Restrict candidates to a (new) super-structure. Variables outside
    /// it are eliminated rather than bounded.
    pub fn apply_superstructure(&self, e_super: &EdgeSet) -> Result<Self> {
        let mut superstructure = EdgeSet::new(self.p());
        for (k, j) in self.sets.superstructure.iter() {
            if e_super.contains(k, j) {
                superstructure.insert(k, j)?;
            }
        }
        let sets = ConstraintSets::new(
            superstructure,
            self.sets.partial_order.clone(),
            self.sets.stable.clone(),
        )?;
        MipProblem::build(
            Arc::clone(&self.gram),
            self.lambda_sq,
            sets,
            MipOptions {
                mode: self.mode,
                max_edges: self.max_edges,
                big_m: Some(self.big_m),
                eps_diag: self.eps_diag,
            },
        )
    }

    /// Impose `psi_k < psi_j` for every listed edge; edge presence stays
    /// free.
    pub fn apply_partial_order(&self, e_p: &EdgeSet) -> Result<Self> {
        let sets = ConstraintSets::new(
            self.sets.superstructure.clone(),
            e_p.clone(),
            self.sets.stable.clone(),
        )?;
        MipProblem::build(
            Arc::clone(&self.gram),
            self.lambda_sq,
            sets,
            MipOptions {
                mode: self.mode,
                max_edges: self.max_edges,
                big_m: Some(self.big_m),
                eps_diag: self.eps_diag,
            },
        )
    }

    /// Fix `g = 1` on the listed edges, eliminating their binaries.
    pub fn apply_stable_set(&self, e_s: &EdgeSet) -> Result<Self> {
        let sets = ConstraintSets::new(
            self.sets.superstructure.clone(),
            self.sets.partial_order.clone(),
            e_s.clone(),
        )?;
        MipProblem::build(
            Arc::clone(&self.gram),
            self.lambda_sq,
            sets,
            MipOptions {
                mode: self.mode,
                max_edges: self.max_edges,
                big_m: Some(self.big_m),
                eps_diag: self.eps_diag,
            },
        )
    }

    /// Whether an integral assignment satisfies every constraint of the
    /// program: support inside the candidates, forced edges present, the
    /// edge budget, and existence of a layer assignment (equivalently,
    /// acyclicity of the support together with the partial-order edges).
    pub fn integral_feasible(&self, support: &Support) -> bool {
        if support.p() != self.p() {
            return false;
        }
        for (k, j) in support.edges() {
            if self.candidate_index(k, j).is_none() {
                return false;
            }
        }
        for &f in &self.forced {
            let (k, j) = self.candidates[f];
            if !support.has(k, j) {
                return false;
            }
        }
        if let Some(s_max) = self.max_edges {
            if support.edge_count() > s_max {
                return false;
            }
        }
        self.layer_assignment(support).is_some()
    }

    /// A layer assignment `psi in [1, p]^p` consistent with the support and
    /// the partial-order edges, or `None` if their union is cyclic.
    pub fn layer_assignment(&self, support: &Support) -> Option<Vec<f64>> {
        let p = self.p();
        let mut adj = support.matrix().to_vec();
        for &(k, j) in &self.order {
            adj[k * p + j] = true;
        }
        if !is_acyclic(p, &adj).ok()? {
            return None;
        }
        // longest-path depth gives integer-spaced layers within [1, p]
        let order = crate::graph::topological_order(p, &adj).ok()?;
        let mut depth = vec![0usize; p];
        for &k in &order {
            for j in 0..p {
                if adj[k * p + j] {
                    depth[j] = depth[j].max(depth[k] + 1);
                }
            }
        }
        Some(depth.iter().map(|&d| (d + 1) as f64).collect())
    }

    /// Human-readable constraint listing for inspection.
    pub fn debug_dump(&self) -> String {
        let p = self.p();
        let r = self.r();
        let mut s = String::new();
        s.push_str(&format!(
            "mode = {}, p = {}, R = {}, lambda^2 = {}, M = {}, eps_diag = {}\n",
            self.mode, p, r, self.lambda_sq, self.big_m, self.eps_diag
        ));
        s.push_str(&format!(
            "candidates = {}, forced = {}, order constraints = {}\n",
            self.candidates.len(),
            self.forced.len(),
            self.order.len()
        ));
        if let Some(m) = self.max_edges {
            s.push_str(&format!("sum g <= {}\n", m));
        }
        for (i, &(k, j)) in self.candidates.iter().enumerate() {
            let fixed = if self.forced.contains(&i) { " [g = 1]" } else { "" };
            s.push_str(&format!(
                "edge {} -> {}{}: -M g <= Gamma[{}, col(r, {})] <= M g (r = 1..{}); {} + {} g <= psi_{} - psi_{}\n",
                k + 1,
                j + 1,
                fixed,
                j + 1,
                k + 1,
                r,
                1i64 - p as i64,
                p,
                j + 1,
                k + 1,
            ));
        }
        for j in 0..p {
            match self.mode {
                VarianceMode::Unequal => s.push_str(&format!(
                    "node {}: {} <= Gamma_jj <= M; |Gamma[j, const]| <= M sum(g incoming)\n",
                    j + 1,
                    self.eps_diag
                )),
                VarianceMode::Equal => s.push_str(&format!(
                    "node {}: B_jj = 1; |B[j, const]| <= M sum(g incoming)\n",
                    j + 1
                )),
            }
        }
        for &(k, j) in &self.order {
            s.push_str(&format!("order: psi_{} + 1 <= psi_{}\n", k + 1, j + 1));
        }
        s
    }

    /// Machine-readable variable map `{index -> (type, meaning)}` in the
    /// canonical joint ordering: coefficient entries per candidate edge and
    /// basis index, intercepts, diagonals (unequal mode), indicators, then
    /// layer values.
    pub fn variable_map_json(&self) -> serde_json::Value {
        let mut vars: Vec<serde_json::Value> = Vec::new();
        let mut idx = 0usize;
        let mut push = |vars: &mut Vec<serde_json::Value>, kind: &str, meaning: String| {
            vars.push(serde_json::json!({
                "index": idx,
                "type": kind,
                "meaning": meaning,
            }));
            idx += 1;
        };
        for &(k, j) in &self.candidates {
            for r in 1..=self.r() {
                push(
                    &mut vars,
                    "continuous",
                    format!("coefficient: basis {} of edge {} -> {}", r, k + 1, j + 1),
                );
            }
        }
        for j in 0..self.p() {
            push(&mut vars, "continuous", format!("intercept of node {}", j + 1));
        }
        if self.mode == VarianceMode::Unequal {
            for j in 0..self.p() {
                push(
                    &mut vars,
                    "continuous",
                    format!("inverse noise scale of node {}", j + 1),
                );
            }
        }
        for (i, &(k, j)) in self.candidates.iter().enumerate() {
            let kind = if self.forced.contains(&i) {
                "binary (fixed 1)"
            } else {
                "binary"
            };
            push(&mut vars, kind, format!("edge indicator {} -> {}", k + 1, j + 1));
        }
        for j in 0..self.p() {
            push(&mut vars, "continuous", format!("layer value of node {}", j + 1));
        }
        serde_json::Value::Array(vars)
    }
}

/// Pilot big-M: fit every node on its full candidate parent set with all
/// indicators at one and no acyclicity, then take twice the largest entry
/// of the fitted coefficient matrix, floored at 1.
pub fn estimate_big_m(
    gram: &GramMatrix,
    candidates: &[(usize, usize)],
    mode: VarianceMode,
) -> Result<f64> {
    let p = gram.p();
    let mut max_abs = 0.0f64;
    for j in 0..p {
        let parents: Vec<usize> = candidates
            .iter()
            .filter(|&&(_, to)| to == j)
            .map(|&(k, _)| k)
            .collect();
        let ls = node_least_squares(gram, j, &parents)?;
        let scale = match mode {
            // Gamma row is (1, coefs) / sqrt(omega)
            VarianceMode::Unequal => 1.0 / ls.omega.sqrt(),
            // B row keeps the raw coefficients with a unit diagonal
            VarianceMode::Equal => 1.0,
        };
        max_abs = max_abs.max(scale); // the diagonal entry itself
        for c in &ls.coefs {
            max_abs = max_abs.max((c * scale).abs());
        }
    }
    Ok((2.0 * max_abs).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gram, BasisConfig, BasisSystem};
    use crate::sem::{sample, SemSpec};

    fn toy_gram(p: usize, n: usize, seed: u64) -> Arc<GramMatrix> {
        let spec = SemSpec::new(p, vec![], vec![1.0; p], seed).unwrap();
        let data = sample(&spec, n, seed).unwrap();
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        Arc::new(gram(&system, &data).unwrap())
    }

    fn support(p: usize, edges: &[(usize, usize)]) -> Support {
        let mut s = Support::empty(p);
        for &(k, j) in edges {
            s.set(k, j, true);
        }
        s
    }

    #[test]
    fn two_node_full_problem() {
        let g = toy_gram(2, 100, 1);
        let problem =
            MipProblem::build(g, 0.1, ConstraintSets::full(2), MipOptions::default()).unwrap();
        assert_eq!(problem.candidates().len(), 2);
        // mutual exclusion of two-cycles via the layer constraints
        assert!(problem.integral_feasible(&support(2, &[(0, 1)])));
        assert!(problem.integral_feasible(&support(2, &[(1, 0)])));
        assert!(!problem.integral_feasible(&support(2, &[(0, 1), (1, 0)])));
        let dump = problem.debug_dump();
        assert!(dump.contains("edge 1 -> 2"));
        assert!(dump.contains("psi"));
    }

    #[test]
    fn forced_edge_excludes_reverse() {
        let g = toy_gram(2, 100, 2);
        let mut stable = EdgeSet::new(2);
        stable.insert(0, 1).unwrap();
        let mut partial = EdgeSet::new(2);
        partial.insert(0, 1).unwrap();
        let sets = ConstraintSets::new(EdgeSet::complete(2), partial, stable).unwrap();
        let problem = MipProblem::build(g, 0.1, sets, MipOptions::default()).unwrap();
        assert_eq!(problem.forced().len(), 1);
        assert!(!problem.integral_feasible(&support(2, &[(1, 0), (0, 1)])));
        assert!(!problem.integral_feasible(&support(2, &[]))); // forced edge missing
        assert!(problem.integral_feasible(&support(2, &[(0, 1)])));
    }

    #[test]
    fn edge_budget_zero_forces_empty_graph() {
        let g = toy_gram(3, 80, 3);
        let problem = MipProblem::build(
            g,
            0.0,
            ConstraintSets::full(3),
            MipOptions {
                max_edges: Some(0),
                ..MipOptions::default()
            },
        )
        .unwrap();
        assert!(problem.integral_feasible(&support(3, &[])));
        assert!(!problem.integral_feasible(&support(3, &[(0, 1)])));
    }

    #[test]
    fn empty_superstructure_eliminates_all_binaries() {
        let g = toy_gram(3, 80, 4);
        let sets = ConstraintSets::new(EdgeSet::new(3), EdgeSet::new(3), EdgeSet::new(3)).unwrap();
        let problem = MipProblem::build(g, 0.1, sets, MipOptions::default()).unwrap();
        assert_eq!(problem.candidates().len(), 0);
        assert!(problem.integral_feasible(&support(3, &[])));
        assert!(!problem.integral_feasible(&support(3, &[(0, 1)])));
    }

    #[test]
    fn partial_order_blocks_reverse_paths() {
        let g = toy_gram(3, 80, 5);
        let mut partial = EdgeSet::new(3);
        partial.insert(0, 1).unwrap();
        let sets = ConstraintSets::new(EdgeSet::complete(3), partial, EdgeSet::new(3)).unwrap();
        let problem = MipProblem::build(g, 0.1, sets, MipOptions::default()).unwrap();
        // any path 2 ~> 1 is infeasible
        assert!(!problem.integral_feasible(&support(3, &[(1, 0)])));
        assert!(!problem.integral_feasible(&support(3, &[(1, 2), (2, 0)])));
        // the constrained direction remains free
        assert!(problem.integral_feasible(&support(3, &[])));
        assert!(problem.integral_feasible(&support(3, &[(0, 1)])));
    }

    #[test]
    fn partial_order_chain_fits_in_layers() {
        let g = toy_gram(3, 80, 6);
        let mut partial = EdgeSet::new(3);
        partial.insert(0, 1).unwrap();
        partial.insert(1, 2).unwrap();
        let sets = ConstraintSets::new(EdgeSet::complete(3), partial, EdgeSet::new(3)).unwrap();
        let problem = MipProblem::build(g, 0.1, sets, MipOptions::default()).unwrap();
        let psi = problem.layer_assignment(&support(3, &[])).unwrap();
        assert!(psi[2] >= psi[0] + 2.0 - 1e-12);
        assert!(psi.iter().all(|&v| (1.0..=3.0).contains(&v)));
    }

    #[test]
    fn cyclic_partial_order_rejected() {
        let mut partial = EdgeSet::new(2);
        partial.insert(0, 1).unwrap();
        partial.insert(1, 0).unwrap();
        assert!(ConstraintSets::new(EdgeSet::complete(2), partial, EdgeSet::new(2)).is_err());
    }

    #[test]
    fn nesting_violations_rejected() {
        // stable outside partial order
        let mut stable = EdgeSet::new(2);
        stable.insert(0, 1).unwrap();
        assert!(ConstraintSets::new(EdgeSet::complete(2), EdgeSet::new(2), stable).is_err());
        // partial order outside superstructure
        let mut partial = EdgeSet::new(2);
        partial.insert(0, 1).unwrap();
        assert!(ConstraintSets::new(EdgeSet::new(2), partial, EdgeSet::new(2)).is_err());
    }

    #[test]
    fn spanning_stable_set_leaves_no_binaries() {
        let g = toy_gram(3, 80, 7);
        let mut chain = EdgeSet::new(3);
        chain.insert(0, 1).unwrap();
        chain.insert(1, 2).unwrap();
        let sets = ConstraintSets::new(chain.clone(), chain.clone(), chain.clone()).unwrap();
        let problem = MipProblem::build(g, 0.1, sets, MipOptions::default()).unwrap();
        assert_eq!(problem.candidates().len(), problem.forced().len());
    }

    #[test]
    fn big_m_doubles_pilot_maximum() {
        let g = toy_gram(2, 200, 8);
        let candidates: Vec<(usize, usize)> = EdgeSet::complete(2).iter().collect();
        let m = estimate_big_m(&g, &candidates, VarianceMode::Unequal).unwrap();
        // recompute the pilot maximum directly
        let mut pilot_max = 0.0f64;
        for j in 0..2 {
            let parents: Vec<usize> = (0..2).filter(|&k| k != j).collect();
            let ls = node_least_squares(&g, j, &parents).unwrap();
            let scale = 1.0 / ls.omega.sqrt();
            pilot_max = pilot_max.max(scale);
            for c in &ls.coefs {
                pilot_max = pilot_max.max((c * scale).abs());
            }
        }
        assert!((m - (2.0 * pilot_max).max(1.0)).abs() < 1e-12);
    }

    #[test]
    fn big_m_floor_applies() {
        // inflate the variance so the pilot diagonal drops below 1/2
        let spec = SemSpec::new(1, vec![], vec![4.0], 9).unwrap();
        let data = sample(&spec, 400, 9).unwrap();
        let system = BasisSystem::fit(&BasisConfig::spline(1, 1), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let m = estimate_big_m(&g, &[], VarianceMode::Unequal).unwrap();
        assert_eq!(m, 1.0);
    }

    #[test]
    fn apply_superstructure_restricts_candidates() {
        let g = toy_gram(3, 80, 10);
        let problem =
            MipProblem::build(g, 0.1, ConstraintSets::full(3), MipOptions::default()).unwrap();
        let mut e = EdgeSet::new(3);
        e.insert(0, 1).unwrap();
        e.insert(1, 0).unwrap();
        let restricted = problem.apply_superstructure(&e).unwrap();
        assert_eq!(restricted.candidates().len(), 2);
        assert!(restricted.candidate_index(1, 2).is_none());
    }

    #[test]
    fn integral_feasibility_matches_acyclicity_on_random_patterns() {
        use rand::Rng;
        let g = toy_gram(4, 80, 11);
        let problem =
            MipProblem::build(g, 0.0, ConstraintSets::full(4), MipOptions::default()).unwrap();
        let mut rng = crate::rng::stream(12, "feas", 0);
        for _ in 0..200 {
            let mut s = Support::empty(4);
            for k in 0..4 {
                for j in 0..4 {
                    if k != j && rng.random_bool(0.3) {
                        s.set(k, j, true);
                    }
                }
            }
            let feasible = problem.integral_feasible(&s);
            let acyclic = is_acyclic(4, s.matrix()).unwrap();
            assert_eq!(feasible, acyclic);
            if feasible {
                // the layer assignment respects every edge
                let psi = problem.layer_assignment(&s).unwrap();
                for (k, j) in s.edges() {
                    assert!(psi[j] >= psi[k] + 1.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn variable_map_lists_all_variables() {
        let g = toy_gram(2, 50, 13);
        let problem =
            MipProblem::build(g, 0.1, ConstraintSets::full(2), MipOptions::default()).unwrap();
        let map = problem.variable_map_json();
        let n_vars = map.as_array().unwrap().len();
        // 2 edges * R coefficients + 2 intercepts + 2 diagonals + 2 binaries + 2 layers
        assert_eq!(n_vars, 2 * problem.r() + 2 + 2 + 2 + 2);
    }
}
