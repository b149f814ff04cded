//! Brute-force exact search over all labeled DAGs for small `p`.
//!
//! Every DAG is scored through the same closed-form profile fit the
//! branch-and-bound solver uses, so the two can only differ in search
//! strategy; the returned optimum certifies solver runs.

use crate::basis::GramMatrix;
use crate::error::{Error, Result};
use crate::graph::{enumerate_dags, Dag, EdgeSet, MAX_ENUMERATION_NODES};
use crate::mip::VarianceMode;
use crate::score::{profile_score, profile_score_eqvar, Support};

/// One scored graph for the optional full table.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    /// Bitmask over the off-diagonal slots in row-major order.
    pub mask: u64,
    pub edge_count: usize,
    pub score: f64,
}

/// Result of an exhaustive search.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best: Dag,
    pub best_score: f64,
    /// Second-best score minus best score (over distinct graphs).
    pub margin: f64,
    pub table: Option<Vec<ScoreRow>>,
    pub graphs_scored: usize,
}

/// Score every DAG on `p <= 5` nodes (optionally restricted to edges of
/// `restrict_to`) and return the global minimum, with a deterministic
/// lexicographic tie-break on the adjacency.
pub fn exact_search(
    gram: &GramMatrix,
    lambda_sq: f64,
    mode: VarianceMode,
    restrict_to: Option<&EdgeSet>,
    with_table: bool,
) -> Result<OracleResult> {
    let p = gram.p();
    if p > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidInput(format!(
            "exact search supports p <= {}, got {}",
            MAX_ENUMERATION_NODES, p
        )));
    }
    let mut best: Option<(f64, Dag)> = None;
    let mut second = f64::INFINITY;
    let mut table = with_table.then(Vec::new);
    let mut scored = 0usize;

    for dag in enumerate_dags(p)? {
        if let Some(allowed) = restrict_to {
            if dag.edges().iter().any(|&(k, j)| !allowed.contains(k, j)) {
                continue;
            }
        }
        let support = Support::from_dag(&dag);
        let score = match mode {
            VarianceMode::Unequal => profile_score(&support, gram, lambda_sq)?.score,
            VarianceMode::Equal => profile_score_eqvar(&support, gram, lambda_sq)?.score,
        };
        scored += 1;
        if let Some(rows) = table.as_mut() {
            rows.push(ScoreRow {
                mask: mask_of(&dag),
                edge_count: dag.edge_count(),
                score,
            });
        }
        match &best {
            None => best = Some((score, dag)),
            Some((bs, bd)) => {
                let replace = score < *bs || (score == *bs && dag.adjacency() < bd.adjacency());
                if replace {
                    second = second.min(*bs);
                    best = Some((score, dag));
                } else {
                    second = second.min(score);
                }
            }
        }
    }
    let (best_score, best) =
        best.ok_or_else(|| Error::InvalidInput("no DAG within restriction".into()))?;
    Ok(OracleResult {
        best,
        best_score,
        margin: second - best_score,
        table,
        graphs_scored: scored,
    })
}

fn mask_of(dag: &Dag) -> u64 {
    let p = dag.p();
    let mut mask = 0u64;
    let mut bit = 0;
    for k in 0..p {
        for j in 0..p {
            if k != j {
                if dag.has_edge(k, j) {
                    mask |= 1 << bit;
                }
                bit += 1;
            }
        }
    }
    mask
}

/// CSV dump of a full score table: `mask,edges,score`.
pub fn table_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::from("mask,edges,score\n");
    for row in rows {
        s.push_str(&format!("{},{},{}\n", row.mask, row.edge_count, row.score));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gram, BasisConfig, BasisSystem};
    use crate::score::objective_gram;
    use crate::sem::{sample, EdgeFunction, EdgeSpec, SemSpec};

    fn chain_gram(seed: u64) -> GramMatrix {
        let spec = SemSpec::new(
            3,
            vec![
                EdgeSpec::new(0, 1, EdgeFunction::CosMix),
                EdgeSpec::new(1, 2, EdgeFunction::CosMix),
            ],
            vec![0.8, 0.3, 0.3],
            seed,
        )
        .unwrap();
        let data = sample(&spec, 300, seed).unwrap();
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        gram(&system, &data).unwrap()
    }

    #[test]
    fn single_node_is_trivial() {
        let spec = SemSpec::new(1, vec![], vec![1.3], 2).unwrap();
        let data = sample(&spec, 500, 2).unwrap();
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let result = exact_search(&g, 0.1, VarianceMode::Unequal, None, false).unwrap();
        assert_eq!(result.best.edge_count(), 0);
        let expect = g.entry(0, 0).ln() + 1.0;
        assert!((result.best_score - expect).abs() < 1e-12);
        assert_eq!(result.graphs_scored, 1);
    }

    #[test]
    fn scores_all_25_dags_and_finds_chain() {
        let g = chain_gram(7);
        let result = exact_search(&g, 0.05, VarianceMode::Unequal, None, true).unwrap();
        assert_eq!(result.graphs_scored, 25);
        assert!(result.best.has_edge(0, 1));
        assert!(result.best.has_edge(1, 2));
        let table = result.table.as_ref().unwrap();
        assert_eq!(table.len(), 25);
        assert!(table.iter().all(|r| r.score >= result.best_score - 1e-12));
        assert!(result.margin >= 0.0);
        let csv = table_csv(table);
        assert_eq!(csv.lines().count(), 26);
        assert!(csv.starts_with("mask,edges,score"));
    }

    #[test]
    fn score_equals_gram_objective_at_profile_fit() {
        let g = chain_gram(9);
        for dag in enumerate_dags(3).unwrap().take(10) {
            let support = Support::from_dag(&dag);
            let fit = profile_score(&support, &g, 0.2).unwrap();
            let direct = objective_gram(&fit.gamma, &g, 0.2, &support).unwrap();
            assert!((fit.score - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn restriction_limits_search() {
        let g = chain_gram(11);
        let mut allowed = EdgeSet::new(3);
        allowed.insert(0, 1).unwrap();
        let result = exact_search(&g, 0.0, VarianceMode::Unequal, Some(&allowed), false).unwrap();
        // only the empty graph and 1 -> 2
        assert_eq!(result.graphs_scored, 2);
        assert!(result.best.edge_count() <= 1);
    }

    #[test]
    fn penalty_sweep_shrinks_optimum() {
        let g = chain_gram(13);
        let mut last_edges = usize::MAX;
        for lambda_sq in [0.0, 0.05, 0.5, 5.0, 1e6] {
            let result = exact_search(&g, lambda_sq, VarianceMode::Unequal, None, false).unwrap();
            assert!(result.best.edge_count() <= last_edges);
            last_edges = result.best.edge_count();
        }
        assert_eq!(last_edges, 0);
    }

    #[test]
    fn rejects_large_p() {
        let spec = SemSpec::new(6, vec![], vec![1.0; 6], 5).unwrap();
        let data = sample(&spec, 50, 5).unwrap();
        let system = BasisSystem::fit(&BasisConfig::sine(1), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        assert!(exact_search(&g, 0.0, VarianceMode::Unequal, None, false).is_err());
    }
}
