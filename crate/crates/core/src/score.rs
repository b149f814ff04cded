//! Score evaluations: the Gram-form negative log-likelihood, the
//! sample-wise form used as its oracle, the equal-variance objective, the
//! closed-form per-node profile score, BIC scores, and the bijection
//! between the scaled coefficient matrix and the natural parameters.
//!
//! The scaled coefficient matrix has rows
//! `Gamma_j = (1/sigma_j) * [e_j, -intercept_j, -beta_1*j, ..., -beta_R*j]`
//! in the extended-vector layout, so `Gamma_j . z` is the standardized
//! residual of node j and the negative log-likelihood becomes
//! `sum_j -2 log Gamma_jj + tr(Gamma' Gamma Sigma_hat)`.

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, GramMatrix, ZLayout};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::sem::Dataset;

/// Relative ridge added to least-squares blocks: `1e-10 * trace(block)`.
pub const RIDGE_FLOOR: f64 = 1e-10;

/// Residual variances are floored here before taking logs.
pub const OMEGA_FLOOR: f64 = 1e-12;

/// A binary edge-indicator pattern over `p` nodes (acyclicity not
/// required; scoring is pure algebra on the support).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    p: usize,
    g: Vec<bool>,
}

impl Support {
    pub fn empty(p: usize) -> Self {
        Support {
            p,
            g: vec![false; p * p],
        }
    }

    pub fn from_matrix(p: usize, g: Vec<bool>) -> Result<Self> {
        if g.len() != p * p {
            return Err(Error::InvalidInput("support shape mismatch".into()));
        }
        for j in 0..p {
            if g[j * p + j] {
                return Err(Error::InvalidInput("support has a self-loop".into()));
            }
        }
        Ok(Support { p, g })
    }

    pub fn from_dag(dag: &Dag) -> Self {
        Support {
            p: dag.p(),
            g: dag.adjacency().to_vec(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn set(&mut self, from: usize, to: usize, present: bool) {
        debug_assert_ne!(from, to);
        self.g[from * self.p + to] = present;
    }

    pub fn has(&self, from: usize, to: usize) -> bool {
        self.g[from * self.p + to]
    }

    pub fn edge_count(&self) -> usize {
        self.g.iter().filter(|&&b| b).count()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&k| self.g[k * self.p + j]).collect()
    }

    pub fn matrix(&self) -> &[bool] {
        &self.g
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.p {
            for j in 0..self.p {
                if self.g[k * self.p + j] {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Into a `Dag`, failing if the pattern is cyclic.
    pub fn to_dag(&self) -> Result<Dag> {
        Dag::from_adjacency(self.p, self.g.clone())
    }
}

/// Scaled coefficient matrix: p rows over the extended-vector layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    p: usize,
    r: usize,
    values: Vec<f64>,
}

impl GammaMatrix {
    pub fn new(p: usize, r: usize, values: Vec<f64>) -> Result<Self> {
        let m = GammaMatrix { p, r, values };
        m.validate()?;
        Ok(m)
    }

    pub fn zeroed(p: usize, r: usize) -> Self {
        let dim = ZLayout { p, r }.dim();
        let mut values = vec![0.0; p * dim];
        for j in 0..p {
            values[j * dim + j] = 1.0;
        }
        GammaMatrix { p, r, values }
    }

    pub fn layout(&self) -> ZLayout {
        ZLayout { p: self.p, r: self.r }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let dim = self.layout().dim();
        &self.values[j * dim..(j + 1) * dim]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let dim = self.layout().dim();
        &mut self.values[j * dim..(j + 1) * dim]
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.row(j)[j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Check the structural invariants: positive diagonal, zero
    /// identity-block off-diagonal, and zero own-node basis coefficients.
    pub fn validate(&self) -> Result<()> {
        let layout = self.layout();
        if self.values.len() != self.p * layout.dim() {
            return Err(Error::Score("gamma shape mismatch".into()));
        }
        for j in 0..self.p {
            let row = self.row(j);
            if !(row[j] > 0.0) {
                return Err(Error::Score(format!(
                    "diagonal entry for node {} must be positive, got {}",
                    j + 1,
                    row[j]
                )));
            }
            for k in 0..self.p {
                if k != j && row[layout.var_col(k)] != 0.0 {
                    return Err(Error::Score(format!(
                        "identity block of row {} has nonzero off-diagonal at {}",
                        j + 1,
                        k + 1
                    )));
                }
            }
            for r in 1..=self.r {
                if row[layout.coef_col(r, j)] != 0.0 {
                    return Err(Error::Score(format!(
                        "own-node basis coefficient must be zero (node {}, r = {})",
                        j + 1,
                        r
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Equal-variance coefficient matrix `B = sigma * Gamma`: same layout with
/// the identity block pinned to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EqVarMatrix {
    p: usize,
    r: usize,
    values: Vec<f64>,
}

impl EqVarMatrix {
    pub fn new(p: usize, r: usize, values: Vec<f64>) -> Result<Self> {
        let m = EqVarMatrix { p, r, values };
        m.validate()?;
        Ok(m)
    }

    pub fn layout(&self) -> ZLayout {
        ZLayout { p: self.p, r: self.r }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let dim = self.layout().dim();
        &self.values[j * dim..(j + 1) * dim]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.layout();
        if self.values.len() != self.p * layout.dim() {
            return Err(Error::Score("eqvar shape mismatch".into()));
        }
        for j in 0..self.p {
            let row = self.row(j);
            for k in 0..self.p {
                let expected = if k == j { 1.0 } else { 0.0 };
                if row[layout.var_col(k)] != expected {
                    return Err(Error::Score(
                        "equal-variance identity block must be exactly I".into(),
                    ));
                }
            }
            for r in 1..=self.r {
                if row[layout.coef_col(r, j)] != 0.0 {
                    return Err(Error::Score(
                        "own-node basis coefficient must be zero".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Natural parameters: basis coefficients, per-node aggregated intercepts,
/// and noise standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTheta {
    pub p: usize,
    pub r: usize,
    /// `beta[idx(r, k, j)]` with 1-indexed r; `beta_rjj = 0`.
    beta: Vec<f64>,
    /// Aggregated intercept per node: `sum_k beta_0kj`.
    pub intercept_sum: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ModelTheta {
    pub fn idx(&self, r: usize, k: usize, j: usize) -> usize {
        debug_assert!(r >= 1 && r <= self.r);
        ((r - 1) * self.p + k) * self.p + j
    }

    pub fn beta(&self, r: usize, k: usize, j: usize) -> f64 {
        self.beta[self.idx(r, k, j)]
    }

    pub fn new(
        p: usize,
        r: usize,
        beta: Vec<f64>,
        intercept_sum: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let t = ModelTheta {
            p,
            r,
            beta,
            intercept_sum,
            sigma,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.r * self.p * self.p
            || self.intercept_sum.len() != self.p
            || self.sigma.len() != self.p
        {
            return Err(Error::Score("theta shape mismatch".into()));
        }
        for (j, &s) in self.sigma.iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::Score(format!(
                    "sigma for node {} must be positive",
                    j + 1
                )));
            }
        }
        for j in 0..self.p {
            for r in 1..=self.r {
                if self.beta(r, j, j) != 0.0 {
                    return Err(Error::Score("own-node coefficient must be zero".into()));
                }
            }
            let has_parent =
                (0..self.p).any(|k| (1..=self.r).any(|r| self.beta(r, k, j) != 0.0));
            if !has_parent && self.intercept_sum[j] != 0.0 {
                return Err(Error::Score(format!(
                    "node {} has no parent but a nonzero intercept",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// Edges whose coefficient group is not identically zero.
    pub fn support(&self) -> Support {
        let mut s = Support::empty(self.p);
        for k in 0..self.p {
            for j in 0..self.p {
                if k != j && (1..=self.r).any(|r| self.beta(r, k, j) != 0.0) {
                    s.set(k, j, true);
                }
            }
        }
        s
    }
}

/// Map the scaled matrix to natural parameters: `sigma_j = 1/Gamma_jj`,
/// `beta_rkj = -Gamma_{j, col(r,k)} * sigma_j`.
pub fn gamma_to_theta(gamma: &GammaMatrix) -> Result<ModelTheta> {
    gamma.validate()?;
    let layout = gamma.layout();
    let p = gamma.p();
    let r = gamma.r();
    let mut beta = vec![0.0; r * p * p];
    let mut intercept_sum = vec![0.0; p];
    let mut sigma = vec![0.0; p];
    for j in 0..p {
        let row = gamma.row(j);
        let s = 1.0 / row[j];
        sigma[j] = s;
        intercept_sum[j] = -row[layout.const_col()] * s;
        for rr in 1..=r {
            for k in 0..p {
                if k == j {
                    continue;
                }
                beta[((rr - 1) * p + k) * p + j] = -row[layout.coef_col(rr, k)] * s;
            }
        }
    }
    ModelTheta::new(p, r, beta, intercept_sum, sigma)
}

/// Inverse of [`gamma_to_theta`]; exact round trip up to rounding.
pub fn theta_to_gamma(theta: &ModelTheta) -> Result<GammaMatrix> {
    theta.validate()?;
    let p = theta.p;
    let r = theta.r;
    let layout = ZLayout { p, r };
    let dim = layout.dim();
    let mut values = vec![0.0; p * dim];
    for j in 0..p {
        let inv = 1.0 / theta.sigma[j];
        let row = &mut values[j * dim..(j + 1) * dim];
        row[j] = inv;
        row[layout.const_col()] = -theta.intercept_sum[j] * inv;
        for rr in 1..=r {
            for k in 0..p {
                if k == j {
                    continue;
                }
                row[layout.coef_col(rr, k)] = -theta.beta(rr, k, j) * inv;
            }
        }
    }
    GammaMatrix::new(p, r, values)
}

/// Gram-form objective:
/// `sum_j -2 log Gamma_jj + tr(Gamma' Gamma Sigma_hat) + lambda^2 * |g|`.
pub fn objective_gram(
    gamma: &GammaMatrix,
    gram: &GramMatrix,
    lambda_sq: f64,
    g: &Support,
) -> Result<f64> {
    if gamma.p() != gram.p() || gamma.r() != gram.r() {
        return Err(Error::Score("gamma and gram layouts differ".into()));
    }
    let mut total = 0.0;
    for j in 0..gamma.p() {
        let d = gamma.diag(j);
        if !(d > 0.0) {
            return Err(Error::Score(format!(
                "diagonal entry for node {} must be positive",
                j + 1
            )));
        }
        total += -2.0 * d.ln() + gram.quad_form(gamma.row(j));
    }
    Ok(total + lambda_sq * g.edge_count() as f64)
}

/// Sample-wise objective used as the independent oracle for the Gram form:
/// `sum_j log sigma_j^2 + ||X_j - sum_k f_kj(X_k)||_n^2 / sigma_j^2`
/// plus the penalty.
pub fn objective_samples(
    theta: &ModelTheta,
    data: &Dataset,
    system: &BasisSystem,
    lambda_sq: f64,
    g: &Support,
) -> Result<f64> {
    theta.validate()?;
    if theta.p != data.p() || theta.p != system.p() || theta.r != system.r() {
        return Err(Error::Score("theta, data and basis system disagree".into()));
    }
    let p = theta.p;
    let n = data.n();
    let mut sum_sq = vec![0.0f64; p];
    let mut comp = vec![0.0f64; p]; // Neumaier compensation
    let mut x = vec![0.0; p];
    let mut basis = vec![vec![0.0; system.r()]; p];
    for i in 0..n {
        data.row_into(i, &mut x);
        for (k, row) in basis.iter_mut().enumerate() {
            system.evaluate_into(k, x[k], row)?;
        }
        for j in 0..p {
            let mut resid = x[j] - theta.intercept_sum[j];
            for k in 0..p {
                if k == j {
                    continue;
                }
                for r in 1..=theta.r {
                    let b = theta.beta(r, k, j);
                    if b != 0.0 {
                        resid -= b * basis[k][r - 1];
                    }
                }
            }
            if !resid.is_finite() {
                return Err(Error::Score(format!(
                    "non-finite residual at row {}, node {}",
                    i + 1,
                    j + 1
                )));
            }
            let term = resid * resid;
            let t = sum_sq[j] + term;
            comp[j] += if sum_sq[j].abs() >= term.abs() {
                (sum_sq[j] - t) + term
            } else {
                (term - t) + sum_sq[j]
            };
            sum_sq[j] = t;
        }
    }
    let mut total = 0.0;
    for j in 0..p {
        let s2 = theta.sigma[j] * theta.sigma[j];
        total += s2.ln() + (sum_sq[j] + comp[j]) / (n as f64 * s2);
    }
    Ok(total + lambda_sq * g.edge_count() as f64)
}

/// Equal-variance objective: `tr(B' B Sigma_hat) + lambda~^2 * |g|`.
pub fn objective_eqvar(
    b: &EqVarMatrix,
    gram: &GramMatrix,
    lambda_tilde_sq: f64,
    g: &Support,
) -> Result<f64> {
    b.validate()?;
    if b.p != gram.p() || b.r != gram.r() {
        return Err(Error::Score("eqvar matrix and gram layouts differ".into()));
    }
    let mut total = 0.0;
    for j in 0..b.p {
        total += gram.quad_form(b.row(j));
    }
    Ok(total + lambda_tilde_sq * g.edge_count() as f64)
}

/// Residual of projecting node `j` on its parents' basis columns, solved
/// from Gram sub-blocks.
#[derive(Debug, Clone)]
pub struct NodeLeastSquares {
    /// Minimal residual quadratic form (floored at [`OMEGA_FLOOR`]).
    pub omega: f64,
    /// Selected columns (constant first iff the node has a parent).
    pub cols: Vec<usize>,
    /// Least-squares coefficients aligned with `cols`.
    pub coefs: Vec<f64>,
}

/// Solve the per-node least squares from the Gram matrix. The constant
/// column participates iff the node has at least one parent, mirroring the
/// intercept constraint of the integer program.
pub fn node_least_squares(
    gram: &GramMatrix,
    j: usize,
    parents: &[usize],
) -> Result<NodeLeastSquares> {
    let layout = gram.layout();
    let mut cols = Vec::with_capacity(1 + parents.len() * gram.r());
    if !parents.is_empty() {
        cols.push(layout.const_col());
        for &k in parents {
            for r in 1..=gram.r() {
                cols.push(layout.coef_col(r, k));
            }
        }
    }
    let s_jj = gram.entry(layout.var_col(j), layout.var_col(j));
    if cols.is_empty() {
        return Ok(NodeLeastSquares {
            omega: s_jj.max(OMEGA_FLOOR),
            cols,
            coefs: Vec::new(),
        });
    }
    let mut a = gram.sub_matrix(&cols, &cols);
    let trace = a.trace();
    let ridge = RIDGE_FLOOR * trace;
    for i in 0..cols.len() {
        a[(i, i)] += ridge;
    }
    let w = gram.sub_vector(&cols, layout.var_col(j));
    let chol = Cholesky::new(a.clone()).ok_or_else(|| {
        Error::Score(format!(
            "singular normal equations for node {} beyond ridge floor",
            j + 1
        ))
    })?;
    let c: DVector<f64> = chol.solve(&w);
    // residual of the actual coefficients: s_jj - 2 w'c + c'A0 c with the
    // unridged block A0 = A - ridge I
    let ac = &a * &c;
    let omega = s_jj - 2.0 * w.dot(&c) + c.dot(&ac) - ridge * c.dot(&c);
    Ok(NodeLeastSquares {
        omega: omega.max(OMEGA_FLOOR),
        cols,
        coefs: c.iter().copied().collect(),
    })
}

/// Per-node pieces of a profile fit.
#[derive(Debug, Clone)]
pub struct NodeProfile {
    pub omega: f64,
    /// `log omega + 1` for the unequal-variance regime.
    pub contribution: f64,
}

/// Result of profiling out the continuous parameters for a fixed support.
#[derive(Debug, Clone)]
pub struct ProfileFit {
    pub score: f64,
    pub per_node: Vec<NodeProfile>,
    pub gamma: GammaMatrix,
}

/// Closed-form optimum over all feasible `Gamma` with the given support:
/// per node, `omega_j` is the projection residual and the node contributes
/// `log omega_j + 1` (from minimizing `-2 log u + u^2 omega` at
/// `u = omega^{-1/2}`); the total adds `lambda^2` per edge.
pub fn profile_score(support: &Support, gram: &GramMatrix, lambda_sq: f64) -> Result<ProfileFit> {
    if support.p() != gram.p() {
        return Err(Error::Score("support and gram sizes differ".into()));
    }
    let p = gram.p();
    let layout = gram.layout();
    let mut gamma = GammaMatrix::zeroed(p, gram.r());
    let mut per_node = Vec::with_capacity(p);
    let mut score = lambda_sq * support.edge_count() as f64;
    for j in 0..p {
        let ls = node_least_squares(gram, j, &support.parents(j))?;
        let diag = 1.0 / ls.omega.sqrt();
        {
            let row = gamma.row_mut(j);
            row[layout.var_col(j)] = diag;
            for (col, coef) in ls.cols.iter().zip(&ls.coefs) {
                row[*col] = -coef * diag;
            }
        }
        let contribution = ls.omega.ln() + 1.0;
        score += contribution;
        per_node.push(NodeProfile {
            omega: ls.omega,
            contribution,
        });
    }
    Ok(ProfileFit {
        score,
        per_node,
        gamma,
    })
}

/// Equal-variance profile fit for a fixed support.
#[derive(Debug, Clone)]
pub struct EqVarProfileFit {
    pub score: f64,
    pub omegas: Vec<f64>,
    pub b: EqVarMatrix,
    /// Pooled estimate `(1/p) tr(B' B Sigma_hat)` of the common variance.
    pub pooled_variance: f64,
}

/// Closed-form optimum of the equal-variance objective for a fixed
/// support: the same per-node projections without the log terms.
pub fn profile_score_eqvar(
    support: &Support,
    gram: &GramMatrix,
    lambda_tilde_sq: f64,
) -> Result<EqVarProfileFit> {
    if support.p() != gram.p() {
        return Err(Error::Score("support and gram sizes differ".into()));
    }
    let p = gram.p();
    let layout = gram.layout();
    let dim = layout.dim();
    let mut values = vec![0.0; p * dim];
    let mut omegas = Vec::with_capacity(p);
    let mut fit_total = 0.0;
    for j in 0..p {
        let ls = node_least_squares(gram, j, &support.parents(j))?;
        let row = &mut values[j * dim..(j + 1) * dim];
        row[layout.var_col(j)] = 1.0;
        for (col, coef) in ls.cols.iter().zip(&ls.coefs) {
            row[*col] = -coef;
        }
        fit_total += ls.omega;
        omegas.push(ls.omega);
    }
    let b = EqVarMatrix::new(p, gram.r(), values)?;
    Ok(EqVarProfileFit {
        score: fit_total + lambda_tilde_sq * support.edge_count() as f64,
        omegas,
        pooled_variance: fit_total / p as f64,
        b,
    })
}

/// BIC for the unequal-variance regime:
/// objective value plus `(p + |g|) log(n) / n`.
pub fn bic_unequal(
    gamma: &GammaMatrix,
    g: &Support,
    gram: &GramMatrix,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Score("BIC needs n >= 2".into()));
    }
    let fit = objective_gram(gamma, gram, 0.0, &Support::empty(g.p()))?;
    Ok(fit + (g.p() + g.edge_count()) as f64 * (n as f64).ln() / n as f64)
}

/// BIC for the equal-variance regime: fit plus `|g| log(n) / n`.
pub fn bic_equal(b: &EqVarMatrix, g: &Support, gram: &GramMatrix, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Score("BIC needs n >= 2".into()));
    }
    let fit = objective_eqvar(b, gram, 0.0, &Support::empty(g.p()))?;
    Ok(fit + g.edge_count() as f64 * (n as f64).ln() / n as f64)
}

/// Serialized fitted model: per-edge coefficient vectors, per-node noise
/// levels, and the per-node score breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModelJson {
    pub p: usize,
    pub r: usize,
    /// 1-indexed edges with their R coefficients.
    pub edges: Vec<FittedEdgeJson>,
    pub sigmas: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub node_contributions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedEdgeJson {
    pub from: usize,
    pub to: usize,
    pub coeffs: Vec<f64>,
}

impl FittedModelJson {
    pub fn from_theta(theta: &ModelTheta, contributions: &[f64]) -> Self {
        let support = theta.support();
        let edges = support
            .edges()
            .into_iter()
            .map(|(k, j)| FittedEdgeJson {
                from: k + 1,
                to: j + 1,
                coeffs: (1..=theta.r).map(|r| theta.beta(r, k, j)).collect(),
            })
            .collect();
        FittedModelJson {
            p: theta.p,
            r: theta.r,
            edges,
            sigmas: theta.sigma.clone(),
            intercepts: theta.intercept_sum.clone(),
            node_contributions: contributions.to_vec(),
        }
    }
}
