//! Truncated function classes: knot placement, basis evaluation
//! (spline / radial / sine systems), the extended vector
//! `Z = [X_1..X_p, 1, b_1(X_1)..b_1(X_p), ..., b_R(X_1)..b_R(X_p)]`,
//! and its empirical second-moment (Gram) matrix, which is the sufficient
//! statistic for every likelihood evaluation downstream.

mod spline;

pub use spline::SplineBasis;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sem::Dataset;

/// Which basis family a system uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Spline,
    Radial,
    Sine,
}

/// Basis configuration as read from JSON:
/// `{"kind": "spline"|"radial"|"sine", "degree": int, "knots": int}`.
///
/// `degree` only applies to splines. For splines `knots` is the number of
/// internal knots and the basis size is `R = degree + knots`; for radial
/// systems `R = knots`; for the sine system `knots` is `R` directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub kind: BasisKind,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub knots: usize,
}

fn default_degree() -> usize {
    3
}

impl BasisConfig {
    pub fn spline(degree: usize, knots: usize) -> Self {
        BasisConfig {
            kind: BasisKind::Spline,
            degree,
            knots,
        }
    }

    pub fn radial(knots: usize) -> Self {
        BasisConfig {
            kind: BasisKind::Radial,
            degree: 0,
            knots,
        }
    }

    pub fn sine(r: usize) -> Self {
        BasisConfig {
            kind: BasisKind::Sine,
            degree: 0,
            knots: r,
        }
    }

    /// Basis functions per column implied by this configuration.
    pub fn basis_count(&self) -> usize {
        match self.kind {
            BasisKind::Spline => self.degree + self.knots,
            BasisKind::Radial | BasisKind::Sine => self.knots,
        }
    }
}

/// Index layout of the extended vector for `p` variables and `R` basis
/// functions: raw variables first, then the constant slot, then one block
/// of `p` entries per basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZLayout {
    pub p: usize,
    pub r: usize,
}

impl ZLayout {
    pub fn dim(&self) -> usize {
        self.p * self.r + self.p + 1
    }

    /// Column of the raw variable `X_k` (0-indexed).
    pub fn var_col(&self, k: usize) -> usize {
        k
    }

    /// Column of the constant 1.
    pub fn const_col(&self) -> usize {
        self.p
    }

    /// Column of `b_r(X_k)` for 1-indexed `r` and 0-indexed `k`.
    pub fn coef_col(&self, r: usize, k: usize) -> usize {
        debug_assert!(r >= 1 && r <= self.r);
        r * self.p + 1 + k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnBasis {
    Spline(SplineBasis),
    Radial { knots: Vec<f64> },
    /// Sorted training column; the empirical CDF is the plug-in for the
    /// unknown true CDF of the column.
    Sine { sorted: Vec<f64> },
}

/// A basis system fitted on training data, shared across all edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSystem {
    p: usize,
    r: usize,
    config: BasisConfig,
    columns: Vec<ColumnBasis>,
}

impl BasisSystem {
    /// Fit the per-column data structures (knot grids / CDF tables) on the
    /// training dataset.
    pub fn fit(config: &BasisConfig, data: &Dataset) -> Result<Self> {
        let r = config.basis_count();
        if r == 0 {
            return Err(Error::Basis("basis configuration yields R = 0".into()));
        }
        let mut columns = Vec::with_capacity(data.p());
        for j in 0..data.p() {
            let col = data.column(j);
            let cb = match config.kind {
                BasisKind::Spline => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !(lo < hi) {
                        return Err(Error::Basis(format!(
                            "column {} is constant; cannot fit a spline range",
                            j + 1
                        )));
                    }
                    let internal = if config.knots > 0 {
                        build_knots(col, config.knots)?
                    } else {
                        Vec::new()
                    };
                    ColumnBasis::Spline(SplineBasis::new(config.degree, internal, lo, hi))
                }
                BasisKind::Radial => ColumnBasis::Radial {
                    knots: build_knots(col, config.knots)?,
                },
                BasisKind::Sine => {
                    let mut sorted = col.to_vec();
                    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ColumnBasis::Sine { sorted }
                }
            };
            columns.push(cb);
        }
        Ok(BasisSystem {
            p: data.p(),
            r,
            config: *config,
            columns,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn config(&self) -> &BasisConfig {
        &self.config
    }

    pub fn layout(&self) -> ZLayout {
        ZLayout { p: self.p, r: self.r }
    }

    /// Evaluate the R basis functions of the given column at `x`.
    ///
    /// Splines evaluate the full B-spline set and drop its first function
    /// (the constant slot of the extended vector covers the remaining
    /// degree of freedom); radial bumps are `exp(-(x - k_r)^2)`; the sine
    /// system is `sin(pi r F(x))` with `F` the right-continuous empirical
    /// CDF of the training column.
    pub fn evaluate_into(&self, column: usize, x: f64, out: &mut [f64]) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Basis(format!("non-finite basis argument {}", x)));
        }
        debug_assert_eq!(out.len(), self.r);
        match &self.columns[column] {
            ColumnBasis::Spline(spline) => {
                let mut full = vec![0.0; spline.count()];
                spline.eval_all(x, &mut full);
                out.copy_from_slice(&full[1..]);
            }
            ColumnBasis::Radial { knots } => {
                for (slot, k) in out.iter_mut().zip(knots) {
                    *slot = (-(x - k) * (x - k)).exp();
                }
            }
            ColumnBasis::Sine { sorted } => {
                let count = sorted.partition_point(|&v| v <= x);
                let cdf = count as f64 / sorted.len() as f64;
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = (std::f64::consts::PI * (i + 1) as f64 * cdf).sin();
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, column: usize, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.r];
        self.evaluate_into(column, x, &mut out)?;
        Ok(out)
    }

    /// Full B-spline values including the dropped first function; test and
    /// diagnostic hook for the partition-of-unity identity.
    pub fn spline_full_basis(&self, column: usize, x: f64) -> Option<Vec<f64>> {
        match &self.columns[column] {
            ColumnBasis::Spline(spline) => {
                let mut full = vec![0.0; spline.count()];
                spline.eval_all(x, &mut full);
                Some(full)
            }
            _ => None,
        }
    }

    /// Build the extended vector for one observation row `x` (length p).
    pub fn extended_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let layout = self.layout();
        if x.len() != self.p || out.len() != layout.dim() {
            return Err(Error::Basis(format!(
                "extended vector length mismatch: p = {}, got x of {} into {}",
                self.p,
                x.len(),
                out.len()
            )));
        }
        out[..self.p].copy_from_slice(x);
        out[layout.const_col()] = 1.0;
        let mut vals = vec![0.0; self.r];
        for k in 0..self.p {
            self.evaluate_into(k, x[k], &mut vals)?;
            for (r0, &v) in vals.iter().enumerate() {
                out[layout.coef_col(r0 + 1, k)] = v;
            }
        }
        Ok(())
    }

    pub fn extended(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.layout().dim()];
        self.extended_into(x, &mut out)?;
        Ok(out)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut system: BasisSystem = serde_json::from_str(s)?;
        for cb in &mut system.columns {
            if let ColumnBasis::Spline(sp) = cb {
                sp.rebuild_knots();
            }
        }
        Ok(system)
    }
}

/// Internal knots at evenly spaced percentiles `i / (count + 1)` of the
/// column, using linear-interpolation quantiles. Errors if ties collapse
/// the grid (too few distinct values).
pub fn build_knots(column: &[f64], count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Basis("knot count must be at least 1".into()));
    }
    if column.len() < 2 {
        return Err(Error::Basis("need at least two observations for knots".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Basis(
            "column is constant; cannot place knots".into(),
        ));
    }
    let mut knots = Vec::with_capacity(count);
    for i in 1..=count {
        let q = i as f64 / (count + 1) as f64;
        let h = q * (n - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let v = if lo + 1 < n {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        };
        knots.push(v);
    }
    for w in knots.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Basis(
                "knot grid is not strictly increasing; too few distinct values".into(),
            ));
        }
    }
    Ok(knots)
}

/// Empirical second-moment matrix of the extended vector:
/// `Sigma_hat = n^{-1} sum_i z_i z_i^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    p: usize,
    r: usize,
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> ZLayout {
        ZLayout { p: self.p, r: self.r }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Quadratic form `row^T Sigma_hat row`.
    pub fn quad_form(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.dim);
        let mut total = 0.0;
        for i in 0..self.dim {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let base = i * self.dim;
            let mut acc = 0.0;
            for j in 0..self.dim {
                let rj = row[j];
                if rj != 0.0 {
                    acc += self.values[base + j] * rj;
                }
            }
            total += ri * acc;
        }
        total
    }

    /// Dense sub-block `Sigma_hat[rows, cols]`.
    pub fn sub_matrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.entry(rows[i], cols[j]))
    }

    pub fn sub_vector(&self, rows: &[usize], col: usize) -> DVector<f64> {
        DVector::from_fn(rows.len(), |i, _| self.entry(rows[i], col))
    }

    /// Assemble from raw values (used by tests and deserialization paths).
    pub fn from_values(p: usize, r: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let dim = p * r + p + 1;
        if values.len() != dim * dim {
            return Err(Error::Basis("gram value length mismatch".into()));
        }
        Ok(GramMatrix { p, r, n, dim, values })
    }
}

/// Default block size for the pairwise (cascade) accumulation.
const GRAM_BLOCK: usize = 1024;

/// Compute the Gram matrix in one pass over the data.
///
/// Outer products are accumulated per block of rows and blocks are combined
/// pairwise, which keeps the summation error near machine precision even at
/// n = 1e5; the result is independent of the block size up to reassociation
/// noise.
pub fn gram(system: &BasisSystem, data: &Dataset) -> Result<GramMatrix> {
    gram_with_block(system, data, GRAM_BLOCK)
}

pub fn gram_with_block(system: &BasisSystem, data: &Dataset, block: usize) -> Result<GramMatrix> {
    if data.n() == 0 {
        return Err(Error::Basis("empty dataset".into()));
    }
    if data.p() != system.p() {
        return Err(Error::Basis("dataset width does not match basis system".into()));
    }
    let dim = system.layout().dim();
    let tri = dim * (dim + 1) / 2;
    let block = block.max(1);

    // binary cascade of per-block partial sums over the upper triangle
    let mut levels: Vec<Option<Vec<f64>>> = Vec::new();
    let mut current = vec![0.0f64; tri];
    let mut in_current = 0usize;

    let mut x = vec![0.0; data.p()];
    let mut z = vec![0.0; dim];
    for i in 0..data.n() {
        data.row_into(i, &mut x);
        system.extended_into(&x, &mut z)?;
        let mut idx = 0;
        for a in 0..dim {
            let za = z[a];
            if za == 0.0 {
                idx += dim - a;
                continue;
            }
            for zb in z.iter().take(dim).skip(a) {
                current[idx] += za * zb;
                idx += 1;
            }
        }
        in_current += 1;
        if in_current == block {
            cascade_push(&mut levels, std::mem::replace(&mut current, vec![0.0; tri]));
            in_current = 0;
        }
    }
    if in_current > 0 {
        cascade_push(&mut levels, current);
    } else {
        drop(current);
    }

    let mut total = vec![0.0f64; tri];
    for level in levels.into_iter().flatten() {
        for (t, v) in total.iter_mut().zip(level) {
            *t += v;
        }
    }

    let scale = 1.0 / data.n() as f64;
    let mut values = vec![0.0f64; dim * dim];
    let mut idx = 0;
    for a in 0..dim {
        for b in a..dim {
            let v = total[idx] * scale;
            values[a * dim + b] = v;
            values[b * dim + a] = v;
            idx += 1;
        }
    }
    // the constant-constant entry is exactly 1 by construction
    let c = system.layout().const_col();
    values[c * dim + c] = 1.0;

    Ok(GramMatrix {
        p: system.p(),
        r: system.r(),
        n: data.n(),
        dim,
        values,
    })
}

fn cascade_push(levels: &mut Vec<Option<Vec<f64>>>, mut block: Vec<f64>) {
    let mut level = 0;
    loop {
        if level == levels.len() {
            levels.push(Some(block));
            return;
        }
        match levels[level].take() {
            None => {
                levels[level] = Some(block);
                return;
            }
            Some(existing) => {
                for (b, e) in block.iter_mut().zip(existing) {
                    *b += e;
                }
                level += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::{sample, SemSpec};

    fn toy_data(p: usize, n: usize, seed: u64) -> Dataset {
        let spec = SemSpec::new(p, vec![], vec![1.0; p], seed).unwrap();
        sample(&spec, n, seed).unwrap()
    }

    #[test]
    fn knots_at_percentiles() {
        let column: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let k1 = build_knots(&column, 1).unwrap();
        assert!((k1[0] - 50.5).abs() < 1e-12);
        let k3 = build_knots(&column, 3).unwrap();
        assert!((k3[0] - 25.75).abs() < 1e-12);
        assert!((k3[1] - 50.5).abs() < 1e-12);
        assert!((k3[2] - 75.25).abs() < 1e-12);
    }

    #[test]
    fn knots_reject_constant_column() {
        let column = vec![3.0; 50];
        assert!(build_knots(&column, 1).is_err());
    }

    #[test]
    fn radial_unit_at_knot() {
        let data = toy_data(1, 200, 3);
        let mut values = data.column(0).to_vec();
        values[0] = 0.0; // make sure 0 is interior
        let data = Dataset::new(values, 200, 1, vec!["X1".into()]).unwrap();
        let system = BasisSystem::fit(&BasisConfig::radial(3), &data).unwrap();
        if let ColumnBasis::Radial { knots } = &system.columns[0] {
            let out = system.evaluate(0, knots[0]).unwrap();
            assert!((out[0] - 1.0).abs() < 1e-12);
        } else {
            panic!("expected radial basis");
        }
    }

    #[test]
    fn sine_vanishes_at_training_maximum() {
        let data = toy_data(1, 500, 9);
        let max = data
            .column(0)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let system = BasisSystem::fit(&BasisConfig::sine(5), &data).unwrap();
        let out = system.evaluate(0, max).unwrap();
        for (r, v) in out.iter().enumerate() {
            assert!(v.abs() < 1e-12, "sine r = {} at max: {}", r + 1, v);
        }
    }

    #[test]
    fn spline_r_and_partition_of_unity() {
        let data = toy_data(1, 300, 4);
        let config = BasisConfig::spline(2, 2);
        assert_eq!(config.basis_count(), 4);
        let system = BasisSystem::fit(&config, &data).unwrap();
        assert_eq!(system.r(), 4);
        let lo = data.column(0).iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data
            .column(0)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        for i in 0..=100 {
            let x = lo + (hi - lo) * i as f64 / 100.0;
            let full = system.spline_full_basis(0, x).unwrap();
            let sum: f64 = full.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn extended_vector_layout() {
        let data = toy_data(3, 100, 5);
        let system = BasisSystem::fit(&BasisConfig::sine(2), &data).unwrap();
        let z = system.extended(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(z.len(), 10); // 3*2 + 3 + 1
        assert_eq!(z[3], 1.0);

        let data1 = toy_data(1, 100, 6);
        let system1 = BasisSystem::fit(&BasisConfig::sine(1), &data1).unwrap();
        let v = 0.37;
        let z1 = system1.extended(&[v]).unwrap();
        assert_eq!(z1.len(), 3);
        assert_eq!(z1[0], v);
        assert_eq!(z1[1], 1.0);
        assert_eq!(z1[2], system1.evaluate(0, v).unwrap()[0]);
    }

    #[test]
    fn extended_rejects_wrong_length() {
        let data = toy_data(2, 50, 8);
        let system = BasisSystem::fit(&BasisConfig::sine(1), &data).unwrap();
        assert!(system.extended(&[1.0]).is_err());
    }

    #[test]
    fn gram_single_row_is_outer_product() {
        let values = vec![2.0];
        let data = Dataset::new(values, 1, 1, vec!["X1".into()]).unwrap();
        let system = BasisSystem::fit(&BasisConfig::sine(1), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let z = system.extended(&[2.0]).unwrap();
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                assert!((g.entry(i, j) - z[i] * z[j]).abs() < 1e-12);
            }
        }
        assert_eq!(g.entry(1, 1), 1.0);
    }

    #[test]
    fn gram_symmetric_psd_and_unit_constant() {
        let data = toy_data(3, 400, 12);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 2), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let c = g.layout().const_col();
        assert_eq!(g.entry(c, c), 1.0);
        let dim = g.dim();
        let mut trace = 0.0;
        for i in 0..dim {
            trace += g.entry(i, i);
            for j in 0..dim {
                assert!((g.entry(i, j) - g.entry(j, i)).abs() < 1e-12);
            }
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| g.entry(i, j));
        let eigs = m.symmetric_eigenvalues();
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(
            min_eig >= -1e-8 * trace,
            "gram not PSD: min eig {} (trace {})",
            min_eig,
            trace
        );
    }

    #[test]
    fn gram_block_size_invariance() {
        let data = toy_data(2, 997, 2);
        let system = BasisSystem::fit(&BasisConfig::spline(3, 1), &data).unwrap();
        let a = gram_with_block(&system, &data, 64).unwrap();
        let b = gram_with_block(&system, &data, 1000).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            let scale = x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn quad_form_matches_samplewise_identity() {
        let data = toy_data(2, 250, 31);
        let system = BasisSystem::fit(&BasisConfig::spline(2, 1), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let dim = g.dim();
        let mut rng = crate::rng::stream(55, "quadform", 0);
        use rand::Rng;
        for _ in 0..20 {
            let row: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let via_gram = g.quad_form(&row);
            let mut x = vec![0.0; 2];
            let mut z = vec![0.0; dim];
            let mut acc = 0.0;
            for i in 0..data.n() {
                data.row_into(i, &mut x);
                system.extended_into(&x, &mut z).unwrap();
                let dot: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                acc += dot * dot;
            }
            acc /= data.n() as f64;
            let scale = via_gram.abs().max(acc.abs()).max(1.0);
            assert!(
                (via_gram - acc).abs() <= 1e-9 * scale,
                "{} vs {}",
                via_gram,
                acc
            );
        }
    }

    #[test]
    fn sine_moments_on_uniform_grid() {
        // exact uniform grid u_i = (i - 1/2) / n
        let n = 10_000;
        let values: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let data = Dataset::new(values, n, 1, vec!["U".into()]).unwrap();
        let system = BasisSystem::fit(&BasisConfig::sine(5), &data).unwrap();
        let g = gram(&system, &data).unwrap();
        let layout = g.layout();
        for r in 1..=5usize {
            for r2 in 1..=5usize {
                let entry = g.entry(layout.coef_col(r, 0), layout.coef_col(r2, 0));
                let target = if r == r2 { 0.5 } else { 0.0 };
                assert!(
                    (entry - target).abs() < 1e-3,
                    "sine moment ({}, {}) = {} should be {}",
                    r,
                    r2,
                    entry,
                    target
                );
            }
        }
    }

    #[test]
    fn fitted_system_json_round_trip() {
        let data = toy_data(2, 120, 44);
        for config in [
            BasisConfig::spline(2, 2),
            BasisConfig::radial(3),
            BasisConfig::sine(4),
        ] {
            let system = BasisSystem::fit(&config, &data).unwrap();
            let s = system.to_json_string().unwrap();
            let back = BasisSystem::from_json_str(&s).unwrap();
            assert_eq!(back, system);
            // evaluation agrees after round trip
            let a = system.evaluate(0, 0.2).unwrap();
            let b = back.evaluate(0, 0.2).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn evaluate_rejects_non_finite() {
        let data = toy_data(1, 50, 1);
        let system = BasisSystem::fit(&BasisConfig::sine(2), &data).unwrap();
        assert!(system.evaluate(0, f64::NAN).is_err());
    }
}
