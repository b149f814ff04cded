//! Sampling from additive structural equation models with Gaussian noise.
//!
//! Every variable is the sum of centered nonlinear functions of its parents
//! plus independent Gaussian noise. Edge functions are built-in scalar
//! shapes (optionally scaled) or explicit radial basis combinations, and
//! each active function is centered so its mean under the parent marginal
//! is zero within Monte-Carlo tolerance.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::rng;

/// Monte-Carlo draws used to estimate centering constants, once per spec.
pub const CENTERING_DRAWS: usize = 1_000_000;

/// Fraction of non-finite draws tolerated while centering.
const INSTABILITY_LIMIT: f64 = 1e-3;

/// Scalar edge-function shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeFunction {
    Sin,
    /// `(sin x + cos x) / 2`.
    CosMix,
    /// `sin(x + sin x)`.
    SinSin,
    /// `sin(20 / x)`; evaluates to 0 at `|x| < 1e-12` where the argument
    /// would overflow (a measure-zero set).
    SinTwentyOverX,
    Square,
    Abs,
    /// `arctan(x^2)`.
    ArctanSq,
    Exp,
    /// `0.5 x^3`.
    Cubic,
    /// Explicit basis-coefficient combination of radial bumps:
    /// `sum_r coeffs[r] * exp(-(x - knots[r])^2)`.
    Radial { knots: Vec<f64>, coeffs: Vec<f64> },
}

impl EdgeFunction {
    /// Raw (uncentered, unscaled) evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            EdgeFunction::Sin => x.sin(),
            EdgeFunction::CosMix => 0.5 * (x.sin() + x.cos()),
            EdgeFunction::SinSin => (x + x.sin()).sin(),
            EdgeFunction::SinTwentyOverX => {
                if x.abs() < 1e-12 {
                    0.0
                } else {
                    (20.0 / x).sin()
                }
            }
            EdgeFunction::Square => x * x,
            EdgeFunction::Abs => x.abs(),
            EdgeFunction::ArctanSq => (x * x).atan(),
            EdgeFunction::Exp => x.exp(),
            EdgeFunction::Cubic => 0.5 * x * x * x,
            EdgeFunction::Radial { knots, coeffs } => knots
                .iter()
                .zip(coeffs)
                .map(|(k, c)| c * (-(x - k) * (x - k)).exp())
                .sum(),
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            EdgeFunction::Sin => "sin",
            EdgeFunction::CosMix => "cos_mix",
            EdgeFunction::SinSin => "sin_sin",
            EdgeFunction::SinTwentyOverX => "sin_20_over_x",
            EdgeFunction::Square => "square",
            EdgeFunction::Abs => "abs",
            EdgeFunction::ArctanSq => "arctan_sq",
            EdgeFunction::Exp => "exp",
            EdgeFunction::Cubic => "cubic",
            EdgeFunction::Radial { .. } => "radial",
        }
    }
}

/// One directed edge with its (possibly scaled) function.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    /// 0-indexed parent.
    pub from: usize,
    /// 0-indexed child.
    pub to: usize,
    pub function: EdgeFunction,
    /// Multiplier applied to the raw function before centering.
    pub scale: f64,
}

impl EdgeSpec {
    pub fn new(from: usize, to: usize, function: EdgeFunction) -> Self {
        EdgeSpec {
            from,
            to,
            function,
            scale: 1.0,
        }
    }

    pub fn scaled(from: usize, to: usize, function: EdgeFunction, scale: f64) -> Self {
        EdgeSpec {
            from,
            to,
            function,
            scale,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        self.scale * self.function.eval(x)
    }
}

/// Full model: a DAG, per-edge functions, per-node noise levels, and the
/// spec-level seed from which centering randomness is derived.
#[derive(Debug, Clone, PartialEq)]
pub struct SemSpec {
    pub p: usize,
    pub edges: Vec<EdgeSpec>,
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

impl SemSpec {
    pub fn new(p: usize, edges: Vec<EdgeSpec>, sigmas: Vec<f64>, seed: u64) -> Result<Self> {
        let spec = SemSpec {
            p,
            edges,
            sigmas,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.len() != self.p {
            return Err(Error::Sem(format!(
                "expected {} sigmas, got {}",
                self.p,
                self.sigmas.len()
            )));
        }
        for (j, &s) in self.sigmas.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Sem(format!(
                    "sigma for node {} must be a positive finite number, got {}",
                    j + 1,
                    s
                )));
            }
        }
        self.dag()?;
        Ok(())
    }

    /// The underlying graph; errors if the edges contain a cycle.
    pub fn dag(&self) -> Result<Dag> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.from, e.to)).collect();
        Dag::from_edges(self.p, &edges)
    }
}

/// An n x p sample matrix with named columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, n: usize, p: usize, column_names: Vec<String>) -> Result<Self> {
        if n == 0 || p == 0 || values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "dataset shape mismatch: n = {}, p = {}, len = {}",
                n,
                p,
                values.len()
            )));
        }
        if column_names.len() != p {
            return Err(Error::InvalidInput("column name count mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite entries".into()));
        }
        Ok(Dataset {
            n,
            p,
            values,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.n + row]
    }

    /// Copy row `i` into `out` (length `p`).
    pub fn row_into(&self, i: usize, out: &mut [f64]) {
        for j in 0..self.p {
            out[j] = self.values[j * self.n + i];
        }
    }

    /// Resample rows with replacement using the given indices.
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let n = indices.len();
        let mut values = vec![0.0; n * self.p];
        for j in 0..self.p {
            let src = self.column(j);
            for (i, &idx) in indices.iter().enumerate() {
                values[j * n + i] = src[idx];
            }
        }
        Dataset {
            n,
            p: self.p,
            values,
            column_names: self.column_names.clone(),
        }
    }

    /// CSV with a header row, `.` decimal separator, no index column.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.column_names.join(","));
        s.push('\n');
        for i in 0..self.n {
            for j in 0..self.p {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{}", self.value(i, j)));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column_names: Vec<String> = headers.iter().map(|s| s.trim().to_string()).collect();
        let p = column_names.len();
        if p == 0 {
            return Err(Error::InvalidInput("csv has no columns".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p {
                return Err(Error::InvalidInput(format!(
                    "csv row {} has {} fields, expected {}",
                    line + 2,
                    record.len(),
                    p
                )));
            }
            let mut row = Vec::with_capacity(p);
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "csv row {} column {}: cannot parse {:?} as a number",
                        line + 2,
                        j + 1,
                        field
                    ))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("csv has no data rows".into()));
        }
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for j in 0..p {
                values[j * n + i] = row[j];
            }
        }
        Dataset::new(values, n, p, column_names)
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file))
    }
}

/// Per-edge centering constants, aligned with `spec.edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCenters(pub Vec<f64>);

/// Estimate the centering constants with one large Monte-Carlo pass.
///
/// A full auxiliary sample of [`CENTERING_DRAWS`] rows is generated in
/// topological order (seeded from the spec seed, independent of any data
/// seed); each constant is the mean of the raw edge function over the
/// generated parent marginal.
pub fn edge_centers(spec: &SemSpec) -> Result<EdgeCenters> {
    spec.validate()?;
    let centering_seed = rng::derive(spec.seed, "centering", 0);
    let (_, centers) = generate(spec, None, CENTERING_DRAWS, centering_seed, true)?;
    Ok(EdgeCenters(centers))
}

/// Draw `n` i.i.d. samples from the model.
///
/// Columns are generated in topological order; identical `(spec, n, seed)`
/// yields bit-identical output. Centering constants are computed once per
/// spec (see [`edge_centers`]) and are independent of `seed`.
pub fn sample(spec: &SemSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Sem("sample size must be at least 1".into()));
    }
    let centers = edge_centers(spec)?;
    sample_with_centers(spec, &centers, n, seed)
}

/// Draw samples reusing precomputed centering constants.
pub fn sample_with_centers(
    spec: &SemSpec,
    centers: &EdgeCenters,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if centers.0.len() != spec.edges.len() {
        return Err(Error::Sem("centering constants do not match spec edges".into()));
    }
    let (columns, _) = generate(spec, Some(&centers.0), n, seed, false)?;
    let mut values = vec![0.0; n * spec.p];
    for (j, col) in columns.into_iter().enumerate() {
        values[j * n..(j + 1) * n].copy_from_slice(&col);
    }
    let names = (1..=spec.p).map(|j| format!("X{}", j)).collect();
    Dataset::new(values, n, spec.p, names)
}

/// Core generation pass. When `centers` is `None` the constants are
/// estimated from the pass itself (valid because parents are complete
/// before a child is touched); non-finite draws are then tolerated up to
/// [`INSTABILITY_LIMIT`] and excluded from the mean. When constants are
/// supplied, any non-finite function output is an error.
fn generate(
    spec: &SemSpec,
    centers: Option<&[f64]>,
    n: usize,
    seed: u64,
    centering_pass: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let dag = spec.dag()?;
    let order = dag.topological_order();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); spec.p];
    let mut centers_out = vec![0.0; spec.edges.len()];

    for &j in &order {
        let mut rng_j = rng::stream(seed, "noise", j as u64);
        let sigma = spec.sigmas[j];
        let mut col: Vec<f64> = (0..n)
            .map(|_| sigma * rng_j.sample::<f64, _>(StandardNormal))
            .collect();

        for (e_idx, edge) in spec.edges.iter().enumerate() {
            if edge.to != j {
                continue;
            }
            let parent = &columns[edge.from];
            debug_assert_eq!(parent.len(), n, "topological order broke parent fill");
            let center = match centers {
                Some(cs) => cs[e_idx],
                None => {
                    let mut sum = 0.0;
                    let mut finite = 0usize;
                    for &x in parent.iter() {
                        let v = edge.eval(x);
                        if v.is_finite() {
                            sum += v;
                            finite += 1;
                        }
                    }
                    let bad = n - finite;
                    if (bad as f64) > INSTABILITY_LIMIT * n as f64 {
                        return Err(Error::Sem(format!(
                            "centering for edge {} -> {} unstable: {} of {} draws non-finite",
                            edge.from + 1,
                            edge.to + 1,
                            bad,
                            n
                        )));
                    }
                    let c = sum / finite as f64;
                    centers_out[e_idx] = c;
                    c
                }
            };
            for (i, slot) in col.iter_mut().enumerate() {
                let v = edge.eval(parent[i]) - center;
                if !v.is_finite() {
                    if centering_pass {
                        continue;
                    }
                    return Err(Error::Sem(format!(
                        "edge function {} -> {} ({}) produced a non-finite value at x = {}",
                        edge.from + 1,
                        edge.to + 1,
                        edge.function.tag(),
                        parent[i]
                    )));
                }
                *slot += v;
            }
        }
        columns[j] = col;
    }
    Ok((columns, centers_out))
}

/// Monte-Carlo estimate of `E[f(X)]` under an arbitrary parent marginal
/// given by `sampler`. Errors if more than 0.1% of the `m >= 10^4` draws
/// are non-finite.
pub fn center_constant_mc<F>(
    function: &EdgeFunction,
    scale: f64,
    mut sampler: F,
    m: usize,
    seed: u64,
) -> Result<f64>
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng) -> f64,
{
    if m < 10_000 {
        return Err(Error::Sem(format!(
            "centering needs at least 10^4 draws, got {}",
            m
        )));
    }
    let mut r = rng::stream(seed, "center-mc", 0);
    let mut sum = 0.0;
    let mut finite = 0usize;
    for _ in 0..m {
        let x = sampler(&mut r);
        let v = scale * function.eval(x);
        if v.is_finite() {
            sum += v;
            finite += 1;
        }
    }
    let bad = m - finite;
    if (bad as f64) > INSTABILITY_LIMIT * m as f64 {
        return Err(Error::Sem(format!(
            "centering unstable: {} of {} draws non-finite",
            bad, m
        )));
    }
    Ok(sum / finite as f64)
}

/// Closed-form `E[f(X)]` for `X ~ N(0, sigma^2)` where available.
pub fn gaussian_center(function: &EdgeFunction, sigma: f64) -> Option<f64> {
    let s2 = sigma * sigma;
    match function {
        // odd functions of a symmetric variable
        EdgeFunction::Sin
        | EdgeFunction::SinSin
        | EdgeFunction::SinTwentyOverX
        | EdgeFunction::Cubic => Some(0.0),
        EdgeFunction::Square => Some(s2),
        EdgeFunction::Abs => Some(sigma * (2.0 / std::f64::consts::PI).sqrt()),
        EdgeFunction::Exp => Some((0.5 * s2).exp()),
        // E[cos X] = exp(-sigma^2/2), E[sin X] = 0
        EdgeFunction::CosMix => Some(0.5 * (-0.5 * s2).exp()),
        EdgeFunction::ArctanSq => None,
        // E[exp(-(X-k)^2)] = exp(-k^2/(1+2s^2)) / sqrt(1+2s^2)
        EdgeFunction::Radial { knots, coeffs } => {
            let denom = 1.0 + 2.0 * s2;
            Some(
                knots
                    .iter()
                    .zip(coeffs)
                    .map(|(k, c)| c * (-k * k / denom).exp() / denom.sqrt())
                    .sum(),
            )
        }
    }
}

/// Heteroscedastic noise levels: `sigma_j ~ Beta(1, mu0) * 0.5 + 0.5`,
/// uniform on [0.5, 1] at `mu0 = 1` and concentrating toward 0.5 as `mu0`
/// grows.
pub fn heteroscedastic_sigmas(p: usize, mu0: f64, seed: u64) -> Result<Vec<f64>> {
    let beta = Beta::new(1.0, mu0)
        .map_err(|e| Error::Sem(format!("invalid Beta parameter mu0 = {}: {}", mu0, e)))?;
    let mut r = rng::stream(seed, "sigmas", 0);
    Ok((0..p).map(|_| beta.sample(&mut r) * 0.5 + 0.5).collect())
}

/// The introductory five-node example model: `X2 = X1^2 - E[X1^2] + z2`,
/// `X3 = 2 X1^2 - E[2 X1^2] + h(X2) - E[h(X2)] + z3`, with `X1, X4, X5`
/// independent `N(0, 0.5^2)` roots.
pub fn example_model(h: EdgeFunction, sigma2: f64, sigma3: f64, seed: u64) -> Result<SemSpec> {
    SemSpec::new(
        5,
        vec![
            EdgeSpec::new(0, 1, EdgeFunction::Square),
            EdgeSpec::scaled(0, 2, EdgeFunction::Square, 2.0),
            EdgeSpec::new(1, 2, h),
        ],
        vec![0.5, sigma2, sigma3, 0.5, 0.5],
        seed,
    )
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SemSpecJson {
    p: usize,
    edges: Vec<EdgeJson>,
    sigmas: Vec<f64>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    #[serde(rename = "fn")]
    function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<EdgeParamsJson>,
}

#[derive(Serialize, Deserialize, Default)]
struct EdgeParamsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
}

impl SemSpec {
    pub fn to_json_string(&self) -> Result<String> {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut params = EdgeParamsJson::default();
                if e.scale != 1.0 {
                    params.scale = Some(e.scale);
                }
                if let EdgeFunction::Radial { knots, coeffs } = &e.function {
                    params.knots = Some(knots.clone());
                    params.coeffs = Some(coeffs.clone());
                }
                let has_params =
                    params.scale.is_some() || params.knots.is_some() || params.coeffs.is_some();
                EdgeJson {
                    from: e.from + 1,
                    to: e.to + 1,
                    function: e.function.tag().to_string(),
                    params: has_params.then_some(params),
                }
            })
            .collect();
        let json = SemSpecJson {
            p: self.p,
            edges,
            sigmas: self.sigmas.clone(),
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json_str(s: &str) -> Result<SemSpec> {
        let json: SemSpecJson = serde_json::from_str(s)?;
        let mut edges = Vec::with_capacity(json.edges.len());
        for e in &json.edges {
            if e.from == 0 || e.to == 0 {
                return Err(Error::InvalidInput(
                    "SEM spec JSON uses 1-indexed nodes; found index 0".into(),
                ));
            }
            let params = e.params.as_ref();
            let function = match e.function.as_str() {
                "sin" => EdgeFunction::Sin,
                "cos_mix" => EdgeFunction::CosMix,
                "sin_sin" => EdgeFunction::SinSin,
                "sin_20_over_x" => EdgeFunction::SinTwentyOverX,
                "square" => EdgeFunction::Square,
                "abs" => EdgeFunction::Abs,
                "arctan_sq" => EdgeFunction::ArctanSq,
                "exp" => EdgeFunction::Exp,
                "cubic" => EdgeFunction::Cubic,
                "radial" => {
                    let knots = params
                        .and_then(|p| p.knots.clone())
                        .ok_or_else(|| Error::InvalidInput("radial edge needs knots".into()))?;
                    let coeffs = params
                        .and_then(|p| p.coeffs.clone())
                        .ok_or_else(|| Error::InvalidInput("radial edge needs coeffs".into()))?;
                    if knots.len() != coeffs.len() {
                        return Err(Error::InvalidInput(
                            "radial edge knots and coeffs must have equal length".into(),
                        ));
                    }
                    EdgeFunction::Radial { knots, coeffs }
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown edge function tag {:?}",
                        other
                    )))
                }
            };
            let scale = params.and_then(|p| p.scale).unwrap_or(1.0);
            edges.push(EdgeSpec::scaled(e.from - 1, e.to - 1, function, scale));
        }
        SemSpec::new(json.p, edges, json.sigmas, json.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_gaussian_moments() {
        let spec = SemSpec::new(3, vec![], vec![1.0; 3], 7).unwrap();
        let data = sample(&spec, 100_000, 42).unwrap();
        for j in 0..3 {
            let col = data.column(j);
            let mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
            let var: f64 =
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.02, "mean {} too large", mean);
            assert!((var - 1.0).abs() < 0.03, "variance {} off", var);
        }
    }

    #[test]
    fn example_model_x2_is_centered() {
        let spec = example_model(EdgeFunction::Sin, 0.1, 0.3, 3).unwrap();
        let data = sample(&spec, 100_000, 11).unwrap();
        let col = data.column(1);
        let mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
        // X1^2 - 0.25 centers E[X1^2] = 0.25 for X1 ~ N(0, 0.5^2)
        assert!(mean.abs() < 0.02, "X2 mean {} not near 0", mean);
    }

    #[test]
    fn same_seed_bit_identical_different_seed_differs() {
        let spec = example_model(EdgeFunction::Sin, 0.1, 0.3, 5).unwrap();
        let a = sample(&spec, 200, 9).unwrap();
        let b = sample(&spec, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = sample(&spec, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cyclic_spec_rejected() {
        let spec = SemSpec {
            p: 2,
            edges: vec![
                EdgeSpec::new(0, 1, EdgeFunction::Sin),
                EdgeSpec::new(1, 0, EdgeFunction::Sin),
            ],
            sigmas: vec![1.0, 1.0],
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        assert!(SemSpec::new(1, vec![], vec![0.0], 0).is_err());
    }

    #[test]
    fn analytic_centers() {
        assert_eq!(
            gaussian_center(&EdgeFunction::Square, 0.5),
            Some(0.25),
            "E[X^2] = sigma^2"
        );
        assert_eq!(gaussian_center(&EdgeFunction::Sin, 1.0), Some(0.0));
        assert_eq!(gaussian_center(&EdgeFunction::Cubic, 2.0), Some(0.0));
    }

    /// Gauss-Hermite quadrature of E[f(X)] for X ~ N(0, sigma^2),
    /// independent of the Monte-Carlo path.
    fn gauss_hermite(f: impl Fn(f64) -> f64, sigma: f64) -> f64 {
        // 20-point rule computed via Newton iteration on Hermite polynomials
        let n = 20;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        // initial guesses from Stroud & Secrest-style asymptotics
        for i in 0..n {
            let mut x = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => nodes[0] - 1.14 * (n as f64).powf(0.426) / nodes[0],
                2 => 1.86 * nodes[1] - 0.86 * nodes[0],
                3 => 1.91 * nodes[2] - 0.91 * nodes[1],
                _ => 2.0 * nodes[i - 1] - nodes[i - 2],
            };
            // Newton on physicists' Hermite H_n
            for _ in 0..100 {
                let (mut h0, mut h1) = (1.0f64, 2.0 * x);
                for k in 2..=n {
                    let h2 = 2.0 * x * h1 - 2.0 * (k as f64 - 1.0) * h0;
                    h0 = h1;
                    h1 = h2;
                }
                let dh = 2.0 * n as f64 * h0;
                let step = h1 / dh;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (mut h0, mut h1) = (1.0f64, 2.0 * x);
            for k in 2..n {
                let h2 = 2.0 * x * h1 - 2.0 * (k as f64 - 1.0) * h0;
                h0 = h1;
                h1 = h2;
            }
            // weight = 2^(n-1) n! sqrt(pi) / (n^2 H_{n-1}(x)^2)
            let mut log_w = (n as f64 - 1.0) * std::f64::consts::LN_2
                + (1..=n).map(|k| (k as f64).ln()).sum::<f64>()
                + 0.5 * std::f64::consts::PI.ln();
            log_w -= 2.0 * (n as f64).ln() + 2.0 * h1.abs().ln();
            nodes.push(x);
            weights.push(log_w.exp());
        }
        // symmetric negative nodes
        let mut total = 0.0;
        for i in 0..n {
            let t = nodes[i];
            for s in [t, -t] {
                // integral f(sqrt(2) sigma t) w(t) / sqrt(pi), halve since we
                // double-count via +-
                total += 0.5 * weights[i] * f(std::f64::consts::SQRT_2 * sigma * s);
            }
        }
        total / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn mc_center_matches_quadrature_for_sin() {
        let oracle = gauss_hermite(|x| x.sin(), 1.0);
        assert!(oracle.abs() < 1e-12, "sin quadrature should vanish");
        let mc = center_constant_mc(
            &EdgeFunction::Sin,
            1.0,
            |r| r.sample::<f64, _>(StandardNormal),
            1_000_000,
            13,
        )
        .unwrap();
        assert!((mc - oracle).abs() < 3e-3, "mc {} vs oracle {}", mc, oracle);
    }

    #[test]
    fn quadrature_validates_radial_closed_form() {
        let f = EdgeFunction::Radial {
            knots: vec![0.3, -0.7],
            coeffs: vec![1.0, 2.0],
        };
        let analytic = gaussian_center(&f, 0.8).unwrap();
        let quad = gauss_hermite(|x| f.eval(x), 0.8);
        assert!(
            (analytic - quad).abs() < 1e-9,
            "analytic {} vs quadrature {}",
            analytic,
            quad
        );
    }

    #[test]
    fn quadrature_validates_exp_and_cosmix() {
        for (f, sigma) in [(EdgeFunction::Exp, 0.7), (EdgeFunction::CosMix, 0.9)] {
            let analytic = gaussian_center(&f, sigma).unwrap();
            let quad = gauss_hermite(|x| f.eval(x), sigma);
            assert!(
                (analytic - quad).abs() < 1e-8,
                "{:?}: analytic {} vs quadrature {}",
                f,
                analytic,
                quad
            );
        }
    }

    #[test]
    fn simpson_validates_abs_center() {
        // E|X| by Simpson on [0, 10 sigma] of 2 x phi(x); Gauss-Hermite
        // converges poorly for the kink at zero
        let sigma: f64 = 1.3;
        let steps = 20_000;
        let hi = 10.0 * sigma;
        let h = hi / steps as f64;
        let phi = |x: f64| {
            (-(x * x) / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let f = |x: f64| 2.0 * x * phi(x);
        let mut acc = f(0.0) + f(hi);
        for i in 1..steps {
            let x = i as f64 * h;
            acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = acc * h / 3.0;
        let analytic = gaussian_center(&EdgeFunction::Abs, sigma).unwrap();
        assert!(
            (analytic - oracle).abs() < 1e-9,
            "analytic {} vs simpson {}",
            analytic,
            oracle
        );
    }

    #[test]
    fn center_mc_rejects_small_m() {
        assert!(center_constant_mc(&EdgeFunction::Sin, 1.0, |_| 0.5, 100, 0).is_err());
    }

    #[test]
    fn residual_variance_matches_sigma() {
        // regressing X2 on the true centered parent function recovers
        // sigma^2 within 5% at n = 1e5
        let spec = example_model(EdgeFunction::Sin, 0.1, 0.3, 21).unwrap();
        let centers = edge_centers(&spec).unwrap();
        let data = sample_with_centers(&spec, &centers, 100_000, 77).unwrap();
        let x1 = data.column(0);
        let x2 = data.column(1);
        let resid: Vec<f64> = x1
            .iter()
            .zip(x2)
            .map(|(&a, &b)| b - (a * a - centers.0[0]))
            .collect();
        let var = resid.iter().map(|v| v * v).sum::<f64>() / resid.len() as f64;
        assert!(
            (var - 0.01).abs() < 0.0005,
            "residual variance {} should be near 0.01",
            var
        );
    }

    #[test]
    fn sin_20_over_x_guard() {
        assert_eq!(EdgeFunction::SinTwentyOverX.eval(1e-13), 0.0);
        assert!(EdgeFunction::SinTwentyOverX.eval(2.0).is_finite());
    }

    #[test]
    fn heteroscedastic_sigma_range() {
        let sigmas = heteroscedastic_sigmas(100, 2.0, 5).unwrap();
        assert!(sigmas.iter().all(|&s| (0.5..=1.0).contains(&s)));
        let again = heteroscedastic_sigmas(100, 2.0, 5).unwrap();
        assert_eq!(sigmas, again);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = example_model(EdgeFunction::Sin, 0.1, 0.3, 3).unwrap();
        let s = spec.to_json_string().unwrap();
        let back = SemSpec::from_json_str(&s).unwrap();
        assert_eq!(spec, back);
        // radial edge too
        let spec2 = SemSpec::new(
            2,
            vec![EdgeSpec::new(
                0,
                1,
                EdgeFunction::Radial {
                    knots: vec![0.0, 1.0],
                    coeffs: vec![0.5, -0.5],
                },
            )],
            vec![1.0, 1.0],
            9,
        )
        .unwrap();
        let s2 = spec2.to_json_string().unwrap();
        assert_eq!(SemSpec::from_json_str(&s2).unwrap(), spec2);
    }

    #[test]
    fn csv_round_trip() {
        let spec = SemSpec::new(2, vec![], vec![1.0, 2.0], 1).unwrap();
        let data = sample(&spec, 50, 4).unwrap();
        let csv = data.to_csv_string();
        let back = Dataset::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(back, data);
    }
}
