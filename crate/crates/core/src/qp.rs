//! Dense convex quadratic programming with certified lower bounds.
//!
//! Solves `min 1/2 x'Qx + c'x  s.t.  Ax <= b` (Q symmetric PSD) with an
//! infeasible-start primal-dual interior-point method. Besides the primal
//! point, the solver returns a *certified* lower bound on the optimum,
//! valid regardless of convergence quality: for any multipliers `z >= 0`
//! and any point `x`, weak duality plus the gradient inequality of the
//! convex Lagrangian give
//!
//! ```text
//! opt >= L(x, z) + min_{y in box} grad L(x, z)' (y - x)
//! ```
//!
//! where `box` is any box known to contain the optimum. Branch-and-bound
//! builds its node bounds from this certificate, so bound validity never
//! depends on how far the interior-point iteration got.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// A dense inequality-constrained QP.
#[derive(Debug, Clone)]
pub struct QpProblem {
    /// Number of variables.
    pub n: usize,
    /// Row-major n x n symmetric PSD matrix (the 1/2 x'Qx convention).
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    /// Constant added to the objective (so bounds line up with callers).
    pub constant: f64,
    /// Row-major m x n constraint matrix for `Ax <= b`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Box certain to contain the optimum (finite; used for certificates).
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl QpProblem {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        if self.q.len() != self.n * self.n
            || self.c.len() != self.n
            || self.a.len() != self.m() * self.n
            || self.lo.len() != self.n
            || self.hi.len() != self.n
        {
            return Err(Error::Solve("qp shape mismatch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers for the rows of `A` (nonnegative).
    pub z: Vec<f64>,
    /// Objective at `x`, including the constant.
    pub primal_value: f64,
    /// Certified lower bound on the optimum, including the constant.
    pub certified_lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_ITERS: usize = 100;
const STEP_FRACTION: f64 = 0.995;

/// Solve to the given tolerance (complementarity and residual scale).
pub fn solve(problem: &QpProblem, tol: f64) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.n;
    let m = problem.m();

    let q = DMatrix::from_row_slice(n, n, &problem.q);
    let c = DVector::from_column_slice(&problem.c);
    let a = DMatrix::from_row_slice(m, n, &problem.a);
    let b = DVector::from_column_slice(&problem.b);

    // start at the box midpoint; slacks padded into the interior
    let mut x = DVector::from_fn(n, |i, _| {
        let (lo, hi) = (problem.lo[i], problem.hi[i]);
        if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            0.0
        }
    });

    if m == 0 {
        // unconstrained: a single regularized Newton solve
        let reg = 1e-12 * (1.0 + q.amax());
        let mut qr = q.clone();
        for i in 0..n {
            qr[(i, i)] += reg;
        }
        if let Some(chol) = Cholesky::new(qr) {
            x = chol.solve(&(-&c));
        }
        let value = eval_objective(problem, &q, &c, &x);
        let lower = certificate(problem, &q, &c, &a, &b, &x, &DVector::zeros(0));
        return Ok(QpSolution {
            x: x.iter().copied().collect(),
            z: Vec::new(),
            primal_value: value,
            certified_lower: lower,
            iterations: 0,
            converged: true,
        });
    }

    let ax = &a * &x;
    let mut s = DVector::from_fn(m, |i, _| (b[i] - ax[i]).max(1.0));
    let mut z = DVector::from_element(m, 1.0);

    let b_scale = 1.0 + b.amax();
    let c_scale = 1.0 + c.amax();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        let rd = &q * &x + &c + a.transpose() * &z;
        let rp = &a * &x + &s - &b;
        let mu = s.dot(&z) / m as f64;

        if mu <= tol && rp.amax() <= tol * b_scale && rd.amax() <= tol * c_scale {
            converged = true;
            break;
        }

        // normal matrix Q + A' diag(z/s) A with static regularization
        let d: DVector<f64> = DVector::from_fn(m, |i, _| (z[i] / s[i]).clamp(1e-12, 1e14));
        let mut normal = q.clone();
        for i in 0..m {
            let di = d[i];
            if di == 0.0 {
                continue;
            }
            for p_col in 0..n {
                let aip = a[(i, p_col)];
                if aip == 0.0 {
                    continue;
                }
                for p_row in 0..n {
                    normal[(p_row, p_col)] += a[(i, p_row)] * di * aip;
                }
            }
        }
        let mut reg = 1e-12 * (1.0 + normal.amax());
        let chol = loop {
            let mut nr = normal.clone();
            for i in 0..n {
                nr[(i, i)] += reg;
            }
            match Cholesky::new(nr) {
                Some(ch) => break ch,
                None => {
                    reg *= 100.0;
                    if reg > 1e6 {
                        return Err(Error::Solve(
                            "interior-point normal matrix not factorizable".into(),
                        ));
                    }
                }
            }
        };

        let solve_step = |rhs_c: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            // dz = (rhs_c + z.rp)/s + D A dx ; ds = -rp - A dx
            let w = DVector::from_fn(m, |i, _| (rhs_c[i] + z[i] * rp[i]) / s[i]);
            let rhs = -&rd - a.transpose() * &w;
            let dx = chol.solve(&rhs);
            let adx = &a * &dx;
            let dz = DVector::from_fn(m, |i, _| w[i] + d[i] * adx[i]);
            let ds = -&rp - adx;
            (dx, ds, dz)
        };

        // predictor
        let rhs_aff = DVector::from_fn(m, |i, _| -s[i] * z[i]);
        let (_dx_aff, ds_aff, dz_aff) = solve_step(&rhs_aff);
        let alpha_p_aff = max_step(&s, &ds_aff);
        let alpha_d_aff = max_step(&z, &dz_aff);
        let mu_aff = {
            let mut acc = 0.0;
            for i in 0..m {
                acc += (s[i] + alpha_p_aff * ds_aff[i]) * (z[i] + alpha_d_aff * dz_aff[i]);
            }
            acc / m as f64
        };
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let rhs_cor =
            DVector::from_fn(m, |i, _| -s[i] * z[i] + sigma * mu - ds_aff[i] * dz_aff[i]);
        let (dx, ds, dz) = solve_step(&rhs_cor);

        let alpha_p = STEP_FRACTION * max_step(&s, &ds);
        let alpha_d = STEP_FRACTION * max_step(&z, &dz);
        x += alpha_p * &dx;
        s += alpha_p * &ds;
        z += alpha_d * &dz;
    }

    let value = eval_objective(problem, &q, &c, &x);
    let lower = certificate(problem, &q, &c, &a, &b, &x, &z);
    Ok(QpSolution {
        x: x.iter().copied().collect(),
        z: z.iter().copied().collect(),
        primal_value: value,
        certified_lower: lower,
        iterations,
        converged,
    })
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

fn eval_objective(problem: &QpProblem, q: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(q * x)) + c.dot(x) + problem.constant
}

/// Weak-duality certificate over the enclosing box; see the module docs.
fn certificate(
    problem: &QpProblem,
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    let m = z.len();
    let mut lagrangian = eval_objective(problem, q, c, x);
    let mut grad = q * x + c;
    if m > 0 {
        let ax = a * x;
        for i in 0..m {
            let zi = z[i].max(0.0);
            lagrangian += zi * (ax[i] - b[i]);
        }
        for i in 0..m {
            let zi = z[i].max(0.0);
            if zi != 0.0 {
                for v in 0..problem.n {
                    grad[v] += zi * a[(i, v)];
                }
            }
        }
    }
    let mut bound = lagrangian;
    for v in 0..problem.n {
        let g = grad[v];
        if g > 0.0 {
            bound += g * (problem.lo[v] - x[v]);
        } else if g < 0.0 {
            bound += g * (problem.hi[v] - x[v]);
        }
        if !bound.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    bound
}
