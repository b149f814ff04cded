//! B-spline evaluation over a clamped knot vector.

use serde::{Deserialize, Serialize};

/// A univariate B-spline basis of a given degree with repeated boundary
/// knots at the training range, so the full basis has
/// `internal.len() + degree + 1` functions and sums to one on `[lo, hi]`.
///
/// Evaluation clamps the argument to the training range, which keeps
/// bootstrap resamples and test points from extrapolating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    lo: f64,
    hi: f64,
    internal: Vec<f64>,
    #[serde(skip)]
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(degree: usize, internal: Vec<f64>, lo: f64, hi: f64) -> Self {
        let mut basis = SplineBasis {
            degree,
            lo,
            hi,
            internal,
            knots: Vec::new(),
        };
        basis.rebuild_knots();
        basis
    }

    /// Recompute the expanded knot vector (needed after deserialization).
    pub fn rebuild_knots(&mut self) {
        let d = self.degree;
        let mut knots = Vec::with_capacity(self.internal.len() + 2 * (d + 1));
        knots.extend(std::iter::repeat(self.lo).take(d + 1));
        knots.extend(self.internal.iter().copied());
        knots.extend(std::iter::repeat(self.hi).take(d + 1));
        self.knots = knots;
    }

    /// Number of basis functions in the full set.
    pub fn count(&self) -> usize {
        self.internal.len() + self.degree + 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn internal_knots(&self) -> &[f64] {
        &self.internal
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Evaluate the full basis at `x` (clamped) into `out` of length
    /// [`SplineBasis::count`]. Cox-de Boor recursion on the d+1 functions
    /// that are nonzero on the containing span.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.count());
        out.fill(0.0);
        let d = self.degree;
        let x = x.clamp(self.lo, self.hi);
        let span = self.find_span(x);

        // values[j] holds N_{span-j, deg} during the triangular pass
        let mut values = vec![0.0f64; d + 1];
        let mut left = vec![0.0f64; d + 1];
        let mut right = vec![0.0f64; d + 1];
        values[0] = 1.0;
        for j in 1..=d {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        for (r, &v) in values.iter().enumerate() {
            out[span - d + r] = v;
        }
    }

    /// Index of the knot span containing `x`, with the closed right end
    /// folded into the last non-degenerate span.
    fn find_span(&self, x: f64) -> usize {
        let d = self.degree;
        let n = self.count();
        if x >= self.hi {
            return n - 1;
        }
        // binary search over knots[d..=n]
        let mut lo = d;
        let mut hi = n;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }
}
