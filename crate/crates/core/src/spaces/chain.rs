//! Exact Euclidean projection onto chain difference constraints
//! `lo[k] <= x[k] - x[k+1] <= hi[k]`.
//!
//! Dynamic programming over the derivative of the value function, kept as a
//! continuous nondecreasing piecewise-linear map. Each link applies a
//! window-minimum transform and then adds the next quadratic term. Cost is
//! O(d^2) in the worst case which is fine at the grid sizes used here.

/// Piecewise-linear derivative: knots with values plus end slopes.
struct Derivative {
    xs: Vec<f64>,
    vals: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

impl Derivative {
    fn quadratic(y: f64) -> Derivative {
        Derivative { xs: vec![y], vals: vec![0.0], left_slope: 1.0, right_slope: 1.0 }
    }

    /// A point where the derivative crosses zero.
    fn root(&self) -> f64 {
        let n = self.xs.len();
        if self.vals[0] >= 0.0 {
            if self.vals[0] == 0.0 || self.left_slope <= 0.0 {
                return self.xs[0];
            }
            return self.xs[0] - self.vals[0] / self.left_slope;
        }
        if self.vals[n - 1] <= 0.0 {
            if self.vals[n - 1] == 0.0 || self.right_slope <= 0.0 {
                return self.xs[n - 1];
            }
            return self.xs[n - 1] - self.vals[n - 1] / self.right_slope;
        }
        // first knot with value >= 0
        let k = self.vals.partition_point(|&v| v < 0.0);
        let (x0, v0, x1, v1) = (self.xs[k - 1], self.vals[k - 1], self.xs[k], self.vals[k]);
        if v1 == 0.0 {
            return x1;
        }
        x0 + (x1 - x0) * (-v0) / (v1 - v0)
    }

    /// Derivative of `u -> min_{x in [u+lo, u+hi]} V(x)` where `self = V'`.
    fn window_min(&self, z: f64, lo: f64, hi: f64) -> Derivative {
        let mut xs = Vec::with_capacity(self.xs.len() + 2);
        let mut vals = Vec::with_capacity(self.xs.len() + 2);
        let mut left_slope = 0.0;
        let mut right_slope = 0.0;
        if hi.is_finite() {
            for (&x, &v) in self.xs.iter().zip(&self.vals) {
                if x < z && v < 0.0 {
                    xs.push(x - hi);
                    vals.push(v);
                }
            }
            left_slope = self.left_slope;
            xs.push(z - hi);
            vals.push(0.0);
        }
        if lo.is_finite() {
            if !(hi.is_finite() && hi == lo) {
                xs.push(z - lo);
                vals.push(0.0);
            }
            for (&x, &v) in self.xs.iter().zip(&self.vals) {
                if x > z && v > 0.0 {
                    xs.push(x - lo);
                    vals.push(v);
                }
            }
            right_slope = self.right_slope;
        }
        if xs.is_empty() {
            xs.push(z);
            vals.push(0.0);
        }
        Derivative { xs, vals, left_slope, right_slope }
    }

    fn add_quadratic(&mut self, y: f64) {
        for (x, v) in self.xs.iter().zip(self.vals.iter_mut()) {
            *v += x - y;
        }
        self.left_slope += 1.0;
        self.right_slope += 1.0;
    }
}

/// Projects `y` onto `{x : lo[k] <= x[k] - x[k+1] <= hi[k]}`.
///
/// Infinite bounds are allowed; `lo[k] <= hi[k]` is required.
pub fn project_chain(y: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let d = y.len();
    if d == 0 {
        return Vec::new();
    }
    debug_assert_eq!(lo.len(), d - 1);
    debug_assert_eq!(hi.len(), d - 1);
    let mut minimizers = Vec::with_capacity(d);
    let mut deriv = Derivative::quadratic(y[0]);
    for k in 0..d - 1 {
        let z = deriv.root();
        minimizers.push(z);
        deriv = deriv.window_min(z, lo[k], hi[k]);
        deriv.add_quadratic(y[k + 1]);
    }
    let mut x = vec![0.0; d];
    x[d - 1] = deriv.root();
    for k in (0..d - 1).rev() {
        x[k] = minimizers[k].clamp(x[k + 1] + lo[k], x[k + 1] + hi[k]);
    }
    x
}
