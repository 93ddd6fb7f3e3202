//! Dykstra's method for intersections of slabs `lo <= x_i - x_j <= hi` and
//! coordinate bounds. For halfspace-type sets this is Hildreth's algorithm:
//! one scalar correction per constraint.

use super::polyhedron::Polyhedron;

/// Stopping rule for the cyclic sweeps.
#[derive(Debug, Clone, Copy)]
pub struct DykstraOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        DykstraOptions { tol: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub x: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Projects `y` onto the polyhedron by cyclic Dykstra sweeps.
pub fn project_polyhedron(poly: &Polyhedron, y: &[f64], opts: DykstraOptions) -> DykstraOutcome {
    let mut x: Vec<f64> = y.to_vec();
    for (i, v) in x.iter_mut().enumerate() {
        if poly.fixed_zero[i] {
            *v = 0.0;
        }
    }
    let mut pair_corr = vec![0.0; poly.pairs.len()];
    let mut box_corr = vec![0.0; x.len()];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut moved = 0.0f64;
        for (p, c) in poly.pairs.iter().zip(pair_corr.iter_mut()) {
            let (i, j) = (p.i as usize, p.j as usize);
            // undo previous correction, project onto slab, store new one
            let xi = x[i] + *c;
            let xj = x[j] - *c;
            let v = xi - xj;
            let nc = if v > p.hi {
                0.5 * (v - p.hi)
            } else if v < p.lo {
                0.5 * (v - p.lo)
            } else {
                0.0
            };
            let delta = nc - *c;
            if delta != 0.0 {
                moved = moved.max(delta.abs());
                x[i] = xi - nc;
                x[j] = xj + nc;
                *c = nc;
            }
        }
        for (i, c) in box_corr.iter_mut().enumerate() {
            let (lo, hi) = (poly.lower[i], poly.upper[i]);
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                continue;
            }
            let xi = x[i] + *c;
            let nxi = xi.clamp(lo, hi);
            let nc = xi - nxi;
            moved = moved.max((nc - *c).abs());
            x[i] = nxi;
            *c = nc;
        }
        if moved < opts.tol {
            converged = true;
            break;
        }
    }
    DykstraOutcome { x, sweeps, converged }
}
