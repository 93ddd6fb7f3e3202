//! Ordered and between-class moduli of continuity.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::seqmodel::{dot, Grid, LinearFunctional};
use crate::solver::{self, IpmOptions, IpmProblem};
use crate::spaces::{ConvexSetOracle, Polyhedron};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Numeric,
    Projection,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Numeric => "numeric",
            Method::Projection => "projection",
        }
    }
}

/// Which ordered modulus attained the between-class value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `sup Tg - Tf`, `f in F`, `g in G`.
    FG,
    /// `sup Tf - Tg`.
    GF,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::FG => "FG",
            Direction::GF => "GF",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModulusResult {
    pub value: f64,
    pub f_star: Vec<f64>,
    pub g_star: Vec<f64>,
    pub epsilon: f64,
    pub feasibility_gap: f64,
    pub method: Method,
    pub direction: Direction,
    /// Derivative of the modulus in `epsilon` at the solution, when known.
    pub slope: Option<f64>,
    pub converged: bool,
}

impl ModulusResult {
    /// `|g* - f*|`.
    pub fn separation(&self) -> f64 {
        self.f_star.iter().zip(&self.g_star).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModulusOptions {
    pub ipm: IpmOptions,
    /// Tolerance of the projection route.
    pub projection_tol: f64,
    pub projection_max_iter: usize,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions { ipm: IpmOptions::default(), projection_tol: 1e-10, projection_max_iter: 200_000 }
    }
}

/// Strictly interior point shared by all polyhedra, of the form `s * r`
/// with `r` a decreasing ramp; `0` when that is already interior.
pub(crate) fn common_interior(polys: &[&Polyhedron], cap: f64) -> Result<Vec<f64>> {
    let d = polys[0].dim;
    if polys.iter().all(|p| p.zero_is_interior()) {
        return Ok(vec![0.0; d]);
    }
    let grid = Grid::new(d)?;
    let dir: Vec<f64> = grid.t.iter().map(|t| -grid.scale() * t).collect();
    let mut lim = f64::INFINITY;
    for p in polys {
        match p.ray_limit(&dir) {
            Some(l) => lim = lim.min(l),
            None => return Err(Error::Unsupported("no common interior point along the ramp".into())),
        }
    }
    let s = (0.5 * lim).min(cap);
    let x: Vec<f64> = dir.iter().map(|v| s * v).collect();
    Ok(x)
}

fn check_dims(f: &dyn ConvexSetOracle, g: &dyn ConvexSetOracle, w: &LinearFunctional) -> Result<usize> {
    let d = w.dim();
    if f.dim() != d || g.dim() != d {
        return input(format!("dimension mismatch: functional {d}, classes {} and {}", f.dim(), g.dim()));
    }
    Ok(d)
}

/// `sup { Tg - Tf : |g - f| <= eps, f in F, g in G }`.
pub fn ordered_modulus(
    f: &dyn ConvexSetOracle,
    g: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<ModulusResult> {
    let d = check_dims(f, g, w)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return input(format!("epsilon must be positive, got {eps}"));
    }
    match (f.polyhedron(), g.polyhedron()) {
        (Some(pf), Some(pg)) => ordered_modulus_ipm(pf, pg, w, eps, d, opts),
        _ => ordered_modulus_projection(f, g, w, eps, opts),
    }
}

fn ordered_modulus_ipm(
    pf: &Polyhedron,
    pg: &Polyhedron,
    w: &LinearFunctional,
    eps: f64,
    d: usize,
    opts: &ModulusOptions,
) -> Result<ModulusResult> {
    let start = common_interior(&[pf, pg], 0.25 * eps)?;
    let mut z0 = start.clone();
    z0.extend_from_slice(&start);
    for k in 0..d {
        if pf.fixed_zero[k] {
            z0[k] = 0.0;
        }
        if pg.fixed_zero[k] {
            z0[d + k] = 0.0;
        }
    }
    let mut c: Vec<f64> = w.w.clone();
    c.extend(w.w.iter().map(|v| -v));
    let prob = IpmProblem { blocks: vec![pf, pg], c, ball: Some(eps), bound: None };
    let sol = solver::solve(&prob, &z0, opts.ipm)?;
    let f_star = sol.z[..d].to_vec();
    let g_star = sol.z[d..].to_vec();
    let value = dot(&w.w, &g_star) - dot(&w.w, &f_star);
    let sep = f_star.iter().zip(&g_star).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let feasibility_gap = pf.violation(&f_star).max(pg.violation(&g_star)).max(sep - eps).max(0.0);
    Ok(ModulusResult {
        value,
        f_star,
        g_star,
        epsilon: eps,
        feasibility_gap,
        method: Method::Numeric,
        direction: Direction::FG,
        slope: Some(sol.ball_multiplier * eps),
        converged: sol.converged,
    })
}

/// Projection route for sets known only through their projections.
///
/// For `lambda > 0` the nearest point of `G - F` to `lambda w` is found by
/// alternating projections; its norm `e` and `<w, h>` give `omega(e)`
/// exactly. `lambda` is then tuned until `e` matches `eps`.
pub fn ordered_modulus_projection(
    f: &dyn ConvexSetOracle,
    g: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<ModulusResult> {
    check_dims(f, g, w)?;
    let d = w.dim();
    let wn = w.norm();
    let mut fx = vec![0.0; d];
    let mut gx = vec![0.0; d];
    let best_pair = |lambda: f64, fx: &mut Vec<f64>, gx: &mut Vec<f64>| -> (f64, bool) {
        let mut converged = false;
        for _ in 0..opts.projection_max_iter {
            let shifted: Vec<f64> = gx.iter().zip(&w.w).map(|(a, b)| a - lambda * b).collect();
            let nf = f.project(&shifted);
            let target: Vec<f64> = nf.iter().zip(&w.w).map(|(a, b)| a + lambda * b).collect();
            let ng = g.project(&target);
            let moved = nf.iter().zip(fx.iter()).chain(ng.iter().zip(gx.iter())).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            *fx = nf;
            *gx = ng;
            if moved < opts.projection_tol * (1.0 + lambda * wn) {
                converged = true;
                break;
            }
        }
        let e = fx.iter().zip(gx.iter()).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        (e, converged)
    };
    // bracket lambda: e(lambda) is nondecreasing
    let mut lo = 0.0;
    let mut hi = eps / wn;
    let mut converged_all = true;
    loop {
        let (e, ok) = best_pair(hi, &mut fx, &mut gx);
        converged_all &= ok;
        if e >= eps || hi > 1e12 {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (e, ok) = best_pair(mid, &mut fx, &mut gx);
        converged_all &= ok;
        if e > eps {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-13 * hi {
            break;
        }
    }
    let (e, ok) = best_pair(lo.max(f64::MIN_POSITIVE), &mut fx, &mut gx);
    converged_all &= ok;
    let value = dot(&w.w, &gx) - dot(&w.w, &fx);
    let lambda = lo;
    let gap = (e - eps).max(0.0);
    Ok(ModulusResult {
        value,
        f_star: fx,
        g_star: gx,
        epsilon: eps,
        feasibility_gap: gap,
        method: Method::Projection,
        direction: Direction::FG,
        slope: if lambda > 0.0 { Some(e / lambda) } else { None },
        converged: converged_all,
    })
}

/// `max(omega(eps, F, G), omega(eps, G, F))`, ties toward `F -> G`.
pub fn between_modulus(
    f: &dyn ConvexSetOracle,
    g: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<ModulusResult> {
    let fg = ordered_modulus(f, g, w, eps, opts)?;
    if same_set(f, g) {
        return Ok(fg);
    }
    let gf = ordered_modulus(g, f, w, eps, opts)?;
    if gf.value > fg.value {
        // report the pair in (F, G) order
        Ok(ModulusResult { f_star: gf.g_star, g_star: gf.f_star, direction: Direction::GF, ..gf })
    } else {
        Ok(fg)
    }
}

fn same_set(f: &dyn ConvexSetOracle, g: &dyn ConvexSetOracle) -> bool {
    match (f.descriptor(), g.descriptor()) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// Between-class modulus of `F` against a finite union `G = U_j G_j`:
/// `max_j omega_+(eps, F, G_j)`.
pub fn between_modulus_union(
    f: &dyn ConvexSetOracle,
    union: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<ModulusResult> {
    let mut best: Option<ModulusResult> = None;
    for g in union {
        let r = between_modulus(f, *g, w, eps, opts)?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Input("empty union".into()))
}

/// `(2b+1)^{1/(2b+1)} M^{1/(2b+1)} eps^{2b/(2b+1)}`, valid for
/// `M >= sqrt(2b+1) eps`.
pub fn lipschitz_modulus_closed_form(beta: f64, m: f64, eps: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) || !(m > 0.0) || !(eps > 0.0) {
        return input(format!("need 0 < beta <= 1, M > 0, eps > 0 (got {beta}, {m}, {eps})"));
    }
    let p = 2.0 * beta + 1.0;
    if m < p.sqrt() * eps * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("closed form needs M >= sqrt(2 beta + 1) eps; M = {m}, eps = {eps}")));
    }
    Ok(p.powf(1.0 / p) * m.powf(1.0 / p) * eps.powf(2.0 * beta / p))
}

/// `sqrt(|I u J|) eps` for coordinate subspaces and the sum functional.
pub fn sparse_modulus(i: &[usize], j: &[usize], eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return input(format!("epsilon must be nonnegative, got {eps}"));
    }
    let mut u: Vec<usize> = i.iter().chain(j).copied().collect();
    u.sort_unstable();
    u.dedup();
    Ok((u.len() as f64).sqrt() * eps)
}

/// [`sparse_modulus`] guarded by a check that `w` is the sum functional.
pub fn sparse_modulus_for(w: &LinearFunctional, i: &[usize], j: &[usize], eps: f64) -> Result<f64> {
    if w.w.iter().any(|&v| v != 1.0) {
        return Err(Error::Unsupported("closed-form sparse modulus needs the sum functional".into()));
    }
    sparse_modulus(i, j, eps)
}

/// Upper bound `b * omega_+(eps)` for `omega_+(b eps)`, `b >= 1`.
pub fn scaled_modulus_bound(omega_at_eps: f64, b: f64) -> Result<f64> {
    if !(b >= 1.0) {
        return input(format!("scale factor must be >= 1, got {b}"));
    }
    Ok(b * omega_at_eps)
}

#[derive(Debug, Clone)]
pub struct ModulusCurve {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub results: Vec<ModulusResult>,
    pub fitted_exponent: Option<f64>,
}

/// Least-squares slope of `log omega` against `log eps`.
pub fn fit_exponent(eps: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        eps.iter().zip(values).filter(|(e, v)| **e > 0.0 && **v > 0.0).map(|(e, v)| (e.ln(), v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Between-class moduli over an increasing grid of at least 4 points.
pub fn modulus_curve(
    f: &dyn ConvexSetOracle,
    g: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    eps_grid: &[f64],
    opts: &ModulusOptions,
    exec: crate::par::Execution,
) -> Result<ModulusCurve> {
    if eps_grid.len() < 4 {
        return input("modulus curve needs at least 4 grid points");
    }
    if eps_grid.windows(2).any(|p| !(p[1] > p[0])) || !(eps_grid[0] > 0.0) {
        return input("epsilon grid must be positive and strictly increasing");
    }
    let results = crate::par::try_map_range(eps_grid.len(), exec, |k| between_modulus(f, g, w, eps_grid[k], opts))?;
    let values: Vec<f64> = results.iter().map(|r| r.value).collect();
    let fitted_exponent = fit_exponent(eps_grid, &values);
    Ok(ModulusCurve { epsilons: eps_grid.to_vec(), values, results, fitted_exponent })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationCase {
    Case1,
    Case2,
    Case3,
    Case4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub case: AdaptationCase,
    /// A strongly adaptive interval exists (`q1 <= q12`).
    pub strongly_adaptive: bool,
}

/// Case of the cost of adaptation from the exponents `q1 = q(F1)`,
/// `q2 = q(F2)` and `q12 = q(F1, F)`. Comparisons use slack `tol`
/// (0 for exact exponents, larger for fitted ones).
pub fn classify_adaptation_case(q1: f64, q2: f64, q12: f64, tol: f64) -> Result<Classification> {
    for q in [q1, q2, q12] {
        if !(q > 0.0 && q <= 1.0 + tol) {
            return input(format!("exponents must lie in (0, 1], got {q}"));
        }
    }
    if q1 < q2 - tol {
        return input(format!("expects q1 >= q2, got q1 = {q1}, q2 = {q2}"));
    }
    let strongly_adaptive = q1 <= q12 + tol;
    let case = if strongly_adaptive {
        AdaptationCase::Case1
    } else if (q12 - q2).abs() <= tol {
        AdaptationCase::Case2
    } else if q12 > q2 {
        AdaptationCase::Case3
    } else {
        AdaptationCase::Case4
    };
    Ok(Classification { case, strongly_adaptive })
}
