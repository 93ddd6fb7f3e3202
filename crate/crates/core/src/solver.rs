//! Primal-dual interior point method with Mehrotra predictor-corrector
//! steps for
//!
//! ```text
//! minimize    c'z
//! subject to  z_k in P_k              (one polyhedron per block)
//!             |z_i| <= R              (optional, all free coordinates)
//!             0.5 |z_1 - z_0|^2 <= 0.5 eps^2   (optional, two blocks)
//! ```
//!
//! Iterates stay strictly feasible; the caller supplies an interior start.
//! The reduced Newton system is dense and factored by Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spaces::Polyhedron;

const NONE: u32 = u32::MAX;

/// Fraction of the average complementarity every product must keep.
const NEIGHBOURHOOD: f64 = 1e-3;

/// One linear inequality `sgn * (z[i] - z[j]) <= b` (or `sgn * z[i] <= b`
/// when `j == NONE`), in free-variable numbering.
#[derive(Debug, Clone, Copy)]
struct Row {
    i: u32,
    j: u32,
    sgn: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    /// Relative tolerance on the complementarity gap.
    pub gap_tol: f64,
    /// Tolerance on the dual residual, relative to `|c|_inf`.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions { gap_tol: 1e-11, residual_tol: 1e-7, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct IpmProblem<'a> {
    pub blocks: Vec<&'a Polyhedron>,
    pub c: Vec<f64>,
    /// Radius of the coupling ball between blocks 0 and 1.
    pub ball: Option<f64>,
    /// Bound on every free coordinate.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Multiplier of the ball constraint `0.5|h|^2 <= 0.5 eps^2`.
    pub ball_multiplier: f64,
    pub gap: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Layout {
    n: usize,
    free_of: Vec<u32>,
    global_of: Vec<usize>,
    offsets: Vec<usize>,
}

fn layout(blocks: &[&Polyhedron]) -> Layout {
    let mut free_of = Vec::new();
    let mut global_of = Vec::new();
    let mut offsets = Vec::new();
    let mut g = 0;
    for p in blocks {
        offsets.push(g);
        for k in 0..p.dim {
            if p.fixed_zero[k] {
                free_of.push(NONE);
            } else {
                free_of.push(global_of.len() as u32);
                global_of.push(g + k);
            }
        }
        g += p.dim;
    }
    Layout { n: g, free_of, global_of, offsets }
}

fn rows(prob: &IpmProblem, lay: &Layout) -> Vec<Row> {
    let mut rows = Vec::new();
    for (b, p) in prob.blocks.iter().enumerate() {
        let off = lay.offsets[b];
        for pb in &p.pairs {
            let i = lay.free_of[off + pb.i as usize];
            let j = lay.free_of[off + pb.j as usize];
            if i == NONE || j == NONE {
                // a pinned end turns the pair into a coordinate bound
                let (k, s) = if i == NONE { (j, -1.0) } else { (i, 1.0) };
                if k == NONE {
                    continue;
                }
                if pb.hi.is_finite() {
                    rows.push(Row { i: k, j: NONE, sgn: s, b: pb.hi });
                }
                if pb.lo.is_finite() {
                    rows.push(Row { i: k, j: NONE, sgn: -s, b: -pb.lo });
                }
                continue;
            }
            if pb.hi.is_finite() {
                rows.push(Row { i, j, sgn: 1.0, b: pb.hi });
            }
            if pb.lo.is_finite() {
                rows.push(Row { i, j, sgn: -1.0, b: -pb.lo });
            }
        }
        for k in 0..p.dim {
            let f = lay.free_of[off + k];
            if f == NONE {
                continue;
            }
            if p.upper[k].is_finite() {
                rows.push(Row { i: f, j: NONE, sgn: 1.0, b: p.upper[k] });
            }
            if p.lower[k].is_finite() {
                rows.push(Row { i: f, j: NONE, sgn: -1.0, b: -p.lower[k] });
            }
        }
    }
    if let Some(r) = prob.bound {
        for f in 0..lay.global_of.len() as u32 {
            rows.push(Row { i: f, j: NONE, sgn: 1.0, b: r });
            rows.push(Row { i: f, j: NONE, sgn: -1.0, b: r });
        }
    }
    rows
}

#[inline]
fn row_dot(r: &Row, x: &[f64]) -> f64 {
    if r.j == NONE {
        r.sgn * x[r.i as usize]
    } else {
        r.sgn * (x[r.i as usize] - x[r.j as usize])
    }
}

#[inline]
fn row_axpy(r: &Row, a: f64, out: &mut [f64]) {
    out[r.i as usize] += a * r.sgn;
    if r.j != NONE {
        out[r.j as usize] -= a * r.sgn;
    }
}

/// Ball data on free variables: indices of `(f_k, g_k)` pairs.
struct BallMap {
    eps: f64,
    pairs: Vec<(u32, u32)>,
}

impl BallMap {
    fn h(&self, x: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                let fa = if a == NONE { 0.0 } else { x[a as usize] };
                let gb = if b == NONE { 0.0 } else { x[b as usize] };
                gb - fa
            })
            .collect()
    }

    fn slack(&self, h: &[f64]) -> f64 {
        0.5 * (self.eps * self.eps - h.iter().map(|v| v * v).sum::<f64>())
    }

    /// Gradient of `0.5|h|^2` on free variables.
    fn gradient(&self, h: &[f64], n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (&(a, b), &hk) in self.pairs.iter().zip(h) {
            if a != NONE {
                g[a as usize] -= hk;
            }
            if b != NONE {
                g[b as usize] += hk;
            }
        }
        g
    }
}

/// Solves the problem from a strictly feasible start `z0` (global
/// numbering; pinned coordinates are ignored and returned as 0).
pub fn solve(prob: &IpmProblem, z0: &[f64], opts: IpmOptions) -> Result<IpmSolution> {
    let lay = layout(&prob.blocks);
    if z0.len() != lay.n || prob.c.len() != lay.n {
        return Err(Error::Input(format!("solver expects vectors of length {}", lay.n)));
    }
    let n = lay.global_of.len();
    let rows = rows(prob, &lay);
    let c: Vec<f64> = lay.global_of.iter().map(|&g| prob.c[g]).collect();
    let c_scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let ball = prob.ball.map(|eps| {
        assert!(prob.blocks.len() == 2 && prob.blocks[0].dim == prob.blocks[1].dim);
        let d = prob.blocks[0].dim;
        let pairs = (0..d).map(|k| (lay.free_of[k], lay.free_of[d + k])).collect();
        BallMap { eps, pairs }
    });
    let mut x: Vec<f64> = lay.global_of.iter().map(|&g| z0[g]).collect();
    let m_rows = rows.len();
    let m_total = m_rows + ball.is_some() as usize;

    let mut s: Vec<f64> = rows.iter().map(|r| r.b - row_dot(r, &x)).collect();
    if let Some(k) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Input(format!("start point is not strictly feasible (row {k}, slack {:.3e})", s[k])));
    }
    let mut h = ball.as_ref().map(|b| b.h(&x)).unwrap_or_default();
    let mut s_ball = ball.as_ref().map(|b| b.slack(&h)).unwrap_or(1.0);
    if !(s_ball > 0.0) {
        return Err(Error::Input("start point violates the coupling ball".into()));
    }

    let objective = |x: &[f64]| -> f64 { c.iter().zip(x).map(|(a, b)| a * b).sum() };
    if m_total == 0 {
        if c.iter().any(|&v| v != 0.0) {
            return Err(Error::Solver { message: "unbounded: no constraints".into(), best_value: f64::NEG_INFINITY });
        }
        return Ok(finish(&lay, x, 0.0, 0.0, 0.0, 0, true, 0.0));
    }

    // start with equal complementarity products on the scale of the
    // objective change: for the ball this matches the multiplier of the
    // unconstrained problem, |c| / (sqrt 2 eps)
    let cnorm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mu0 = match (prob.ball, prob.bound) {
        (Some(e), _) => (cnorm * e / 8f64.sqrt()).max(1e-300),
        (None, Some(r)) => (cnorm * r / m_total as f64).max(1e-300),
        _ => (cnorm / m_total as f64).max(1e-300),
    };
    let mut lam: Vec<f64> = s.iter().map(|&v| mu0 / v).collect();
    let mut lam_ball = mu0 / s_ball;

    let mut iter = 0;
    let mut gap = f64::INFINITY;
    let mut res_norm = f64::INFINITY;
    let mut converged = false;
    let mut kmat = DMatrix::<f64>::zeros(n, n);
    while iter < opts.max_iter {
        // dual residual r_d = c + sum lam_i a_i + lam_ball * grad
        let mut rd = c.clone();
        for (r, &l) in rows.iter().zip(&lam) {
            row_axpy(r, l, &mut rd);
        }
        let gball = ball.as_ref().map(|b| b.gradient(&h, n));
        if let Some(g) = &gball {
            for (a, b) in rd.iter_mut().zip(g) {
                *a += lam_ball * b;
            }
        }
        gap = lam.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() + if ball.is_some() { lam_ball * s_ball } else { 0.0 };
        res_norm = rd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // ball slack is a free variable tied to the constraint by r_p = 0
        let r_p = match &ball {
            Some(b) => -b.slack(&h) + s_ball,
            None => 0.0,
        };
        let ball_tol = ball.as_ref().map(|b| 1e-11 * b.eps * b.eps).unwrap_or(0.0);
        let obj = objective(&x);
        if gap <= opts.gap_tol * (1.0 + obj.abs()) && res_norm <= opts.residual_tol * c_scale && r_p.abs() <= ball_tol {
            converged = true;
            break;
        }
        iter += 1;
        let mu = gap / m_total as f64;

        // reduced Newton matrix
        kmat.fill(0.0);
        for (r, (&l, &sv)) in rows.iter().zip(lam.iter().zip(&s)) {
            let dval = l / sv;
            let (i, j) = (r.i as usize, r.j);
            kmat[(i, i)] += dval;
            if j != NONE {
                let j = j as usize;
                kmat[(j, j)] += dval;
                kmat[(i, j)] -= dval;
                kmat[(j, i)] -= dval;
            }
        }
        if let (Some(b), Some(g)) = (&ball, &gball) {
            for &(a, bb) in &b.pairs {
                if a != NONE {
                    kmat[(a as usize, a as usize)] += lam_ball;
                }
                if bb != NONE {
                    kmat[(bb as usize, bb as usize)] += lam_ball;
                }
                if a != NONE && bb != NONE {
                    kmat[(a as usize, bb as usize)] -= lam_ball;
                    kmat[(bb as usize, a as usize)] -= lam_ball;
                }
            }
            let wgt = lam_ball / s_ball;
            let nz: Vec<usize> = (0..n).filter(|&k| g[k] != 0.0).collect();
            for &p in &nz {
                for &q in &nz {
                    kmat[(p, q)] += wgt * g[p] * g[q];
                }
            }
        }
        let chol = factor(&kmat)?;

        // solves for a given complementarity target and returns directions
        let direction = |rc: &[f64], rc_ball: f64| -> (Vec<f64>, Vec<f64>, f64) {
            let mut rhs: Vec<f64> = rd.iter().map(|v| -v).collect();
            for (r, (&rcv, &sv)) in rows.iter().zip(rc.iter().zip(&s)) {
                row_axpy(r, rcv / sv, &mut rhs);
            }
            if let Some(g) = &gball {
                let f = (rc_ball - lam_ball * r_p) / s_ball;
                for (a, b) in rhs.iter_mut().zip(g) {
                    *a += f * b;
                }
            }
            let rhs = DVector::from_vec(rhs);
            let mut dx = chol.solve(&rhs);
            // one refinement step against the unshifted matrix
            let r = &rhs - &kmat * &dx;
            dx += chol.solve(&r);
            let dx: Vec<f64> = dx.iter().copied().collect();
            let dlam: Vec<f64> = rows
                .iter()
                .zip(lam.iter().zip(rc.iter().zip(&s)))
                .map(|(r, (&l, (&rcv, &sv)))| (l * row_dot(r, &dx) - rcv) / sv)
                .collect();
            let dlam_ball = match &gball {
                Some(g) => {
                    let gd: f64 = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
                    (lam_ball * gd + lam_ball * r_p - rc_ball) / s_ball
                }
                None => 0.0,
            };
            (dx, dlam, dlam_ball)
        };

        // predictor
        let rc_aff: Vec<f64> = lam.iter().zip(&s).map(|(a, b)| a * b).collect();
        let (dx_a, dl_a, dlb_a) = direction(&rc_aff, lam_ball * s_ball);
        let ds_a: Vec<f64> = rows.iter().map(|r| -row_dot(r, &dx_a)).collect();
        let ds_ball_a = match &gball {
            Some(g) => -r_p - g.iter().zip(&dx_a).map(|(a, b)| a * b).sum::<f64>(),
            None => 0.0,
        };
        let mut amax = 1.0f64;
        for k in 0..m_rows {
            if ds_a[k] < 0.0 {
                amax = amax.min(-s[k] / ds_a[k]);
            }
            if dl_a[k] < 0.0 {
                amax = amax.min(-lam[k] / dl_a[k]);
            }
        }
        if ball.is_some() {
            if ds_ball_a < 0.0 {
                amax = amax.min(-s_ball / ds_ball_a);
            }
            if dlb_a < 0.0 {
                amax = amax.min(-lam_ball / dlb_a);
            }
        }
        let mut mu_aff = 0.0;
        for k in 0..m_rows {
            mu_aff += (lam[k] + amax * dl_a[k]) * (s[k] + amax * ds_a[k]);
        }
        if ball.is_some() {
            mu_aff += (lam_ball + amax * dlb_a) * (s_ball + amax * ds_ball_a);
        }
        mu_aff /= m_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<f64> = (0..m_rows).map(|k| lam[k] * s[k] - sigma * mu + dl_a[k] * ds_a[k]).collect();
        let rc_ball = lam_ball * s_ball - sigma * mu + dlb_a * ds_ball_a;
        let (dx, dl, dlb) = direction(&rc, rc_ball);

        // step length: exact for rows and the ball
        let mut alpha = f64::INFINITY;
        for (k, r) in rows.iter().enumerate() {
            let ds = -row_dot(r, &dx);
            if ds < 0.0 {
                alpha = alpha.min(-s[k] / ds);
            }
            if dl[k] < 0.0 {
                alpha = alpha.min(-lam[k] / dl[k]);
            }
        }
        let ds_ball = match &gball {
            Some(g) => -r_p - g.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>(),
            None => 0.0,
        };
        if ball.is_some() {
            if ds_ball < 0.0 {
                alpha = alpha.min(-s_ball / ds_ball);
            }
            if dlb < 0.0 {
                alpha = alpha.min(-lam_ball / dlb);
            }
        }
        let mut alpha = (0.99 * alpha).min(1.0);
        if !(alpha > 0.0) {
            break;
        }
        // backtrack until complementarity stays in a wide neighbourhood of
        // the central path; the curved ball slack is the usual offender
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
            let sn: Vec<f64> = rows.iter().map(|r| r.b - row_dot(r, &xn)).collect();
            let ln: Vec<f64> = lam.iter().zip(&dl).map(|(a, b)| a + alpha * b).collect();
            let (hn, sbn, lbn) = match &ball {
                Some(b) => (b.h(&xn), s_ball + alpha * ds_ball, lam_ball + alpha * dlb),
                None => (Vec::new(), 1.0, 0.0),
            };
            let mut prod_min = f64::INFINITY;
            let mut total = 0.0;
            let mut ok = sbn > 0.0;
            for k in 0..m_rows {
                if !(sn[k] > 0.0) || !(ln[k] > 0.0) {
                    ok = false;
                    break;
                }
                let p = sn[k] * ln[k];
                prod_min = prod_min.min(p);
                total += p;
            }
            if ok && ball.is_some() {
                let p = sbn * lbn;
                ok = lbn > 0.0;
                prod_min = prod_min.min(p);
                total += p;
            }
            if ok && prod_min >= NEIGHBOURHOOD * total / m_total as f64 {
                accepted = Some((xn, sn, ln, hn, sbn, lbn));
                break;
            }
            alpha *= 0.7;
        }
        match accepted {
            Some((xn, sn, ln, hn, sbn, lbn)) => {
                x = xn;
                s = sn;
                lam = ln;
                h = hn;
                s_ball = sbn;
                lam_ball = lbn;
            }
            None => break,
        }
    }
    let obj = objective(&x);
    Ok(finish(&lay, x, obj, if ball.is_some() { lam_ball } else { 0.0 }, gap, iter, converged, res_norm))
}

#[allow(clippy::too_many_arguments)]
fn finish(lay: &Layout, x: Vec<f64>, obj: f64, lam_ball: f64, gap: f64, iter: usize, converged: bool, res: f64) -> IpmSolution {
    let mut z = vec![0.0; lay.n];
    for (k, &g) in lay.global_of.iter().enumerate() {
        z[g] = x[k];
    }
    IpmSolution { z, objective: obj, ball_multiplier: lam_ball, gap, dual_residual: res, iterations: iter, converged }
}

/// Cholesky with a small diagonal-relative shift for the flat directions
/// (common translations leave the objective unchanged).
fn factor(k: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = k.nrows();
    let floor = (0..n).map(|i| k[(i, i)].abs()).fold(0.0f64, f64::max) * 1e-300_f64.max(f64::EPSILON * 1e-6);
    let mut rel = 1e-14;
    for _ in 0..8 {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += rel * k[(i, i)].abs() + floor;
        }
        if let Some(c) = nalgebra::Cholesky::new(m) {
            return Ok(c);
        }
        rel *= 100.0;
    }
    Err(Error::Solver { message: "Newton matrix is not positive definite".into(), best_value: f64::NAN })
}

/// Euclidean projection of `y` onto a polyhedron,
/// `minimize 0.5 |x - y|^2  subject to  x in P`, by an infeasible-start
/// primal-dual interior point method with Mehrotra steps. The Newton
/// matrix `I + A' D A` is always positive definite.
pub fn project_qp(poly: &Polyhedron, y: &[f64], opts: IpmOptions) -> Result<Vec<f64>> {
    if y.len() != poly.dim {
        return Err(Error::Input(format!("projection expects a vector of length {}", poly.dim)));
    }
    let prob = IpmProblem { blocks: vec![poly], c: vec![0.0; poly.dim], ball: None, bound: None };
    let lay = layout(&prob.blocks);
    let n = lay.global_of.len();
    let rows = rows(&prob, &lay);
    let yf: Vec<f64> = lay.global_of.iter().map(|&g| y[g]).collect();
    if rows.is_empty() {
        return Ok(finish(&lay, yf, 0.0, 0.0, 0.0, 0, true, 0.0).z);
    }
    let m = rows.len();
    let scale = 1.0 + yf.iter().fold(0.0f64, |a, v| a.max(v.abs())) + rows.iter().fold(0.0f64, |a, r| a.max(r.b.abs()));
    let mut x = yf.clone();
    let mut s: Vec<f64> = rows.iter().map(|r| (r.b - row_dot(r, &x)).max(1e-2 * scale)).collect();
    let mut lam: Vec<f64> = s.iter().map(|&v| 1e-2 * scale * scale / (m as f64 * v)).collect();
    let tol = 1e-13 * scale;
    let mut kmat = DMatrix::<f64>::zeros(n, n);
    let mut best = (f64::INFINITY, x.clone());
    for _ in 0..opts.max_iter {
        let mut rd: Vec<f64> = x.iter().zip(&yf).map(|(a, b)| a - b).collect();
        for (r, &l) in rows.iter().zip(&lam) {
            row_axpy(r, l, &mut rd);
        }
        let rp: Vec<f64> = rows.iter().zip(&s).map(|(r, &sv)| row_dot(r, &x) + sv - r.b).collect();
        let mu = lam.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        let rd_norm = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rp_norm = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let merit = (rd_norm / scale).max(rp_norm / scale).max((m as f64 * mu).sqrt() / scale);
        if merit < best.0 {
            best = (merit, x.clone());
        }
        if rd_norm <= 1e-9 * scale && rp_norm <= tol && m as f64 * mu <= 1e-18 * scale * scale {
            return Ok(finish(&lay, x, 0.0, 0.0, mu, 0, true, rd_norm).z);
        }
        kmat.fill(0.0);
        for i in 0..n {
            kmat[(i, i)] = 1.0;
        }
        let dval: Vec<f64> = lam.iter().zip(&s).map(|(l, sv)| l / sv).collect();
        for (r, &dv) in rows.iter().zip(&dval) {
            let i = r.i as usize;
            kmat[(i, i)] += dv;
            if r.j != NONE {
                let j = r.j as usize;
                kmat[(j, j)] += dv;
                kmat[(i, j)] -= dv;
                kmat[(j, i)] -= dv;
            }
        }
        let chol = match nalgebra::Cholesky::new(kmat.clone()) {
            Some(c) => c,
            None => factor(&kmat)?,
        };
        // rc is the target for the complementarity equation
        // lam * ds + s * dlam = rc
        let direction = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs: Vec<f64> = rd.iter().map(|v| -v).collect();
            for (k, r) in rows.iter().enumerate() {
                row_axpy(r, -(dval[k] * rp[k] + rc[k] / s[k]), &mut rhs);
            }
            let rhs = DVector::from_vec(rhs);
            let mut dx = chol.solve(&rhs);
            let r = &rhs - &kmat * &dx;
            dx += chol.solve(&r);
            let dx: Vec<f64> = dx.iter().copied().collect();
            let ds: Vec<f64> = rows.iter().zip(&rp).map(|(r, &p)| -p - row_dot(r, &dx)).collect();
            let dl: Vec<f64> = (0..m).map(|k| (rc[k] - lam[k] * ds[k]) / s[k]).collect();
            (dx, ds, dl)
        };
        let max_step = |ds: &[f64], dl: &[f64]| -> f64 {
            let mut a = 1.0f64;
            for k in 0..m {
                if ds[k] < 0.0 {
                    a = a.min(-s[k] / ds[k]);
                }
                if dl[k] < 0.0 {
                    a = a.min(-lam[k] / dl[k]);
                }
            }
            a
        };
        let rc_aff: Vec<f64> = lam.iter().zip(&s).map(|(a, b)| -a * b).collect();
        let (_, ds_a, dl_a) = direction(&rc_aff);
        let a_aff = max_step(&ds_a, &dl_a);
        let mu_aff = (0..m).map(|k| (lam[k] + a_aff * dl_a[k]) * (s[k] + a_aff * ds_a[k])).sum::<f64>() / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc: Vec<f64> = (0..m).map(|k| -lam[k] * s[k] - ds_a[k] * dl_a[k] + sigma * mu).collect();
        let (dx, ds, dl) = direction(&rc);
        let a = (0.99 * max_step(&ds, &dl)).min(1.0);
        for (v, d) in x.iter_mut().zip(&dx) {
            *v += a * d;
        }
        for k in 0..m {
            s[k] += a * ds[k];
            lam[k] += a * dl[k];
        }
    }
    if best.0 <= 1e-8 {
        return Ok(finish(&lay, best.1, 0.0, 0.0, 0.0, 0, true, 0.0).z);
    }
    Err(Error::Solver { message: "projection did not converge".into(), best_value: best.0 })
}
