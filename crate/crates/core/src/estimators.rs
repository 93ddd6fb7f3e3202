//! Affine estimators built from least favorable pairs, with variance and
//! bias certificates.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::intervals::{Interval, Provenance};
use crate::modulus::{ordered_modulus, ModulusOptions, ModulusResult};
use crate::seqmodel::{dot, ConfidenceLevel, LinearFunctional, Observation, SequenceModel};
use crate::solver::{self, IpmProblem};
use crate::spaces::ConvexSetOracle;

/// Realized quantities of an estimator `T(y) = <a, y> + b` built from the
/// pair `(f1 in F_i, f2 in F_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Ordered modulus `omega(eps, F_i, F_j)`.
    pub omega: f64,
    pub epsilon: f64,
    /// `|a|^2 sigma^2`.
    pub variance: f64,
    /// `|f2 - f1|`.
    pub separation: f64,
    /// Derivative of the modulus at `epsilon`.
    pub slope: f64,
    /// Bias at `f1` and `f2`.
    pub bias_at_f1: f64,
    pub bias_at_f2: f64,
    /// `inf` of the bias over `F_j`, when certified.
    pub bias_low_on_fj: Option<f64>,
    /// `sup` of the bias over `F_i`, when certified.
    pub bias_high_on_fi: Option<f64>,
    /// The pair does not reach the ball boundary.
    pub degenerate: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineEstimator {
    pub a: Vec<f64>,
    pub b: f64,
    pub certificate: Certificate,
}

impl AffineEstimator {
    pub fn apply(&self, y: &[f64]) -> f64 {
        dot(&self.a, y) + self.b
    }

    /// `E T - Tf` at `f`.
    pub fn bias(&self, w: &LinearFunctional, f: &[f64]) -> f64 {
        self.a.iter().zip(&w.w).zip(f).map(|((a, w), f)| (a - w) * f).sum::<f64>() + self.b
    }

    pub fn std_dev(&self) -> f64 {
        self.certificate.variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub modulus: ModulusOptions,
    /// Compute the bias extremes at construction.
    pub certify: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { modulus: ModulusOptions::default(), certify: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Min,
    Max,
}

/// Estimator for the ordered pair `(F_i, F_j)` at `eps = z_{alpha/2} sigma`.
pub fn build_ordered_estimator(
    fi: &dyn ConvexSetOracle,
    fj: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &EstimatorOptions,
) -> Result<AffineEstimator> {
    if !(model.sigma > 0.0) {
        return input("estimators need a noisy model (finite n)");
    }
    build_estimator_at(fi, fj, w, level.z_alpha_half * model.sigma, model.sigma, opts)
}

/// Estimator for `(F_i, F_j)` from the least favorable pair at `eps`.
///
/// The weights are `a = (omega'(eps) / eps) (f2 - f1)`, which reduces to
/// `(omega / eps^2)(f2 - f1)` for linear moduli. The offset centers the
/// estimator between `Tf1` and `Tf2`.
pub fn build_estimator_at(
    fi: &dyn ConvexSetOracle,
    fj: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    eps: f64,
    sigma: f64,
    opts: &EstimatorOptions,
) -> Result<AffineEstimator> {
    let m = ordered_modulus(fi, fj, w, eps, &opts.modulus)?;
    let mut est = from_pair(&m, w, sigma);
    if opts.certify {
        est.certificate.bias_low_on_fj = Some(certify_bias(&est, fj, w, Extreme::Min)?);
        est.certificate.bias_high_on_fi = Some(certify_bias(&est, fi, w, Extreme::Max)?);
    }
    Ok(est)
}

/// Estimator from a solved modulus problem (bias extremes left empty).
pub fn from_pair(m: &ModulusResult, w: &LinearFunctional, sigma: f64) -> AffineEstimator {
    let f1 = &m.f_star;
    let f2 = &m.g_star;
    let eps = m.epsilon;
    let sep = m.separation();
    let slope = m.slope.unwrap_or(m.value / eps).max(0.0);
    let scale = slope / eps;
    let a: Vec<f64> = f1.iter().zip(f2).map(|(x, y)| scale * (y - x)).collect();
    let t1 = dot(&w.w, f1);
    let t2 = dot(&w.w, f2);
    let mid: Vec<f64> = f1.iter().zip(f2).map(|(x, y)| 0.5 * (x + y)).collect();
    let b = 0.5 * (t1 + t2) - dot(&a, &mid);
    let mut est = AffineEstimator {
        a,
        b,
        certificate: Certificate {
            omega: m.value,
            epsilon: eps,
            variance: 0.0,
            separation: sep,
            slope,
            bias_at_f1: 0.0,
            bias_at_f2: 0.0,
            bias_low_on_fj: None,
            bias_high_on_fi: None,
            degenerate: sep < 0.99 * eps,
            converged: m.converged,
        },
    };
    est.certificate.variance = dot(&est.a, &est.a) * sigma * sigma;
    est.certificate.bias_at_f1 = est.bias(w, f1);
    est.certificate.bias_at_f2 = est.bias(w, f2);
    est
}

/// Extreme of the bias `<a - w, f> + b` over `f` in `set`; infinite when
/// the bias is unbounded on the set.
pub fn certify_bias(est: &AffineEstimator, set: &dyn ConvexSetOracle, w: &LinearFunctional, dir: Extreme) -> Result<f64> {
    let d = w.dim();
    if est.a.len() != d || set.dim() != d {
        return input("dimension mismatch between estimator, set and functional");
    }
    let c: Vec<f64> = est.a.iter().zip(&w.w).map(|(a, w)| a - w).collect();
    let sign = if dir == Extreme::Min { 1.0 } else { -1.0 };
    let cs: Vec<f64> = c.iter().map(|v| sign * v).collect();
    let scale: f64 = est.a.iter().chain(&w.w).map(|v| v.abs()).sum();
    let best = match set.polyhedron() {
        Some(p) => minimize_linear_ipm(p, cs, scale)?,
        None => minimize_linear_projected(set, &cs)?,
    };
    Ok(sign * best + est.b)
}

/// `min <c, f>` over a polyhedron. Components of `c` along lineality
/// directions below rounding level relative to `scale` are dropped;
/// larger ones make the problem unbounded.
fn minimize_linear_ipm(p: &crate::spaces::Polyhedron, mut c: Vec<f64>, scale: f64) -> Result<f64> {
    for (k, pinned) in p.fixed_zero.iter().enumerate() {
        if *pinned {
            c[k] = 0.0;
        }
    }
    for g in p.lineality_groups() {
        let s: f64 = g.iter().map(|&k| c[k]).sum();
        if s.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Ok(f64::NEG_INFINITY);
        }
        let shift = s / g.len() as f64;
        for &k in &g {
            c[k] -= shift;
        }
    }
    if c.iter().all(|v| v.abs() <= 1e-14 * scale) {
        return Ok(0.0);
    }
    let radius = 1e3 * (1.0 + finite_scale(p));
    let start = crate::modulus::common_interior(&[p], 1.0)?;
    let prob = IpmProblem { blocks: vec![p], c: c.clone(), ball: None, bound: Some(radius) };
    let sol = solver::solve(&prob, &start, Default::default())?;
    if !sol.converged {
        return Err(Error::Solver { message: "bias program did not converge".into(), best_value: sol.objective });
    }
    let reach = sol.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if reach > 0.5 * radius {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(dot(&c, &sol.z))
}

/// Magnitude of the finite data of a polyhedron.
fn finite_scale(p: &crate::spaces::Polyhedron) -> f64 {
    let mut s = 0.0f64;
    for pb in &p.pairs {
        for v in [pb.lo, pb.hi] {
            if v.is_finite() {
                s = s.max(v.abs());
            }
        }
    }
    for v in p.lower.iter().chain(&p.upper) {
        if v.is_finite() {
            s = s.max(v.abs());
        }
    }
    s * p.dim as f64
}

/// `min <c, f>` over a set known through its projection: projected steps
/// `f <- P(f - t c)` with growing `t`.
fn minimize_linear_projected(set: &dyn ConvexSetOracle, c: &[f64]) -> Result<f64> {
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if cn == 0.0 {
        return Ok(0.0);
    }
    let mut f = set.project(&vec![0.0; c.len()]);
    let mut best = dot(c, &f);
    let mut step = 1.0 / cn;
    let mut stalled = 0;
    for _ in 0..400 {
        let trial: Vec<f64> = f.iter().zip(c).map(|(x, g)| x - step * g).collect();
        let nf = set.project(&trial);
        let v = dot(c, &nf);
        let norm = nf.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e12 {
            return Ok(f64::NEG_INFINITY);
        }
        if v < best - 1e-12 * (1.0 + best.abs()) {
            best = v;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 8 {
                return Ok(best);
            }
        }
        f = nf;
        step *= 2.0;
    }
    Err(Error::Solver { message: "projected bias search did not settle".into(), best_value: best })
}

/// Fixed-length interval centered at the `F -> F` estimator built at
/// `eps = 2 z_{alpha/2} sigma`, with half-length `omega(eps, F)`.
pub fn minimax_fixed_interval(
    f: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    y: &Observation,
    opts: &EstimatorOptions,
) -> Result<Interval> {
    let est = minimax_fixed_estimator(f, w, level, model, opts)?;
    Ok(fixed_interval_from(&est, &y.y, level.alpha))
}

pub fn minimax_fixed_estimator(
    f: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &EstimatorOptions,
) -> Result<AffineEstimator> {
    if !(model.sigma > 0.0) {
        return input("estimators need a noisy model (finite n)");
    }
    let eps = 2.0 * level.z_alpha_half * model.sigma;
    let no_cert = EstimatorOptions { certify: false, ..*opts };
    build_estimator_at(f, f, w, eps, model.sigma, &no_cert)
}

pub fn fixed_interval_from(est: &AffineEstimator, y: &[f64], alpha: f64) -> Interval {
    let t = est.apply(y);
    let h = est.certificate.omega;
    Interval::new(
        t - h,
        t + h,
        Provenance { construction: "minimax_fixed".into(), classes: vec![0], xi: vec![h], alpha },
    )
}
