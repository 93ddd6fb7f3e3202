//! Analytic lower and upper bounds on expected length, with the Gaussian
//! and hypergeometric inequalities they rest on.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{input, Result};
use crate::modulus::{between_modulus, ordered_modulus, ModulusOptions};
use crate::seqmodel::{phi_cdf, phi_sf, upper_quantile, ConfidenceLevel, LinearFunctional, SequenceModel};
use crate::spaces::ConvexSetOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub side: Side,
    pub value: f64,
    pub inputs: Vec<Param>,
}

impl BoundReport {
    pub fn new(name: &str, side: Side, value: f64, inputs: &[(&str, f64)]) -> BoundReport {
        BoundReport {
            name: name.into(),
            side,
            value,
            inputs: inputs.iter().map(|(n, v)| Param { name: (*n).into(), value: *v }).collect(),
        }
    }

    pub fn input(&self, name: &str) -> Option<f64> {
        self.inputs.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

fn check_alpha_half(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return input(format!("alpha must lie in (0, 1/2), got {alpha}"));
    }
    Ok(())
}

fn noise(model: &SequenceModel) -> Result<f64> {
    if !(model.sigma > 0.0) {
        return input("bounds need a noisy model (finite n)");
    }
    Ok(model.sigma)
}

/// `omega_+(eps, F1, F)` for `F` given as a finite union of convex sets.
pub fn union_between_modulus(
    f1: &dyn ConvexSetOracle,
    union: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    eps: f64,
    opts: &ModulusOptions,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for g in union {
        best = best.max(between_modulus(f1, *g, w, eps, opts)?.value);
    }
    if union.is_empty() {
        return input("empty union");
    }
    Ok(best)
}

/// `omega(eps, G) = max_{i,j} omega(eps, F_i, F_j)` for a finite union.
pub fn union_modulus(classes: &[&dyn ConvexSetOracle], w: &LinearFunctional, eps: f64, opts: &ModulusOptions) -> Result<f64> {
    if classes.is_empty() {
        return input("empty union");
    }
    let mut best = f64::NEG_INFINITY;
    for (i, f) in classes.iter().enumerate() {
        for g in &classes[i..] {
            best = best.max(between_modulus(*f, *g, w, eps, opts)?.value);
        }
    }
    Ok(best)
}

/// `50` log-spaced points in `[z_alpha / 4, 4 z_alpha]`.
pub fn default_sup_grid(level: &ConfidenceLevel) -> Vec<f64> {
    let (a, b) = ((level.z_alpha / 4.0).ln(), (4.0 * level.z_alpha).ln());
    (0..50).map(|i| (a + (b - a) * i as f64 / 49.0).exp()).collect()
}

/// `(1/2 - alpha) omega_+(z_alpha sigma, F1, F)`, and with a grid also
/// `sup_e omega_+(e sigma, F1, F) (1 - alpha - Phi(e - z_alpha))_+` over it.
pub fn theorem1_lower_bound(
    f1: &dyn ConvexSetOracle,
    union: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    grid: Option<&[f64]>,
    opts: &ModulusOptions,
) -> Result<Vec<BoundReport>> {
    check_alpha_half(level.alpha)?;
    let sigma = noise(model)?;
    let om = union_between_modulus(f1, union, w, level.z_alpha * sigma, opts)?;
    let mut out = vec![BoundReport::new(
        "theorem1",
        Side::Lower,
        (0.5 - level.alpha) * om,
        &[("alpha", level.alpha), ("n", model.n), ("omega", om)],
    )];
    if let Some(g) = grid {
        let mut best = 0.0f64;
        let mut arg = f64::NAN;
        for &e in g {
            if !(e > 0.0) {
                return input("grid points must be positive");
            }
            let factor = (1.0 - level.alpha - phi_cdf(e - level.z_alpha)).max(0.0);
            if factor == 0.0 {
                continue;
            }
            let v = union_between_modulus(f1, union, w, e * sigma, opts)? * factor;
            if v > best {
                best = v;
                arg = e;
            }
        }
        out.push(BoundReport::new("theorem1_sup", Side::Lower, best, &[("alpha", level.alpha), ("n", model.n), ("argmax", arg)]));
    }
    Ok(out)
}

/// `(1/2 - alpha) omega(z_alpha sigma, F)` for a single convex class.
pub fn single_class_lower_bound(
    f: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &ModulusOptions,
) -> Result<BoundReport> {
    check_alpha_half(level.alpha)?;
    let sigma = noise(model)?;
    let om = ordered_modulus(f, f, w, level.z_alpha * sigma, opts)?.value;
    Ok(BoundReport::new("single_class", Side::Lower, (0.5 - level.alpha) * om, &[("alpha", level.alpha), ("n", model.n), ("omega", om)]))
}

/// `exp(-(ab + b^2/2)) P(Z > a)`, an upper bound for `P(Z >= a + b)`.
pub fn gaussian_tail_shift_bound(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return input(format!("a and b must be positive, got {a} and {b}"));
    }
    Ok((-(a * b + 0.5 * b * b)).exp() * phi_sf(a))
}

/// `mu0 Phi(mu0/sigma0) + sigma0 phi(mu0/sigma0)`, an upper bound for
/// `E X 1(X > 0)` when `X ~ N(mu, sigma^2)`, `mu <= mu0`, `sigma <= sigma0`.
pub fn truncated_mean_bound(mu0: f64, sigma0: f64) -> Result<f64> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() || !mu0.is_finite() {
        return input(format!("need finite mu0 and sigma0 > 0, got {mu0} and {sigma0}"));
    }
    let r = mu0 / sigma0;
    Ok(mu0 * phi_cdf(r) + sigma0 / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * r * r).exp())
}

/// Constant `(2 + (4 + log 4) / log(3/2))^{1/2}` of the Gaussian maximum
/// bound.
pub fn max_gauss_constant() -> f64 {
    (2.0 + (4.0 + 4f64.ln()) / 1.5f64.ln()).sqrt()
}

/// Upper bound on `E max_i |X_i|` for `k` centered normals with standard
/// deviation at most `sigma`.
pub fn max_gauss_bound(k: usize, sigma: f64) -> Result<f64> {
    if k == 0 || !(sigma > 0.0) || !sigma.is_finite() {
        return input(format!("need k >= 1 and sigma > 0, got {k} and {sigma}"));
    }
    Ok(sigma * max_gauss_constant() * ((k as f64 + 1.0).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Quantity {
    /// `E exp(J rho^2)`, `J` hypergeometric.
    pub exact: f64,
    /// `4^{m^2/n} (1 + (m/n) e^{rho^2})^m`.
    pub paper_bound: f64,
    /// Whether the bound is claimed (`n >= 4`, `m^2 < n`).
    pub bound_applies: bool,
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(J = j) = C(m,j) C(n-m, m-j) / C(n,m)`, computed in log space.
pub fn hypergeometric_pmf(n: usize, m: usize, j: usize) -> f64 {
    if j > m || m - j > n - m {
        return 0.0;
    }
    (ln_choose(m, j) + ln_choose(n - m, m - j) - ln_choose(n, m)).exp()
}

/// Second moment of the likelihood ratio of the uniform sparse mixture.
pub fn nearly_black_chi2(n: usize, m: usize, rho: f64) -> Result<Chi2Quantity> {
    if m == 0 || 2 * m > n {
        return input(format!("need 1 <= m and 2m <= n, got m = {m}, n = {n}"));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return input(format!("rho must be nonnegative, got {rho}"));
    }
    let r2 = rho * rho;
    let exact = if r2 == 0.0 {
        1.0
    } else {
        let terms: Vec<f64> = (0..=m).map(|j| hypergeometric_pmf(n, m, j) * (j as f64 * r2).exp()).collect();
        crate::par::compensated_sum(terms)
    };
    let (nf, mf) = (n as f64, m as f64);
    let paper_bound = 4f64.powf(mf * mf / nf) * (1.0 + mf / nf * r2.exp()).powf(mf);
    Ok(Chi2Quantity { exact, paper_bound, bound_applies: n >= 4 && mf * mf < nf })
}

/// `(1/2 - alpha) (m / sqrt n) sqrt(log(n / m^2) / 2)`.
pub fn nearly_black_lower_bound(n: f64, m: f64, level: &ConfidenceLevel) -> Result<BoundReport> {
    check_alpha_half(level.alpha)?;
    if !(m >= 1.0) || !(m * m < n) {
        return input(format!("need 1 <= m and m^2 < n, got m = {m}, n = {n}"));
    }
    let v = (0.5 - level.alpha) * m / n.sqrt() * (0.5 * (n / (m * m)).ln()).sqrt();
    Ok(BoundReport::new("nearly_black", Side::Lower, v, &[("alpha", level.alpha), ("n", n), ("m", m)]))
}

/// `(1/2 - alpha) sqrt(1/4 - gamma/2) omega(sqrt(log k / n), G)` with
/// `m = n^gamma`, `k = C(n, m)` and `omega(e, G) = sqrt(2m) e`.
pub fn nearly_black_lower_bound_modulus_form(n: usize, m: usize, level: &ConfidenceLevel) -> Result<BoundReport> {
    check_alpha_half(level.alpha)?;
    let (nf, mf) = (n as f64, m as f64);
    if m == 0 || !(mf * mf < nf) {
        return input(format!("need 1 <= m and m^2 < n, got m = {m}, n = {n}"));
    }
    let gamma = mf.ln() / nf.ln();
    let log_k = ln_choose(n, m);
    let omega = (2.0 * mf).sqrt() * (log_k / nf).sqrt();
    let v = (0.5 - level.alpha) * (0.25 - 0.5 * gamma).sqrt() * omega;
    Ok(BoundReport::new(
        "nearly_black_modulus_form",
        Side::Lower,
        v,
        &[("alpha", level.alpha), ("n", nf), ("m", mf), ("gamma", gamma), ("log_k", log_k)],
    ))
}

/// `min{1/4 - alpha/2, (1 - 2 alpha) / (10 z_{alpha/2})}`.
pub fn affine_centered_constant(alpha: f64) -> Result<f64> {
    check_alpha_half(alpha)?;
    Ok((0.25 - 0.5 * alpha).min((1.0 - 2.0 * alpha) / (10.0 * upper_quantile(alpha / 2.0))))
}

/// Lower bounds for intervals centered at affine estimators:
/// `C(alpha) omega(2 z_{alpha/2} sigma, H)` in general and
/// `omega(2 z_{alpha/2} sigma, H) / 2` for fixed-length intervals, where
/// `H` is the convex hull of the parameter space.
pub fn affine_centered_lower_bound(
    hull: &dyn ConvexSetOracle,
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &ModulusOptions,
) -> Result<Vec<BoundReport>> {
    let c = affine_centered_constant(level.alpha)?;
    let sigma = noise(model)?;
    let om = ordered_modulus(hull, hull, w, 2.0 * level.z_alpha_half * sigma, opts)?.value;
    Ok(vec![
        BoundReport::new("affine_centered", Side::Lower, c * om, &[("alpha", level.alpha), ("n", model.n), ("omega", om), ("c_alpha", c)]),
        BoundReport::new("affine_centered_fixed", Side::Lower, 0.5 * om, &[("alpha", level.alpha), ("n", model.n), ("omega", om)]),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lower: BoundReport,
    pub upper: BoundReport,
}

/// `(1/2 - alpha) omega(z_alpha sigma, G) <= L* <= 12 omega(z_{alpha/2k} sigma, G)`
/// from the union modulus evaluated at two noise levels.
pub fn envelope_from(union_modulus_at: impl Fn(f64) -> Result<f64>, k: usize, level: &ConfidenceLevel, model: &SequenceModel) -> Result<Envelope> {
    check_alpha_half(level.alpha)?;
    let sigma = noise(model)?;
    if k == 0 {
        return input("empty collection");
    }
    let lo_om = union_modulus_at(level.z_alpha * sigma)?;
    let z_k = upper_quantile(level.alpha / (2.0 * k as f64));
    let hi_om = union_modulus_at(z_k * sigma)?;
    let kf = k as f64;
    Ok(Envelope {
        lower: BoundReport::new("minimax_envelope", Side::Lower, (0.5 - level.alpha) * lo_om, &[("alpha", level.alpha), ("n", model.n), ("k", kf), ("omega", lo_om)]),
        upper: BoundReport::new("minimax_envelope", Side::Upper, 12.0 * hi_om, &[("alpha", level.alpha), ("n", model.n), ("k", kf), ("omega", hi_om)]),
    })
}

pub fn minimax_envelope(
    classes: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &ModulusOptions,
) -> Result<Envelope> {
    envelope_from(|e| union_modulus(classes, w, e, opts), classes.len(), level, model)
}

/// Envelope for the union of all `m`-sparse coordinate subspaces of
/// `R^d` with the sum functional, where `omega(e, G) = sqrt(2m) e`.
pub fn sparse_minimax_envelope(d: usize, m: usize, level: &ConfidenceLevel, model: &SequenceModel) -> Result<Envelope> {
    if m == 0 || 2 * m > d {
        return input(format!("need 1 <= m and 2m <= d, got m = {m}, d = {d}"));
    }
    let k = crate::intervals::binomial(d, m).map_or(f64::INFINITY, |k| k as f64);
    if !k.is_finite() || k > 1e15 {
        return input("number of subspaces too large");
    }
    envelope_from(|e| Ok((2.0 * m as f64).sqrt() * e), k as usize, level, model)
}

/// Length constant of the two-class constrained interval:
/// `9 / z_{alpha/2} + 4`.
pub fn constrained_length_constant(alpha: f64) -> f64 {
    9.0 / upper_quantile(alpha / 2.0) + 4.0
}

/// Ratio constant `(9 + 4 z_{alpha/4}) / ((1/2 - alpha) z_alpha)` of the
/// two-class interval against the lower bound.
pub fn two_class_ratio_constant(alpha: f64) -> f64 {
    (9.0 + 4.0 * upper_quantile(alpha / 4.0)) / ((0.5 - alpha) * upper_quantile(alpha))
}

/// `2 Phi(z/2) + 4 exp(-z^2/8) / (sqrt(2 pi) z) + 4` with `z = z_{alpha/2}`,
/// at most 8 for `alpha <= 0.2`.
pub fn nested_length_constant(alpha: f64) -> f64 {
    let z = upper_quantile(alpha / 2.0);
    2.0 * phi_cdf(0.5 * z) + 4.0 / ((2.0 * std::f64::consts::PI).sqrt() * z) * (-z * z / 8.0).exp() + 4.0
}

/// Non-coverage allowed for a single nested interval: `(2/7) alpha`.
pub fn nested_noncoverage(alpha: f64) -> f64 {
    2.0 / 7.0 * alpha
}

/// Sandwich ratio `16 z_{alpha/2} / ((1/2 - alpha) z_alpha)` of the nested
/// adaptive interval.
pub fn nested_adaptation_ratio(alpha: f64) -> f64 {
    16.0 * upper_quantile(alpha / 2.0) / ((0.5 - alpha) * upper_quantile(alpha))
}

/// Sandwich ratio `12 z_{alpha/2k} / ((1/2 - alpha) z_alpha)` of the
/// Bonferroni interval.
pub fn general_adaptation_ratio(alpha: f64, k: usize) -> f64 {
    12.0 * upper_quantile(alpha / (2.0 * k as f64)) / ((0.5 - alpha) * upper_quantile(alpha))
}

/// `sqrt(2 log k / z_{alpha/2}^2 + 1) z_{alpha/2}`, an upper bound for
/// `z_{alpha/2k}`.
pub fn bonferroni_quantile_bound(alpha: f64, k: usize) -> f64 {
    let z = upper_quantile(alpha / 2.0);
    (2.0 * (k as f64).ln() / (z * z) + 1.0).sqrt() * z
}

/// `c (2b+1)^{1/(2b+1)} M^{1/(2b+1)} z_{alpha/2}^{2b/(2b+1)} n^{-b/(2b+1)}`
/// with `c = 6` for the classes of a doubling family and `c = 12` for an
/// arbitrary radius.
pub fn lipschitz_length_bound(beta: f64, m: f64, alpha: f64, n: f64, within_family: bool) -> Result<BoundReport> {
    if !(beta > 0.0 && beta <= 1.0) || !(m > 0.0) || !(n > 0.0) {
        return input(format!("need 0 < beta <= 1, M > 0, n > 0 (got {beta}, {m}, {n})"));
    }
    let p = 2.0 * beta + 1.0;
    let z = upper_quantile(alpha / 2.0);
    let c = if within_family { 6.0 } else { 12.0 };
    let v = c * p.powf(1.0 / p) * m.powf(1.0 / p) * z.powf(2.0 * beta / p) * n.powf(-beta / p);
    let name = if within_family { "doubling_family_length" } else { "any_radius_length" };
    Ok(BoundReport::new(name, Side::Upper, v, &[("beta", beta), ("M", m), ("alpha", alpha), ("n", n)]))
}
