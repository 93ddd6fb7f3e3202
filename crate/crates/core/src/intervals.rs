//! Confidence interval constructions: two-point, constrained envelopes
//! over a collection of classes, nested adaptive intervals and the
//! Bonferroni intersection.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::estimators::{build_estimator_at, AffineEstimator, EstimatorOptions};
use crate::par::{try_map_range, Execution};
use crate::seqmodel::{phi_cdf, upper_quantile, ConfidenceLevel, LinearFunctional, SequenceModel};
use crate::spaces::{hull, Class, ConvexSetOracle, Family};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub construction: String,
    /// Class indices involved (0-based).
    pub classes: Vec<usize>,
    /// Modulus values used for the half-widths.
    pub xi: Vec<f64>,
    /// Level of each component interval.
    pub alpha: f64,
}

/// `[lo, hi]`, or the empty set when `empty` is set (then `lo == hi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
    pub provenance: Provenance,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, provenance: Provenance) -> Interval {
        if lo <= hi {
            Interval { lo, hi, empty: false, provenance }
        } else {
            let mid = 0.5 * (lo + hi);
            Interval { lo: mid, hi: mid, empty: true, provenance }
        }
    }

    pub fn point(x: f64, provenance: Provenance) -> Interval {
        Interval { lo: x, hi: x, empty: false, provenance }
    }

    pub fn length(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        !self.empty && self.lo <= t && t <= self.hi
    }

    /// Intersection; empty as soon as the ranges do not meet.
    pub fn intersect(&self, other: &Interval) -> Interval {
        let mut p = self.provenance.clone();
        p.classes.extend_from_slice(&other.provenance.classes);
        p.xi.extend_from_slice(&other.provenance.xi);
        if self.empty || other.empty {
            let at = if self.empty { self.lo } else { other.lo };
            return Interval { lo: at, hi: at, empty: true, provenance: p };
        }
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi), p)
    }
}

fn check_pair(theta0: f64, theta1: f64, sigma: f64) -> Result<()> {
    if !(theta0 < theta1) {
        return input(format!("need theta0 < theta1, got {theta0} and {theta1}"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return input(format!("sigma must be positive, got {sigma}"));
    }
    Ok(())
}

/// Optimal interval for the two-point problem `{theta0, theta1}` from one
/// observation `x ~ N(theta, sigma^2)`.
pub fn two_point_interval(theta0: f64, theta1: f64, sigma: f64, level: &ConfidenceLevel, x: f64) -> Result<Interval> {
    check_pair(theta0, theta1, sigma)?;
    let z = level.z_alpha;
    let prov = Provenance { construction: "two_point".into(), classes: vec![], xi: vec![], alpha: level.alpha };
    let left = theta1 - z * sigma;
    let right = theta0 + z * sigma;
    if left < right {
        if x <= left {
            Ok(Interval::point(theta0, prov))
        } else if x >= right {
            Ok(Interval::point(theta1, prov))
        } else {
            Ok(Interval::new(theta0, theta1, prov))
        }
    } else if x <= 0.5 * (theta0 + theta1) {
        Ok(Interval::point(theta0, prov))
    } else {
        Ok(Interval::point(theta1, prov))
    }
}

/// `(theta1 - theta0) (1 - alpha - Phi((theta1 - theta0)/sigma - z_alpha))_+`.
pub fn two_point_lower_bound(theta0: f64, theta1: f64, sigma: f64, level: &ConfidenceLevel) -> Result<f64> {
    check_pair(theta0, theta1, sigma)?;
    let gap = theta1 - theta0;
    Ok(gap * (1.0 - level.alpha - phi_cdf(gap / sigma - level.z_alpha)).max(0.0))
}

/// Ordered estimators `T_{i,j}` for every pair of a collection, all at the
/// same `eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorMatrix {
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    /// Row-major: entry `i * k + j` is `T_{i,j}`.
    pub entries: Vec<AffineEstimator>,
}

impl EstimatorMatrix {
    pub fn get(&self, i: usize, j: usize) -> &AffineEstimator {
        &self.entries[i * self.k + j]
    }

    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).certificate.omega
    }

    /// Between-class modulus `max(omega_{i,j}, omega_{j,i})`.
    pub fn omega_plus(&self, i: usize, j: usize) -> f64 {
        self.omega(i, j).max(self.omega(j, i))
    }
}

/// Builds all `k^2` ordered estimators at `eps = z sigma`, where `z` is the
/// upper `alpha_component / 2` quantile.
pub fn build_estimator_matrix(
    classes: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    alpha_component: f64,
    model: &SequenceModel,
    opts: &EstimatorOptions,
    exec: Execution,
) -> Result<EstimatorMatrix> {
    let k = classes.len();
    if k == 0 {
        return input("empty collection");
    }
    if !(model.sigma > 0.0) {
        return input("estimators need a noisy model (finite n)");
    }
    let eps = upper_quantile(alpha_component / 2.0) * model.sigma;
    let entries = try_map_range(k * k, exec, |idx| {
        let (i, j) = (idx / k, idx % k);
        build_estimator_at(classes[i], classes[j], w, eps, model.sigma, opts)
    })?;
    Ok(EstimatorMatrix { k, epsilon: eps, alpha: alpha_component, entries })
}

/// `[min_i {T_{i,j} - 1.5 omega_{i,j}}, max_i {T_{j,i} + 1.5 omega_{j,i}}]`.
pub fn build_constrained_interval(matrix: &EstimatorMatrix, j: usize, y: &[f64]) -> Result<Interval> {
    let k = matrix.k;
    if j >= k {
        return input(format!("class index {j} out of range for {k} classes"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let a = matrix.get(i, j);
        lo = lo.min(a.apply(y) - 1.5 * a.certificate.omega);
        let b = matrix.get(j, i);
        hi = hi.max(b.apply(y) + 1.5 * b.certificate.omega);
    }
    let xi = (0..k).map(|i| matrix.omega(i, j)).collect();
    Ok(Interval::new(lo, hi, Provenance { construction: "constrained".into(), classes: vec![j], xi, alpha: matrix.alpha }))
}

/// Multiplier of `xi_j` in the nested half-width: 2 for `alpha <= 0.2`,
/// else 3.
pub fn nested_multiplier(alpha: f64) -> f64 {
    if alpha <= 0.2 {
        2.0
    } else {
        3.0
    }
}

/// Center `(T_{j,k} + T_{k,j}) / 2`, half-width `(T_{j,k} - T_{k,j})_+ + c xi_j`.
pub fn nested_cij(t_jk: f64, t_kj: f64, xi_j: f64, alpha: f64) -> Interval {
    let center = 0.5 * (t_jk + t_kj);
    let half = (t_jk - t_kj).max(0.0) + nested_multiplier(alpha) * xi_j;
    Interval::new(center - half, center + half, Provenance { construction: "nested_cij".into(), classes: vec![], xi: vec![xi_j], alpha })
}

/// Indices `j_1 < ... < j_m = k-1` (0-based) with `xi[j_i] >= 2 xi[j_{i-1}]`
/// and `xi[j_i] < 2 xi[j]` for every `j` strictly between, `xi[-1] = 0`.
pub fn select_subsequence(xi: &[f64]) -> Result<Vec<usize>> {
    if xi.is_empty() {
        return input("empty xi list");
    }
    if xi.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return input("xi values must be positive");
    }
    if xi.windows(2).any(|p| p[1] < p[0]) {
        return input("xi values must be nondecreasing");
    }
    let mut out = vec![xi.len() - 1];
    loop {
        let cur = *out.last().unwrap();
        match (0..cur).rev().find(|&j| 2.0 * xi[j] <= xi[cur]) {
            Some(j) => out.push(j),
            None => break,
        }
    }
    out.reverse();
    Ok(out)
}

/// Exhaustive check of the subsequence conditions.
pub fn subsequence_condition_holds(xi: &[f64], idx: &[usize]) -> bool {
    if idx.is_empty() || *idx.last().unwrap() != xi.len() - 1 || idx.windows(2).any(|p| p[0] >= p[1]) {
        return false;
    }
    let mut prev: Option<usize> = None;
    for &ji in idx {
        let prev_xi = prev.map_or(0.0, |p| xi[p]);
        if xi[ji] < 2.0 * prev_xi {
            return false;
        }
        let start = prev.map_or(0, |p| p + 1);
        if (start..ji).any(|j| xi[ji] >= 2.0 * xi[j]) {
            return false;
        }
        prev = Some(ji);
    }
    true
}

/// Precomputed data of the nested adaptive interval for `F_1 c ... c F_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedFamily {
    pub alpha: f64,
    /// `xi_j = omega_+(z_{alpha/2} sigma, F_j, F_k)`.
    pub xi: Vec<f64>,
    /// `T_{j,k}` for each `j`.
    pub to_outer: Vec<AffineEstimator>,
    /// `T_{k,j}` for each `j`.
    pub from_outer: Vec<AffineEstimator>,
    pub subsequence: Vec<usize>,
    pub construction: String,
}

impl NestedFamily {
    pub fn k(&self) -> usize {
        self.xi.len()
    }
}

/// Builds the nested family after spot-checking the declared nesting.
pub fn build_nested_family(
    classes: &[Class],
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &EstimatorOptions,
    exec: Execution,
) -> Result<NestedFamily> {
    hull(&Family::Nested(classes.to_vec()))?;
    let refs: Vec<&dyn ConvexSetOracle> = classes.iter().map(|c| c as &dyn ConvexSetOracle).collect();
    nested_family_from(&refs, w, level, model, opts, exec, "adaptive_nested")
}

fn nested_family_from(
    classes: &[&dyn ConvexSetOracle],
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &EstimatorOptions,
    exec: Execution,
    construction: &str,
) -> Result<NestedFamily> {
    let k = classes.len();
    if k == 0 {
        return input("empty family");
    }
    if !(model.sigma > 0.0) {
        return input("estimators need a noisy model (finite n)");
    }
    let eps = level.z_alpha_half * model.sigma;
    let outer = classes[k - 1];
    // index 2j builds T_{j,k}, 2j+1 builds T_{k,j}; T_{k,k} is built once
    let ests = try_map_range(2 * k, exec, |idx| {
        let j = idx / 2;
        if j == k - 1 && idx % 2 == 1 {
            return Ok(None);
        }
        let e = if idx % 2 == 0 {
            build_estimator_at(classes[j], outer, w, eps, model.sigma, opts)?
        } else {
            build_estimator_at(outer, classes[j], w, eps, model.sigma, opts)?
        };
        Ok::<_, Error>(Some(e))
    })?;
    let mut to_outer = Vec::with_capacity(k);
    let mut from_outer = Vec::with_capacity(k);
    for (idx, e) in ests.into_iter().enumerate() {
        match (idx % 2, e) {
            (0, Some(e)) => to_outer.push(e),
            (_, Some(e)) => from_outer.push(e),
            (_, None) => from_outer.push(to_outer[k - 1].clone()),
        }
    }
    let mut xi: Vec<f64> =
        (0..k).map(|j| to_outer[j].certificate.omega.max(from_outer[j].certificate.omega)).collect();
    // moduli are monotone in the inner set; remove solver noise
    for j in 1..k {
        if xi[j] < xi[j - 1] {
            if xi[j] < xi[j - 1] * (1.0 - 1e-6) {
                return Err(Error::Input(format!("declared nesting contradicts the moduli at class {j}")));
            }
            xi[j] = xi[j - 1];
        }
    }
    let subsequence = select_subsequence(&xi)?;
    Ok(NestedFamily { alpha: level.alpha, xi, to_outer, from_outer, subsequence, construction: construction.into() })
}

/// Interval `CI*_j` of a nested family.
pub fn build_nested_cij(family: &NestedFamily, j: usize, y: &[f64]) -> Result<Interval> {
    if j >= family.k() {
        return input(format!("class index {j} out of range for {} classes", family.k()));
    }
    let mut ci = nested_cij(family.to_outer[j].apply(y), family.from_outer[j].apply(y), family.xi[j], family.alpha);
    ci.provenance.classes = vec![j];
    Ok(ci)
}

/// Shortest `CI*_j` over the selected subsequence; ties go to the smaller
/// index.
pub fn adaptive_nested_interval(family: &NestedFamily, y: &[f64]) -> Result<Interval> {
    let mut best: Option<Interval> = None;
    for &j in &family.subsequence {
        let ci = build_nested_cij(family, j, y)?;
        if best.as_ref().is_none_or(|b| ci.length() < b.length()) {
            best = Some(ci);
        }
    }
    let mut ci = best.expect("subsequence is never empty");
    ci.provenance.construction = family.construction.clone();
    ci.provenance.xi = family.subsequence.iter().map(|&j| family.xi[j]).collect();
    Ok(ci)
}

/// Nested family on the hulls of the cumulative unions `G_1 u ... u G_m`.
pub fn build_hull_family(
    classes: &[Class],
    w: &LinearFunctional,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    opts: &EstimatorOptions,
    exec: Execution,
) -> Result<NestedFamily> {
    let mut hulls = Vec::with_capacity(classes.len());
    for m in 1..=classes.len() {
        hulls.push(hull(&Family::Union(classes[..m].to_vec()))?);
    }
    let refs: Vec<&dyn ConvexSetOracle> = hulls.iter().map(|c| c as &dyn ConvexSetOracle).collect();
    nested_family_from(&refs, w, level, model, opts, exec, "hull_nested")
}

pub fn hull_nested_interval(family: &NestedFamily, y: &[f64]) -> Result<Interval> {
    adaptive_nested_interval(family, y)
}

/// Intersection of the constrained intervals of every class, built from a
/// matrix at level `alpha / k`. An empty intersection is returned flagged.
pub fn adaptive_general_interval(matrix: &EstimatorMatrix, y: &[f64]) -> Result<Interval> {
    let mut ci = build_constrained_interval(matrix, 0, y)?;
    for j in 1..matrix.k {
        ci = ci.intersect(&build_constrained_interval(matrix, j, y)?);
    }
    ci.provenance.construction = "adaptive_general".into();
    ci.provenance.classes = (0..matrix.k).collect();
    Ok(ci)
}

/// Bonferroni interval for the union of all coordinate subspaces of size
/// `m` with the sum functional, evaluated in closed form.
///
/// For subspaces `F_I`, `F_J` the estimator is the sum of `y` over `I u J`
/// with modulus `sqrt(|I u J|) eps` and no bias on either subspace, so each
/// constrained endpoint is an optimization over the overlap `|I n J|` that
/// only needs the order statistics of `y` outside `J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseUnionPlan {
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
}

impl SparseUnionPlan {
    /// At most this many subspaces are enumerated.
    pub const MAX_CLASSES: usize = 2_000_000;

    pub fn new(d: usize, m: usize, level: &ConfidenceLevel, model: &SequenceModel) -> Result<SparseUnionPlan> {
        if m == 0 || m > d {
            return input(format!("need 1 <= m <= d, got m = {m}, d = {d}"));
        }
        if !(model.sigma > 0.0) {
            return input("the sparse plan needs a noisy model (finite n)");
        }
        let k = binomial(d, m).filter(|k| *k <= Self::MAX_CLASSES as u128).ok_or_else(|| {
            Error::Unsupported(format!("C({d}, {m}) subspaces exceed the enumeration limit"))
        })? as usize;
        let alpha = level.alpha / k as f64;
        let epsilon = upper_quantile(alpha / 2.0) * model.sigma;
        Ok(SparseUnionPlan { d, m, k, alpha, epsilon })
    }

    /// `omega_+(eps, F_I, F_J)` for supports of overlap `o`.
    pub fn omega(&self, overlap: usize) -> f64 {
        ((2 * self.m - overlap) as f64).sqrt() * self.epsilon
    }

    /// Constrained interval of the class with support `j` (sorted).
    pub fn class_interval(&self, j: &[usize], y: &[f64], order: &[usize]) -> (f64, f64) {
        let m = self.m;
        let sum_j: f64 = j.iter().map(|&i| y[i]).sum();
        let outside: Vec<usize> = order.iter().copied().filter(|i| j.binary_search(i).is_err()).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        // r = m - overlap coordinates of I lie outside J
        let mut low_sum = 0.0;
        let mut high_sum = 0.0;
        for r in 0..=m.min(outside.len()) {
            if r > 0 {
                low_sum += y[outside[r - 1]];
                high_sum += y[outside[outside.len() - r]];
            }
            let w = 1.5 * self.omega(m - r);
            lo = lo.min(sum_j + low_sum - w);
            hi = hi.max(sum_j + high_sum + w);
        }
        (lo, hi)
    }

    pub fn interval(&self, y: &[f64]) -> Result<Interval> {
        if y.len() != self.d {
            return input(format!("observation has length {}, expected {}", y.len(), self.d));
        }
        let mut order: Vec<usize> = (0..self.d).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut support: Vec<usize> = (0..self.m).collect();
        loop {
            let (l, h) = self.class_interval(&support, y, &order);
            lo = lo.max(l);
            hi = hi.min(h);
            if !next_combination(&mut support, self.d) {
                break;
            }
        }
        let prov = Provenance {
            construction: "sparse_union_bonferroni".into(),
            classes: vec![],
            xi: vec![self.omega(self.m), self.omega(0)],
            alpha: self.alpha,
        };
        Ok(Interval::new(lo, hi, prov))
    }
}

/// Advances a sorted `m`-subset of `0..d` in lexicographic order.
pub fn next_combination(c: &mut [usize], d: usize) -> bool {
    let m = c.len();
    for pos in (0..m).rev() {
        if c[pos] < d - m + pos {
            c[pos] += 1;
            for q in pos + 1..m {
                c[q] = c[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `C(n, k)` when it fits in a `u128`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Supports of every `m`-subset of `0..d`, in lexicographic order.
pub fn all_supports(d: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m == 0 || m > d {
        return out;
    }
    let mut c: Vec<usize> = (0..m).collect();
    loop {
        out.push(c.clone());
        if !next_combination(&mut c, d) {
            break;
        }
    }
    out
}
