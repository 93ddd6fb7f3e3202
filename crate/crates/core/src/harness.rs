//! Monte Carlo experiments: configuration documents, coverage and length
//! aggregation, attached analytic bounds, verdicts and report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport, Side};
use crate::error::{Error, Result};
use crate::estimators::{fixed_interval_from, minimax_fixed_estimator, AffineEstimator, EstimatorOptions};
use crate::intervals::{
    adaptive_general_interval, adaptive_nested_interval, build_constrained_interval, build_estimator_matrix,
    build_hull_family, build_nested_cij, build_nested_family, EstimatorMatrix, Interval, NestedFamily,
    SparseUnionPlan,
};
use crate::modulus::{between_modulus, ordered_modulus, sparse_modulus, ModulusOptions};
use crate::par::{compensated_sum, map_range, Execution};
use crate::seqmodel::{derive_replicate_seed, sample, ConfidenceLevel, Grid, LinearFunctional, SequenceModel};
use crate::solver::IpmOptions;
use crate::spaces::{Class, ClassDescriptor, ConvexSetOracle};

pub const SCHEMA_VERSION: u32 = 1;

/// Slack, in standard errors, of every Monte Carlo verdict.
pub const SE_SLACK: f64 = 3.0;

/// Tolerance for declared class membership of truth points.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub d: usize,
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `f(0)` through the grid point nearest 0.
    PointEvaluation,
    Sum,
    Coordinate { index: usize },
    Weights { w: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionKind {
    Single,
    TwoClass,
    Nested,
    /// Classes whose cumulative unions have closed-form hulls.
    HullNested,
    General,
    /// All coordinate subspaces with support size `m`; classes implicit.
    NearlyBlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionSpec {
    pub kind: CollectionKind,
    #[serde(default)]
    pub classes: Vec<ClassDescriptor>,
    /// Sparsity of the nearly black collection.
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Fixed-length interval on the (single) convex class.
    MinimaxFixed,
    /// Envelope interval `CI*_j` for the target class.
    Constrained,
    /// Nested interval `CI*_j` for the target class.
    NestedCij,
    AdaptiveNested,
    HullNested,
    AdaptiveGeneral,
    /// Closed-form Bonferroni interval of the nearly black collection.
    SparseBonferroni,
}

impl Construction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Construction::MinimaxFixed => "minimax_fixed",
            Construction::Constrained => "constrained",
            Construction::NestedCij => "nested_cij",
            Construction::AdaptiveNested => "adaptive_nested",
            Construction::HullNested => "hull_nested",
            Construction::AdaptiveGeneral => "adaptive_general",
            Construction::SparseBonferroni => "sparse_bonferroni",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairEnd {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    Zero,
    /// Raw coordinates.
    Vector { values: Vec<f64> },
    /// Linear function `f(t) = -slope * t` on the grid.
    Ramp { slope: f64 },
    /// `value` on each index of `support`, 0 elsewhere.
    Sparse { support: Vec<usize>, value: f64 },
    /// One end of the pair attaining `omega(z_{alpha/2} sigma, F_from, F_to)`.
    LeastFavorable { from: usize, to: usize, end: PairEnd },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthPoint {
    /// Declared class (index into `collection.classes`); optional for the
    /// nearly black collection, where membership means at most `m` nonzeros.
    #[serde(default)]
    pub class: Option<usize>,
    pub point: PointSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Compute bias certificates for every estimator.
    #[serde(default = "default_true")]
    pub certify: bool,
}

fn default_gap_tol() -> f64 {
    IpmOptions::default().gap_tol
}
fn default_residual_tol() -> f64 {
    IpmOptions::default().residual_tol
}
fn default_max_iter() -> usize {
    IpmOptions::default().max_iter
}
fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { gap_tol: default_gap_tol(), residual_tol: default_residual_tol(), max_iter: default_max_iter(), certify: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    /// Increasing grid of noise levels `eps`.
    pub epsilons: Vec<f64>,
    /// Ordered class pairs; all pairs `i <= j` when empty.
    #[serde(default)]
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub functional: FunctionalSpec,
    pub collection: CollectionSpec,
    pub alpha: f64,
    pub construction: Construction,
    /// Class whose interval is built by `constrained` and `nested_cij`.
    #[serde(default)]
    pub target_class: Option<usize>,
    #[serde(default)]
    pub truth_points: Vec<TruthPoint>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Sample without noise (estimators still use `n`).
    #[serde(default)]
    pub zero_noise: bool,
    #[serde(default)]
    pub modulus: Option<ModulusSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate_shape()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    /// Field-level checks that need no solver.
    pub fn validate_shape(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return config_err(format!("schema_version: expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if self.model.d == 0 {
            return config_err("model.d: must be at least 1");
        }
        if !(self.model.n > 0.0) {
            return config_err(format!("model.n: must be positive, got {}", self.model.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return config_err(format!("alpha: must lie in (0, 0.5), got {}", self.alpha));
        }
        if self.replicates == 0 {
            return config_err("replicates: must be at least 1");
        }
        let d = self.model.d;
        match &self.functional {
            FunctionalSpec::Coordinate { index } if *index >= d => {
                return config_err(format!("functional.index: {index} out of range for d = {d}"));
            }
            FunctionalSpec::Weights { w } if w.len() != d => {
                return config_err(format!("functional.w: length {} differs from d = {d}", w.len()));
            }
            _ => {}
        }
        let k = self.collection.classes.len();
        for (i, c) in self.collection.classes.iter().enumerate() {
            c.validate(d).map_err(|e| Error::Config(format!("collection.classes[{i}]: {e}")))?;
        }
        use CollectionKind as K;
        use Construction as C;
        match self.collection.kind {
            K::NearlyBlack => {
                let m = self.collection.m.ok_or_else(|| Error::Config("collection.m: required for nearly_black".into()))?;
                if m == 0 || m > d {
                    return config_err(format!("collection.m: need 1 <= m <= d, got {m}"));
                }
                if self.functional != FunctionalSpec::Sum {
                    return config_err("functional: nearly_black needs the sum functional");
                }
            }
            K::Single if k != 1 => return config_err(format!("collection.classes: single needs 1 class, got {k}")),
            K::TwoClass if k != 2 => return config_err(format!("collection.classes: two_class needs 2 classes, got {k}")),
            _ if k == 0 => return config_err("collection.classes: at least one class required"),
            _ => {}
        }
        let ok = matches!(
            (self.collection.kind, self.construction),
            (K::Single, C::MinimaxFixed)
                | (K::Single | K::TwoClass | K::General, C::Constrained)
                | (K::TwoClass | K::General, C::AdaptiveGeneral)
                | (K::Nested | K::TwoClass, C::NestedCij | C::AdaptiveNested)
                | (K::HullNested, C::HullNested)
                | (K::NearlyBlack, C::SparseBonferroni)
        );
        if !ok {
            return config_err(format!(
                "construction: {} is not available for collection kind {:?}",
                self.construction.as_str(),
                self.collection.kind
            ));
        }
        if matches!(self.construction, C::Constrained | C::NestedCij) {
            match self.target_class {
                Some(j) if j < k => {}
                Some(j) => return config_err(format!("target_class: {j} out of range for {k} classes")),
                None => return config_err("target_class: required for this construction"),
            }
        }
        if self.truth_points.is_empty() {
            return config_err("truth_points: at least one truth point required");
        }
        for (t, tp) in self.truth_points.iter().enumerate() {
            match tp.class {
                Some(c) if c >= k && self.collection.kind != K::NearlyBlack => {
                    return config_err(format!("truth_points[{t}].class: {c} out of range"));
                }
                None if self.collection.kind != K::NearlyBlack => {
                    return config_err(format!("truth_points[{t}].class: required"));
                }
                _ => {}
            }
            match &tp.point {
                PointSpec::Vector { values } if values.len() != d => {
                    return config_err(format!("truth_points[{t}].point.values: length {} differs from d = {d}", values.len()));
                }
                PointSpec::Sparse { support, .. } if support.iter().any(|&i| i >= d) => {
                    return config_err(format!("truth_points[{t}].point.support: index out of range"));
                }
                PointSpec::LeastFavorable { from, to, .. } if *from >= k || *to >= k => {
                    return config_err(format!("truth_points[{t}].point: class index out of range"));
                }
                _ => {}
            }
        }
        if let Some(ms) = &self.modulus {
            if ms.epsilons.is_empty() || ms.epsilons.iter().any(|e| !(*e > 0.0)) {
                return config_err("modulus.epsilons: need positive values");
            }
            if ms.pairs.iter().any(|&(i, j)| i >= k || j >= k) {
                return config_err("modulus.pairs: class index out of range");
            }
        }
        Ok(())
    }

    pub fn level(&self) -> Result<ConfidenceLevel> {
        ConfidenceLevel::new(self.alpha)
    }

    pub fn sequence_model(&self) -> Result<SequenceModel> {
        SequenceModel::new(self.model.d, self.model.n)
    }

    pub fn linear_functional(&self) -> Result<LinearFunctional> {
        let d = self.model.d;
        match &self.functional {
            FunctionalSpec::PointEvaluation => Ok(LinearFunctional::point_evaluation(&Grid::new(d)?)),
            FunctionalSpec::Sum => LinearFunctional::sum(d),
            FunctionalSpec::Coordinate { index } => LinearFunctional::coordinate(d, *index),
            FunctionalSpec::Weights { w } => LinearFunctional::new(w.clone()),
        }
    }

    pub fn classes(&self) -> Result<Vec<Class>> {
        self.collection.classes.iter().map(|c| Class::new(c.clone(), self.model.d)).collect()
    }

    pub fn modulus_options(&self) -> ModulusOptions {
        ModulusOptions {
            ipm: IpmOptions { gap_tol: self.solver.gap_tol, residual_tol: self.solver.residual_tol, max_iter: self.solver.max_iter },
            ..ModulusOptions::default()
        }
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions { modulus: self.modulus_options(), certify: self.solver.certify }
    }
}

/// A construction with all solver work done; evaluating it on data is
/// cheap and pure.
#[derive(Debug, Clone)]
pub enum Prepared {
    Fixed(AffineEstimator),
    Constrained { matrix: EstimatorMatrix, j: usize },
    NestedCij { family: NestedFamily, j: usize },
    Nested(NestedFamily),
    General(EstimatorMatrix),
    Sparse(SparseUnionPlan),
}

impl Prepared {
    pub fn interval(&self, y: &[f64], alpha: f64) -> Result<Interval> {
        match self {
            Prepared::Fixed(e) => Ok(fixed_interval_from(e, y, alpha)),
            Prepared::Constrained { matrix, j } => build_constrained_interval(matrix, *j, y),
            Prepared::NestedCij { family, j } => build_nested_cij(family, *j, y),
            Prepared::Nested(f) => adaptive_nested_interval(f, y),
            Prepared::General(m) => adaptive_general_interval(m, y),
            Prepared::Sparse(p) => p.interval(y),
        }
    }

    /// Estimators whose certificates go into reports.
    pub fn estimators(&self) -> Vec<(String, &AffineEstimator)> {
        let mut out = Vec::new();
        match self {
            Prepared::Fixed(e) => out.push(("0->0".to_string(), e)),
            Prepared::Constrained { matrix, .. } | Prepared::General(matrix) => {
                for i in 0..matrix.k {
                    for j in 0..matrix.k {
                        out.push((format!("{i}->{j}"), matrix.get(i, j)));
                    }
                }
            }
            Prepared::NestedCij { family, .. } | Prepared::Nested(family) => {
                let k = family.k() - 1;
                for j in 0..family.k() {
                    out.push((format!("{j}->{k}"), &family.to_outer[j]));
                    if j != k {
                        out.push((format!("{k}->{j}"), &family.from_outer[j]));
                    }
                }
            }
            Prepared::Sparse(_) => {}
        }
        out
    }
}

/// Builds the selected construction for a validated configuration.
pub fn prepare(cfg: &ExperimentConfig, exec: Execution) -> Result<Prepared> {
    let level = cfg.level()?;
    let model = cfg.sequence_model()?;
    let w = cfg.linear_functional()?;
    let opts = cfg.estimator_options();
    let classes = if cfg.collection.kind == CollectionKind::NearlyBlack { Vec::new() } else { cfg.classes()? };
    let refs: Vec<&dyn ConvexSetOracle> = classes.iter().map(|c| c as &dyn ConvexSetOracle).collect();
    Ok(match cfg.construction {
        Construction::MinimaxFixed => Prepared::Fixed(minimax_fixed_estimator(&classes[0], &w, &level, &model, &opts)?),
        Construction::Constrained => Prepared::Constrained {
            matrix: build_estimator_matrix(&refs, &w, level.alpha, &model, &opts, exec)?,
            j: cfg.target_class.unwrap_or(0),
        },
        Construction::NestedCij => Prepared::NestedCij {
            family: build_nested_family(&classes, &w, &level, &model, &opts, exec)?,
            j: cfg.target_class.unwrap_or(0),
        },
        Construction::AdaptiveNested => Prepared::Nested(build_nested_family(&classes, &w, &level, &model, &opts, exec)?),
        Construction::HullNested => Prepared::Nested(build_hull_family(&classes, &w, &level, &model, &opts, exec)?),
        Construction::AdaptiveGeneral => Prepared::General(build_estimator_matrix(
            &refs,
            &w,
            level.alpha / classes.len() as f64,
            &model,
            &opts,
            exec,
        )?),
        Construction::SparseBonferroni => {
            Prepared::Sparse(SparseUnionPlan::new(cfg.model.d, cfg.collection.m.unwrap_or(1), &level, &model)?)
        }
    })
}

/// Resolves and checks the truth points.
pub fn truth_vectors(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let d = cfg.model.d;
    let grid = Grid::new(d)?;
    let nearly_black = cfg.collection.kind == CollectionKind::NearlyBlack;
    let classes = if nearly_black { Vec::new() } else { cfg.classes()? };
    let model = cfg.sequence_model()?;
    let level = cfg.level()?;
    let w = cfg.linear_functional()?;
    let mopts = cfg.modulus_options();
    let mut out = Vec::with_capacity(cfg.truth_points.len());
    for (t, tp) in cfg.truth_points.iter().enumerate() {
        let x = match &tp.point {
            PointSpec::Zero => vec![0.0; d],
            PointSpec::Vector { values } => values.clone(),
            PointSpec::Ramp { slope } => grid.embed(|s| -slope * s),
            PointSpec::Sparse { support, value } => {
                let mut x = vec![0.0; d];
                for &i in support {
                    x[i] = *value;
                }
                x
            }
            PointSpec::LeastFavorable { from, to, end } => {
                let eps = level.z_alpha_half * model.sigma;
                let r = ordered_modulus(&classes[*from], &classes[*to], &w, eps, &mopts)?;
                match end {
                    PairEnd::First => r.f_star,
                    PairEnd::Second => r.g_star,
                }
            }
        };
        let member = if nearly_black {
            let m = cfg.collection.m.unwrap_or(0);
            x.iter().filter(|v| **v != 0.0).count() <= m
        } else {
            let c = tp.class.unwrap_or(0);
            classes[c].contains(&x, MEMBERSHIP_TOL)
        };
        if !member {
            return config_err(format!("truth_points[{t}]: point is not in its declared class"));
        }
        out.push(x);
    }
    Ok(out)
}

/// Rounds to 12 significant digits.
pub fn r12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub truth: usize,
    /// Declared class, or -1 when implicit.
    pub class: i64,
    pub construction: String,
    pub true_value: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_length: f64,
    pub length_se: f64,
    pub empty: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLength {
    pub class: usize,
    /// Truth points lying in the class.
    pub truths: Vec<usize>,
    pub max_mean_length: f64,
    /// Standard error of the maximizing row.
    pub length_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub pair: String,
    pub omega: f64,
    pub epsilon: f64,
    pub variance: f64,
    pub bias_low: Option<f64>,
    pub bias_high: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs <= rhs + slack`.
    Le,
    /// `lhs >= rhs - slack`.
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: String, lhs: f64, relation: Relation, rhs: f64, slack: f64) -> Verdict {
        let (lhs, rhs, slack) = (r12(lhs), r12(rhs), r12(slack));
        let pass = evaluate(lhs, relation, rhs, slack);
        Verdict { name, lhs, relation, rhs, slack, pass }
    }

    /// Recomputes the verdict from the stored numbers.
    pub fn recheck(&self) -> bool {
        evaluate(self.lhs, self.relation, self.rhs, self.slack)
    }
}

fn evaluate(lhs: f64, relation: Relation, rhs: f64, slack: f64) -> bool {
    match relation {
        Relation::Le => lhs <= rhs + slack,
        Relation::Ge => lhs >= rhs - slack,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub construction: String,
    pub collection: String,
    pub d: usize,
    pub n: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Modulus values the construction is calibrated by.
    pub xi: Vec<f64>,
    pub rows: Vec<TruthRow>,
    pub classes: Vec<ClassLength>,
    pub estimators: Vec<EstimatorRow>,
    pub bounds: Vec<BoundReport>,
    pub verdicts: Vec<Verdict>,
    /// Command-line values that replaced configuration fields.
    #[serde(default)]
    pub overrides: Vec<String>,
    pub note: String,
}

const NOTE: &str = "expected lengths are maxima over the configured truth points, a pointwise surrogate for the supremum over each class";

#[derive(Debug, Clone, Copy)]
struct Draw {
    covered: bool,
    length: f64,
    empty: bool,
}

/// Runs the experiment and attaches bounds and verdicts.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<CoverageReport> {
    cfg.validate_shape()?;
    let truths = truth_vectors(cfg)?;
    let prepared = prepare(cfg, exec)?;
    let w = cfg.linear_functional()?;
    let model = cfg.sequence_model()?;
    let sample_model = if cfg.zero_noise { SequenceModel { sigma: 0.0, ..model } } else { model };
    let tvals: Vec<f64> = truths.iter().map(|x| w.evaluate(x)).collect::<Result<_>>()?;
    let nt = truths.len();
    let reps = cfg.replicates;
    let draws: Vec<Result<Vec<Draw>>> = map_range(reps, exec, |r| {
        (0..nt)
            .map(|t| {
                let seed = derive_replicate_seed(derive_replicate_seed(cfg.seed, t as u64), r as u64);
                let y = sample(&sample_model, &truths[t], seed)?;
                let ci = prepared.interval(&y.y, cfg.alpha)?;
                Ok(Draw { covered: ci.contains(tvals[t]), length: ci.length(), empty: ci.empty })
            })
            .collect()
    });
    let mut by_truth: Vec<Vec<Draw>> = vec![Vec::with_capacity(reps); nt];
    for d in draws {
        for (t, v) in d?.into_iter().enumerate() {
            by_truth[t].push(v);
        }
    }
    let rf = reps as f64;
    let rows: Vec<TruthRow> = by_truth
        .iter()
        .enumerate()
        .map(|(t, ds)| {
            let p = ds.iter().filter(|d| d.covered).count() as f64 / rf;
            let mean = compensated_sum(ds.iter().map(|d| d.length)) / rf;
            let var = if reps > 1 { compensated_sum(ds.iter().map(|d| (d.length - mean).powi(2))) / (rf - 1.0) } else { 0.0 };
            TruthRow {
                truth: t,
                class: cfg.truth_points[t].class.map_or(-1, |c| c as i64),
                construction: cfg.construction.as_str().into(),
                true_value: r12(tvals[t]),
                coverage: r12(p),
                coverage_se: r12((p * (1.0 - p) / rf).sqrt()),
                mean_length: r12(mean),
                length_se: r12((var / rf).sqrt()),
                empty: ds.iter().filter(|d| d.empty).count() as u64,
            }
        })
        .collect();
    let class_rows = class_lengths(cfg, &truths, &rows)?;
    let estimators = prepared
        .estimators()
        .into_iter()
        .map(|(pair, e)| {
            let c = &e.certificate;
            let fin = |v: Option<f64>| v.filter(|x| x.is_finite()).map(r12);
            EstimatorRow {
                pair,
                omega: r12(c.omega),
                epsilon: r12(c.epsilon),
                variance: r12(c.variance),
                bias_low: fin(c.bias_low_on_fj),
                bias_high: fin(c.bias_high_on_fi),
                degenerate: c.degenerate,
            }
        })
        .collect();
    let xi = match &prepared {
        Prepared::Nested(f) | Prepared::NestedCij { family: f, .. } => f.xi.iter().map(|v| r12(*v)).collect(),
        Prepared::Fixed(e) => vec![r12(e.certificate.omega)],
        Prepared::Constrained { matrix, .. } | Prepared::General(matrix) => {
            (0..matrix.k).map(|j| r12((0..matrix.k).map(|i| matrix.omega_plus(i, j)).fold(0.0, f64::max))).collect()
        }
        Prepared::Sparse(p) => vec![r12(p.omega(p.m)), r12(p.omega(0))],
    };
    let bounds: Vec<BoundReport> = attached_bounds(cfg, &prepared)?
        .into_iter()
        .map(|mut b| {
            b.value = r12(b.value);
            for p in &mut b.inputs {
                p.value = r12(p.value);
            }
            b
        })
        .collect();
    let verdicts = verdicts(cfg, &rows, &class_rows, &bounds, &prepared);
    Ok(CoverageReport {
        schema_version: SCHEMA_VERSION,
        construction: cfg.construction.as_str().into(),
        collection: format!("{:?}", cfg.collection.kind).to_lowercase(),
        d: cfg.model.d,
        n: cfg.model.n,
        alpha: cfg.alpha,
        replicates: reps,
        seed: cfg.seed,
        xi,
        rows,
        classes: class_rows,
        estimators,
        bounds,
        verdicts,
        overrides: Vec::new(),
        note: NOTE.into(),
    })
}

fn class_lengths(cfg: &ExperimentConfig, truths: &[Vec<f64>], rows: &[TruthRow]) -> Result<Vec<ClassLength>> {
    if cfg.collection.kind == CollectionKind::NearlyBlack {
        // one row per distinct declared support; all truths share the bound
        let ts: Vec<usize> = (0..rows.len()).collect();
        let (max, se) = max_row(rows, &ts);
        return Ok(vec![ClassLength { class: 0, truths: ts, max_mean_length: max, length_se: se }]);
    }
    let classes = cfg.classes()?;
    Ok(classes
        .iter()
        .enumerate()
        .map(|(c, class)| {
            let ts: Vec<usize> = (0..truths.len()).filter(|&t| class.contains(&truths[t], MEMBERSHIP_TOL)).collect();
            let (max, se) = max_row(rows, &ts);
            ClassLength { class: c, truths: ts, max_mean_length: max, length_se: se }
        })
        .collect())
}

fn max_row(rows: &[TruthRow], ts: &[usize]) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for &t in ts {
        if rows[t].mean_length > best.0 {
            best = (rows[t].mean_length, rows[t].length_se);
        }
    }
    best
}

fn bound(name: &str, side: Side, value: f64, inputs: &[(&str, f64)]) -> BoundReport {
    BoundReport::new(name, side, value, inputs)
}

/// Bounds that apply to the configured construction.
pub fn attached_bounds(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<Vec<BoundReport>> {
    let level = cfg.level()?;
    let model = cfg.sequence_model()?;
    let w = cfg.linear_functional()?;
    let mopts = cfg.modulus_options();
    let alpha = cfg.alpha;
    let n = cfg.model.n;
    let mut out = Vec::new();
    match prepared {
        Prepared::Fixed(e) => {
            let classes = cfg.classes()?;
            out.push(bounds::single_class_lower_bound(&classes[0], &w, &level, &model, &mopts)?);
            out.push(bound("fixed_length", Side::Upper, 2.0 * e.certificate.omega, &[("class", 0.0), ("alpha", alpha), ("n", n)]));
        }
        Prepared::Constrained { matrix, j } => {
            let classes = cfg.classes()?;
            let refs: Vec<&dyn ConvexSetOracle> = classes.iter().map(|c| c as &dyn ConvexSetOracle).collect();
            let om = (0..matrix.k).map(|i| matrix.omega_plus(*j, i)).fold(0.0, f64::max);
            let c = bounds::constrained_length_constant(alpha);
            out.push(bound("constrained_length", Side::Upper, c * om, &[("class", *j as f64), ("constant", c), ("omega", om)]));
            let mut t1 = bounds::theorem1_lower_bound(&classes[*j], &refs, &w, &level, &model, None, &mopts)?;
            t1[0].inputs.push(bounds::Param { name: "class".into(), value: *j as f64 });
            out.extend(t1);
        }
        Prepared::NestedCij { family, j } => {
            let c = bounds::nested_length_constant(alpha);
            let xi = family.xi[*j];
            out.push(bound("nested_cij_length", Side::Upper, c * xi, &[("class", *j as f64), ("constant", c), ("xi", xi)]));
            out.push(bound("nested_cij_length_8", Side::Upper, 8.0 * xi, &[("class", *j as f64), ("xi", xi)]));
            out.push(bound("nested_cij_noncoverage", Side::Upper, bounds::nested_noncoverage(alpha), &[("alpha", alpha)]));
        }
        Prepared::Nested(family) => {
            let lower = nested_lower_bounds(cfg, family, &level, &model, &w, &mopts)?;
            for j in 0..family.k() {
                let xi = family.xi[j];
                if family.subsequence.contains(&j) {
                    out.push(bound("adaptive_length_8", Side::Upper, 8.0 * xi, &[("class", j as f64), ("xi", xi)]));
                }
                out.push(bound("adaptive_length_16", Side::Upper, 16.0 * xi, &[("class", j as f64), ("xi", xi)]));
                out.push(bound("theorem1", Side::Lower, lower[j], &[("class", j as f64), ("alpha", alpha), ("n", n)]));
            }
            out.push(bound("nested_adaptation_ratio", Side::Upper, bounds::nested_adaptation_ratio(alpha), &[("alpha", alpha)]));
            if let Some(extra) = doubling_family_bounds(cfg)? {
                out.extend(extra);
            }
        }
        Prepared::General(matrix) => {
            let classes = cfg.classes()?;
            let k = matrix.k;
            let eps_k = matrix.epsilon;
            let eps_a = level.z_alpha * model.sigma;
            for j in 0..k {
                let om = (0..k).map(|i| matrix.omega_plus(i, j)).fold(0.0, f64::max);
                out.push(bound("general_length", Side::Upper, 12.0 * om, &[("class", j as f64), ("omega", om), ("epsilon", eps_k)]));
                let mut low = 0.0f64;
                for g in &classes {
                    low = low.max(between_modulus(&classes[j], g, &w, eps_a, &mopts)?.value);
                }
                out.push(bound("theorem1", Side::Lower, (0.5 - alpha) * low, &[("class", j as f64), ("alpha", alpha), ("n", n)]));
            }
            out.push(bound("general_adaptation_ratio", Side::Upper, bounds::general_adaptation_ratio(alpha, k), &[("alpha", alpha), ("k", k as f64)]));
        }
        Prepared::Sparse(plan) => {
            let m = plan.m;
            let omega = (2.0 * m as f64).sqrt() * plan.epsilon;
            out.push(bound("general_length", Side::Upper, 12.0 * omega, &[("class", 0.0), ("omega", omega), ("epsilon", plan.epsilon)]));
            let low = (0.5 - alpha) * sparse_modulus(&(0..m).collect::<Vec<_>>(), &(m..2 * m).collect::<Vec<_>>(), level.z_alpha * model.sigma)?;
            out.push(bound("theorem1", Side::Lower, low, &[("class", 0.0), ("alpha", alpha), ("n", n)]));
            out.push(bound("general_adaptation_ratio", Side::Upper, bounds::general_adaptation_ratio(alpha, plan.k), &[("alpha", alpha), ("k", plan.k as f64)]));
            let (mf, nf) = (m as f64, n);
            if mf * mf < nf {
                out.push(bounds::nearly_black_lower_bound(nf, mf, &level)?);
            }
            let hull = Class::new(ClassDescriptor::FullSpace, cfg.model.d)?;
            out.extend(bounds::affine_centered_lower_bound(&hull, &w, &level, &model, &mopts)?);
        }
    }
    Ok(out)
}

fn nested_lower_bounds(
    cfg: &ExperimentConfig,
    family: &NestedFamily,
    level: &ConfidenceLevel,
    model: &SequenceModel,
    w: &LinearFunctional,
    mopts: &ModulusOptions,
) -> Result<Vec<f64>> {
    let classes = cfg.classes()?;
    let k = family.k();
    let eps = level.z_alpha * model.sigma;
    // the union is the outer class for nested families; otherwise take
    // the maximum over its members
    let outer: Vec<&Class> =
        if cfg.construction == Construction::HullNested { classes.iter().collect() } else { vec![&classes[k - 1]] };
    (0..k)
        .map(|j| {
            let mut best = 0.0f64;
            for g in &outer {
                best = best.max(between_modulus(&classes[j], *g, w, eps, mopts)?.value);
            }
            Ok((0.5 - level.alpha) * best)
        })
        .collect()
}

/// Closed-form length bounds when the family is `F_D(beta, M_j)` with
/// point evaluation.
fn doubling_family_bounds(cfg: &ExperimentConfig) -> Result<Option<Vec<BoundReport>>> {
    if cfg.functional != FunctionalSpec::PointEvaluation || cfg.construction != Construction::AdaptiveNested {
        return Ok(None);
    }
    let mut params = Vec::new();
    for c in &cfg.collection.classes {
        match c {
            ClassDescriptor::MonotoneLipschitz { beta, m } => params.push((*beta, *m)),
            _ => return Ok(None),
        }
    }
    // radii must form the chain M_{j+1} = 2^{2 beta + 1} M_j
    let beta = params[0].0;
    let ratio = 2f64.powf(2.0 * beta + 1.0);
    let chain = params.windows(2).all(|p| p[1].0 == beta && ((p[1].1 / p[0].1) / ratio - 1.0).abs() < 1e-9);
    if !chain {
        return Ok(None);
    }
    let mut out = Vec::new();
    for (j, (beta, m)) in params.into_iter().enumerate() {
        let mut b = bounds::lipschitz_length_bound(beta, m, cfg.alpha, cfg.model.n, true)?;
        b.inputs.insert(0, bounds::Param { name: "class".into(), value: j as f64 });
        out.push(b);
    }
    Ok(Some(out))
}

fn bounds_for_class<'a>(bounds: &'a [BoundReport], name: &str, class: usize) -> Option<&'a BoundReport> {
    bounds.iter().find(|b| b.name == name && b.input("class") == Some(class as f64))
}

fn verdicts(
    cfg: &ExperimentConfig,
    rows: &[TruthRow],
    classes: &[ClassLength],
    bounds: &[BoundReport],
    prepared: &Prepared,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let alpha = cfg.alpha;
    let target_miss = match prepared {
        Prepared::NestedCij { .. } => bounds::nested_noncoverage(alpha),
        _ => alpha,
    };
    for r in rows {
        out.push(Verdict::new(format!("coverage[{}]", r.truth), 1.0 - r.coverage, Relation::Le, target_miss, SE_SLACK * r.coverage_se));
    }
    let length_names: &[&str] = match prepared {
        Prepared::Fixed(_) => &["fixed_length"],
        Prepared::Constrained { .. } => &["constrained_length"],
        Prepared::NestedCij { .. } => &["nested_cij_length", "nested_cij_length_8"],
        Prepared::Nested(_) => &["adaptive_length_8", "adaptive_length_16", "doubling_family_length"],
        Prepared::General(_) | Prepared::Sparse(_) => &["general_length"],
    };
    let only_target = match prepared {
        Prepared::Constrained { j, .. } | Prepared::NestedCij { j, .. } => Some(*j),
        _ => None,
    };
    for cl in classes {
        if cl.truths.is_empty() || only_target.is_some_and(|j| j != cl.class) {
            continue;
        }
        for name in length_names {
            if let Some(b) = bounds_for_class(bounds, name, cl.class) {
                out.push(Verdict::new(format!("{name}[{}]", cl.class), cl.max_mean_length, Relation::Le, b.value, SE_SLACK * cl.length_se));
            }
        }
        let ratio_name = match prepared {
            Prepared::Nested(_) => Some("nested_adaptation_ratio"),
            Prepared::General(_) | Prepared::Sparse(_) => Some("general_adaptation_ratio"),
            _ => None,
        };
        if let (Some(rn), Some(low)) = (ratio_name, bounds_for_class(bounds, "theorem1", cl.class)) {
            if let Some(rb) = bounds.iter().find(|b| b.name == rn) {
                if low.value > 0.0 {
                    out.push(Verdict::new(
                        format!("{rn}[{}]", cl.class),
                        cl.max_mean_length / low.value,
                        Relation::Le,
                        rb.value,
                        SE_SLACK * cl.length_se / low.value,
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "record,truth,class,construction,true_value,coverage,coverage_se,mean_length,length_se,empty,name,side,value,parameters,pass";

/// Formats with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let v = r12(x);
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e12).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn report_to_csv(report: &CoverageReport) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "truth,{},{},{},{},{},{},{},{},{},,,,,",
            r.truth,
            r.class,
            r.construction,
            fmt12(r.true_value),
            fmt12(r.coverage),
            fmt12(r.coverage_se),
            fmt12(r.mean_length),
            fmt12(r.length_se),
            r.empty
        );
    }
    for c in &report.classes {
        let _ = writeln!(s, "class,,{},{},,,,{},{},,,,,,", c.class, report.construction, fmt12(c.max_mean_length), fmt12(c.length_se));
    }
    for b in &report.bounds {
        let _ = writeln!(s, "bound,,,,,,,,,,{},{},{},{},", b.name, b.side.as_str(), fmt12(b.value), params(b));
    }
    for o in &report.overrides {
        let _ = writeln!(s, "override,,,,,,,,,,{o},,,,");
    }
    for v in &report.verdicts {
        let rel = match v.relation {
            Relation::Le => "le",
            Relation::Ge => "ge",
        };
        let _ = writeln!(
            s,
            "verdict,,,,,,,,,,{},{},{},lhs={};rhs={};slack={},{}",
            v.name,
            rel,
            fmt12(v.lhs),
            fmt12(v.lhs),
            fmt12(v.rhs),
            fmt12(v.slack),
            v.pass
        );
    }
    s
}

fn params(b: &BoundReport) -> String {
    b.inputs.iter().map(|p| format!("{}={}", p.name, fmt12(p.value))).collect::<Vec<_>>().join(";")
}

/// `name,side,value,parameters` rows.
pub fn bounds_to_csv(bounds: &[BoundReport]) -> String {
    let mut s = String::from("name,side,value,parameters\n");
    for b in bounds {
        let _ = writeln!(s, "{},{},{},{}", b.name, b.side.as_str(), fmt12(b.value), params(b));
    }
    s
}

pub fn report_to_json(report: &CoverageReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Input(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn report_from_json(text: &str) -> Result<CoverageReport> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("cannot parse report: {e}")))
}

/// Writes the report; the file is only created once serialization
/// succeeded.
pub fn emit_report(report: &CoverageReport, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => report_to_csv(report),
        Format::Json => report_to_json(report)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub from: usize,
    pub to: usize,
    pub epsilon: f64,
    pub value: f64,
    pub direction: String,
    pub feasibility_gap: f64,
    pub method: String,
    pub closed_form: Option<f64>,
}

/// Between-class moduli over the configured grid and pairs, with the
/// closed form where one is known.
pub fn modulus_table(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<ModulusRow>> {
    let spec = cfg.modulus.as_ref().ok_or_else(|| Error::Config("modulus: section required".into()))?;
    if cfg.collection.kind == CollectionKind::NearlyBlack {
        return config_err("modulus: list the subspaces explicitly as a general collection");
    }
    let classes = cfg.classes()?;
    let w = cfg.linear_functional()?;
    let mopts = cfg.modulus_options();
    let k = classes.len();
    let pairs: Vec<(usize, usize)> =
        if spec.pairs.is_empty() { (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect() } else { spec.pairs.clone() };
    let jobs: Vec<(usize, usize, f64)> =
        pairs.iter().flat_map(|&(i, j)| spec.epsilons.iter().map(move |&e| (i, j, e))).collect();
    let rows = crate::par::try_map_range(jobs.len(), exec, |q| {
        let (i, j, e) = jobs[q];
        let r = between_modulus(&classes[i], &classes[j], &w, e, &mopts)?;
        let closed = closed_form(cfg, &classes[i], &classes[j], &w, e);
        Ok::<_, Error>(ModulusRow {
            from: i,
            to: j,
            epsilon: r12(e),
            value: r12(r.value),
            direction: r.direction.as_str().into(),
            feasibility_gap: r12(r.feasibility_gap),
            method: r.method.as_str().into(),
            closed_form: closed.map(r12),
        })
    })?;
    Ok(rows)
}

fn closed_form(cfg: &ExperimentConfig, f: &Class, g: &Class, w: &LinearFunctional, eps: f64) -> Option<f64> {
    use ClassDescriptor as C;
    match (f.desc(), g.desc()) {
        (C::SparseSubspace { support: i }, C::SparseSubspace { support: j }) => crate::modulus::sparse_modulus_for(w, i, j, eps).ok(),
        (C::MonotoneLipschitz { beta, m }, C::Monotone) | (C::Monotone, C::MonotoneLipschitz { beta, m })
            if cfg.functional == FunctionalSpec::PointEvaluation =>
        {
            crate::modulus::lipschitz_modulus_closed_form(*beta, *m, eps).ok()
        }
        _ => None,
    }
}

pub fn modulus_to_csv(rows: &[ModulusRow]) -> String {
    let mut s = String::from("from,to,epsilon,value,direction,feasibility_gap,method,closed_form\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.from,
            r.to,
            fmt12(r.epsilon),
            fmt12(r.value),
            r.direction,
            fmt12(r.feasibility_gap),
            r.method,
            r.closed_form.map(fmt12).unwrap_or_default()
        );
    }
    s
}

/// Bounds for the configured collection without running replicates.
pub fn evaluate_bounds(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<BoundReport>> {
    cfg.validate_shape()?;
    let prepared = prepare(cfg, exec)?;
    Ok(attached_bounds(cfg, &prepared)?
        .into_iter()
        .map(|mut b| {
            b.value = r12(b.value);
            for p in &mut b.inputs {
                p.value = r12(p.value);
            }
            b
        })
        .collect())
}
