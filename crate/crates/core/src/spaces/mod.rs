//! Catalog of convex parameter spaces on the grid embedding.
//!
//! Every catalog class carries a linear-inequality description
//! ([`Polyhedron`]) and an exact or iterative Euclidean projection.

pub mod chain;
pub mod dykstra;
pub mod pava;
pub mod polyhedron;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::seqmodel::Grid;
pub use dykstra::DykstraOptions;
pub use polyhedron::{PairBound, Polyhedron};

/// Kind and parameters of a catalog class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassDescriptor {
    /// Hölder ball `|f(x) - f(y)| <= M |x - y|^beta` for `x, y` in `[a, b]`.
    Lipschitz {
        beta: f64,
        m: f64,
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
    },
    /// Nonincreasing functions in the Hölder ball on the whole interval.
    MonotoneLipschitz { beta: f64, m: f64 },
    /// All nonincreasing functions.
    Monotone,
    /// Separate Hölder conditions left and right of 0, optionally monotone.
    PiecewiseLipschitz { beta1: f64, m1: f64, beta2: f64, m2: f64, monotone: bool },
    /// Vectors vanishing outside `support` (0-based indices).
    SparseSubspace { support: Vec<usize> },
    /// `|x_i| <= tau` coordinatewise.
    Box { tau: f64 },
    FullSpace,
}

fn default_a() -> f64 {
    -0.5
}

fn default_b() -> f64 {
    0.5
}

impl ClassDescriptor {
    pub fn validate(&self, d: usize) -> Result<()> {
        let holder = |beta: f64, m: f64| -> Result<()> {
            if !(beta > 0.0 && beta <= 1.0) {
                return input(format!("exponent beta must lie in (0, 1], got {beta}"));
            }
            if !(m > 0.0) || !m.is_finite() {
                return input(format!("radius M must be positive and finite, got {m}"));
            }
            Ok(())
        };
        match self {
            ClassDescriptor::Lipschitz { beta, m, a, b } => {
                holder(*beta, *m)?;
                if !(-0.5 <= *a && a < b && *b <= 0.5) {
                    return input(format!("interval [{a}, {b}] must satisfy -1/2 <= a < b <= 1/2"));
                }
            }
            ClassDescriptor::MonotoneLipschitz { beta, m } => holder(*beta, *m)?,
            ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, .. } => {
                holder(*beta1, *m1)?;
                holder(*beta2, *m2)?;
            }
            ClassDescriptor::SparseSubspace { support } => {
                if support.is_empty() {
                    return input("sparse subspace needs a nonempty support");
                }
                if let Some(&i) = support.iter().find(|&&i| i >= d) {
                    return input(format!("support index {i} out of range for d = {d}"));
                }
            }
            ClassDescriptor::Box { tau } => {
                if !(*tau > 0.0) || !tau.is_finite() {
                    return input(format!("box bound must be positive, got {tau}"));
                }
            }
            ClassDescriptor::Monotone | ClassDescriptor::FullSpace => {}
        }
        let needs_grid = !matches!(
            self,
            ClassDescriptor::SparseSubspace { .. } | ClassDescriptor::Box { .. } | ClassDescriptor::FullSpace
        );
        if needs_grid && d < 2 {
            return input("function classes need d >= 2");
        }
        Ok(())
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            ClassDescriptor::Lipschitz { beta, m, a, b } => {
                if *a == -0.5 && *b == 0.5 {
                    format!("F({beta},{m})")
                } else {
                    format!("F({beta},{m},[{a},{b}])")
                }
            }
            ClassDescriptor::MonotoneLipschitz { beta, m } => format!("F_D({beta},{m})"),
            ClassDescriptor::Monotone => "D".to_string(),
            ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone } => {
                let p = if *monotone { "F_D" } else { "F" };
                format!("{p}({beta1},{m1},{beta2},{m2})")
            }
            ClassDescriptor::SparseSubspace { support } => {
                let s: Vec<String> = support.iter().map(|i| i.to_string()).collect();
                format!("F_I{{{}}}", s.join(","))
            }
            ClassDescriptor::Box { tau } => format!("Box({tau})"),
            ClassDescriptor::FullSpace => "R^d".to_string(),
        }
    }

    /// `Some(true)` when `self` is known to be a subset of `other` from the
    /// parameters alone, `None` when the parameters do not settle it.
    pub fn known_subset_of(&self, other: &ClassDescriptor) -> Option<bool> {
        use ClassDescriptor as C;
        if self == other {
            return Some(true);
        }
        match (self, other) {
            (_, C::FullSpace) => Some(true),
            (C::Monotone | C::MonotoneLipschitz { .. }, C::Monotone) => Some(true),
            (C::PiecewiseLipschitz { monotone: true, .. }, C::Monotone) => Some(true),
            (C::MonotoneLipschitz { beta: b1, m: m1 }, C::MonotoneLipschitz { beta: b2, m: m2 })
            | (C::MonotoneLipschitz { beta: b1, m: m1 }, C::Lipschitz { beta: b2, m: m2, a: _, b: _ }) => {
                if let C::Lipschitz { a, b, .. } = other {
                    if *a < -0.5 || *b > 0.5 {
                        return None;
                    }
                }
                // on a unit-length interval |x-y|^b1 <= |x-y|^b2 when b1 >= b2
                Some(b1 >= b2 && m1 <= m2)
            }
            (C::Lipschitz { beta: b1, m: m1, a: a1, b: e1 }, C::Lipschitz { beta: b2, m: m2, a: a2, b: e2 }) => {
                Some(b1 >= b2 && m1 <= m2 && a1 <= a2 && e1 >= e2)
            }
            (
                C::PiecewiseLipschitz { beta1: p1, m1: q1, beta2: p2, m2: q2, monotone: s1 },
                C::PiecewiseLipschitz { beta1: r1, m1: n1, beta2: r2, m2: n2, monotone: s2 },
            ) => Some(p1 >= r1 && q1 <= n1 && p2 >= r2 && q2 <= n2 && (*s1 || !*s2)),
            (C::SparseSubspace { support: s }, C::SparseSubspace { support: t }) => {
                Some(s.iter().all(|i| t.contains(i)))
            }
            (C::Box { tau: t1 }, C::Box { tau: t2 }) => Some(t1 <= t2),
            _ => None,
        }
    }
}

/// A convex set exposed through its Euclidean projection.
pub trait ConvexSetOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn project(&self, x: &[f64]) -> Vec<f64>;
    fn contains(&self, x: &[f64], tol: f64) -> bool;
    fn descriptor(&self) -> Option<&ClassDescriptor> {
        None
    }
    /// Linear-inequality description, when the set is polyhedral.
    fn polyhedron(&self) -> Option<&Polyhedron> {
        None
    }
}

#[derive(Debug, Clone)]
enum Projector {
    Identity,
    Zero,
    Clamp,
    Pava,
    Chain { lo: Vec<f64>, hi: Vec<f64> },
    Dykstra,
}

/// Grid embedding of a catalog class.
#[derive(Debug, Clone)]
pub struct Class {
    desc: ClassDescriptor,
    grid: Grid,
    poly: Polyhedron,
    projector: Projector,
    pub dykstra: DykstraOptions,
}

/// Hölder constraint on grid values, in stored coordinates.
fn holder_bound(grid: &Grid, m: f64, beta: f64, i: usize, j: usize) -> f64 {
    grid.scale() * m * (grid.t[j] - grid.t[i]).abs().powf(beta)
}

/// Pairs enforcing a Hölder condition on the index range `idx`.
fn holder_pairs(grid: &Grid, idx: std::ops::RangeInclusive<usize>, beta: f64, m: f64, monotone: bool) -> Vec<PairBound> {
    let (s, e) = (*idx.start(), *idx.end());
    let mut pairs = Vec::new();
    for i in s..e {
        let c = holder_bound(grid, m, beta, i, i + 1);
        let lo = if monotone { 0.0 } else { -c };
        pairs.push(PairBound { i: i as u32, j: (i + 1) as u32, lo, hi: c });
    }
    if beta < 1.0 {
        for i in s..=e {
            for j in i + 2..=e {
                let c = holder_bound(grid, m, beta, i, j);
                // the lower side is implied by monotonicity
                let lo = if monotone { f64::NEG_INFINITY } else { -c };
                pairs.push(PairBound { i: i as u32, j: j as u32, lo, hi: c });
            }
        }
    }
    pairs
}

fn build_polyhedron(desc: &ClassDescriptor, grid: &Grid) -> Polyhedron {
    let d = grid.d;
    let mut poly = Polyhedron::free(d);
    match desc {
        ClassDescriptor::Lipschitz { beta, m, a, b } => {
            let eps = 1e-12;
            let inside: Vec<usize> = (0..d).filter(|&i| grid.t[i] >= a - eps && grid.t[i] <= b + eps).collect();
            if inside.len() >= 2 {
                poly.pairs = holder_pairs(grid, inside[0]..=inside[inside.len() - 1], *beta, *m, false);
            }
        }
        ClassDescriptor::MonotoneLipschitz { beta, m } => {
            poly.pairs = holder_pairs(grid, 0..=d - 1, *beta, *m, true);
        }
        ClassDescriptor::Monotone => {
            poly.pairs = (0..d - 1)
                .map(|i| PairBound { i: i as u32, j: (i + 1) as u32, lo: 0.0, hi: f64::INFINITY })
                .collect();
        }
        ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone } => {
            let i0 = grid.i0;
            let mut pairs = Vec::new();
            if i0 >= 1 {
                pairs.extend(holder_pairs(grid, 0..=i0, *beta1, *m1, *monotone));
            }
            if i0 + 1 < d {
                pairs.extend(holder_pairs(grid, i0..=d - 1, *beta2, *m2, *monotone));
            }
            poly.pairs = pairs;
        }
        ClassDescriptor::SparseSubspace { support } => {
            poly.fixed_zero = vec![true; d];
            for &i in support {
                poly.fixed_zero[i] = false;
            }
        }
        ClassDescriptor::Box { tau } => {
            poly.lower = vec![-tau; d];
            poly.upper = vec![*tau; d];
        }
        ClassDescriptor::FullSpace => {}
    }
    poly
}

fn choose_projector(desc: &ClassDescriptor, poly: &Polyhedron) -> Projector {
    match desc {
        ClassDescriptor::FullSpace => return Projector::Identity,
        ClassDescriptor::SparseSubspace { .. } => return Projector::Zero,
        ClassDescriptor::Box { .. } => return Projector::Clamp,
        ClassDescriptor::Monotone => return Projector::Pava,
        _ => {}
    }
    let d = poly.dim;
    let adjacent_only = poly.pairs.iter().all(|p| p.j == p.i + 1);
    if adjacent_only && d >= 1 {
        let mut lo = vec![f64::NEG_INFINITY; d.saturating_sub(1)];
        let mut hi = vec![f64::INFINITY; d.saturating_sub(1)];
        for p in &poly.pairs {
            let k = p.i as usize;
            lo[k] = lo[k].max(p.lo);
            hi[k] = hi[k].min(p.hi);
        }
        Projector::Chain { lo, hi }
    } else {
        Projector::Dykstra
    }
}

impl Class {
    pub fn new(desc: ClassDescriptor, d: usize) -> Result<Class> {
        desc.validate(d)?;
        let grid = Grid::new(d)?;
        let poly = build_polyhedron(&desc, &grid);
        let projector = choose_projector(&desc, &poly);
        Ok(Class { desc, grid, poly, projector, dykstra: DykstraOptions::default() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn desc(&self) -> &ClassDescriptor {
        &self.desc
    }

    pub fn poly(&self) -> &Polyhedron {
        &self.poly
    }

    /// Projection that also reports whether an iterative method converged.
    pub fn project_checked(&self, x: &[f64]) -> (Vec<f64>, bool) {
        match &self.projector {
            Projector::Identity => (x.to_vec(), true),
            Projector::Zero => {
                let y = x.iter().zip(&self.poly.fixed_zero).map(|(&v, &z)| if z { 0.0 } else { v }).collect();
                (y, true)
            }
            Projector::Clamp => {
                let y = x.iter().enumerate().map(|(i, v)| v.clamp(self.poly.lower[i], self.poly.upper[i])).collect();
                (y, true)
            }
            Projector::Pava => (pava::project_decreasing(x), true),
            Projector::Chain { lo, hi } => (chain::project_chain(x, lo, hi), true),
            Projector::Dykstra => {
                let out = dykstra::project_polyhedron(&self.poly, x, self.dykstra);
                let scale = 1.0 + out.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if out.converged && self.poly.violation(&out.x) <= 1e-9 * scale {
                    return (out.x, true);
                }
                // slow cyclic convergence: solve the projection QP directly
                match crate::solver::project_qp(&self.poly, x, crate::solver::IpmOptions::default()) {
                    Ok(p) => (p, true),
                    Err(_) => (out.x, false),
                }
            }
        }
    }

    /// Violation of the Hölder condition over all grid pairs, including the
    /// ones the description leaves implicit.
    pub fn all_pairs_violation(&self, x: &[f64]) -> f64 {
        let mut worst = self.poly.violation(x);
        let g = &self.grid;
        let mut check = |beta: f64, m: f64, s: usize, e: usize, monotone: bool| {
            for i in s..=e {
                for j in i + 1..=e {
                    let c = holder_bound(g, m, beta, i, j);
                    let v = x[i] - x[j];
                    worst = worst.max(v.abs() - c);
                    if monotone {
                        worst = worst.max(-v);
                    }
                }
            }
        };
        match &self.desc {
            ClassDescriptor::Lipschitz { beta, m, a, b } => {
                let inside: Vec<usize> = (0..g.d).filter(|&i| g.t[i] >= a - 1e-12 && g.t[i] <= b + 1e-12).collect();
                if let (Some(&s), Some(&e)) = (inside.first(), inside.last()) {
                    check(*beta, *m, s, e, false);
                }
            }
            ClassDescriptor::MonotoneLipschitz { beta, m } => check(*beta, *m, 0, g.d - 1, true),
            ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone } => {
                check(*beta1, *m1, 0, g.i0, *monotone);
                check(*beta2, *m2, g.i0, g.d - 1, *monotone);
            }
            _ => {}
        }
        worst
    }
}

impl ConvexSetOracle for Class {
    fn dim(&self) -> usize {
        self.grid.d
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.project_checked(x).0
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.grid.d && self.poly.violation(x) <= tol
    }

    fn descriptor(&self) -> Option<&ClassDescriptor> {
        Some(&self.desc)
    }

    fn polyhedron(&self) -> Option<&Polyhedron> {
        Some(&self.poly)
    }
}

pub fn make_lipschitz(beta: f64, m: f64, a: f64, b: f64, d: usize) -> Result<Class> {
    Class::new(ClassDescriptor::Lipschitz { beta, m, a, b }, d)
}

pub fn make_monotone_lipschitz(beta: f64, m: f64, d: usize) -> Result<Class> {
    Class::new(ClassDescriptor::MonotoneLipschitz { beta, m }, d)
}

pub fn make_piecewise_lipschitz(beta1: f64, m1: f64, beta2: f64, m2: f64, d: usize, monotone: bool) -> Result<Class> {
    Class::new(ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone }, d)
}

pub fn make_sparse_subspace(support: &[usize], d: usize) -> Result<Class> {
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    Class::new(ClassDescriptor::SparseSubspace { support: s }, d)
}

/// A collection of classes whose convex hull may be available in closed form.
#[derive(Debug, Clone)]
pub enum Family {
    /// Declared nested, innermost first.
    Nested(Vec<Class>),
    /// Union of all coordinate subspaces with support size `m` in `R^d`.
    SparseUnion { d: usize, m: usize },
    /// Any other finite union.
    Union(Vec<Class>),
}

/// Checks a declared inclusion, first from parameters and otherwise by
/// projecting random vectors onto `inner` and testing membership in `outer`.
pub fn spot_check_subset(inner: &Class, outer: &Class, trials: usize, seed: u64) -> bool {
    if let Some(known) = inner.desc().known_subset_of(outer.desc()) {
        return known;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = inner.dim();
    (0..trials).all(|_| {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = inner.project(&x);
        outer.contains(&p, 1e-6)
    })
}

/// Convex hull of a family from the closed-form table.
pub fn hull(family: &Family) -> Result<Class> {
    match family {
        Family::Nested(classes) => {
            let last = classes.last().ok_or_else(|| Error::Input("empty family".into()))?;
            for (k, w) in classes.windows(2).enumerate() {
                if !spot_check_subset(&w[0], &w[1], 20, k as u64) {
                    return Err(Error::Input(format!(
                        "declared nesting fails: {} is not inside {}",
                        w[0].desc().label(),
                        w[1].desc().label()
                    )));
                }
            }
            Ok(last.clone())
        }
        Family::SparseUnion { d, m } => {
            if *m == 0 || m > d {
                return input(format!("sparse union needs 1 <= m <= d, got m = {m}, d = {d}"));
            }
            Class::new(ClassDescriptor::FullSpace, *d)
        }
        Family::Union(classes) => {
            let first = classes.first().ok_or_else(|| Error::Input("empty family".into()))?;
            let d = first.dim();
            let mut support = Vec::new();
            let all_sparse = classes.iter().all(|c| match c.desc() {
                ClassDescriptor::SparseSubspace { support: s } => {
                    support.extend_from_slice(s);
                    true
                }
                _ => false,
            });
            if all_sparse {
                return make_sparse_subspace(&support, d);
            }
            // a member containing every other member is the hull
            for outer in classes {
                if classes.iter().all(|c| c.desc().known_subset_of(outer.desc()) == Some(true)) {
                    return Ok(outer.clone());
                }
            }
            Err(Error::Unsupported("no closed-form hull for this family".into()))
        }
    }
}
