//! Linear-inequality description shared by the projection and interior
//! point solvers.

/// `lo <= x[i] - x[j] <= hi`; either side may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBound {
    pub i: u32,
    pub j: u32,
    pub lo: f64,
    pub hi: f64,
}

/// Difference constraints, coordinate bounds and coordinates pinned to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub dim: usize,
    pub pairs: Vec<PairBound>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixed_zero: Vec<bool>,
}

impl Polyhedron {
    pub fn free(dim: usize) -> Polyhedron {
        Polyhedron {
            dim,
            pairs: Vec::new(),
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            fixed_zero: vec![false; dim],
        }
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.pairs {
            let v = x[p.i as usize] - x[p.j as usize];
            worst = worst.max(v - p.hi).max(p.lo - v);
        }
        for i in 0..self.dim {
            worst = worst.max(x[i] - self.upper[i]).max(self.lower[i] - x[i]);
            if self.fixed_zero[i] {
                worst = worst.max(x[i].abs());
            }
        }
        worst
    }

    /// Number of finite one-sided inequalities.
    pub fn inequality_count(&self) -> usize {
        let p: usize = self.pairs.iter().map(|p| p.lo.is_finite() as usize + p.hi.is_finite() as usize).sum();
        let b: usize = (0..self.dim)
            .filter(|&i| !self.fixed_zero[i])
            .map(|i| self.lower[i].is_finite() as usize + self.upper[i].is_finite() as usize)
            .sum();
        p + b
    }

    /// Upper limit `s_max` such that `s * dir` is strictly interior for all
    /// `0 < s < s_max`, or `None` when `dir` points outside. Returns
    /// `Some(inf)` for unbounded rays. Pinned coordinates are ignored.
    pub fn ray_limit(&self, dir: &[f64]) -> Option<f64> {
        let mut lim = f64::INFINITY;
        let mut check = |v: f64, lo: f64, hi: f64| -> bool {
            if v > 0.0 {
                if hi <= 0.0 {
                    return false;
                }
                lim = lim.min(hi / v);
            } else if v < 0.0 {
                if lo >= 0.0 {
                    return false;
                }
                lim = lim.min(lo / v);
            } else if !(lo < 0.0 && hi > 0.0) {
                return false;
            }
            true
        };
        for p in &self.pairs {
            if !check(dir[p.i as usize] - dir[p.j as usize], p.lo, p.hi) {
                return None;
            }
        }
        for i in 0..self.dim {
            if self.fixed_zero[i] || (self.lower[i] == f64::NEG_INFINITY && self.upper[i] == f64::INFINITY) {
                continue;
            }
            if !check(dir[i], self.lower[i], self.upper[i]) {
                return None;
            }
        }
        Some(lim)
    }

    /// Whether 0 is strictly interior (ignoring pinned coordinates).
    pub fn zero_is_interior(&self) -> bool {
        self.pairs.iter().all(|p| p.lo < 0.0 && p.hi > 0.0)
            && (0..self.dim).all(|i| self.fixed_zero[i] || (self.lower[i] < 0.0 && self.upper[i] > 0.0))
    }

    /// Groups of coordinates that may move together by a common shift
    /// without leaving the set: connected through finite pair constraints
    /// and containing no bounded or pinned coordinate. Constant vectors on
    /// each group span the lineality space.
    pub fn lineality_groups(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.dim).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for p in &self.pairs {
            if p.lo.is_finite() || p.hi.is_finite() {
                let a = find(&mut parent, p.i as usize);
                let b = find(&mut parent, p.j as usize);
                parent[a] = b;
            }
        }
        let mut anchored = vec![false; self.dim];
        for i in 0..self.dim {
            if self.fixed_zero[i] || self.lower[i].is_finite() || self.upper[i].is_finite() {
                let r = find(&mut parent, i);
                anchored[r] = true;
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for i in 0..self.dim {
            let r = find(&mut parent, i);
            if !anchored[r] {
                groups[r].push(i);
            }
        }
        groups.into_iter().filter(|g| !g.is_empty()).collect()
    }
}
