//! Sites of Z^d, finite symmetric generator sets and single-site step laws.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

/// Largest lattice dimension supported by the fixed-size site representation.
pub const MAX_DIM: usize = 4;

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;

/// A point of Z^d stored in a fixed-width array; unused trailing
/// coordinates are always zero, so equality and ordering ignore `d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site([i64; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    /// Builds a site from at most [`MAX_DIM`] coordinates.
    ///
    /// Panics if more coordinates are supplied; every public entry point
    /// validates the dimension before constructing sites.
    pub fn new(coords: &[i64]) -> Self {
        assert!(coords.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", coords.len());
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    /// The `i`-th unit vector.
    pub fn unit(i: usize) -> Self {
        let mut c = [0; MAX_DIM];
        c[i] = 1;
        Site(c)
    }

    pub fn coord(&self, i: usize) -> i64 {
        self.0[i]
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.0[..dim]
    }

    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }

    pub fn offset(&self, step: &Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(step.0.iter()) {
            *a += *b;
        }
        Site(c)
    }

    pub fn neg(&self) -> Site {
        let mut c = self.0;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Site(c)
    }

    pub fn sub(&self, other: &Site) -> Site {
        self.offset(&other.neg())
    }

    /// Sup norm.
    pub fn linf(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Trailing zeros are dropped, but at least one coordinate is printed.
        let last = self.0.iter().rposition(|&a| a != 0).unwrap_or(0);
        write!(f, "(")?;
        for (i, a) in self.0[..=last].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// A finite symmetric set of nonzero steps generating Z^d, together with a
/// designated symmetric generating subset S′ on which ellipticity is imposed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorSetRepr", into = "GeneratorSetRepr")]
pub struct GeneratorSet {
    dim: usize,
    steps: Vec<Site>,
    minimal: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorSetRepr {
    dimension: usize,
    steps: Vec<Vec<i64>>,
    minimal: Vec<usize>,
}

impl TryFrom<GeneratorSetRepr> for GeneratorSet {
    type Error = LatticeError;
    fn try_from(r: GeneratorSetRepr) -> Result<Self, Self::Error> {
        GeneratorSet::new(r.dimension, r.steps, r.minimal)
    }
}

impl From<GeneratorSet> for GeneratorSetRepr {
    fn from(g: GeneratorSet) -> Self {
        GeneratorSetRepr { dimension: g.dim, steps: g.steps.iter().map(|s| s.coords(g.dim).to_vec()).collect(), minimal: g.minimal }
    }
}

impl GeneratorSet {
    /// Validates and builds a generator set. `minimal` lists indices into
    /// `steps` forming S′.
    pub fn new(dim: usize, steps: Vec<Vec<i64>>, minimal: Vec<usize>) -> Result<Self, LatticeError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LatticeError::Dimension { dim, max: MAX_DIM });
        }
        let mut sites = Vec::with_capacity(steps.len());
        for (i, s) in steps.iter().enumerate() {
            if s.len() != dim {
                return Err(LatticeError::StepLength { index: i, len: s.len(), dim });
            }
            let site = Site::new(s);
            if site.is_origin() {
                return Err(LatticeError::ZeroStep { index: i });
            }
            if sites.contains(&site) {
                return Err(LatticeError::DuplicateStep { step: site.to_string() });
            }
            sites.push(site);
        }
        if sites.is_empty() {
            return Err(LatticeError::Empty);
        }
        for s in &sites {
            if !sites.contains(&s.neg()) {
                return Err(LatticeError::NotSymmetric { step: s.to_string() });
            }
        }
        let mut seen = vec![false; sites.len()];
        for &i in &minimal {
            if i >= sites.len() {
                return Err(LatticeError::MinimalIndex { index: i, len: sites.len() });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(LatticeError::MinimalIndex { index: i, len: sites.len() });
            }
        }
        let sub: Vec<Site> = minimal.iter().map(|&i| sites[i]).collect();
        for s in &sub {
            if !sub.contains(&s.neg()) {
                return Err(LatticeError::MinimalNotSymmetric { step: s.to_string() });
            }
        }
        if !spans_integer_lattice(&sub, dim) {
            return Err(LatticeError::MinimalNotGenerating);
        }
        Ok(GeneratorSet { dim, steps: sites, minimal })
    }

    /// The nearest-neighbour set `+e1, -e1, +e2, -e2, ...` with S′ = S.
    pub fn nearest_neighbor(dim: usize) -> Result<Self, LatticeError> {
        let mut steps = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0; dim];
            e[i] = 1;
            steps.push(e.clone());
            e[i] = -1;
            steps.push(e);
        }
        let minimal = (0..steps.len()).collect();
        GeneratorSet::new(dim, steps, minimal)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[Site] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn minimal(&self) -> &[usize] {
        &self.minimal
    }

    pub fn index_of(&self, step: &Site) -> Option<usize> {
        self.steps.iter().position(|s| s == step)
    }

    /// Largest sup-norm of a step.
    pub fn max_jump(&self) -> i64 {
        self.steps.iter().map(Site::linf).max().unwrap_or(0)
    }

    /// True when the set is exactly `{±e_i : 1 ≤ i ≤ d}` (in any order).
    pub fn is_nearest_neighbor(&self) -> bool {
        self.steps.len() == 2 * self.dim && self.steps.iter().all(|s| s.linf() == 1 && s.0.iter().filter(|&&a| a != 0).count() == 1)
    }

    /// Lower bound on the number of steps needed to travel from `a` to `b`.
    pub fn min_steps_between(&self, a: &Site, b: &Site) -> i64 {
        let d = a.sub(b).linf();
        let j = self.max_jump();
        (d + j - 1) / j
    }
}

/// Integer row reduction: the rows span Z^d exactly when the echelon form
/// has `dim` pivots, all of absolute value one.
#[allow(clippy::explicit_counter_loop)]
fn spans_integer_lattice(vectors: &[Site], dim: usize) -> bool {
    let mut rows: Vec<Vec<i128>> = vectors.iter().map(|v| v.coords(dim).iter().map(|&a| a as i128).collect()).collect();
    let mut pivot_row = 0;
    for col in 0..dim {
        loop {
            // Smallest nonzero entry in this column among the remaining rows.
            let best = (pivot_row..rows.len()).filter(|&r| rows[r][col] != 0).min_by_key(|&r| rows[r][col].abs());
            let Some(p) = best else { return false };
            rows.swap(pivot_row, p);
            let pv = rows[pivot_row][col];
            let mut done = true;
            for r in pivot_row + 1..rows.len() {
                let q = rows[r][col].div_euclid(pv);
                if q != 0 {
                    for c in 0..dim {
                        rows[r][c] -= q * rows[pivot_row][c];
                    }
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows[pivot_row][col].abs() != 1 {
            return false;
        }
        pivot_row += 1;
    }
    true
}

/// One site's movement law: probability weights indexed by the steps of a
/// generator set.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution {
    generators: Arc<GeneratorSet>,
    weights: Vec<f64>,
}

impl StepDistribution {
    pub fn new(generators: Arc<GeneratorSet>, weights: Vec<f64>) -> Result<Self, LatticeError> {
        if weights.len() != generators.len() {
            return Err(LatticeError::WeightCount { got: weights.len(), expected: generators.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(LatticeError::BadWeight { index: i, value: weights[i] });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(LatticeError::MassSum { total });
        }
        Ok(StepDistribution { generators, weights })
    }

    pub fn generators(&self) -> &Arc<GeneratorSet> {
        &self.generators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_of(&self, step: &Site) -> f64 {
        self.generators.index_of(step).map_or(0.0, |i| self.weights[i])
    }

    /// Mean displacement `Σ_s s p(s)`.
    pub fn drift(&self) -> Vec<f64> {
        let d = self.generators.dim();
        let mut v = vec![0.0; d];
        for (s, w) in self.generators.steps().iter().zip(&self.weights) {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += s.coord(i) as f64 * w;
            }
        }
        v
    }

    /// Indices of S′ steps whose weight is not strictly above `gamma`.
    pub fn ellipticity_violations(&self, gamma: f64) -> Vec<usize> {
        self.generators.minimal().iter().copied().filter(|&i| self.weights[i] <= gamma).collect()
    }

    /// Positive weight on every S′ step, so the moment generating function
    /// is coercive and the walk is irreducible.
    pub fn is_elliptic(&self) -> bool {
        self.generators.minimal().iter().all(|&i| self.weights[i] > 0.0)
    }

    /// The law of `-X` for a step `X` with this law.
    pub fn reflected(&self) -> StepDistribution {
        let g = &self.generators;
        let weights = g.steps().iter().map(|s| self.weights[g.index_of(&s.neg()).expect("symmetric")]).collect();
        StepDistribution { generators: g.clone(), weights }
    }

    /// Convex combination `Σ λ_j p_j` of laws over the same generator set.
    pub fn mixture(laws: &[&StepDistribution], lambda: &[f64]) -> Result<StepDistribution, LatticeError> {
        let first = laws.first().ok_or(LatticeError::Empty)?;
        let mut w = vec![0.0; first.weights.len()];
        for (p, l) in laws.iter().zip(lambda) {
            for (a, b) in w.iter_mut().zip(&p.weights) {
                *a += l * b;
            }
        }
        StepDistribution::new(first.generators.clone(), w)
    }
}
