//! Value iteration for `f(x) = m · max_j Σ_s p_j(s) f(x+s)` with `f(x₀)`
//! pinned, and bisection for the critical mean `m̃` at which the iteration
//! stops being bounded.
//!
//! Everything lives on the ball `‖x − x₀‖∞ ≤ R` with `f = 0` outside it.
//! Cutting paths can only lower values, so divergence on the ball certifies
//! divergence on the whole lattice and the truncated `m̃(R)` decreases to
//! `1/ρ` as `R` grows.

use std::io::{self, Write};

use serde::Serialize;

use crate::environment::{Environment, ValidatedSpec};
use crate::error::BellmanError;
use crate::lattice::{GeneratorSet, Site};
use crate::linalg::solve;
use crate::spectral::{env_rho, DEFAULT_GRAD_TOL};

/// Upper bound on the number of sites in a ball.
pub const MAX_BALL_CELLS: u128 = 1 << 24;
/// Largest system handed to the dense solver.
pub const MAX_DENSE_UNKNOWNS: usize = 4096;
/// Sup-norm increment, relative to the sup of the field, below which a run
/// is Bounded.
pub const CONVERGED_INCREMENT: f64 = 1e-12;
/// Overflow guard only: a bounded field on a ball with drift towards the
/// origin can legitimately grow exponentially in the radius.
pub const DEFAULT_BLOWUP: f64 = 1e250;
/// Sweep budget escalation used by [`critical_m`] before giving up.
const MAX_ESCALATION: usize = 1024;

/// The sites `‖x − center‖∞ ≤ radius` in lexicographic order.
#[derive(Clone, Debug)]
struct Ball {
    dim: usize,
    radius: i64,
    width: usize,
    center: Site,
    cells: usize,
}

impl Ball {
    fn new(dim: usize, radius: usize, center: Site) -> Result<Self, BellmanError> {
        let width = 2 * radius as u128 + 1;
        let cells = width.checked_pow(dim as u32).unwrap_or(u128::MAX);
        if cells > MAX_BALL_CELLS {
            return Err(BellmanError::Resource { radius, dim, cells });
        }
        Ok(Ball { dim, radius: radius as i64, width: width as usize, center, cells: cells as usize })
    }

    fn index(&self, x: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            let c = x.coord(i) - self.center.coord(i);
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * self.width + (c + self.radius) as usize;
        }
        Some(idx)
    }

    fn site(&self, mut idx: usize) -> Site {
        let mut c = [0i64; 4];
        for slot in c.iter_mut().take(self.dim) {
            *slot = (idx % self.width) as i64 - self.radius;
            idx /= self.width;
        }
        self.center.offset(&Site::new(&c[..self.dim]))
    }

    /// `table[i * |S| + k]` is the index of `site(i) + s_k`, or `cells` (a
    /// slot that always holds zero) when that lies outside the ball.
    fn neighbours(&self, g: &GeneratorSet) -> Vec<usize> {
        let mut table = Vec::with_capacity(self.cells * g.len());
        for i in 0..self.cells {
            let x = self.site(i);
            for s in g.steps() {
                table.push(self.index(&x.offset(s)).unwrap_or(self.cells));
            }
        }
        table
    }
}

/// Values on the ball around `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    radius: usize,
    dim: usize,
    origin: Site,
    m: f64,
    values: Vec<f64>,
}

impl ValueField {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> Site {
        self.origin
    }

    /// Mean offspring used to build the field (`NaN` for site-dependent means).
    pub fn m(&self) -> f64 {
        self.m
    }

    fn ball(&self) -> Ball {
        Ball::new(self.dim, self.radius, self.origin).expect("ball was built before")
    }

    /// `f(x)`; zero outside the ball.
    pub fn value(&self, x: &Site) -> f64 {
        self.ball().index(x).map_or(0.0, |i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        let ball = self.ball();
        self.values.iter().enumerate().map(move |(i, &v)| (ball.site(i), v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Builds a field from explicit values in the ball's lexicographic order
    /// (first coordinate fastest).
    pub fn from_values(dim: usize, radius: usize, origin: Site, m: f64, values: Vec<f64>) -> Result<Self, BellmanError> {
        let ball = Ball::new(dim, radius, origin)?;
        if values.len() != ball.cells {
            return Err(BellmanError::Parameter(format!("{} values for a ball of {} sites", values.len(), ball.cells)));
        }
        Ok(ValueField { radius, dim, origin, m, values })
    }

    /// Writes `#`-prefixed header lines, then one row per site: the `d`
    /// coordinates followed by the value.
    pub fn write_csv(&self, mut w: impl Write, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        let names: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},value", names.join(","))?;
        for (x, v) in self.iter() {
            let coords: Vec<String> = x.coords(self.dim).iter().map(i64::to_string).collect();
            writeln!(w, "{},{v:e}", coords.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IterationStatus {
    Bounded,
    Diverging,
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct IterationConfig {
    pub radius: usize,
    pub origin: Site,
    /// Defaults to `20 · radius`.
    pub max_sweeps: usize,
    pub blowup: f64,
    /// Pinned value `f(x₀)`; the field scales linearly with it.
    pub anchor: f64,
}

impl IterationConfig {
    pub fn new(radius: usize) -> Self {
        IterationConfig { radius, origin: Site::ORIGIN, max_sweeps: 20 * radius, blowup: DEFAULT_BLOWUP, anchor: 1.0 }
    }

    fn check(&self, m: f64) -> Result<(), BellmanError> {
        if !(m.is_finite() && m > 0.0) {
            return Err(BellmanError::Parameter(format!("m = {m} must be positive")));
        }
        if self.radius < 1 {
            return Err(BellmanError::Parameter("radius must be at least 1".into()));
        }
        if !(self.blowup.is_finite() && self.blowup > 1.0) {
            return Err(BellmanError::Parameter(format!("blowup = {} must exceed 1", self.blowup)));
        }
        if !(self.anchor.is_finite() && self.anchor > 0.0) {
            return Err(BellmanError::Parameter(format!("anchor = {} must be positive", self.anchor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub status: IterationStatus,
    pub field: ValueField,
    pub sweeps: usize,
}

/// Resumable Jacobi iteration `f ← T f` off the origin, `T v = m · max_j P_j v`.
///
/// Besides the plain increment test, every few sweeps the last increment
/// `Δ = f_n − f_{n−1}` is fed through `T` (with a zero origin) to obtain
/// Collatz–Wielandt bounds `min Δ'/Δ ≤ λ ≤ max Δ'/Δ` on the growth rate of
/// `T`. Since `T` is monotone, convex and positively homogeneous,
/// `min > 1` certifies divergence and `max < 1` certifies convergence,
/// independently of how large the bounded field itself is.
struct Sweeper {
    ball: Ball,
    nbr: Vec<usize>,
    laws: Vec<Vec<f64>>,
    steps: usize,
    origin_idx: usize,
    m: f64,
    anchor: f64,
    blowup: f64,
    cur: Vec<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
    sweeps: usize,
}

const CERTIFY_EVERY: usize = 8;

impl Sweeper {
    fn new(spec: &ValidatedSpec, m: f64, cfg: &IterationConfig) -> Result<Self, BellmanError> {
        cfg.check(m)?;
        let g = spec.generators();
        let ball = Ball::new(g.dim(), cfg.radius, cfg.origin)?;
        let nbr = ball.neighbours(g);
        let laws = spec.step_laws().map(|p| p.weights().to_vec()).collect();
        let origin_idx = ball.index(&cfg.origin).expect("origin is the centre");
        let mut cur = vec![0.0; ball.cells + 1];
        cur[origin_idx] = cfg.anchor;
        let next = cur.clone();
        let scratch = vec![0.0; ball.cells + 1];
        Ok(Sweeper {
            steps: g.len(),
            ball,
            nbr,
            laws,
            origin_idx,
            m,
            anchor: cfg.anchor,
            blowup: cfg.blowup,
            cur,
            next,
            scratch,
            sweeps: 1,
        })
    }

    /// `(T src)(i)` for a site other than the origin.
    fn apply_at(&self, src: &[f64], i: usize) -> f64 {
        let row = &self.nbr[i * self.steps..(i + 1) * self.steps];
        let best = self.laws.iter().map(|w| w.iter().zip(row).map(|(p, &j)| p * src[j]).sum::<f64>()).fold(0.0, f64::max);
        self.m * best
    }

    /// One sweep; returns the sup-norm increment and the new maximum.
    fn sweep(&mut self) -> (f64, f64) {
        let mut inc = 0.0f64;
        let mut max = 0.0f64;
        for i in 0..self.ball.cells {
            let v = if i == self.origin_idx { self.anchor } else { self.apply_at(&self.cur, i) };
            inc = inc.max((v - self.cur[i]).abs());
            max = max.max(v);
            self.next[i] = v;
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        self.sweeps += 1;
        (inc, max)
    }

    /// Collatz–Wielandt bounds for `T` at the latest increment.
    fn growth_bounds(&mut self) -> (f64, f64) {
        let n = self.ball.cells;
        for i in 0..n {
            self.scratch[i] = if i == self.origin_idx { 0.0 } else { self.cur[i] - self.next[i] };
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            if i == self.origin_idx {
                continue;
            }
            let d = self.scratch[i];
            let t = self.apply_at(&self.scratch, i);
            if d > 0.0 {
                lo = lo.min(t / d);
                hi = hi.max(t / d);
            } else if t > 0.0 {
                hi = f64::INFINITY;
            }
        }
        (lo, hi)
    }

    /// Runs until a verdict or until `sweeps` reaches `budget`.
    fn run(&mut self, budget: usize) -> IterationStatus {
        while self.sweeps < budget {
            let (inc, max) = self.sweep();
            if max > self.blowup * self.anchor || !max.is_finite() {
                return IterationStatus::Diverging;
            }
            if inc <= CONVERGED_INCREMENT * max {
                return IterationStatus::Bounded;
            }
            if self.sweeps.is_multiple_of(CERTIFY_EVERY) {
                let (lo, hi) = self.growth_bounds();
                if lo > 1.0 && lo.is_finite() {
                    return IterationStatus::Diverging;
                }
                if hi < 1.0 {
                    return IterationStatus::Bounded;
                }
            }
        }
        IterationStatus::Indeterminate
    }

    fn field(&self) -> ValueField {
        ValueField {
            radius: self.ball.radius as usize,
            dim: self.ball.dim,
            origin: self.ball.center,
            m: self.m,
            values: self.cur[..self.ball.cells].to_vec(),
        }
    }
}

/// Iterates from `f_1 = anchor · δ_{x₀}` until divergence is certified (or
/// the field passes `blowup · anchor`), convergence is certified (or the
/// sup-norm increment drops below [`CONVERGED_INCREMENT`] times the sup of
/// the field), or the sweep budget runs out.
pub fn value_iteration(spec: &ValidatedSpec, m: f64, cfg: &IterationConfig) -> Result<ValueIteration, BellmanError> {
    let mut it = Sweeper::new(spec, m, cfg)?;
    let status = it.run(cfg.max_sweeps.max(1));
    Ok(ValueIteration { status, field: it.field(), sweeps: it.sweeps })
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalMean {
    pub critical_m: f64,
    /// Largest probe found Bounded and smallest found Diverging.
    pub bracket: (f64, f64),
    pub probes: usize,
    pub radius: usize,
    pub rho: f64,
}

/// Like [`value_iteration`], but keeps doubling the sweep budget (up to
/// 1024 times `max_sweeps`) while the status is Indeterminate.
pub fn value_iteration_escalating(spec: &ValidatedSpec, m: f64, cfg: &IterationConfig) -> Result<ValueIteration, BellmanError> {
    let mut it = Sweeper::new(spec, m, cfg)?;
    let base = cfg.max_sweeps.max(1);
    let mut budget = base;
    loop {
        match it.run(budget) {
            IterationStatus::Indeterminate if budget < base * MAX_ESCALATION => budget *= 2,
            IterationStatus::Indeterminate => return Err(BellmanError::Indeterminate { m, sweeps: budget }),
            status => return Ok(ValueIteration { status, field: it.field(), sweeps: it.sweeps }),
        }
    }
}

fn probe(spec: &ValidatedSpec, m: f64, cfg: &IterationConfig) -> Result<IterationStatus, BellmanError> {
    Ok(value_iteration_escalating(spec, m, cfg)?.status)
}

/// Bisection for the truncated critical mean `m̃(R)`: the returned value
/// `c` has `c − tol` Bounded and `c + tol` Diverging.
pub fn critical_m(spec: &ValidatedSpec, cfg: &IterationConfig, tol: f64) -> Result<CriticalMean, BellmanError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(BellmanError::Parameter(format!("tol = {tol} must be positive")));
    }
    let rho = env_rho(spec, DEFAULT_GRAD_TOL)?.rho;
    let mut lo = 1.0;
    let mut hi = 1.0 / rho + 0.5;
    let mut probes = 0;
    // m ≤ 1 is always bounded; make sure the upper end really diverges.
    loop {
        probes += 1;
        if probe(spec, hi, cfg)? == IterationStatus::Diverging {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(BellmanError::Parameter("no diverging mean below 1e6".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match probe(spec, mid, cfg)? {
            IterationStatus::Diverging => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(CriticalMean { critical_m: 0.5 * (lo + hi), bracket: (lo, hi), probes, radius: cfg.radius, rho })
}

/// `max |m(x) · P_ω f(x) − f(x)| / max(f(x), 1)` over sites `x ≠ x₀` whose
/// whole neighbourhood lies in the ball.
pub fn harmonic_residual(field: &ValueField, env: &dyn Environment) -> f64 {
    let g = env.generators();
    let ball = field.ball();
    let mut worst = 0.0f64;
    for (i, &fx) in field.values.iter().enumerate() {
        let x = ball.site(i);
        if x == field.origin {
            continue;
        }
        let mut interior = true;
        let mut pf = 0.0;
        let (law, offspring) = env.site_law(&x);
        for (s, &w) in g.steps().iter().zip(law.weights()) {
            match ball.index(&x.offset(s)) {
                Some(j) => pf += w * field.values[j],
                None => interior = false,
            }
        }
        if interior {
            worst = worst.max((offspring.mean() * pf - fx).abs() / fx.max(1.0));
        }
    }
    worst
}

/// Exact `g(x) = E_x ν(x₀)` on the ball for one realized environment, with
/// particles leaving the ball discarded: solves `g(x) = m(x) Σ_s ω_x(s) g(x+s)`
/// for `x ≠ x₀`, `g(x₀) = 1`.
pub fn solve_expected_frozen(env: &dyn Environment, origin: Site, radius: usize) -> Result<ValueField, BellmanError> {
    let g = env.generators();
    let ball = Ball::new(g.dim(), radius, origin)?;
    if ball.cells > MAX_DENSE_UNKNOWNS {
        return Err(BellmanError::Resource { radius, dim: g.dim(), cells: ball.cells as u128 });
    }
    let o = ball.index(&origin).expect("origin is the centre");
    let n = ball.cells;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        a[i][i] = 1.0;
        if i == o {
            b[i] = 1.0;
            continue;
        }
        let x = ball.site(i);
        let (law, offspring) = env.site_law(&x);
        let m = offspring.mean();
        for (s, &w) in g.steps().iter().zip(law.weights()) {
            if let Some(j) = ball.index(&x.offset(s)) {
                a[i][j] -= m * w;
            }
        }
    }
    let values = solve(a, b).ok_or(BellmanError::Singular)?;
    Ok(ValueField { radius, dim: g.dim(), origin, m: f64::NAN, values })
}

/// `E_{x₀} ν(x₀) = m(x₀) Σ_s ω_{x₀}(s) g(x₀+s)`: the first step from the
/// origin does not freeze.
pub fn expected_nu_from_origin(field: &ValueField, env: &dyn Environment) -> f64 {
    let (law, offspring) = env.site_law(&field.origin);
    let g = env.generators();
    offspring.mean() * g.steps().iter().zip(law.weights()).map(|(s, &w)| w * field.value(&field.origin.offset(s))).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{EnvironmentSpec, OffspringDistribution, RealizedEnvironment};
    use crate::lattice::StepDistribution;
    use std::sync::Arc;

    fn spec(d: usize, laws: &[&[f64]], m: f64) -> ValidatedSpec {
        let g = Arc::new(GeneratorSet::nearest_neighbor(d).unwrap());
        let n = laws.len() as f64;
        let k2 = m - 1.0;
        EnvironmentSpec {
            generators: g.clone(),
            step_support: laws.iter().map(|w| (StepDistribution::new(g.clone(), w.to_vec()).unwrap(), 1.0 / n)).collect(),
            offspring_support: vec![(OffspringDistribution::new(&[(1, 1.0 - k2), (2, k2)]).unwrap(), 1.0)],
            gamma: 0.01,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn ball_indexing_round_trips() {
        let ball = Ball::new(2, 3, Site::new(&[5, -1])).unwrap();
        for i in 0..ball.cells {
            assert_eq!(ball.index(&ball.site(i)), Some(i));
        }
        assert_eq!(ball.index(&Site::new(&[9, -1])), None);
    }

    #[test]
    fn examples() {
        let s = spec(1, &[&[0.9, 0.1]], 1.5);
        let cfg = IterationConfig::new(60);
        let r = value_iteration(&s, 1.2, &IterationConfig { max_sweeps: 100_000, ..cfg.clone() }).unwrap();
        assert_eq!(r.status, IterationStatus::Bounded);
        assert!(r.field.max().is_finite());
        let r = value_iteration(&s, 1.9, &IterationConfig { max_sweeps: 100_000, ..cfg.clone() }).unwrap();
        assert_eq!(r.status, IterationStatus::Diverging);
        for laws in [&[&[0.9, 0.1][..]][..], &[&[0.8, 0.2], &[0.2, 0.8]]] {
            let r = value_iteration(&spec(1, laws, 1.5), 1.0, &IterationConfig { max_sweeps: 1_000_000, ..cfg.clone() }).unwrap();
            assert_eq!(r.status, IterationStatus::Bounded);
            assert!(r.field.max() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn monotone_in_sweeps_and_radius() {
        let s = spec(1, &[&[0.9, 0.1], &[0.8, 0.2]], 1.5);
        let mut it = Sweeper::new(&s, 1.2, &IterationConfig::new(20)).unwrap();
        let mut prev = it.field();
        for _ in 0..200 {
            it.sweep();
            let f = it.field();
            for (a, b) in f.values.iter().zip(&prev.values) {
                assert!(a + 1e-12 >= *b);
            }
            prev = f;
        }
        let small = value_iteration(&s, 1.2, &IterationConfig { max_sweeps: 100_000, ..IterationConfig::new(20) }).unwrap();
        let big = value_iteration(&s, 1.2, &IterationConfig { max_sweeps: 100_000, ..IterationConfig::new(30) }).unwrap();
        assert_eq!(small.status, IterationStatus::Bounded);
        for (x, v) in small.field.iter() {
            assert!(big.field.value(&x) + 1e-10 >= v);
        }
    }

    #[test]
    fn singleton_matches_linear_iteration() {
        let s = spec(1, &[&[0.7, 0.3]], 1.5);
        let cfg = IterationConfig { max_sweeps: 300, ..IterationConfig::new(15) };
        let r = value_iteration(&s, 1.1, &cfg).unwrap();
        // Plain m·P f on a vector indexed by x + R.
        let n = 31;
        let mut f = vec![0.0; n];
        f[15] = 1.0;
        for _ in 1..r.sweeps {
            let mut g = vec![0.0; n];
            for x in 0..n {
                g[x] = if x == 15 {
                    1.0
                } else {
                    let right = if x + 1 < n { f[x + 1] } else { 0.0 };
                    let left = if x > 0 { f[x - 1] } else { 0.0 };
                    1.1 * (0.7 * right + 0.3 * left)
                };
            }
            f = g;
        }
        for (x, v) in r.field.iter() {
            assert!((f[(x.coord(0) + 15) as usize] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn scales_with_anchor() {
        let s = spec(2, &[&[0.4, 0.1, 0.3, 0.2]], 1.2);
        let cfg = IterationConfig { max_sweeps: 50, ..IterationConfig::new(6) };
        let a = value_iteration(&s, 1.2, &cfg).unwrap();
        let b = value_iteration(&s, 1.2, &IterationConfig { anchor: 7.5, ..cfg }).unwrap();
        for ((_, u), (_, v)) in a.field.iter().zip(b.field.iter()) {
            assert!((7.5 * u - v).abs() <= 1e-10 * v.max(1.0));
        }
    }

    #[test]
    fn critical_mean_drifted_walk() {
        let s = spec(1, &[&[0.9, 0.1]], 1.5);
        let c = critical_m(&s, &IterationConfig::new(40), 0.01).unwrap();
        assert!((c.critical_m * 0.6 - 1.0).abs() < 0.02, "{c:?}");
        assert!(c.bracket.1 - c.bracket.0 <= 0.01);
    }

    #[test]
    fn parameter_errors() {
        let s = spec(1, &[&[0.9, 0.1]], 1.5);
        assert!(value_iteration(&s, 0.0, &IterationConfig::new(5)).is_err());
        assert!(value_iteration(&s, 1.0, &IterationConfig::new(0)).is_err());
        assert!(value_iteration(&s, 1.0, &IterationConfig { blowup: 1.0, ..IterationConfig::new(5) }).is_err());
        assert!(matches!(
            value_iteration(&spec(4, &[&[0.125; 8]], 1.5), 1.0, &IterationConfig::new(100)),
            Err(BellmanError::Resource { .. })
        ));
    }

    #[test]
    fn exact_solve_is_harmonic() {
        let s = Arc::new(spec(1, &[&[0.9, 0.1]], 1.5));
        let env = RealizedEnvironment::new(s, 3);
        let f = solve_expected_frozen(&env, Site::ORIGIN, 10).unwrap();
        assert!(harmonic_residual(&f, &env) <= 1e-8);
        assert_eq!(f.value(&Site::ORIGIN), 1.0);
        // The origin expectation approaches 1 − √(1 − 4pq m²) as R grows.
        let f = solve_expected_frozen(&env, Site::ORIGIN, 60).unwrap();
        let oracle = 1.0 - (1.0f64 - 4.0 * 0.09 * 2.25).sqrt();
        assert!((expected_nu_from_origin(&f, &env) - oracle).abs() < 1e-6);
    }

    #[test]
    fn constant_field_is_harmonic_for_critical_symmetric_walk() {
        struct Flat(GeneratorSet, StepDistribution, OffspringDistribution);
        impl Environment for Flat {
            fn generators(&self) -> &GeneratorSet {
                &self.0
            }
            fn site_law(&self, _: &Site) -> (&StepDistribution, &OffspringDistribution) {
                (&self.1, &self.2)
            }
        }
        let g = GeneratorSet::nearest_neighbor(1).unwrap();
        let p = StepDistribution::new(Arc::new(g.clone()), vec![0.5, 0.5]).unwrap();
        let env = Flat(g, p, OffspringDistribution::dirac(1).unwrap());
        let f = ValueField::from_values(1, 5, Site::ORIGIN, 1.0, vec![1.0; 11]).unwrap();
        assert_eq!(harmonic_residual(&f, &env), 0.0);
    }

    #[test]
    fn csv_layout() {
        let f = ValueField::from_values(1, 1, Site::ORIGIN, 1.0, vec![0.25, 1.0, 0.5]).unwrap();
        let mut out = Vec::new();
        f.write_csv(&mut out, &["seed = 1".into()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "# seed = 1\nx1,value\n-1,2.5e-1\n0,1e0\n1,5e-1\n");
    }
}
