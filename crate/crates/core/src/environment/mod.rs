//! The random environment: an i.i.d. product law over sites of a step law
//! (finite support of Q) and an offspring law (finite support of Q̃),
//! drawn independently of each other.

mod coupling;
mod offspring;

use std::sync::Arc;

pub use coupling::{couple_lower, couple_raise};
pub use offspring::OffspringDistribution;

use crate::error::ValidationReport;
use crate::lattice::{GeneratorSet, Site, StepDistribution, MASS_TOL};

/// Unchecked description of the environment law.
#[derive(Clone, Debug)]
pub struct EnvironmentSpec {
    pub generators: Arc<GeneratorSet>,
    /// Support of Q with weights.
    pub step_support: Vec<(StepDistribution, f64)>,
    /// Support of Q̃ with weights.
    pub offspring_support: Vec<(OffspringDistribution, f64)>,
    /// Ellipticity constant γ.
    pub gamma: f64,
}

impl EnvironmentSpec {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> Result<ValidatedSpec, ValidationReport> {
        let mut v = Vec::new();
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            v.push(format!("gamma = {} must be positive", self.gamma));
        }
        check_weights("step support", self.step_support.iter().map(|p| p.1), &mut v);
        check_weights("offspring support", self.offspring_support.iter().map(|p| p.1), &mut v);
        for (j, (law, _)) in self.step_support.iter().enumerate() {
            if **law.generators() != *self.generators {
                v.push(format!("step law {j} uses a different generator set"));
                continue;
            }
            if self.gamma.is_finite() && self.gamma > 0.0 {
                for i in law.ellipticity_violations(self.gamma) {
                    v.push(format!(
                        "step law {j}: ellipticity fails on step {} (weight {} <= gamma {})",
                        self.generators.steps()[i],
                        law.weights()[i],
                        self.gamma
                    ));
                }
            }
        }
        let m_star = max_mean(&self.offspring_support);
        if !self.offspring_support.is_empty() && m_star <= 1.0 {
            v.push(format!("m* = {m_star} must exceed 1"));
        }
        if !v.is_empty() {
            return Err(ValidationReport { violations: v });
        }
        let step_cdf = cumulative(self.step_support.iter().map(|p| p.1));
        let offspring_cdf = cumulative(self.offspring_support.iter().map(|p| p.1));
        Ok(ValidatedSpec { spec: self, step_cdf, offspring_cdf })
    }
}

fn check_weights(what: &str, weights: impl Iterator<Item = f64>, v: &mut Vec<String>) {
    let mut total = 0.0;
    let mut count = 0;
    for (i, w) in weights.enumerate() {
        count += 1;
        if !(w.is_finite() && w > 0.0) {
            v.push(format!("{what}: weight {i} = {w} must be positive"));
        }
        total += w;
    }
    if count == 0 {
        v.push(format!("{what} is empty"));
    } else if (total - 1.0).abs() > MASS_TOL {
        v.push(format!("{what}: weights sum to {total}, expected 1"));
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn max_mean(support: &[(OffspringDistribution, f64)]) -> f64 {
    support.iter().map(|(mu, _)| mu.mean()).fold(f64::NEG_INFINITY, f64::max)
}

/// An environment specification that passed [`EnvironmentSpec::validate`].
#[derive(Clone, Debug)]
pub struct ValidatedSpec {
    spec: EnvironmentSpec,
    step_cdf: Vec<f64>,
    offspring_cdf: Vec<f64>,
}

impl ValidatedSpec {
    pub fn generators(&self) -> &Arc<GeneratorSet> {
        &self.spec.generators
    }

    pub fn dim(&self) -> usize {
        self.spec.generators.dim()
    }

    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    pub fn step_support(&self) -> &[(StepDistribution, f64)] {
        &self.spec.step_support
    }

    pub fn offspring_support(&self) -> &[(OffspringDistribution, f64)] {
        &self.spec.offspring_support
    }

    pub fn step_laws(&self) -> impl Iterator<Item = &StepDistribution> + '_ {
        self.spec.step_support.iter().map(|p| &p.0)
    }

    /// `m* = sup { m(μ) : μ ∈ supp Q̃ }`.
    pub fn m_star(&self) -> f64 {
        max_mean(&self.spec.offspring_support)
    }

    pub fn as_spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn into_spec(self) -> EnvironmentSpec {
        self.spec
    }
}

/// `m*` of a validated specification.
pub fn m_star(spec: &ValidatedSpec) -> f64 {
    spec.m_star()
}

/// Site-indexed laws as seen by the simulator and the harmonic checks.
pub trait Environment: Sync {
    fn generators(&self) -> &GeneratorSet;
    fn site_law(&self, x: &Site) -> (&StepDistribution, &OffspringDistribution);
}

/// One realization `(ω_x, μ_x)_x` of the environment, computed on demand
/// from `(seed, x)` by a counter-style hash so that no per-site state is
/// stored.
#[derive(Clone, Debug)]
pub struct RealizedEnvironment {
    spec: Arc<ValidatedSpec>,
    seed: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STEP_STREAM: u64 = 0x5354_4550;
const OFFSPRING_STREAM: u64 = 0x4f46_4653;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn site_uniform(seed: u64, stream: u64, x: &Site, dim: usize) -> f64 {
    let mut h = splitmix(seed ^ stream.wrapping_mul(GOLDEN));
    for &c in x.coords(dim) {
        h = splitmix(h ^ (c as u64).wrapping_add(GOLDEN));
    }
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

impl RealizedEnvironment {
    pub fn new(spec: Arc<ValidatedSpec>, seed: u64) -> Self {
        RealizedEnvironment { spec, seed }
    }

    pub fn spec(&self) -> &ValidatedSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Indices into the step and offspring supports assigned to `x`.
    pub fn site_indices(&self, x: &Site) -> (usize, usize) {
        let dim = self.spec.dim();
        let i = if self.spec.step_cdf.len() == 1 { 0 } else { pick(&self.spec.step_cdf, site_uniform(self.seed, STEP_STREAM, x, dim)) };
        let j = if self.spec.offspring_cdf.len() == 1 {
            0
        } else {
            pick(&self.spec.offspring_cdf, site_uniform(self.seed, OFFSPRING_STREAM, x, dim))
        };
        (i, j)
    }
}

impl Environment for RealizedEnvironment {
    fn generators(&self) -> &GeneratorSet {
        self.spec.generators()
    }

    fn site_law(&self, x: &Site) -> (&StepDistribution, &OffspringDistribution) {
        let (i, j) = self.site_indices(x);
        (&self.spec.step_support()[i].0, &self.spec.offspring_support()[j].0)
    }
}

/// The same step and offspring law at every site. Unlike
/// [`RealizedEnvironment`] it needs no validated specification, so it also
/// covers the plain random walk (`μ = δ₁`).
#[derive(Clone, Debug)]
pub struct HomogeneousEnvironment {
    step: StepDistribution,
    offspring: OffspringDistribution,
}

impl HomogeneousEnvironment {
    pub fn new(step: StepDistribution, offspring: OffspringDistribution) -> Self {
        HomogeneousEnvironment { step, offspring }
    }
}

impl Environment for HomogeneousEnvironment {
    fn generators(&self) -> &GeneratorSet {
        self.step.generators()
    }

    fn site_law(&self, _: &Site) -> (&StepDistribution, &OffspringDistribution) {
        (&self.step, &self.offspring)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z1() -> Arc<GeneratorSet> {
        Arc::new(GeneratorSet::nearest_neighbor(1).unwrap())
    }

    fn law(g: &Arc<GeneratorSet>, w: &[f64]) -> StepDistribution {
        StepDistribution::new(g.clone(), w.to_vec()).unwrap()
    }

    fn spec(steps: Vec<(StepDistribution, f64)>, offspring: Vec<(OffspringDistribution, f64)>, gamma: f64) -> EnvironmentSpec {
        EnvironmentSpec { generators: z1(), step_support: steps, offspring_support: offspring, gamma }
    }

    #[test]
    fn validate_examples() {
        let g = z1();
        let ok = spec(vec![(law(&g, &[0.9, 0.1]), 1.0)], vec![(OffspringDistribution::dirac(2).unwrap(), 1.0)], 0.05);
        assert!(ok.validate().is_ok());

        let bad = spec(vec![(law(&g, &[1.0, 0.0]), 1.0)], vec![(OffspringDistribution::dirac(2).unwrap(), 1.0)], 0.05);
        let report = bad.validate().unwrap_err();
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("ellipticity") && report.violations[0].contains("(-1)"));

        let critical = spec(vec![(law(&g, &[0.9, 0.1]), 1.0)], vec![(OffspringDistribution::dirac(1).unwrap(), 1.0)], 0.05);
        let report = critical.validate().unwrap_err();
        assert!(report.violations[0].contains("m*"));
    }

    #[test]
    fn validate_reports_every_violation() {
        let g = z1();
        let bad = spec(
            vec![(law(&g, &[1.0, 0.0]), 0.5), (law(&g, &[0.0, 1.0]), 0.4)],
            vec![(OffspringDistribution::dirac(1).unwrap(), 1.0)],
            0.05,
        );
        let report = bad.validate().unwrap_err();
        // weight sum, two ellipticity failures, m*.
        assert_eq!(report.violations.len(), 4, "{report}");
        let bad_gamma = spec(vec![(law(&g, &[0.5, 0.5]), 1.0)], vec![(OffspringDistribution::dirac(2).unwrap(), 1.0)], 0.0);
        assert!(bad_gamma.validate().is_err());
    }

    #[test]
    fn m_star_examples() {
        let g = z1();
        let mk = |off: Vec<(OffspringDistribution, f64)>| spec(vec![(law(&g, &[0.5, 0.5]), 1.0)], off, 0.1).validate().unwrap();
        assert_eq!(m_star(&mk(vec![(OffspringDistribution::dirac(2).unwrap(), 1.0)])), 2.0);
        assert_eq!(
            m_star(&mk(vec![(OffspringDistribution::dirac(1).unwrap(), 0.5), (OffspringDistribution::dirac(3).unwrap(), 0.5)])),
            3.0
        );
        assert_eq!(m_star(&mk(vec![(OffspringDistribution::new(&[(1, 0.5), (2, 0.5)]).unwrap(), 1.0)])), 1.5);
    }

    #[test]
    fn site_law_is_deterministic() {
        let g = z1();
        let s = spec(
            vec![(law(&g, &[0.9, 0.1]), 0.5), (law(&g, &[0.2, 0.8]), 0.5)],
            vec![(OffspringDistribution::dirac(1).unwrap(), 0.3), (OffspringDistribution::dirac(2).unwrap(), 0.7)],
            0.05,
        );
        let env = RealizedEnvironment::new(Arc::new(s.validate().unwrap()), 7);
        for x in -50..50 {
            let site = Site::new(&[x]);
            let a = env.site_law(&site);
            let b = env.site_law(&site);
            assert!(std::ptr::eq(a.0, b.0) && std::ptr::eq(a.1, b.1));
        }
    }

    #[test]
    fn singleton_support_is_homogeneous() {
        let g = z1();
        let s = spec(vec![(law(&g, &[0.9, 0.1]), 1.0)], vec![(OffspringDistribution::dirac(2).unwrap(), 1.0)], 0.05);
        let env = RealizedEnvironment::new(Arc::new(s.validate().unwrap()), 99);
        for x in -20..20 {
            assert_eq!(env.site_indices(&Site::new(&[x])), (0, 0));
        }
    }

    #[test]
    fn two_point_frequencies() {
        // 10^4 Bernoulli(1/2) draws: 0.02 is four binomial standard errors.
        let g = z1();
        let s = spec(
            vec![(law(&g, &[0.9, 0.1]), 0.5), (law(&g, &[0.2, 0.8]), 0.5)],
            vec![(OffspringDistribution::dirac(1).unwrap(), 0.5), (OffspringDistribution::dirac(2).unwrap(), 0.5)],
            0.05,
        );
        let env = RealizedEnvironment::new(Arc::new(s.validate().unwrap()), 2024);
        let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
        let n = 10_000;
        for x in 0..n {
            let (i, j) = env.site_indices(&Site::new(&[x]));
            a += (i == 0) as usize;
            b += (j == 0) as usize;
            both += (i == 0 && j == 0) as usize;
        }
        let n = n as f64;
        assert!((a as f64 / n - 0.5).abs() < 0.02);
        assert!((b as f64 / n - 0.5).abs() < 0.02);
        // Independence of the two draws at one site.
        assert!((both as f64 / n - 0.25).abs() < 0.02);
    }
}
