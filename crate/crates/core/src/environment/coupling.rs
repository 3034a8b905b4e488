//! Offspring laws with a prescribed mean that dominate, or are dominated
//! by, a given law. A BMC run with the dominating law can be coupled to carry
//! at least as many particles everywhere, which transfers transience
//! downwards and recurrence upwards.

use super::OffspringDistribution;
use crate::error::CouplingError;

/// Slack allowed when comparing a target mean with the current mean.
const MEAN_SLACK: f64 = 1e-12;

/// Raises the mean to `target` by moving mass `δ/n` from the smallest
/// occupied count `l` to `l + n`, where `δ = target − m(μ)` and `n` is the
/// smallest positive integer with `μ_l > δ/n`.
pub fn couple_raise(mu: &OffspringDistribution, target: f64) -> Result<OffspringDistribution, CouplingError> {
    let mean = mu.mean();
    if !target.is_finite() || target < mean - MEAN_SLACK {
        return Err(CouplingError::TargetBelowMean { target, mean });
    }
    let delta = (target - mean).max(0.0);
    if delta == 0.0 {
        return Ok(mu.clone());
    }
    let l = mu.support().next().expect("nonempty law").0;
    let mu_l = mu.mass(l);
    let mut n = (delta / mu_l).floor().max(0.0) as usize + 1;
    // Guard the floor against rounding in either direction.
    while n > 1 && mu_l > delta / (n - 1) as f64 {
        n -= 1;
    }
    while mu_l <= delta / n as f64 {
        n += 1;
    }
    let shift = delta / n as f64;
    let mut masses = mu.masses().to_vec();
    if masses.len() < n + l {
        masses.resize(n + l, 0.0);
    }
    masses[l - 1] -= shift;
    masses[n + l - 1] += shift;
    Ok(OffspringDistribution::from_masses(masses).expect("mass is conserved"))
}

/// Lowers the mean to `target ∈ [1, m(μ)]`: with `δ = m(μ) − target` and
/// `S_j = Σ_{k≤j} (k−1) μ_k`, picks `l` with `S_l ≤ δ < S_{l+1}`, sets
/// `γ = δ − S_l`, collapses counts `2..=l` onto 1 and moves `γ/l` from
/// `l+1` to 1.
pub fn couple_lower(mu: &OffspringDistribution, target: f64) -> Result<OffspringDistribution, CouplingError> {
    let mean = mu.mean();
    if !target.is_finite() || target < 1.0 - MEAN_SLACK || target > mean + MEAN_SLACK {
        return Err(CouplingError::TargetOutOfRange { target, mean });
    }
    let delta = (mean - target).max(0.0);
    if delta == 0.0 {
        return Ok(mu.clone());
    }
    let kmax = mu.max_offspring();
    // partial[j] = S_j for j = 1..=kmax (partial[0] unused).
    let mut partial = vec![0.0; kmax + 1];
    for j in 1..=kmax {
        partial[j] = partial[j - 1] + (j - 1) as f64 * mu.mass(j);
    }
    // Largest l with S_l ≤ δ; S is nondecreasing so S_{l+1} > δ follows.
    let l = (1..=kmax).rev().find(|&j| partial[j] <= delta).unwrap_or(1);
    let gamma = (delta - partial[l]).max(0.0);

    let mut masses = mu.masses().to_vec();
    if masses.len() < l + 1 {
        masses.resize(l + 1, 0.0);
    }
    let collapsed: f64 = masses[..l].iter().sum();
    masses[0] = collapsed + gamma / l as f64;
    for m in masses.iter_mut().take(l).skip(1) {
        *m = 0.0;
    }
    let top = masses[l] - gamma / l as f64;
    if top < -MEAN_SLACK {
        return Err(CouplingError::NegativeMass { k: l + 1, value: top });
    }
    masses[l] = top.max(0.0);
    // Rounding in `gamma` can leave the total a few ulps away from one.
    let total: f64 = masses.iter().sum();
    masses[0] += 1.0 - total;
    OffspringDistribution::from_masses(masses).map_err(|_| CouplingError::NegativeMass { k: 1, value: f64::NAN })
}
