//! Monte Carlo for the branching Markov chain (BMC) and its frozen-origin
//! variant BMC*.
//!
//! Particles sharing a site are exchangeable, so a front is stored as exact
//! per-site counts and each step draws one multinomial for the offspring
//! numbers and one for the displacements per occupied site. Within a step
//! every particle first branches according to `μ_x`, then each child moves
//! according to `ω_x`. In BMC* a child landing on `x₀` is frozen there; the
//! initial particle at time 0 is not frozen even when it starts on `x₀`.
//!
//! Optional reachability pruning drops particles that cannot reach `x₀`
//! before the horizon. This does not change the frozen tally or the visit
//! counts at `x₀`, only the bulk population that would otherwise overflow.

mod sampling;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{Environment, OffspringDistribution};
use crate::error::SimError;
use crate::lattice::Site;

/// Default per-site count cap (and cap on the frozen tally).
pub const DEFAULT_CAP: u128 = 1 << 70;
/// Fraction of saturated runs above which an estimate is flagged.
pub const UNRELIABLE_FRACTION: f64 = 0.01;

/// Randomness of replicate `replicate` under `master_seed`: one ChaCha8
/// key per master seed, one stream per replicate.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParticleFront {
    time: usize,
    counts: BTreeMap<Site, u128>,
    frozen: u128,
    origin: Option<Site>,
    cap: u128,
    saturated: bool,
}

fn offspring_total<R: Rng + ?Sized>(rng: &mut R, c: u128, mu: &OffspringDistribution) -> Option<u128> {
    let masses = mu.masses();
    let mut support = mu.support();
    let (first, _) = support.next().expect("nonempty law");
    if support.next().is_none() {
        return c.checked_mul(first as u128);
    }
    let mut split = vec![0u128; masses.len()];
    sampling::multinomial(rng, c, masses, &mut split);
    split.iter().enumerate().try_fold(0u128, |acc, (i, &n)| acc.checked_add(n.checked_mul(i as u128 + 1)?))
}

impl ParticleFront {
    /// One particle at `start`, no freezing.
    pub fn bmc(start: Site, cap: u128) -> Self {
        ParticleFront { time: 0, counts: BTreeMap::from([(start, 1)]), frozen: 0, origin: None, cap, saturated: false }
    }

    /// One particle at `start`, children landing on `origin` freeze.
    pub fn bmc_star(start: Site, origin: Site, cap: u128) -> Self {
        ParticleFront { origin: Some(origin), ..Self::bmc(start, cap) }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn counts(&self) -> &BTreeMap<Site, u128> {
        &self.counts
    }

    pub fn count(&self, x: &Site) -> u128 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    pub fn frozen(&self) -> u128 {
        self.frozen
    }

    pub fn origin(&self) -> Option<Site> {
        self.origin
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// Live particles (saturating at `u128::MAX`).
    pub fn total(&self) -> u128 {
        self.counts.values().fold(0u128, |a, &c| a.saturating_add(c))
    }

    /// One branch-then-move step of the whole front.
    pub fn step<R: Rng + ?Sized>(&mut self, env: &dyn Environment, rng: &mut R) {
        self.advance(env, rng, None);
    }

    /// Like [`step`](Self::step), dropping children that cannot reach
    /// `target` by time `horizon`.
    pub fn step_pruned<R: Rng + ?Sized>(&mut self, env: &dyn Environment, rng: &mut R, target: Site, horizon: usize) {
        self.advance(env, rng, Some((target, horizon)));
    }

    fn advance<R: Rng + ?Sized>(&mut self, env: &dyn Environment, rng: &mut R, prune: Option<(Site, usize)>) {
        if self.saturated {
            return;
        }
        let g = env.generators();
        let steps = g.steps();
        let time = self.time + 1;
        let mut next: BTreeMap<Site, u128> = BTreeMap::new();
        let mut moves = vec![0u128; steps.len()];
        'sites: for (&x, &c) in &self.counts {
            let (law, mu) = env.site_law(&x);
            let Some(kids) = offspring_total(rng, c, mu) else {
                self.saturated = true;
                break;
            };
            sampling::multinomial(rng, kids, law.weights(), &mut moves);
            for (s, &k) in steps.iter().zip(&moves) {
                if k == 0 {
                    continue;
                }
                let y = x.offset(s);
                if Some(y) == self.origin {
                    match self.frozen.checked_add(k) {
                        Some(f) if f <= self.cap => self.frozen = f,
                        _ => {
                            self.saturated = true;
                            break 'sites;
                        }
                    }
                    continue;
                }
                if let Some((target, horizon)) = prune {
                    if g.min_steps_between(&y, &target) as usize > horizon.saturating_sub(time) {
                        continue;
                    }
                }
                let slot = next.entry(y).or_insert(0);
                match slot.checked_add(k) {
                    Some(v) if v <= self.cap => *slot = v,
                    _ => {
                        self.saturated = true;
                        break 'sites;
                    }
                }
            }
        }
        self.counts = next;
        self.time = time;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BmcStarConfig {
    pub origin: Site,
    pub start: Site,
    pub horizon: usize,
    pub cap: u128,
    /// Drop particles that cannot reach the origin before the horizon.
    pub prune: bool,
}

impl BmcStarConfig {
    pub fn new(origin: Site, start: Site, horizon: usize) -> Self {
        BmcStarConfig { origin, start, horizon, cap: DEFAULT_CAP, prune: true }
    }

    fn check(&self) -> Result<(), SimError> {
        if self.horizon < 1 {
            return Err(SimError::Parameter("horizon must be at least 1".into()));
        }
        if self.cap < 1 {
            return Err(SimError::Parameter("cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunOutcome {
    /// Frozen tally at the horizon, or at saturation (then a lower bound).
    pub nu_observed: u128,
    pub saturated: bool,
    pub steps: usize,
    pub max_live_sites: usize,
}

/// One BMC* run up to `cfg.horizon`.
pub fn run_bmc_star<R: Rng + ?Sized>(env: &dyn Environment, cfg: &BmcStarConfig, rng: &mut R) -> Result<RunOutcome, SimError> {
    cfg.check()?;
    let mut front = ParticleFront::bmc_star(cfg.start, cfg.origin, cfg.cap);
    let mut max_live_sites = 1;
    while front.time < cfg.horizon && !front.counts.is_empty() && !front.saturated {
        if cfg.prune {
            front.step_pruned(env, rng, cfg.origin, cfg.horizon);
        } else {
            front.step(env, rng);
        }
        max_live_sites = max_live_sites.max(front.counts.len());
    }
    Ok(RunOutcome { nu_observed: front.frozen, saturated: front.saturated, steps: front.time, max_live_sites })
}

/// One line of `replicates.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub nu_observed: u128,
    pub saturated: bool,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuEstimate {
    /// Mean frozen tally over unsaturated runs.
    pub mean: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub saturated_runs: usize,
    pub horizon: usize,
    /// Mean over all runs, saturated ones contributing their tally at
    /// saturation; a lower bound for the truncated expectation.
    pub lower_bound_mean: f64,
    /// More than 1% of the runs saturated.
    pub unreliable: bool,
}

impl NuEstimate {
    pub fn from_records(records: &[ReplicateRecord], horizon: usize) -> Self {
        let ok: Vec<f64> = records.iter().filter(|r| !r.saturated).map(|r| r.nu_observed as f64).collect();
        let (mean, std_error) = mean_and_error(&ok);
        let all: Vec<f64> = records.iter().map(|r| r.nu_observed as f64).collect();
        let saturated_runs = records.len() - ok.len();
        NuEstimate {
            mean,
            std_error,
            replicates: records.len(),
            saturated_runs,
            horizon,
            lower_bound_mean: mean_and_error(&all).0,
            unreliable: saturated_runs as f64 > UNRELIABLE_FRACTION * records.len() as f64,
        }
    }
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `replicates` independent BMC* replicates, in parallel, and returns
/// their records in replicate order.
pub fn run_replicates(
    env: &dyn Environment,
    cfg: &BmcStarConfig,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<ReplicateRecord>, SimError> {
    cfg.check()?;
    if replicates < 1 {
        return Err(SimError::Parameter("replicates must be at least 1".into()));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(master_seed, r);
            let out = run_bmc_star(env, cfg, &mut rng)?;
            Ok(ReplicateRecord { replicate: r, nu_observed: out.nu_observed, saturated: out.saturated, horizon: cfg.horizon })
        })
        .collect()
}

/// Sample mean and standard error of the truncated `ν(x₀)`.
pub fn estimate_nu(env: &dyn Environment, cfg: &BmcStarConfig, replicates: usize, master_seed: u64) -> Result<NuEstimate, SimError> {
    Ok(NuEstimate::from_records(&run_replicates(env, cfg, replicates, master_seed)?, cfg.horizon))
}

/// Generation sizes of the embedded Galton–Watson process of returns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GwObservation {
    /// `z[k-1]` particles were the k-th in their ancestry line to hit `x₀`.
    pub z: Vec<u128>,
    /// The live-particle cap was hit; later generations are undercounted.
    pub truncated: bool,
}

/// Runs the unmodified BMC from `x₀` for `horizon` steps, tagging every
/// particle with the number of returns to `x₀` in its ancestry.
///
/// Particles are grouped by (site, return count); members of a group are
/// exchangeable, so the grouping is exact. Particles that already returned
/// `generations` times, or cannot reach `x₀` in time, are dropped.
pub fn gw_return_process<R: Rng + ?Sized>(
    env: &dyn Environment,
    origin: Site,
    generations: usize,
    horizon: usize,
    live_cap: u128,
    rng: &mut R,
) -> Result<GwObservation, SimError> {
    if generations < 1 || horizon < 1 {
        return Err(SimError::Parameter("generations and horizon must be at least 1".into()));
    }
    let g = env.generators();
    let steps = g.steps();
    let mut z = vec![0u128; generations];
    let mut groups: BTreeMap<(Site, usize), u128> = BTreeMap::from([((origin, 0), 1)]);
    let mut moves = vec![0u128; steps.len()];
    for time in 1..=horizon {
        let mut next: BTreeMap<(Site, usize), u128> = BTreeMap::new();
        let mut live = 0u128;
        for (&(x, k), &c) in &groups {
            let (law, mu) = env.site_law(&x);
            let Some(kids) = offspring_total(rng, c, mu) else {
                return Ok(GwObservation { z, truncated: true });
            };
            sampling::multinomial(rng, kids, law.weights(), &mut moves);
            for (s, &n) in steps.iter().zip(&moves) {
                if n == 0 {
                    continue;
                }
                let y = x.offset(s);
                let k = k + usize::from(y == origin);
                if y == origin {
                    z[k - 1] = z[k - 1].saturating_add(n);
                }
                if k >= generations || g.min_steps_between(&y, &origin) as usize > horizon - time {
                    continue;
                }
                *next.entry((y, k)).or_insert(0) += n;
                live = live.saturating_add(n);
            }
        }
        if live > live_cap {
            return Ok(GwObservation { z, truncated: true });
        }
        if next.is_empty() {
            break;
        }
        groups = next;
    }
    Ok(GwObservation { z, truncated: false })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    /// Fraction of unsaturated runs with at least `threshold` visits.
    pub fraction: f64,
    pub hits: usize,
    pub replicates: usize,
    pub saturated_runs: usize,
    pub horizon: usize,
    pub threshold: u128,
}

/// Finite-horizon surrogate for the probability of infinitely many visits:
/// the fraction of unmodified BMC runs from `x₀` whose visits to `x₀`
/// during times `1..=horizon` reach `threshold`. A heuristic indicator
/// only; it says nothing rigorous about the limit.
pub fn estimate_alpha(
    env: &dyn Environment,
    origin: Site,
    replicates: usize,
    horizon: usize,
    threshold: u128,
    cap: u128,
    master_seed: u64,
) -> Result<AlphaEstimate, SimError> {
    if threshold < 1 || replicates < 1 || horizon < 1 {
        return Err(SimError::Parameter("threshold, replicates and horizon must be at least 1".into()));
    }
    // Some(true) hit, Some(false) miss, None saturated before deciding.
    let outcomes: Vec<Option<bool>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(master_seed, r);
            let mut front = ParticleFront::bmc(origin, cap);
            let mut visits = 0u128;
            while front.time < horizon && !front.counts.is_empty() {
                front.step_pruned(env, &mut rng, origin, horizon);
                visits = visits.saturating_add(front.count(&origin));
                if visits >= threshold {
                    return Some(true);
                }
                if front.saturated {
                    return None;
                }
            }
            Some(false)
        })
        .collect();
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    let saturated_runs = outcomes.iter().filter(|o| o.is_none()).count();
    let decided = replicates - saturated_runs;
    Ok(AlphaEstimate {
        fraction: if decided == 0 { f64::NAN } else { hits as f64 / decided as f64 },
        hits,
        replicates,
        saturated_runs,
        horizon,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::HomogeneousEnvironment;
    use crate::lattice::{GeneratorSet, StepDistribution};
    use std::sync::Arc;

    fn env(p: &[f64], mu: &[(u32, f64)]) -> HomogeneousEnvironment {
        let g = Arc::new(GeneratorSet::nearest_neighbor(p.len() / 2).unwrap());
        HomogeneousEnvironment::new(StepDistribution::new(g, p.to_vec()).unwrap(), OffspringDistribution::new(mu).unwrap())
    }

    #[test]
    fn dirac_one_is_a_random_walk() {
        let e = env(&[0.5, 0.5], &[(1, 1.0)]);
        let mut rng = replicate_rng(1, 0);
        let mut f = ParticleFront::bmc(Site::ORIGIN, DEFAULT_CAP);
        f.step(&e, &mut rng);
        assert_eq!(f.total(), 1);
        let (&x, _) = f.counts().iter().next().unwrap();
        assert_eq!(x.linf(), 1);
    }

    #[test]
    fn dirac_two_doubles() {
        let e = env(&[0.3, 0.2, 0.4, 0.1], &[(2, 1.0)]);
        let mut rng = replicate_rng(2, 0);
        let mut f = ParticleFront::bmc(Site::ORIGIN, DEFAULT_CAP);
        f.step(&e, &mut rng);
        assert_eq!(f.total(), 2);
        assert!(f.counts().keys().all(|x| x.linf() == 1));
        for n in 2..=20 {
            f.step(&e, &mut rng);
            assert_eq!(f.total(), 1u128 << n);
        }
    }

    #[test]
    fn horizon_one_freezes_nothing_from_origin() {
        let e = env(&[0.9, 0.1], &[(1, 0.5), (2, 0.5)]);
        let out = run_bmc_star(&e, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 1), &mut replicate_rng(3, 0)).unwrap();
        assert_eq!(out.nu_observed, 0);
    }

    #[test]
    fn deterministic_per_replicate() {
        let e = env(&[0.9, 0.1], &[(1, 0.5), (2, 0.5)]);
        let cfg = BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 60);
        let a = run_replicates(&e, &cfg, 50, 9).unwrap();
        let b = run_replicates(&e, &cfg, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = run_replicates(&e, &cfg, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn saturation_is_flagged() {
        let e = env(&[0.5, 0.5], &[(3, 1.0)]);
        let cfg = BmcStarConfig { cap: 1000, prune: false, ..BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 40) };
        let out = run_bmc_star(&e, &cfg, &mut replicate_rng(4, 0)).unwrap();
        assert!(out.saturated);
        let est = estimate_nu(&e, &cfg, 20, 4).unwrap();
        assert_eq!(est.saturated_runs, 20);
        assert!(est.unreliable);
    }

    #[test]
    fn drifted_walk_return_probability() {
        let e = env(&[0.9, 0.1], &[(1, 1.0)]);
        let est = estimate_nu(&e, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 200), 20_000, 5).unwrap();
        assert!((est.mean - 0.2).abs() < 3.5 * est.std_error, "{est:?}");
    }

    #[test]
    fn gw_single_lineage() {
        let e = env(&[0.5, 0.5], &[(1, 1.0)]);
        for r in 0..50 {
            let obs = gw_return_process(&e, Site::ORIGIN, 4, 100, 1 << 40, &mut replicate_rng(6, r)).unwrap();
            assert!(obs.z.iter().all(|&z| z <= 1));
            for w in obs.z.windows(2) {
                assert!(w[0] > 0 || w[1] == 0);
            }
        }
    }

    #[test]
    fn alpha_parameter_checks() {
        let e = env(&[0.5, 0.5], &[(1, 1.0)]);
        assert!(estimate_alpha(&e, Site::ORIGIN, 10, 10, 0, DEFAULT_CAP, 1).is_err());
        let a = estimate_alpha(&e, Site::ORIGIN, 200, 2, 1, DEFAULT_CAP, 1).unwrap();
        // Return by time 2 has probability 1/2.
        assert!((a.fraction - 0.5).abs() < 0.15);
    }
}
