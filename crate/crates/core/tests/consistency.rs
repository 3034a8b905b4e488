//! Cross-checks between independently implemented routes to the same number.

use std::sync::Arc;

use brwre::bellman::{expected_nu_from_origin, solve_expected_frozen, value_iteration_escalating, IterationConfig, IterationStatus};
use brwre::classify::{classify, VerdictKind};
use brwre::config::parse_config;
use brwre::environment::{EnvironmentSpec, HomogeneousEnvironment, OffspringDistribution, RealizedEnvironment, ValidatedSpec};
use brwre::kernel::{n_step_return_prob, power_iteration_rho};
use brwre::lattice::{GeneratorSet, Site, StepDistribution};
use brwre::simulator::{estimate_alpha, estimate_nu, gw_return_process, replicate_rng, BmcStarConfig, ParticleFront, DEFAULT_CAP};
use brwre::spectral::{env_rho, homogeneous_rho, DEFAULT_GRAD_TOL};

fn preset(name: &str) -> ValidatedSpec {
    parse_config(&format!("preset = {name}\n")).unwrap().spec().unwrap()
}

#[test]
fn single_walker_matches_kernel() {
    let g = Arc::new(GeneratorSet::nearest_neighbor(2).unwrap());
    let p = StepDistribution::new(g, vec![0.4, 0.1, 0.3, 0.2]).unwrap();
    let env = HomogeneousEnvironment::new(p.clone(), OffspringDistribution::dirac(1).unwrap());
    const N: u64 = 40_000;
    for n in [2usize, 4, 6] {
        let hits = (0..N)
            .filter(|&r| {
                let mut rng = replicate_rng(n as u64, r);
                let mut front = ParticleFront::bmc(Site::ORIGIN, DEFAULT_CAP);
                for _ in 0..n {
                    front.step(&env, &mut rng);
                }
                assert_eq!(front.total(), 1);
                front.count(&Site::ORIGIN) == 1
            })
            .count();
        let exact = n_step_return_prob(&p, n).unwrap();
        let freq = hits as f64 / N as f64;
        let sigma = (exact * (1.0 - exact) / N as f64).sqrt();
        assert!((freq - exact).abs() < 4.0 * sigma, "n = {n}: {freq} vs {exact}");
    }
}

#[test]
fn simulated_frozen_mass_matches_linear_solve() {
    let spec = Arc::new(preset("random-drift-z1"));
    let env = RealizedEnvironment::new(spec, 3);
    let field = solve_expected_frozen(&env, Site::ORIGIN, 30).unwrap();
    let exact = expected_nu_from_origin(&field, &env);
    let est = estimate_nu(&env, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 200), 4000, 8).unwrap();
    assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{} +- {} vs {exact}", est.mean, est.std_error);
}

#[test]
fn value_iteration_agrees_with_classification() {
    for name in ["drift-z1", "drift-pair", "nn-z2"] {
        let spec = preset(name);
        let v = classify(&spec, DEFAULT_GRAD_TOL).unwrap();
        let cfg = IterationConfig::new(if spec.dim() == 1 { 40 } else { 12 });
        let below = value_iteration_escalating(&spec, 0.9 * v.critical_m, &cfg).unwrap();
        let above = value_iteration_escalating(&spec, 1.1 * v.critical_m, &cfg).unwrap();
        assert_eq!(below.status, IterationStatus::Bounded, "{name}");
        assert_eq!(above.status, IterationStatus::Diverging, "{name}");
    }
}

#[test]
fn recurrent_preset_accumulates_frozen_mass() {
    let spec = Arc::new(preset("drift-z1-recurrent"));
    assert_eq!(classify(&spec, DEFAULT_GRAD_TOL).unwrap().kind, VerdictKind::StronglyRecurrent);
    let env = RealizedEnvironment::new(spec, 0);
    let est = estimate_nu(&env, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 60), 200, 1).unwrap();
    assert!(est.mean - 3.0 * est.std_error > 1.0, "{est:?}");
}

#[test]
fn rho_depends_only_on_the_hull() {
    let g = Arc::new(GeneratorSet::nearest_neighbor(2).unwrap());
    let a = StepDistribution::new(g.clone(), vec![0.5, 0.1, 0.2, 0.2]).unwrap();
    let b = StepDistribution::new(g.clone(), vec![0.3, 0.1, 0.1, 0.5]).unwrap();
    let inside = StepDistribution::mixture(&[&a, &b], &[0.3, 0.7]).unwrap();
    let mu = OffspringDistribution::new(&[(1, 0.5), (2, 0.5)]).unwrap();
    let build = |laws: Vec<StepDistribution>| {
        let n = laws.len() as f64;
        EnvironmentSpec {
            generators: g.clone(),
            step_support: laws.into_iter().map(|p| (p, 1.0 / n)).collect(),
            offspring_support: vec![(mu.clone(), 1.0)],
            gamma: 0.05,
        }
        .validate()
        .unwrap()
    };
    let pair = env_rho(&build(vec![a.clone(), b.clone()]), DEFAULT_GRAD_TOL).unwrap().rho;
    let triple = env_rho(&build(vec![a.clone(), inside, b.clone()]), DEFAULT_GRAD_TOL).unwrap().rho;
    assert!((pair - triple).abs() < 1e-9, "{pair} vs {triple}");
    let own = homogeneous_rho(&a, DEFAULT_GRAD_TOL).unwrap().rho.max(homogeneous_rho(&b, DEFAULT_GRAD_TOL).unwrap().rho);
    assert!(pair >= own - 1e-12 && pair <= 1.0);
}

#[test]
fn truncated_nu_has_converged_by_horizon_100() {
    for name in ["drift-z1", "random-drift-z1"] {
        let env = RealizedEnvironment::new(Arc::new(preset(name)), 0);
        let short = estimate_nu(&env, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 100), 2000, 4).unwrap();
        let long = estimate_nu(&env, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 200), 2000, 4).unwrap();
        let se = short.std_error.max(long.std_error);
        assert!((short.mean - long.mean).abs() < 2.0 * se, "{name}: {} vs {}", short.mean, long.mean);
    }
}

#[test]
fn first_gw_generation_is_the_frozen_count() {
    let env = RealizedEnvironment::new(Arc::new(preset("drift-z1")), 0);
    const N: u64 = 3000;
    let z1: Vec<f64> = (0..N)
        .map(|r| {
            let obs = gw_return_process(&env, Site::ORIGIN, 2, 200, DEFAULT_CAP, &mut replicate_rng(21, r)).unwrap();
            assert!(!obs.truncated);
            obs.z[0] as f64
        })
        .collect();
    let mean = z1.iter().sum::<f64>() / N as f64;
    let var = z1.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
    let est = estimate_nu(&env, &BmcStarConfig::new(Site::ORIGIN, Site::ORIGIN, 200), 3000, 22).unwrap();
    let se = (var / N as f64 + est.std_error.powi(2)).sqrt();
    assert!(mean < 1.0 && (mean - est.mean).abs() < 4.0 * se, "{mean} vs {}", est.mean);
}

#[test]
fn recurrent_gw_process_survives() {
    let env = RealizedEnvironment::new(Arc::new(preset("drift-z1-recurrent")), 0);
    const N: u64 = 200;
    let alive = (0..N)
        .filter(|&r| {
            let obs = gw_return_process(&env, Site::ORIGIN, 3, 60, DEFAULT_CAP, &mut replicate_rng(23, r)).unwrap();
            obs.z.last().copied().unwrap_or(0) > 0
        })
        .count();
    assert!(alive as f64 / N as f64 > 0.3, "{alive} of {N}");
}

#[test]
fn alpha_with_one_visit_is_the_return_probability() {
    let g = Arc::new(GeneratorSet::nearest_neighbor(1).unwrap());
    let p = StepDistribution::new(g, vec![0.5, 0.5]).unwrap();
    let env = HomogeneousEnvironment::new(p.clone(), OffspringDistribution::dirac(1).unwrap());
    const H: usize = 20;
    // First-return probabilities from the renewal equation p_n = Σ_k f_k p_{n−k}.
    let pn: Vec<f64> = (0..=H).map(|n| if n == 0 { 1.0 } else { n_step_return_prob(&p, n).unwrap() }).collect();
    let mut f = vec![0.0; H + 1];
    for n in 1..=H {
        f[n] = pn[n] - (1..n).map(|k| f[k] * pn[n - k]).sum::<f64>();
    }
    let exact: f64 = f.iter().sum();
    let est = estimate_alpha(&env, Site::ORIGIN, 20_000, H, 1, DEFAULT_CAP, 24).unwrap();
    let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!((est.fraction - exact).abs() < 4.0 * sigma, "{} vs {exact}", est.fraction);
}

#[test]
fn symmetric_return_roots_increase() {
    for (d, w) in [(1, vec![0.5, 0.5]), (2, vec![0.25; 4])] {
        let g = Arc::new(GeneratorSet::nearest_neighbor(d).unwrap());
        let est = power_iteration_rho(&StepDistribution::new(g, w).unwrap(), 400).unwrap();
        for pair in est.tail.windows(2) {
            assert!(pair[1].1 + 1e-12 >= pair[0].1, "d = {d}: {:?}", est.tail);
        }
        assert!(est.estimate <= 1.0);
    }
}
