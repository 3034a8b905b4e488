//! Spectral radius of homogeneous and random walks on Z^d through the
//! moment generating function `φ_p(θ) = Σ_s e^{⟨θ,s⟩} p(s)`.
//!
//! For a homogeneous walk `ρ(p) = inf_θ φ_p(θ)`. For an environment whose
//! step laws have finite support `{p_1, …, p_J}`, the almost-sure spectral
//! radius is `inf_θ max_j φ_{p_j}(θ)`: `φ` is linear in `p`, so the supremum
//! over the convex hull is attained at a support point for every fixed `θ`,
//! and the minimax swap makes this equal to the supremum over the hull of
//! the homogeneous radii. The walk has `ρ = 1` exactly when the hull
//! contains a law with zero drift.
//!
//! All minimisation is done on `ψ = ln φ` in log-sum-exp form so that
//! large `θ` never overflows.

use serde::Serialize;

use crate::environment::ValidatedSpec;
use crate::error::SpectralError;
use crate::lattice::StepDistribution;
use crate::linalg::{norm, solve};

/// Default bound on the gradient (or subgradient) norm of the mgf.
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;
/// Default accuracy claimed for a reported spectral radius.
pub const DEFAULT_RHO_TOL: f64 = 1e-8;

const MAX_EXPONENT: f64 = 700.0;
const MAX_NEWTON: usize = 200;
const ARMIJO: f64 = 1e-4;
const SMOOTHING: [f64; 11] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    pub rho: f64,
    pub theta_star: Vec<f64>,
    /// Support indices whose mgf attains the maximum at `theta_star`.
    pub active_extreme_points: Vec<usize>,
    /// Convex weights on the active points certifying optimality.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Norm of the (sub)gradient of the mgf at `theta_star`.
    pub residual: f64,
}

/// `Σ_s e^{⟨θ,s⟩} p(s)`.
pub fn mgf(p: &StepDistribution, theta: &[f64]) -> Result<f64, SpectralError> {
    let g = p.generators();
    if theta.len() != g.dim() {
        return Err(SpectralError::ThetaLength { got: theta.len(), dim: g.dim() });
    }
    let mut total = 0.0;
    for (s, &w) in g.steps().iter().zip(p.weights()) {
        if w == 0.0 {
            continue;
        }
        let e = s.dot(theta);
        if e > MAX_EXPONENT || !e.is_finite() {
            return Err(SpectralError::Overflow { step: s.to_string(), theta: theta.to_vec(), exponent: e });
        }
        total += w * e.exp();
    }
    Ok(total)
}

/// `ψ = ln φ_p` with exact first and second derivatives.
struct LogMgf {
    dim: usize,
    // (step as reals, ln p(s)) over steps with positive weight.
    terms: Vec<(Vec<f64>, f64)>,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

impl LogMgf {
    fn new(p: &StepDistribution) -> Self {
        let g = p.generators();
        let dim = g.dim();
        let terms = g
            .steps()
            .iter()
            .zip(p.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, &w)| ((0..dim).map(|i| s.coord(i) as f64).collect(), w.ln()))
            .collect();
        LogMgf { dim, terms }
    }

    fn exponents(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let a: Vec<f64> = self.terms.iter().map(|(s, lw)| lw + dot(s, theta)).collect();
        let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (a, m)
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let (a, m) = self.exponents(theta);
        m + a.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        let (a, m) = self.exponents(theta);
        let q: Vec<f64> = a.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = q.iter().sum();
        let d = self.dim;
        let mut grad = vec![0.0; d];
        let mut second = vec![vec![0.0; d]; d];
        for ((s, _), qi) in self.terms.iter().zip(&q) {
            let w = qi / z;
            for i in 0..d {
                grad[i] += w * s[i];
                for j in 0..d {
                    second[i][j] += w * s[i] * s[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                second[i][j] -= grad[i] * grad[j];
            }
        }
        Eval { value: m + z.ln(), grad, hess: second }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const ROUNDING_DECREASE: f64 = 1e-14;

/// Damped Newton with Armijo backtracking on a smooth convex function.
/// Returns the final point, iterations used and whether the stopping rule
/// was met.
fn newton(
    mut theta: Vec<f64>,
    eval: impl Fn(&[f64]) -> Eval,
    value: impl Fn(&[f64]) -> f64,
    done: impl Fn(&Eval) -> bool,
    max_iter: usize,
) -> (Vec<f64>, usize, bool) {
    for it in 0..max_iter {
        let e = eval(&theta);
        if done(&e) {
            return (theta, it, true);
        }
        let neg: Vec<f64> = e.grad.iter().map(|g| -g).collect();
        let mut dir = solve(e.hess.clone(), neg.clone()).unwrap_or(neg);
        let mut slope = dot(&e.grad, &dir);
        if slope >= 0.0 {
            dir = e.grad.iter().map(|g| -g).collect();
            slope = -dot(&e.grad, &e.grad);
        }
        // Once the predicted decrease is below rounding in the value, the
        // Armijo test is noise; take the full step.
        if -slope <= ROUNDING_DECREASE * e.value.abs().max(1.0) {
            theta.iter_mut().zip(&dir).for_each(|(x, d)| *x += d);
            continue;
        }
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-20 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            if value(&cand) <= e.value + ARMIJO * t * slope {
                theta = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            let ok = done(&eval(&theta));
            return (theta, it + 1, ok);
        }
    }
    let ok = done(&eval(&theta));
    (theta, max_iter, ok)
}

/// `ρ(p) = inf_θ φ_p(θ)` by Newton's method on `ln φ_p`.
pub fn homogeneous_rho(p: &StepDistribution, tol: f64) -> Result<SpectralResult, SpectralError> {
    if !p.is_elliptic() {
        return Err(SpectralError::Degenerate);
    }
    let f = LogMgf::new(p);
    let done = |e: &Eval| e.value.exp() * norm(&e.grad) <= tol;
    let (theta, iterations, ok) = newton(vec![0.0; f.dim], |t| f.eval(t), |t| f.value(t), done, MAX_NEWTON);
    let e = f.eval(&theta);
    let residual = e.value.exp() * norm(&e.grad);
    if !ok {
        return Err(SpectralError::NoConvergence { iterations, residual });
    }
    Ok(SpectralResult { rho: e.value.exp(), theta_star: theta, active_extreme_points: vec![0], weights: vec![1.0], iterations, residual })
}

/// Closed form `2 Σ_i √(p(e_i) p(−e_i))` for nearest-neighbour laws.
pub fn nearest_neighbor_rho(p: &StepDistribution) -> Result<f64, SpectralError> {
    let g = p.generators();
    if !g.is_nearest_neighbor() {
        return Err(SpectralError::NotNearestNeighbor);
    }
    let sum: f64 = (0..g.dim())
        .map(|i| {
            let e = crate::lattice::Site::unit(i);
            (p.weight_of(&e) * p.weight_of(&e.neg())).sqrt()
        })
        .sum();
    Ok(2.0 * sum)
}

/// Smoothed maximum `t ln Σ_j exp(ψ_j / t)` and its derivatives.
fn smoothed_max(fs: &[LogMgf], theta: &[f64], t: f64) -> (Eval, Vec<f64>) {
    let evals: Vec<Eval> = fs.iter().map(|f| f.eval(theta)).collect();
    let a: Vec<f64> = evals.iter().map(|e| e.value / t).collect();
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = a.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = ex.iter().sum();
    let w: Vec<f64> = ex.iter().map(|x| x / z).collect();
    let d = theta.len();
    let mut grad = vec![0.0; d];
    for (e, wj) in evals.iter().zip(&w) {
        for i in 0..d {
            grad[i] += wj * e.grad[i];
        }
    }
    let mut hess = vec![vec![0.0; d]; d];
    for (e, wj) in evals.iter().zip(&w) {
        for i in 0..d {
            for k in 0..d {
                hess[i][k] += wj * (e.hess[i][k] + (e.grad[i] * e.grad[k]) / t);
            }
        }
    }
    for i in 0..d {
        for k in 0..d {
            hess[i][k] -= grad[i] * grad[k] / t;
        }
    }
    (Eval { value: t * (m + z.ln()), grad, hess }, w)
}

fn smoothed_value(fs: &[LogMgf], theta: &[f64], t: f64) -> f64 {
    let a: Vec<f64> = fs.iter().map(|f| f.value(theta) / t).collect();
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    t * (m + a.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
}

/// Subgradient norm `‖Σ_j λ_j ∇φ_j(θ)‖` in mgf units.
fn subgradient_residual(fs: &[LogMgf], theta: &[f64], idx: &[usize], lambda: &[f64]) -> f64 {
    let mut g = vec![0.0; theta.len()];
    for (&j, l) in idx.iter().zip(lambda) {
        let e = fs[j].eval(theta);
        let scale = e.value.exp();
        for (gi, ei) in g.iter_mut().zip(&e.grad) {
            *gi += l * scale * ei;
        }
    }
    norm(&g)
}

/// Cap on near-active laws considered when polishing.
const MAX_POLISH_CANDIDATES: usize = 8;

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else { return out };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Newton on the optimality system of `min_θ max_{j∈A} ψ_j`:
/// `Σ λ_j ∇ψ_j = 0`, `ψ_j = c` on `A`, `Σ λ_j = 1`.
fn polish_active_set(fs: &[LogMgf], theta0: &[f64], active: &[usize], lambda0: &[f64]) -> Option<(Vec<f64>, Vec<f64>, usize)> {
    let d = theta0.len();
    let k = active.len();
    let n = d + k + 1;
    let mut theta = theta0.to_vec();
    let mut lambda = lambda0.to_vec();
    let mut c = active.iter().map(|&j| fs[j].value(&theta)).fold(f64::NEG_INFINITY, f64::max);
    let mut last = f64::INFINITY;
    for it in 0..50 {
        let evals: Vec<Eval> = active.iter().map(|&j| fs[j].eval(&theta)).collect();
        let mut r = vec![0.0; n];
        let mut jac = vec![vec![0.0; n]; n];
        for (a, (e, l)) in evals.iter().zip(&lambda).enumerate() {
            for i in 0..d {
                r[i] += l * e.grad[i];
                for q in 0..d {
                    jac[i][q] += l * e.hess[i][q];
                }
                jac[i][d + a] = e.grad[i];
                jac[d + a][i] = e.grad[i];
            }
            r[d + a] = e.value - c;
            jac[d + a][n - 1] = -1.0;
            jac[n - 1][d + a] = 1.0;
        }
        r[n - 1] = lambda.iter().sum::<f64>() - 1.0;
        let rn = norm(&r);
        if rn < 1e-15 || (rn >= last * 0.5 && rn < 1e-13) {
            return Some((theta, lambda, it));
        }
        last = rn;
        let step = solve(jac, r)?;
        for i in 0..d {
            theta[i] -= step[i];
        }
        for a in 0..k {
            lambda[a] -= step[d + a];
        }
        c -= step[n - 1];
        if !theta.iter().chain(&lambda).all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Minimax `inf_θ max_j φ_{p_j}(θ)` over the step support of `spec`,
/// which is the almost-sure spectral radius of the random walk.
pub fn env_rho(spec: &ValidatedSpec, tol: f64) -> Result<SpectralResult, SpectralError> {
    let laws: Vec<&StepDistribution> = spec.step_laws().collect();
    minimax_rho(&laws, tol)
}

/// [`env_rho`] on an explicit list of step laws.
pub fn minimax_rho(laws: &[&StepDistribution], tol: f64) -> Result<SpectralResult, SpectralError> {
    match laws {
        [] => return Err(SpectralError::EmptySupport),
        [single] => return homogeneous_rho(single, tol),
        _ => {}
    }
    if laws.iter().any(|p| !p.is_elliptic()) {
        return Err(SpectralError::Degenerate);
    }
    let fs: Vec<LogMgf> = laws.iter().map(|p| LogMgf::new(p)).collect();
    let d = fs[0].dim;
    let mut theta = vec![0.0; d];
    let mut iterations = 0;
    let mut weights = vec![1.0 / fs.len() as f64; fs.len()];
    for &t in &SMOOTHING {
        let done = |e: &Eval| norm(&e.grad) <= 1e-14;
        let (th, it, _) = newton(theta, |x| smoothed_max(&fs, x, t).0, |x| smoothed_value(&fs, x, t), done, MAX_NEWTON);
        theta = th;
        iterations += it;
        weights = smoothed_max(&fs, &theta, t).1;
    }

    let values: Vec<f64> = fs.iter().map(|f| f.value(&theta)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut candidates: Vec<usize> = (0..fs.len()).filter(|&j| values[j] >= top - 1e-6).collect();
    candidates.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    candidates.truncate(MAX_POLISH_CANDIDATES);

    // Laws inside the hull of others are active too but make the KKT system
    // singular, so try small subsets first. Any feasible KKT point is optimal.
    let mut result = None;
    'search: for size in 1..=(d + 1).min(candidates.len()) {
        for subset in subsets(candidates.len(), size) {
            let order: Vec<usize> = subset.iter().map(|&a| candidates[a]).collect();
            let s: f64 = order.iter().map(|&j| weights[j]).sum();
            let lambda0: Vec<f64> = order.iter().map(|&j| if s > 0.0 { weights[j] / s } else { 1.0 / size as f64 }).collect();
            let Some((th, lam, it)) = polish_active_set(&fs, &theta, &order, &lambda0) else { continue };
            iterations += it;
            let vals: Vec<f64> = fs.iter().map(|f| f.value(&th)).collect();
            let c = order.iter().map(|&j| vals[j]).fold(f64::NEG_INFINITY, f64::max);
            let feasible = lam.iter().all(|&l| l >= -1e-12) && vals.iter().all(|&v| v <= c + 1e-12);
            if feasible {
                result = Some((th, order, lam.iter().map(|l| l.max(0.0)).collect::<Vec<_>>()));
                break 'search;
            }
        }
    }
    let (theta, mut active, mut lambda) = result.unwrap_or_else(|| {
        let idx: Vec<usize> = (0..fs.len()).filter(|&j| weights[j] > 1e-12).collect();
        let lam = idx.iter().map(|&j| weights[j]).collect();
        (theta, idx, lam)
    });
    // Drop points that carry no weight from the reported active set.
    let keep: Vec<usize> = (0..active.len()).filter(|&a| lambda[a] > 1e-12).collect();
    if !keep.is_empty() {
        active = keep.iter().map(|&a| active[a]).collect();
        lambda = keep.iter().map(|&a| lambda[a]).collect();
        let s: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= s);
    }
    let residual = subgradient_residual(&fs, &theta, &active, &lambda);
    let rho = fs.iter().map(|f| f.value(&theta)).fold(f64::NEG_INFINITY, f64::max).exp();
    if residual > tol {
        return Err(SpectralError::NoConvergence { iterations, residual });
    }
    Ok(SpectralResult { rho, theta_star: theta, active_extreme_points: active, weights: lambda, iterations, residual })
}

/// Outcome of the zero-drift test on the convex hull of the step support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroDrift {
    pub zero_drift: bool,
    /// Convex weights over the step support whose mixture has zero drift.
    pub witness: Option<Vec<f64>>,
}

const DRIFT_TOL: f64 = 1e-12;

/// Decides whether `0 ∈ conv{drift(p_j)}` by checking every affinely
/// independent subset of at most `d + 1` drift vectors (Carathéodory).
pub fn has_zero_drift(spec: &ValidatedSpec) -> ZeroDrift {
    let drifts: Vec<Vec<f64>> = spec.step_laws().map(StepDistribution::drift).collect();
    zero_in_hull(&drifts, spec.dim())
}

pub(crate) fn zero_in_hull(points: &[Vec<f64>], dim: usize) -> ZeroDrift {
    let j = points.len();
    let mut subset = Vec::new();
    for k in 1..=j.min(dim + 1) {
        if let Some(w) = search_subsets(points, dim, k, 0, &mut subset) {
            return ZeroDrift { zero_drift: true, witness: Some(w) };
        }
    }
    ZeroDrift { zero_drift: false, witness: None }
}

fn search_subsets(points: &[Vec<f64>], dim: usize, k: usize, start: usize, subset: &mut Vec<usize>) -> Option<Vec<f64>> {
    if subset.len() == k {
        return barycentric(points, dim, subset);
    }
    for i in start..points.len() {
        subset.push(i);
        let found = search_subsets(points, dim, k, i + 1, subset);
        subset.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Convex weights `λ` on `subset` with `Σ λ_i v_i = 0`, if they exist.
fn barycentric(points: &[Vec<f64>], dim: usize, subset: &[usize]) -> Option<Vec<f64>> {
    let k = subset.len();
    // Rows: the `dim` coordinates and the affine constraint.
    let rows: Vec<Vec<f64>> = (0..=dim).map(|r| subset.iter().map(|&i| if r < dim { points[i][r] } else { 1.0 }).collect()).collect();
    let rhs: Vec<f64> = (0..=dim).map(|r| if r < dim { 0.0 } else { 1.0 }).collect();
    // Normal equations; k ≤ dim + 1 so the system is at most 4x4.
    let ata: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| rows.iter().map(|r| r[a] * r[b]).sum()).collect()).collect();
    let atb: Vec<f64> = (0..k).map(|a| rows.iter().zip(&rhs).map(|(r, y)| r[a] * y).sum()).collect();
    let lambda = solve(ata, atb)?;
    if lambda.iter().any(|&l| l < -DRIFT_TOL) {
        return None;
    }
    let resid = rows.iter().zip(&rhs).map(|(r, y)| (dot(r, &lambda) - y).abs()).fold(0.0, f64::max);
    if resid > DRIFT_TOL {
        return None;
    }
    let mut full = vec![0.0; points.len()];
    for (&i, l) in subset.iter().zip(&lambda) {
        full[i] = l.max(0.0);
    }
    Some(full)
}
