//! Exact n-step return probabilities of a homogeneous walk by dense
//! convolution over the reachable box.
//!
//! Mass that can no longer reach the origin by the last requested time is
//! dropped, so the live region is the band `‖x‖∞ ≤ min(k, n_max − k)·J` where
//! `J` is the largest jump. All returned values are exact up to rounding.
//! Values are tracked with a running log-scale so that `p^{(n)}(0,0)` far
//! below the `f64` range is still available as a logarithm.
//!
//! A drifting walk puts the origin many orders of magnitude below the bulk
//! of the mass, beyond the dynamic range of `f64`. The convolution therefore
//! runs on the exponentially tilted law `p(s) e^{⟨θ,s⟩} / φ(θ)` at the
//! minimiser `θ` of the mgf, which has zero drift. Every path that returns
//! to the origin has `Σ s = 0`, so `p^{(n)}(0,0) = φ(θ)^n p̃^{(n)}(0,0)`.

use serde::Serialize;

use crate::error::KernelError;
use crate::lattice::StepDistribution;
use crate::spectral::homogeneous_rho;

/// Upper bound on the number of cells in one convolution buffer.
pub const MAX_CELLS: u128 = 1 << 25;

/// Rescale once the largest live value drops below this.
const RESCALE_BELOW: f64 = 1e-150;

struct Grid {
    dim: usize,
    radius: i64,
    width: usize,
    strides: Vec<usize>,
    center: usize,
}

impl Grid {
    fn new(dim: usize, radius: i64) -> Result<Self, KernelError> {
        let width = 2 * radius as u128 + 1;
        let cells = width.checked_pow(dim as u32).unwrap_or(u128::MAX);
        if cells > MAX_CELLS {
            return Err(KernelError::Resource { cells, limit: MAX_CELLS });
        }
        let width = width as usize;
        let strides: Vec<usize> = (0..dim).map(|i| width.pow(i as u32)).collect();
        let center = strides.iter().map(|s| s * radius as usize).sum();
        Ok(Grid { dim, radius, width, strides, center })
    }

    fn cells(&self) -> usize {
        self.width.pow(self.dim as u32)
    }

    /// Calls `f` with the flat index range of every innermost row of the
    /// centred sub-box of radius `r`.
    fn for_each_row(&self, r: i64, mut f: impl FnMut(std::ops::Range<usize>)) {
        let r = r.min(self.radius);
        let mut outer = vec![-r; self.dim.saturating_sub(1)];
        loop {
            let mut base = self.center - r as usize;
            for (i, &c) in outer.iter().enumerate() {
                base = (base as i64 + c * self.strides[i + 1] as i64) as usize;
            }
            f(base..base + 2 * r as usize + 1);
            // Odometer over the outer coordinates.
            let mut i = 0;
            loop {
                if i == outer.len() {
                    return;
                }
                if outer[i] < r {
                    outer[i] += 1;
                    break;
                }
                outer[i] = -r;
                i += 1;
            }
        }
    }
}

/// `ln p^{(k)}(0,0)` for `k = 0..=n_max` (`-inf` where the probability is 0).
pub fn return_log_probs(p: &StepDistribution, n_max: usize) -> Result<Vec<f64>, KernelError> {
    let g = p.generators();
    let jump = g.max_jump();
    let dim = g.dim();
    let peak = (n_max / 2) as i64 * jump;
    // Padding by one jump keeps every gather read inside the buffer.
    let grid = Grid::new(dim, peak + jump)?;
    let theta = homogeneous_rho(p, 1e-10).map(|r| r.theta_star).unwrap_or_else(|_| vec![0.0; dim]);
    let mut offsets: Vec<(isize, f64)> = g
        .steps()
        .iter()
        .zip(p.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| {
            let off: i64 = (0..dim).map(|i| s.coord(i) * grid.strides[i] as i64).sum();
            (off as isize, w * s.dot(&theta).exp())
        })
        .collect();
    let phi: f64 = offsets.iter().map(|o| o.1).sum();
    offsets.iter_mut().for_each(|o| o.1 /= phi);
    let log_phi = phi.ln();

    let mut cur = vec![0.0f64; grid.cells()];
    let mut next = vec![0.0f64; grid.cells()];
    cur[grid.center] = 1.0;
    let mut log_scale = 0.0f64;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    let band = |k: usize| (k.min(n_max - k)) as i64 * jump;
    let mut stale_radius = 0i64;

    for k in 1..=n_max {
        let r_next = band(k);
        // `next` still holds values from step k-2; clear them first.
        grid.for_each_row(stale_radius, |row| next[row].fill(0.0));
        let mut max = 0.0f64;
        grid.for_each_row(r_next, |row| {
            for i in row {
                let mut acc = 0.0;
                for &(off, w) in &offsets {
                    // new(x) = Σ_s p(s) old(x − s)
                    acc += w * cur[(i as isize - off) as usize];
                }
                next[i] = acc;
                max = max.max(acc);
            }
        });
        if max > 0.0 && max < RESCALE_BELOW {
            let inv = 1.0 / max;
            grid.for_each_row(r_next, |row| next[row].iter_mut().for_each(|v| *v *= inv));
            log_scale += max.ln();
        }
        log_scale += log_phi;
        stale_radius = band(k - 1);
        std::mem::swap(&mut cur, &mut next);
        let v = cur[grid.center];
        out.push(if v > 0.0 { v.ln() + log_scale } else { f64::NEG_INFINITY });
    }
    Ok(out)
}

/// `p^{(n)}(0,0)` for the homogeneous walk with step law `p`.
pub fn n_step_return_prob(p: &StepDistribution, n: usize) -> Result<f64, KernelError> {
    if n < 1 {
        return Err(KernelError::TooFewSteps { n, min: 1 });
    }
    Ok(return_log_probs(p, n)?[n].exp())
}

/// Spectral-radius estimate from the definition, with the last few iterates.
#[derive(Clone, Debug, Serialize)]
pub struct RhoEstimate {
    /// `p^{(2n)}(0,0)^{1/(2n)}` at `n = ⌊n_max/2⌋`.
    pub estimate: f64,
    pub n: usize,
    /// `(2k, p^{(2k)}(0,0)^{1/(2k)})` for the last few `k ≤ n`, in increasing order.
    pub tail: Vec<(usize, f64)>,
}

const TAIL_LEN: usize = 8;

pub fn power_iteration_rho(p: &StepDistribution, n_max: usize) -> Result<RhoEstimate, KernelError> {
    if n_max < 2 {
        return Err(KernelError::TooFewSteps { n: n_max, min: 2 });
    }
    let n = n_max / 2;
    let logs = return_log_probs(p, 2 * n)?;
    if (1..=n).all(|k| logs[2 * k] == f64::NEG_INFINITY) {
        return Err(KernelError::NoReturns { n_max });
    }
    let root = |k: usize| (logs[2 * k] / (2 * k) as f64).exp();
    let tail = (n.saturating_sub(TAIL_LEN - 1).max(1)..=n).map(|k| (2 * k, root(k))).collect();
    Ok(RhoEstimate { estimate: root(n), n, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GeneratorSet, Site};
    use std::sync::Arc;

    fn law(g: GeneratorSet, w: &[f64]) -> StepDistribution {
        StepDistribution::new(Arc::new(g), w.to_vec()).unwrap()
    }

    /// Sum over all step sequences of length `n` that end at the origin.
    fn brute_force(p: &StepDistribution, n: usize) -> f64 {
        fn rec(p: &StepDistribution, left: usize, at: Site, prob: f64) -> f64 {
            if left == 0 {
                return if at.is_origin() { prob } else { 0.0 };
            }
            let g = p.generators();
            g.steps().iter().zip(p.weights()).map(|(s, &w)| rec(p, left - 1, at.offset(s), prob * w)).sum()
        }
        rec(p, n, Site::ORIGIN, 1.0)
    }

    #[test]
    fn simple_walk_examples() {
        let sym = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.5, 0.5]);
        assert!((n_step_return_prob(&sym, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(n_step_return_prob(&sym, 3).unwrap(), 0.0);
        let drift = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.9, 0.1]);
        assert!((n_step_return_prob(&drift, 2).unwrap() - 0.18).abs() < 1e-15);
        assert!(n_step_return_prob(&drift, 0).is_err());
    }

    #[test]
    fn matches_enumeration() {
        let cases = vec![
            law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.7, 0.3]),
            law(GeneratorSet::nearest_neighbor(2).unwrap(), &[0.4, 0.1, 0.3, 0.2]),
            law(GeneratorSet::new(1, vec![vec![1], vec![-1], vec![2], vec![-2]], vec![0, 1]).unwrap(), &[0.4, 0.3, 0.2, 0.1]),
            law(GeneratorSet::nearest_neighbor(3).unwrap(), &[0.2, 0.1, 0.25, 0.15, 0.2, 0.1]),
        ];
        for p in &cases {
            let max_n = if p.generators().len() > 4 { 6 } else { 8 };
            for n in 1..=max_n {
                let exact = brute_force(p, n);
                let conv = n_step_return_prob(p, n).unwrap();
                assert!((exact - conv).abs() < 1e-12, "n={n}: {exact} vs {conv}");
            }
        }
    }

    #[test]
    fn band_pruning_keeps_intermediate_returns_exact() {
        let p = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.6, 0.4]);
        let logs = return_log_probs(&p, 30).unwrap();
        for n in [2usize, 10, 20, 30] {
            let direct = n_step_return_prob(&p, n).unwrap();
            assert!((logs[n].exp() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn log_scale_survives_underflow() {
        // C(2n, n) (pq)^n with 2n = 4000 is far below f64::MIN_POSITIVE.
        let p = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.9, 0.1]);
        let logs = return_log_probs(&p, 4000).unwrap();
        let n = 2000f64;
        let exact = ln_binomial_mid(2000) + n * (0.09f64).ln();
        assert!((logs[4000] - exact).abs() < 1e-8, "{} vs {exact}", logs[4000]);
    }

    fn ln_binomial_mid(n: usize) -> f64 {
        (1..=n).map(|i| ((n + i) as f64 / i as f64).ln()).sum()
    }

    #[test]
    fn power_iteration_bounds_and_tail() {
        let p = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[0.5, 0.5]);
        let est = power_iteration_rho(&p, 200).unwrap();
        assert_eq!(est.n, 100);
        assert_eq!(est.tail.len(), TAIL_LEN);
        assert_eq!(est.tail.last().unwrap().0, 200);
        for w in est.tail.windows(2) {
            assert!(w[1].1 + 1e-12 >= w[0].1);
        }
        assert!(est.estimate > 0.0 && est.estimate <= 1.0);
        assert!(power_iteration_rho(&p, 1).is_err());
    }

    #[test]
    fn degenerate_law_has_no_returns() {
        let p = law(GeneratorSet::nearest_neighbor(1).unwrap(), &[1.0, 0.0]);
        assert!(matches!(power_iteration_rho(&p, 10), Err(KernelError::NoReturns { .. })));
    }

    #[test]
    fn resource_limit() {
        let p = law(GeneratorSet::nearest_neighbor(3).unwrap(), &[1.0 / 6.0; 6]);
        assert!(matches!(n_step_return_prob(&p, 2000), Err(KernelError::Resource { .. })));
    }
}
