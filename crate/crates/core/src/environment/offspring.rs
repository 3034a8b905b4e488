use crate::error::OffspringError;
use crate::lattice::MASS_TOL;

/// A finitely supported offspring law `(μ_k)_{k≥1}`. Zero offspring is not
/// representable: particles never die.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringDistribution {
    // masses[i] = μ_{i+1}; no trailing zeros.
    masses: Vec<f64>,
}

impl OffspringDistribution {
    /// Builds a law from `(k, μ_k)` pairs.
    pub fn new(pairs: &[(u32, f64)]) -> Result<Self, OffspringError> {
        if pairs.is_empty() {
            return Err(OffspringError::Empty);
        }
        let kmax = pairs.iter().map(|p| p.0).max().unwrap_or(0) as usize;
        let mut masses = vec![0.0; kmax];
        let mut seen = vec![false; kmax];
        for &(k, m) in pairs {
            if k == 0 {
                return Err(OffspringError::ZeroOffspring);
            }
            if !m.is_finite() || m < 0.0 {
                return Err(OffspringError::BadMass { k, value: m });
            }
            let i = k as usize - 1;
            if std::mem::replace(&mut seen[i], true) {
                return Err(OffspringError::DuplicateCount { k });
            }
            masses[i] = m;
        }
        Self::from_masses(masses)
    }

    /// Builds a law from the dense vector `[μ_1, μ_2, ...]`.
    pub fn from_masses(mut masses: Vec<f64>) -> Result<Self, OffspringError> {
        if let Some(i) = masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(OffspringError::BadMass { k: i as u32 + 1, value: masses[i] });
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(OffspringError::MassSum { total });
        }
        while masses.last() == Some(&0.0) {
            masses.pop();
        }
        if masses.is_empty() {
            return Err(OffspringError::Empty);
        }
        Ok(OffspringDistribution { masses })
    }

    /// The point mass at `k`.
    pub fn dirac(k: u32) -> Result<Self, OffspringError> {
        Self::new(&[(k, 1.0)])
    }

    /// `μ_k`, zero outside the stored range.
    pub fn mass(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.masses.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    /// Dense masses `[μ_1, ..., μ_K]`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn max_offspring(&self) -> usize {
        self.masses.len()
    }

    /// `(k, μ_k)` for every `k` with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.masses.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(i, &m)| (i + 1, m))
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(i, m)| (i + 1) as f64 * m).sum()
    }

    /// `Σ_{k≥t} μ_k`.
    pub fn tail(&self, t: usize) -> f64 {
        self.masses.iter().skip(t.saturating_sub(1)).sum()
    }

    /// Stochastic dominance over `other`, up to `tol` per threshold.
    pub fn dominates(&self, other: &OffspringDistribution, tol: f64) -> bool {
        let kmax = self.max_offspring().max(other.max_offspring());
        (1..=kmax).all(|t| self.tail(t) + tol >= other.tail(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_and_bad_mass() {
        assert_eq!(OffspringDistribution::new(&[(0, 0.5), (2, 0.5)]), Err(OffspringError::ZeroOffspring));
        assert!(matches!(OffspringDistribution::new(&[(1, 0.5), (2, 0.4)]), Err(OffspringError::MassSum { .. })));
        assert!(matches!(OffspringDistribution::new(&[(1, -0.5), (2, 1.5)]), Err(OffspringError::BadMass { .. })));
        assert!(matches!(OffspringDistribution::new(&[(1, 0.5), (1, 0.5)]), Err(OffspringError::DuplicateCount { k: 1 })));
        assert!(matches!(OffspringDistribution::new(&[]), Err(OffspringError::Empty)));
    }

    #[test]
    fn mean_and_tails() {
        let mu = OffspringDistribution::new(&[(1, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(mu.mean(), 2.0);
        assert_eq!(mu.tail(1), 1.0);
        assert_eq!(mu.tail(2), 0.5);
        assert_eq!(mu.tail(4), 0.0);
        assert_eq!(mu.support().collect::<Vec<_>>(), vec![(1, 0.5), (3, 0.5)]);
        let trimmed = OffspringDistribution::from_masses(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(trimmed.max_offspring(), 1);
    }
}
