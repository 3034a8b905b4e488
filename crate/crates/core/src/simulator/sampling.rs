//! Binomial and multinomial draws on `u128` counts.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Largest trial count handed to one `Binomial` draw; keeps `n·p` inside
/// the sampler's `i64` arithmetic.
const CHUNK: u128 = 1 << 62;

pub(crate) fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u128, p: f64) -> u128 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n == 1 {
        return u128::from(rng.random::<f64>() < p);
    }
    let mut left = n;
    let mut hits = 0u128;
    while left > 0 {
        let k = left.min(CHUNK);
        let b = Binomial::new(k as u64, p).expect("p lies in (0, 1)");
        hits += u128::from(b.sample(rng));
        left -= k;
    }
    hits
}

/// Splits `n` over the categories of `probs` (summing to 1) by successive
/// conditional binomials. Zero-probability categories consume no
/// randomness.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u128, probs: &[f64], out: &mut [u128]) {
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut left = n;
    let mut mass = 1.0f64;
    for (k, (&p, slot)) in probs.iter().zip(out.iter_mut()).enumerate() {
        if k == last {
            *slot = left;
            left = 0;
            continue;
        }
        if p <= 0.0 || left == 0 {
            *slot = 0;
            continue;
        }
        let x = binomial(rng, left, (p / mass).min(1.0));
        *slot = x;
        left -= x;
        mass -= p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(binomial(&mut rng, 0, 0.5), 0);
        assert_eq!(binomial(&mut rng, 10, 0.0), 0);
        assert_eq!(binomial(&mut rng, 10, 1.0), 10);
        let huge = 1u128 << 70;
        let x = binomial(&mut rng, huge, 0.25);
        let mean = huge as f64 * 0.25;
        // Standard deviation ≈ 1.9e10; 10σ is far below the mean.
        assert!((x as f64 - mean).abs() < 10.0 * (mean * 0.75).sqrt());
    }

    #[test]
    fn multinomial_conserves_and_matches_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probs = [0.2, 0.0, 0.5, 0.3];
        let mut out = [0u128; 4];
        let mut sums = [0f64; 4];
        for _ in 0..2000 {
            multinomial(&mut rng, 1000, &probs, &mut out);
            assert_eq!(out.iter().sum::<u128>(), 1000);
            assert_eq!(out[1], 0);
            for (s, &o) in sums.iter_mut().zip(&out) {
                *s += o as f64;
            }
        }
        for (s, p) in sums.iter().zip(probs) {
            let mean = s / 2000.0;
            // σ of the mean ≤ √(1000·0.25/2000) ≈ 0.35.
            assert!((mean - 1000.0 * p).abs() < 2.0, "{mean} vs {}", 1000.0 * p);
        }
    }

    #[test]
    fn trailing_zero_categories() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut out = [7u128; 3];
        multinomial(&mut rng, 5, &[0.4, 0.6, 0.0], &mut out);
        assert_eq!(out[0] + out[1], 5);
        assert_eq!(out[2], 0);
    }
}
