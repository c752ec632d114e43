use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Default ratio of noise standard deviation to mean energy.
pub const SIGMA_RATIO: f64 = 0.4;

/// Multiplicative Gaussian noise truncated at zero: a draw at mean `mu` is
/// `mu * (1 + sigma_ratio * z)`, redrawn while negative.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    sigma_ratio: f64,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(sigma_ratio: f64, seed: u64) -> Self {
        Self { sigma_ratio, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream `stream` of the generator seeded with `seed`.
    pub fn with_stream(sigma_ratio: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { sigma_ratio, rng }
    }

    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_ratio
    }

    pub fn draw(&mut self, mean: f64) -> f64 {
        if self.sigma_ratio == 0.0 || mean <= 0.0 {
            return mean.max(0.0);
        }
        loop {
            let z: f64 = self.rng.sample(StandardNormal);
            let v = mean * (1.0 + self.sigma_ratio * z);
            if v >= 0.0 {
                return v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn non_negative_and_scaled() {
        let n_draws = 20_000;
        let mut n = NoiseModel::new(SIGMA_RATIO, 3);
        let draws: Vec<f64> = (0..n_draws).map(|_| n.draw(5.0)).collect();
        assert!(draws.iter().all(|&d| d >= 0.0));
        let mean = draws.iter().sum::<f64>() / n_draws as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n_draws - 1) as f64;
        let sd = libm::sqrt(var);
        // moments of a standard normal truncated below at a = -1/sigma_ratio
        let a = -1.0 / SIGMA_RATIO;
        let pdf = libm::exp(-a * a / 2.0) / libm::sqrt(core::f64::consts::TAU);
        let tail = 0.5 * libm::erfc(a / core::f64::consts::SQRT_2);
        let lambda = pdf / tail;
        let z_mean = lambda;
        let z_sd = libm::sqrt(1.0 + a * lambda - lambda * lambda);
        let (want_mean, want_sd) = (5.0 * (1.0 + SIGMA_RATIO * z_mean), 5.0 * SIGMA_RATIO * z_sd);
        let se_mean = want_sd / libm::sqrt(n_draws as f64);
        let se_sd = want_sd / libm::sqrt(2.0 * n_draws as f64);
        assert!((mean - want_mean).abs() < 4.0 * se_mean, "mean={mean} want {want_mean}");
        assert!((sd - want_sd).abs() < 4.0 * se_sd, "sd={sd} want {want_sd}");
    }

    #[test]
    fn noiseless_passthrough() {
        let mut n = NoiseModel::new(0.0, 1);
        assert_eq!(n.draw(1.25), 1.25);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut n = NoiseModel::with_stream(0.4, 9, 2);
            (0..5).map(|_| n.draw(1.0)).collect()
        };
        let b: Vec<f64> = {
            let mut n = NoiseModel::with_stream(0.4, 9, 2);
            (0..5).map(|_| n.draw(1.0)).collect()
        };
        let c: Vec<f64> = {
            let mut n = NoiseModel::with_stream(0.4, 9, 3);
            (0..5).map(|_| n.draw(1.0)).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
