//! One-sided stable draws by Kanter's representation.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Draws of `S_1` with `E e^{-λ S_1} = e^{-λ^α}`, exponents precomputed.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    alpha: f64,
    inv_alpha: f64,
    ratio: f64,
}

impl StableSampler {
    pub fn new(alpha: f64) -> Self {
        StableSampler {
            alpha,
            inv_alpha: 1.0 / alpha,
            ratio: (1.0 - alpha) / alpha,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `t^{1/α}`, the scale of `S_t` relative to `S_1`.
    pub fn scale(&self, t: f64) -> f64 {
        pow(t, self.inv_alpha)
    }

    pub fn unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = std::f64::consts::PI * rng.random::<f64>();
        let w: f64 = Exp1.sample(rng);
        let a = (self.alpha * u).sin() / pow(u.sin(), self.inv_alpha);
        let b = ((1.0 - self.alpha) * u).sin() / w;
        a * pow(b, self.ratio)
    }
}

/// A draw of `S_1` with `E e^{-λ S_1} = e^{-λ^α}`.
pub fn sample_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    StableSampler::new(alpha).unit(rng)
}

/// A draw of `S_t = t^{1/α} S_1`.
pub fn sample_stable_subordinator_value<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    let s = StableSampler::new(alpha);
    s.scale(t) * s.unit(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_are_positive_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &alpha in &[0.1, 0.5, 0.9] {
            for _ in 0..10_000 {
                let s = sample_unit(alpha, &mut rng);
                assert!(s.is_finite() && s >= 0.0, "{alpha}: {s}");
            }
        }
    }

    #[test]
    fn laplace_transform_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let m: f64 = (0..n)
            .map(|_| (-sample_stable_subordinator_value(0.7, 1.0, &mut rng)).exp())
            .sum::<f64>()
            / n as f64;
        assert!((m - (-1.0f64).exp()).abs() < 4e-3, "{m}");
    }
}
