//! Seeded random source with pinned variate algorithms.
//!
//! The bit stream is ChaCha8 (value-stable across platforms and releases of
//! `rand_chacha`). Uniform, normal and gamma variates are derived here rather
//! than through a distribution crate so that fixtures regenerate identically:
//!
//! - uniform on (0, 1): top 53 bits of `next_u64`, offset by half an ulp;
//! - standard normal: Marsaglia polar method, caching the second deviate;
//! - gamma(shape, 1): Marsaglia–Tsang squeeze, with the `shape < 1` boost.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw strictly inside (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let a = 2.0 * self.uniform() - 1.0;
            let b = 2.0 * self.uniform() - 1.0;
            let s = a * a + b * b;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(b * m);
                return a * m;
            }
        }
    }

    /// Gamma variate with unit scale.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            return g * self.uniform().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let (x, v) = loop {
                let x = self.standard_normal();
                let v = 1.0 + c * x;
                if v > 0.0 {
                    break (x, v * v * v);
                }
            };
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    pub fn chi_square(&mut self, dof: f64) -> f64 {
        2.0 * self.gamma(0.5 * dof)
    }

    /// Draw from the (non-standardized) Student-t with `dof` degrees of freedom.
    pub fn student_t(&mut self, dof: f64) -> f64 {
        let z = self.standard_normal();
        let w = self.chi_square(dof);
        z / (w / dof).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
            assert_eq!(a.gamma(2.5).to_bits(), b.gamma(2.5).to_bits());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = SimRng::new(1);
        let mut b = SimRng::new(2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    // Pins the stream so fixtures regenerate identically after dependency bumps.
    #[test]
    fn test_vectors() {
        let mut rng = SimRng::new(42);
        let raw: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(raw, [0xae90bfb5395d5ba1, 0xf3453fc625799188, 0x6d71b708c5b6538c]);

        let mut rng = SimRng::new(42);
        assert_eq!(rng.uniform(), 0.6818961923066715);
        assert_eq!(rng.standard_normal(), 0.5987798730119623);
        assert_eq!(rng.gamma(2.5), 2.0278599293894537);
        assert_eq!(rng.student_t(5.0), -0.6632205837103562);
    }

    #[test]
    fn moments_are_sane() {
        let mut rng = SimRng::new(11);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = rng.standard_normal();
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);

        let shape = 3.0;
        let g: f64 = (0..n).map(|_| rng.gamma(shape)).sum::<f64>() / n as f64;
        assert!((g - shape).abs() < 0.03);
        let g_small: f64 = (0..n).map(|_| rng.gamma(0.4)).sum::<f64>() / n as f64;
        assert!((g_small - 0.4).abs() < 0.01);
    }
}
