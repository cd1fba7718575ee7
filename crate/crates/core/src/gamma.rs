//! Gamma(shape, 1) variates.
//!
//! Marsaglia–Tsang squeeze/rejection for shape ≥ 1. Shapes below one are
//! boosted: if `G ~ Gamma(a + 1)` and `U ~ U(0, 1)` then `G·U^{1/a} ~ Gamma(a)`.
//! The boosted draw is carried in log space because `U^{1/a}` underflows
//! for tiny `a`.

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{GofError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSampler {
    shape: f64,
    // Marsaglia–Tsang constants for max(shape, shape + 1).
    d: f64,
    c: f64,
    boosted: bool,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(GofError::InvalidParameter(format!(
                "gamma shape must be positive and finite, got {shape}"
            )));
        }
        let boosted = shape < 1.0;
        let a = if boosted { shape + 1.0 } else { shape };
        let d = a - 1.0 / 3.0;
        Ok(Self {
            shape,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            boosted,
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    fn marsaglia_tsang<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            let t = 1.0 + self.c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u: f64 = Open01.sample(rng);
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return self.d * v;
            }
            if u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }

    /// Natural log of a Gamma(shape, 1) draw.
    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.marsaglia_tsang(rng).ln();
        if self.boosted {
            let u: f64 = Open01.sample(rng);
            g + u.ln() / self.shape
        } else {
            g
        }
    }
}

impl Distribution<f64> for GammaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.boosted {
            self.sample_ln(rng).exp()
        } else {
            self.marsaglia_tsang(rng)
        }
    }
}
