use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Axis-aligned box over morphology parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        ensure_len("bounds", low.len(), high.len())?;
        if low.is_empty() {
            return Err(Error::Argument("bounds need at least one dimension".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Argument(format!("invalid bounds {low:?} .. {high:?}")));
        }
        Ok(Bounds { low, high })
    }

    pub fn uniform(dim: usize, low: f64, high: f64) -> Result<Self> {
        Self::new(vec![low; dim], vec![high; dim])
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::uniform(dim, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        ensure_len("morphology", self.dim(), x.len())?;
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Argument(format!("morphology {x:?} outside bounds")))
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Maps into the unit cube.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (l, h))| (v - l) / (h - l))
            .collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (l, h))| (l + v * (h - l)).clamp(*l, *h))
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.low.iter().zip(&self.high)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| rng.random_range(*l..=*h))
            .collect()
    }
}
