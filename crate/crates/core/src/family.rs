//! Outcome families: loss, negative gradient, offset and inverse link.
//!
//! Binomial outcomes are coded `y ∈ {−1, +1}` and `f` lives on the half
//! log-odds scale, `P(y = 1) = 1 / (1 + exp(−2f))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    /// Logit link, outcomes coded `−1 / +1`.
    Binomial,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Some(Family::Gaussian),
            "binomial" | "logit" => Some(Family::Binomial),
            _ => None,
        }
    }

    /// Loss of a single observation.
    #[inline]
    pub fn pointwise_loss(self, y: f64, f: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * (y - f) * (y - f),
            Family::Binomial => softplus(-2.0 * y * f),
        }
    }

    /// `−∂ loss / ∂f` for a single observation.
    #[inline]
    pub fn pointwise_negative_gradient(self, y: f64, f: f64) -> f64 {
        match self {
            Family::Gaussian => y - f,
            Family::Binomial => 2.0 * y * logistic(-2.0 * y * f),
        }
    }

    /// Summed loss: `½‖y − f‖²` or `Σ log(1 + exp(−2 y f))`.
    pub fn loss(self, y: &[f64], f: &[f64]) -> Result<f64> {
        check_len(y, f)?;
        Ok(y.iter()
            .zip(f)
            .map(|(&yi, &fi)| self.pointwise_loss(yi, fi))
            .sum())
    }

    pub fn negative_gradient(self, y: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        check_len(y, f)?;
        Ok(y.iter()
            .zip(f)
            .map(|(&yi, &fi)| self.pointwise_negative_gradient(yi, fi))
            .collect())
    }

    pub(crate) fn negative_gradient_into(self, y: &[f64], f: &[f64], out: &mut [f64]) {
        for ((o, &yi), &fi) in out.iter_mut().zip(y).zip(f) {
            *o = self.pointwise_negative_gradient(yi, fi);
        }
    }

    /// Constant minimizing the loss: the mean for Gaussian outcomes,
    /// `½ log(p̂ / (1 − p̂))` for binomial ones.
    pub fn offset(self, y: &[f64]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let n = y.len() as f64;
        match self {
            Family::Gaussian => y.iter().sum::<f64>() / n,
            Family::Binomial => {
                let positives = y.iter().filter(|&&v| v > 0.0).count() as f64;
                let p = (positives / n).clamp(1e-10, 1.0 - 1e-10);
                0.5 * libm::log(p / (1.0 - p))
            }
        }
    }

    /// Maps a linear predictor to the response scale.
    pub fn response(self, f: f64) -> f64 {
        match self {
            Family::Gaussian => f,
            Family::Binomial => logistic(2.0 * f),
        }
    }
}

fn check_len(y: &[f64], f: &[f64]) -> Result<()> {
    if y.len() == f.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: y.len(),
            found: f.len(),
        })
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
