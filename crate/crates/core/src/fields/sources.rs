use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distribution of one latent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum SourceDist {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// `1` with probability `p`, else `0`.
    Bernoulli {
        p: f64,
    },
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl SourceDist {
    /// Three-point law on `{-1, 0, 1}` with `P(0) = p0` and symmetric mass elsewhere.
    pub fn three_point(p0: f64) -> Self {
        let q = (1.0 - p0) / 2.0;
        SourceDist::Discrete { values: vec![-1.0, 0.0, 1.0], probs: vec![q, p0, q] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("source distribution: {m}")));
        match self {
            SourceDist::Rademacher => Ok(()),
            SourceDist::Bernoulli { p } if !(0.0..=1.0).contains(p) => bad("p outside [0, 1]"),
            SourceDist::Bernoulli { .. } => Ok(()),
            SourceDist::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("values and probs must be nonempty and of equal length");
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("negative probability");
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad("probabilities must sum to 1");
                }
                Ok(())
            }
            SourceDist::Normal { sd, .. } if !(*sd >= 0.0) => bad("sd must be nonnegative"),
            SourceDist::Normal { .. } => Ok(()),
            SourceDist::Uniform { lo, hi } if !(lo < hi) => bad("need lo < hi"),
            SourceDist::Uniform { .. } => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SourceDist::Rademacher | SourceDist::Bernoulli { .. } | SourceDist::Discrete { .. })
    }

    /// Support points with positive probability, `None` if continuous.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let atoms = match self {
            SourceDist::Rademacher => vec![(-1.0, 0.5), (1.0, 0.5)],
            SourceDist::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
            SourceDist::Discrete { values, probs } => values.iter().copied().zip(probs.iter().copied()).collect(),
            _ => return None,
        };
        Some(atoms.into_iter().filter(|(_, p)| *p > 0.0).collect())
    }

    pub fn mean(&self) -> f64 {
        match self {
            SourceDist::Normal { mean, .. } => *mean,
            SourceDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            d => d.atoms().unwrap().iter().map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            SourceDist::Normal { sd, .. } => sd * sd,
            SourceDist::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            d => {
                let m = d.mean();
                d.atoms().unwrap().iter().map(|(v, p)| p * (v - m).powi(2)).sum()
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SourceDist::Rademacher => {
                if rng.next_u32() >> 31 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            SourceDist::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < *p)),
            SourceDist::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.iter().zip(probs).rev().find(|(_, p)| **p > 0.0).unwrap().0
            }
            SourceDist::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            SourceDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}
