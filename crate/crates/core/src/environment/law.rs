use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SepError};

/// Distribution of an individual conductance. All supports lie in (0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConductanceLaw {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Exponential with the given rate (mean `1/rate`).
    Exponential { rate: f64 },
    /// `exp(N(mu, sigma²))`.
    LogNormal { mu: f64, sigma: f64 },
    TwoPoint { low: f64, high: f64, p_low: f64 },
    /// Finite table of values with nonnegative weights.
    Table { values: Vec<f64>, weights: Vec<f64> },
    /// Deterministic, cycling through `values` by edge generation index.
    Periodic { values: Vec<f64> },
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ConductanceLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ConductanceLaw::Constant { value } => positive(*value),
            ConductanceLaw::Uniform { low, high } => positive(*low) && high.is_finite() && high >= low,
            ConductanceLaw::Exponential { rate } => positive(*rate),
            ConductanceLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma >= 0.0,
            ConductanceLaw::TwoPoint { low, high, p_low } => {
                positive(*low) && positive(*high) && (0.0..=1.0).contains(p_low)
            }
            ConductanceLaw::Table { values, weights } => {
                !values.is_empty()
                    && values.len() == weights.len()
                    && values.iter().all(|v| positive(*v))
                    && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
                    && weights.iter().sum::<f64>() > 0.0
            }
            ConductanceLaw::Periodic { values } => !values.is_empty() && values.iter().all(|v| positive(*v)),
        };
        if ok {
            Ok(())
        } else {
            Err(SepError::invalid(format!(
                "conductance law {self:?} must have support in (0, inf)"
            )))
        }
    }

    /// Draws the conductance of the `index`-th generated edge.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, index: usize) -> f64 {
        match self {
            ConductanceLaw::Constant { value } => *value,
            ConductanceLaw::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            ConductanceLaw::Exponential { rate } => {
                let e = Exp::new(*rate).expect("validated");
                loop {
                    let v: f64 = e.sample(rng);
                    if v > 0.0 {
                        break v;
                    }
                }
            }
            ConductanceLaw::LogNormal { mu, sigma } => {
                LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
            }
            ConductanceLaw::TwoPoint { low, high, p_low } => {
                if rng.random::<f64>() < *p_low {
                    *low
                } else {
                    *high
                }
            }
            ConductanceLaw::Table { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (v, w) in values.iter().zip(weights) {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                *values.last().expect("nonempty")
            }
            ConductanceLaw::Periodic { values } => values[index % values.len()],
        }
    }

    /// Whether every draw equals the same value.
    pub fn is_constant(&self) -> bool {
        match self {
            ConductanceLaw::Constant { .. } => true,
            ConductanceLaw::Uniform { low, high } => low == high,
            ConductanceLaw::Periodic { values } => values.iter().all(|v| *v == values[0]),
            _ => false,
        }
    }
}

/// Distribution of the energy marks of the Mott model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkLaw {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
}

impl MarkLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            MarkLaw::Constant { value } => value.is_finite(),
            MarkLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && high >= low,
            MarkLaw::Normal { mean, std } => mean.is_finite() && std.is_finite() && *std >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SepError::invalid(format!("invalid energy law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarkLaw::Constant { value } => *value,
            MarkLaw::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            MarkLaw::Normal { mean, std } => Normal::new(*mean, *std).expect("validated").sample(rng),
        }
    }
}
