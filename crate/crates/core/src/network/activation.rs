use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Activation catalogue. Sigmoid and tanh are squashing with bound `c = 1`;
/// GELU (exact Gaussian-CDF form) and SiLU are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Gelu,
    Silu,
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Standard normal CDF via `erfc`, accurate in both tails.
fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * std::f64::consts::FRAC_1_SQRT_2)
}

fn normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [Self::Sigmoid, Self::Tanh, Self::Gelu, Self::Silu];

    pub fn value(self, u: f64) -> f64 {
        match self {
            Self::Sigmoid => sigmoid(u),
            Self::Tanh => u.tanh(),
            Self::Gelu => u * normal_cdf(u),
            Self::Silu => u * sigmoid(u),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Self::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Self::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Self::Gelu => normal_cdf(u) + u * normal_pdf(u),
            Self::Silu => {
                let s = sigmoid(u);
                s + u * s * (1.0 - s)
            }
        }
    }

    pub fn is_squashing(self) -> bool {
        matches!(self, Self::Sigmoid | Self::Tanh)
    }

    /// `c` with `|σ(u)| ≤ c` for all `u`, for squashing kinds.
    pub fn bound(self) -> Option<f64> {
        self.is_squashing().then_some(1.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Gelu => "gelu",
            Self::Silu => "silu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown activation `{s}` (expected sigmoid, tanh, gelu or silu)")))
    }
}
