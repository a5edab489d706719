use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes `γ(n) = c · (n + n₀)^(−p)`.
///
/// With `c > 0`, `n₀ ≥ 1` and `p ∈ (0.5, 1]` the sequence is positive,
/// strictly decreasing, not summable and square summable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub c: f64,
    pub n0: f64,
    pub p: f64,
}

impl StepSchedule {
    pub fn new(c: f64, n0: f64, p: f64) -> Result<Self> {
        let s = Self { c, n0, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::validation("schedule.c", format!("must be positive and finite, got {}", self.c)));
        }
        if !(self.n0 >= 1.0 && self.n0.is_finite()) {
            return Err(Error::validation("schedule.n0", format!("must be at least 1, got {}", self.n0)));
        }
        if !(self.p > 0.5 && self.p <= 1.0) {
            return Err(Error::validation(
                "schedule.p",
                format!(
                    "must lie in (0.5, 1] so that steps are not summable but square summable, got {}",
                    self.p
                ),
            ));
        }
        Ok(())
    }

    pub fn gamma(&self, n: u64) -> f64 {
        self.c * (n as f64 + self.n0).powf(-self.p)
    }

    /// `Σ_{m<n} γ(m)`, summed in index order.
    pub fn partial_sum(&self, n: u64) -> f64 {
        (0..n).map(|m| self.gamma(m)).sum()
    }
}
