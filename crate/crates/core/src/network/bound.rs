use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{l2_norm, q_gradient, q_values, Topology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub state: Vec<f64>,
    pub action: usize,
    pub q: f64,
    pub bound: f64,
    pub theta: Vec<f64>,
}

/// Outcome of [`q_bound_check`].
///
/// For squashing output units the enforced bound is `c · l(a) · ‖θ_a‖₂`.
/// `max_tight_ratio` reports `|Q| / (c · √l(a) · ‖θ_a‖₂)`, which can never
/// exceed 1 since `‖θ_a‖₁ ≤ √l(a) ‖θ_a‖₂`. For non-squashing output units
/// nothing is enforced and `empirical_constant = max |Q| / ‖θ‖₂` over the
/// supplied states is the only result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub squashing: bool,
    pub c: Option<f64>,
    pub probes: usize,
    pub violations: Vec<BoundViolation>,
    pub max_loose_ratio: f64,
    pub max_tight_ratio: f64,
    pub empirical_constant: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Turns the first violation into a property error carrying its witness.
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::Property(format!(
                "|Q(x, {}; θ)| = {} exceeds c·l(a)·‖θ_a‖₂ = {} at x = {:?}, ‖θ‖₂ = {}",
                v.action,
                v.q.abs(),
                v.bound,
                v.state,
                l2_norm(&v.theta)
            ))),
        }
    }

    /// Folds another report on the same topology into this one.
    pub fn merge(&mut self, other: BoundReport) {
        self.probes += other.probes;
        self.violations.extend(other.violations);
        self.max_loose_ratio = self.max_loose_ratio.max(other.max_loose_ratio);
        self.max_tight_ratio = self.max_tight_ratio.max(other.max_tight_ratio);
        self.empirical_constant = self.empirical_constant.max(other.empirical_constant);
    }
}

fn ratio(q: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        q.abs() / bound
    } else if q == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Checks the output-magnitude bound on every `(state, action)`.
///
/// The bound only involves the output sublayers, so "squashing" here means
/// the output activation is squashing; hidden activations are irrelevant.
pub fn q_bound_check(topology: &Topology, theta: &[f64], states: &[Vec<f64>]) -> Result<BoundReport> {
    topology.check_theta(theta)?;
    let c = topology.output_activation().bound();
    let theta_norm = l2_norm(theta);
    let action_norms: Vec<f64> = (0..topology.num_actions())
        .map(|a| l2_norm(&theta[topology.output_weights(a)]))
        .collect();
    let mut report = BoundReport {
        squashing: c.is_some(),
        c,
        probes: 0,
        violations: Vec::new(),
        max_loose_ratio: 0.0,
        max_tight_ratio: 0.0,
        empirical_constant: 0.0,
    };
    for x in states {
        let q = q_values(topology, theta, x)?;
        for (a, &qa) in q.iter().enumerate() {
            report.probes += 1;
            report.empirical_constant = report.empirical_constant.max(ratio(qa, theta_norm));
            let Some(c) = c else { continue };
            let l = topology.output_widths()[a] as f64;
            let bound = c * l * action_norms[a];
            report.max_loose_ratio = report.max_loose_ratio.max(ratio(qa, bound));
            report.max_tight_ratio = report.max_tight_ratio.max(ratio(qa, c * l.sqrt() * action_norms[a]));
            if qa.abs() > bound {
                report.violations.push(BoundViolation {
                    state: x.clone(),
                    action: a,
                    q: qa,
                    bound,
                    theta: theta.to_vec(),
                });
            }
        }
    }
    Ok(report)
}

/// Point drawn uniformly in direction and radius from the ball of radius
/// `radius` around `center`.
pub fn ball_point<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = l2_norm(&dir);
        if n > 1e-12 {
            let r = radius * rng.gen::<f64>();
            return center.iter().zip(&dir).map(|(c, d)| c + r * d / n).collect();
        }
    }
}

/// Local Lipschitz estimate of `θ ↦ Q(x, a; θ)` on the ball of radius
/// `radius` around `theta`: the largest gradient norm over `probes` random
/// points of the ball (and its center).
pub fn local_lipschitz<R: Rng + ?Sized>(
    topology: &Topology,
    theta: &[f64],
    x: &[f64],
    a: usize,
    radius: f64,
    probes: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut best = l2_norm(&q_gradient(topology, theta, x, a)?);
    for _ in 0..probes {
        let p = ball_point(theta, radius, rng);
        best = best.max(l2_norm(&q_gradient(topology, &p, x, a)?));
    }
    Ok(best)
}
