use serde::{Deserialize, Serialize};

use crate::envs::{max_value, Mdp};
use crate::error::{Error, Result};
use crate::network::{q_and_gradient, q_values, Topology};
use crate::trainer::{expected_target, online_target, TrainRecord, Transition, ThetaReplay};

/// Bounded function on the state set, given by its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn indicator(mdp: &Mdp, x: usize) -> Result<Self> {
        mdp.state(x)?;
        let mut values = vec![0.0; mdp.num_states()];
        values[x] = 1.0;
        Ok(Self {
            id: format!("indicator_{x}"),
            values,
        })
    }

    pub fn coordinate(mdp: &Mdp, j: usize) -> Result<Self> {
        if j >= mdp.state_dim() {
            return Err(Error::Input(format!("coordinate {j} beyond state dimension {}", mdp.state_dim())));
        }
        Ok(Self {
            id: format!("coordinate_{j}"),
            values: mdp.states().iter().map(|s| s[j]).collect(),
        })
    }

    pub fn constant(mdp: &Mdp, c: f64) -> Self {
        Self {
            id: format!("constant_{c}"),
            values: vec![c; mdp.num_states()],
        }
    }

    /// Indicators of every state plus the first two coordinate functions.
    pub fn bank(mdp: &Mdp) -> Vec<Self> {
        let mut bank: Vec<Self> = (0..mdp.num_states())
            .map(|x| Self::indicator(mdp, x).expect("state in range"))
            .collect();
        for j in 0..mdp.state_dim().min(2) {
            bank.push(Self::coordinate(mdp, j).expect("coordinate in range"));
        }
        bank
    }

    fn expectation(&self, mdp: &Mdp, x: usize, a: usize) -> Result<f64> {
        Ok(mdp.row(x, a)?.iter().map(|&(y, p)| p * self.values[y]).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    /// `M_n = Σ_{m<n} γ(m) ψ_m`.
    Noise,
    /// `ξ_n` for the named test function.
    TestFunction { id: String },
}

/// Finite-sample convergence summary of a trace over `N` steps.
///
/// `tail_fluctuation = sup_{m ≥ N/2} |S_m − S_{N/2}|` and `range` is
/// `sup_m ‖M_m‖₂` for the vector noise trace or `max ξ − min ξ` for a scalar
/// trace (both include the zero start). `ratio` is their quotient, with
/// `0/0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub range: f64,
    pub tail_fluctuation: f64,
    pub ratio: f64,
    /// Largest component of any enumerated conditional mean of an increment.
    pub max_conditional_mean: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Martingale trace. Scalar traces store signed increments and partial
/// sums; the vector noise trace stores their Euclidean norms plus the final
/// partial sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrace {
    pub kind: TraceKind,
    pub increments: Vec<f64>,
    /// `S_0 = 0, S_1, …, S_N`.
    pub partial_sums: Vec<f64>,
    pub final_vector: Option<Vec<f64>>,
    pub summary: TraceSummary,
}

impl MartingaleTrace {
    fn scalar(kind: TraceKind, increments: Vec<f64>, max_conditional_mean: f64) -> Self {
        let mut partial_sums = Vec::with_capacity(increments.len() + 1);
        let mut s = 0.0;
        partial_sums.push(s);
        for &d in &increments {
            s += d;
            partial_sums.push(s);
        }
        let n = increments.len();
        let half = partial_sums[n / 2];
        let tail = partial_sums[n / 2..].iter().map(|v| (v - half).abs()).fold(0.0, f64::max);
        let max = partial_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = partial_sums.iter().copied().fold(f64::INFINITY, f64::min);
        let range = max - min;
        Self {
            kind,
            increments,
            partial_sums,
            final_vector: None,
            summary: TraceSummary {
                steps: n,
                range,
                tail_fluctuation: tail,
                ratio: ratio(tail, range),
                max_conditional_mean,
            },
        }
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }
}

/// Streaming accumulator for the vector trace: O(d) memory.
struct VectorAccumulator {
    sum: Vec<f64>,
    half: Option<Vec<f64>>,
    half_at: usize,
    increment_norms: Vec<f64>,
    partial_norms: Vec<f64>,
    tail: f64,
    max_cm: f64,
}

impl VectorAccumulator {
    fn new(d: usize, steps: usize) -> Self {
        let mut acc = Self {
            sum: vec![0.0; d],
            half: None,
            half_at: steps / 2,
            increment_norms: Vec::with_capacity(steps),
            partial_norms: Vec::with_capacity(steps + 1),
            tail: 0.0,
            max_cm: 0.0,
        };
        acc.partial_norms.push(0.0);
        if acc.half_at == 0 {
            acc.half = Some(acc.sum.clone());
        }
        acc
    }

    fn push(&mut self, increment: &[f64]) {
        for (s, v) in self.sum.iter_mut().zip(increment) {
            *s += v;
        }
        self.increment_norms.push(norm(increment));
        self.partial_norms.push(norm(&self.sum));
        let m = self.increment_norms.len();
        if m == self.half_at {
            self.half = Some(self.sum.clone());
        } else if let Some(h) = &self.half {
            let dev = self.sum.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            self.tail = self.tail.max(dev);
        }
    }

    fn finish(self) -> MartingaleTrace {
        let range = self.partial_norms.iter().copied().fold(0.0, f64::max);
        MartingaleTrace {
            kind: TraceKind::Noise,
            summary: TraceSummary {
                steps: self.increment_norms.len(),
                range,
                tail_fluctuation: self.tail,
                ratio: ratio(self.tail, range),
                max_conditional_mean: self.max_cm,
            },
            increments: self.increment_norms,
            partial_sums: self.partial_norms,
            final_vector: Some(self.sum),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `ψ = α [max_a' Q(x', a'; θ) − Σ_y p(y|x,a) max_a' Q(y, a'; θ)] ∇_θ Q(x, a; θ)`.
pub fn psi_term(topology: &Topology, theta: &[f64], mdp: &Mdp, t: &Transition) -> Result<Vec<f64>> {
    let (psi, _) = psi_with_conditional_mean(topology, theta, mdp, t)?;
    Ok(psi)
}

/// `ψ` for the realized next state together with the kernel-weighted
/// average of `ψ` over every possible next state.
pub fn psi_with_conditional_mean(
    topology: &Topology,
    theta: &[f64],
    mdp: &Mdp,
    t: &Transition,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let alpha = mdp.discount();
    let row = mdp.row(t.x, t.a)?;
    let max_next: Vec<f64> = row
        .iter()
        .map(|&(y, _)| Ok(max_value(&q_values(topology, theta, mdp.state(y)?)?)))
        .collect::<Result<_>>()?;
    let expected: f64 = row.iter().zip(&max_next).map(|(&(_, p), m)| p * m).sum();
    let sampled = max_value(&q_values(topology, theta, mdp.state(t.next)?)?);
    let (_, grad) = q_and_gradient(topology, theta, mdp.state(t.x)?, t.a)?;
    let scale = alpha * (sampled - expected);
    let psi: Vec<f64> = grad.iter().map(|g| scale * g).collect();
    let mut mean = vec![0.0; grad.len()];
    for (&(_, p), m) in row.iter().zip(&max_next) {
        let s = alpha * (m - expected);
        for (acc, g) in mean.iter_mut().zip(&grad) {
            *acc += p * (s * g);
        }
    }
    Ok((psi, mean))
}

/// Consistency check used by tests: the sampled minus the expected update
/// direction equals `ψ`.
pub fn psi_from_targets(topology: &Topology, theta: &[f64], mdp: &Mdp, t: &Transition) -> Result<Vec<f64>> {
    let diff = online_target(topology, theta, mdp, t)? - expected_target(topology, theta, mdp, t.x, t.a)?;
    let (_, grad) = q_and_gradient(topology, theta, mdp.state(t.x)?, t.a)?;
    Ok(grad.iter().map(|g| diff * g).collect())
}

/// Noise trace `M_n` of a finished run, regenerating `θ_m` step by step.
///
/// Online and expected-target runs use `ψ_m` of the realized transition
/// (for expected-target runs this is the noise the sampled target would
/// have carried). Replay steps use the mini-batch average of the
/// per-transition `ψ`; warm-up steps without an update contribute zero.
pub fn martingale_trace(regen: &ThetaReplay<'_>) -> Result<MartingaleTrace> {
    let record = regen.record();
    let (topology, mdp) = (regen.topology(), regen.mdp());
    let n_steps = record.len();
    let mut acc = VectorAccumulator::new(topology.num_weights(), n_steps);
    if n_steps == 0 {
        return Ok(acc.finish());
    }
    let replay = record.mode.replay_batch.is_some();
    regen.for_each(0, n_steps as u64 - 1, |n, theta| {
        let row = record.row(n)?;
        let transitions: Vec<Transition> = if replay {
            record.batch_transitions(n)?.unwrap_or_default()
        } else {
            vec![row.transition()]
        };
        let mut inc = vec![0.0; topology.num_weights()];
        if !transitions.is_empty() {
            let w = 1.0 / transitions.len() as f64;
            for t in &transitions {
                let (psi, mean) = psi_with_conditional_mean(topology, theta, mdp, t)?;
                for (i, (p, m)) in psi.iter().zip(&mean).enumerate() {
                    inc[i] += w * p;
                    acc.max_cm = acc.max_cm.max(m.abs());
                }
            }
            for v in &mut inc {
                *v *= row.gamma;
            }
        }
        acc.push(&inc);
        Ok(())
    })?;
    Ok(acc.finish())
}

/// `ξ_n = Σ_{m<n} γ(m) [f(x_{m+1}) − Σ_y p(y|x_m, a_m) f(y)]`. Replay
/// steps average the bracket over the mini-batch transitions.
pub fn test_function_trace(record: &TrainRecord, mdp: &Mdp, f: &TestFunction) -> Result<MartingaleTrace> {
    if f.values.len() != mdp.num_states() {
        return Err(Error::Input(format!(
            "test function `{}` has {} values for {} states",
            f.id,
            f.values.len(),
            mdp.num_states()
        )));
    }
    if let Some(i) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("test function `{}` is not finite at state {i}", f.id)));
    }
    let mut increments = Vec::with_capacity(record.len());
    let mut max_cm: f64 = 0.0;
    for row in &record.rows {
        let transitions = match record.batch_transitions(row.n)? {
            Some(batch) => batch,
            None => vec![row.transition()],
        };
        let w = 1.0 / transitions.len() as f64;
        let mut bracket = 0.0;
        for t in &transitions {
            let e = f.expectation(mdp, t.x, t.a)?;
            bracket += w * (f.values[t.next] - e);
            let cm: f64 = mdp.row(t.x, t.a)?.iter().map(|&(y, p)| p * (f.values[y] - e)).sum();
            max_cm = max_cm.max(cm.abs());
        }
        increments.push(row.gamma * bracket);
    }
    Ok(MartingaleTrace::scalar(
        TraceKind::TestFunction { id: f.id.clone() },
        increments,
        max_cm,
    ))
}
