use serde::{Deserialize, Serialize};

use super::{ActivationKind, Topology};
use crate::error::{Error, Result};

/// Pre-activation inputs and outputs of one layer's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub hidden: Vec<LayerTrace>,
    /// One entry per action: that action's output sublayer.
    pub sublayers: Vec<LayerTrace>,
    pub q: Vec<f64>,
}

/// `pre[dst] = Σ_src w[offset + dst·fan_in + src] · input[src]`, then the activation.
fn dense(theta: &[f64], offset: usize, input: &[f64], width: usize, act: ActivationKind) -> LayerTrace {
    let fan_in = input.len();
    let mut pre = Vec::with_capacity(width);
    let mut post = Vec::with_capacity(width);
    for dst in 0..width {
        let row = &theta[offset + dst * fan_in..offset + (dst + 1) * fan_in];
        let u: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
        pre.push(u);
        post.push(act.value(u));
    }
    LayerTrace { pre, post }
}

fn check_finite(layer: &LayerTrace, what: impl Fn(usize) -> String) -> Result<()> {
    for (i, (u, v)) in layer.pre.iter().zip(&layer.post).enumerate() {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at {} (input {u}, output {v})", what(i))));
        }
    }
    Ok(())
}

/// Forward pass of the bias-free DQN at state vector `x`.
pub fn forward(topology: &Topology, theta: &[f64], x: &[f64]) -> Result<ForwardTrace> {
    topology.check_theta(theta)?;
    if x.len() != topology.input_dim() {
        return Err(Error::Input(format!(
            "state has dimension {}, network expects {}",
            x.len(),
            topology.input_dim()
        )));
    }
    let mut hidden = Vec::with_capacity(topology.hidden().len());
    for (j, spec) in topology.hidden().iter().enumerate() {
        let input = hidden.last().map_or(x, |l: &LayerTrace| l.post.as_slice());
        let layer = dense(theta, topology.hidden_offset(j), input, spec.width, spec.activation);
        check_finite(&layer, |i| format!("hidden layer {j} unit {i}"))?;
        hidden.push(layer);
    }
    let last = hidden.last().map_or(x, |l| l.post.as_slice());
    let mut sublayers = Vec::with_capacity(topology.num_actions());
    let mut q = Vec::with_capacity(topology.num_actions());
    for (a, &l) in topology.output_widths().iter().enumerate() {
        let layer = dense(
            theta,
            topology.action_block(a).start,
            last,
            l,
            topology.output_activation(),
        );
        check_finite(&layer, |i| format!("output sublayer {a} unit {i}"))?;
        let value: f64 = layer
            .post
            .iter()
            .zip(&theta[topology.output_weights(a)])
            .map(|(act, w)| act * w)
            .sum();
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite Q for action {a}")));
        }
        q.push(value);
        sublayers.push(layer);
    }
    Ok(ForwardTrace {
        input: x.to_vec(),
        hidden,
        sublayers,
        q,
    })
}

/// `Q(x, ·; θ)` for every action.
pub fn q_values(topology: &Topology, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(topology, theta, x)?.q)
}

/// Reverse-mode `∇_θ Q(x, a; θ)` written into `grad`, which is overwritten.
/// Weights of sublayers other than `a` get exact zeros.
pub fn backward(topology: &Topology, theta: &[f64], trace: &ForwardTrace, a: usize, grad: &mut [f64]) {
    debug_assert_eq!(grad.len(), topology.num_weights());
    grad.fill(0.0);
    let last = trace.hidden.last().map_or(trace.input.as_slice(), |l| l.post.as_slice());
    let sub = &trace.sublayers[a];
    let out = topology.output_weights(a);
    let act = topology.output_activation();
    let fan_in = last.len();

    // d Q / d (last-layer outputs)
    let mut upstream = vec![0.0; fan_in];
    for i in 0..sub.post.len() {
        grad[out.start + i] = sub.post[i];
        let delta = theta[out.start + i] * act.derivative(sub.pre[i]);
        let row = topology.sublayer_index(a, 0, i);
        for src in 0..fan_in {
            grad[row + src] = delta * last[src];
            upstream[src] += delta * theta[row + src];
        }
    }

    for j in (0..trace.hidden.len()).rev() {
        let layer = &trace.hidden[j];
        let act = topology.hidden()[j].activation;
        let input = if j == 0 { trace.input.as_slice() } else { trace.hidden[j - 1].post.as_slice() };
        let mut next = vec![0.0; input.len()];
        for dst in 0..layer.pre.len() {
            let delta = upstream[dst] * act.derivative(layer.pre[dst]);
            let row = topology.hidden_index(j, 0, dst);
            for src in 0..input.len() {
                grad[row + src] = delta * input[src];
                next[src] += delta * theta[row + src];
            }
        }
        upstream = next;
    }
}

/// `∇_θ Q(x, a; θ)` as a fresh vector.
pub fn q_gradient(topology: &Topology, theta: &[f64], x: &[f64], a: usize) -> Result<Vec<f64>> {
    check_action(topology, a)?;
    let trace = forward(topology, theta, x)?;
    let mut grad = vec![0.0; topology.num_weights()];
    backward(topology, theta, &trace, a, &mut grad);
    Ok(grad)
}

/// `Q(x, a; θ)` together with its gradient, from a single forward pass.
pub fn q_and_gradient(topology: &Topology, theta: &[f64], x: &[f64], a: usize) -> Result<(f64, Vec<f64>)> {
    check_action(topology, a)?;
    let trace = forward(topology, theta, x)?;
    let mut grad = vec![0.0; topology.num_weights()];
    backward(topology, theta, &trace, a, &mut grad);
    Ok((trace.q[a], grad))
}

pub(crate) fn check_action(topology: &Topology, a: usize) -> Result<()> {
    if a >= topology.num_actions() {
        return Err(Error::Input(format!(
            "action {a} out of range (network has {} actions)",
            topology.num_actions()
        )));
    }
    Ok(())
}
