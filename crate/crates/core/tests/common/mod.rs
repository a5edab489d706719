//! Shared helpers for the integration tests: random networks and the
//! independent oracles they are checked against.
#![allow(dead_code)]

use dqlab::network::{ActivationKind, LayerSpec, Topology};
use rand::Rng;

pub const ALL_KINDS: [ActivationKind; 4] = [
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
    ActivationKind::Gelu,
    ActivationKind::Silu,
];

pub fn random_topology<R: Rng>(rng: &mut R, output: Option<ActivationKind>) -> Topology {
    let input_dim = rng.gen_range(1..=4);
    let depth = rng.gen_range(0..=3);
    let hidden = (0..depth)
        .map(|_| LayerSpec {
            width: rng.gen_range(1..=5),
            activation: ALL_KINDS[rng.gen_range(0..4)],
        })
        .collect();
    let num_actions = rng.gen_range(1..=3);
    let widths = (0..num_actions).map(|_| rng.gen_range(1..=4)).collect();
    let out = output.unwrap_or_else(|| ALL_KINDS[rng.gen_range(0..4)]);
    Topology::new(input_dim, hidden, widths, out).unwrap()
}

pub fn random_vec<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Q(x, a; θ) evaluated straight from the documented weight layout:
/// hidden layers in order, each a row-major `width × fan_in` block; then per
/// action its `l(a) × fan_in` sublayer block followed by `l(a)` output weights.
pub fn direct_q(topology: &Topology, theta: &[f64], x: &[f64], a: usize) -> f64 {
    let mut pos = 0;
    let mut act: Vec<f64> = x.to_vec();
    for layer in topology.hidden() {
        let fan_in = act.len();
        let mut next = Vec::with_capacity(layer.width);
        for dst in 0..layer.width {
            let mut z = 0.0;
            for (src, v) in act.iter().enumerate() {
                z += theta[pos + dst * fan_in + src] * v;
            }
            next.push(layer.activation.value(z));
        }
        pos += layer.width * fan_in;
        act = next;
    }
    let fan_in = act.len();
    for (b, &l) in topology.output_widths().iter().enumerate() {
        if b == a {
            let mut q = 0.0;
            for i in 0..l {
                let mut z = 0.0;
                for (src, v) in act.iter().enumerate() {
                    z += theta[pos + i * fan_in + src] * v;
                }
                q += topology.output_activation().value(z) * theta[pos + l * fan_in + i];
            }
            return q;
        }
        pos += l * fan_in + l;
    }
    panic!("action {a} out of range");
}

/// Central finite-difference gradient of `direct_q`.
pub fn fd_gradient(topology: &Topology, theta: &[f64], x: &[f64], a: usize, h: f64) -> Vec<f64> {
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + h;
            let up = direct_q(topology, &probe, x, a);
            probe[i] = theta[i] - h;
            let down = direct_q(topology, &probe, x, a);
            probe[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|g − g_fd| / max(1, |g|, |g_fd|)`, maximized over components.
pub fn max_relative_error(g: &[f64], fd: &[f64]) -> f64 {
    g.iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs() / 1f64.max(a.abs()).max(b.abs()))
        .fold(0.0, f64::max)
}
