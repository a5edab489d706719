use std::ops::{Deref, Range};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ActivationKind;
use crate::error::{Error, Result};

/// One fully connected hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRaw {
    input_dim: usize,
    hidden: Vec<LayerSpec>,
    output_widths: Vec<usize>,
    output_activation: ActivationKind,
}

/// Bias-free DQN layout: `input_dim` inputs, a stack of hidden layers, then
/// one output sublayer of width `l(a)` per action whose activations are
/// combined linearly into `Q(x, a)`.
///
/// # Weight index map
///
/// The flat vector `θ` is laid out as
///
/// 1. hidden layer `j = 0, 1, …`: a `width_j × fan_in_j` matrix, row-major by
///    destination unit, so edge `src → dst` sits at
///    `hidden_offset(j) + dst · fan_in_j + src`;
/// 2. then, for each action `a = 0, 1, …`, a contiguous block holding
///    the sublayer matrix (`l(a) × last_width`, same row-major rule) followed by
///    the `l(a)` output weights `θ_a(1..=l(a))`.
///
/// `fan_in_0 = input_dim` and `last_width` is the width of the last hidden
/// layer (or `input_dim` without hidden layers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRaw", into = "TopologyRaw")]
pub struct Topology {
    raw: TopologyRaw,
    hidden_offsets: Vec<usize>,
    action_offsets: Vec<usize>,
    len: usize,
}

impl From<Topology> for TopologyRaw {
    fn from(t: Topology) -> Self {
        t.raw
    }
}

impl TryFrom<TopologyRaw> for Topology {
    type Error = Error;

    fn try_from(raw: TopologyRaw) -> Result<Self> {
        Topology::new(raw.input_dim, raw.hidden, raw.output_widths, raw.output_activation)
    }
}

impl Topology {
    pub fn new(
        input_dim: usize,
        hidden: Vec<LayerSpec>,
        output_widths: Vec<usize>,
        output_activation: ActivationKind,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::validation("network.input_dim", "must be at least 1"));
        }
        if let Some(j) = hidden.iter().position(|l| l.width == 0) {
            return Err(Error::validation(format!("network.hidden[{j}]"), "width must be at least 1"));
        }
        if output_widths.is_empty() {
            return Err(Error::validation("network.output_widths", "need one sublayer per action"));
        }
        if let Some(a) = output_widths.iter().position(|&w| w == 0) {
            return Err(Error::validation(format!("network.output_widths[{a}]"), "width must be at least 1"));
        }
        let mut offset = 0;
        let mut fan_in = input_dim;
        let mut hidden_offsets = Vec::with_capacity(hidden.len());
        for layer in &hidden {
            hidden_offsets.push(offset);
            offset += layer.width * fan_in;
            fan_in = layer.width;
        }
        let mut action_offsets = Vec::with_capacity(output_widths.len());
        for &l in &output_widths {
            action_offsets.push(offset);
            offset += l * fan_in + l;
        }
        Ok(Self {
            raw: TopologyRaw {
                input_dim,
                hidden,
                output_widths,
                output_activation,
            },
            hidden_offsets,
            action_offsets,
            len: offset,
        })
    }

    /// Same activation on every hidden layer and equal sublayer widths.
    pub fn uniform(
        input_dim: usize,
        hidden_widths: &[usize],
        activation: ActivationKind,
        num_actions: usize,
        output_width: usize,
        output_activation: ActivationKind,
    ) -> Result<Self> {
        let hidden = hidden_widths
            .iter()
            .map(|&width| LayerSpec { width, activation })
            .collect();
        Self::new(input_dim, hidden, vec![output_width; num_actions], output_activation)
    }

    pub fn input_dim(&self) -> usize {
        self.raw.input_dim
    }

    pub fn hidden(&self) -> &[LayerSpec] {
        &self.raw.hidden
    }

    pub fn num_actions(&self) -> usize {
        self.raw.output_widths.len()
    }

    /// `l(a)` for every action.
    pub fn output_widths(&self) -> &[usize] {
        &self.raw.output_widths
    }

    pub fn output_activation(&self) -> ActivationKind {
        self.raw.output_activation
    }

    /// Every layer, hidden and output, uses a squashing activation.
    pub fn is_squashing(&self) -> bool {
        self.raw.output_activation.is_squashing() && self.raw.hidden.iter().all(|l| l.activation.is_squashing())
    }

    /// `d`, the number of weights.
    pub fn num_weights(&self) -> usize {
        self.len
    }

    pub fn hidden_fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.raw.input_dim
        } else {
            self.raw.hidden[layer - 1].width
        }
    }

    /// Width of the layer feeding the output sublayers.
    pub fn last_width(&self) -> usize {
        self.raw.hidden.last().map_or(self.raw.input_dim, |l| l.width)
    }

    pub fn hidden_offset(&self, layer: usize) -> usize {
        self.hidden_offsets[layer]
    }

    /// Flat index of the edge `src → dst` entering hidden layer `layer`.
    pub fn hidden_index(&self, layer: usize, src: usize, dst: usize) -> usize {
        debug_assert!(src < self.hidden_fan_in(layer) && dst < self.raw.hidden[layer].width);
        self.hidden_offsets[layer] + dst * self.hidden_fan_in(layer) + src
    }

    /// Flat index of the edge from last-layer unit `src` to unit `dst` of
    /// action `a`'s sublayer.
    pub fn sublayer_index(&self, a: usize, src: usize, dst: usize) -> usize {
        debug_assert!(src < self.last_width() && dst < self.raw.output_widths[a]);
        self.action_offsets[a] + dst * self.last_width() + src
    }

    /// Flat index of the output weight `θ_a(i)` (0-based `i`).
    pub fn output_index(&self, a: usize, i: usize) -> usize {
        debug_assert!(i < self.raw.output_widths[a]);
        self.output_weights(a).start + i
    }

    /// Positions of `θ_a`, the output weights of action `a`.
    pub fn output_weights(&self, a: usize) -> Range<usize> {
        let l = self.raw.output_widths[a];
        let start = self.action_offsets[a] + l * self.last_width();
        start..start + l
    }

    /// Every weight owned by action `a`: its sublayer matrix and output weights.
    pub fn action_block(&self, a: usize) -> Range<usize> {
        self.action_offsets[a]..self.output_weights(a).end
    }

    /// Number of weights entering the unit that weight `index` feeds.
    pub fn fan_in_at(&self, index: usize) -> usize {
        for (j, &off) in self.hidden_offsets.iter().enumerate().rev() {
            if index >= off && index < self.action_offsets[0] {
                return self.hidden_fan_in(j);
            }
        }
        for a in (0..self.num_actions()).rev() {
            if index >= self.action_offsets[a] {
                return if self.output_weights(a).contains(&index) {
                    self.raw.output_widths[a]
                } else {
                    self.last_width()
                };
            }
        }
        unreachable!("index {index} beyond weight vector of length {}", self.len)
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len {
            return Err(Error::Input(format!(
                "weight vector has length {}, topology needs {}",
                theta.len(),
                self.len
            )));
        }
        Ok(())
    }
}

/// Flat DQN weight vector `θ ∈ R^d`, ordered by [`Topology`]'s index map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(topology: &Topology, values: Vec<f64>) -> Result<Self> {
        topology.check_theta(&values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("theta[{i}]"), "non-finite weight"));
        }
        Ok(Self(values))
    }

    pub fn zeros(topology: &Topology) -> Self {
        Self(vec![0.0; topology.num_weights()])
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weight initialization policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    /// Independent `U[−1/√fan_in, 1/√fan_in]` per weight.
    UniformFanIn,
    /// [`Initializer::UniformFanIn`], then every output weight of `action`
    /// overwritten with `output_weight` and, if given, every weight of its
    /// output sublayer matrix with `sublayer_weight`. With positive features
    /// feeding the sublayer, a positive `sublayer_weight` and a negative
    /// `output_weight` keep the action's value negative for every state.
    Biased {
        action: usize,
        output_weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sublayer_weight: Option<f64>,
    },
    /// Every weight equal to `value`.
    Constant { value: f64 },
}

impl Initializer {
    /// Draws `θ_0` from a ChaCha8 stream seeded with `seed`, visiting weights
    /// in index order.
    pub fn initialize(&self, topology: &Topology, seed: u64) -> Result<WeightVector> {
        let d = topology.num_weights();
        let values = match self {
            Self::Constant { value } => vec![*value; d],
            Self::UniformFanIn => uniform_fan_in(topology, seed),
            Self::Biased {
                action,
                output_weight,
                sublayer_weight,
            } => {
                if *action >= topology.num_actions() {
                    return Err(Error::validation(
                        "network.initializer.action",
                        format!("action {action} out of range (|A| = {})", topology.num_actions()),
                    ));
                }
                let mut values = uniform_fan_in(topology, seed);
                let outputs = topology.output_weights(*action);
                if let Some(w) = sublayer_weight {
                    for i in topology.action_block(*action).filter(|i| !outputs.contains(i)) {
                        values[i] = *w;
                    }
                }
                for i in outputs {
                    values[i] = *output_weight;
                }
                values
            }
        };
        WeightVector::new(topology, values)
    }
}

fn uniform_fan_in(topology: &Topology, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..topology.num_weights())
        .map(|i| {
            let bound = 1.0 / (topology.fan_in_at(i) as f64).sqrt();
            rng.gen_range(-bound..=bound)
        })
        .collect()
}
