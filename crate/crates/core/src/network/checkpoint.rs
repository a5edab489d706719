use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Topology;
use crate::error::{Error, Result};
use crate::trainer::Transition;

/// Exact position of a ChaCha8 stream: 32-byte key (hex), stream id and
/// word position (decimal, since it is a `u128`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamState {
    pub key: String,
    pub stream: u64,
    pub word_pos: String,
}

impl StreamState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            key: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |m: &str| Error::Parse {
            context: "checkpoint random stream".into(),
            message: m.into(),
        };
        if self.key.len() != 64 {
            return Err(bad("key must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.key[2 * i..2 * i + 2], 16).map_err(|_| bad("key is not hex"))?;
        }
        let pos: u128 = self.word_pos.parse().map_err(|_| bad("word_pos is not an integer"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Snapshot of a run before step `step`: the topology, `θ_step` (in the
/// topology's index order), the random streams and, when taken by the
/// trainer, the current state and replay contents needed to resume.
///
/// Stored as JSON; floats are written in shortest round-trip form, so a
/// save/load cycle is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub topology: Topology,
    pub theta: Vec<f64>,
    pub step: u64,
    pub streams: Vec<StreamState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<Vec<Transition>>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })?;
        ck.topology.check_theta(&ck.theta)?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ActivationKind, Initializer};
    use rand::Rng;

    #[test]
    fn stream_state_resumes_mid_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        rng.set_stream(1);
        for _ in 0..13 {
            rng.gen::<f64>();
        }
        let mut restored = StreamState::capture(&rng).restore().unwrap();
        for _ in 0..100 {
            assert_eq!(rng.gen::<u64>(), restored.gen::<u64>());
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let t = Topology::uniform(3, &[4, 4], ActivationKind::Tanh, 2, 3, ActivationKind::Sigmoid).unwrap();
        let mut theta = Initializer::UniformFanIn.initialize(&t, 5).unwrap().into_inner();
        theta[0] = 0.1 + 0.2;
        theta[1] = f64::MIN_POSITIVE;
        theta[2] = -1e-300;
        let ck = Checkpoint {
            topology: t,
            theta,
            step: 12,
            streams: vec![StreamState::capture(&ChaCha8Rng::seed_from_u64(1))],
            state: Some(2),
            replay: None,
        };
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.theta.iter().zip(&ck.theta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_theta_of_wrong_length() {
        let t = Topology::uniform(1, &[], ActivationKind::Tanh, 1, 1, ActivationKind::Tanh).unwrap();
        let ck = Checkpoint {
            topology: t,
            theta: vec![1.0],
            step: 0,
            streams: vec![],
            state: None,
            replay: None,
        };
        assert!(Checkpoint::from_json(&ck.to_json()).is_err());
    }
}
