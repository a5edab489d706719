use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KernelRow, Mdp};
use crate::error::{Error, Result};

/// On-disk JSON layout of an MDP.
///
/// ```json
/// {
///   "states": [[0.0], [1.0]],
///   "actions": 2,
///   "kernel": [[[[1, 1.0]], [[0, 0.5], [1, 0.5]]], [[[0, 1.0]], [[1, 1.0]]]],
///   "reward": [[0.0, 1.0], [0.5, 0.0]],
///   "discount": 0.9,
///   "initial_dist": [1.0, 0.0]
/// }
/// ```
///
/// `kernel[x][a]` lists `[next_index, probability]` pairs. Unknown keys are
/// rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub states: Vec<Vec<f64>>,
    pub actions: usize,
    pub kernel: Vec<Vec<KernelRow>>,
    pub reward: Vec<Vec<f64>>,
    pub discount: f64,
    pub initial_dist: Vec<f64>,
}

impl From<&Mdp> for MdpFile {
    fn from(mdp: &Mdp) -> Self {
        Self {
            states: mdp.states.clone(),
            actions: mdp.num_actions,
            kernel: mdp.kernel.clone(),
            reward: mdp.reward.clone(),
            discount: mdp.discount,
            initial_dist: mdp.initial_dist.clone(),
        }
    }
}

impl TryFrom<MdpFile> for Mdp {
    type Error = Error;

    fn try_from(f: MdpFile) -> Result<Mdp> {
        Mdp::new(f.states, f.actions, f.kernel, f.reward, f.discount, f.initial_dist)
    }
}

impl Mdp {
    /// Parses and validates an MDP from JSON text. Syntax and type errors
    /// carry line and column; invariant violations carry the field path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "MDP definition".into(),
            message: e.to_string(),
        })?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MdpFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        file.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&MdpFile::from(self)).expect("MDP serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::benchmarks;

    #[test]
    fn round_trips_benchmarks() {
        for mdp in [benchmarks::chain(), benchmarks::reducible(), benchmarks::trap()] {
            let back = Mdp::from_json_str(&mdp.to_json_string()).unwrap();
            assert_eq!(back, mdp);
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "{\n  \"states\": [[0.0]],\n  \"actions\": \"two\"\n}";
        let msg = Mdp::from_json_str(text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&benchmarks::trap().to_json_string()).unwrap();
        value["gamma"] = serde_json::json!(0.5);
        let msg = Mdp::from_json_str(&value.to_string()).unwrap_err().to_string();
        assert!(msg.contains("gamma"), "{msg}");
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let mut value: serde_json::Value = serde_json::from_str(&benchmarks::trap().to_json_string()).unwrap();
        value["kernel"][2][1] = serde_json::json!([[3, 0.6]]);
        let msg = Mdp::from_json_str(&value.to_string()).unwrap_err().to_string();
        assert!(msg.contains("kernel[2][1]"), "{msg}");
    }
}
