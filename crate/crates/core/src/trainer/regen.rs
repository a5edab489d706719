use super::record::TrainRecord;
use super::update::{step_expected, step_online, step_replay, UpdateMode};
use crate::envs::Mdp;
use crate::error::{Error, Result};
use crate::network::{Checkpoint, Topology};

/// Reconstructs `θ_n` for any step of a finished run from the nearest
/// earlier checkpoint and the record, without touching a random stream.
///
/// Every checkpoint passed on the way is compared bit-for-bit with the
/// regenerated iterate.
#[derive(Debug, Clone, Copy)]
pub struct ThetaReplay<'a> {
    topology: &'a Topology,
    mdp: &'a Mdp,
    record: &'a TrainRecord,
    checkpoints: &'a [Checkpoint],
}

impl<'a> ThetaReplay<'a> {
    /// `checkpoints` must be sorted by step.
    pub fn new(
        topology: &'a Topology,
        mdp: &'a Mdp,
        record: &'a TrainRecord,
        checkpoints: &'a [Checkpoint],
    ) -> Result<Self> {
        if checkpoints.windows(2).any(|w| w[0].step >= w[1].step) {
            return Err(Error::Input("checkpoints must be strictly increasing in step".into()));
        }
        for ck in checkpoints {
            topology.check_theta(&ck.theta)?;
        }
        Ok(Self {
            topology,
            mdp,
            record,
            checkpoints,
        })
    }

    pub fn topology(&self) -> &'a Topology {
        self.topology
    }

    pub fn mdp(&self) -> &'a Mdp {
        self.mdp
    }

    pub fn record(&self) -> &'a TrainRecord {
        self.record
    }

    pub fn checkpoints(&self) -> &'a [Checkpoint] {
        self.checkpoints
    }

    /// Number of executed steps `N`.
    pub fn len(&self) -> u64 {
        self.record.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.record.is_empty()
    }

    /// `θ_{n+1}` from `θ_n` using the recorded step `n`.
    pub fn advance(&self, n: u64, theta: &[f64]) -> Result<Vec<f64>> {
        let row = self.record.row(n)?;
        if self.record.mode.replay_batch.is_some() {
            return match self.record.batch_transitions(n)? {
                Some(batch) => step_replay(self.topology, theta, self.mdp, &batch, row.gamma, n),
                None => Ok(theta.to_vec()),
            };
        }
        match self.record.mode.update {
            UpdateMode::Online => step_online(self.topology, theta, self.mdp, &row.transition(), row.gamma),
            UpdateMode::Expected => step_expected(self.topology, theta, self.mdp, row.x, row.a, row.gamma, n),
        }
    }

    fn start_for(&self, n: u64) -> Result<&'a Checkpoint> {
        self.checkpoints
            .iter()
            .rev()
            .find(|c| c.step <= n)
            .ok_or_else(|| Error::Precondition(format!("no checkpoint at or before step {n}")))
    }

    /// Calls `f(n, θ_n)` for every `n` in `from..=to`.
    pub fn for_each<F>(&self, from: u64, to: u64, mut f: F) -> Result<()>
    where
        F: FnMut(u64, &[f64]) -> Result<()>,
    {
        if from > to || to > self.len() {
            return Err(Error::Input(format!(
                "step range {from}..={to} outside the run of {} steps",
                self.len()
            )));
        }
        let start = self.start_for(from)?;
        let mut theta = start.theta.clone();
        let mut next_ck = self.checkpoints.iter().filter(|c| c.step > start.step).peekable();
        let mut n = start.step;
        loop {
            while let Some(ck) = next_ck.peek() {
                if ck.step > n {
                    break;
                }
                if ck.step == n && ck.theta.iter().zip(&theta).any(|(a, b)| a.to_bits() != b.to_bits()) {
                    return Err(Error::Property(format!(
                        "regenerated θ_{n} differs from the stored checkpoint"
                    )));
                }
                next_ck.next();
            }
            if n >= from {
                f(n, &theta)?;
            }
            if n == to {
                return Ok(());
            }
            theta = self.advance(n, &theta)?;
            n += 1;
        }
    }

    pub fn theta_at(&self, n: u64) -> Result<Vec<f64>> {
        let mut out = None;
        self.for_each(n, n, |_, theta| {
            out = Some(theta.to_vec());
            Ok(())
        })?;
        Ok(out.expect("for_each visits n"))
    }

    /// `θ_n` for every `n` in `from..=to`.
    pub fn thetas(&self, from: u64, to: u64) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity((to.saturating_sub(from) + 1) as usize);
        self.for_each(from, to, |_, theta| {
            out.push(theta.to_vec());
            Ok(())
        })?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::benchmarks;
    use crate::trainer::{presets, train, ReplayConfig};

    #[test]
    fn regenerates_every_checkpoint_and_the_final_theta() {
        let mdp = benchmarks::chain();
        for replay in [ReplayConfig::disabled(), ReplayConfig::new(40, 5)] {
            let mut cfg = presets::chain_config();
            cfg.run.steps = 2500;
            cfg.replay = replay;
            let out = train(&mdp, &cfg).unwrap();
            let regen = ThetaReplay::new(&out.topology, &mdp, &out.record, &out.checkpoints[..1]).unwrap();
            assert_eq!(regen.theta_at(2500).unwrap(), out.final_theta);
            let all = ThetaReplay::new(&out.topology, &mdp, &out.record, &out.checkpoints).unwrap();
            assert_eq!(all.theta_at(1500).unwrap(), regen.theta_at(1500).unwrap());
        }
    }

    #[test]
    fn tampered_checkpoint_is_detected() {
        let mdp = benchmarks::chain();
        let mut cfg = presets::chain_config();
        cfg.run.steps = 2100;
        let mut out = train(&mdp, &cfg).unwrap();
        out.checkpoints[1].theta[0] += 1e-12;
        let regen = ThetaReplay::new(&out.topology, &mdp, &out.record, &out.checkpoints).unwrap();
        let first_only = [out.checkpoints[0].clone(), out.checkpoints[2].clone()];
        assert!(matches!(regen.for_each(0, 2100, |_, _| Ok(())), Err(Error::Property(_))));
        let ok = ThetaReplay::new(&out.topology, &mdp, &out.record, &first_only).unwrap();
        assert!(ok.for_each(0, 2100, |_, _| Ok(())).is_ok());
    }

    #[test]
    fn missing_early_checkpoint_is_a_precondition_error() {
        let mdp = benchmarks::chain();
        let mut cfg = presets::chain_config();
        cfg.run.steps = 1200;
        let out = train(&mdp, &cfg).unwrap();
        let regen = ThetaReplay::new(&out.topology, &mdp, &out.record, &out.checkpoints[1..]).unwrap();
        assert!(matches!(regen.theta_at(10), Err(Error::Precondition(_))));
    }
}
