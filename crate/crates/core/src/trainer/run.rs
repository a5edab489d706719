use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{choose, PolicyConfig};
use super::record::{RunMode, StepRecord, TrainRecord};
use super::replay::{ReplayBuffer, ReplayConfig, Transition};
use super::schedule::StepSchedule;
use super::update::{step_expected, step_online, step_replay, UpdateMode};
use crate::envs::{sample_transition, Mdp};
use crate::error::{Error, Result};
use crate::network::{l2_norm, q_values, ActivationKind, Checkpoint, Initializer, StreamState, Topology};

/// Network section of a run: hidden widths share `activation`, every
/// action gets an output sublayer of `output_width` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: ActivationKind,
    pub output_activation: ActivationKind,
    pub output_width: usize,
    pub initializer: Initializer,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: u64,
    #[serde(default = "default_cadence")]
    pub checkpoint_every: u64,
    #[serde(default = "default_guard")]
    pub divergence_guard: f64,
    pub seed: u64,
    #[serde(default = "default_update")]
    pub update: UpdateMode,
}

fn default_cadence() -> u64 {
    1000
}

fn default_guard() -> f64 {
    1e6
}

fn default_update() -> UpdateMode {
    UpdateMode::Online
}

/// Everything that determines a run besides the MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub schedule: StepSchedule,
    pub policy: PolicyConfig,
    #[serde(default = "ReplayConfig::disabled")]
    pub replay: ReplayConfig,
    pub run: RunConfig,
}

impl TrainConfig {
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        self.schedule.validate()?;
        self.policy.validate()?;
        self.replay.validate()?;
        self.topology(mdp)?;
        if self.run.checkpoint_every == 0 {
            return Err(Error::validation("run.checkpoint_every", "must be at least 1"));
        }
        if !(self.run.divergence_guard > 0.0) {
            return Err(Error::validation("run.divergence_guard", "must be positive"));
        }
        if self.replay.enabled && self.run.update == UpdateMode::Expected {
            return Err(Error::validation(
                "replay.enabled",
                "replay averages sampled targets and cannot be combined with run.update = \"expected\"",
            ));
        }
        if let Initializer::Biased { action, .. } = self.network.initializer {
            if action >= mdp.num_actions() {
                return Err(Error::validation(
                    "network.initializer.action",
                    format!("action {action} out of range (|A| = {})", mdp.num_actions()),
                ));
            }
        }
        Ok(())
    }

    pub fn topology(&self, mdp: &Mdp) -> Result<Topology> {
        Topology::uniform(
            mdp.state_dim(),
            &self.network.hidden,
            self.network.activation,
            mdp.num_actions(),
            self.network.output_width,
            self.network.output_activation,
        )
    }

    pub fn mode(&self) -> RunMode {
        RunMode {
            update: self.run.update,
            replay_batch: self.replay.enabled.then_some(self.replay.batch),
        }
    }
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { step: u64, reason: String },
}

/// Step-by-step learner.
///
/// Two independent ChaCha8 streams share the run seed: stream 0 drives the
/// initial state, exploration and transitions, stream 1 draws replay
/// mini-batches. A replay run therefore sees the same environment draws as
/// the online run with the same seed.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    mdp: &'a Mdp,
    config: TrainConfig,
    topology: Topology,
    theta: Vec<f64>,
    rng_policy: ChaCha8Rng,
    rng_replay: ChaCha8Rng,
    buffer: Option<ReplayBuffer>,
    x: usize,
    n: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(mdp: &'a Mdp, config: TrainConfig) -> Result<Self> {
        config.validate(mdp)?;
        let topology = config.topology(mdp)?;
        let theta = config
            .network
            .initializer
            .initialize(&topology, config.network.seed)?
            .into_inner();
        let mut rng_policy = ChaCha8Rng::seed_from_u64(config.run.seed);
        let mut rng_replay = ChaCha8Rng::seed_from_u64(config.run.seed);
        rng_replay.set_stream(1);
        let x = mdp.sample_initial(&mut rng_policy);
        let buffer = if config.replay.enabled {
            Some(ReplayBuffer::new(config.replay.capacity, config.replay.batch)?)
        } else {
            None
        };
        Ok(Self {
            mdp,
            config,
            topology,
            theta,
            rng_policy,
            rng_replay,
            buffer,
            x,
            n: 0,
        })
    }

    /// Continues a run from a checkpoint taken by [`Trainer::checkpoint`].
    pub fn resume(mdp: &'a Mdp, config: TrainConfig, checkpoint: &Checkpoint) -> Result<Self> {
        let mut t = Self::new(mdp, config)?;
        if checkpoint.topology != t.topology {
            return Err(Error::Input("checkpoint topology does not match the configuration".into()));
        }
        let [policy, replay] = checkpoint.streams.as_slice() else {
            return Err(Error::Input("checkpoint must carry exactly two random streams".into()));
        };
        t.rng_policy = policy.restore()?;
        t.rng_replay = replay.restore()?;
        t.theta = checkpoint.theta.clone();
        t.n = checkpoint.step;
        t.x = checkpoint
            .state
            .ok_or_else(|| Error::Input("checkpoint carries no current state".into()))?;
        mdp.state(t.x)?;
        if let Some(buf) = &mut t.buffer {
            let items = checkpoint
                .replay
                .clone()
                .ok_or_else(|| Error::Input("replay run needs the buffer contents in the checkpoint".into()))?;
            *buf = ReplayBuffer::from_contents(buf.capacity(), buf.batch_size(), items)?;
        }
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            topology: self.topology.clone(),
            theta: self.theta.clone(),
            step: self.n,
            streams: vec![
                StreamState::capture(&self.rng_policy),
                StreamState::capture(&self.rng_replay),
            ],
            state: Some(self.x),
            replay: self.buffer.as_ref().map(ReplayBuffer::contents),
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Index `n` of the next step.
    pub fn steps_done(&self) -> u64 {
        self.n
    }

    pub fn state(&self) -> usize {
        self.x
    }

    /// Executes step `n`: select, observe, update. After an error the
    /// trainer must not be stepped again.
    pub fn step(&mut self) -> Result<StepRecord> {
        let n = self.n;
        let epsilon = self.config.policy.epsilon_at(n);
        let q = q_values(&self.topology, &self.theta, self.mdp.state(self.x)?)?;
        let sel = choose(&q, epsilon, &mut self.rng_policy);
        let (next, reward) = sample_transition(self.mdp, self.x, sel.action, &mut self.rng_policy)?;
        let t = Transition {
            step: n,
            x: self.x,
            a: sel.action,
            reward,
            next,
        };
        let gamma = self.config.schedule.gamma(n);

        let mut batch_steps = None;
        let new_theta = match &mut self.buffer {
            Some(buf) => {
                buf.push(t);
                if buf.ready() {
                    let batch = buf.sample(&mut self.rng_replay)?;
                    batch_steps = Some(batch.iter().map(|b| b.step).collect());
                    step_replay(&self.topology, &self.theta, self.mdp, &batch, gamma, n)?
                } else {
                    self.theta.clone()
                }
            }
            None => match self.config.run.update {
                UpdateMode::Online => step_online(&self.topology, &self.theta, self.mdp, &t, gamma)?,
                UpdateMode::Expected => step_expected(&self.topology, &self.theta, self.mdp, t.x, t.a, gamma, n)?,
            },
        };
        let norm = l2_norm(&new_theta);
        if !(norm <= self.config.run.divergence_guard) {
            return Err(Error::Diverged {
                step: n,
                reason: format!("‖θ‖₂ = {norm:e} exceeds guard {:e}", self.config.run.divergence_guard),
            });
        }
        self.theta = new_theta;
        self.x = next;
        self.n += 1;
        Ok(StepRecord {
            n,
            x: t.x,
            a: t.a,
            reward,
            next,
            gamma,
            epsilon,
            explored: sel.explored,
            tie: sel.tie,
            checkpoint: None,
            batch: batch_steps,
        })
    }
}

/// Result of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub topology: Topology,
    pub record: TrainRecord,
    /// Checkpoints in step order: one before every `checkpoint_every`-th step
    /// and one after the last executed step.
    pub checkpoints: Vec<Checkpoint>,
    pub initial_theta: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub status: RunStatus,
}

/// Runs `config.run.steps` steps. Divergence ends the run early with
/// [`RunStatus::Diverged`]; the record and checkpoints up to that point are
/// kept.
pub fn train(mdp: &Mdp, config: &TrainConfig) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(mdp, config.clone())?;
    let initial_theta = trainer.theta().to_vec();
    let mut record = TrainRecord::new(config.mode());
    let mut checkpoints = Vec::new();
    let mut status = RunStatus::Completed;
    for n in 0..config.run.steps {
        let ckpt = n % config.run.checkpoint_every == 0;
        if ckpt {
            checkpoints.push(trainer.checkpoint());
        }
        match trainer.step() {
            Ok(mut row) => {
                row.checkpoint = ckpt.then_some(n);
                record.rows.push(row);
            }
            Err(Error::Diverged { step, reason }) => {
                status = RunStatus::Diverged { step, reason };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if checkpoints.last().map(|c| c.step) != Some(trainer.steps_done()) {
        checkpoints.push(trainer.checkpoint());
    }
    Ok(TrainOutput {
        topology: trainer.topology().clone(),
        record,
        checkpoints,
        initial_theta,
        final_theta: trainer.theta().to_vec(),
        status,
    })
}
