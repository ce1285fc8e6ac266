//! Agents the harness can train and evaluate.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{features, BehaviorHyper, BehaviorLearner, StartBatch};
use crate::env::Environment;
use crate::error::{contract, Result};
use crate::numerics::{Adam, AdamConfig, Matrix, Owner, OwnerMask, ParameterSet, Tape};
use crate::qmop::{LatentState, ModelDims, WorldModel, WorldModelConfig};
use crate::replay::{EpisodeRecord, ReplayBuffer};
use crate::rng::{Noise, Stream, ZeroNoise};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentVariant {
    Myoe,
    Mbc,
    MbcRnn,
    MbcVae,
    PpoBc,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 5] =
        [AgentVariant::Myoe, AgentVariant::Mbc, AgentVariant::MbcRnn, AgentVariant::MbcVae, AgentVariant::PpoBc];

    pub fn tag(self) -> &'static str {
        match self {
            AgentVariant::Myoe => "myoe",
            AgentVariant::Mbc => "mbc",
            AgentVariant::MbcRnn => "mbc-rnn",
            AgentVariant::MbcVae => "mbc-vae",
            AgentVariant::PpoBc => "ppo-bc",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        AgentVariant::ALL.into_iter().find(|v| v.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Sample from the policy (training collection).
    Explore,
    /// Deterministic mean action, no posterior noise (evaluation).
    Greedy,
}

/// Scalars reported by one update, in a stable order.
pub type UpdateStats = Vec<(&'static str, f64)>;

/// Anything that can drive an environment.
pub trait Policy {
    fn begin_episode(&mut self, goal: &[f64]) -> Result<()>;

    /// `env` is only read by scripted controllers; learned agents act on `obs`.
    fn act(&mut self, env: &mut Environment, obs: &[f64], mode: ActMode, noise: &mut dyn Noise) -> Result<Vec<f64>>;

    /// Entropy of the current mixture gate weights, for agents that have one.
    fn mixture_entropy(&self) -> Option<f64> {
        None
    }
}

/// A learning agent.
pub trait Agent: Policy {
    fn variant(&self) -> AgentVariant;

    /// One training update from replay.
    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut Stream) -> Result<UpdateStats>;

    /// Called with every finished training episode, before it enters replay.
    fn end_episode(&mut self, _record: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn params(&self) -> &ParameterSet<f64>;

    fn params_mut(&mut self) -> &mut ParameterSet<f64>;

    /// Trainable scalar count (target networks excluded).
    fn parameter_count(&self) -> usize {
        let mask = OwnerMask::only(Owner::World).with(Owner::Policy).with(Owner::Value);
        self.params().scalar_count(mask)
    }
}

/// Shannon entropy `−Σ w ln w` of a weight vector, in nats.
pub fn weight_entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&x| x > 0.0).map(|&x| x * libm::log(x)).sum::<f64>()
}

/// Optimizer settings and batch shape for world-model agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MyoeTraining {
    pub world_lr: f64,
    pub actor_lr: f64,
    pub value_lr: f64,
    pub clip_norm: f64,
    /// Sequences per world-model batch `B`.
    pub batch: usize,
    /// Sequence length `K`.
    pub seq_len: usize,
    /// Cap on imagination start rows per update (`0` keeps all `B·K`).
    pub max_starts: usize,
}

impl Default for MyoeTraining {
    fn default() -> Self {
        MyoeTraining {
            world_lr: 1e-3,
            actor_lr: 3e-4,
            value_lr: 1e-3,
            clip_norm: 100.0,
            batch: 16,
            seq_len: 32,
            max_starts: 0,
        }
    }
}

impl MyoeTraining {
    pub fn validate(&self) -> Result<()> {
        contract!(self.batch >= 1 && self.seq_len >= 1, "batch and sequence length must be ≥ 1");
        contract!(
            self.world_lr > 0.0 && self.actor_lr > 0.0 && self.value_lr > 0.0 && self.clip_norm >= 0.0,
            "learning rates must be positive"
        );
        Ok(())
    }

    fn adam(&self, lr: f64) -> Adam {
        Adam::new(AdamConfig { lr, clip_norm: self.clip_norm, ..Default::default() })
    }
}

/// World model plus preference-regret actor-critic.
#[derive(Debug, Clone)]
pub struct MyoeAgent {
    pub wm: WorldModel,
    pub learner: BehaviorLearner,
    pub params: ParameterSet<f64>,
    pub training: MyoeTraining,
    wm_opt: Adam,
    value_opt: Adam,
    policy_opt: Adam,
    state: LatentState<f64>,
    prev_action: Vec<f64>,
    query: Matrix<f64>,
    weights: Matrix<f64>,
}

impl MyoeAgent {
    pub fn new<R: Rng + ?Sized>(
        config: WorldModelConfig,
        hyper: BehaviorHyper,
        training: MyoeTraining,
        dims: ModelDims,
        bounds: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        training.validate()?;
        let mut params = ParameterSet::new();
        let wm = WorldModel::new(config, dims, &mut params, rng)?;
        let learner = BehaviorLearner::new(hyper, wm.feature_dim(), dims.action_dim, bounds, &mut params, rng)?;
        let state = LatentState::zeros(1, &wm.config);
        let m = wm.config.components;
        Ok(MyoeAgent {
            wm_opt: training.adam(training.world_lr),
            value_opt: training.adam(training.value_lr),
            policy_opt: training.adam(training.actor_lr),
            training,
            state,
            prev_action: vec![0.0; dims.action_dim],
            query: Matrix::zeros(1, wm.config.query_dim),
            weights: Matrix::filled(1, m, 1.0 / m as f64),
            wm,
            learner,
            params,
        })
    }

    /// Gate weights of the current episode's goal.
    pub fn current_weights(&self) -> &[f64] {
        &self.weights.data
    }

    /// Filtered latent state after the last observation.
    pub fn latent_state(&self) -> &LatentState<f64> {
        &self.state
    }
}

impl Policy for MyoeAgent {
    fn begin_episode(&mut self, goal: &[f64]) -> Result<()> {
        contract!(goal.len() == self.wm.dims.goal_dim, "goal has {} values, model expects {}", goal.len(), self.wm.dims.goal_dim);
        let mut tape = Tape::frozen();
        let g = tape.constant_f64(1, goal.len(), goal);
        let q = self.wm.query(&mut tape, &self.params, g);
        let w = self.wm.mixture_weights(&mut tape, &self.params, q);
        tape.check_finite(w, "mixture weights")?;
        self.query = tape.value(q).clone();
        self.weights = tape.value(w).clone();
        self.state = LatentState::zeros(1, &self.wm.config);
        self.prev_action.iter_mut().for_each(|a| *a = 0.0);
        Ok(())
    }

    fn act(&mut self, _env: &mut Environment, obs: &[f64], mode: ActMode, noise: &mut dyn Noise) -> Result<Vec<f64>> {
        let d = self.wm.dims;
        contract!(obs.len() == d.obs_dim, "observation has {} values, model expects {}", obs.len(), d.obs_dim);
        let mut tape = Tape::frozen();
        let prev = self.state.on_tape(&mut tape);
        let a = tape.constant_f64(1, d.action_dim, &self.prev_action);
        let o = tape.constant_f64(1, d.obs_dim, obs);
        let q = tape.constant(self.query.clone());
        let w = tape.constant(self.weights.clone());
        let greedy = mode == ActMode::Greedy;
        let out = if greedy {
            self.wm.observe_step(&mut tape, &self.params, prev, a, o, q, w, &mut ZeroNoise)?
        } else {
            self.wm.observe_step(&mut tape, &self.params, prev, a, o, q, w, noise)?
        };
        let f = features(&mut tape, out.next);
        self.state = LatentState::from_tape(&tape, out.next);
        let action = self.learner.actor.act(&self.params, tape.value(f), noise, greedy)?;
        self.prev_action.copy_from_slice(&action);
        Ok(action)
    }

    fn mixture_entropy(&self) -> Option<f64> {
        Some(weight_entropy(&self.weights.data))
    }
}

impl Agent for MyoeAgent {
    fn variant(&self) -> AgentVariant {
        AgentVariant::Myoe
    }

    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut Stream) -> Result<UpdateStats> {
        let t = &self.training;
        let batch = buffer.sample_sequences(t.batch, t.seq_len, rng)?;
        let mut tape = Tape::new(OwnerMask::only(Owner::World));
        let out = self.wm.world_model_loss(&mut tape, &self.params, &batch, rng)?;
        let b = out.breakdown;
        let mut stats: UpdateStats = vec![
            ("f_o", b.f_o),
            ("f_o_kl", b.f_o_kl),
            ("f_r", b.f_r),
            ("f_p_kl", b.f_p_kl),
            ("f_dist", b.f_dist),
            ("mix_entropy", b.mix_entropy),
            ("wm_total", b.total),
        ];
        if b.empty {
            return Ok(stats);
        }
        let grads = tape.gradients(out.total)?;
        let mut start = StartBatch::from_observed(&tape, &out, &batch)?;
        self.wm_opt.step(&mut self.params, &grads)?;

        if t.max_starts > 0 && start.rows() > t.max_starts {
            let rows: Vec<usize> = rand::seq::index::sample(rng, start.rows(), t.max_starts).into_vec();
            let gd = self.wm.dims.goal_dim;
            let ad = self.wm.dims.action_dim;
            start = StartBatch {
                states: start.states.gather_rows(&rows),
                goals: rows.iter().flat_map(|&r| start.goals[r * gd..(r + 1) * gd].iter().copied()).collect(),
                expert: crate::behavior::ExpertTargets {
                    mask: rows.iter().map(|&r| start.expert.mask[r]).collect(),
                    actions: rows.iter().flat_map(|&r| start.expert.actions[r * ad..(r + 1) * ad].iter().copied()).collect(),
                },
            };
        }
        let s = self.learner.update(&self.wm, &mut self.params, &start, &mut self.value_opt, &mut self.policy_opt, rng)?;
        stats.extend([
            ("value", s.value_loss),
            ("l_adv", s.l_adv),
            ("l_ac", s.l_ac),
            ("l_exp", s.l_exp),
            ("imag_reward", s.mean_reward),
            ("imag_advantage", s.mean_advantage),
            ("imag_regret", s.mean_regret),
        ]);
        Ok(stats)
    }

    fn params(&self) -> &ParameterSet<f64> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet<f64> {
        &mut self.params
    }
}

/// The environment's scripted expert as a policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedExpert;

impl Policy for ScriptedExpert {
    fn begin_episode(&mut self, _goal: &[f64]) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, env: &mut Environment, _obs: &[f64], _mode: ActMode, _noise: &mut dyn Noise) -> Result<Vec<f64>> {
        Ok(env.expert_action())
    }
}

/// Uniform random actions inside the action box.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: Stream,
}

impl RandomPolicy {
    pub fn new(rng: Stream) -> Self {
        RandomPolicy { rng }
    }
}

impl Policy for RandomPolicy {
    fn begin_episode(&mut self, _goal: &[f64]) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, env: &mut Environment, _obs: &[f64], _mode: ActMode, _noise: &mut dyn Noise) -> Result<Vec<f64>> {
        let s = env.spec();
        let (lo, hi) = (s.action_low, s.action_high);
        Ok((0..s.action_dim).map(|_| self.rng.random_range(lo..hi)).collect())
    }
}
