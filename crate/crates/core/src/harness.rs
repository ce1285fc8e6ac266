//! The online training loop and evaluation.
//!
//! A run alternates environment collection with updates: every
//! `update_every` collected steps the agent takes one update from replay.
//! Finished episodes enter the buffer, periodic evaluations run greedy
//! episodes on a separate environment instance, and a final block of
//! non-learning episodes produces the run summary. Output goes through a
//! [`RecordSink`], so the loop itself does no IO.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{ActMode, Agent, AgentVariant, MyoeAgent, Policy, UpdateStats};
use crate::baselines::BaselineAgent;
use crate::config::RunConfig;
use crate::env::{generate_demonstrations, make_env, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::qmop::ModelDims;
use crate::replay::{EpisodeRecord, ReplayBuffer};
use crate::rng::{derive_seed, stream, Noise, ZeroNoise};

/// Version of the metrics log layout.
pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Consecutive rejected updates tolerated before a run aborts.
pub const MAX_REJECTED_UPDATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Header,
    DemoEpisode,
    TrainStep,
    TrainEpisode,
    EvalEpisode,
    Summary,
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub schema: u32,
    pub kind: RecordKind,
    pub agent: String,
    pub seed: u64,
    /// Environment steps collected so far.
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_return: Option<f64>,
    /// `γ^(T−1)` for an episode solved at step `T`, else 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discounted_return: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_len: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub losses: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<EvalSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<usize>,
    /// Seconds since the run started; only filled when the sink asks for it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<f64>,
}

impl MetricsRecord {
    pub fn new(kind: RecordKind, agent: AgentVariant, seed: u64, step: u64) -> Self {
        MetricsRecord {
            schema: LOG_SCHEMA_VERSION,
            kind,
            agent: agent.tag().to_string(),
            seed,
            step,
            episode: None,
            episode_return: None,
            discounted_return: None,
            success: None,
            episode_len: None,
            losses: BTreeMap::new(),
            mixture_entropy: None,
            summary: None,
            env: None,
            parameters: None,
            wall_clock: None,
        }
    }

    fn with_episode(mut self, index: u64, e: &EpisodeOutcome) -> Self {
        self.episode = Some(index);
        self.episode_return = Some(e.episode_return);
        self.discounted_return = Some(e.discounted_return);
        self.success = Some(e.success);
        self.episode_len = Some(e.steps);
        self.mixture_entropy = e.mixture_entropy;
        self
    }
}

/// Where a run's records and checkpoints go.
pub trait RecordSink {
    fn record(&mut self, record: &MetricsRecord) -> Result<()>;

    fn checkpoint(&mut self, _step: u64, _agent: &dyn Agent, _final_checkpoint: bool) -> Result<()> {
        Ok(())
    }
}

/// Collects records in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub records: Vec<MetricsRecord>,
}

impl RecordSink for MemorySink {
    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub episode_return: f64,
    pub discounted_return: f64,
    pub success: bool,
    pub steps: usize,
    pub mixture_entropy: Option<f64>,
}

/// Success-rate summary of a block of evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    /// Population standard deviation of the per-episode success indicator.
    pub success_std: f64,
    pub mean_return: f64,
    pub mean_discounted_return: f64,
    pub mean_len: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_mixture_entropy: Option<f64>,
}

/// `"0.97 ± 0.06"`.
pub fn format_pm(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, libm::sqrt(v))
}

impl EvalSummary {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome]) -> Self {
        let col = |f: fn(&EpisodeOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
        let (sr, sd) = mean_std(&col(|e| if e.success { 1.0 } else { 0.0 }));
        let ent: Vec<f64> = outcomes.iter().filter_map(|e| e.mixture_entropy).collect();
        EvalSummary {
            episodes: outcomes.len(),
            success_rate: sr,
            success_std: sd,
            mean_return: mean_std(&col(|e| e.episode_return)).0,
            mean_discounted_return: mean_std(&col(|e| e.discounted_return)).0,
            mean_len: mean_std(&col(|e| e.steps as f64)).0,
            mean_mixture_entropy: (!ent.is_empty()).then(|| mean_std(&ent).0),
        }
    }

    pub fn success_cell(&self) -> String {
        format_pm(self.success_rate, self.success_std)
    }
}

/// Run one episode. With `record` set, the trajectory is returned too.
pub fn run_episode(
    policy: &mut dyn Policy,
    env: &mut Environment,
    mode: ActMode,
    gamma: f64,
    noise: &mut dyn Noise,
    expert: bool,
) -> Result<(EpisodeOutcome, EpisodeRecord)> {
    let obs = env.reset();
    policy.begin_episode(&obs.goal)?;
    let entropy = policy.mixture_entropy();
    let spec = env.spec().clone();
    let mut rec = EpisodeRecord::start(&spec, env.seed(), &obs, expert);
    let mut flat = obs.flatten();
    loop {
        let action = policy.act(env, &flat, mode, noise)?;
        let step = env.step(&action)?;
        flat = step.observation.flatten();
        rec.push(&step.observation, &action, step.reward, step.done);
        if step.done {
            rec.success = step.success;
            break;
        }
    }
    let outcome = EpisodeOutcome {
        episode_return: rec.episode_return(),
        discounted_return: rec.discounted_return(gamma),
        success: rec.success,
        steps: rec.steps(),
        mixture_entropy: entropy,
    };
    Ok((outcome, rec))
}

/// Greedy, non-learning evaluation.
pub fn evaluate(
    policy: &mut dyn Policy,
    env: &mut Environment,
    episodes: usize,
    gamma: f64,
) -> Result<Vec<EpisodeOutcome>> {
    (0..episodes).map(|_| run_episode(policy, env, ActMode::Greedy, gamma, &mut ZeroNoise, false).map(|r| r.0)).collect()
}

pub fn model_dims(spec: &EnvSpec) -> ModelDims {
    ModelDims { obs_dim: spec.layout.total(), action_dim: spec.action_dim, goal_dim: spec.layout.goal }
}

/// Build the configured agent from its seed. Baselines sized by parity
/// match the MYOE network this config would build.
pub fn build_agent(config: &RunConfig) -> Result<Box<dyn Agent>> {
    let spec = config.env.spec()?;
    let dims = model_dims(&spec);
    let bounds = (spec.action_low, spec.action_high);
    let mut rng = stream(config.seed, "agent-init");
    let myoe = |rng: &mut crate::rng::Stream| {
        MyoeAgent::new(config.world_model.clone(), config.behavior.clone(), config.myoe.clone(), dims, bounds, rng)
    };
    Ok(match config.agent {
        AgentVariant::Myoe => Box::new(myoe(&mut rng)?),
        variant => {
            let target = myoe(&mut stream(config.seed, "parity"))?.parameter_count();
            let b = config.baseline.clone();
            Box::new(BaselineAgent::new(variant, b, &config.behavior, dims, bounds, target, &mut rng)?)
        }
    })
}

/// Demonstrations for a run. They depend on the seed and environment only,
/// so every agent variant sees the same episodes.
pub fn generate_run_demos(config: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    let spec = config.env.spec()?;
    let mut env = make_env(spec, derive_seed(config.seed, "demo-env"))?;
    let mut rng = stream(config.seed, "demo-perturbation");
    generate_demonstrations(&mut env, config.demos.episodes, config.demos.perturbation, &mut rng)
}

pub struct TrainOutcome {
    pub agent: Box<dyn Agent>,
    pub summary: EvalSummary,
    pub steps: u64,
    pub episodes: u64,
}

fn losses(stats: &UpdateStats) -> BTreeMap<String, f64> {
    stats.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

struct Loop<'a> {
    config: &'a RunConfig,
    agent: Box<dyn Agent>,
    sink: &'a mut dyn RecordSink,
    buffer: ReplayBuffer,
    updates: u64,
    rejected: usize,
    step: u64,
}

impl Loop<'_> {
    fn record(&mut self, kind: RecordKind) -> MetricsRecord {
        MetricsRecord::new(kind, self.config.agent, self.config.seed, self.step)
    }

    fn update(&mut self, rng: &mut crate::rng::Stream) -> Result<()> {
        match self.agent.update(&self.buffer, rng) {
            Ok(stats) => {
                self.rejected = 0;
                self.updates += 1;
                if self.updates % self.config.train.log_every as u64 == 0 {
                    let mut r = self.record(RecordKind::TrainStep);
                    r.losses = losses(&stats);
                    r.mixture_entropy = self.agent.mixture_entropy();
                    self.sink.record(&r)?;
                }
                Ok(())
            }
            Err(Error::NonFinite { what }) => {
                self.rejected += 1;
                if self.rejected >= MAX_REJECTED_UPDATES {
                    return Err(Error::NonFinite {
                        what: format!("{what} ({} consecutive updates rejected at step {})", self.rejected, self.step),
                    });
                }
                let mut r = self.record(RecordKind::TrainStep);
                r.losses.insert("rejected".to_string(), self.rejected as f64);
                self.sink.record(&r)
            }
            Err(e) => Err(e),
        }
    }
}

/// Train `config.agent` online from `demos`.
pub fn train(config: &RunConfig, demos: Vec<EpisodeRecord>, sink: &mut dyn RecordSink) -> Result<TrainOutcome> {
    config.validate()?;
    let spec = config.env.spec()?;
    let gamma = config.behavior.gamma;
    let agent = build_agent(config)?;
    let mut lp = Loop {
        config,
        agent,
        sink,
        buffer: ReplayBuffer::new(config.train.buffer_capacity, config.train.expert_ratio),
        updates: 0,
        rejected: 0,
        step: 0,
    };
    let mut header = lp.record(RecordKind::Header);
    header.env = Some(spec.name.clone());
    header.parameters = Some(lp.agent.parameter_count());
    lp.sink.record(&header)?;

    for (i, d) in demos.into_iter().enumerate() {
        let mut r = lp.record(RecordKind::DemoEpisode);
        r.episode = Some(i as u64);
        r.episode_return = Some(d.episode_return());
        r.discounted_return = Some(d.discounted_return(gamma));
        r.success = Some(d.success);
        r.episode_len = Some(d.steps());
        lp.buffer.append_episode(d).map_err(|e| Error::Config(format!("demonstrations: {e}")))?;
        lp.sink.record(&r)?;
    }
    if lp.buffer.is_empty() {
        return Err(Error::Config("no demonstration episodes".into()));
    }

    let mut update_rng = stream(config.seed, "update");
    let mut act_rng = stream(config.seed, "act");
    let mut env = make_env(spec.clone(), derive_seed(config.seed, "train-env"))?;
    let mut eval_env = make_env(spec.clone(), derive_seed(config.seed, "eval-env"))?;
    let total = config.train.total_steps as u64;

    if total > 0 {
        for _ in 0..config.train.pretrain_updates {
            lp.update(&mut update_rng)?;
        }
    }
    let mut episode = 0u64;
    let mut eval_index = 0u64;
    let mut next_eval = config.eval.every_steps as u64;
    let mut next_ckpt = config.train.checkpoint_every as u64;
    while lp.step < total {
        let obs = env.reset();
        lp.agent.begin_episode(&obs.goal)?;
        let entropy = lp.agent.mixture_entropy();
        let mut rec = EpisodeRecord::start(&spec, env.seed(), &obs, false);
        let mut flat = obs.flatten();
        loop {
            let action = lp.agent.act(&mut env, &flat, ActMode::Explore, &mut act_rng)?;
            let s = env.step(&action)?;
            flat = s.observation.flatten();
            rec.push(&s.observation, &action, s.reward, s.done);
            lp.step += 1;
            if lp.step % config.train.update_every as u64 == 0 {
                lp.update(&mut update_rng)?;
            }
            if s.done || lp.step >= total {
                rec.success = s.success;
                break;
            }
        }
        let outcome = EpisodeOutcome {
            episode_return: rec.episode_return(),
            discounted_return: rec.discounted_return(gamma),
            success: rec.success,
            steps: rec.steps(),
            mixture_entropy: entropy,
        };
        lp.agent.end_episode(&rec)?;
        lp.buffer.append_episode(rec)?;
        let r = lp.record(RecordKind::TrainEpisode).with_episode(episode, &outcome);
        lp.sink.record(&r)?;
        episode += 1;

        if config.eval.every_steps > 0 && lp.step >= next_eval && lp.step < total {
            next_eval += config.eval.every_steps as u64;
            for o in evaluate(lp.agent.as_mut(), &mut eval_env, config.eval.episodes, gamma)? {
                let r = lp.record(RecordKind::EvalEpisode).with_episode(eval_index, &o);
                lp.sink.record(&r)?;
                eval_index += 1;
            }
        }
        if config.train.checkpoint_every > 0 && lp.step >= next_ckpt && lp.step < total {
            next_ckpt += config.train.checkpoint_every as u64;
            lp.sink.checkpoint(lp.step, lp.agent.as_ref(), false)?;
        }
    }

    let finals = if total > 0 { evaluate(lp.agent.as_mut(), &mut eval_env, config.eval.final_episodes, gamma)? } else { Vec::new() };
    for o in &finals {
        let r = lp.record(RecordKind::EvalEpisode).with_episode(eval_index, o);
        lp.sink.record(&r)?;
        eval_index += 1;
    }
    let summary = EvalSummary::from_outcomes(&finals);
    if total > 0 {
        let mut r = lp.record(RecordKind::Summary);
        r.summary = Some(summary.clone());
        lp.sink.record(&r)?;
    }
    lp.sink.checkpoint(lp.step, lp.agent.as_ref(), true)?;
    Ok(TrainOutcome { agent: lp.agent, summary, steps: lp.step, episodes: episode })
}
