//! Run configuration and named presets.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentVariant, MyoeTraining};
use crate::baselines::BaselineConfig;
use crate::behavior::BehaviorHyper;
use crate::env::{EnvSpec, Perturbation};
use crate::error::{Error, Result};
use crate::qmop::WorldModelConfig;

/// Version of the configuration layout.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: &[&str] =
    &["smoke", "point-reach", "point-reach-noisy", "point-reach-shake", "four-rooms", "four-rooms-m1", "block-push"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub name: String,
    /// Standard deviation of the executed-action noise.
    pub action_noise: f64,
    pub pixels: bool,
    /// Overrides the environment's default when set.
    pub randomize_goal: Option<bool>,
    pub fixed_goal: Option<Vec<f64>>,
    pub episode_len: Option<usize>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            name: "point-reach".to_string(),
            action_noise: 0.0,
            pixels: false,
            randomize_goal: None,
            fixed_goal: None,
            episode_len: None,
        }
    }
}

impl EnvConfig {
    pub fn spec(&self) -> Result<EnvSpec> {
        let mut s = EnvSpec::named(&self.name).map_err(|e| Error::Config(format!("env: {e}")))?.with_pixels(self.pixels);
        s.action_noise = self.action_noise;
        if let Some(r) = self.randomize_goal {
            s.randomize_goal = r;
        }
        if let Some(g) = &self.fixed_goal {
            s.fixed_goal = Some(g.clone());
        }
        if let Some(t) = self.episode_len {
            s.episode_len = t;
        }
        s.validate().map_err(|e| Error::Config(format!("env: {e}")))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub episodes: usize,
    pub perturbation: Perturbation,
    /// Demonstration file to load instead of generating.
    pub file: Option<String>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { episodes: 5, perturbation: Perturbation::None, file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Environment steps collected in total.
    pub total_steps: usize,
    /// One update per this many environment steps.
    pub update_every: usize,
    /// Updates on the demonstrations alone before collection starts.
    pub pretrain_updates: usize,
    /// Replay capacity in episodes.
    pub buffer_capacity: usize,
    pub expert_ratio: f64,
    /// Emit a `train_step` record every this many updates.
    pub log_every: usize,
    /// Checkpoint every this many environment steps (`0`: final only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 150_000,
            update_every: 4,
            pretrain_updates: 0,
            buffer_capacity: 1000,
            expert_ratio: 0.25,
            log_every: 1,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Periodic evaluation cadence in environment steps (`0` disables).
    pub every_steps: usize,
    pub episodes: usize,
    /// Non-learning episodes evaluated after training.
    pub final_episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { every_steps: 5000, episodes: 10, final_episodes: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub agent: AgentVariant,
    pub output_dir: String,
    pub env: EnvConfig,
    pub demos: DemoConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub world_model: WorldModelConfig,
    pub behavior: BehaviorHyper,
    pub myoe: MyoeTraining,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            agent: AgentVariant::Myoe,
            output_dir: "runs/default".to_string(),
            env: EnvConfig::default(),
            demos: DemoConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            world_model: WorldModelConfig::default(),
            behavior: BehaviorHyper::default(),
            myoe: MyoeTraining::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

fn cfg_err(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{section}: {other}")),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.env.spec()?;
        self.world_model.validate().map_err(cfg_err("world_model"))?;
        self.behavior.validate().map_err(cfg_err("behavior"))?;
        self.myoe.validate().map_err(cfg_err("myoe"))?;
        self.baseline.validate().map_err(cfg_err("baseline"))?;
        let t = &self.train;
        if t.update_every == 0 || t.log_every == 0 || t.buffer_capacity == 0 {
            return Err(Error::Config("train: update_every, log_every and buffer_capacity must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&t.expert_ratio) {
            return Err(Error::Config("train: expert_ratio must lie in [0, 1]".into()));
        }
        if self.demos.episodes == 0 && self.demos.file.is_none() {
            return Err(Error::Config("demos: need at least one demonstration episode".into()));
        }
        Ok(())
    }

    /// Named desk-scale experiment settings.
    ///
    /// Every preset uses small networks so a run fits a single laptop core.
    pub fn preset(name: &str) -> Result<RunConfig> {
        let mut c = RunConfig {
            output_dir: format!("runs/{name}"),
            world_model: WorldModelConfig {
                deter_dim: 32,
                stoch_dim: 8,
                query_dim: 8,
                units: 32,
                components: 4,
                free_bits: 1.0,
                mix_coef: 0.01,
                mix_reg: 0.1,
                obs_scale: 10.0,
            },
            behavior: BehaviorHyper { units: 32, normalize_advantages: true, ..Default::default() },
            myoe: MyoeTraining { batch: 16, max_starts: 128, ..Default::default() },
            train: TrainConfig { pretrain_updates: 200, log_every: 10, ..Default::default() },
            ..Default::default()
        };
        match name {
            "smoke" => {
                c.train.total_steps = 600;
                c.train.update_every = 20;
                c.train.pretrain_updates = 5;
                c.train.log_every = 1;
                c.eval = EvalConfig { every_steps: 300, episodes: 2, final_episodes: 5 };
                c.world_model.deter_dim = 8;
                c.world_model.stoch_dim = 4;
                c.world_model.units = 8;
                c.behavior.units = 8;
                c.behavior.horizon = 5;
                c.myoe.batch = 4;
                c.myoe.seq_len = 8;
                c.baseline.batch = 4;
                c.baseline.seq_len = 8;
            }
            "point-reach" => {}
            "point-reach-noisy" => c.env.action_noise = 0.1,
            "point-reach-shake" => {
                c.demos.perturbation = Perturbation::Shake { steps: 30 };
                c.train.total_steps = 40_000;
            }
            "four-rooms" | "four-rooms-m1" => {
                c.env.name = "four-rooms".to_string();
                c.train.total_steps = 30_000;
                if name == "four-rooms-m1" {
                    c.world_model.components = 1;
                }
            }
            "block-push" => c.env.name = "block-push".to_string(),
            _ => {
                return Err(Error::Config(format!("unknown preset `{name}` (available: {})", PRESETS.join(", "))));
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            RunConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(matches!(RunConfig::preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = RunConfig::default();
        c.behavior.gamma = 2.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.env.name = "mars".into();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig { schema_version: 9, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
