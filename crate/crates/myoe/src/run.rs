//! Run directories, trial fan-out and checkpoint evaluation.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use myoe_core::agent::{Agent, AgentVariant};
use myoe_core::config::RunConfig;
use myoe_core::env::{generate_demonstrations, make_env, Perturbation};
use myoe_core::harness::{
    build_agent, evaluate, generate_run_demos, train, EvalSummary, MetricsRecord, RecordKind, TrainOutcome,
};
use myoe_core::replay::EpisodeRecord;
use myoe_core::rng::{derive_seed, stream};
use myoe_core::{Error, Result};

use crate::log::{append_records, RunSink};
use crate::{checkpoint, demos};

pub const CONFIG_FILE: &str = "config.toml";
pub const DEMO_FILE: &str = "demos.ndjson";

/// Parse a TOML run config. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn config_to_toml(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Io(e.to_string()))
}

/// Demonstrations named by the config, or freshly generated ones.
pub fn run_demos(config: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    let Some(file) = &config.demos.file else {
        return generate_run_demos(config);
    };
    let (header, episodes) = demos::load_demos(Path::new(file))?;
    let spec = config.env.spec()?;
    if header.env != spec.name || header.layout != spec.layout || header.action_dim != spec.action_dim {
        return Err(Error::Config(format!("demos.file `{file}` holds `{}` episodes, config runs `{}`", header.env, spec.name)));
    }
    Ok(episodes)
}

/// Train one run into `dir`: `config.toml`, `demos.ndjson`, `log.ndjson`,
/// periodic checkpoints and `final.myoe`.
pub fn train_run(config: &RunConfig, dir: &Path, wall_clock: bool) -> Result<TrainOutcome> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut config = config.clone();
    config.output_dir = dir.display().to_string();
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, config_to_toml(&config)?).map_err(|e| Error::Io(format!("{}: {e}", cfg_path.display())))?;
    let episodes = run_demos(&config)?;
    demos::save_demos(&dir.join(DEMO_FILE), &config.env.spec()?, config.demos.perturbation, &episodes)?;
    let mut sink = RunSink::create(dir, &config, wall_clock)?;
    let out = train(&config, episodes, &mut sink);
    sink.flush()?;
    out
}

/// Parallel trial cap: `MYOE_THREADS`, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("MYOE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run `jobs` on at most `threads` worker threads, keeping input order.
pub fn run_parallel<J, R, F>(jobs: Vec<J>, threads: usize, work: F) -> Vec<R>
where
    J: Send + Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = work(job);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every job ran")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub dir: PathBuf,
    pub summary: EvalSummary,
    pub steps: u64,
}

/// One run per seed under `root/seed-<n>`, or directly in `root` for a
/// single seed.
pub fn train_trials(config: &RunConfig, seeds: &[u64], root: &Path, wall_clock: bool) -> Result<Vec<TrialResult>> {
    let jobs: Vec<(u64, PathBuf)> = seeds
        .iter()
        .map(|&s| (s, if seeds.len() == 1 { root.to_path_buf() } else { root.join(format!("seed-{s}")) }))
        .collect();
    run_parallel(jobs, thread_cap(), |(seed, dir)| {
        let mut c = config.clone();
        c.seed = *seed;
        let out = train_run(&c, dir, wall_clock)?;
        Ok(TrialResult { seed: *seed, dir: dir.clone(), summary: out.summary, steps: out.steps })
    })
    .into_iter()
    .collect()
}

/// Rebuild the agent a checkpoint was written from.
pub fn restore_agent(ckpt: &checkpoint::Checkpoint) -> Result<Box<dyn Agent>> {
    let mut agent = build_agent(&ckpt.config)?;
    checkpoint::restore(agent.params_mut(), &ckpt.params)?;
    Ok(agent)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Evaluate on this environment instead of the one the run trained on.
    pub env: Option<String>,
    /// Append `eval_episode` records here.
    pub log: Option<PathBuf>,
}

/// Greedy evaluation of a checkpoint on a fresh environment seeded by `seed`.
pub fn evaluate_checkpoint(path: &Path, episodes: usize, seed: u64, opts: &EvalOptions) -> Result<EvalSummary> {
    let ckpt = checkpoint::load(path)?;
    let mut agent = restore_agent(&ckpt)?;
    let mut env_cfg = ckpt.config.env.clone();
    if let Some(name) = &opts.env {
        env_cfg.name = name.clone();
    }
    let spec = env_cfg.spec()?;
    let trained = ckpt.config.env.spec()?;
    if spec.layout != trained.layout || spec.action_dim != trained.action_dim {
        return Err(Error::Config(format!(
            "checkpoint was trained on `{}` ({} observation values, {} actions); `{}` has {} and {}",
            trained.name,
            trained.layout.total(),
            trained.action_dim,
            spec.name,
            spec.layout.total(),
            spec.action_dim
        )));
    }
    let mut env = make_env(spec, derive_seed(seed, "eval-env"))?;
    let outcomes = evaluate(agent.as_mut(), &mut env, episodes, ckpt.config.behavior.gamma)?;
    if let Some(log) = &opts.log {
        let records: Vec<MetricsRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut r = MetricsRecord::new(RecordKind::EvalEpisode, ckpt.config.agent, seed, ckpt.step);
                r.episode = Some(i as u64);
                r.episode_return = Some(o.episode_return);
                r.discounted_return = Some(o.discounted_return);
                r.success = Some(o.success);
                r.episode_len = Some(o.steps);
                r.mixture_entropy = o.mixture_entropy;
                r
            })
            .collect();
        append_records(log, &records)?;
    }
    Ok(EvalSummary::from_outcomes(&outcomes))
}

/// `--perturb` names. `shake` uses 20% of the episode; `noise` σ = 0.1.
pub fn perturbation_named(name: &str, env: &str) -> Result<Perturbation> {
    let spec = myoe_core::env::EnvSpec::named(env).map_err(|e| Error::Config(e.to_string()))?;
    match name {
        "none" => Ok(Perturbation::None),
        "shake" => Ok(Perturbation::default_shake(&spec)),
        "noise" => Ok(Perturbation::Noise { sigma: 0.1 }),
        other => Err(Error::Config(format!("unknown perturbation `{other}` (none, shake, noise)"))),
    }
}

/// Generate `episodes` scripted demonstrations and write them to `out`.
pub fn demo_gen(env: &str, episodes: usize, perturbation: Perturbation, seed: u64, out: &Path) -> Result<()> {
    let spec = myoe_core::env::EnvSpec::named(env).map_err(|e| Error::Config(e.to_string()))?;
    let mut e = make_env(spec.clone(), derive_seed(seed, "demo-env"))?;
    let eps = generate_demonstrations(&mut e, episodes, perturbation, &mut stream(seed, "demo-perturbation"))?;
    demos::save_demos(out, &spec, perturbation, &eps)
}

pub fn variant_named(tag: &str) -> Result<AgentVariant> {
    AgentVariant::from_tag(tag).ok_or_else(|| {
        let all: Vec<&str> = AgentVariant::ALL.iter().map(|v| v.tag()).collect();
        Error::Config(format!("unknown agent `{tag}` (available: {})", all.join(", ")))
    })
}
