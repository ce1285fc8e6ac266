//! Miniature goal-conditioned environments with sparse rewards.
//!
//! * `point-reach`: a point mass in `[-1, 1]²` must come within `ε` of a goal.
//! * `block-push`: the agent pushes a block onto a goal by contact.
//! * `four-rooms`: a 9×9 grid of four rooms joined by doorways; actions are
//!   4-vectors whose arg-max picks the move, so there are several shortest
//!   routes between opposite rooms.
//!
//! Reward is 1 exactly on the step the task is solved and 0 otherwise; the
//! episode ends on success or after `T` steps. Action noise and per-episode
//! goal changes are the two knobs that make cloned policies drift.

mod block_push;
mod four_rooms;
mod point_reach;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::replay::EpisodeRecord;
use crate::rng::{Noise, Stream};

pub use four_rooms::{bfs_distances, GRID, WALLS};

pub const ENV_NAMES: &[&str] = &["point-reach", "block-push", "four-rooms"];

/// Side length of the optional grayscale frame.
pub const PIXELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLayout {
    pub proprio: usize,
    pub object: usize,
    pub pixels: usize,
    pub goal: usize,
}

impl ObsLayout {
    pub fn total(&self) -> usize {
        self.proprio + self.object + self.pixels + self.goal
    }

    /// Blocks the decoder reconstructs (everything but the goal).
    pub fn sensory(&self) -> usize {
        self.proprio + self.object + self.pixels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub name: String,
    pub layout: ObsLayout,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    /// Episode length `T`.
    pub episode_len: usize,
    /// Success tolerance `ε` in distance units (cells for the grid).
    pub success_tol: f64,
    pub randomize_goal: bool,
    /// Standard deviation of Gaussian noise added to executed actions.
    pub action_noise: f64,
    /// Goal used when `randomize_goal` is off; `None` means the default goal.
    pub fixed_goal: Option<Vec<f64>>,
}

impl EnvSpec {
    /// Default specification for a registered environment.
    pub fn named(name: &str) -> Result<Self> {
        let spec = match name {
            "point-reach" => EnvSpec {
                name: name.to_string(),
                layout: ObsLayout { proprio: 4, object: 0, pixels: 0, goal: 2 },
                action_dim: 2,
                action_low: -1.0,
                action_high: 1.0,
                episode_len: 60,
                success_tol: 0.05,
                randomize_goal: true,
                action_noise: 0.0,
                fixed_goal: None,
            },
            "block-push" => EnvSpec {
                name: name.to_string(),
                layout: ObsLayout { proprio: 4, object: 2, pixels: 0, goal: 2 },
                action_dim: 2,
                action_low: -1.0,
                action_high: 1.0,
                episode_len: 100,
                success_tol: 0.08,
                randomize_goal: true,
                action_noise: 0.0,
                fixed_goal: None,
            },
            "four-rooms" => EnvSpec {
                name: name.to_string(),
                layout: ObsLayout { proprio: 2, object: 0, pixels: 0, goal: 2 },
                action_dim: 4,
                action_low: 0.0,
                action_high: 1.0,
                episode_len: 80,
                success_tol: 0.5,
                randomize_goal: false,
                action_noise: 0.0,
                fixed_goal: None,
            },
            _ => return Err(Error::UnknownEnv { name: name.to_string(), available: ENV_NAMES }),
        };
        Ok(spec)
    }

    /// Turn the 16×16 frame on or off.
    pub fn with_pixels(mut self, on: bool) -> Self {
        self.layout.pixels = if on { PIXELS * PIXELS } else { 0 };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !ENV_NAMES.contains(&self.name.as_str()) {
            return Err(Error::UnknownEnv { name: self.name.clone(), available: ENV_NAMES });
        }
        let reference = EnvSpec::named(&self.name)?;
        contract!(self.episode_len >= 1, "episode length must be at least 1");
        contract!(self.success_tol > 0.0, "success tolerance must be positive");
        contract!(
            self.action_low.is_finite() && self.action_high.is_finite() && self.action_low < self.action_high,
            "action bounds must be finite and ordered"
        );
        contract!(self.action_noise >= 0.0 && self.action_noise.is_finite(), "action noise must be ≥ 0");
        contract!(self.action_dim == reference.action_dim, "{} has {} action dims", self.name, reference.action_dim);
        contract!(
            self.layout.proprio == reference.layout.proprio
                && self.layout.object == reference.layout.object
                && self.layout.goal == reference.layout.goal
                && (self.layout.pixels == 0 || self.layout.pixels == PIXELS * PIXELS),
            "observation layout does not match {}",
            self.name
        );
        if let Some(g) = &self.fixed_goal {
            contract!(g.len() == self.layout.goal, "fixed goal needs {} values", self.layout.goal);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub proprio: Vec<f64>,
    pub object: Vec<f64>,
    pub pixels: Option<Vec<f64>>,
    pub goal: Vec<f64>,
}

impl Observation {
    /// `[proprio | object | pixels | goal]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.proprio.len() + self.object.len() + self.goal.len() + 256);
        v.extend_from_slice(&self.proprio);
        v.extend_from_slice(&self.object);
        if let Some(p) = &self.pixels {
            v.extend_from_slice(p);
        }
        v.extend_from_slice(&self.goal);
        v
    }

    pub fn unflatten(layout: &ObsLayout, flat: &[f64]) -> Result<Self> {
        contract!(flat.len() == layout.total(), "observation has {} values, layout needs {}", flat.len(), layout.total());
        let (p, rest) = flat.split_at(layout.proprio);
        let (o, rest) = rest.split_at(layout.object);
        let (px, g) = rest.split_at(layout.pixels);
        Ok(Observation {
            proprio: p.to_vec(),
            object: o.to_vec(),
            pixels: if layout.pixels > 0 { Some(px.to_vec()) } else { None },
            goal: g.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Point(point_reach::PointState),
    Block(block_push::BlockState),
    Grid(four_rooms::GridState),
}

/// A seeded environment instance.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    seed: u64,
    rng: Stream,
    state: State,
    t: usize,
    done: bool,
}

/// Build a deterministic environment. Identical seeds and action sequences
/// give bitwise-identical episodes.
pub fn make_env(spec: EnvSpec, seed: u64) -> Result<Environment> {
    spec.validate()?;
    let rng = crate::rng::stream(seed, "env");
    let state = match spec.name.as_str() {
        "point-reach" => State::Point(point_reach::PointState::default()),
        "block-push" => State::Block(block_push::BlockState::default()),
        _ => State::Grid(four_rooms::GridState::default()),
    };
    let mut env = Environment { spec, seed, rng, state, t: 0, done: true };
    env.reset();
    Ok(env)
}

impl Environment {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Start a new episode (new start state; new goal when randomized).
    pub fn reset(&mut self) -> Observation {
        let spec = &self.spec;
        match &mut self.state {
            State::Point(s) => s.reset(spec, &mut self.rng),
            State::Block(s) => s.reset(spec, &mut self.rng),
            State::Grid(s) => s.reset(spec, &mut self.rng),
        }
        self.t = 0;
        self.done = false;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let pixels = self.spec.layout.pixels > 0;
        match &self.state {
            State::Point(s) => s.observe(pixels),
            State::Block(s) => s.observe(pixels),
            State::Grid(s) => s.observe(pixels),
        }
    }

    pub fn goal(&self) -> Vec<f64> {
        self.observe().goal
    }

    /// Apply `action` (clipped into bounds, then perturbed by action noise).
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        contract!(action.len() == self.spec.action_dim, "action has {} dims, expected {}", action.len(), self.spec.action_dim);
        contract!(action.iter().all(|a| a.is_finite()), "action must be finite");
        let mut exec: Vec<f64> = action.iter().map(|a| a.clamp(self.spec.action_low, self.spec.action_high)).collect();
        if self.spec.action_noise > 0.0 {
            for a in exec.iter_mut() {
                *a += self.spec.action_noise * self.rng.normal();
            }
        }
        let success = match &mut self.state {
            State::Point(s) => s.step(&self.spec, &exec),
            State::Block(s) => s.step(&self.spec, &exec),
            State::Grid(s) => s.step(&self.spec, &exec),
        };
        self.t += 1;
        self.done = success || self.t >= self.spec.episode_len;
        Ok(StepResult {
            observation: self.observe(),
            reward: if success { 1.0 } else { 0.0 },
            done: self.done,
            success,
        })
    }

    /// Scripted expert action for the current state.
    pub fn expert_action(&mut self) -> Vec<f64> {
        let spec = &self.spec;
        match &self.state {
            State::Point(s) => s.expert(spec),
            State::Block(s) => s.expert(spec),
            State::Grid(s) => s.expert(spec, &mut self.rng),
        }
    }

    /// Distance from the solved state (cells for the grid).
    pub fn distance_to_goal(&self) -> f64 {
        match &self.state {
            State::Point(s) => s.distance(),
            State::Block(s) => s.distance(),
            State::Grid(s) => s.distance(),
        }
    }

    /// Minimum number of steps a noiseless expert needs from the current state.
    pub fn optimal_steps(&self) -> Option<usize> {
        let mut probe = self.clone();
        probe.spec.action_noise = 0.0;
        for k in 0..=probe.spec.episode_len * 4 {
            if probe.distance_to_goal() <= probe.spec.success_tol && k > 0 {
                return Some(k);
            }
            let a = probe.expert_action();
            let success = match &mut probe.state {
                State::Point(s) => s.step(&probe.spec, &a),
                State::Block(s) => s.step(&probe.spec, &a),
                State::Grid(s) => s.step(&probe.spec, &a),
            };
            if success {
                return Some(k + 1);
            }
        }
        None
    }

    /// Place the agent (continuous envs: coordinates; grid: cell x, y).
    pub fn place_agent(&mut self, pos: &[f64]) {
        match &mut self.state {
            State::Point(s) => s.pos = [pos[0], pos[1]],
            State::Block(s) => s.agent = [pos[0], pos[1]],
            State::Grid(s) => s.cell = (pos[0] as i32, pos[1] as i32),
        }
    }

    /// Place the goal (and refresh any goal-dependent expert tables).
    pub fn place_goal(&mut self, goal: &[f64]) {
        match &mut self.state {
            State::Point(s) => s.goal = [goal[0], goal[1]],
            State::Block(s) => s.goal = [goal[0], goal[1]],
            State::Grid(s) => s.set_goal((goal[0] as i32, goal[1] as i32)),
        }
    }
}

/// Rasterise points in `[-1, 1]²` into a 16×16 frame (brightest value wins).
pub(crate) fn render(points: &[([f64; 2], f64)]) -> Vec<f64> {
    let mut img = vec![0.0f64; PIXELS * PIXELS];
    for &(p, v) in points {
        let ix = (((p[0] + 1.0) * 0.5 * PIXELS as f64) as i64).clamp(0, PIXELS as i64 - 1) as usize;
        let iy = (((p[1] + 1.0) * 0.5 * PIXELS as f64) as i64).clamp(0, PIXELS as i64 - 1) as usize;
        let px = &mut img[iy * PIXELS + ix];
        *px = px.max(v);
    }
    img
}

/// How scripted demonstrations are degraded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Perturbation {
    None,
    /// Random full-magnitude actions for the first `steps` steps, then the expert.
    Shake { steps: usize },
    /// Gaussian noise with this standard deviation added to expert actions.
    Noise { sigma: f64 },
}

impl Perturbation {
    pub fn tag(&self) -> &'static str {
        match self {
            Perturbation::None => "none",
            Perturbation::Shake { .. } => "shake",
            Perturbation::Noise { .. } => "noise",
        }
    }

    /// Default shake length: 20% of the episode length.
    pub fn default_shake(spec: &EnvSpec) -> Self {
        Perturbation::Shake { steps: (spec.episode_len / 5).max(1) }
    }
}

pub const MAX_DEMO_ATTEMPTS: usize = 100;

/// Run the scripted expert for `n_episodes` successful episodes.
///
/// Failed attempts are discarded and retried, up to [`MAX_DEMO_ATTEMPTS`]
/// per episode. `rng` drives the perturbation only; start states and goals
/// come from the environment's own stream.
pub fn generate_demonstrations(
    env: &mut Environment,
    n_episodes: usize,
    perturbation: Perturbation,
    rng: &mut Stream,
) -> Result<Vec<EpisodeRecord>> {
    contract!(n_episodes >= 1, "need at least one demonstration episode");
    let mut out = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut accepted = None;
        for _ in 0..MAX_DEMO_ATTEMPTS {
            let rec = run_expert_episode(env, perturbation, rng)?;
            if rec.success {
                accepted = Some(rec);
                break;
            }
        }
        match accepted {
            Some(rec) => out.push(rec),
            None => return Err(Error::ExpertFailed { attempts: MAX_DEMO_ATTEMPTS }),
        }
    }
    Ok(out)
}

fn run_expert_episode(env: &mut Environment, perturbation: Perturbation, rng: &mut Stream) -> Result<EpisodeRecord> {
    let obs = env.reset();
    let spec = env.spec().clone();
    let mut rec = EpisodeRecord::start(&spec, env.seed(), &obs, true);
    loop {
        let mut action = env.expert_action();
        match perturbation {
            Perturbation::Shake { steps } if env.t() < steps => {
                action = shake_action(&spec, rng);
            }
            Perturbation::Noise { sigma } => {
                for a in action.iter_mut() {
                    *a = (*a + sigma * rng.normal()).clamp(spec.action_low, spec.action_high);
                }
            }
            _ => {}
        }
        let step = env.step(&action)?;
        rec.push(&step.observation, &action, step.reward, step.done);
        if step.done {
            rec.success = step.success;
            return Ok(rec);
        }
    }
}

fn shake_action(spec: &EnvSpec, rng: &mut Stream) -> Vec<f64> {
    if spec.name == "four-rooms" {
        let k = rng.random_range(0..spec.action_dim);
        let mut a = vec![spec.action_low; spec.action_dim];
        a[k] = spec.action_high;
        a
    } else {
        let angle = rng.random_range(0.0..core::f64::consts::TAU);
        vec![libm::cos(angle), libm::sin(angle)]
    }
}

#[cfg(test)]
mod tests;
