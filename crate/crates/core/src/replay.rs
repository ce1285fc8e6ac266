//! Episode storage and fixed-length sequence sampling.
//!
//! Records use a "transition into step `t`" layout: `observations[t]` is
//! what the agent saw at step `t`, `actions[t]` the action that led there
//! (zero at `t = 0`), and `rewards[t]` / `dones[t]` what arriving produced.
//! The action taken *from* step `t` is therefore `actions[t + 1]`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{EnvSpec, ObsLayout, Observation};
use crate::error::{contract, Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub env: String,
    pub seed: u64,
    pub layout: ObsLayout,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub success: bool,
    pub expert: bool,
    pub goal: Vec<f64>,
}

impl EpisodeRecord {
    /// A record holding only the initial observation.
    pub fn start(spec: &EnvSpec, seed: u64, obs: &Observation, expert: bool) -> Self {
        EpisodeRecord {
            env: spec.name.clone(),
            seed,
            layout: spec.layout,
            observations: vec![obs.flatten()],
            actions: vec![vec![0.0; spec.action_dim]],
            rewards: vec![0.0],
            dones: vec![false],
            success: false,
            expert,
            goal: obs.goal.clone(),
        }
    }

    pub fn push(&mut self, obs: &Observation, action: &[f64], reward: f64, done: bool) {
        self.observations.push(obs.flatten());
        self.actions.push(action.to_vec());
        self.rewards.push(reward);
        self.dones.push(done);
    }

    /// Number of stored observations (environment steps + 1).
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Environment steps taken.
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// `Σ γ^(k) r_(k+1)` over the steps taken.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.rewards.iter().skip(1).enumerate().map(|(k, r)| libm::pow(gamma, k as f64) * r).sum()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let bad = |m: String| Err(Error::BadRecord(m));
        if n == 0 {
            return bad("empty record".into());
        }
        if self.actions.len() != n || self.rewards.len() != n || self.dones.len() != n {
            return bad(format!(
                "array lengths differ: {} observations, {} actions, {} rewards, {} dones",
                n,
                self.actions.len(),
                self.rewards.len(),
                self.dones.len()
            ));
        }
        let od = self.layout.total();
        if let Some(o) = self.observations.iter().find(|o| o.len() != od) {
            return bad(format!("observation has {} values, layout needs {od}", o.len()));
        }
        let ad = self.action_dim();
        if ad == 0 || self.actions.iter().any(|a| a.len() != ad) {
            return bad("inconsistent action dimension".into());
        }
        if self.goal.len() != self.layout.goal {
            return bad("goal length does not match layout".into());
        }
        let finite = self.observations.iter().flatten().chain(self.actions.iter().flatten()).chain(&self.rewards);
        if !finite.into_iter().all(|v| v.is_finite()) {
            return bad("non-finite value".into());
        }
        if self.rewards.iter().any(|&r| r != 0.0 && r != 1.0) || self.episode_return() > 1.0 {
            return bad("sparse reward must be 0/1 with at most one 1".into());
        }
        if self.success != (self.episode_return() == 1.0) {
            return bad("success flag disagrees with rewards".into());
        }
        if self.expert && !self.success {
            return bad("expert episodes must be successful".into());
        }
        Ok(())
    }
}

/// `B × K` window batch, stored time-major: entry `(t, b)` lives at `t·B + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub batch: usize,
    pub len: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
    pub observations: Vec<f64>,
    /// Action that led into each step.
    pub actions: Vec<f64>,
    /// Action taken from each step (zero where none exists).
    pub next_actions: Vec<f64>,
    pub next_valid: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Success mask `m`: 1 on valid steps of successful episodes.
    pub success: Vec<f64>,
    /// Expert mask `e`: 1 on valid steps of expert episodes.
    pub expert: Vec<f64>,
    pub valid: Vec<f64>,
    pub episode_ids: Vec<u64>,
    /// Goal per sequence, `B × goal_dim`.
    pub goals: Vec<f64>,
}

impl SequenceBatch {
    pub fn idx(&self, t: usize, b: usize) -> usize {
        t * self.batch + b
    }

    /// Observations at time `t`, `B × obs_dim`.
    pub fn obs_at(&self, t: usize) -> &[f64] {
        let w = self.batch * self.obs_dim;
        &self.observations[t * w..(t + 1) * w]
    }

    pub fn actions_at(&self, t: usize) -> &[f64] {
        let w = self.batch * self.action_dim;
        &self.actions[t * w..(t + 1) * w]
    }

    pub fn next_actions_at(&self, t: usize) -> &[f64] {
        let w = self.batch * self.action_dim;
        &self.next_actions[t * w..(t + 1) * w]
    }

    pub fn column(v: &[f64], t: usize, batch: usize) -> &[f64] {
        &v[t * batch..(t + 1) * batch]
    }

    pub fn valid_steps(&self) -> usize {
        self.valid.iter().filter(|&&v| v > 0.0).count()
    }

    /// Build a batch from explicit windows `(record, start)`.
    pub fn from_windows(windows: &[(&EpisodeRecord, usize, u64)], len: usize) -> Result<Self> {
        contract!(!windows.is_empty() && len >= 1, "batch needs at least one window of length ≥ 1");
        let first = windows[0].0;
        let (od, ad, gd) = (first.layout.total(), first.action_dim(), first.goal.len());
        let b = windows.len();
        let mut sb = SequenceBatch {
            batch: b,
            len,
            obs_dim: od,
            action_dim: ad,
            goal_dim: gd,
            observations: vec![0.0; len * b * od],
            actions: vec![0.0; len * b * ad],
            next_actions: vec![0.0; len * b * ad],
            next_valid: vec![0.0; len * b],
            rewards: vec![0.0; len * b],
            success: vec![0.0; len * b],
            expert: vec![0.0; len * b],
            valid: vec![0.0; len * b],
            episode_ids: vec![u64::MAX; len * b],
            goals: vec![0.0; b * gd],
        };
        for (bi, &(rec, start, id)) in windows.iter().enumerate() {
            contract!(
                rec.layout.total() == od && rec.action_dim() == ad && rec.goal.len() == gd,
                "windows mix different environments"
            );
            sb.goals[bi * gd..(bi + 1) * gd].copy_from_slice(&rec.goal);
            for t in 0..len {
                let s = start + t;
                if s >= rec.len() {
                    break;
                }
                let i = t * b + bi;
                sb.observations[i * od..(i + 1) * od].copy_from_slice(&rec.observations[s]);
                sb.actions[i * ad..(i + 1) * ad].copy_from_slice(&rec.actions[s]);
                if s + 1 < rec.len() {
                    sb.next_actions[i * ad..(i + 1) * ad].copy_from_slice(&rec.actions[s + 1]);
                    sb.next_valid[i] = 1.0;
                }
                sb.rewards[i] = rec.rewards[s];
                sb.success[i] = if rec.success { 1.0 } else { 0.0 };
                sb.expert[i] = if rec.expert { 1.0 } else { 0.0 };
                sb.valid[i] = 1.0;
                sb.episode_ids[i] = id;
            }
        }
        Ok(sb)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Stored {
    id: u64,
    record: EpisodeRecord,
}

/// FIFO episode store; expert episodes are pinned and never evicted.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    expert_ratio: f64,
    pinned: Vec<Stored>,
    agent: VecDeque<Stored>,
    next_id: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, expert_ratio: f64) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            expert_ratio: expert_ratio.clamp(0.0, 1.0),
            pinned: Vec::new(),
            agent: VecDeque::new(),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pinned.len() + self.agent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn expert_ratio(&self) -> f64 {
        self.expert_ratio
    }

    pub fn expert_episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.pinned.iter().map(|s| &s.record)
    }

    pub fn agent_episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.agent.iter().map(|s| &s.record)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.expert_episodes().chain(self.agent_episodes())
    }

    pub fn append_episode(&mut self, record: EpisodeRecord) -> Result<()> {
        record.validate()?;
        if let Some(s) = self.pinned.first().or(self.agent.front()) {
            if s.record.layout != record.layout || s.record.action_dim() != record.action_dim() {
                return Err(Error::BadRecord("record does not match the buffer's environment".into()));
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        if record.expert {
            self.pinned.push(Stored { id, record });
        } else {
            self.agent.push_back(Stored { id, record });
        }
        while self.len() > self.capacity && !self.agent.is_empty() {
            self.agent.pop_front();
        }
        Ok(())
    }

    /// Sample `B` windows of length `K`. Each slot draws a pinned expert
    /// episode with probability `expert_ratio` (always, when there are no
    /// agent episodes), otherwise a uniform agent episode; the start offset
    /// is uniform over positions that keep the window inside the episode.
    pub fn sample_sequences(&self, batch: usize, len: usize, rng: &mut Stream) -> Result<SequenceBatch> {
        contract!(batch >= 1 && len >= 1, "batch size and sequence length must be ≥ 1");
        contract!(!self.is_empty(), "cannot sample from an empty buffer");
        let mut windows = Vec::with_capacity(batch);
        for _ in 0..batch {
            let use_expert = !self.pinned.is_empty()
                && (self.agent.is_empty() || rng.random::<f64>() < self.expert_ratio);
            let s = if use_expert {
                &self.pinned[rng.random_range(0..self.pinned.len())]
            } else {
                &self.agent[rng.random_range(0..self.agent.len())]
            };
            let max_start = s.record.len().saturating_sub(len);
            let start = if max_start == 0 { 0 } else { rng.random_range(0..=max_start) };
            windows.push((&s.record, start, s.id));
        }
        SequenceBatch::from_windows(&windows, len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_demonstrations, make_env, EnvSpec, Perturbation};
    use crate::rng::stream;

    fn demos(n: usize) -> Vec<EpisodeRecord> {
        let mut env = make_env(EnvSpec::named("point-reach").unwrap(), 1).unwrap();
        generate_demonstrations(&mut env, n, Perturbation::None, &mut stream(1, "demo")).unwrap()
    }

    fn as_agent(mut r: EpisodeRecord, success: bool) -> EpisodeRecord {
        r.expert = false;
        if !success {
            for x in r.rewards.iter_mut() {
                *x = 0.0;
            }
            r.success = false;
        }
        r
    }

    #[test]
    fn experts_survive_eviction() {
        let d = demos(6);
        let mut buf = ReplayBuffer::new(20, 0.25);
        for r in d.iter().take(5) {
            buf.append_episode(r.clone()).unwrap();
        }
        for _ in 0..50 {
            buf.append_episode(as_agent(d[5].clone(), false)).unwrap();
        }
        assert_eq!(buf.expert_episodes().count(), 5);
        assert_eq!(buf.len(), 20);
    }

    #[test]
    fn fifo_evicts_oldest_agent_episode() {
        let d = demos(1);
        let mut buf = ReplayBuffer::new(100, 0.25);
        for i in 0..101 {
            let mut r = as_agent(d[0].clone(), false);
            r.seed = i;
            buf.append_episode(r).unwrap();
        }
        assert_eq!(buf.len(), 100);
        assert_eq!(buf.agent_episodes().next().unwrap().seed, 1);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut r = demos(1).remove(0);
        r.rewards.pop();
        let mut buf = ReplayBuffer::new(10, 0.25);
        assert!(matches!(buf.append_episode(r), Err(Error::BadRecord(_))));
    }

    #[test]
    fn masks_follow_episode_flags() {
        let d = demos(1);
        let mut rng = stream(0, "s");
        let mut buf = ReplayBuffer::new(10, 0.0);
        buf.append_episode(as_agent(d[0].clone(), true)).unwrap();
        let b = buf.sample_sequences(4, 8, &mut rng).unwrap();
        for i in 0..b.valid.len() {
            assert_eq!(b.success[i], b.valid[i]);
            assert_eq!(b.expert[i], 0.0);
        }
        let mut buf = ReplayBuffer::new(10, 0.0);
        buf.append_episode(as_agent(d[0].clone(), false)).unwrap();
        let b = buf.sample_sequences(4, 8, &mut rng).unwrap();
        assert!(b.success.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn expert_ratio_frequency() {
        let d = demos(1);
        let mut buf = ReplayBuffer::new(100, 0.25);
        buf.append_episode(d[0].clone()).unwrap();
        for _ in 0..9 {
            buf.append_episode(as_agent(d[0].clone(), false)).unwrap();
        }
        let mut rng = stream(5, "ratio");
        let b = buf.sample_sequences(10_000, 1, &mut rng).unwrap();
        let freq = b.expert.iter().sum::<f64>() / 10_000.0;
        assert!((freq - 0.25).abs() <= 0.02, "expert frequency {freq}");
    }

    #[test]
    fn bad_batch_shape_is_a_contract_error() {
        let mut buf = ReplayBuffer::new(10, 0.25);
        buf.append_episode(demos(1).remove(0)).unwrap();
        assert!(buf.sample_sequences(0, 4, &mut stream(0, "x")).is_err());
        assert!(buf.sample_sequences(4, 0, &mut stream(0, "x")).is_err());
        assert!(ReplayBuffer::new(10, 0.25).sample_sequences(1, 1, &mut stream(0, "x")).is_err());
    }
}
