//! Behavior-cloning comparison agents.
//!
//! MBC clones actions from the concatenated observation blocks with an
//! MLP; MBC-RNN reads a recurrent summary of the observation history;
//! MBC-VAE adds an observation autoencoder whose latent feeds the policy.
//! All three also clone their own successful episodes (self-imitation).
//! PPO-BC is a model-free clipped-surrogate actor-critic on environment
//! rollouts with the cloning loss added at weight `β`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ActMode, Agent, AgentVariant, Policy, UpdateStats};
use crate::behavior::{gae, td_errors, Actor, BehaviorHyper};
use crate::env::Environment;
use crate::error::{contract, Result};
use crate::numerics::gaussian::{kl_vars, unit_nll_vars, GaussianVars};
use crate::numerics::{Adam, AdamConfig, Dense, GruCell, Matrix, Mlp, Owner, OwnerMask, ParameterSet, Tape, Var};
use crate::qmop::ModelDims;
use crate::replay::{EpisodeRecord, ReplayBuffer, SequenceBatch};
use crate::rng::{Noise, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Hidden width; `0` sizes the network to match the MYOE parameter count.
    pub units: usize,
    /// VAE latent width.
    pub latent_dim: usize,
    /// Weight of the cloning loss in PPO-BC.
    pub bc_weight: f64,
    /// Also clone the agent's own successful episodes.
    pub self_imitation: bool,
    /// Gaussian exploration noise of the MBC family during collection.
    pub explore_std: f64,
    pub kl_weight: f64,
    pub lr: f64,
    pub value_lr: f64,
    pub batch: usize,
    pub seq_len: usize,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            units: 0,
            latent_dim: 8,
            bc_weight: 0.5,
            self_imitation: true,
            explore_std: 0.1,
            kl_weight: 1.0,
            lr: 1e-3,
            value_lr: 1e-3,
            batch: 16,
            seq_len: 32,
            ppo_clip: 0.2,
            ppo_epochs: 4,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.latent_dim >= 1 && self.batch >= 1 && self.seq_len >= 1, "baseline sizes must be positive");
        contract!(self.lr > 0.0 && self.value_lr > 0.0, "learning rates must be positive");
        contract!(
            self.bc_weight >= 0.0 && self.explore_std >= 0.0 && self.kl_weight >= 0.0 && self.ppo_clip >= 0.0,
            "baseline coefficients must be ≥ 0"
        );
        contract!(self.ppo_epochs >= 1, "need at least one PPO epoch");
        Ok(())
    }
}

/// Which `(t, b)` entries the cloning loss reads: expert steps always,
/// successful steps when self-imitation is on, and only where a next
/// action exists.
pub fn bc_mask(batch: &SequenceBatch, self_imitation: bool) -> Vec<f64> {
    (0..batch.valid.len())
        .map(|i| {
            let pick = if self_imitation { batch.success[i].max(batch.expert[i]) } else { batch.expert[i] };
            pick * batch.next_valid[i]
        })
        .collect()
}

/// `mean_{mask} Σ_j (pred_j − target_j)²`; 0 when the mask is empty.
pub fn bc_loss(pred: &[f64], targets: &[f64], mask: &[f64], action_dim: usize) -> f64 {
    let n: f64 = mask.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    let s: f64 = mask
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let p = &pred[i * action_dim..(i + 1) * action_dim];
            let t = &targets[i * action_dim..(i + 1) * action_dim];
            m * p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    s / n
}

fn mlp_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Trainable scalars of a baseline at hidden width `units`.
pub fn parameter_count(variant: AgentVariant, dims: ModelDims, units: usize, latent: usize) -> usize {
    let (o, a, u, z) = (dims.obs_dim, dims.action_dim, units, latent);
    match variant {
        AgentVariant::Mbc => mlp_count(&[o, u, u, a]),
        AgentVariant::MbcRnn => (o * u + u) + 6 * u * u + 6 * u + mlp_count(&[u, u, a]),
        AgentVariant::MbcVae => mlp_count(&[o, u, 2 * z]) + mlp_count(&[z, u, o]) + mlp_count(&[o + z, u, u, a]),
        AgentVariant::PpoBc => mlp_count(&[o, u, u, 2 * a]) + mlp_count(&[o, u, u, 1]),
        AgentVariant::Myoe => 0,
    }
}

/// Hidden width whose parameter count is closest to `target`.
pub fn parity_units(variant: AgentVariant, dims: ModelDims, latent: usize, target: usize) -> usize {
    (1..=4096)
        .min_by_key(|&u| parameter_count(variant, dims, u, latent).abs_diff(target))
        .unwrap_or(1)
}

#[derive(Debug, Clone)]
enum Model {
    Mbc { policy: Mlp },
    Rnn { input: Dense, gru: GruCell, head: Mlp },
    Vae { encoder: Mlp, decoder: Mlp, policy: Mlp },
    Ppo { actor: Actor, critic: Mlp },
}

/// A rollout step collected in explore mode, waiting for its episode to end.
#[derive(Debug, Clone)]
struct Pending {
    obs: Vec<f64>,
    u: Vec<f64>,
    eps: Vec<f64>,
    log_prob: f64,
}

/// Finished on-policy data for the next PPO update.
#[derive(Debug, Clone, Default)]
struct OnPolicy {
    obs: Vec<f64>,
    u: Vec<f64>,
    eps: Vec<f64>,
    log_prob: Vec<f64>,
    advantages: Vec<f64>,
    targets: Vec<f64>,
}

impl OnPolicy {
    fn len(&self) -> usize {
        self.log_prob.len()
    }
}

#[derive(Debug, Clone)]
pub struct BaselineAgent {
    pub variant: AgentVariant,
    pub config: BaselineConfig,
    pub units: usize,
    pub dims: ModelDims,
    pub params: ParameterSet<f64>,
    gamma: f64,
    lambda: f64,
    alpha_ent: f64,
    bounds: (f64, f64),
    model: Model,
    opt: Adam,
    value_opt: Adam,
    hidden: Matrix<f64>,
    pending: Vec<Pending>,
    rollouts: OnPolicy,
}

impl BaselineAgent {
    /// `parity_target` is the MYOE parameter count used when
    /// `config.units == 0`.
    pub fn new<R: Rng + ?Sized>(
        variant: AgentVariant,
        config: BaselineConfig,
        hyper: &BehaviorHyper,
        dims: ModelDims,
        bounds: (f64, f64),
        parity_target: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        contract!(variant != AgentVariant::Myoe, "MYOE is not a baseline");
        contract!(bounds.0 < bounds.1, "action bounds are empty");
        let z = config.latent_dim;
        let units = if config.units == 0 { parity_units(variant, dims, z, parity_target) } else { config.units };
        let (o, a, u) = (dims.obs_dim, dims.action_dim, units);
        let mut params = ParameterSet::new();
        let p = Owner::Policy;
        let model = match variant {
            AgentVariant::Mbc => Model::Mbc { policy: Mlp::new(&mut params, "bc.policy", &[o, u, u, a], p, rng)? },
            AgentVariant::MbcRnn => Model::Rnn {
                input: Dense::new(&mut params, "bc.input", o, u, p, rng)?,
                gru: GruCell::new(&mut params, "bc.gru", u, u, p, rng)?,
                head: Mlp::new(&mut params, "bc.head", &[u, u, a], p, rng)?,
            },
            AgentVariant::MbcVae => Model::Vae {
                encoder: Mlp::new(&mut params, "bc.encoder", &[o, u, 2 * z], p, rng)?,
                decoder: Mlp::new(&mut params, "bc.decoder", &[z, u, o], p, rng)?,
                policy: Mlp::new(&mut params, "bc.policy", &[o + z, u, u, a], p, rng)?,
            },
            AgentVariant::PpoBc => {
                let net = Mlp::new(&mut params, "policy.net", &[o, u, u, 2 * a], p, rng)?;
                let actor = Actor { net, action_dim: a, low: bounds.0, high: bounds.1 };
                let critic = Mlp::new(&mut params, "value.net", &[o, u, u, 1], Owner::Value, rng)?;
                Model::Ppo { actor, critic }
            }
            AgentVariant::Myoe => unreachable!(),
        };
        let adam = |lr| Adam::new(AdamConfig { lr, ..Default::default() });
        Ok(BaselineAgent {
            variant,
            opt: adam(config.lr),
            value_opt: adam(config.value_lr),
            config,
            units,
            dims,
            params,
            gamma: hyper.gamma,
            lambda: hyper.lambda,
            alpha_ent: hyper.alpha_ent,
            bounds,
            model,
            hidden: Matrix::zeros(1, units),
            pending: Vec::new(),
            rollouts: OnPolicy::default(),
        })
    }

    fn squash(&self, tape: &mut Tape<f64>, x: Var) -> Var {
        let t = tape.tanh(x);
        let t = tape.scale(t, 0.5 * (self.bounds.1 - self.bounds.0));
        tape.shift(t, 0.5 * (self.bounds.1 + self.bounds.0))
    }

    /// Mean actions for every `(t, b)` of a batch, time-major, plus the
    /// autoencoder loss for MBC-VAE.
    fn batch_actions(&self, tape: &mut Tape<f64>, batch: &SequenceBatch, noise: &mut dyn Noise) -> (Vec<Var>, Option<Var>) {
        let (b, od) = (batch.batch, batch.obs_dim);
        let p = &self.params;
        let mut out = Vec::with_capacity(batch.len);
        let mut aux: Option<Var> = None;
        let mut h = tape.constant(Matrix::zeros(b, self.units));
        for t in 0..batch.len {
            let obs = tape.constant_f64(b, od, batch.obs_at(t));
            let raw = match &self.model {
                Model::Mbc { policy } => policy.forward(tape, p, obs),
                Model::Rnn { input, gru, head } => {
                    let x = input.forward(tape, p, obs);
                    let x = tape.tanh(x);
                    h = gru.forward(tape, p, h, x);
                    head.forward(tape, p, h)
                }
                Model::Vae { encoder, decoder, policy } => {
                    let z = self.config.latent_dim;
                    let e = encoder.forward(tape, p, obs);
                    let q = GaussianVars::from_head(tape, e, z);
                    let s = q.sample(tape, noise);
                    let recon = decoder.forward(tape, p, s);
                    let nll = unit_nll_vars(tape, obs, recon);
                    let zero = tape.constant(Matrix::zeros(b, z));
                    let prior = GaussianVars { mean: zero, log_std: zero };
                    let kl = kl_vars(tape, q, prior);
                    let kl = tape.scale(kl, self.config.kl_weight);
                    let term = tape.add(nll, kl);
                    let valid = tape.constant_f64(b, 1, SequenceBatch::column(&batch.valid, t, b));
                    let term = tape.mul(term, valid);
                    let term = tape.sum(term);
                    aux = Some(aux.map_or(term, |a| tape.add(a, term)));
                    let x = tape.concat(&[obs, s]);
                    policy.forward(tape, p, x)
                }
                Model::Ppo { actor, .. } => actor.distribution(tape, p, obs).mean,
            };
            out.push(self.squash(tape, raw));
        }
        let aux = aux.map(|a| tape.scale(a, 1.0 / batch.valid_steps().max(1) as f64));
        (out, aux)
    }

    /// Cloning loss over a batch on `tape`, `None` when no step is eligible.
    pub fn bc_loss_vars(&self, tape: &mut Tape<f64>, batch: &SequenceBatch, actions: &[Var]) -> Option<Var> {
        let mask = bc_mask(batch, self.config.self_imitation);
        let n: f64 = mask.iter().sum();
        if n == 0.0 {
            return None;
        }
        let (b, ad) = (batch.batch, batch.action_dim);
        let mut acc: Option<Var> = None;
        for (t, &a) in actions.iter().enumerate() {
            let target = tape.constant_f64(b, ad, batch.next_actions_at(t));
            let d = tape.sub(a, target);
            let d2 = tape.square(d);
            let s = tape.sum_cols(d2);
            let m = tape.constant_f64(b, 1, SequenceBatch::column(&mask, t, b));
            let s = tape.mul(s, m);
            let s = tape.sum(s);
            acc = Some(acc.map_or(s, |x| tape.add(x, s)));
        }
        acc.map(|s| tape.scale(s, 1.0 / n))
    }

    fn ppo_update(&mut self, stats: &mut UpdateStats) -> Result<()> {
        let Model::Ppo { actor, critic } = &self.model else { return Ok(()) };
        let data = core::mem::take(&mut self.rollouts);
        let n = data.len();
        if n == 0 {
            return Ok(());
        }
        let (od, ad) = (self.dims.obs_dim, self.dims.action_dim);
        let mean = data.advantages.iter().sum::<f64>() / n as f64;
        let var = data.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let adv: Vec<f64> = data.advantages.iter().map(|a| (a - mean) / (libm::sqrt(var) + 1e-8)).collect();
        let (mut surrogate, mut value) = (0.0, 0.0);
        for _ in 0..self.config.ppo_epochs {
            let mut tape = Tape::new(OwnerMask::only(Owner::Policy));
            let obs = tape.constant_f64(n, od, &data.obs);
            let dist = actor.distribution(&mut tape, &self.params, obs);
            let u = tape.constant_f64(n, ad, &data.u);
            let lp = actor.log_prob(&mut tape, dist, u);
            let old = tape.constant_f64(n, 1, &data.log_prob);
            let diff = tape.sub(lp, old);
            let ratio = tape.exp(diff);
            let a = tape.constant_f64(n, 1, &adv);
            let unclipped = tape.mul(ratio, a);
            let clip = self.config.ppo_clip;
            let clipped = tape.clamp(ratio, 1.0 - clip, 1.0 + clip);
            let clipped = tape.mul(clipped, a);
            // min(x, y) = x − max(x − y, 0)
            let gap = tape.sub(unclipped, clipped);
            let gap = tape.max_scalar(gap, 0.0);
            let obj = tape.sub(unclipped, gap);
            let obj = tape.mean(obj);
            let eps = tape.constant_f64(n, ad, &data.eps);
            let ent = actor.entropy(&mut tape, dist, eps);
            let ent = tape.mean(ent);
            let ent = tape.scale(ent, self.alpha_ent);
            let total = tape.add(obj, ent);
            let loss = tape.neg(total);
            tape.check_finite(loss, "ppo surrogate")?;
            surrogate = tape.scalar(loss);
            let grads = tape.gradients(loss)?;
            self.opt.step(&mut self.params, &grads)?;

            let mut tape = Tape::new(OwnerMask::only(Owner::Value));
            let obs = tape.constant_f64(n, od, &data.obs);
            let v = critic.forward(&mut tape, &self.params, obs);
            let g = tape.constant_f64(n, 1, &data.targets);
            let d = tape.sub(v, g);
            let d2 = tape.square(d);
            let loss = tape.mean(d2);
            tape.check_finite(loss, "ppo value loss")?;
            value = tape.scalar(loss);
            let grads = tape.gradients(loss)?;
            self.value_opt.step(&mut self.params, &grads)?;
        }
        stats.extend([("ppo_surrogate", surrogate), ("value", value), ("ppo_steps", n as f64)]);
        Ok(())
    }
}

impl Policy for BaselineAgent {
    fn begin_episode(&mut self, _goal: &[f64]) -> Result<()> {
        self.hidden = Matrix::zeros(1, self.units);
        self.pending.clear();
        Ok(())
    }

    fn act(&mut self, _env: &mut Environment, obs: &[f64], mode: ActMode, noise: &mut dyn Noise) -> Result<Vec<f64>> {
        let (od, ad) = (self.dims.obs_dim, self.dims.action_dim);
        contract!(obs.len() == od, "observation has {} values, agent expects {od}", obs.len());
        let mut tape = Tape::frozen();
        let x = tape.constant_f64(1, od, obs);
        let p = &self.params;
        let raw = match &self.model {
            Model::Mbc { policy } => policy.forward(&mut tape, p, x),
            Model::Rnn { input, gru, head } => {
                let e = input.forward(&mut tape, p, x);
                let e = tape.tanh(e);
                let h = tape.constant(self.hidden.clone());
                let h = gru.forward(&mut tape, p, h, e);
                self.hidden = tape.value(h).clone();
                head.forward(&mut tape, p, h)
            }
            Model::Vae { encoder, policy, .. } => {
                let e = encoder.forward(&mut tape, p, x);
                let q = GaussianVars::from_head(&mut tape, e, self.config.latent_dim);
                let xz = tape.concat(&[x, q.mean]);
                policy.forward(&mut tape, p, xz)
            }
            Model::Ppo { actor, .. } => {
                let dist = actor.distribution(&mut tape, p, x);
                if mode == ActMode::Greedy {
                    dist.mean
                } else {
                    let mut eps = vec![0.0; ad];
                    noise.fill(&mut eps);
                    let e = tape.constant_f64(1, ad, &eps);
                    let u = dist.sample_with(&mut tape, e);
                    let lp = actor.log_prob(&mut tape, dist, u);
                    tape.check_finite(lp, "policy log-probability")?;
                    self.pending.push(Pending {
                        obs: obs.to_vec(),
                        u: tape.value(u).to_f64(),
                        eps,
                        log_prob: tape.scalar(lp),
                    });
                    u
                }
            }
        };
        let a = self.squash(&mut tape, raw);
        tape.check_finite(a, "policy action")?;
        let mut action = tape.value(a).to_f64();
        let explore = mode == ActMode::Explore && self.variant != AgentVariant::PpoBc && self.config.explore_std > 0.0;
        if explore {
            for v in action.iter_mut() {
                *v = (*v + self.config.explore_std * noise.normal()).clamp(self.bounds.0, self.bounds.1);
            }
        }
        Ok(action)
    }
}

impl Agent for BaselineAgent {
    fn variant(&self) -> AgentVariant {
        self.variant
    }

    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut Stream) -> Result<UpdateStats> {
        let mut stats = UpdateStats::new();
        self.ppo_update(&mut stats)?;
        let batch = buffer.sample_sequences(self.config.batch, self.config.seq_len, rng)?;
        let mut tape = Tape::new(OwnerMask::only(Owner::Policy));
        let (actions, aux) = self.batch_actions(&mut tape, &batch, rng);
        let bc = self.bc_loss_vars(&mut tape, &batch, &actions);
        let weight = if self.variant == AgentVariant::PpoBc { self.config.bc_weight } else { 1.0 };
        let bc_scaled = bc.map(|l| tape.scale(l, weight));
        let total = match (bc_scaled, aux) {
            (Some(a), Some(b)) => Some(tape.add(a, b)),
            (a, b) => a.or(b),
        };
        stats.push(("bc", bc.map_or(0.0, |l| tape.scalar(l))));
        if let Some(a) = aux {
            stats.push(("vae", tape.scalar(a)));
        }
        if let Some(total) = total {
            tape.check_finite(total, "cloning loss")?;
            let grads = tape.gradients(total)?;
            self.opt.step(&mut self.params, &grads)?;
        }
        Ok(stats)
    }

    fn end_episode(&mut self, record: &EpisodeRecord) -> Result<()> {
        let Model::Ppo { critic, .. } = &self.model else { return Ok(()) };
        let pending = core::mem::take(&mut self.pending);
        if pending.len() != record.steps() || pending.is_empty() {
            return Ok(());
        }
        let od = self.dims.obs_dim;
        let mut tape = Tape::frozen();
        let flat: Vec<f64> = record.observations.iter().flatten().copied().collect();
        let obs = tape.constant_f64(record.len(), od, &flat);
        let v = critic.forward(&mut tape, &self.params, obs);
        tape.check_finite(v, "value estimate")?;
        let mut values = tape.value(v).to_f64();
        if record.success {
            *values.last_mut().expect("nonempty") = 0.0;
        }
        let rewards = &record.rewards[1..];
        let deltas = td_errors(rewards, &values, self.gamma)?;
        let g = gae(&deltas, &values, self.gamma, self.lambda)?;
        let r = &mut self.rollouts;
        for (k, p) in pending.into_iter().enumerate() {
            r.obs.extend_from_slice(&p.obs);
            r.u.extend_from_slice(&p.u);
            r.eps.extend_from_slice(&p.eps);
            r.log_prob.push(p.log_prob);
            r.advantages.push(g.advantages[k]);
            r.targets.push(g.targets[k]);
        }
        Ok(())
    }

    fn params(&self) -> &ParameterSet<f64> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet<f64> {
        &mut self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_demonstrations, make_env, EnvSpec, Perturbation};
    use crate::rng::stream;

    fn dims() -> ModelDims {
        ModelDims { obs_dim: 6, action_dim: 2, goal_dim: 2 }
    }

    fn agent(variant: AgentVariant, units: usize) -> BaselineAgent {
        let cfg = BaselineConfig { units, batch: 4, seq_len: 6, ..Default::default() };
        BaselineAgent::new(variant, cfg, &BehaviorHyper::default(), dims(), (-1.0, 1.0), 0, &mut stream(1, "b")).unwrap()
    }

    fn buffer() -> ReplayBuffer {
        let mut env = make_env(EnvSpec::named("point-reach").unwrap(), 2).unwrap();
        let mut buf = ReplayBuffer::new(100, 0.25);
        for d in generate_demonstrations(&mut env, 2, Perturbation::None, &mut stream(2, "d")).unwrap() {
            buf.append_episode(d).unwrap();
        }
        buf
    }

    #[test]
    fn bc_loss_examples() {
        let t = [0.5, -0.25, 1.0, 0.0];
        assert_eq!(bc_loss(&t, &t, &[1.0, 1.0], 2), 0.0);
        let zero = [0.0; 6];
        let ones = [1.0; 6];
        assert_eq!(bc_loss(&zero, &ones, &[1.0, 1.0, 1.0], 2), 2.0);
        assert_eq!(bc_loss(&zero, &ones, &[0.0, 0.0, 0.0], 2), 0.0);
    }

    #[test]
    fn mask_excludes_success_only_steps_without_self_imitation() {
        let buf = buffer();
        let mut b = buf.sample_sequences(4, 5, &mut stream(3, "s")).unwrap();
        for i in 0..b.valid.len() {
            if i % 2 == 0 {
                b.expert[i] = 0.0;
            }
        }
        let off = bc_mask(&b, false);
        let on = bc_mask(&b, true);
        for i in 0..b.valid.len() {
            assert_eq!(off[i], b.expert[i] * b.next_valid[i]);
            assert_eq!(on[i], b.success[i] * b.next_valid[i]);
        }
        assert!(off.iter().sum::<f64>() < on.iter().sum::<f64>());
    }

    #[test]
    fn tape_bc_loss_matches_value_level() {
        let buf = buffer();
        let a = agent(AgentVariant::Mbc, 8);
        let b = buf.sample_sequences(4, 6, &mut stream(4, "s")).unwrap();
        let mut tape = Tape::frozen();
        let (acts, _) = a.batch_actions(&mut tape, &b, &mut stream(0, "n"));
        let l = a.bc_loss_vars(&mut tape, &b, &acts).unwrap();
        let pred: Vec<f64> = acts.iter().flat_map(|&v| tape.value(v).to_f64()).collect();
        let want = bc_loss(&pred, &b.next_actions, &bc_mask(&b, true), 2);
        assert!((tape.scalar(l) - want).abs() <= 1e-12);
    }

    #[test]
    fn counts_match_built_networks() {
        for v in [AgentVariant::Mbc, AgentVariant::MbcRnn, AgentVariant::MbcVae, AgentVariant::PpoBc] {
            let a = agent(v, 7);
            assert_eq!(a.parameter_count(), parameter_count(v, dims(), 7, 8), "{}", v.tag());
        }
    }

    #[test]
    fn parity_sizing_lands_within_twenty_percent() {
        for target in [2_000, 25_000, 120_000] {
            for v in [AgentVariant::Mbc, AgentVariant::MbcRnn, AgentVariant::MbcVae, AgentVariant::PpoBc] {
                let u = parity_units(v, dims(), 8, target);
                let c = parameter_count(v, dims(), u, 8) as f64;
                assert!((c / target as f64 - 1.0).abs() <= 0.2, "{} {target} → {c}", v.tag());
            }
        }
    }

    #[test]
    fn every_variant_trains_and_acts() {
        let buf = buffer();
        let mut env = make_env(EnvSpec::named("point-reach").unwrap(), 5).unwrap();
        for v in [AgentVariant::Mbc, AgentVariant::MbcRnn, AgentVariant::MbcVae, AgentVariant::PpoBc] {
            let mut a = agent(v, 8);
            let mut rng = stream(6, "u");
            let obs = env.reset();
            a.begin_episode(&obs.goal).unwrap();
            let mut rec = EpisodeRecord::start(env.spec(), 5, &obs, false);
            let mut o = obs.flatten();
            while !env.is_done() {
                let act = a.act(&mut env, &o, ActMode::Explore, &mut rng).unwrap();
                assert!(act.iter().all(|x| (-1.0..=1.0).contains(x)));
                let s = env.step(&act).unwrap();
                o = s.observation.flatten();
                rec.push(&s.observation, &act, s.reward, s.done);
            }
            a.end_episode(&rec).unwrap();
            let before = a.params.clone();
            let stats = a.update(&buf, &mut rng).unwrap();
            assert!(stats.iter().all(|(_, x)| x.is_finite()));
            assert_ne!(before, a.params, "{}", v.tag());
        }
    }

    #[test]
    fn cloning_fits_a_demonstration() {
        let buf = buffer();
        let mut a = agent(AgentVariant::Mbc, 16);
        let mut rng = stream(7, "fit");
        let first = a.update(&buf, &mut rng).unwrap()[0].1;
        let mut last = first;
        for _ in 0..300 {
            last = a.update(&buf, &mut rng).unwrap()[0].1;
        }
        assert!(last < 0.5 * first, "bc {first} → {last}");
    }
}
