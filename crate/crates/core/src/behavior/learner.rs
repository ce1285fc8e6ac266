use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{ema_update, gae, preference_regret_reward, td_errors, BehaviorHyper};
use crate::error::{contract, Error, Result};
use crate::numerics::gaussian::{entropy_vars, log_prob_vars, GaussianVars};
use crate::numerics::{Adam, Matrix, Mlp, Owner, OwnerMask, ParameterSet, Tape, Var};
use crate::qmop::{LatentState, LatentVars, WorldModel, WorldModelLoss};
use crate::replay::SequenceBatch;
use crate::rng::Noise;
use crate::Real;

/// `[s_o, s_p, h]`, the input of the policy and value networks.
pub fn features<T: Real>(tape: &mut Tape<T>, s: LatentVars) -> Var {
    tape.concat(&[s.s_o, s.s_p, s.h])
}

/// Squashed diagonal Gaussian policy `a = c + r · tanh(u)`, `u ~ N(μ, σ)`,
/// where `c` and `r` are the centre and half-width of the action box.
#[derive(Debug, Clone)]
pub struct Actor {
    pub net: Mlp,
    pub action_dim: usize,
    pub low: f64,
    pub high: f64,
}

impl Actor {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        feature_dim: usize,
        units: usize,
        action_dim: usize,
        bounds: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        contract!(bounds.0 < bounds.1, "action bounds [{}, {}] are empty", bounds.0, bounds.1);
        let net = Mlp::new(params, "policy.net", &[feature_dim, units, 2 * action_dim], Owner::Policy, rng)?;
        Ok(Actor { net, action_dim, low: bounds.0, high: bounds.1 })
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    /// Pre-squash Gaussian.
    pub fn distribution<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, feat: Var) -> GaussianVars {
        let out = self.net.forward(tape, params, feat);
        GaussianVars::from_head(tape, out, self.action_dim)
    }

    pub fn squash<T: Real>(&self, tape: &mut Tape<T>, u: Var) -> Var {
        let t = tape.tanh(u);
        let t = tape.scale(t, self.half_width());
        tape.shift(t, 0.5 * (self.high + self.low))
    }

    /// `Σ_j log |∂a_j/∂u_j|`, `rows × 1`.
    fn log_jacobian<T: Real>(&self, tape: &mut Tape<T>, u: Var) -> Var {
        let ls = tape.log_sech2(u);
        let s = tape.sum_cols(ls);
        tape.shift(s, self.action_dim as f64 * libm::log(self.half_width()))
    }

    /// `log π(a)` for the action squashed from `u`, `rows × 1`.
    pub fn log_prob<T: Real>(&self, tape: &mut Tape<T>, dist: GaussianVars, u: Var) -> Var {
        let lp = log_prob_vars(tape, dist, u);
        let lj = self.log_jacobian(tape, u);
        tape.sub(lp, lj)
    }

    /// Single-sample entropy estimate `H[N(μ, σ)] + Σ log |∂a/∂u|` at the
    /// reparameterized point `u = μ + σ ε`, `rows × 1`.
    pub fn entropy<T: Real>(&self, tape: &mut Tape<T>, dist: GaussianVars, eps: Var) -> Var {
        let h = entropy_vars(tape, dist);
        let u = dist.sample_with(tape, eps);
        let lj = self.log_jacobian(tape, u);
        tape.add(h, lj)
    }

    /// Actions for a `rows × F` feature block. `greedy` squashes the mean.
    pub fn act<T: Real>(
        &self,
        params: &ParameterSet<T>,
        features: &Matrix<T>,
        noise: &mut dyn Noise,
        greedy: bool,
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::frozen();
        let f = tape.constant(features.clone());
        let dist = self.distribution(&mut tape, params, f);
        let u = if greedy { dist.mean } else { dist.sample(&mut tape, noise) };
        let a = self.squash(&mut tape, u);
        tape.check_finite(a, "policy action")?;
        Ok(tape.value(a).to_f64())
    }
}

/// Value network and its EMA target copy.
#[derive(Debug, Clone)]
pub struct Critic {
    pub net: Mlp,
    pub target: Mlp,
}

impl Critic {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        feature_dim: usize,
        units: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = [feature_dim, units, 1];
        let net = Mlp::new(params, "value.net", &sizes, Owner::Value, rng)?;
        let target = Mlp::new(params, "target.net", &sizes, Owner::TargetValue, rng)?;
        ema_update(params, 1.0)?;
        Ok(Critic { net, target })
    }

    pub fn value<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, feat: Var) -> Var {
        self.net.forward(tape, params, feat)
    }

    pub fn target_value<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, feat: Var) -> Var {
        self.target.forward(tape, params, feat)
    }
}

/// Stored expert actions for the first imagined step of each rollout row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertTargets {
    /// `m_τ` at `τ = 0`, one entry per row.
    pub mask: Vec<f64>,
    /// `a*`, `rows × A`.
    pub actions: Vec<f64>,
}

impl ExpertTargets {
    pub fn none(rows: usize, action_dim: usize) -> Self {
        ExpertTargets { mask: vec![0.0; rows], actions: vec![0.0; rows * action_dim] }
    }
}

/// Rollout start states taken from a world-model pass over a batch.
#[derive(Debug, Clone)]
pub struct StartBatch<T> {
    pub states: LatentState<T>,
    /// `rows × goal_dim`.
    pub goals: Vec<f64>,
    pub expert: ExpertTargets,
}

impl<T: Real> StartBatch<T> {
    /// One row per valid step `(t, b)`. A row is an expert row when the step
    /// comes from an expert episode and has a recorded next action.
    pub fn from_observed(tape: &Tape<T>, loss: &WorldModelLoss, batch: &SequenceBatch) -> Result<Self> {
        contract!(loss.states.len() == batch.len, "world model pass does not cover the batch");
        let (b, ad, gd) = (batch.batch, batch.action_dim, batch.goal_dim);
        let all = loss.start_states(tape);
        let rows: Vec<usize> = (0..batch.len * b).filter(|&i| batch.valid[i] > 0.0).collect();
        contract!(!rows.is_empty(), "batch has no valid step to start imagination from");
        let mut goals = Vec::with_capacity(rows.len() * gd);
        let mut expert = ExpertTargets { mask: Vec::with_capacity(rows.len()), actions: Vec::new() };
        for &i in &rows {
            let col = i % b;
            goals.extend_from_slice(&batch.goals[col * gd..(col + 1) * gd]);
            expert.mask.push(batch.expert[i] * batch.next_valid[i]);
            expert.actions.extend_from_slice(&batch.next_actions[i * ad..(i + 1) * ad]);
        }
        Ok(StartBatch { states: all.gather_rows(&rows), goals, expert })
    }

    pub fn rows(&self) -> usize {
        self.states.rows()
    }
}

/// Everything one imagined rollout produced. Per-step tables are
/// `rows × H`; values carry the bootstrap column (`rows × (H+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImaginedTrajectory {
    pub horizon: usize,
    pub rows: usize,
    /// `[s_o, s_p, h]` at `τ = 0..=H`.
    pub features: Vec<Matrix<f64>>,
    /// Standard-normal draws behind each action.
    pub noise: Vec<Matrix<f64>>,
    /// Pre-squash samples `u_τ`.
    pub pre_squash: Vec<Matrix<f64>>,
    pub actions: Vec<Matrix<f64>>,
    pub log_probs: Matrix<f64>,
    pub r_o: Matrix<f64>,
    pub r_p: Matrix<f64>,
    pub prior_entropy: Matrix<f64>,
    pub rewards: Matrix<f64>,
    pub values: Matrix<f64>,
    pub target_values: Matrix<f64>,
    pub advantages: Matrix<f64>,
    pub targets: Matrix<f64>,
    pub expert: ExpertTargets,
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { what } => Error::NonFinite { what: format!("{what} at imagination step {step}") },
        other => other,
    }
}

fn column_into<T: Real>(dst: &mut Matrix<f64>, col: usize, v: &Matrix<T>) {
    for r in 0..dst.rows {
        dst.set(r, col, v.at(r, 0).to_f64());
    }
}

/// Roll the policy through the world model for `H` steps from `start`,
/// score each step with the preference-regret reward and compute GAE-λ
/// advantages and λ-return targets. Runs on a frozen tape.
#[allow(clippy::too_many_arguments)]
pub fn imagine_rollout<T: Real>(
    wm: &WorldModel,
    actor: &Actor,
    critic: &Critic,
    params: &ParameterSet<T>,
    start: &StartBatch<T>,
    hyper: &BehaviorHyper,
    noise: &mut dyn Noise,
) -> Result<ImaginedTrajectory> {
    hyper.validate()?;
    let n = start.rows();
    let (hz, ad, gd) = (hyper.horizon, actor.action_dim, wm.dims.goal_dim);
    contract!(start.goals.len() == n * gd, "need a goal per start row");
    contract!(
        start.expert.mask.len() == n && start.expert.actions.len() == n * ad,
        "expert targets do not match {n} start rows"
    );
    let mut tape = Tape::<T>::frozen();
    let goal = tape.constant_f64(n, gd, &start.goals);
    let query = wm.query(&mut tape, params, goal);
    let weights = wm.mixture_weights(&mut tape, params, query);
    let mut state = start.states.on_tape(&mut tape);

    let table = |cols| Matrix::<f64>::zeros(n, cols);
    let mut traj = ImaginedTrajectory {
        horizon: hz,
        rows: n,
        features: Vec::with_capacity(hz + 1),
        noise: Vec::with_capacity(hz),
        pre_squash: Vec::with_capacity(hz),
        actions: Vec::with_capacity(hz),
        log_probs: table(hz),
        r_o: table(hz),
        r_p: table(hz),
        prior_entropy: table(hz),
        rewards: table(hz),
        values: table(hz + 1),
        target_values: table(hz + 1),
        advantages: table(hz),
        targets: table(hz),
        expert: start.expert.clone(),
    };

    let mut feat = features(&mut tape, state);
    for tau in 0..=hz {
        tape.check_finite(feat, "latent features").map_err(|e| at_step(e, tau))?;
        traj.features.push(Matrix::from_f64(n, tape.shape(feat).1, &tape.value(feat).to_f64()));
        let v = critic.value(&mut tape, params, feat);
        column_into(&mut traj.values, tau, tape.value(v));
        let vt = critic.target_value(&mut tape, params, feat);
        column_into(&mut traj.target_values, tau, tape.value(vt));
        if tau == hz {
            break;
        }

        let dist = actor.distribution(&mut tape, params, feat);
        let mut eps = vec![0.0; n * ad];
        noise.fill(&mut eps);
        let e = tape.constant_f64(n, ad, &eps);
        let u = dist.sample_with(&mut tape, e);
        let a = actor.squash(&mut tape, u);
        tape.check_finite(a, "policy action").map_err(|e| at_step(e, tau))?;
        let lp = actor.log_prob(&mut tape, dist, u);
        column_into(&mut traj.log_probs, tau, tape.value(lp));
        traj.noise.push(Matrix::from_vec(n, ad, eps));
        traj.pre_squash.push(Matrix::from_f64(n, ad, &tape.value(u).to_f64()));
        traj.actions.push(Matrix::from_f64(n, ad, &tape.value(a).to_f64()));

        let out = wm.imagine_step(&mut tape, params, state, a, query, weights, noise).map_err(|e| at_step(e, tau))?;
        state = out.next;
        let ro = wm.reward_mean(&mut tape, params, state.s_o, state.h);
        let rp = wm.reward_mean(&mut tape, params, state.s_p, state.h);
        let ent = entropy_vars(&mut tape, out.repr_prior);
        column_into(&mut traj.r_o, tau, tape.value(ro));
        column_into(&mut traj.r_p, tau, tape.value(rp));
        column_into(&mut traj.prior_entropy, tau, tape.value(ent));
        feat = features(&mut tape, state);
    }

    for r in 0..n {
        let rewards: Vec<f64> = (0..hz)
            .map(|t| {
                preference_regret_reward(
                    traj.r_o.at(r, t),
                    traj.r_p.at(r, t),
                    traj.prior_entropy.at(r, t),
                    hyper.alpha_ent,
                )
            })
            .collect();
        let values = traj.values.row(r).to_vec();
        let deltas = td_errors(&rewards, &values, hyper.gamma)?;
        let g = gae(&deltas, &values, hyper.gamma, hyper.lambda)?;
        for t in 0..hz {
            traj.rewards.set(r, t, rewards[t]);
            traj.advantages.set(r, t, g.advantages[t]);
            traj.targets.set(r, t, g.targets[t]);
        }
    }
    let finite = [&traj.rewards, &traj.advantages, &traj.targets].iter().all(|m| m.all_finite());
    if !finite {
        return Err(Error::NonFinite { what: "imagined returns".into() });
    }
    Ok(traj)
}

/// `(x − mean) / std` over every entry; a constant table maps to zeros.
pub fn standardized(m: &Matrix<f64>) -> Matrix<f64> {
    let n = m.data.len().max(1) as f64;
    let mean = m.data.iter().sum::<f64>() / n;
    let var = m.data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    let mut out = m.clone();
    for x in out.data.iter_mut() {
        *x = if sd > 1e-12 { (*x - mean) / sd } else { 0.0 };
    }
    out
}

fn column_var<T: Real>(tape: &mut Tape<T>, m: &Matrix<f64>, col: usize) -> Var {
    let v: Vec<f64> = (0..m.rows).map(|r| m.at(r, col)).collect();
    tape.constant_f64(m.rows, 1, &v)
}

fn constant<T: Real>(tape: &mut Tape<T>, m: &Matrix<f64>) -> Var {
    tape.constant_f64(m.rows, m.cols, &m.data)
}

/// `mean_{τ, rows} (v − sg G)² + α_val (v − sg v′)²` with `v` recomputed
/// from the stored features.
pub fn value_loss_vars<T: Real>(
    tape: &mut Tape<T>,
    critic: &Critic,
    params: &ParameterSet<T>,
    traj: &ImaginedTrajectory,
    alpha_val: f64,
) -> Var {
    let targets: Vec<Var> = (0..traj.horizon).map(|t| column_var(tape, &traj.targets, t)).collect();
    let target_values: Vec<Var> = (0..traj.horizon).map(|t| column_var(tape, &traj.target_values, t)).collect();
    value_loss_with(tape, critic, params, traj, &targets, &target_values, alpha_val)
}

pub fn value_loss_with<T: Real>(
    tape: &mut Tape<T>,
    critic: &Critic,
    params: &ParameterSet<T>,
    traj: &ImaginedTrajectory,
    targets: &[Var],
    target_values: &[Var],
    alpha_val: f64,
) -> Var {
    let mut acc: Option<Var> = None;
    for t in 0..traj.horizon {
        let f = constant(tape, &traj.features[t]);
        let v = critic.value(tape, params, f);
        let g = tape.stop_gradient(targets[t]);
        let vt = tape.stop_gradient(target_values[t]);
        let d = tape.sub(v, g);
        let d2 = tape.square(d);
        let e = tape.sub(v, vt);
        let e2 = tape.square(e);
        let e2 = tape.scale(e2, alpha_val);
        let term = tape.add(d2, e2);
        let s = tape.sum(term);
        acc = Some(match acc {
            Some(a) => tape.add(a, s),
            None => s,
        });
    }
    let total = acc.expect("horizon ≥ 1");
    tape.scale(total, 1.0 / (traj.horizon * traj.rows) as f64)
}

/// Policy loss terms, each already in minimization form.
#[derive(Debug, Clone, Copy)]
pub struct PolicyLoss {
    pub total: Var,
    /// `−mean log π(a) · sg(A)`.
    pub l_adv: f64,
    /// `−α_ent · mean H[π]`.
    pub l_ac: f64,
    /// `β · mean_{m=1} ‖a − a*‖₂`; 0 when no row carries an expert action.
    pub l_exp: f64,
}

pub fn policy_loss<T: Real>(
    tape: &mut Tape<T>,
    actor: &Actor,
    params: &ParameterSet<T>,
    traj: &ImaginedTrajectory,
    hyper: &BehaviorHyper,
) -> Result<PolicyLoss> {
    let adv = if hyper.normalize_advantages { standardized(&traj.advantages) } else { traj.advantages.clone() };
    let adv: Vec<Var> = (0..traj.horizon).map(|t| column_var(tape, &adv, t)).collect();
    policy_loss_with(tape, actor, params, traj, &adv, hyper)
}

pub fn policy_loss_with<T: Real>(
    tape: &mut Tape<T>,
    actor: &Actor,
    params: &ParameterSet<T>,
    traj: &ImaginedTrajectory,
    advantages: &[Var],
    hyper: &BehaviorHyper,
) -> Result<PolicyLoss> {
    contract!(advantages.len() == traj.horizon, "need one advantage column per step");
    let (n, ad) = (traj.rows, actor.action_dim);
    let mut adv_sum: Option<Var> = None;
    let mut ent_sum: Option<Var> = None;
    let mut l_exp = None;
    for t in 0..traj.horizon {
        let f = constant(tape, &traj.features[t]);
        let dist = actor.distribution(tape, params, f);
        let u = constant(tape, &traj.pre_squash[t]);
        let lp = actor.log_prob(tape, dist, u);
        let a = tape.stop_gradient(advantages[t]);
        let la = tape.mul(lp, a);
        let la = tape.sum(la);
        let eps = constant(tape, &traj.noise[t]);
        let h = actor.entropy(tape, dist, eps);
        let h = tape.sum(h);
        adv_sum = Some(adv_sum.map_or(la, |s| tape.add(s, la)));
        ent_sum = Some(ent_sum.map_or(h, |s| tape.add(s, h)));

        let count: f64 = traj.expert.mask.iter().sum();
        if t == 0 && count > 0.0 {
            let us = dist.sample_with(tape, eps);
            let act = actor.squash(tape, us);
            let star = tape.constant_f64(n, ad, &traj.expert.actions);
            let diff = tape.sub(act, star);
            let norm = tape.row_norm(diff);
            let m = tape.constant_f64(n, 1, &traj.expert.mask);
            let masked = tape.mul(norm, m);
            let s = tape.sum(masked);
            l_exp = Some(tape.scale(s, hyper.beta_expert / count));
        }
    }
    let inv = 1.0 / (traj.horizon * n) as f64;
    let l_adv = tape.scale(adv_sum.expect("horizon ≥ 1"), -inv);
    let l_ac = tape.scale(ent_sum.expect("horizon ≥ 1"), -hyper.alpha_ent * inv);
    let mut total = tape.add(l_adv, l_ac);
    if let Some(e) = l_exp {
        total = tape.add(total, e);
    }
    tape.check_finite(total, "policy loss")?;
    Ok(PolicyLoss {
        total,
        l_adv: tape.scalar(l_adv).to_f64(),
        l_ac: tape.scalar(l_ac).to_f64(),
        l_exp: l_exp.map_or(0.0, |e| tape.scalar(e).to_f64()),
    })
}

/// Scalars of one behavior update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BehaviorStats {
    pub value_loss: f64,
    pub l_adv: f64,
    pub l_ac: f64,
    pub l_exp: f64,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub mean_regret: f64,
}

/// Policy, critic and hyperparameters of the behavior learner.
#[derive(Debug, Clone)]
pub struct BehaviorLearner {
    pub actor: Actor,
    pub critic: Critic,
    pub hyper: BehaviorHyper,
}

impl BehaviorLearner {
    pub fn new<T: Real, R: Rng + ?Sized>(
        hyper: BehaviorHyper,
        feature_dim: usize,
        action_dim: usize,
        bounds: (f64, f64),
        params: &mut ParameterSet<T>,
        rng: &mut R,
    ) -> Result<Self> {
        hyper.validate()?;
        let actor = Actor::new(params, feature_dim, hyper.units, action_dim, bounds, rng)?;
        let critic = Critic::new(params, feature_dim, hyper.units, rng)?;
        Ok(BehaviorLearner { actor, critic, hyper })
    }

    /// Imagine from `start`, take one value step and one policy step, then
    /// blend the target network.
    #[allow(clippy::too_many_arguments)]
    pub fn update<T: Real>(
        &self,
        wm: &WorldModel,
        params: &mut ParameterSet<T>,
        start: &StartBatch<T>,
        value_opt: &mut Adam,
        policy_opt: &mut Adam,
        noise: &mut dyn Noise,
    ) -> Result<BehaviorStats> {
        let traj = imagine_rollout(wm, &self.actor, &self.critic, params, start, &self.hyper, noise)?;

        let mut tape = Tape::new(OwnerMask::only(Owner::Value));
        let vl = value_loss_vars(&mut tape, &self.critic, params, &traj, self.hyper.alpha_val);
        tape.check_finite(vl, "value loss")?;
        let value_loss = tape.scalar(vl).to_f64();
        let grads = tape.gradients(vl)?;
        value_opt.step(params, &grads)?;

        let mut tape = Tape::new(OwnerMask::only(Owner::Policy));
        let pl = policy_loss(&mut tape, &self.actor, params, &traj, &self.hyper)?;
        let grads = tape.gradients(pl.total)?;
        policy_opt.step(params, &grads)?;

        ema_update(params, self.hyper.ema_rate)?;
        let mean = |m: &Matrix<f64>| m.data.iter().sum::<f64>() / m.data.len() as f64;
        let regret: Vec<f64> = traj.r_o.data.iter().zip(&traj.r_p.data).map(|(o, p)| o - p).collect();
        Ok(BehaviorStats {
            value_loss,
            l_adv: pl.l_adv,
            l_ac: pl.l_ac,
            l_exp: pl.l_exp,
            mean_reward: mean(&traj.rewards),
            mean_advantage: mean(&traj.advantages),
            mean_regret: regret.iter().sum::<f64>() / regret.len() as f64,
        })
    }
}
