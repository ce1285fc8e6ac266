//! Actor-critic learning inside the world model.
//!
//! The policy is rolled out for `H` steps in imagination. Each step is
//! scored with the preference-regret reward
//! `R = r_o − (r_p − r_o) + α_ent · H[p(s_o)]`, where `r_o` and `r_p` are the
//! shared reward head's means on the representation and preference states.
//! Advantages come from GAE-λ over one-step TD errors; the critic regresses
//! onto λ-returns with a pull towards an EMA target network.

mod learner;


use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::numerics::{Owner, ParameterSet};
use crate::Real;

pub use learner::{
    features, imagine_rollout, policy_loss, policy_loss_with, standardized, value_loss_vars, value_loss_with, Actor, BehaviorLearner, BehaviorStats, Critic,
    ExpertTargets, ImaginedTrajectory, PolicyLoss, StartBatch,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorHyper {
    pub gamma: f64,
    pub lambda: f64,
    /// Entropy coefficient `α_ent` (reward bonus and policy entropy).
    pub alpha_ent: f64,
    /// Expert-matching coefficient `β`.
    pub beta_expert: f64,
    pub horizon: usize,
    /// EMA rate `ρ` of the target value network.
    pub ema_rate: f64,
    /// Weight `α_val` of the target-network regularizer.
    pub alpha_val: f64,
    /// Hidden units of the policy and value networks.
    pub units: usize,
    /// Standardize advantages over the batch before the policy step.
    pub normalize_advantages: bool,
}

impl Default for BehaviorHyper {
    fn default() -> Self {
        BehaviorHyper {
            gamma: 0.99,
            lambda: 0.95,
            alpha_ent: 0.0003,
            beta_expert: 0.5,
            horizon: 15,
            ema_rate: 0.01,
            alpha_val: 1.0,
            units: 128,
            normalize_advantages: false,
        }
    }
}

impl BehaviorHyper {
    pub fn validate(&self) -> Result<()> {
        contract!((0.0..=1.0).contains(&self.gamma), "gamma must lie in [0, 1]");
        contract!((0.0..=1.0).contains(&self.lambda), "lambda must lie in [0, 1]");
        contract!((0.0..=1.0).contains(&self.ema_rate), "ema rate must lie in [0, 1]");
        contract!(
            self.alpha_ent >= 0.0 && self.beta_expert >= 0.0 && self.alpha_val >= 0.0,
            "behavior coefficients must be ≥ 0"
        );
        contract!(self.horizon >= 1 && self.units >= 1, "horizon and units must be positive");
        Ok(())
    }
}

/// `R = 2 r_o − r_p + α_ent · entropy`.
pub fn preference_regret_reward(r_o: f64, r_p: f64, prior_entropy: f64, alpha_ent: f64) -> f64 {
    r_o - (r_p - r_o) + alpha_ent * prior_entropy
}

/// `δ_τ = R_τ + γ v_{τ+1} − v_τ`; `values` carries the bootstrap value.
pub fn td_errors(rewards: &[f64], values: &[f64], gamma: f64) -> Result<Vec<f64>> {
    contract!(
        values.len() == rewards.len() + 1,
        "need {} values for {} rewards, got {}",
        rewards.len() + 1,
        rewards.len(),
        values.len()
    );
    Ok(rewards.iter().enumerate().map(|(t, r)| r + gamma * values[t + 1] - values[t]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    pub advantages: Vec<f64>,
    /// λ-return targets `G_τ = A_τ + v_τ`.
    pub targets: Vec<f64>,
}

/// Backward recursion `A_τ = δ_τ + γλ A_{τ+1}` with `A` zero past the end.
pub fn gae(deltas: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Gae> {
    contract!(values.len() >= deltas.len(), "need a value per TD error");
    contract!(deltas.iter().all(|d| d.is_finite()), "TD errors must be finite");
    let mut advantages = vec![0.0; deltas.len()];
    let mut next = 0.0;
    for t in (0..deltas.len()).rev() {
        next = deltas[t] + gamma * lambda * next;
        advantages[t] = next;
    }
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Gae { advantages, targets })
}

/// `mean_τ (v − G)² + α_val (v − v′)²`.
pub fn value_loss(values: &[f64], targets: &[f64], target_values: &[f64], alpha_val: f64) -> Result<f64> {
    contract!(
        values.len() == targets.len() && values.len() == target_values.len() && !values.is_empty(),
        "value loss needs equal, nonempty sequences"
    );
    let s: f64 = values
        .iter()
        .zip(targets)
        .zip(target_values)
        .map(|((v, g), vt)| (v - g) * (v - g) + alpha_val * (v - vt) * (v - vt))
        .sum();
    Ok(s / values.len() as f64)
}

/// `ν′ ← (1 − ρ) ν′ + ρ ν` for every target tensor `target.<x>` paired with
/// `value.<x>`.
pub fn ema_update<T: Real>(params: &mut ParameterSet<T>, rho: f64) -> Result<()> {
    contract!((0.0..=1.0).contains(&rho), "ema rate must lie in [0, 1]");
    let pairs: Vec<_> = params
        .iter()
        .filter(|(_, e)| e.owner == Owner::TargetValue)
        .map(|(tid, e)| {
            let name = e.name.strip_prefix("target.").unwrap_or(&e.name);
            let online = format!("value.{name}");
            match params.id(&online) {
                Some(vid) if params.entry(vid).shape == e.shape && params.entry(vid).owner == Owner::Value => Ok((tid, vid)),
                Some(_) => Err(Error::Params(format!("`{}` and `{online}` differ in shape or owner", e.name))),
                None => Err(Error::Params(format!("target `{}` has no online tensor `{online}`", e.name))),
            }
        })
        .collect::<Result<_>>()?;
    let (keep, take) = (T::from_f64(1.0 - rho), T::from_f64(rho));
    for (tid, vid) in pairs {
        let online = params.data(vid).to_vec();
        for (t, v) in params.data_mut(tid).iter_mut().zip(online) {
            *t = if rho == 1.0 { v } else { keep * *t + take * v };
        }
    }
    Ok(())
}
