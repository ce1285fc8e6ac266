//! Queryable mixture-of-preferences state-space model.
//!
//! Two latent streams share one recurrent core. The representation stream
//! `s_o` has the usual posterior `q(s_o | o, h)` and prior `p(s_o | h)`. The
//! preference stream `s_p` has its own posterior head on the shared
//! observation encoder and `M` prior components `p_i(s_p | s_p', q, h)`
//! that a goal query `q` mixes with softmax gate weights. Decoder and reward
//! heads have unit variance; the reward head is shared by both streams.
//!
//! All operations run on a [`Tape`] over a batch of rows so the same code
//! serves training (differentiable) and acting (frozen tape).

mod loss;

#[cfg(test)]
mod tests;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::numerics::gaussian::{GaussianVars, LOG_STD_MAX, LOG_STD_MIN};
use crate::numerics::{DiagGaussian, Matrix, MixtureGate, Mlp, Owner, ParamId, ParameterSet, Tape, Var};
use crate::numerics::{Dense, GruCell};
use crate::rng::Noise;
use crate::Real;

pub use loss::{mixture_entropy_loss, LossBreakdown, LossVars, WorldModelLoss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldModelConfig {
    /// Recurrent width `d_h`.
    pub deter_dim: usize,
    /// Stochastic state width `d_s` (both streams).
    pub stoch_dim: usize,
    /// Goal query width `d_q`.
    pub query_dim: usize,
    /// Hidden units of every two-layer head.
    pub units: usize,
    /// Number of preference prior components `M`.
    pub components: usize,
    /// Free-bits floor per KL term, in nats.
    pub free_bits: f64,
    /// Weight `λ_mix` of the mixture-entropy objective.
    pub mix_coef: f64,
    /// L2 weight `α_reg` inside the mixture-entropy objective.
    pub mix_reg: f64,
    /// Observations are multiplied by this before the unit-variance
    /// likelihood, so `1/obs_scale` acts as the decoder's noise scale.
    pub obs_scale: f64,
}

impl Default for WorldModelConfig {
    fn default() -> Self {
        WorldModelConfig {
            deter_dim: 128,
            stoch_dim: 32,
            query_dim: 16,
            units: 128,
            components: 4,
            free_bits: 1.0,
            mix_coef: 0.01,
            mix_reg: 0.1,
            obs_scale: 1.0,
        }
    }
}

impl WorldModelConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(
            self.deter_dim >= 1 && self.stoch_dim >= 1 && self.query_dim >= 1 && self.units >= 1,
            "world model widths must be positive"
        );
        contract!(self.components >= 1, "need at least one preference component");
        contract!(self.obs_scale > 0.0 && self.obs_scale.is_finite(), "obs_scale must be positive");
        contract!(self.free_bits >= 0.0 && self.mix_coef >= 0.0 && self.mix_reg >= 0.0, "loss weights must be ≥ 0");
        Ok(())
    }
}

/// Sizes fixed by the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
}

/// Batch of latent states as plain values (one row per sequence).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T> {
    pub h: Matrix<T>,
    pub s_o: Matrix<T>,
    pub s_p: Matrix<T>,
}

impl<T: Real> LatentState<T> {
    pub fn zeros(rows: usize, config: &WorldModelConfig) -> Self {
        LatentState {
            h: Matrix::zeros(rows, config.deter_dim),
            s_o: Matrix::zeros(rows, config.stoch_dim),
            s_p: Matrix::zeros(rows, config.stoch_dim),
        }
    }

    pub fn rows(&self) -> usize {
        self.h.rows
    }

    /// Place on a tape as constants.
    pub fn on_tape(&self, tape: &mut Tape<T>) -> LatentVars {
        LatentVars {
            h: tape.constant(self.h.clone()),
            s_o: tape.constant(self.s_o.clone()),
            s_p: tape.constant(self.s_p.clone()),
        }
    }

    pub fn from_tape(tape: &Tape<T>, v: LatentVars) -> Self {
        LatentState { h: tape.value(v.h).clone(), s_o: tape.value(v.s_o).clone(), s_p: tape.value(v.s_p).clone() }
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Self {
        LatentState { h: self.h.gather_rows(idx), s_o: self.s_o.gather_rows(idx), s_p: self.s_p.gather_rows(idx) }
    }

    pub fn vstack(parts: &[&LatentState<T>]) -> Self {
        let h: Vec<_> = parts.iter().map(|p| &p.h).collect();
        let so: Vec<_> = parts.iter().map(|p| &p.s_o).collect();
        let sp: Vec<_> = parts.iter().map(|p| &p.s_p).collect();
        LatentState { h: Matrix::vstack(&h), s_o: Matrix::vstack(&so), s_p: Matrix::vstack(&sp) }
    }
}

/// Latent state batch living on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LatentVars {
    pub h: Var,
    pub s_o: Var,
    pub s_p: Var,
}

/// The `M` preference prior components of one step and their combination.
#[derive(Debug, Clone, Copy)]
pub struct PreferencePrior {
    /// `rows × M·d_s`, component `i` in columns `i·d_s..(i+1)·d_s`.
    pub means: Var,
    pub log_stds: Var,
    /// Reparameterized component samples, same layout.
    pub samples: Var,
    /// Gate weights, `rows × M`.
    pub weights: Var,
    /// `Σ_i w_i · s_p^i`, `rows × d_s`.
    pub combined: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ObserveOutputs {
    pub repr_post: GaussianVars,
    pub repr_prior: GaussianVars,
    pub pref_post: GaussianVars,
    pub pref_prior: PreferencePrior,
    pub next: LatentVars,
}

#[derive(Debug, Clone, Copy)]
pub struct ImagineOutputs {
    pub repr_prior: GaussianVars,
    pub pref_prior: PreferencePrior,
    pub next: LatentVars,
}

/// Parameter handles of the world model. Values live in a [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct WorldModel {
    pub config: WorldModelConfig,
    pub dims: ModelDims,
    pub encoder: Mlp,
    pub input: Dense,
    pub gru: GruCell,
    pub repr_post: Mlp,
    pub repr_prior: Mlp,
    pub pref_post: Mlp,
    pub pref_prior: Mlp,
    pub goal_vec: ParamId,
    pub goal_enc: Mlp,
    pub gate: MixtureGate,
    pub decoder: Mlp,
    pub reward: Mlp,
}

impl WorldModel {
    pub fn new<T: Real, R: Rng + ?Sized>(
        config: WorldModelConfig,
        dims: ModelDims,
        params: &mut ParameterSet<T>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        contract!(dims.obs_dim >= 1 && dims.action_dim >= 1 && dims.goal_dim >= 1, "model dims must be positive");
        let c = &config;
        let (u, dh, ds, dq, m) = (c.units, c.deter_dim, c.stoch_dim, c.query_dim, c.components);
        let w = Owner::World;
        let encoder = Mlp::new(params, "wm.encoder", &[dims.obs_dim, u, u], w, rng)?;
        let input = Dense::new(params, "wm.input", ds + dims.action_dim, u, w, rng)?;
        let gru = GruCell::new(params, "wm.gru", u, dh, w, rng)?;
        let repr_post = Mlp::new(params, "wm.repr_post", &[dh + u, u, 2 * ds], w, rng)?;
        let repr_prior = Mlp::new(params, "wm.repr_prior", &[dh, u, 2 * ds], w, rng)?;
        let pref_post = Mlp::new(params, "wm.pref_post", &[dh + u, u, 2 * ds], w, rng)?;
        let pref_prior = Mlp::new(params, "wm.pref_prior", &[ds + dq + dh, u, 2 * m * ds], w, rng)?;
        let goal_vec = params.zeros("wm.goal_vec", &[dq], w)?;
        let goal_enc = Mlp::new(params, "wm.goal_enc", &[dims.goal_dim + dq, u, dq], w, rng)?;
        let gate = MixtureGate::new(params, "wm.gate", dq, m, rng)?;
        let decoder = Mlp::new(params, "wm.decoder", &[ds + dh, u, dims.obs_dim], w, rng)?;
        let reward = Mlp::new(params, "wm.reward", &[ds + dh, u, 1], w, rng)?;
        Ok(WorldModel {
            config,
            dims,
            encoder,
            input,
            gru,
            repr_post,
            repr_prior,
            pref_post,
            pref_prior,
            goal_vec,
            goal_enc,
            gate,
            decoder,
            reward,
        })
    }

    pub fn stoch_dim(&self) -> usize {
        self.config.stoch_dim
    }

    /// Width of the feature `[s_o, s_p, h]` the policy and value read.
    pub fn feature_dim(&self) -> usize {
        2 * self.config.stoch_dim + self.config.deter_dim
    }

    /// Goal query `q = tanh(f([g_raw, g_learned]))`, `rows × d_q`.
    pub fn query<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, goal: Var) -> Var {
        let rows = tape.shape(goal).0;
        let ones = tape.constant(Matrix::filled(rows, 1, T::ONE));
        let g = tape.param(params, self.goal_vec);
        let learned = tape.matmul(ones, g);
        let x = tape.concat(&[goal, learned]);
        let q = self.goal_enc.forward(tape, params, x);
        tape.tanh(q)
    }

    /// Gate weights `softmax(q W + b)`, `rows × M`.
    pub fn mixture_weights<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, query: Var) -> Var {
        self.gate.weights(tape, params, query)
    }

    fn advance<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, prev: LatentVars, action: Var) -> Var {
        let x = tape.concat(&[prev.s_o, action]);
        let x = self.input.forward(tape, params, x);
        let x = tape.tanh(x);
        self.gru.forward(tape, params, prev.h, x)
    }

    fn head<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, net: &Mlp, x: Var, what: &str) -> Result<GaussianVars> {
        let out = net.forward(tape, params, x);
        tape.check_finite(out, what)?;
        Ok(GaussianVars::from_head(tape, out, self.config.stoch_dim))
    }

    fn preference_prior<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        s_p_prev: Var,
        query: Var,
        weights: Var,
        h: Var,
        noise: &mut dyn Noise,
    ) -> Result<PreferencePrior> {
        let md = self.config.components * self.config.stoch_dim;
        let x = tape.concat(&[s_p_prev, query, h]);
        let out = self.pref_prior.forward(tape, params, x);
        tape.check_finite(out, "preference prior")?;
        let means = tape.slice(out, 0, md);
        let raw = tape.slice(out, md, md);
        let log_stds = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX);
        let samples = GaussianVars { mean: means, log_std: log_stds }.sample(tape, noise);
        let combined = mixture_combine(tape, samples, weights, self.config.stoch_dim)?;
        Ok(PreferencePrior { means, log_stds, samples, weights, combined })
    }

    /// One filtering step: advance `h` with the previous action, then infer
    /// both posteriors from the observation. The next state carries the
    /// posterior samples.
    #[allow(clippy::too_many_arguments)]
    pub fn observe_step<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        prev: LatentVars,
        action: Var,
        obs: Var,
        query: Var,
        weights: Var,
        noise: &mut dyn Noise,
    ) -> Result<ObserveOutputs> {
        let h = self.advance(tape, params, prev, action);
        tape.check_finite(h, "recurrent state")?;
        let e = self.encoder.forward(tape, params, obs);
        let e = tape.tanh(e);
        let he = tape.concat(&[h, e]);
        let repr_post = self.head(tape, params, &self.repr_post, he, "representation posterior")?;
        let repr_prior = self.head(tape, params, &self.repr_prior, h, "representation prior")?;
        let pref_post = self.head(tape, params, &self.pref_post, he, "preference posterior")?;
        let pref_prior = self.preference_prior(tape, params, prev.s_p, query, weights, h, noise)?;
        let s_o = repr_post.sample(tape, noise);
        let s_p = pref_post.sample(tape, noise);
        Ok(ObserveOutputs { repr_post, repr_prior, pref_post, pref_prior, next: LatentVars { h, s_o, s_p } })
    }

    /// One open-loop step: no observation; `s_o` comes from the
    /// representation prior and `s_p` from the gated preference mixture.
    #[allow(clippy::too_many_arguments)]
    pub fn imagine_step<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        prev: LatentVars,
        action: Var,
        query: Var,
        weights: Var,
        noise: &mut dyn Noise,
    ) -> Result<ImagineOutputs> {
        let h = self.advance(tape, params, prev, action);
        tape.check_finite(h, "recurrent state")?;
        let repr_prior = self.head(tape, params, &self.repr_prior, h, "representation prior")?;
        let pref_prior = self.preference_prior(tape, params, prev.s_p, query, weights, h, noise)?;
        let s_o = repr_prior.sample(tape, noise);
        Ok(ImagineOutputs { repr_prior, pref_prior, next: LatentVars { h, s_o, s_p: pref_prior.combined } })
    }

    /// Mean of the unit-variance observation likelihood, `rows × obs_dim`.
    pub fn decode_mean<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, s_o: Var, h: Var) -> Var {
        let x = tape.concat(&[s_o, h]);
        self.decoder.forward(tape, params, x)
    }

    /// Mean of the unit-variance reward head, `rows × 1`. Serves both streams.
    pub fn reward_mean<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, s: Var, h: Var) -> Var {
        let x = tape.concat(&[s, h]);
        self.reward.forward(tape, params, x)
    }

    /// Observation likelihood for a single state.
    pub fn decode_obs<T: Real>(&self, params: &ParameterSet<T>, s_o: &[f64], h: &[f64]) -> Result<DiagGaussian> {
        let mut tape = Tape::frozen();
        let (s, hv) = self.single(&mut tape, s_o, h)?;
        let m = self.decode_mean(&mut tape, params, s, hv);
        let mean = tape.value(m).to_f64();
        let n = mean.len();
        DiagGaussian::new(mean, alloc::vec![0.0; n])
    }

    /// Reward likelihood for a single state (`s` may be `s_o` or `s_p`).
    pub fn predict_reward<T: Real>(&self, params: &ParameterSet<T>, s: &[f64], h: &[f64]) -> Result<DiagGaussian> {
        let mut tape = Tape::frozen();
        let (sv, hv) = self.single(&mut tape, s, h)?;
        let m = self.reward_mean(&mut tape, params, sv, hv);
        DiagGaussian::new(tape.value(m).to_f64(), alloc::vec![0.0])
    }

    fn single<T: Real>(&self, tape: &mut Tape<T>, s: &[f64], h: &[f64]) -> Result<(Var, Var)> {
        contract!(s.len() == self.config.stoch_dim, "state has {} dims, model uses {}", s.len(), self.config.stoch_dim);
        contract!(h.len() == self.config.deter_dim, "hidden has {} dims, model uses {}", h.len(), self.config.deter_dim);
        Ok((tape.constant_f64(1, s.len(), s), tape.constant_f64(1, h.len(), h)))
    }
}

/// `Σ_i w_i · s^i` for components laid side by side (`rows × M·d`) and
/// weights `rows × M`.
pub fn mixture_combine<T: Real>(tape: &mut Tape<T>, components: Var, weights: Var, d: usize) -> Result<Var> {
    let (cr, cc) = tape.shape(components);
    let (wr, m) = tape.shape(weights);
    contract!(cr == wr, "components have {cr} rows, weights {wr}");
    contract!(cc == m * d, "expected {m} components of width {d}, got {cc} columns");
    Ok(tape.mixture(components, weights, d))
}
