use alloc::vec::Vec;

use super::{LatentState, LatentVars, WorldModel};
use crate::error::{contract, Result};
use crate::numerics::gaussian::{
    entropy_diag_gaussian, entropy_vars, kl_vars, moment_matched, moment_matched_vars, unit_nll_vars, GaussianVars,
};
use crate::numerics::{DiagGaussian, ParameterSet, Tape, Var};
use crate::replay::SequenceBatch;
use crate::rng::Noise;
use crate::Real;

/// Scalar loss terms of one world-model update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub f_o: f64,
    pub f_o_kl: f64,
    pub f_r: f64,
    pub f_p_kl: f64,
    pub f_dist: f64,
    pub mix_entropy: f64,
    pub total: f64,
    /// Set when the batch had no valid step; every term is then 0.
    pub empty: bool,
}

/// Tape nodes of the individual terms. Masked terms are `None` when their
/// mask is empty.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub f_o: Var,
    pub f_o_kl: Var,
    pub f_r: Var,
    pub f_p_kl: Option<Var>,
    pub f_dist: Option<Var>,
    pub mix_entropy: Option<Var>,
}

/// Result of unrolling the model over a batch.
#[derive(Debug, Clone)]
pub struct WorldModelLoss {
    pub total: Var,
    pub terms: LossVars,
    pub breakdown: LossBreakdown,
    /// Posterior state after each step, time-major.
    pub states: Vec<LatentVars>,
    pub query: Var,
    pub weights: Var,
}

impl WorldModelLoss {
    /// Posterior states as values, `(K·B) × ·` with row `t·B + b`.
    pub fn start_states<T: Real>(&self, tape: &Tape<T>) -> LatentState<T> {
        let parts: Vec<LatentState<T>> = self.states.iter().map(|&s| LatentState::from_tape(tape, s)).collect();
        let refs: Vec<&LatentState<T>> = parts.iter().collect();
        LatentState::vstack(&refs)
    }
}

/// `H[p̄] − α_reg · ‖mean(p̄)‖₂` for the moment-matched Gaussian `p̄` of the
/// weighted components.
pub fn mixture_entropy_loss(components: &[DiagGaussian], weights: &[f64], alpha_reg: f64) -> Result<f64> {
    let pbar = moment_matched(components, weights)?;
    let norm = libm::sqrt(pbar.mean().iter().map(|m| m * m).sum::<f64>());
    Ok(entropy_diag_gaussian(&pbar) - alpha_reg * norm)
}

/// Per-row mixture-entropy objective, `rows × 1`.
pub(crate) fn mixture_entropy_vars<T: Real>(tape: &mut Tape<T>, pbar: GaussianVars, alpha_reg: f64) -> Var {
    let h = entropy_vars(tape, pbar);
    let n = tape.row_norm(pbar.mean);
    let n = tape.scale(n, alpha_reg);
    tape.sub(h, n)
}

struct Masked<'a> {
    terms: Vec<Var>,
    masks: Vec<&'a [f64]>,
}

impl<'a> Masked<'a> {
    fn new() -> Self {
        Masked { terms: Vec::new(), masks: Vec::new() }
    }

    fn push(&mut self, term: Var, mask: &'a [f64]) {
        self.terms.push(term);
        self.masks.push(mask);
    }

    fn count(&self) -> f64 {
        self.masks.iter().flat_map(|m| m.iter()).sum()
    }

    /// Per-sequence masked sums, `B × 1`.
    fn row_sums<T: Real>(&self, tape: &mut Tape<T>) -> Var {
        let mut acc: Option<Var> = None;
        for (&t, m) in self.terms.iter().zip(&self.masks) {
            let mc = tape.constant_f64(m.len(), 1, m);
            let x = tape.mul(t, mc);
            acc = Some(match acc {
                Some(a) => tape.add(a, x),
                None => x,
            });
        }
        acc.expect("at least one step")
    }

    /// Mean over masked entries, or `None` when the mask is empty.
    fn mean<T: Real>(&self, tape: &mut Tape<T>) -> Option<Var> {
        let n = self.count();
        if n == 0.0 {
            return None;
        }
        let s = self.row_sums(tape);
        let s = tape.sum(s);
        Some(tape.scale(s, 1.0 / n))
    }

    /// Masked mean with a free-bits floor applied to each sequence's mean,
    /// weighted by the sequence's masked step count.
    fn free_bits_mean<T: Real>(&self, tape: &mut Tape<T>, floor: f64) -> Option<Var> {
        let n = self.count();
        if n == 0.0 {
            return None;
        }
        let b = self.masks[0].len();
        let counts: Vec<f64> = (0..b).map(|i| self.masks.iter().map(|m| m[i]).sum()).collect();
        let inv: Vec<f64> = counts.iter().map(|&c| if c > 0.0 { 1.0 / c } else { 0.0 }).collect();
        let s = self.row_sums(tape);
        let inv = tape.constant_f64(b, 1, &inv);
        let per_seq = tape.mul(s, inv);
        let floored = tape.max_scalar(per_seq, floor);
        let cnt = tape.constant_f64(b, 1, &counts);
        let weighted = tape.mul(floored, cnt);
        let total = tape.sum(weighted);
        Some(tape.scale(total, 1.0 / n))
    }
}

impl WorldModel {
    /// Unroll [`WorldModel::observe_step`] over `batch` and assemble
    /// `F_o + F_o_kl + F_r + F_p_kl + F_dist − λ_mix · L_mix`.
    ///
    /// `F_o`, `F_r` and the representation KL average over valid steps. The
    /// preference KL, the distance term and the mixture entropy average over
    /// steps with success mask `m = 1` only, so with `m ≡ 0` the preference
    /// parameters get no gradient.
    pub fn world_model_loss<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        batch: &SequenceBatch,
        noise: &mut dyn Noise,
    ) -> Result<WorldModelLoss> {
        let d = self.dims;
        contract!(
            batch.obs_dim == d.obs_dim && batch.action_dim == d.action_dim && batch.goal_dim == d.goal_dim,
            "batch dims ({}, {}, {}) do not match model ({}, {}, {})",
            batch.obs_dim,
            batch.action_dim,
            batch.goal_dim,
            d.obs_dim,
            d.action_dim,
            d.goal_dim
        );
        let b = batch.batch;
        let cfg = &self.config;
        let goal = tape.constant_f64(b, d.goal_dim, &batch.goals);
        let query = self.query(tape, params, goal);
        let weights = self.mixture_weights(tape, params, query);
        let mut state = LatentState::<T>::zeros(b, cfg).on_tape(tape);
        let mut states = Vec::with_capacity(batch.len);
        let (mut f_o, mut f_okl, mut f_r) = (Masked::new(), Masked::new(), Masked::new());
        let (mut f_pkl, mut f_dist, mut l_mix) = (Masked::new(), Masked::new(), Masked::new());
        for t in 0..batch.len {
            let obs = tape.constant_f64(b, d.obs_dim, batch.obs_at(t));
            let act = tape.constant_f64(b, d.action_dim, batch.actions_at(t));
            let out = self.observe_step(tape, params, state, act, obs, query, weights, noise)?;
            let valid = SequenceBatch::column(&batch.valid, t, b);
            let m = SequenceBatch::column(&batch.success, t, b);

            let recon = self.decode_mean(tape, params, out.next.s_o, out.next.h);
            let target = if cfg.obs_scale == 1.0 { obs } else { tape.scale(obs, cfg.obs_scale) };
            f_o.push(unit_nll_vars(tape, target, recon), valid);
            let r = tape.constant_f64(b, 1, SequenceBatch::column(&batch.rewards, t, b));
            let r_hat = self.reward_mean(tape, params, out.next.s_o, out.next.h);
            f_r.push(unit_nll_vars(tape, r, r_hat), valid);
            f_okl.push(kl_vars(tape, out.repr_post, out.repr_prior), valid);

            let pp = out.pref_prior;
            let pbar = moment_matched_vars(tape, pp.means, pp.log_stds, pp.weights, cfg.stoch_dim);
            f_pkl.push(kl_vars(tape, out.pref_post, pbar), m);
            let target = tape.stop_gradient(out.repr_post.mean);
            let diff = tape.sub(out.pref_post.mean, target);
            let sq = tape.square(diff);
            f_dist.push(tape.sum_cols(sq), m);
            l_mix.push(mixture_entropy_vars(tape, pbar, cfg.mix_reg), m);

            states.push(out.next);
            state = out.next;
        }

        let Some(fo) = f_o.mean(tape) else {
            let total = tape.scalar_const(0.0);
            let terms = LossVars { f_o: total, f_o_kl: total, f_r: total, f_p_kl: None, f_dist: None, mix_entropy: None };
            let breakdown = LossBreakdown { empty: true, ..Default::default() };
            return Ok(WorldModelLoss { total, terms, breakdown, states, query, weights });
        };
        let fr = f_r.mean(tape).expect("valid steps exist");
        let fokl = f_okl.free_bits_mean(tape, cfg.free_bits).expect("valid steps exist");
        let fpkl = f_pkl.free_bits_mean(tape, cfg.free_bits);
        let fdist = f_dist.mean(tape);
        let lmix = l_mix.mean(tape);

        let mut total = tape.add(fo, fokl);
        total = tape.add(total, fr);
        for term in [fpkl, fdist].into_iter().flatten() {
            total = tape.add(total, term);
        }
        if let Some(l) = lmix {
            let weighted = tape.scale(l, cfg.mix_coef);
            total = tape.sub(total, weighted);
        }
        tape.check_finite(total, "world model loss")?;
        let val = |tape: &Tape<T>, v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v).to_f64());
        let breakdown = LossBreakdown {
            f_o: val(tape, Some(fo)),
            f_o_kl: val(tape, Some(fokl)),
            f_r: val(tape, Some(fr)),
            f_p_kl: val(tape, fpkl),
            f_dist: val(tape, fdist),
            mix_entropy: val(tape, lmix),
            total: val(tape, Some(total)),
            empty: false,
        };
        let terms = LossVars { f_o: fo, f_o_kl: fokl, f_r: fr, f_p_kl: fpkl, f_dist: fdist, mix_entropy: lmix };
        Ok(WorldModelLoss { total, terms, breakdown, states, query, weights })
    }
}
