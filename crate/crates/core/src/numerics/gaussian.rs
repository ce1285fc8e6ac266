//! Diagonal Gaussians: value-level algebra and the matching tape builders.

use alloc::vec::Vec;

use super::softmax::stable_sum;
use super::tape::{Tape, Var};
use crate::error::{contract, Error, Result};
use crate::rng::Noise;
use crate::Real;

pub const LOG_STD_MIN: f64 = -8.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// ½ ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
/// ½ ln(2πe)
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_std: Vec<f64>,
}

impl DiagGaussian {
    /// Builds a Gaussian; `log_std` is clamped into `[-8, 2]`.
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        contract!(!mean.is_empty(), "Gaussian dimension must be at least 1");
        contract!(
            mean.len() == log_std.len(),
            "mean has {} entries but log_std has {}",
            mean.len(),
            log_std.len()
        );
        if !mean.iter().chain(&log_std).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "DiagGaussian parameters".into() });
        }
        let log_std = log_std.into_iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        Ok(DiagGaussian { mean, log_std })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(alloc::vec![0.0; dim], alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|&l| libm::exp(l)).collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(x)
            .map(|((&m, &l), &x)| {
                let z = (x - m) / libm::exp(l);
                -0.5 * z * z - l - HALF_LN_2PI
            })
            .sum()
    }

    pub fn sample(&self, noise: &mut dyn Noise) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.dim()).map(|_| noise.normal()).collect();
        reparameterized_sample(self, &eps).expect("noise has matching dimension")
    }
}

/// KL(q ‖ p) in nats.
pub fn kl_diag_gaussian(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64> {
    contract!(q.dim() == p.dim(), "KL between dimensions {} and {}", q.dim(), p.dim());
    let mut total = 0.0;
    for i in 0..q.dim() {
        let (lq, lp) = (q.log_std[i], p.log_std[i]);
        let vq = libm::exp(2.0 * lq);
        let vp = libm::exp(2.0 * lp);
        let d = q.mean[i] - p.mean[i];
        total += lp - lq + (vq + d * d) / (2.0 * vp) - 0.5;
    }
    Ok(total.max(0.0))
}

/// Differential entropy in nats.
pub fn entropy_diag_gaussian(d: &DiagGaussian) -> f64 {
    d.log_std.iter().map(|&l| HALF_LN_2PI_E + l).sum()
}

/// `mean + exp(log_std) ⊙ noise`.
pub fn reparameterized_sample(d: &DiagGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    contract!(noise.len() == d.dim(), "noise has {} entries for a {}-dim Gaussian", noise.len(), d.dim());
    Ok(d.mean.iter().zip(&d.log_std).zip(noise).map(|((&m, &l), &n)| m + libm::exp(l) * n).collect())
}

/// Moment-matched single Gaussian of the mixture `Σ w_i N(μ_i, σ_i²)`:
/// mean `Σ w_i μ_i`, variance `Σ w_i (σ_i² + (μ_i − μ̄)²)` per dimension.
pub fn moment_matched(components: &[DiagGaussian], weights: &[f64]) -> Result<DiagGaussian> {
    contract!(!components.is_empty(), "mixture needs at least one component");
    contract!(components.len() == weights.len(), "{} components but {} weights", components.len(), weights.len());
    let d = components[0].dim();
    contract!(components.iter().all(|c| c.dim() == d), "mixture components differ in dimension");
    let mut mean = Vec::with_capacity(d);
    let mut log_std = Vec::with_capacity(d);
    let mut terms = alloc::vec![0.0; components.len()];
    for j in 0..d {
        for (t, (c, &w)) in terms.iter_mut().zip(components.iter().zip(weights)) {
            *t = w * c.mean[j];
        }
        let mu = stable_sum(&terms);
        for (t, (c, &w)) in terms.iter_mut().zip(components.iter().zip(weights)) {
            let dm = c.mean[j] - mu;
            *t = w * (libm::exp(2.0 * c.log_std[j]) + dm * dm);
        }
        let var = stable_sum(&terms);
        mean.push(mu);
        log_std.push(0.5 * libm::log(var));
    }
    DiagGaussian::new(mean, log_std)
}

/// A batch of diagonal Gaussians on a tape: `mean` and `log_std` are `rows × d`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianVars {
    pub mean: Var,
    pub log_std: Var,
}

impl GaussianVars {
    /// Split a head output `rows × 2d` into mean and clamped log-std.
    pub fn from_head<T: Real>(tape: &mut Tape<T>, head: Var, d: usize) -> Self {
        let mean = tape.slice(head, 0, d);
        let raw = tape.slice(head, d, d);
        let log_std = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX);
        GaussianVars { mean, log_std }
    }

    pub fn dim<T: Real>(&self, tape: &Tape<T>) -> usize {
        tape.shape(self.mean).1
    }

    /// Reparameterized sample with noise drawn from `noise`.
    pub fn sample<T: Real>(&self, tape: &mut Tape<T>, noise: &mut dyn Noise) -> Var {
        let (r, c) = tape.shape(self.mean);
        let mut eps = alloc::vec![0.0; r * c];
        noise.fill(&mut eps);
        let e = tape.constant_f64(r, c, &eps);
        self.sample_with(tape, e)
    }

    pub fn sample_with<T: Real>(&self, tape: &mut Tape<T>, eps: Var) -> Var {
        let std = tape.exp(self.log_std);
        let scaled = tape.mul(std, eps);
        tape.add(self.mean, scaled)
    }

    /// Value-level Gaussian for row `r`.
    pub fn row<T: Real>(&self, tape: &Tape<T>, r: usize) -> Result<DiagGaussian> {
        let m = tape.value(self.mean).row(r).iter().map(|v| v.to_f64()).collect();
        let l = tape.value(self.log_std).row(r).iter().map(|v| v.to_f64()).collect();
        DiagGaussian::new(m, l)
    }
}

/// Per-row KL(q ‖ p), `rows × 1`.
pub fn kl_vars<T: Real>(tape: &mut Tape<T>, q: GaussianVars, p: GaussianVars) -> Var {
    let two_lq = tape.scale(q.log_std, 2.0);
    let var_q = tape.exp(two_lq);
    let m2lp = tape.scale(p.log_std, -2.0);
    let inv_var_p = tape.exp(m2lp);
    let diff = tape.sub(q.mean, p.mean);
    let d2 = tape.square(diff);
    let num = tape.add(var_q, d2);
    let ratio = tape.mul(num, inv_var_p);
    let half = tape.scale(ratio, 0.5);
    let dl = tape.sub(p.log_std, q.log_std);
    let t = tape.add(dl, half);
    let t = tape.shift(t, -0.5);
    tape.sum_cols(t)
}

/// Per-row entropy, `rows × 1`.
pub fn entropy_vars<T: Real>(tape: &mut Tape<T>, g: GaussianVars) -> Var {
    let d = g.dim(tape);
    let s = tape.sum_cols(g.log_std);
    tape.shift(s, d as f64 * HALF_LN_2PI_E)
}

/// Per-row negative log-likelihood of `x` under `N(mean, I)`, `rows × 1`.
pub fn unit_nll_vars<T: Real>(tape: &mut Tape<T>, x: Var, mean: Var) -> Var {
    let d = tape.shape(mean).1;
    let diff = tape.sub(x, mean);
    let sq = tape.square(diff);
    let half = tape.scale(sq, 0.5);
    let s = tape.sum_cols(half);
    tape.shift(s, d as f64 * HALF_LN_2PI)
}

/// Per-row log-density of `x` under the Gaussian, `rows × 1`.
pub fn log_prob_vars<T: Real>(tape: &mut Tape<T>, g: GaussianVars, x: Var) -> Var {
    let d = g.dim(tape);
    let diff = tape.sub(x, g.mean);
    let neg_ls = tape.neg(g.log_std);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul(diff, inv_std);
    let z2 = tape.square(z);
    let half = tape.scale(z2, -0.5);
    let t = tape.sub(half, g.log_std);
    let s = tape.sum_cols(t);
    tape.shift(s, -(d as f64) * HALF_LN_2PI)
}

/// Moment-matched Gaussian of `M` components laid side by side
/// (`rows × M·d` means and log-stds) under `weights` (`rows × M`).
pub fn moment_matched_vars<T: Real>(
    tape: &mut Tape<T>,
    means: Var,
    log_stds: Var,
    weights: Var,
    d: usize,
) -> GaussianVars {
    let m = tape.shape(weights).1;
    let mean = tape.mixture(means, weights, d);
    let tiled: Vec<Var> = (0..m).map(|_| mean).collect();
    let tiled = tape.concat(&tiled);
    let dev = tape.sub(means, tiled);
    let dev2 = tape.square(dev);
    let two_ls = tape.scale(log_stds, 2.0);
    let var_i = tape.exp(two_ls);
    let second = tape.add(var_i, dev2);
    let var = tape.mixture(second, weights, d);
    let ln_var = tape.ln(var);
    let ls = tape.scale(ln_var, 0.5);
    let log_std = tape.clamp(ls, LOG_STD_MIN, LOG_STD_MAX);
    GaussianVars { mean, log_std }
}
