//! Adam with bias correction and global-norm gradient clipping.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{GradTable, Owner, ParamId, ParameterSet};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm ceiling; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: 100.0 }
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<ParamId, Moments>,
}

/// What a successful step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub grad_norm: f64,
    pub clip_scale: f64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, moments: BTreeMap::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one update. Non-finite gradients reject the whole step and name
    /// the offending tensor; target-network tensors are never updated here.
    pub fn step<T: Real>(&mut self, params: &mut ParameterSet<T>, grads: &GradTable<T>) -> Result<StepInfo> {
        for (&id, g) in &grads.grads {
            if id.index() >= params.len() {
                return Err(Error::Params(format!("gradient for unknown parameter #{}", id.index())));
            }
            let e = params.entry(id);
            if e.owner == Owner::TargetValue {
                return Err(Error::Params(format!(
                    "`{}` belongs to the target network and only moves by EMA",
                    e.name
                )));
            }
            if g.len() != e.data.len() {
                return Err(Error::Params(format!("gradient for `{}` has wrong length", e.name)));
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { what: format!("gradient of `{}`", e.name) });
            }
        }
        let norm = grads.global_norm();
        let c = &self.config;
        let clip_scale = if c.clip_norm > 0.0 && norm > c.clip_norm { c.clip_norm / norm } else { 1.0 };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
        for (&id, g) in &grads.grads {
            let data = params.data_mut(id);
            let mo = self.moments.entry(id).or_insert_with(|| Moments {
                m: alloc::vec![0.0; data.len()],
                v: alloc::vec![0.0; data.len()],
            });
            for (k, p) in data.iter_mut().enumerate() {
                let gk = g[k].to_f64() * clip_scale;
                mo.m[k] = c.beta1 * mo.m[k] + (1.0 - c.beta1) * gk;
                mo.v[k] = c.beta2 * mo.v[k] + (1.0 - c.beta2) * gk * gk;
                let mh = mo.m[k] / bc1;
                let vh = mo.v[k] / bc2;
                *p -= T::from_f64(c.lr * mh / (libm::sqrt(vh) + c.eps));
            }
        }
        Ok(StepInfo { grad_norm: norm, clip_scale })
    }
}

/// Scale `grads` so its global norm is at most `max_norm`.
pub fn clip_global_norm<T: Real>(grads: &mut GradTable<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        let s = T::from_f64(max_norm / norm);
        for g in grads.grads.values_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64, owner: Owner) -> (ParameterSet<f64>, ParamId) {
        let mut ps = ParameterSet::new();
        let id = ps.add("x", &[1], owner, alloc::vec![v]).unwrap();
        (ps, id)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut ps, id) = one(1.25, Owner::World);
        let mut g = GradTable::new();
        g.accumulate(id, &[0.0]);
        Adam::new(AdamConfig::default()).step(&mut ps, &g).unwrap();
        assert_eq!(ps.data(id), &[1.25]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for gv in [0.3, -5.0, 42.0] {
            let (mut ps, id) = one(0.0, Owner::Policy);
            let mut g = GradTable::new();
            g.accumulate(id, &[gv]);
            let cfg = AdamConfig::default();
            Adam::new(cfg).step(&mut ps, &g).unwrap();
            // bias-corrected first step: lr · g / (|g| + eps)
            let expected = -cfg.lr * gv / (gv.abs() + cfg.eps);
            assert!((ps.data(id)[0] - expected).abs() < 1e-15);
            assert!((ps.data(id)[0] + cfg.lr * gv.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_by_name() {
        let (mut ps, id) = one(1.0, Owner::World);
        let mut g = GradTable::new();
        g.accumulate(id, &[f64::NAN]);
        let err = Adam::new(AdamConfig::default()).step(&mut ps, &g).unwrap_err();
        assert_eq!(err, Error::NonFinite { what: "gradient of `x`".into() });
        assert_eq!(ps.data(id), &[1.0]);
    }

    #[test]
    fn target_network_is_refused() {
        let (mut ps, id) = one(1.0, Owner::TargetValue);
        let mut g = GradTable::new();
        g.accumulate(id, &[1.0]);
        assert!(Adam::new(AdamConfig::default()).step(&mut ps, &g).is_err());
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut ps = ParameterSet::<f64>::new();
        let a = ps.add("a", &[2], Owner::World, alloc::vec![0.0; 2]).unwrap();
        let b = ps.add("b", &[1], Owner::World, alloc::vec![0.0]).unwrap();
        let mut g = GradTable::new();
        g.accumulate(a, &[300.0, 400.0]);
        g.accumulate(b, &[1200.0]);
        let before = clip_global_norm(&mut g, 100.0);
        assert!((before - 1300.0).abs() < 1e-9);
        assert!((g.global_norm() - 100.0).abs() < 1e-9);
        let info = Adam::new(AdamConfig::default()).step(&mut ps, &g).unwrap();
        assert!(info.clip_scale <= 1.0);
    }
}
