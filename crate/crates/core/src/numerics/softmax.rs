use alloc::vec::Vec;

use super::params::{Owner, ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::{contract, Result};
use crate::Real;

/// Sum whose result does not depend on the order of `values`: terms are
/// added in ascending order of value.
pub fn stable_sum<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 => T::ZERO,
        1 => values[0],
        _ => {
            let mut v: Vec<T> = values.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            v.into_iter().fold(T::ZERO, |s, x| s + x)
        }
    }
}

/// Softmax of `logits`. The maximum is subtracted first, so inputs that
/// coincide after that subtraction give bitwise-identical outputs.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    contract!(!logits.is_empty(), "softmax of an empty vector");
    contract!(logits.iter().all(|v| v.is_finite()), "softmax logits must be finite");
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| libm::exp(x - mx)).collect();
    let z = stable_sum(&e);
    Ok(e.into_iter().map(|x| x / z).collect())
}

/// Shannon entropy (nats) of a probability vector.
pub fn categorical_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * libm::log(x)).sum::<f64>()
}

/// Goal-queried gate: logits `z = W q + b`, mixture weights `softmax(z)`.
///
/// `W` is stored transposed (`d_q × M`) so a batch of queries maps to logits
/// with one matrix product.
#[derive(Debug, Clone, Copy)]
pub struct MixtureGate {
    pub weight: ParamId,
    pub bias: ParamId,
    pub components: usize,
    pub query_dim: usize,
}

impl MixtureGate {
    pub fn new<T: Real, R: rand::Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        prefix: &str,
        query_dim: usize,
        components: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = params.glorot(&alloc::format!("{prefix}.w"), query_dim, components, Owner::World, rng)?;
        let bias = params.zeros(&alloc::format!("{prefix}.b"), &[components], Owner::World)?;
        Ok(MixtureGate { weight, bias, components, query_dim })
    }

    /// Logits for a batch of queries (`rows × d_q` → `rows × M`).
    pub fn logits<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, query: Var) -> Var {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let z = tape.matmul(query, w);
        tape.add_row(z, b)
    }

    pub fn weights<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, query: Var) -> Var {
        let z = self.logits(tape, params, query);
        tape.softmax_rows(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_and_closed_form() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[core::f64::consts::LN_2, 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shift_is_bitwise_invariant_for_exact_shifts() {
        for c in [0.5, 2.0, -3.25, 0.0] {
            let a = softmax(&[5.0, 5.0 + c, 5.0]).unwrap();
            let b = softmax(&[0.0, c, 0.0]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(softmax(&[]).is_err());
    }

    proptest! {
        #[test]
        fn sums_to_one(logits in proptest::collection::vec(-30.0f64..30.0, 1..12)) {
            let p = softmax(&logits).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn stable_sum_ignores_order(mut v in proptest::collection::vec(-1e3f64..1e3, 0..10), k in 0usize..10) {
            let a = stable_sum(&v);
            if !v.is_empty() { let n = v.len(); v.rotate_left(k % n); }
            prop_assert_eq!(a.to_bits(), stable_sum(&v).to_bits());
        }
    }
}
