//! Finite-difference verification of tape gradients.

use alloc::string::String;
use alloc::vec::Vec;

use super::params::{GradTable, ParamId, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `(parameter name, max relative error over checked entries)`.
    pub per_param: Vec<(String, f64)>,
    pub epsilon: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `|a − n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compare `analytic` against central differences of `loss` at every entry of
/// the parameters in `which` (all parameters when `None`), visiting at most
/// `max_entries` entries per tensor, evenly strided.
///
/// The derivative uses the sixth-order central stencil
/// `(45·Δ₁ − 9·Δ₂ + Δ₃) / 60ε` with `Δₖ = f(x+kε) − f(x−kε)`. The high order
/// lets `ε` be large enough that cancellation noise in the differences stays
/// far below the 64-bit tolerances even for tiny gradient entries.
pub fn grad_check(
    params: &ParameterSet<f64>,
    analytic: &GradTable<f64>,
    which: Option<&[ParamId]>,
    epsilon: f64,
    max_entries: usize,
    mut loss: impl FnMut(&ParameterSet<f64>) -> f64,
) -> GradCheckReport {
    let ids: Vec<ParamId> = match which {
        Some(w) => w.to_vec(),
        None => params.ids().collect(),
    };
    let mut work = params.clone();
    let mut per_param = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.data(id).len();
        let stride = n.div_ceil(max_entries.max(1)).max(1);
        let mut worst: f64 = 0.0;
        for k in (0..n).step_by(stride) {
            let x0 = params.data(id)[k];
            let mut at = |dx: f64| {
                work.data_mut(id)[k] = x0 + dx;
                let v = loss(&work);
                work.data_mut(id)[k] = x0;
                v
            };
            let d1 = at(epsilon) - at(-epsilon);
            let d2 = at(2.0 * epsilon) - at(-2.0 * epsilon);
            let d3 = at(3.0 * epsilon) - at(-3.0 * epsilon);
            let numeric = (45.0 * d1 - 9.0 * d2 + d3) / (60.0 * epsilon);
            let a = analytic.get(id).map_or(0.0, |g| g[k]);
            worst = worst.max(relative_error(a, numeric));
        }
        per_param.push((params.entry(id).name.clone(), worst));
    }
    GradCheckReport { per_param, epsilon }
}
