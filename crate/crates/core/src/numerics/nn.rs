//! Small dense networks and a gated recurrent cell, evaluated on a [`Tape`].

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{Owner, ParamId, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Dense {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        owner: Owner,
        rng: &mut R,
    ) -> Result<Self> {
        let w = params.glorot(&format!("{name}.w"), fan_in, fan_out, owner, rng)?;
        let b = params.zeros(&format!("{name}.b"), &[fan_out], owner)?;
        Ok(Dense { w, b, fan_in, fan_out })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, x: Var) -> Var {
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }
}

/// Dense layers with tanh between them and a linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes = [in, hidden.., out]`.
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        name: &str,
        sizes: &[usize],
        owner: Owner,
        rng: &mut R,
    ) -> Result<Self> {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(params, &format!("{name}.{i}"), w[0], w[1], owner, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, x: Var) -> Var {
        let n = self.layers.len();
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, params, h);
            if i + 1 < n {
                h = tape.tanh(h);
            }
        }
        h
    }

    /// Number of scalars in the network.
    pub fn scalar_count(&self) -> usize {
        self.layers.iter().map(|l| l.fan_in * l.fan_out + l.fan_out).sum()
    }
}

/// Gated recurrent unit:
/// `r = σ(x Wr + h Ur + br)`, `z = σ(x Wz + h Uz + bz)`,
/// `n = tanh(x Wn + bn + r ⊙ (h Un + bun))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
///
/// Input weights are packed as `in × 3h` in gate order (r, z, n).
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub b_input: ParamId,
    pub b_hidden: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParameterSet<T>,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        owner: Owner,
        rng: &mut R,
    ) -> Result<Self> {
        let w_input = params.glorot(&format!("{name}.w_input"), input_dim, 3 * hidden_dim, owner, rng)?;
        let w_hidden = params.glorot(&format!("{name}.w_hidden"), hidden_dim, 3 * hidden_dim, owner, rng)?;
        let b_input = params.zeros(&format!("{name}.b_input"), &[3 * hidden_dim], owner)?;
        let b_hidden = params.zeros(&format!("{name}.b_hidden"), &[3 * hidden_dim], owner)?;
        Ok(GruCell { w_input, w_hidden, b_input, b_hidden, input_dim, hidden_dim })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, h: Var, x: Var) -> Var {
        let hd = self.hidden_dim;
        assert_eq!(tape.shape(h).1, hd, "gru hidden width mismatch");
        assert_eq!(tape.shape(x).1, self.input_dim, "gru input width mismatch");
        let wi = tape.param(params, self.w_input);
        let wh = tape.param(params, self.w_hidden);
        let bi = tape.param(params, self.b_input);
        let bh = tape.param(params, self.b_hidden);
        let gx = tape.matmul(x, wi);
        let gx = tape.add_row(gx, bi);
        let gh = tape.matmul(h, wh);
        let gh = tape.add_row(gh, bh);
        let (xr, xz, xn) = (tape.slice(gx, 0, hd), tape.slice(gx, hd, hd), tape.slice(gx, 2 * hd, hd));
        let (hr, hz, hn) = (tape.slice(gh, 0, hd), tape.slice(gh, hd, hd), tape.slice(gh, 2 * hd, hd));
        let r = tape.add(xr, hr);
        let r = tape.sigmoid(r);
        let z = tape.add(xz, hz);
        let z = tape.sigmoid(z);
        let rh = tape.mul(r, hn);
        let n = tape.add(xn, rh);
        let n = tape.tanh(n);
        // h' = n + z ⊙ (h − n)
        let dh = tape.sub(h, n);
        let zdh = tape.mul(z, dh);
        tape.add(n, zdh)
    }
}
