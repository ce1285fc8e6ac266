//! Named parameter tables with per-submodel ownership.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which submodel a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    /// World model θ.
    World,
    /// Policy ψ.
    Policy,
    /// Value network ν.
    Value,
    /// EMA target value network ν′. Never touched by the optimizer.
    TargetValue,
}

impl Owner {
    pub const ALL: [Owner; 4] = [Owner::World, Owner::Policy, Owner::Value, Owner::TargetValue];

    pub fn tag(self) -> &'static str {
        match self {
            Owner::World => "world",
            Owner::Policy => "policy",
            Owner::Value => "value",
            Owner::TargetValue => "target_value",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Set of owners, used to choose which parameters a tape differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OwnerMask(u8);

impl OwnerMask {
    pub const NONE: OwnerMask = OwnerMask(0);

    pub fn only(owner: Owner) -> Self {
        OwnerMask(owner.bit())
    }

    pub fn all() -> Self {
        Owner::ALL.iter().fold(OwnerMask(0), |m, &o| m.with(o))
    }

    pub fn with(self, owner: Owner) -> Self {
        OwnerMask(self.0 | owner.bit())
    }

    pub fn contains(self, owner: Owner) -> bool {
        self.0 & owner.bit() != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub owner: Owner,
    pub data: Vec<T>,
}

impl<T> ParamEntry<T> {
    /// `(rows, cols)` as stored on the tape. Vectors are row vectors.
    pub fn matrix_shape(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => (1, self.data.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet<T> {
    entries: Vec<ParamEntry<T>>,
    index: BTreeMap<String, usize>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet { entries: Vec::new(), index: BTreeMap::new() }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], owner: Owner, data: Vec<T>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Params(format!("duplicate parameter name `{name}`")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() || shape.is_empty() || shape.len() > 2 {
            return Err(Error::Params(format!(
                "parameter `{name}`: shape {shape:?} does not match {} values",
                data.len()
            )));
        }
        let id = self.entries.len();
        self.entries.push(ParamEntry { name: name.to_string(), shape: shape.to_vec(), owner, data });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize], owner: Owner) -> Result<ParamId> {
        let n = shape.iter().product();
        self.add(name, shape, owner, alloc::vec![T::ZERO; n])
    }

    /// Glorot-uniform initialised weight matrix.
    pub fn glorot<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        owner: Owner,
        rng: &mut R,
    ) -> Result<ParamId> {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let data = (0..fan_in * fan_out)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        self.add(name, &[fan_in, fan_out], owner, data)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn data(&self, id: ParamId) -> &[T] {
        &self.entries[id.0].data
    }

    /// Mutable access to values. Shape is fixed after creation.
    pub fn data_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.entries[id.0].data
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<T>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    /// Number of scalars owned by any owner in `mask`.
    pub fn scalar_count(&self, mask: OwnerMask) -> usize {
        self.entries.iter().filter(|e| mask.contains(e.owner)).map(|e| e.data.len()).sum()
    }

    /// Replace the values of `name`, checking the shape.
    pub fn assign(&mut self, name: &str, shape: &[usize], data: Vec<T>) -> Result<()> {
        let id = self.id(name).ok_or_else(|| Error::Params(format!("unknown parameter `{name}`")))?;
        let e = &mut self.entries[id.0];
        if e.shape != shape || e.data.len() != data.len() {
            return Err(Error::Params(format!(
                "parameter `{name}`: shape {shape:?} does not match stored {:?}",
                e.shape
            )));
        }
        e.data = data;
        Ok(())
    }

    /// Copy every tensor into another precision.
    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    owner: e.owner,
                    data: e.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.data.iter().all(|v| v.is_finite()))
    }
}

/// Gradients keyed by parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradTable<T> {
    pub grads: BTreeMap<ParamId, Vec<T>>,
}

impl<T: Real> GradTable<T> {
    pub fn new() -> Self {
        GradTable { grads: BTreeMap::new() }
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.grads.get(&id).map(|v| v.as_slice())
    }

    pub fn accumulate(&mut self, id: ParamId, g: &[T]) {
        match self.grads.get_mut(&id) {
            Some(acc) => {
                for (a, &b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => {
                self.grads.insert(id, g.to_vec());
            }
        }
    }

    pub fn merge(&mut self, other: GradTable<T>) {
        for (id, g) in other.grads {
            self.accumulate(id, &g);
        }
    }

    pub fn global_norm(&self) -> f64 {
        let sq: f64 = self.grads.values().flat_map(|g| g.iter()).map(|v| v.to_f64() * v.to_f64()).sum();
        libm::sqrt(sq)
    }

    /// Largest absolute gradient entry of `id`, or 0 when absent.
    pub fn max_abs(&self, id: ParamId) -> f64 {
        self.get(id).map_or(0.0, |g| g.iter().fold(0.0, |m, v| m.max(v.to_f64().abs())))
    }

    /// True when every gradient belonging to an owner in `mask` is exactly zero (or absent).
    pub fn is_zero_for(&self, params: &ParameterSet<T>, mask: OwnerMask) -> bool {
        self.grads
            .iter()
            .filter(|(id, _)| mask.contains(params.entry(**id).owner))
            .all(|(_, g)| g.iter().all(|v| v.to_f64() == 0.0))
    }
}
