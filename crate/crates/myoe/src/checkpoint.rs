//! The `MYOE1` parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MYOE1"
//! u32 metadata length, metadata (UTF-8 TOML: step and the run config)
//! u32 tensor count
//! per tensor:
//!   u32 name length, name (UTF-8)
//!   u8 dtype (1 = f32, 2 = f64), u8 owner, u8 rank, u32 × rank shape
//!   values, little-endian, in the dtype's width
//! ```
//!
//! Tensors are written as f64 unless asked otherwise, which keeps the
//! round trip bit-exact for the f64 parameters the agents train.

use std::fs;
use std::path::Path;

use myoe_core::config::RunConfig;
use myoe_core::numerics::{Owner, ParameterSet};
use myoe_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 5] = b"MYOE1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config: RunConfig,
    pub params: ParameterSet<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    step: u64,
    config: RunConfig,
}

fn owner_code(o: Owner) -> u8 {
    Owner::ALL.iter().position(|&x| x == o).unwrap_or(0) as u8
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Params(format!("checkpoint: {}", msg.into()))
}

fn u32_le(n: usize) -> [u8; 4] {
    (n as u32).to_le_bytes()
}

pub fn encode(step: u64, config: &RunConfig, params: &ParameterSet<f64>, dtype: Dtype) -> Result<Vec<u8>> {
    let meta = toml::to_string(&Meta { step, config: config.clone() }).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = Vec::with_capacity(64 + params.scalar_count(myoe_core::numerics::OwnerMask::all()) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&u32_le(meta.len()));
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&u32_le(params.len()));
    for (_, e) in params.iter() {
        out.extend_from_slice(&u32_le(e.name.len()));
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&[dtype as u8, owner_code(e.owner), e.shape.len() as u8]);
        for &d in &e.shape {
            out.extend_from_slice(&u32_le(d));
        }
        match dtype {
            Dtype::F64 => e.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Dtype::F32 => e.data.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("name is not UTF-8"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, at: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(bad("missing MYOE1 magic"));
    }
    let meta: Meta = toml::from_str(&r.string()?).map_err(|e| bad(format!("metadata: {e}")))?;
    let count = r.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let name = r.string()?;
        let (dtype, owner, rank) = (r.u8()?, r.u8()?, r.u8()? as usize);
        let owner = *Owner::ALL.get(owner as usize).ok_or_else(|| bad(format!("`{name}`: unknown owner {owner}")))?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = match dtype {
            2 => r.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            1 => r.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            t => return Err(bad(format!("`{name}`: unknown dtype tag {t}"))),
        };
        params.add(&name, &shape, owner, data)?;
    }
    if r.at != bytes.len() {
        return Err(bad("trailing bytes after the tensor table"));
    }
    Ok(Checkpoint { step: meta.step, config: meta.config, params })
}

pub fn save(path: &Path, step: u64, config: &RunConfig, params: &ParameterSet<f64>) -> Result<()> {
    let bytes = encode(step, config, params, Dtype::F64)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

/// Copy checkpoint tensors into `target`. Both tables must hold the same
/// names with the same shapes and owners.
pub fn restore(target: &mut ParameterSet<f64>, source: &ParameterSet<f64>) -> Result<()> {
    if target.len() != source.len() {
        return Err(bad(format!("{} tensors, the model has {}", source.len(), target.len())));
    }
    for (_, e) in source.iter() {
        let id = target.id(&e.name).ok_or_else(|| bad(format!("model has no tensor `{}`", e.name)))?;
        if target.entry(id).owner != e.owner {
            return Err(bad(format!("`{}` belongs to a different submodel", e.name)));
        }
        target.assign(&e.name, &e.shape, e.data.clone())?;
    }
    Ok(())
}
