//! Demonstration files and replay snapshots.
//!
//! One JSON object per line. The first line is a header describing the
//! environment layout and how the episodes were produced; every following
//! line is one episode. Reals are written with 17 significant digits so a
//! save/load round trip reproduces every bit.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use myoe_core::env::{EnvSpec, ObsLayout, Perturbation};
use myoe_core::replay::{EpisodeRecord, ReplayBuffer};
use myoe_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

pub const DEMO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferMeta {
    pub capacity: usize,
    pub expert_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoHeader {
    pub kind: String,
    pub schema: u32,
    pub env: String,
    pub layout: ObsLayout,
    pub action_dim: usize,
    pub perturbation: Perturbation,
    pub episodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<BufferMeta>,
}

#[derive(Serialize)]
struct EpisodeOut<'a> {
    kind: &'static str,
    schema: u32,
    env: &'a str,
    seed: u64,
    steps: usize,
    observations: Box<RawValue>,
    actions: Box<RawValue>,
    rewards: Box<RawValue>,
    dones: &'a [bool],
    success: bool,
    expert: bool,
    goal: Box<RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeIn {
    kind: String,
    schema: u32,
    env: String,
    seed: u64,
    steps: usize,
    observations: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    success: bool,
    expert: bool,
    goal: Vec<f64>,
}

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn array<'a>(xs: impl IntoIterator<Item = &'a f64>) -> Result<Box<RawValue>> {
    let mut s = String::from("[");
    for (i, x) in xs.into_iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::BadRecord(format!("non-finite value {x} cannot be written")));
        }
        if i > 0 {
            s.push(',');
        }
        s.push_str(&fmt17(*x));
    }
    s.push(']');
    RawValue::from_string(s).map_err(|e| Error::Io(e.to_string()))
}

fn episode_line(rec: &EpisodeRecord) -> Result<String> {
    rec.validate()?;
    let line = EpisodeOut {
        kind: "episode",
        schema: DEMO_SCHEMA_VERSION,
        env: &rec.env,
        seed: rec.seed,
        steps: rec.steps(),
        observations: array(rec.observations.iter().flatten())?,
        actions: array(rec.actions.iter().flatten())?,
        rewards: array(&rec.rewards)?,
        dones: &rec.dones,
        success: rec.success,
        expert: rec.expert,
        goal: array(&rec.goal)?,
    };
    serde_json::to_string(&line).map_err(|e| Error::Io(e.to_string()))
}

fn chunks(flat: Vec<f64>, width: usize, rows: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if width == 0 || flat.len() != width * rows {
        return Err(Error::BadRecord(format!("{what}: {} values do not fill {rows} rows of {width}", flat.len())));
    }
    Ok(flat.chunks(width).map(<[f64]>::to_vec).collect())
}

fn parse_episode(line: &str, header: &DemoHeader) -> Result<EpisodeRecord> {
    let e: EpisodeIn = serde_json::from_str(line).map_err(|e| Error::BadRecord(e.to_string()))?;
    if e.kind != "episode" || e.schema != DEMO_SCHEMA_VERSION {
        return Err(Error::BadRecord(format!("expected an episode line of schema {DEMO_SCHEMA_VERSION}")));
    }
    if e.env != header.env {
        return Err(Error::BadRecord(format!("episode env `{}` differs from header env `{}`", e.env, header.env)));
    }
    let n = e.steps + 1;
    let rec = EpisodeRecord {
        env: e.env,
        seed: e.seed,
        layout: header.layout,
        observations: chunks(e.observations, header.layout.total(), n, "observations")?,
        actions: chunks(e.actions, header.action_dim, n, "actions")?,
        rewards: e.rewards,
        dones: e.dones,
        success: e.success,
        expert: e.expert,
        goal: e.goal,
    };
    rec.validate()?;
    Ok(rec)
}

/// Header for `episodes` of environment `spec_name`.
pub fn demo_header(spec_name: &str, episodes: &[EpisodeRecord], perturbation: Perturbation) -> Result<DemoHeader> {
    let first = episodes.first().ok_or_else(|| Error::BadRecord("no episodes to write".into()))?;
    if let Some(bad) = episodes.iter().find(|e| e.env != spec_name || e.layout != first.layout) {
        return Err(Error::BadRecord(format!("episode from `{}` does not match `{spec_name}`", bad.env)));
    }
    Ok(DemoHeader {
        kind: "demo_header".into(),
        schema: DEMO_SCHEMA_VERSION,
        env: spec_name.to_string(),
        layout: first.layout,
        action_dim: first.action_dim(),
        perturbation,
        episodes: episodes.len(),
        buffer: None,
    })
}

/// Serialize a header and episodes to NDJSON text.
pub fn to_ndjson(header: &DemoHeader, episodes: &[EpisodeRecord]) -> Result<String> {
    let mut out = serde_json::to_string(header).map_err(|e| Error::Io(e.to_string()))?;
    out.push('\n');
    for e in episodes {
        out.push_str(&episode_line(e)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_ndjson(text: &str) -> Result<(DemoHeader, Vec<EpisodeRecord>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::BadRecord("empty demonstration file".into()))?;
    let header: DemoHeader = serde_json::from_str(first).map_err(|e| Error::BadRecord(format!("header: {e}")))?;
    if header.schema != DEMO_SCHEMA_VERSION {
        return Err(Error::BadRecord(format!("unsupported demonstration schema {}", header.schema)));
    }
    let episodes = lines.map(|l| parse_episode(l, &header)).collect::<Result<Vec<_>>>()?;
    if episodes.len() != header.episodes {
        return Err(Error::BadRecord(format!("header promises {} episodes, found {}", header.episodes, episodes.len())));
    }
    Ok((header, episodes))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut text = String::new();
    for line in BufReader::new(f).lines() {
        text.push_str(&line.map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
        text.push('\n');
    }
    Ok(text)
}

pub fn save_demos(path: &Path, spec: &EnvSpec, perturbation: Perturbation, episodes: &[EpisodeRecord]) -> Result<()> {
    let header = demo_header(&spec.name, episodes, perturbation)?;
    write_text(path, &to_ndjson(&header, episodes)?)
}

pub fn load_demos(path: &Path) -> Result<(DemoHeader, Vec<EpisodeRecord>)> {
    from_ndjson(&read_text(path)?).map_err(|e| match e {
        Error::BadRecord(m) => Error::BadRecord(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Write every buffered episode, expert episodes first.
pub fn save_buffer(path: &Path, buffer: &ReplayBuffer) -> Result<()> {
    let episodes: Vec<EpisodeRecord> = buffer.expert_episodes().chain(buffer.agent_episodes()).cloned().collect();
    let name = episodes.first().map(|e| e.env.clone()).unwrap_or_default();
    let mut header = demo_header(&name, &episodes, Perturbation::None)?;
    header.kind = "buffer_header".into();
    header.buffer = Some(BufferMeta { capacity: buffer.capacity(), expert_ratio: buffer.expert_ratio() });
    write_text(path, &to_ndjson(&header, &episodes)?)
}

pub fn load_buffer(path: &Path) -> Result<ReplayBuffer> {
    let (header, episodes) = load_demos(path)?;
    let meta = header.buffer.ok_or_else(|| Error::BadRecord("file has no buffer metadata".into()))?;
    let mut buffer = ReplayBuffer::new(meta.capacity, meta.expert_ratio);
    for e in episodes {
        buffer.append_episode(e)?;
    }
    Ok(buffer)
}
