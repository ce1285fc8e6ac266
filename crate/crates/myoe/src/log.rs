//! NDJSON metrics log and the on-disk run sink.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use myoe_core::agent::Agent;
use myoe_core::config::RunConfig;
use myoe_core::harness::{MetricsRecord, RecordSink, LOG_SCHEMA_VERSION};
use myoe_core::{Error, Result};

use crate::checkpoint;

pub const LOG_FILE: &str = "log.ndjson";
pub const FINAL_CHECKPOINT: &str = "final.myoe";

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("step-{step:09}.myoe"))
}

/// Writes records to `<dir>/log.ndjson` and checkpoints next to it.
pub struct RunSink {
    dir: PathBuf,
    config: RunConfig,
    log: BufWriter<File>,
    started: Option<Instant>,
}

impl RunSink {
    /// `wall_clock` stamps every record with seconds since creation; leave it
    /// off when logs must compare bit for bit.
    pub fn create(dir: &Path, config: &RunConfig, wall_clock: bool) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(LOG_FILE);
        let log = BufWriter::new(File::create(&path).map_err(io(&path))?);
        Ok(RunSink { dir: dir.to_path_buf(), config: config.clone(), log, started: wall_clock.then(Instant::now) })
    }

    pub fn flush(&mut self) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        self.log.flush().map_err(io(&path))
    }
}

impl RecordSink for RunSink {
    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        let line = match self.started {
            Some(t) => {
                let mut r = record.clone();
                r.wall_clock = Some(t.elapsed().as_secs_f64());
                serde_json::to_string(&r)
            }
            None => serde_json::to_string(record),
        }
        .map_err(|e| Error::Io(e.to_string()))?;
        writeln!(self.log, "{line}").map_err(io(&path))
    }

    fn checkpoint(&mut self, step: u64, agent: &dyn Agent, final_checkpoint: bool) -> Result<()> {
        self.flush()?;
        let path = if final_checkpoint { self.dir.join(FINAL_CHECKPOINT) } else { checkpoint_path(&self.dir, step) };
        checkpoint::save(&path, step, &self.config, agent.params())
    }
}

/// Append records to an existing log, creating it if needed.
pub fn append_records(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(io(path))?;
    let mut w = BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// Parse a metrics log. A final line cut off mid-write is skipped.
pub fn read_log(path: &Path) -> Result<Vec<MetricsRecord>> {
    let f = File::open(path).map_err(io(path))?;
    let lines: Vec<String> = BufReader::new(f).lines().collect::<std::io::Result<_>>().map_err(io(path))?;
    let last = lines.len().saturating_sub(1);
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<MetricsRecord>(line) {
            Ok(r) if r.schema == LOG_SCHEMA_VERSION => out.push(r),
            Ok(r) => return Err(Error::BadRecord(format!("{}: unsupported log schema {}", path.display(), r.schema))),
            Err(_) if i == last => break,
            Err(e) => return Err(Error::BadRecord(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}
