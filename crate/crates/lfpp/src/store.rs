//! Resumable replica campaigns persisted as JSON lines.
//!
//! The first line is `{"config": ...}`; each further line is one
//! [`ReplicaRecord`]. A replica is complete once all of its records are on
//! disk. Reopening a file with the same config keeps the complete replicas,
//! drops anything partial (such as a torn last line) and computes the rest.
//! The file is rewritten in replica order on open, so an interrupted and
//! resumed campaign ends with the same bytes as an uninterrupted one.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lfpp_core::estimators::ReplicaExecutor;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub seed: u64,
    pub replica: usize,
    pub xi: f64,
    pub epsilon: Option<f64>,
    pub observable: String,
    /// Secondary coordinate such as a radius or annulus ratio `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: Value,
}

pub struct Campaign {
    sink: Option<(PathBuf, File)>,
    per_replica: usize,
    done: BTreeMap<usize, Vec<ReplicaRecord>>,
}

impl Campaign {
    /// Campaign kept only in memory.
    pub fn ephemeral(per_replica: usize) -> Self {
        Self { sink: None, per_replica, done: BTreeMap::new() }
    }

    /// Opens or creates `path`. Existing content must carry the same config.
    pub fn open(path: &Path, config: &Value, per_replica: usize) -> Result<Self> {
        let mut done: BTreeMap<usize, Vec<ReplicaRecord>> = BTreeMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            // Only newline-terminated lines were written completely.
            let complete = match text.rfind('\n') {
                Some(i) => &text[..i],
                None => "",
            };
            let mut lines = complete.lines();
            if let Some(first) = lines.next() {
                let header: Header = serde_json::from_str(first).with_context(|| format!("bad header in {}", path.display()))?;
                if &header.config != config {
                    bail!("{} was written by a run with a different config", path.display());
                }
                for (k, line) in lines.enumerate() {
                    let rec: ReplicaRecord =
                        serde_json::from_str(line).with_context(|| format!("bad record on line {} of {}", k + 2, path.display()))?;
                    done.entry(rec.replica).or_default().push(rec);
                }
            }
            done.retain(|_, recs| recs.len() == per_replica);
        }
        let mut file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut buf = serde_json::to_vec(&Header { config: config.clone() })?;
        buf.push(b'\n');
        for rec in done.values().flatten() {
            serde_json::to_writer(&mut buf, rec)?;
            buf.push(b'\n');
        }
        file.write_all(&buf)?;
        file.sync_data()?;
        drop(file);
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self { sink: Some((path.to_path_buf(), file)), per_replica, done })
    }

    /// Replicas already complete.
    pub fn completed(&self) -> usize {
        self.done.len()
    }

    fn append(&mut self, batch: &[Vec<ReplicaRecord>]) -> Result<()> {
        if let Some((path, file)) = &mut self.sink {
            let mut buf = Vec::new();
            for rec in batch.iter().flatten() {
                serde_json::to_writer(&mut buf, rec)?;
                buf.push(b'\n');
            }
            file.write_all(&buf).with_context(|| format!("appending to {}", path.display()))?;
            file.flush()?;
        }
        Ok(())
    }

    /// Runs replicas `0..replicas`, skipping complete ones, `batch` at a time,
    /// persisting each batch before starting the next. Returns the records of
    /// every replica in order.
    pub fn run<E, F>(&mut self, replicas: usize, exec: &E, batch: usize, f: F) -> Result<Vec<Vec<ReplicaRecord>>>
    where
        E: ReplicaExecutor,
        F: Fn(usize) -> Result<Vec<ReplicaRecord>> + Sync + Send,
    {
        if let Some(&k) = self.done.keys().find(|&&k| k >= replicas) {
            bail!("campaign holds replica {k} but only {replicas} were requested");
        }
        let pending: Vec<usize> = (0..replicas).filter(|k| !self.done.contains_key(k)).collect();
        for chunk in pending.chunks(batch.max(1)) {
            let results = exec.map_replicas(chunk.len(), |i| f(chunk[i]));
            let results: Vec<Vec<ReplicaRecord>> = results.into_iter().collect::<Result<_>>()?;
            for (&k, recs) in chunk.iter().zip(&results) {
                if recs.len() != self.per_replica {
                    bail!("replica {k} produced {} records, expected {}", recs.len(), self.per_replica);
                }
            }
            self.append(&results)?;
            for (&k, recs) in chunk.iter().zip(results) {
                self.done.insert(k, recs);
            }
        }
        Ok((0..replicas).map(|k| self.done[&k].clone()).collect())
    }
}
