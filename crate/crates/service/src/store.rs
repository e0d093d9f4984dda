//! Durable storage: one append-only JSONL log per record type plus a world
//! snapshot per session, replaced atomically by write-then-rename.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use worldgraph_core::engine::World;

use crate::api::{SessionInfo, StoredAnnotation, TurnRecord};
use crate::error::ServiceError;

pub const SESSIONS_LOG: &str = "sessions.jsonl";
pub const TURNS_LOG: &str = "turns.jsonl";
pub const ANNOTATIONS_LOG: &str = "annotations.jsonl";
const SNAPSHOT_DIR: &str = "snapshots";

/// A session's world after `turn` turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub turn: u32,
    pub world: World,
}

/// Everything read back from a store directory.
#[derive(Debug, Default)]
pub struct Recovered {
    pub sessions: Vec<SessionInfo>,
    pub turns: Vec<TurnRecord>,
    /// In log order; later entries supersede earlier ones for the same key.
    pub annotations: Vec<StoredAnnotation>,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    /// Serializes appends and snapshot replacement.
    writer: Mutex<()>,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Store, ServiceError> {
        fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
        Ok(Store { dir: dir.to_path_buf(), writer: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one record and syncs it to disk before returning.
    pub fn append<T: Serialize>(&self, log: &str, record: &T) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(record).map_err(|e| ServiceError::Store(e.to_string()))?;
        line.push('\n');
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(log))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    fn snapshot_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(SNAPSHOT_DIR).join(format!("{session_id}.json"))
    }

    pub fn write_snapshot(&self, snapshot: &Snapshot) -> Result<(), ServiceError> {
        let bytes = serde_json::to_vec(snapshot).map_err(|e| ServiceError::Store(e.to_string()))?;
        let path = self.snapshot_path(&snapshot.session_id);
        let tmp = path.with_extension("json.tmp");
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn read_snapshot(&self, session_id: &str) -> Result<Option<Snapshot>, ServiceError> {
        let path = self.snapshot_path(session_id);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path)?;
        let snap: Snapshot = serde_json::from_slice(&bytes)
            .map_err(|e| ServiceError::Store(format!("{}: {e}", path.display())))?;
        snap.world
            .graph
            .check_invariants()
            .map_err(|e| ServiceError::Store(format!("{}: {e}", path.display())))?;
        Ok(Some(snap))
    }

    pub fn recover(&self) -> Result<Recovered, ServiceError> {
        Ok(Recovered {
            sessions: self.read_log(SESSIONS_LOG)?,
            turns: self.read_log(TURNS_LOG)?,
            annotations: self.read_log(ANNOTATIONS_LOG)?,
        })
    }

    /// Reads a log. A torn final line, left by a crash mid-append, is
    /// dropped with a warning and cut from the file so later appends start
    /// on a fresh line; corruption anywhere else is an error.
    fn read_log<T: DeserializeOwned>(&self, log: &str) -> Result<Vec<T>, ServiceError> {
        let path = self.dir.join(log);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let lines: Vec<String> = BufReader::new(File::open(&path)?).lines().collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(lines.len());
        let mut kept: Vec<&str> = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => {
                    out.push(r);
                    kept.push(line);
                }
                Err(e) if i + 1 == lines.len() => {
                    log::warn!("{}: dropping torn final line: {e}", path.display());
                    let tmp = path.with_extension("jsonl.tmp");
                    let body: String = kept.iter().map(|l| format!("{l}\n")).collect();
                    {
                        let mut f = File::create(&tmp)?;
                        f.write_all(body.as_bytes())?;
                        f.sync_all()?;
                    }
                    fs::rename(&tmp, &path)?;
                }
                Err(e) => return Err(ServiceError::Store(format!("{} line {}: {e}", path.display(), i + 1))),
            }
        }
        Ok(out)
    }
}
