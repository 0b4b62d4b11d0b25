//! Append-only annotation log.
//!
//! One JSON record per line. A record is fsynced before `append` returns, so
//! an acknowledged event survives a crash. Reads materialize the log with
//! last-write-wins per `(vid, annotator)`. A crash mid-write can only leave an
//! unterminated final line, which `open` truncates.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::aggregate::AnnotationEvent;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line} is not a valid record: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    seq: u64,
    #[serde(flatten)]
    event: AnnotationEvent,
}

type Key = (String, String);

struct Inner {
    file: File,
    seq: u64,
    events: BTreeMap<Key, AnnotationEvent>,
}

pub struct EventLog {
    path: PathBuf,
    inner: Mutex<Inner>,
}

/// What `open` found on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recovery {
    pub records: usize,
    pub truncated_bytes: u64,
}

impl EventLog {
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Recovery), StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let created = !path.exists();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path).map_err(io)?;
        if created {
            sync_parent(&path);
        }
        let mut buf = Vec::new();
        file.read_to_end(&mut buf).map_err(io)?;
        let complete = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let mut recovery = Recovery::default();
        if complete < buf.len() {
            recovery.truncated_bytes = (buf.len() - complete) as u64;
            log::warn!("{}: dropping {} bytes of a torn final record", path.display(), recovery.truncated_bytes);
            file.set_len(complete as u64).map_err(io)?;
            file.sync_all().map_err(io)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        let mut events = BTreeMap::new();
        let mut seq = 0;
        for (i, line) in buf[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                detail: e.to_string(),
            })?;
            seq = seq.max(rec.seq);
            recovery.records += 1;
            events.insert((rec.event.vid.clone(), rec.event.annotator_id.clone()), rec.event);
        }
        Ok((Self { path, inner: Mutex::new(Inner { file, seq, events }) }, recovery))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably appends `event`, replacing any earlier event for the same
    /// clip and annotator. Returns the record's sequence number.
    pub fn append(&self, event: AnnotationEvent) -> Result<u64, StoreError> {
        let mut inner = self.inner.lock().expect("event log lock poisoned");
        let seq = inner.seq + 1;
        let mut line = serde_json::to_vec(&Record { seq, event: event.clone() }).expect("record serializes");
        line.push(b'\n');
        let io = |source| StoreError::Io { path: self.path.clone(), source };
        inner.file.write_all(&line).map_err(io)?;
        inner.file.sync_data().map_err(io)?;
        inner.seq = seq;
        inner.events.insert((event.vid.clone(), event.annotator_id.clone()), event);
        Ok(seq)
    }

    pub fn get(&self, vid: &str, annotator: &str) -> Option<AnnotationEvent> {
        let inner = self.inner.lock().expect("event log lock poisoned");
        inner.events.get(&(vid.to_string(), annotator.to_string())).cloned()
    }

    /// Current events ordered by `(vid, annotator)`.
    pub fn snapshot(&self) -> Vec<AnnotationEvent> {
        let inner = self.inner.lock().expect("event log lock poisoned");
        inner.events.values().cloned().collect()
    }

    pub fn annotated_by(&self, annotator: &str) -> BTreeSet<String> {
        let inner = self.inner.lock().expect("event log lock poisoned");
        inner.events.keys().filter(|(_, a)| a == annotator).map(|(v, _)| v.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("event log lock poisoned").events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn sync_parent(path: &Path) {
    #[cfg(unix)]
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    #[cfg(not(unix))]
    let _ = path;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(vid: &str, a: &str, moment: f64) -> AnnotationEvent {
        AnnotationEvent { vid: vid.into(), annotator_id: a.into(), moment, score: 0.5, explanation: "x".into() }
    }

    #[test]
    fn last_write_wins_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        {
            let (log, rec) = EventLog::open(&p).unwrap();
            assert_eq!(rec.records, 0);
            log.append(ev("v1", "a", 1.0)).unwrap();
            log.append(ev("v2", "a", 2.0)).unwrap();
            log.append(ev("v1", "a", 1.5)).unwrap();
        }
        let (log, rec) = EventLog::open(&p).unwrap();
        assert_eq!(rec.records, 3);
        assert_eq!(log.len(), 2);
        assert_eq!(log.get("v1", "a").unwrap().moment, 1.5);
        assert_eq!(log.append(ev("v3", "b", 0.1)).unwrap(), 4);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        {
            let (log, _) = EventLog::open(&p).unwrap();
            log.append(ev("v1", "a", 1.0)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"{\"seq\":2,\"vid\":\"v2").unwrap();
        drop(f);
        let (log, rec) = EventLog::open(&p).unwrap();
        assert_eq!(rec.records, 1);
        assert!(rec.truncated_bytes > 0);
        log.append(ev("v2", "a", 2.0)).unwrap();
        drop(log);
        let (log, _) = EventLog::open(&p).unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn corrupt_complete_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        std::fs::write(&p, b"not json\n").unwrap();
        assert!(matches!(EventLog::open(&p), Err(StoreError::Corrupt { line: 1, .. })));
    }
}
