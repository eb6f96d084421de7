use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DidDocument, RegistryError};
use crate::eds::Did;

/// `prev` of the first log entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Record {
    RegisterDid { document: DidDocument },
    AddTrustedIssuer { did: Did },
    RemoveTrustedIssuer { did: Did },
    AddTrustedSchema { id: String, descriptor: String },
}

/// One line of `registry.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub prev: String,
    pub hash: String,
    pub record: Record,
}

impl LogEntry {
    fn line(&self) -> String {
        serde_json::to_string(self).expect("log entries serialize")
    }
}

/// `hex(sha256(prev || seq as u64 big-endian || record JSON))`, or `None`
/// when `prev` is not 32 bytes of hex.
pub fn entry_hash(prev: &str, seq: u64, record: &Record) -> Option<String> {
    let prev = hex::decode(prev).ok().filter(|p| p.len() == 32)?;
    let mut h = Sha256::new();
    h.update(&prev);
    h.update(seq.to_be_bytes());
    h.update(serde_json::to_vec(record).expect("records serialize"));
    Some(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistryState {
    pub did_records: BTreeMap<Did, DidDocument>,
    pub trusted_issuers: BTreeSet<Did>,
    /// Schema URI to descriptor text.
    pub trusted_schemas: BTreeMap<String, String>,
    log: Vec<LogEntry>,
    /// Lines as read from disk (or as written), parallel to `log`.
    lines: Vec<String>,
}

impl RegistryState {
    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn resolve_did(&self, did: &Did) -> Option<&DidDocument> {
        self.did_records.get(did)
    }

    pub fn is_trusted_issuer(&self, did: &Did) -> bool {
        self.trusted_issuers.contains(did)
    }

    pub fn is_trusted_schema(&self, id: &str) -> bool {
        self.trusted_schemas.contains_key(id)
    }

    pub fn register_did(&mut self, doc: DidDocument) -> Result<&LogEntry, RegistryError> {
        self.append(Record::RegisterDid { document: doc })
    }

    pub fn add_trusted_issuer(&mut self, did: Did) -> Result<&LogEntry, RegistryError> {
        self.append(Record::AddTrustedIssuer { did })
    }

    pub fn remove_trusted_issuer(&mut self, did: Did) -> Result<&LogEntry, RegistryError> {
        self.append(Record::RemoveTrustedIssuer { did })
    }

    pub fn add_trusted_schema(
        &mut self,
        id: String,
        descriptor: String,
    ) -> Result<&LogEntry, RegistryError> {
        self.append(Record::AddTrustedSchema { id, descriptor })
    }

    /// True iff sequence numbers count up from 0, every `prev` names the
    /// previous hash, every hash matches its record, and every stored line
    /// is the exact serialization of its entry.
    pub fn verify_log_integrity(&self) -> bool {
        let mut prev = GENESIS_HASH.to_string();
        for (i, (entry, line)) in self.log.iter().zip(&self.lines).enumerate() {
            if entry.seq != i as u64 || entry.prev != prev || *line != entry.line() {
                return false;
            }
            match entry_hash(&entry.prev, entry.seq, &entry.record) {
                Some(h) if h == entry.hash => {}
                _ => return false,
            }
            prev = entry.hash.clone();
        }
        self.log.len() == self.lines.len()
    }

    fn check(&self, record: &Record) -> Result<(), RegistryError> {
        match record {
            Record::RegisterDid { document } => {
                document.validate()?;
                if self.did_records.contains_key(&document.id) {
                    return Err(RegistryError::DuplicateDid(document.id.clone()));
                }
                Ok(())
            }
            Record::AddTrustedSchema { id, .. } if id.trim().is_empty() => {
                Err(RegistryError::InvalidDocument("schema id is empty".into()))
            }
            _ => Ok(()),
        }
    }

    fn apply(&mut self, record: &Record) {
        match record {
            Record::RegisterDid { document } => {
                self.did_records
                    .insert(document.id.clone(), document.clone());
            }
            Record::AddTrustedIssuer { did } => {
                self.trusted_issuers.insert(did.clone());
            }
            Record::RemoveTrustedIssuer { did } => {
                self.trusted_issuers.remove(did);
            }
            Record::AddTrustedSchema { id, descriptor } => {
                self.trusted_schemas.insert(id.clone(), descriptor.clone());
            }
        }
    }

    fn next_entry(&self, record: Record) -> LogEntry {
        let seq = self.log.len() as u64;
        let prev = self
            .log
            .last()
            .map(|e| e.hash.clone())
            .unwrap_or_else(|| GENESIS_HASH.to_string());
        let hash = entry_hash(&prev, seq, &record).unwrap_or_else(|| GENESIS_HASH.to_string());
        LogEntry {
            seq,
            prev,
            hash,
            record,
        }
    }

    fn push(&mut self, entry: LogEntry, line: String) {
        self.apply(&entry.record);
        self.log.push(entry);
        self.lines.push(line);
    }

    fn append(&mut self, record: Record) -> Result<&LogEntry, RegistryError> {
        self.check(&record)?;
        let entry = self.next_entry(record);
        let line = entry.line();
        self.push(entry, line);
        Ok(self.log.last().expect("just pushed"))
    }

    /// Replays log lines. Lines must parse; replay applies records without
    /// checking the chain, which [`verify_log_integrity`](Self::verify_log_integrity)
    /// reports on separately.
    fn replay(&mut self, text: &str, first_line: usize) -> Result<(), RegistryError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Ok(());
        }
        for (i, line) in body.split('\n').enumerate() {
            let entry: LogEntry =
                serde_json::from_str(line).map_err(|e| RegistryError::CorruptLog {
                    line: first_line + i,
                    reason: e.to_string(),
                })?;
            self.push(entry, line.to_string());
        }
        Ok(())
    }
}

/// A registry state, optionally backed by a JSON-lines file. Mutations take
/// an exclusive lock on the file, pick up entries appended by other
/// processes, then append.
#[derive(Debug, Default)]
pub struct Registry {
    state: RegistryState,
    path: Option<PathBuf>,
    consumed: u64,
}

fn io(e: std::io::Error) -> RegistryError {
    RegistryError::Io(e.to_string())
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the log at `path`; a missing file is an empty registry.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref().to_path_buf();
        let mut reg = Registry {
            state: RegistryState::default(),
            path: Some(path.clone()),
            consumed: 0,
        };
        if path.exists() {
            let mut f = File::open(&path).map_err(io)?;
            reg.catch_up(&mut f)?;
        }
        Ok(reg)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn state(&self) -> &RegistryState {
        &self.state
    }

    pub fn resolve_did(&self, did: &Did) -> Option<&DidDocument> {
        self.state.resolve_did(did)
    }

    pub fn verify_log_integrity(&self) -> bool {
        self.state.verify_log_integrity()
    }

    /// Re-reads entries other writers appended since the last read.
    pub fn refresh(&mut self) -> Result<(), RegistryError> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        if !path.exists() {
            return Ok(());
        }
        let mut f = File::open(&path).map_err(io)?;
        f.lock_shared().map_err(io)?;
        let r = self.catch_up(&mut f);
        f.unlock().map_err(io)?;
        r
    }

    fn catch_up(&mut self, f: &mut File) -> Result<(), RegistryError> {
        let len = f.metadata().map_err(io)?.len();
        if len < self.consumed {
            return Err(RegistryError::CorruptLog {
                line: self.state.log.len() + 1,
                reason: "log file shrank".into(),
            });
        }
        if len == self.consumed {
            return Ok(());
        }
        f.seek(SeekFrom::Start(self.consumed)).map_err(io)?;
        let mut tail = String::new();
        f.read_to_string(&mut tail)
            .map_err(|e| RegistryError::CorruptLog {
                line: self.state.log.len() + 1,
                reason: e.to_string(),
            })?;
        if !tail.ends_with('\n') {
            return Err(RegistryError::CorruptLog {
                line: self.state.log.len() + tail.matches('\n').count() + 1,
                reason: "incomplete last line".into(),
            });
        }
        self.state.replay(&tail, self.state.log.len() + 1)?;
        self.consumed = len;
        Ok(())
    }

    fn mutate(&mut self, record: Record) -> Result<LogEntry, RegistryError> {
        let Some(path) = self.path.clone() else {
            return self.state.append(record).cloned();
        };
        let mut f = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        f.lock().map_err(io)?;
        let result = (|| {
            self.catch_up(&mut f)?;
            self.state.check(&record)?;
            let entry = self.state.next_entry(record);
            let line = entry.line();
            f.write_all(format!("{line}\n").as_bytes()).map_err(io)?;
            f.sync_data().map_err(io)?;
            self.consumed += line.len() as u64 + 1;
            self.state.push(entry.clone(), line);
            Ok(entry)
        })();
        f.unlock().map_err(io)?;
        result
    }

    pub fn register_did(&mut self, doc: DidDocument) -> Result<LogEntry, RegistryError> {
        self.mutate(Record::RegisterDid { document: doc })
    }

    pub fn add_trusted_issuer(&mut self, did: Did) -> Result<LogEntry, RegistryError> {
        self.mutate(Record::AddTrustedIssuer { did })
    }

    pub fn remove_trusted_issuer(&mut self, did: Did) -> Result<LogEntry, RegistryError> {
        self.mutate(Record::RemoveTrustedIssuer { did })
    }

    pub fn add_trusted_schema(
        &mut self,
        id: &str,
        descriptor: &str,
    ) -> Result<LogEntry, RegistryError> {
        self.mutate(Record::AddTrustedSchema {
            id: id.to_string(),
            descriptor: descriptor.to_string(),
        })
    }
}

/// Loads the log at `path` and checks its chain. A line that no longer
/// parses is reported as an error.
pub fn verify_log_file(path: impl AsRef<Path>) -> Result<bool, RegistryError> {
    Ok(Registry::open(path)?.verify_log_integrity())
}
