//! The single gateway for durable writes.
//!
//! Every byte the process persists goes through [`AuditedStorage`], which
//! logs `(timestamp, category, length)` for each write and refuses the
//! user-data categories outright. Tests swap in [`MemoryBackend`] to inspect
//! exactly what would have reached disk.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WriteCategory {
    /// Item catalog data: not user-derived.
    Catalog,
    /// Operator-requested output files (batch extraction results).
    Export,
    UserProfile,
    Session,
}

impl WriteCategory {
    pub fn is_user_data(self) -> bool {
        matches!(self, WriteCategory::UserProfile | WriteCategory::Session)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub category: WriteCategory,
    pub bytes: usize,
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("durable writes of category {0:?} are not permitted")]
    Forbidden(WriteCategory),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub trait StorageBackend: Send + Sync {
    fn append(&self, key: &str, bytes: &[u8]) -> io::Result<()>;
    /// Replaces the whole object.
    fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()>;
    fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>>;
}

/// Files under a root directory. Absolute keys bypass the root.
#[derive(Debug, Clone)]
pub struct FileBackend {
    root: PathBuf,
}

impl FileBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join(Path::new(key))
    }
}

impl StorageBackend for FileBackend {
    fn append(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        let mut file = OpenOptions::new().create(true).append(true).open(self.path(key))?;
        file.write_all(bytes)?;
        file.flush()
    }

    fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        std::fs::write(self.path(key), bytes)
    }

    fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>> {
        match std::fs::read(self.path(key)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// In-memory stand-in for disk; records every write verbatim.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    objects: Mutex<BTreeMap<String, Vec<u8>>>,
    writes: Mutex<Vec<(String, Vec<u8>)>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every write ever issued, in order.
    pub fn writes(&self) -> Vec<(String, Vec<u8>)> {
        self.writes.lock().clone()
    }

    /// Whether `needle` occurs in any write or stored object.
    pub fn contains_bytes(&self, needle: &[u8]) -> bool {
        if needle.is_empty() {
            return true;
        }
        let hit = |hay: &[u8]| hay.windows(needle.len()).any(|w| w == needle);
        self.writes.lock().iter().any(|(_, b)| hit(b))
            || self.objects.lock().values().any(|b| hit(b))
    }
}

impl StorageBackend for MemoryBackend {
    fn append(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        self.objects
            .lock()
            .entry(key.to_owned())
            .or_default()
            .extend_from_slice(bytes);
        self.writes.lock().push((key.to_owned(), bytes.to_vec()));
        Ok(())
    }

    fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        self.objects.lock().insert(key.to_owned(), bytes.to_vec());
        self.writes.lock().push((key.to_owned(), bytes.to_vec()));
        Ok(())
    }

    fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>> {
        Ok(self.objects.lock().get(key).cloned())
    }
}

pub struct AuditedStorage {
    backend: Arc<dyn StorageBackend>,
    log: Mutex<Vec<AuditEntry>>,
}

impl std::fmt::Debug for AuditedStorage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuditedStorage")
            .field("entries", &self.log.lock().len())
            .finish_non_exhaustive()
    }
}

impl AuditedStorage {
    pub fn new(backend: Arc<dyn StorageBackend>) -> Self {
        Self {
            backend,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Files relative to the current directory.
    pub fn filesystem() -> Self {
        Self::new(Arc::new(FileBackend::new(".")))
    }

    pub fn append(&self, category: WriteCategory, key: &str, bytes: &[u8]) -> Result<(), StorageError> {
        self.guarded(category, bytes.len(), || self.backend.append(key, bytes))
    }

    pub fn put(&self, category: WriteCategory, key: &str, bytes: &[u8]) -> Result<(), StorageError> {
        self.guarded(category, bytes.len(), || self.backend.put(key, bytes))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>> {
        self.backend.get(key)
    }

    fn guarded(
        &self,
        category: WriteCategory,
        len: usize,
        write: impl FnOnce() -> io::Result<()>,
    ) -> Result<(), StorageError> {
        if category.is_user_data() {
            log::error!("refused durable write of {len} bytes in category {category:?}");
            return Err(StorageError::Forbidden(category));
        }
        // Hold the log across the write so log order matches write order.
        let mut log = self.log.lock();
        write()?;
        log.push(AuditEntry {
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            category,
            bytes: len,
        });
        Ok(())
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.log.lock().clone()
    }

    pub fn user_data_writes(&self) -> usize {
        self.log
            .lock()
            .iter()
            .filter(|e| e.category.is_user_data())
            .count()
    }
}
