use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::corpus::{read_index_records, CorpusError, IndexRecord};
use crate::privacy::{AuditedStorage, StorageError, WriteCategory};
use crate::profiles::CatalogItem;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("item {0:?} already exists")]
    Duplicate(String),
    #[error("catalog file is corrupt: {0}")]
    Corrupt(#[from] CorpusError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Thread-safe item catalog, optionally persisted as an indices JSONL file
/// through [`AuditedStorage`].
///
/// Items are inserted whole under the write lock, so readers see each item
/// either before or after its ingestion, never half-written.
#[derive(Debug, Default)]
pub struct Catalog {
    items: RwLock<BTreeMap<String, CatalogItem>>,
    persistence: Option<(Arc<AuditedStorage>, String)>,
}

impl Catalog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `key` if it exists; new items are appended to it.
    pub fn persistent(storage: Arc<AuditedStorage>, key: impl Into<String>) -> Result<Self, CatalogError> {
        let key = key.into();
        let mut items = BTreeMap::new();
        if let Some(bytes) = storage.get(&key).map_err(StorageError::Io)? {
            for record in read_index_records(bytes.as_slice())? {
                let item = CatalogItem::from(record);
                if items.contains_key(&item.item_id) {
                    return Err(CatalogError::Duplicate(item.item_id));
                }
                items.insert(item.item_id.clone(), item);
            }
        }
        Ok(Self {
            items: RwLock::new(items),
            persistence: Some((storage, key)),
        })
    }

    pub fn insert(&self, item: CatalogItem) -> Result<(), CatalogError> {
        let mut items = self.items.write();
        if items.contains_key(&item.item_id) {
            return Err(CatalogError::Duplicate(item.item_id));
        }
        if let Some((storage, key)) = &self.persistence {
            let line = IndexRecord::from(&item).to_json_line();
            storage.append(WriteCategory::Catalog, key, line.as_bytes())?;
        }
        items.insert(item.item_id.clone(), item);
        Ok(())
    }

    pub fn get(&self, item_id: &str) -> Option<CatalogItem> {
        self.items.read().get(item_id).cloned()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.items.read().contains_key(item_id)
    }

    /// All items, ordered by id.
    pub fn snapshot(&self) -> Vec<CatalogItem> {
        self.items.read().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.items.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
