//! JSONL corpora in, JSONL index records out, and batch extraction between.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::AffectiveIndex;
use crate::extraction::{extract_index, Backend, Document, ExtractionError};
use crate::profiles::CatalogItem;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct CorpusError {
    pub line: usize,
    pub message: String,
}

/// One line of an indices file: `{"id": ..., "affective_index": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexRecord {
    pub id: String,
    pub affective_index: AffectiveIndex,
}

impl IndexRecord {
    pub fn to_json_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("index records always serialize");
        line.push('\n');
        line
    }
}

impl From<&CatalogItem> for IndexRecord {
    fn from(item: &CatalogItem) -> Self {
        Self {
            id: item.item_id.clone(),
            affective_index: item.index,
        }
    }
}

impl From<IndexRecord> for CatalogItem {
    fn from(record: IndexRecord) -> Self {
        CatalogItem::new(record.id, record.affective_index)
    }
}

/// Parses non-blank lines of `reader` as `T`, tagging each with its
/// 1-based line number.
pub fn read_jsonl<T, R>(reader: R) -> impl Iterator<Item = (usize, Result<T, CorpusError>)>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line_no = i + 1;
            match line {
                Ok(l) if l.trim().is_empty() => None,
                Ok(l) => Some((
                    line_no,
                    serde_json::from_str::<T>(&l).map_err(|e| CorpusError {
                        line: line_no,
                        message: e.to_string(),
                    }),
                )),
                Err(e) => Some((
                    line_no,
                    Err(CorpusError {
                        line: line_no,
                        message: e.to_string(),
                    }),
                )),
            }
        })
}

/// Documents from JSONL; an empty `id` is reported as an error.
pub fn read_documents<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, Result<Document, CorpusError>)> {
    read_jsonl::<Document, R>(reader).map(|(line, doc)| {
        let doc = doc.and_then(|d| {
            if d.id.trim().is_empty() {
                Err(CorpusError {
                    line,
                    message: "document id is empty".into(),
                })
            } else {
                Ok(d)
            }
        });
        (line, doc)
    })
}

/// Reads a whole indices file, failing on the first bad line.
pub fn read_index_records<R: BufRead>(reader: R) -> Result<Vec<IndexRecord>, CorpusError> {
    read_jsonl::<IndexRecord, R>(reader).map(|(_, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatchError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("document {id:?}: {error}")]
    Extraction { id: String, error: ExtractionError },
}

/// Runs extraction over a document stream, `concurrency` documents at a
/// time, yielding results in input order.
pub fn extract_batch<'a, I>(
    documents: I,
    backend: &'a Backend,
    concurrency: usize,
) -> impl Iterator<Item = Result<IndexRecord, BatchError>> + 'a
where
    I: IntoIterator<Item = Result<Document, CorpusError>>,
    I::IntoIter: 'a,
{
    let mut documents = documents.into_iter();
    let width = concurrency.max(1);
    let mut pending = std::collections::VecDeque::new();
    std::iter::from_fn(move || {
        if pending.is_empty() {
            let chunk: Vec<_> = documents.by_ref().take(width).collect();
            if chunk.is_empty() {
                return None;
            }
            pending.extend(run_chunk(chunk, backend));
        }
        pending.pop_front()
    })
}

fn extract_one(doc: Result<Document, CorpusError>, backend: &Backend) -> Result<IndexRecord, BatchError> {
    let doc = doc?;
    extract_index(&doc, backend)
        .map(|affective_index| IndexRecord {
            id: doc.id.clone(),
            affective_index,
        })
        .map_err(|error| BatchError::Extraction { id: doc.id, error })
}

fn run_chunk(chunk: Vec<Result<Document, CorpusError>>, backend: &Backend) -> Vec<Result<IndexRecord, BatchError>> {
    if chunk.len() == 1 {
        return chunk.into_iter().map(|d| extract_one(d, backend)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunk
            .into_iter()
            .map(|doc| scope.spawn(move || extract_one(doc, backend)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("extraction worker panicked"))
            .collect()
    })
}
