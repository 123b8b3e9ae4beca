//! Affective Index Indicator lists: a source index ranked against targets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::affect::{cosine_similarity, euclidean_distance, AffectiveIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "cosine")]
    Cosine,
    #[serde(rename = "euclidean-knn")]
    EuclideanKnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiiEntry {
    pub target_id: String,
    pub similarity: f64,
}

/// Entries are sorted by similarity descending, then `target_id` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiiList {
    pub source_id: String,
    pub metric: Metric,
    pub entries: Vec<AiiEntry>,
}

impl AiiList {
    /// Single-pass check of the ordering invariant.
    pub fn is_sorted(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| rank_order(w[0].similarity, &w[0].target_id, w[1].similarity, &w[1].target_id) == Ordering::Less)
    }

    pub fn truncate(&mut self, n: usize) {
        self.entries.truncate(n);
    }

    pub fn target_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.target_id.as_str())
    }
}

/// Score descending, id ascending.
pub(crate) fn rank_order(score_a: f64, id_a: &str, score_b: f64, id_b: &str) -> Ordering {
    score_b.total_cmp(&score_a).then_with(|| id_a.cmp(id_b))
}

/// Maps a distance on the simplex into `(0, 1]`.
pub fn distance_to_similarity(distance: f64) -> f64 {
    1.0 / (1.0 + distance)
}

fn sorted(source_id: &str, metric: Metric, mut entries: Vec<AiiEntry>) -> AiiList {
    entries.sort_by(|a, b| rank_order(a.similarity, &a.target_id, b.similarity, &b.target_id));
    AiiList {
        source_id: source_id.to_owned(),
        metric,
        entries,
    }
}

/// Cosine similarity of `source` against every target, fully ranked.
///
/// The source is not filtered out if it appears among the targets.
pub fn build_aii<'a, I>(source: (&str, &AffectiveIndex), targets: I) -> AiiList
where
    I: IntoIterator<Item = (&'a str, &'a AffectiveIndex)>,
{
    let (source_id, source_index) = source;
    let entries = targets
        .into_iter()
        .map(|(id, index)| AiiEntry {
            target_id: id.to_owned(),
            similarity: cosine_similarity(source_index, index),
        })
        .collect();
    sorted(source_id, Metric::Cosine, entries)
}

/// The `k` targets closest to `source` in Euclidean distance.
///
/// Selection is by distance (ties by id); reported similarity is
/// `1 / (1 + distance)`.
pub fn k_nearest<'a, I>(source: (&str, &AffectiveIndex), targets: I, k: usize) -> AiiList
where
    I: IntoIterator<Item = (&'a str, &'a AffectiveIndex)>,
{
    let (source_id, source_index) = source;
    let mut scored: Vec<(f64, &str)> = targets
        .into_iter()
        .map(|(id, index)| (euclidean_distance(source_index, index), id))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    scored.truncate(k);
    let entries = scored
        .into_iter()
        .map(|(d, id)| AiiEntry {
            target_id: id.to_owned(),
            similarity: distance_to_similarity(d),
        })
        .collect();
    sorted(source_id, Metric::EuclideanKnn, entries)
}
