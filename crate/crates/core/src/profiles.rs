//! User emotion profiles (running means of consumed items' indices) and
//! catalog item profiles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{mean, AffectiveIndex, Emotion};
use crate::extraction::{extract_index, Backend, Document, ExtractionError};
use crate::privacy::EmotionId;

/// Tolerance for recognizing a cold-start profile's uniform index.
const UNIFORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("item {0:?} has already been consumed")]
    DuplicateConsumption(String),
    #[error("consumed_count is {count} but {ids} consumed ids are listed")]
    CountMismatch { count: usize, ids: usize },
    #[error("a profile with no consumption history must carry the uniform index")]
    ColdStartNotUniform,
}

/// An item with its extracted Affective Index.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogItem {
    pub item_id: String,
    pub document_id: String,
    pub index: AffectiveIndex,
}

impl CatalogItem {
    pub fn new(item_id: impl Into<String>, index: AffectiveIndex) -> Self {
        let item_id = item_id.into();
        Self {
            document_id: item_id.clone(),
            item_id,
            index,
        }
    }
}

/// Indexes a document and wraps the result as a catalog item.
pub fn item_profile(doc: &Document, backend: &Backend) -> Result<CatalogItem, ExtractionError> {
    let index = extract_index(doc, backend)?;
    Ok(CatalogItem::new(doc.id.clone(), index))
}

/// A user's emotional profile: the mean index of everything consumed.
///
/// This is the document a user keeps for themselves; the service only ever
/// holds it in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDocument")]
pub struct UserProfile {
    pub emotion_id: EmotionId,
    pub index: AffectiveIndex,
    pub consumed_count: usize,
    pub consumed_ids: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDocument {
    emotion_id: EmotionId,
    index: AffectiveIndex,
    consumed_count: usize,
    #[serde(default)]
    consumed_ids: BTreeSet<String>,
}

impl TryFrom<ProfileDocument> for UserProfile {
    type Error = ProfileError;

    fn try_from(doc: ProfileDocument) -> Result<Self, Self::Error> {
        let profile = UserProfile {
            emotion_id: doc.emotion_id,
            index: doc.index,
            consumed_count: doc.consumed_count,
            consumed_ids: doc.consumed_ids,
        };
        profile.check()?;
        Ok(profile)
    }
}

impl UserProfile {
    pub fn cold_start(emotion_id: EmotionId) -> Self {
        Self {
            emotion_id,
            index: AffectiveIndex::uniform(),
            consumed_count: 0,
            consumed_ids: BTreeSet::new(),
        }
    }

    /// Checks the bookkeeping invariants. Index validity is guaranteed by
    /// the [`AffectiveIndex`] type.
    pub fn check(&self) -> Result<(), ProfileError> {
        if self.consumed_count != self.consumed_ids.len() {
            return Err(ProfileError::CountMismatch {
                count: self.consumed_count,
                ids: self.consumed_ids.len(),
            });
        }
        if self.consumed_count == 0 {
            let uniform = AffectiveIndex::uniform();
            let off = Emotion::ALL
                .iter()
                .any(|&e| (self.index.get(e) - uniform.get(e)).abs() > UNIFORM_TOLERANCE);
            if off {
                return Err(ProfileError::ColdStartNotUniform);
            }
        }
        Ok(())
    }

    pub fn has_consumed(&self, item_id: &str) -> bool {
        self.consumed_ids.contains(item_id)
    }
}

/// Builds a profile from a full consumption history (uniform when empty).
pub fn profile_from_history<'a, I>(emotion_id: EmotionId, items: I) -> Result<UserProfile, ProfileError>
where
    I: IntoIterator<Item = &'a CatalogItem>,
{
    let mut consumed_ids = BTreeSet::new();
    let mut indices = Vec::new();
    for item in items {
        if !consumed_ids.insert(item.item_id.clone()) {
            return Err(ProfileError::DuplicateConsumption(item.item_id.clone()));
        }
        indices.push(item.index);
    }
    let index = mean(&indices).unwrap_or_else(|_| AffectiveIndex::uniform());
    Ok(UserProfile {
        emotion_id,
        index,
        consumed_count: consumed_ids.len(),
        consumed_ids,
    })
}

/// Folds one more consumed item into the running mean.
///
/// The cold-start uniform index is a placeholder and is replaced outright by
/// the first item rather than averaged with it.
pub fn update_profile(profile: &UserProfile, item: &CatalogItem) -> Result<UserProfile, ProfileError> {
    if profile.has_consumed(&item.item_id) {
        return Err(ProfileError::DuplicateConsumption(item.item_id.clone()));
    }
    let n = profile.consumed_count as f64;
    let index = if profile.consumed_count == 0 {
        item.index
    } else {
        let mut probs = [0.0; Emotion::COUNT];
        for (slot, emotion) in probs.iter_mut().zip(Emotion::ALL) {
            *slot = (profile.index.get(emotion) * n + item.index.get(emotion)) / (n + 1.0);
        }
        // A running mean of simplex points stays on the simplex up to rounding.
        AffectiveIndex::try_from_probs(probs).unwrap_or_else(|_| {
            crate::affect::normalize(&crate::affect::RawEmotionScores::new(probs).expect("non-negative"))
                .expect("positive mass")
        })
    };
    let mut consumed_ids = profile.consumed_ids.clone();
    consumed_ids.insert(item.item_id.clone());
    Ok(UserProfile {
        emotion_id: profile.emotion_id.clone(),
        index,
        consumed_count: consumed_ids.len(),
        consumed_ids,
    })
}
