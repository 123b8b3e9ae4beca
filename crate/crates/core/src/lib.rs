//! Emotion-aware recommendation built on Affective Indices: probability
//! distributions over Ekman's six basic emotions.
//!
//! The pipeline runs text → [`extraction`] → [`affect::AffectiveIndex`] →
//! [`aii`] similarity lists → [`recommender`]. User profiles
//! ([`profiles`]) are means of consumed items' indices and are only ever held
//! in memory by [`privacy::SessionStore`].

pub mod affect;
pub mod aii;
pub mod catalog;
pub mod corpus;
pub mod extraction;
pub mod privacy;
pub mod profiles;
pub mod recommender;

pub use affect::{AffectiveIndex, Emotion, RawEmotionScores};
pub use profiles::{CatalogItem, UserProfile};
