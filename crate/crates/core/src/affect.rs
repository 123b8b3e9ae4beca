//! Affective Index value types and the vector algebra over them.
//!
//! An [`AffectiveIndex`] is a probability distribution over the six Ekman
//! emotions. Every value of that type is valid by construction: the only
//! ways in are [`normalize`], [`mean`], and [`AffectiveIndex::try_from_probs`]
//! (which is also what deserialization goes through).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance on `|sum - 1|` accepted by [`validate`].
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Ekman's six basic emotions, in canonical order.
///
/// The declaration order is load-bearing: it drives tie-breaking and the
/// field order of every serialized index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happiness,
    Sadness,
    Anger,
    Fear,
    Surprise,
    Disgust,
}

impl Emotion {
    pub const COUNT: usize = 6;

    pub const ALL: [Emotion; Emotion::COUNT] = [
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Surprise,
        Emotion::Disgust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
        }
    }

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn parse(name: &str) -> Option<Emotion> {
        Emotion::ALL.into_iter().find(|e| e.as_str() == name)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffectError {
    #[error("raw emotion scores sum to zero; no emotional signal to normalize")]
    NoSignal,
    #[error("cannot average an empty history")]
    EmptyHistory,
    #[error("raw score for {0} is negative or not finite")]
    InvalidRawScore(Emotion),
    #[error("invalid affective index: {0}")]
    Invalid(#[from] Violation),
}

/// Why a candidate probability vector is not a valid Affective Index.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{emotion} = {value} is not a finite number")]
    NotFinite { emotion: Emotion, value: f64 },
    #[error("{emotion} = {value} is outside [0, 1]")]
    OutOfRange { emotion: Emotion, value: f64 },
    #[error("sum = {sum}, expected 1 within {SUM_TOLERANCE}")]
    SumMismatch { sum: f64 },
}

/// Non-negative, unnormalized emotion intensities produced by a backend.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawEmotionScores([f64; Emotion::COUNT]);

impl RawEmotionScores {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Fails if any score is negative or not finite.
    pub fn new(scores: [f64; Emotion::COUNT]) -> Result<Self, AffectError> {
        for emotion in Emotion::ALL {
            let value = scores[emotion.position()];
            if !value.is_finite() || value < 0.0 {
                return Err(AffectError::InvalidRawScore(emotion));
            }
        }
        Ok(Self(scores))
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.0[emotion.position()]
    }

    /// Adds `amount` to one emotion's accumulator. `amount` must be >= 0.
    pub(crate) fn add(&mut self, emotion: Emotion, amount: f64) {
        debug_assert!(amount >= 0.0);
        self.0[emotion.position()] += amount;
    }

    pub fn values(&self) -> [f64; Emotion::COUNT] {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Add for RawEmotionScores {
    type Output = RawEmotionScores;

    fn add(self, rhs: Self) -> Self::Output {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        RawEmotionScores(out)
    }
}

/// A probability distribution over the six Ekman emotions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffectiveIndex([f64; Emotion::COUNT]);

impl AffectiveIndex {
    /// Wraps `probs` after checking it with [`validate`].
    pub fn try_from_probs(probs: [f64; Emotion::COUNT]) -> Result<Self, Violation> {
        validate(&probs)?;
        Ok(Self(probs))
    }

    pub fn uniform() -> Self {
        Self([1.0 / Emotion::COUNT as f64; Emotion::COUNT])
    }

    pub fn one_hot(emotion: Emotion) -> Self {
        let mut probs = [0.0; Emotion::COUNT];
        probs[emotion.position()] = 1.0;
        Self(probs)
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.0[emotion.position()]
    }

    pub fn probs(&self) -> [f64; Emotion::COUNT] {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Emotion, f64)> + '_ {
        Emotion::ALL.into_iter().zip(self.0.iter().copied())
    }

    /// Views the probabilities as raw scores (always valid raw input).
    pub fn as_raw(&self) -> RawEmotionScores {
        RawEmotionScores(self.0)
    }

    pub fn dominant(&self) -> Emotion {
        dominant_emotion(self)
    }
}

/// Checks the Affective Index invariants on an arbitrary vector.
pub fn validate(probs: &[f64; Emotion::COUNT]) -> Result<(), Violation> {
    for emotion in Emotion::ALL {
        let value = probs[emotion.position()];
        if !value.is_finite() {
            return Err(Violation::NotFinite { emotion, value });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Violation::OutOfRange { emotion, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Violation::SumMismatch { sum });
    }
    Ok(())
}

/// Divides every raw score by their sum.
pub fn normalize(raw: &RawEmotionScores) -> Result<AffectiveIndex, AffectError> {
    let sum = raw.sum();
    if sum <= 0.0 {
        return Err(AffectError::NoSignal);
    }
    let mut probs = raw.0;
    for p in probs.iter_mut() {
        *p /= sum;
    }
    // Only reachable through overflow in the sum.
    validate(&probs)?;
    Ok(AffectiveIndex(probs))
}

fn dot(a: &[f64; Emotion::COUNT], b: &[f64; Emotion::COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped into `[0, 1]` to absorb rounding.
///
/// Symmetric bit-for-bit: the dot product and the norm product are both
/// computed with commutative operations in a fixed order.
pub fn cosine_similarity(a: &AffectiveIndex, b: &AffectiveIndex) -> f64 {
    let na = dot(&a.0, &a.0).sqrt();
    let nb = dot(&b.0, &b.0).sqrt();
    let sim = dot(&a.0, &b.0) / (na * nb);
    sim.clamp(0.0, 1.0)
}

/// Euclidean distance; bounded by `sqrt(2)` on the probability simplex.
pub fn euclidean_distance(a: &AffectiveIndex, b: &AffectiveIndex) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Component-wise arithmetic mean.
pub fn mean<'a, I>(indices: I) -> Result<AffectiveIndex, AffectError>
where
    I: IntoIterator<Item = &'a AffectiveIndex>,
{
    let mut acc = [0.0; Emotion::COUNT];
    let mut count = 0usize;
    for index in indices {
        for (a, p) in acc.iter_mut().zip(index.0) {
            *a += p;
        }
        count += 1;
    }
    if count == 0 {
        return Err(AffectError::EmptyHistory);
    }
    for a in acc.iter_mut() {
        *a /= count as f64;
    }
    Ok(AffectiveIndex(acc))
}

/// The most probable emotion; ties go to the earliest in canonical order.
pub fn dominant_emotion(index: &AffectiveIndex) -> Emotion {
    let mut best = Emotion::Happiness;
    for emotion in Emotion::ALL {
        if index.get(emotion) > index.get(best) {
            best = emotion;
        }
    }
    best
}

impl Serialize for AffectiveIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(Emotion::COUNT))?;
        for (emotion, p) in self.iter() {
            map.serialize_entry(emotion.as_str(), &p)?;
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexFields {
    happiness: f64,
    sadness: f64,
    anger: f64,
    fear: f64,
    surprise: f64,
    disgust: f64,
}

impl<'de> Deserialize<'de> for AffectiveIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let f = IndexFields::deserialize(deserializer)?;
        AffectiveIndex::try_from_probs([
            f.happiness,
            f.sadness,
            f.anger,
            f.fear,
            f.surprise,
            f.disgust,
        ])
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// The index a chat model returned for the "Godfather I" plot summary.
    pub const GODFATHER: [f64; 6] = [0.02571, 0.81373, 0.05563, 0.09933, 0.00486, 0.00074];

    pub fn godfather() -> AffectiveIndex {
        AffectiveIndex::try_from_probs(GODFATHER).unwrap()
    }
}
