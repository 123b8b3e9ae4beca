use std::collections::BTreeMap;
use std::io::BufRead;

use thiserror::Error;

use super::preprocess::TokenStream;
use crate::affect::{Emotion, RawEmotionScores};

/// The lexicon shipped with the crate; a small hand-built English word list.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon_en.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon is empty or has no header row")]
    MissingHeader,
    #[error("lexicon header must name `word` and `emotion` columns, got {0:?}")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("failed to read lexicon: {0}")]
    Io(String),
}

/// Word-to-emotion weights. Words are stored lowercase; one word may carry
/// weights for several emotions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub version: String,
    entries: BTreeMap<String, Vec<(Emotion, f64)>>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Adds `weight` for (`word`, `emotion`). Repeated pairs accumulate.
    pub fn insert(&mut self, word: &str, emotion: Emotion, weight: f64) -> Result<(), String> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(format!("weight for {word:?} must be positive, got {weight}"));
        }
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            return Err("empty word".into());
        }
        let slot = self.entries.entry(word).or_default();
        match slot.iter_mut().find(|(e, _)| *e == emotion) {
            Some((_, w)) => *w += weight,
            None => {
                slot.push((emotion, weight));
                slot.sort_by_key(|(e, _)| *e);
            }
        }
        Ok(())
    }

    pub fn lookup(&self, word: &str) -> Option<&[(Emotion, f64)]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses TSV with a header row naming at least `word` and `emotion`;
    /// an optional `weight` column defaults to 1.0 when absent.
    pub fn parse_tsv(name: &str, text: &str) -> Result<Self, LexiconError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

        let (_, header) = lines.next().ok_or(LexiconError::MissingHeader)?;
        let columns: Vec<String> = header.split('\t').map(|c| c.trim().to_lowercase()).collect();
        let col = |name: &str| columns.iter().position(|c| c == name);
        let (word_col, emotion_col) = match (col("word"), col("emotion")) {
            (Some(w), Some(e)) => (w, e),
            _ => return Err(LexiconError::BadHeader(header.to_owned())),
        };
        let weight_col = col("weight");

        let mut lexicon = Lexicon::new(name, "1");
        for (line, row) in lines {
            let fields: Vec<&str> = row.split('\t').collect();
            let bad = |message: String| LexiconError::BadRow { line, message };
            let field = |i: usize| {
                fields
                    .get(i)
                    .map(|f| f.trim())
                    .ok_or_else(|| bad(format!("missing column {}", columns[i])))
            };
            let word = field(word_col)?;
            let emotion_name = field(emotion_col)?.to_lowercase();
            let emotion = Emotion::parse(&emotion_name)
                .ok_or_else(|| bad(format!("unknown emotion {emotion_name:?}")))?;
            let weight = match weight_col.map(|i| fields.get(i).map(|f| f.trim())) {
                Some(Some(w)) if !w.is_empty() => w
                    .parse::<f64>()
                    .map_err(|_| bad(format!("weight {w:?} is not a number")))?,
                _ => 1.0,
            };
            lexicon.insert(word, emotion, weight).map_err(bad)?;
        }
        Ok(lexicon)
    }

    pub fn read_tsv<R: BufRead>(name: &str, mut reader: R) -> Result<Self, LexiconError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| LexiconError::Io(e.to_string()))?;
        Self::parse_tsv(name, &text)
    }

    pub fn english() -> Self {
        Self::parse_tsv("affectrec-en", DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

/// Bag-of-words accumulation of lexicon weights.
///
/// Tokens are counted first and weights applied per distinct word in sorted
/// order, so the result does not depend on token order, bit for bit.
pub fn score_with_lexicon(tokens: &TokenStream, lexicon: &Lexicon) -> RawEmotionScores {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for token in tokens.iter() {
        if lexicon.lookup(token).is_some() {
            *counts.entry(token).or_default() += 1;
        }
    }
    let mut scores = RawEmotionScores::zero();
    for (word, count) in counts {
        for &(emotion, weight) in lexicon.lookup(word).unwrap_or_default() {
            scores.add(emotion, weight * count as f64);
        }
    }
    scores
}
