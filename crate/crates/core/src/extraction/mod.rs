//! Affective Index extraction from subjective text.
//!
//! Two backends are available: a deterministic lexicon scorer
//! (preprocess, score, normalize) and a chat-completion model client.

pub mod lexicon;
pub mod llm;
pub mod preprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{normalize, AffectError, AffectiveIndex};

pub use lexicon::{score_with_lexicon, Lexicon, LexiconError};
pub use llm::{
    build_prompt, parse_llm_response, parse_llm_response_detailed, ChatTransport,
    FixtureTransport, HttpTransport, LlmBackend, LlmBackendConfig, PromptTemplate,
};
pub use preprocess::{preprocess, StopWords, TokenStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("document text is empty")]
    EmptyText,
    #[error("no emotion-bearing words found")]
    NoSignal,
    #[error("LLM backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("could not parse LLM response: {0}")]
    ParseFailure(String),
    #[error("LLM probabilities sum to {sum}, too far from 1 to trust")]
    SumOutOfRange { sum: f64 },
    #[error("invalid prompt template: {0}")]
    TemplateInvalid(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl ExtractionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ExtractionError::EmptyText => "empty_text",
            ExtractionError::NoSignal => "no_signal",
            ExtractionError::BackendUnavailable(_) => "backend_unavailable",
            ExtractionError::ParseFailure(_) => "parse_failure",
            ExtractionError::SumOutOfRange { .. } => "sum_out_of_range",
            ExtractionError::TemplateInvalid(_) => "template_invalid",
            ExtractionError::Config(_) => "config",
        }
    }
}

/// A subjective passage to be indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: None,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LexiconBackend {
    pub lexicon: Lexicon,
    pub stopwords: StopWords,
}

impl LexiconBackend {
    pub fn new(lexicon: Lexicon, stopwords: StopWords) -> Self {
        Self { lexicon, stopwords }
    }

    /// The bundled English lexicon and stop-word list.
    pub fn english() -> Self {
        Self::new(Lexicon::english(), StopWords::english())
    }

    pub fn extract(&self, text: &str) -> Result<AffectiveIndex, ExtractionError> {
        let tokens = preprocess(text, &self.stopwords);
        let raw = score_with_lexicon(&tokens, &self.lexicon);
        normalize(&raw).map_err(|e| match e {
            AffectError::NoSignal => ExtractionError::NoSignal,
            other => ExtractionError::ParseFailure(other.to_string()),
        })
    }
}

#[derive(Debug)]
pub enum Backend {
    Lexicon(LexiconBackend),
    Llm(LlmBackend),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Lexicon(_) => "lexicon",
            Backend::Llm(_) => "llm",
        }
    }
}

pub fn extract_index(doc: &Document, backend: &Backend) -> Result<AffectiveIndex, ExtractionError> {
    if doc.text.trim().is_empty() {
        return Err(ExtractionError::EmptyText);
    }
    match backend {
        Backend::Lexicon(b) => b.extract(&doc.text),
        Backend::Llm(b) => b.extract(&doc.text),
    }
}
