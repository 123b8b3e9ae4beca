use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bytes of entropy in every issued token.
pub const TOKEN_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("secure random source unavailable: {0}")]
    EntropyUnavailable(String),
    #[error("token must be non-empty and free of whitespace")]
    Malformed,
}

/// 32 bytes from the operating system's CSPRNG, hex-encoded.
pub fn random_hex_token() -> Result<String, TokenError> {
    let mut bytes = [0u8; TOKEN_BYTES];
    getrandom::fill(&mut bytes).map_err(|e| TokenError::EntropyUnavailable(e.to_string()))?;
    Ok(hex::encode(bytes))
}

/// An opaque capability a user presents in place of their identity.
///
/// Issued ids are 64 lowercase hex characters. Ids minted elsewhere are
/// accepted as long as they are non-empty and contain no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EmotionId(String);

impl EmotionId {
    pub fn new(token: impl Into<String>) -> Result<Self, TokenError> {
        let token = token.into();
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(TokenError::Malformed);
        }
        Ok(Self(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EmotionId {
    type Error = TokenError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        EmotionId::new(value)
    }
}

impl From<EmotionId> for String {
    fn from(id: EmotionId) -> Self {
        id.0
    }
}

impl fmt::Display for EmotionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Issues a fresh emotion id. Nothing about it is recorded.
pub fn issue_emotion_id() -> Result<EmotionId, TokenError> {
    random_hex_token().map(EmotionId)
}

/// Handle for one open session; distinct from the emotion id.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionToken(String);

impl SessionToken {
    pub fn issue() -> Result<Self, TokenError> {
        random_hex_token().map(SessionToken)
    }

    pub fn from_string(token: impl Into<String>) -> Self {
        Self(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

// Tokens are bearer capabilities; keep them out of logs.
impl fmt::Debug for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionToken({}…)", &self.0[..self.0.len().min(6)])
    }
}
