//! Ephemeral, emotion-id-keyed sessions and the audited durable-write path.
//!
//! User profiles live only in the [`SessionStore`]'s memory. The only way to
//! persist anything is [`AuditedStorage`], which rejects user-profile and
//! session data and logs everything else.

mod session;
mod storage;
mod token;

pub use session::{
    Clock, ManualClock, SessionError, SessionStore, Sweeper, SystemClock, DEFAULT_SWEEP_INTERVAL,
    DEFAULT_TTL,
};
pub use storage::{
    AuditEntry, AuditedStorage, FileBackend, MemoryBackend, StorageBackend, StorageError,
    WriteCategory,
};
pub use token::{issue_emotion_id, random_hex_token, EmotionId, SessionToken, TokenError, TOKEN_BYTES};
