use std::collections::HashMap;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use thiserror::Error;

use super::token::{EmotionId, SessionToken, TokenError};
use crate::profiles::{ProfileError, UserProfile};

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_SWEEP_INTERVAL: Duration = Duration::from_secs(60);

/// Monotonic time source, injectable so expiry can be tested without sleeping.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl ManualClock {
    pub fn new() -> Self {
        Self {
            base: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.base + *self.offset.lock()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("profile belongs to a different emotion id")]
    ProfileMismatch,
    #[error("invalid profile: {0}")]
    InvalidProfile(#[from] ProfileError),
    #[error("session not found")]
    SessionNotFound,
    #[error("session expired")]
    SessionExpired,
    #[error(transparent)]
    Token(#[from] TokenError),
}

struct Session {
    emotion_id: EmotionId,
    profile: UserProfile,
    expires_at: Instant,
}

/// Emotion-id-keyed profiles held in memory only, each behind a random
/// session token and a TTL.
///
/// Every operation takes the table lock for its whole duration, so a read
/// that starts after a close or eviction has returned cannot see the
/// session.
pub struct SessionStore {
    sessions: Mutex<HashMap<SessionToken, Session>>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for SessionStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionStore")
            .field("open", &self.len())
            .field("ttl", &self.ttl)
            .finish()
    }
}

impl SessionStore {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
            clock,
        }
    }

    pub fn with_system_clock(ttl: Duration) -> Self {
        Self::new(ttl, Arc::new(SystemClock))
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn open_session(&self, emotion_id: &EmotionId, profile: UserProfile) -> Result<SessionToken, SessionError> {
        if &profile.emotion_id != emotion_id {
            return Err(SessionError::ProfileMismatch);
        }
        profile.check()?;
        let token = SessionToken::issue()?;
        let session = Session {
            emotion_id: emotion_id.clone(),
            profile,
            expires_at: self.clock.now() + self.ttl,
        };
        self.sessions.lock().insert(token.clone(), session);
        Ok(token)
    }

    pub fn get_profile(&self, token: &SessionToken) -> Result<UserProfile, SessionError> {
        let mut sessions = self.sessions.lock();
        let now = self.clock.now();
        match sessions.get(token) {
            None => Err(SessionError::SessionNotFound),
            Some(s) if now >= s.expires_at => {
                sessions.remove(token);
                Err(SessionError::SessionExpired)
            }
            Some(s) => {
                debug_assert_eq!(s.emotion_id, s.profile.emotion_id);
                Ok(s.profile.clone())
            }
        }
    }

    /// Time left before the session expires.
    pub fn remaining(&self, token: &SessionToken) -> Option<Duration> {
        let now = self.clock.now();
        self.sessions
            .lock()
            .get(token)
            .and_then(|s| s.expires_at.checked_duration_since(now))
            .filter(|d| !d.is_zero())
    }

    /// Drops the session. Closing an unknown token is a no-op.
    pub fn close_session(&self, token: &SessionToken) {
        self.sessions.lock().remove(token);
    }

    /// Removes every session whose deadline is at or before `now`.
    pub fn evict_expired(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.lock();
        let before = sessions.len();
        sessions.retain(|_, s| s.expires_at > now);
        before - sessions.len()
    }

    pub fn evict_expired_now(&self) -> usize {
        self.evict_expired(self.clock.now())
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Background thread calling [`SessionStore::evict_expired_now`] on an
/// interval. Stops when dropped.
pub struct Sweeper {
    stop: Option<mpsc::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl Sweeper {
    pub fn start(store: Arc<SessionStore>, interval: Duration) -> Self {
        let (stop, stopped) = mpsc::channel::<()>();
        let handle = std::thread::Builder::new()
            .name("session-sweeper".into())
            .spawn(move || {
                while let Err(RecvTimeoutError::Timeout) = stopped.recv_timeout(interval) {
                    let n = store.evict_expired_now();
                    if n > 0 {
                        log::debug!("evicted {n} expired session(s)");
                    }
                }
            })
            .expect("spawn sweeper thread");
        Self {
            stop: Some(stop),
            handle: Some(handle),
        }
    }
}

impl Drop for Sweeper {
    fn drop(&mut self) {
        drop(self.stop.take());
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
