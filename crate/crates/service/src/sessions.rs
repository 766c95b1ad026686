use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use edubot_core::SessionState;

/// A session slot. The async mutex queues concurrent requests on the same
/// session in arrival order.
pub type SessionHandle = Arc<tokio::sync::Mutex<SessionState>>;

struct Entry {
    handle: SessionHandle,
    last_seen: Instant,
}

/// In-memory sessions with idle expiry.
pub struct SessionManager {
    idle: Duration,
    inner: Mutex<Inner>,
}

struct Inner {
    entries: HashMap<String, Entry>,
    last_sweep: Instant,
}

/// 128 random bits, URL-safe base64 without padding (22 chars).
pub fn mint_token() -> String {
    URL_SAFE_NO_PAD.encode(rand::random::<[u8; 16]>())
}

/// Client-supplied tokens are reused only if they could have been minted here.
fn plausible_token(token: &str) -> bool {
    (1..=64).contains(&token.len())
        && token
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl SessionManager {
    pub fn new(idle: Duration) -> Self {
        Self {
            idle,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                last_sweep: Instant::now(),
            }),
        }
    }

    /// Returns the live session for `requested`, or a fresh one. Unknown and
    /// expired tokens keep their id but start with no history; absent or
    /// malformed tokens get a newly minted id.
    pub fn resolve(&self, requested: Option<&str>) -> (String, SessionHandle) {
        let now = Instant::now();
        let mut inner = self.inner.lock().expect("session map poisoned");
        if now.duration_since(inner.last_sweep) >= self.idle.min(Duration::from_secs(60)) {
            let idle = self.idle;
            inner.entries.retain(|_, e| now.duration_since(e.last_seen) < idle);
            inner.last_sweep = now;
        }

        let token = match requested.map(str::trim) {
            Some(t) if plausible_token(t) => t.to_owned(),
            _ => loop {
                let t = mint_token();
                if !inner.entries.contains_key(&t) {
                    break t;
                }
            },
        };

        let idle = self.idle;
        let entry = inner.entries.entry(token.clone()).or_insert_with(|| Entry {
            handle: Arc::new(tokio::sync::Mutex::new(SessionState::new(token.clone()))),
            last_seen: now,
        });
        if now.duration_since(entry.last_seen) >= idle {
            entry.handle = Arc::new(tokio::sync::Mutex::new(SessionState::new(token.clone())));
        }
        entry.last_seen = now;
        (token, entry.handle.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session map poisoned").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_22_url_safe_chars() {
        let a = mint_token();
        assert_eq!(a.len(), 22);
        assert!(plausible_token(&a));
        assert_ne!(a, mint_token());
    }

    #[test]
    fn known_token_resumes_its_state() {
        let sessions = SessionManager::new(Duration::from_secs(60));
        let (id, handle) = sessions.resolve(None);
        handle.try_lock().unwrap().last_bot_text = Some("hello".into());
        let (again, handle) = sessions.resolve(Some(&id));
        assert_eq!(again, id);
        assert_eq!(handle.try_lock().unwrap().last_bot_text.as_deref(), Some("hello"));
        assert_eq!(sessions.len(), 1);
    }

    #[test]
    fn unknown_token_is_a_fresh_session_under_that_id() {
        let sessions = SessionManager::new(Duration::from_secs(60));
        let (id, handle) = sessions.resolve(Some("abc_DEF-123"));
        assert_eq!(id, "abc_DEF-123");
        assert_eq!(*handle.try_lock().unwrap(), SessionState::new("abc_DEF-123"));
    }

    #[test]
    fn malformed_token_is_replaced() {
        let sessions = SessionManager::new(Duration::from_secs(60));
        for bad in ["", "has space", "ünicode", &"x".repeat(65)] {
            let (id, _) = sessions.resolve(Some(bad));
            assert_ne!(id, bad);
            assert_eq!(id.len(), 22);
        }
    }

    #[test]
    fn idle_sessions_expire() {
        let sessions = SessionManager::new(Duration::from_millis(30));
        let (id, handle) = sessions.resolve(None);
        handle.try_lock().unwrap().last_bot_text = Some("hello".into());
        std::thread::sleep(Duration::from_millis(60));
        let (again, handle) = sessions.resolve(Some(&id));
        assert_eq!(again, id);
        assert_eq!(handle.try_lock().unwrap().last_bot_text, None);

        let (_, _) = sessions.resolve(None);
        std::thread::sleep(Duration::from_millis(60));
        sessions.resolve(None);
        assert_eq!(sessions.len(), 1, "expired entries are swept");
    }
}
