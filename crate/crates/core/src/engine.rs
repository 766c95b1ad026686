//! Response selection: preprocess, match against known statements, pick a
//! stored answer, then learn the user's input as an answer to the bot's
//! previous output.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::similarity::{fold, similarity_folded};
use crate::statement::{NewStatement, Statement, Timestamp};
use crate::storage::{FilterCriteria, StatementStore, StoreError};
use crate::text::preprocess;

pub const DEFAULT_FALLBACK: &str = "I do not understand yet.";
pub const DEFAULT_THRESHOLD: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub similarity_threshold: f64,
    pub fallback_response: String,
    pub read_only: bool,
    /// When set, responses are sampled uniformly instead of ranked.
    pub random_seed: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_THRESHOLD,
            fallback_response: DEFAULT_FALLBACK.to_owned(),
            read_only: false,
            random_seed: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("similarity threshold {0} is outside [0, 1]")]
    Threshold(f64),
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(ConfigError::Threshold(self.similarity_threshold));
        }
        Ok(())
    }
}

/// The bot's reply to one input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseResult {
    pub text: String,
    /// Similarity of the input to `matched_prompt`; zero for the fallback.
    pub confidence: f64,
    pub matched_prompt: Option<String>,
    pub is_fallback: bool,
}

impl ResponseResult {
    fn fallback(config: &EngineConfig) -> Self {
        Self {
            text: config.fallback_response.clone(),
            confidence: 0.0,
            matched_prompt: None,
            is_fallback: true,
        }
    }
}

/// Per-conversation memory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionState {
    pub session_id: String,
    pub last_bot_text: Option<String>,
    pub transcript_length: u64,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            ..Self::default()
        }
    }
}

/// Best-matching known text and its similarity to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub text: String,
    pub score: f64,
}

/// Highest-similarity candidate; ties go to the smallest text in byte order.
pub fn best_match_in<'a, I>(input: &str, candidates: I) -> Option<Match>
where
    I: IntoIterator<Item = &'a str>,
{
    let folded_input = fold(input);
    let mut best: Option<Match> = None;
    for text in candidates {
        let score = similarity_folded(&folded_input, &fold(text));
        let better = match &best {
            None => true,
            Some(b) => score > b.score || (score == b.score && text < b.text.as_str()),
        };
        if better {
            best = Some(Match {
                text: text.to_owned(),
                score,
            });
        }
    }
    best
}

/// [`best_match_in`] over the distinct texts of `store`.
pub fn best_match(input: &str, store: &dyn StatementStore) -> Result<Option<Match>, StoreError> {
    let texts = store.distinct_texts()?;
    Ok(best_match_in(input, texts.iter().map(String::as_str)))
}

/// Picks one stored answer to `matched_text`.
///
/// Without a seed: most frequent text, then most recent, then smallest text.
/// With a seed: uniform over distinct texts, reproducible per
/// `(seed, matched_text)`.
pub fn select_response(
    matched_text: &str,
    store: &dyn StatementStore,
    config: &EngineConfig,
) -> Result<Option<Statement>, StoreError> {
    let candidates = store.filter_statements(&FilterCriteria::all().in_response_to(matched_text))?;
    Ok(choose(candidates, matched_text, config.random_seed))
}

struct Group {
    count: usize,
    latest: Timestamp,
    representative: Statement,
}

fn choose(candidates: Vec<Statement>, matched_text: &str, seed: Option<u64>) -> Option<Statement> {
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for stmt in candidates {
        match groups.get_mut(&stmt.text) {
            Some(group) => {
                group.count += 1;
                if (stmt.created_at, stmt.id) >= (group.latest, group.representative.id) {
                    group.latest = stmt.created_at;
                    group.representative = stmt;
                }
            }
            None => {
                groups.insert(
                    stmt.text.clone(),
                    Group {
                        count: 1,
                        latest: stmt.created_at,
                        representative: stmt,
                    },
                );
            }
        }
    }
    if groups.is_empty() {
        return None;
    }

    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::from_seed(derive_seed(seed, matched_text));
        let pick = rng.random_range(0..groups.len());
        return groups.into_values().nth(pick).map(|g| g.representative);
    }

    // BTreeMap iterates texts in ascending order, so keeping the first of
    // equal (count, latest) pairs yields the smallest text.
    let mut best: Option<Group> = None;
    for group in groups.into_values() {
        let replace = match &best {
            None => true,
            Some(b) => (group.count, group.latest) > (b.count, b.latest),
        };
        if replace {
            best = Some(group);
        }
    }
    best.map(|g| g.representative)
}

fn derive_seed(seed: u64, matched_text: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(matched_text.as_bytes());
    hasher.finalize().into()
}

/// Outcome of one exchange.
#[derive(Debug)]
pub struct Reply {
    pub result: ResponseResult,
    /// Id of the learned input statement, if one was written.
    pub learned_id: Option<i64>,
    /// A store failure during lookup or learning. The result is still valid.
    pub store_error: Option<StoreError>,
}

/// Conversation engine over a shared store.
#[derive(Clone)]
pub struct Engine {
    store: Arc<dyn StatementStore>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(store: Arc<dyn StatementStore>, config: EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self { store, config })
    }

    pub fn store(&self) -> &Arc<dyn StatementStore> {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Answers `raw_input` within `session` and learns from it.
    ///
    /// Callers reject inputs that are blank after whitespace cleaning; such an
    /// input gets the fallback and is not learned.
    pub fn get_response(&self, session: &mut SessionState, raw_input: &str) -> Reply {
        let input = preprocess(raw_input);
        let mut store_error = None;

        let result = if input.is_empty() {
            ResponseResult::fallback(&self.config)
        } else {
            match self.lookup(&input) {
                Ok(Some(result)) => result,
                Ok(None) => ResponseResult::fallback(&self.config),
                Err(e) => {
                    store_error = Some(e);
                    ResponseResult::fallback(&self.config)
                }
            }
        };

        let mut learned_id = None;
        if !self.config.read_only && !input.is_empty() {
            let learned = NewStatement::live(input, session.last_bot_text.clone());
            match self.store.add_statement(learned) {
                Ok(id) => learned_id = Some(id),
                Err(e) => store_error = Some(e),
            }
        }

        session.last_bot_text = Some(result.text.clone());
        session.transcript_length += 2;
        Reply {
            result,
            learned_id,
            store_error,
        }
    }

    fn lookup(&self, input: &str) -> Result<Option<ResponseResult>, StoreError> {
        let Some(found) = best_match(input, self.store.as_ref())? else {
            return Ok(None);
        };
        // a zero score never counts as a match, even with a zero threshold
        if found.score <= 0.0 || found.score < self.config.similarity_threshold {
            return Ok(None);
        }
        let Some(response) = select_response(&found.text, self.store.as_ref(), &self.config)? else {
            return Ok(None);
        };
        Ok(Some(ResponseResult {
            text: response.text,
            confidence: found.score,
            matched_prompt: Some(found.text),
            is_fallback: false,
        }))
    }
}
