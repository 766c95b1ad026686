//! Statement persistence behind a common adapter interface.
//!
//! Two backings exist: [`MemoryStore`] for tests and throwaway bots, and
//! [`SqliteStore`] for the single-file `.sqlite3` format with the tables
//! `statement`, `tag` and `statement_tag`. Both must behave identically; the
//! conformance tests in `tests/store_conformance.rs` run them side by side.

mod memory;
mod sqlite;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use memory::MemoryStore;
pub use sqlite::{validate_database, SqliteStore};

use crate::statement::{NewStatement, Statement, Timestamp};
use crate::text::clean_whitespace;

/// File extension of the single-file database format.
pub const DATABASE_EXTENSION: &str = "sqlite3";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("schema mismatch in {path}: {reason}")]
    SchemaMismatch { path: PathBuf, reason: String },
    #[error("{path} is not a readable database: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("cannot open {path}: {reason}")]
    Open { path: PathBuf, reason: String },
    #[error("statement text is empty after whitespace cleaning")]
    EmptyText,
    #[error("store write failed: {0}")]
    WriteFailure(String),
    #[error("store read failed: {0}")]
    ReadFailure(String),
    #[error("store file {0} is missing")]
    Missing(PathBuf),
}

/// Conjunctive statement query. The default value matches every statement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterCriteria {
    pub text_equals: Option<String>,
    /// `Some(None)` matches statements without a prompt.
    pub in_response_to_equals: Option<Option<String>>,
    pub conversation_equals: Option<String>,
    pub has_tag: Option<String>,
    /// Strictly earlier than.
    pub created_before: Option<Timestamp>,
    /// Strictly later than.
    pub created_after: Option<Timestamp>,
}

impl FilterCriteria {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text_equals = Some(text.into());
        self
    }

    pub fn in_response_to(mut self, prompt: impl Into<String>) -> Self {
        self.in_response_to_equals = Some(Some(prompt.into()));
        self
    }

    pub fn without_prompt(mut self) -> Self {
        self.in_response_to_equals = Some(None);
        self
    }

    pub fn conversation(mut self, conversation: impl Into<String>) -> Self {
        self.conversation_equals = Some(conversation.into());
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.has_tag = Some(tag.into());
        self
    }

    pub fn before(mut self, ts: Timestamp) -> Self {
        self.created_before = Some(ts);
        self
    }

    pub fn after(mut self, ts: Timestamp) -> Self {
        self.created_after = Some(ts);
        self
    }

    pub fn matches(&self, stmt: &Statement) -> bool {
        self.text_equals.as_ref().is_none_or(|t| &stmt.text == t)
            && self
                .in_response_to_equals
                .as_ref()
                .is_none_or(|p| &stmt.in_response_to == p)
            && self
                .conversation_equals
                .as_ref()
                .is_none_or(|c| &stmt.conversation == c)
            && self.has_tag.as_ref().is_none_or(|t| stmt.tags.contains(t))
            && self.created_before.is_none_or(|ts| stmt.created_at < ts)
            && self.created_after.is_none_or(|ts| stmt.created_at > ts)
    }
}

/// Storage adapter used by the engine, trainers and the merge tool.
///
/// Implementations allow concurrent readers and serialize writers. Ids are
/// assigned as `max(id) + 1`, starting from 1.
pub trait StatementStore: Send + Sync {
    /// Inserts all statements atomically, returning their ids in order.
    fn add_statements(&self, statements: Vec<NewStatement>) -> Result<Vec<i64>, StoreError>;

    /// Matching statements ordered by id ascending.
    fn filter_statements(&self, criteria: &FilterCriteria) -> Result<Vec<Statement>, StoreError>;

    fn count_statements(&self) -> Result<u64, StoreError>;

    fn distinct_texts(&self) -> Result<BTreeSet<String>, StoreError>;

    fn add_statement(&self, statement: NewStatement) -> Result<i64, StoreError> {
        let ids = self.add_statements(vec![statement])?;
        Ok(ids[0])
    }

    /// Cheap liveness probe. File stores report a vanished backing file.
    fn check_health(&self) -> Result<(), StoreError> {
        Ok(())
    }
}

/// Where a store lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreLocation {
    Memory,
    File(PathBuf),
}

impl StoreLocation {
    /// `:memory:` selects the in-memory backing, anything else is a path.
    pub fn parse(raw: &str) -> Self {
        if raw == ":memory:" {
            Self::Memory
        } else {
            Self::File(PathBuf::from(raw))
        }
    }
}

impl<P: AsRef<Path>> From<P> for StoreLocation {
    fn from(path: P) -> Self {
        Self::File(path.as_ref().to_path_buf())
    }
}

/// Opens (or creates) a store at `location`.
pub fn open_store(location: &StoreLocation) -> Result<Arc<dyn StatementStore>, StoreError> {
    Ok(match location {
        StoreLocation::Memory => Arc::new(MemoryStore::new()),
        StoreLocation::File(path) => Arc::new(SqliteStore::open(path)?),
    })
}

pub(crate) fn validate_new(stmt: &NewStatement) -> Result<(), StoreError> {
    if clean_whitespace(&stmt.text).is_empty() {
        return Err(StoreError::EmptyText);
    }
    Ok(())
}
