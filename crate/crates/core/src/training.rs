//! Trainers that load example dialog into a store as a response graph.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::corpus::{parse_corpus, Corpus, MalformedCorpus};
use crate::statement::{NewStatement, TRAINING};
use crate::storage::{FilterCriteria, StatementStore, StoreError};
use crate::text::clean_whitespace;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("utterance {index} is empty after whitespace cleaning")]
    EmptyUtterance { index: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Skip rows whose (text, prompt) pair already exists as training data.
    pub dedupe: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainStats {
    pub files: usize,
    pub conversations: usize,
    pub statements: usize,
    pub failures: Vec<FileFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileFailure {
    pub path: PathBuf,
    pub reason: String,
}

/// Rows for one conversation: each utterance answers the one before it.
fn conversation_rows(texts: &[impl AsRef<str>], tags: &[String]) -> Result<Vec<NewStatement>, TrainError> {
    let cleaned: Vec<String> = texts.iter().map(|t| clean_whitespace(t.as_ref())).collect();
    if let Some(index) = cleaned.iter().position(String::is_empty) {
        return Err(TrainError::EmptyUtterance { index });
    }
    let mut previous: Option<String> = None;
    Ok(cleaned
        .into_iter()
        .map(|text| NewStatement::training(text.clone(), previous.replace(text)).with_tags(tags.iter().cloned()))
        .collect())
}

/// Trains one ordered conversation. Returns the number of rows inserted.
pub fn train_list(store: &dyn StatementStore, texts: &[impl AsRef<str>]) -> Result<usize, TrainError> {
    let rows = conversation_rows(texts, &[])?;
    let n = rows.len();
    if n > 0 {
        store.add_statements(rows)?;
    }
    Ok(n)
}

type PairKey = (String, Option<String>);

fn existing_training_pairs(store: &dyn StatementStore) -> Result<HashSet<PairKey>, StoreError> {
    Ok(store
        .filter_statements(&FilterCriteria::all().conversation(TRAINING))?
        .into_iter()
        .map(|s| (s.text, s.in_response_to))
        .collect())
}

/// Trains every conversation of an in-memory corpus, tagging each row with
/// all of the corpus categories. The whole corpus is one atomic write.
pub fn train_parsed_corpus(
    store: &dyn StatementStore,
    corpus: &Corpus,
    options: TrainOptions,
) -> Result<usize, TrainError> {
    let mut rows = Vec::new();
    for conversation in &corpus.conversations {
        rows.extend(conversation_rows(conversation, &corpus.categories)?);
    }
    if options.dedupe {
        let mut seen = existing_training_pairs(store)?;
        rows.retain(|r| seen.insert((r.text.clone(), r.in_response_to.clone())));
    }
    let n = rows.len();
    if n > 0 {
        store.add_statements(rows)?;
    }
    Ok(n)
}

fn is_corpus_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("yml") | Some("yaml")
    )
}

/// Corpus files under `path` in lexicographic order. A file path is returned
/// as-is; directories are searched recursively.
pub fn corpus_files(path: &Path) -> Result<Vec<PathBuf>, TrainError> {
    let meta = std::fs::metadata(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| TrainError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && is_corpus_file(entry.path()) {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

/// Trains every corpus file under `path`.
///
/// A malformed or empty file is recorded in `failures` and skipped; the
/// remaining files are still trained. Store failures abort.
pub fn train_corpus(store: &dyn StatementStore, path: &Path, options: TrainOptions) -> Result<TrainStats, TrainError> {
    let mut stats = TrainStats::default();
    for file in corpus_files(path)? {
        let corpus = match std::fs::read(&file)
            .map_err(|e| MalformedCorpus {
                reason: e.to_string(),
                line: None,
            })
            .and_then(|bytes| parse_corpus(&bytes))
        {
            Ok(c) => c,
            Err(e) => {
                stats.failures.push(FileFailure {
                    path: file,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if corpus.conversations.is_empty() {
            stats.failures.push(FileFailure {
                path: file,
                reason: "corpus has no conversations".into(),
            });
            continue;
        }
        let inserted = train_parsed_corpus(store, &corpus, options)?;
        stats.files += 1;
        stats.conversations += corpus.conversations.len();
        stats.statements += inserted;
    }
    Ok(stats)
}
