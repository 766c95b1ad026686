//! Retrieval chatbot core.
//!
//! The engine answers an input by finding the most similar known statement
//! and returning one of the statements stored as a response to it. Every user
//! input is learned as an answer to whatever the bot said last, which grows
//! the response graph over time.

pub mod corpus;
pub mod engine;
pub mod merge;
pub mod similarity;
pub mod statement;
pub mod storage;
pub mod text;
pub mod training;

pub use corpus::{parse_corpus, serialize_corpus, Corpus, MalformedCorpus};
pub use engine::{best_match, select_response, Engine, EngineConfig, Reply, ResponseResult, SessionState};
pub use similarity::{levenshtein, similarity};
pub use statement::{NewStatement, Statement, Timestamp, LIVE, TRAINING};
pub use storage::{open_store, FilterCriteria, MemoryStore, SqliteStore, StatementStore, StoreError, StoreLocation};
pub use text::{clean_whitespace, unescape_html};
pub use training::{train_corpus, train_list, train_parsed_corpus, TrainOptions, TrainStats};
