//! Turns course web pages into question/answer corpus files.
//!
//! Each page is reduced to heading-delimited sections, and every section
//! yields one conversation per question template with the section body as
//! the answer.

pub mod extract;
pub mod fetch;
pub mod pipeline;
pub mod to_corpus;

pub use extract::{extract_document, ExtractError, ScrapeDocument, Section};
pub use fetch::{FetchAuth, FetchError, FetchedPage, Fetcher, NetworkErrorKind};
pub use pipeline::{load_templates, run_scrape, PageOutcome, ScrapeError, ScrapeOptions, ScrapeReport};
pub use to_corpus::{default_templates, document_to_corpus, TemplateError};
