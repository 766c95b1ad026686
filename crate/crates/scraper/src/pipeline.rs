use std::collections::{BTreeSet, HashSet, VecDeque};
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use edubot_core::serialize_corpus;
use serde::Serialize;
use url::Url;

use crate::extract::{extract_document, same_origin_links};
use crate::fetch::{FetchAuth, Fetcher};
use crate::to_corpus::{default_templates, document_to_corpus, validate_templates, TemplateError};

pub const DEFAULT_DELAY: Duration = Duration::from_millis(500);
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ScrapeOptions {
    pub urls: Vec<Url>,
    pub auth: FetchAuth,
    pub out_dir: PathBuf,
    /// 0 fetches only the given URLs, 1 also follows their same-origin links.
    pub depth: u8,
    pub templates: Vec<String>,
    /// Pause between consecutive requests.
    pub delay: Duration,
    pub timeout: Duration,
    /// Accept non-HTML content types.
    pub force: bool,
}

impl ScrapeOptions {
    pub fn new(urls: Vec<Url>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            urls,
            auth: FetchAuth::new(),
            out_dir: out_dir.into(),
            depth: 0,
            templates: default_templates(),
            delay: DEFAULT_DELAY,
            timeout: DEFAULT_TIMEOUT,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PageOutcome {
    pub url: String,
    pub corpus_file: Option<PathBuf>,
    pub sections: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScrapeReport {
    pub pages: Vec<PageOutcome>,
}

impl ScrapeReport {
    pub fn written(&self) -> impl Iterator<Item = &Path> {
        self.pages.iter().filter_map(|p| p.corpus_file.as_deref())
    }

    pub fn failures(&self) -> impl Iterator<Item = &PageOutcome> {
        self.pages.iter().filter(|p| p.error.is_some())
    }

    /// 1 when nothing was written, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.written().next().is_some() {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScrapeError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("depth must be 0 or 1, got {0}")]
    Depth(u8),
    #[error("no URLs given")]
    NoUrls,
    #[error("cannot use output directory {path}: {source}")]
    OutDir { path: PathBuf, source: io::Error },
}

/// Reads question templates, one per line. Blank lines and lines starting
/// with `#` are ignored.
pub fn load_templates(path: &Path) -> io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

pub fn slug(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_end_matches('-');
    let mut slug: String = trimmed.chars().take(80).collect();
    if slug.ends_with('-') {
        slug.pop();
    }
    if slug.is_empty() {
        "page".to_owned()
    } else {
        slug
    }
}

fn unique_name(base: &str, taken: &mut HashSet<String>) -> String {
    let mut name = base.to_owned();
    let mut n = 2;
    while !taken.insert(name.clone()) {
        name = format!("{base}-{n}");
        n += 1;
    }
    name
}

/// Fetches every page, writes one corpus file per page that has text, and
/// reports a per-page outcome. A failing page never stops the run.
pub async fn run_scrape(options: &ScrapeOptions) -> Result<ScrapeReport, ScrapeError> {
    validate_templates(&options.templates)?;
    if options.depth > 1 {
        return Err(ScrapeError::Depth(options.depth));
    }
    if options.urls.is_empty() {
        return Err(ScrapeError::NoUrls);
    }
    std::fs::create_dir_all(&options.out_dir).map_err(|source| ScrapeError::OutDir {
        path: options.out_dir.clone(),
        source,
    })?;

    let fetcher = Fetcher::new(options.timeout);
    let mut queue: VecDeque<(Url, u8)> = VecDeque::new();
    let mut seen: BTreeSet<Url> = BTreeSet::new();
    for url in &options.urls {
        let mut url = url.clone();
        url.set_fragment(None);
        if seen.insert(url.clone()) {
            queue.push_back((url, 0));
        }
    }

    let mut report = ScrapeReport::default();
    let mut names = HashSet::new();
    let mut first = true;
    while let Some((url, level)) = queue.pop_front() {
        if !first && !options.delay.is_zero() {
            tokio::time::sleep(options.delay).await;
        }
        first = false;

        let mut outcome = PageOutcome {
            url: url.to_string(),
            corpus_file: None,
            sections: 0,
            error: None,
        };
        let page = match fetcher.fetch_page(&url, &options.auth, options.force).await {
            Ok(page) if page.is_success() => page,
            Ok(page) => {
                outcome.error = Some(format!("HTTP status {}", page.status));
                tracing::warn!(url = %url, status = page.status, "page not fetched");
                report.pages.push(outcome);
                continue;
            }
            Err(e) => {
                tracing::warn!(url = %url, error = %e, "page not fetched");
                outcome.error = Some(e.to_string());
                report.pages.push(outcome);
                continue;
            }
        };

        if level < options.depth {
            for link in same_origin_links(&page.body, &page.final_url) {
                if seen.insert(link.clone()) {
                    queue.push_back((link, level + 1));
                }
            }
        }

        let doc = match extract_document(&page.body, &url) {
            Ok(doc) => doc,
            Err(e) => {
                outcome.error = Some(e.to_string());
                report.pages.push(outcome);
                continue;
            }
        };
        let corpus = document_to_corpus(&doc, &options.templates)?;
        let name = unique_name(&slug(&doc.title), &mut names);
        let path = options.out_dir.join(format!("{name}.yml"));
        match std::fs::write(&path, serialize_corpus(&corpus)) {
            Ok(()) => {
                tracing::info!(url = %url, file = %path.display(), sections = doc.sections.len(), "page scraped");
                outcome.sections = doc.sections.len();
                outcome.corpus_file = Some(path);
            }
            Err(e) => outcome.error = Some(format!("cannot write {}: {e}", path.display())),
        }
        report.pages.push(outcome);
    }
    Ok(report)
}
