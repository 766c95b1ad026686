//! Combines live-learned statements from several database files into one.
//!
//! Only rows with a blank `conversation` field travel; training rows are
//! assumed identical everywhere and stay put. A row is copied when the target
//! holds no row with an equal [`StatementKey`], i.e. equal in every field but
//! the id. Because `created_at` is part of the key, the same text learned at
//! two different times is kept twice.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::statement::{Statement, Timestamp};
use crate::storage::{validate_database, SqliteStore, StatementStore, StoreError, DATABASE_EXTENSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_ENOUGH: i32 = 2;

/// Every statement field except the id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatementKey {
    pub text: String,
    pub in_response_to: Option<String>,
    pub conversation: String,
    pub created_at: Timestamp,
    pub tags: Vec<String>,
}

impl From<&Statement> for StatementKey {
    fn from(s: &Statement) -> Self {
        Self {
            text: s.text.clone(),
            in_response_to: s.in_response_to.clone(),
            conversation: s.conversation.clone(),
            created_at: s.created_at,
            // BTreeSet iteration is already sorted
            tags: s.tags.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceReport {
    pub path: PathBuf,
    /// Live rows considered; equals `copied + skipped_duplicate`.
    pub scanned: usize,
    pub copied: usize,
    pub skipped_training: usize,
    pub skipped_duplicate: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub target: PathBuf,
    pub sources: Vec<SourceReport>,
    /// Set when the merge stopped early. Sources listed before the failing
    /// one were fully copied.
    pub failure: Option<String>,
}

impl MergeReport {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn copied(&self) -> usize {
        self.sources.iter().map(|s| s.copied).sum()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sources {
            out.push_str(&format!(
                "{}: scanned {}, copied {}, duplicates {}, training rows skipped {}\n",
                s.path.display(),
                s.scanned,
                s.copied,
                s.skipped_duplicate,
                s.skipped_training
            ));
        }
        if let Some(failure) = &self.failure {
            out.push_str(&format!("merge stopped early: {failure}\n"));
        }
        out.push_str(&format!(
            "merged {} statement(s) from {} database(s) into: {}\n",
            self.copied(),
            self.sources.len(),
            self.target.display()
        ));
        out
    }
}

pub struct MergeSource<'a> {
    pub path: PathBuf,
    pub store: &'a dyn StatementStore,
}

/// Copies the live rows of each source, in order, into `target`.
///
/// Sources are only read. Each source is written as one transaction, so a
/// write failure leaves earlier sources merged and none of the failing one.
pub fn merge_into(target: &dyn StatementStore, target_path: &Path, sources: &[MergeSource<'_>]) -> MergeReport {
    let mut report = MergeReport {
        target: target_path.to_path_buf(),
        ..MergeReport::default()
    };
    let mut known: HashSet<StatementKey> = match target.filter_statements(&Default::default()) {
        Ok(rows) => rows.iter().map(StatementKey::from).collect(),
        Err(e) => {
            report.failure = Some(format!("reading target: {e}"));
            return report;
        }
    };

    for source in sources {
        let mut entry = SourceReport {
            path: source.path.clone(),
            ..SourceReport::default()
        };
        let rows = match source.store.filter_statements(&Default::default()) {
            Ok(rows) => rows,
            Err(e) => {
                report.failure = Some(format!("reading {}: {e}", source.path.display()));
                return report;
            }
        };

        let mut batch = Vec::new();
        let mut batch_keys = Vec::new();
        for row in rows {
            if !row.is_live() {
                entry.skipped_training += 1;
                continue;
            }
            entry.scanned += 1;
            let key = StatementKey::from(&row);
            if known.contains(&key) {
                entry.skipped_duplicate += 1;
                continue;
            }
            known.insert(key.clone());
            batch_keys.push(key);
            batch.push(row.to_new());
        }

        let copied = batch.len();
        if copied > 0 {
            if let Err(e) = target.add_statements(batch) {
                for key in &batch_keys {
                    known.remove(key);
                }
                report.failure = Some(format!("writing rows from {}: {e}", source.path.display()));
                report.sources.push(entry);
                return report;
            }
        }
        entry.copied = copied;
        report.sources.push(entry);
    }
    report
}

#[derive(Debug, Default)]
pub struct Discovery {
    pub databases: Vec<PathBuf>,
    /// Files with the right extension that failed schema validation.
    pub rejected: Vec<(PathBuf, StoreError)>,
}

/// Valid `.sqlite3` files directly inside `dir`, sorted by path.
pub fn discover_databases(dir: &Path) -> std::io::Result<Discovery> {
    let mut candidates = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_file() && path.extension().and_then(|e| e.to_str()) == Some(DATABASE_EXTENSION) {
            candidates.push(path);
        }
    }
    candidates.sort();

    let mut found = Discovery::default();
    for path in candidates {
        match validate_database(&path) {
            Ok(()) => found.databases.push(path),
            Err(e) => found.rejected.push((path, e)),
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct MergeCliOptions {
    pub dir: PathBuf,
    pub target: Option<PathBuf>,
    /// Skip the confirmation prompt. Requires `target`.
    pub yes: bool,
    pub report: ReportFormat,
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

fn read_answer(input: &mut dyn BufRead) -> Option<String> {
    let mut line = String::new();
    match input.read_line(&mut line) {
        Ok(0) | Err(_) => None,
        Ok(_) => Some(line.trim().to_owned()),
    }
}

/// The interactive merge command. Returns the process exit code.
pub fn run_merge_cli(
    options: &MergeCliOptions,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match run_merge_cli_inner(options, input, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn run_merge_cli_inner(
    options: &MergeCliOptions,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::io::Result<i32> {
    let found = match discover_databases(&options.dir) {
        Ok(found) => found,
        Err(e) => {
            writeln!(err, "error: cannot read {}: {e}", options.dir.display())?;
            return Ok(EXIT_FAILURE);
        }
    };
    for (path, reason) in &found.rejected {
        writeln!(err, "warning: skipping {}: {reason}", path.display())?;
    }

    if let Some(target) = &options.target {
        if !target.is_file() {
            writeln!(err, "error: target not found: {}", target.display())?;
            return Ok(EXIT_FAILURE);
        }
        if let Err(e) = validate_database(target) {
            writeln!(err, "error: target is not a usable database: {e}")?;
            return Ok(EXIT_FAILURE);
        }
    } else if options.yes {
        writeln!(err, "error: --yes needs --target to choose the database to merge into")?;
        return Ok(EXIT_FAILURE);
    }

    let interactive_target = options.target.is_none();
    if interactive_target && found.databases.len() <= 1 {
        return not_enough(&found, &options.dir, err);
    }

    let target = match &options.target {
        Some(t) => t.clone(),
        None => match prompt_selection(&found.databases, input, out)? {
            Some(t) => t,
            None => {
                writeln!(err, "error: no database selected")?;
                return Ok(EXIT_FAILURE);
            }
        },
    };
    let source_paths: Vec<PathBuf> = found
        .databases
        .iter()
        .filter(|p| !same_file(p, &target))
        .cloned()
        .collect();
    if source_paths.is_empty() {
        return not_enough(&found, &options.dir, err);
    }

    if !options.yes && !interactive_target {
        write!(
            out,
            "Merge {} database(s) into {}? [y/N]: ",
            source_paths.len(),
            target.display()
        )?;
        out.flush()?;
        let answer = read_answer(input).unwrap_or_default();
        if !matches!(answer.as_str(), "y" | "Y" | "yes") {
            writeln!(err, "aborted")?;
            return Ok(EXIT_FAILURE);
        }
    }

    let target_store = match SqliteStore::open_exclusive(&target) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_FAILURE);
        }
    };
    let mut opened = Vec::new();
    for path in &source_paths {
        match SqliteStore::open_read_only(path) {
            Ok(s) => opened.push((path.clone(), s)),
            Err(e) => {
                writeln!(err, "error: {e}")?;
                return Ok(EXIT_FAILURE);
            }
        }
    }
    let sources: Vec<MergeSource<'_>> = opened
        .iter()
        .map(|(path, store)| MergeSource {
            path: path.clone(),
            store,
        })
        .collect();

    let report = merge_into(&target_store, &target, &sources);
    match options.report {
        ReportFormat::Text => write!(out, "{}", report.render_text())?,
        ReportFormat::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        )?,
    }
    Ok(if report.is_complete() { EXIT_OK } else { EXIT_FAILURE })
}

fn not_enough(found: &Discovery, dir: &Path, err: &mut dyn Write) -> std::io::Result<i32> {
    writeln!(
        err,
        "not enough databases to merge: found {} in {} (supported database type: .{DATABASE_EXTENSION})",
        found.databases.len(),
        dir.display()
    )?;
    Ok(EXIT_NOT_ENOUGH)
}

fn prompt_selection(
    databases: &[PathBuf],
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> std::io::Result<Option<PathBuf>> {
    writeln!(out, "Found {} databases:", databases.len())?;
    for (i, path) in databases.iter().enumerate() {
        writeln!(out, "  {}) {}", i + 1, path.display())?;
    }
    loop {
        write!(out, "Merge into which database? [1-{}]: ", databases.len())?;
        out.flush()?;
        let Some(answer) = read_answer(input) else {
            return Ok(None);
        };
        match answer.parse::<usize>() {
            Ok(n) if (1..=databases.len()).contains(&n) => return Ok(Some(databases[n - 1].clone())),
            _ => writeln!(out, "invalid selection {answer:?}")?,
        }
    }
}
