use std::collections::BTreeSet;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use edubot_core::merge::{
    discover_databases, merge_into, run_merge_cli, MergeCliOptions, MergeSource, ReportFormat, EXIT_FAILURE,
    EXIT_NOT_ENOUGH, EXIT_OK,
};
use edubot_core::statement::{NewStatement, Timestamp};
use edubot_core::storage::{SqliteStore, StatementStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::Connection;
use sha2::{Digest, Sha256};

type Key = (String, Option<String>, String, String, Vec<String>);

/// Reads rows straight from the file, bypassing the store implementation.
fn raw_keys(path: &Path, live_only: bool) -> Vec<Key> {
    let conn = Connection::open_with_flags(path, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY).unwrap();
    let mut stmt = conn
        .prepare("SELECT id, text, in_response_to, conversation, created_at FROM statement ORDER BY id")
        .unwrap();
    let rows: Vec<(i64, String, Option<String>, String, String)> = stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?)))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    let mut tag_stmt = conn
        .prepare("SELECT t.name FROM statement_tag st JOIN tag t ON t.id = st.tag_id WHERE st.statement_id = ?1 ORDER BY t.name")
        .unwrap();
    rows.into_iter()
        .filter(|r| !live_only || r.3.is_empty())
        .map(|(id, text, prompt, conv, created)| {
            let tags: Vec<String> = tag_stmt
                .query_map([id], |r| r.get(0))
                .unwrap()
                .collect::<Result<_, _>>()
                .unwrap();
            (text, prompt, conv, created, tags)
        })
        .collect()
}

fn file_hash(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn training_count(path: &Path) -> usize {
    raw_keys(path, false).iter().filter(|k| k.2 == "training").count()
}

/// A database with a random mix of training and live rows. Rows are drawn
/// from a small pool so duplicates across files are common.
fn random_db(path: &Path, rng: &mut ChaCha8Rng) {
    const TEXTS: &[&str] = &["Hi", "Hello", "How are you?", "fine", "good", "bye"];
    let store = SqliteStore::open(path).unwrap();
    let n = rng.random_range(0..=30);
    let mut rows = Vec::new();
    for _ in 0..n {
        let text = TEXTS[rng.random_range(0..TEXTS.len())];
        let prompt = rng
            .random_bool(0.7)
            .then(|| TEXTS[rng.random_range(0..TEXTS.len())].to_owned());
        let at = Timestamp::from_unix(1_700_000_000 + rng.random_range(0..3)).unwrap();
        let mut row = if rng.random_bool(0.3) {
            NewStatement::training(text, prompt)
        } else {
            NewStatement::live(text, prompt)
        }
        .at(at);
        if rng.random_bool(0.2) {
            row = row.with_tags(["course"]);
        }
        rows.push(row);
    }
    store.add_statements(rows).unwrap();
}

fn merge_paths(target: &Path, sources: &[PathBuf]) -> edubot_core::merge::MergeReport {
    let target_store = SqliteStore::open(target).unwrap();
    let opened: Vec<_> = sources.iter().map(|p| SqliteStore::open_read_only(p).unwrap()).collect();
    let sources: Vec<_> = sources
        .iter()
        .zip(&opened)
        .map(|(path, store)| MergeSource {
            path: path.clone(),
            store: store as &dyn StatementStore,
        })
        .collect();
    merge_into(&target_store, target, &sources)
}

#[test]
fn randomized_merges_match_brute_force_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("{i}.sqlite3"))).collect();
        for p in &paths {
            random_db(p, &mut rng);
        }
        let expected: BTreeSet<Key> = paths.iter().flat_map(|p| raw_keys(p, true)).collect();
        let source_hashes: Vec<_> = paths[1..].iter().map(|p| file_hash(p)).collect();
        let training_before = training_count(&paths[0]);

        let report = merge_paths(&paths[0], &paths[1..]);
        assert!(report.is_complete());
        for s in &report.sources {
            assert_eq!(s.scanned, s.copied + s.skipped_duplicate);
        }
        let merged: BTreeSet<Key> = raw_keys(&paths[0], true).into_iter().collect();
        assert_eq!(merged, expected, "round {round}");
        assert_eq!(training_count(&paths[0]), training_before);
        let after: Vec<_> = paths[1..].iter().map(|p| file_hash(p)).collect();
        assert_eq!(source_hashes, after, "sources modified in round {round}");

        let again = merge_paths(&paths[0], &paths[1..]);
        assert_eq!(again.copied(), 0);
        let merged_twice: BTreeSet<Key> = raw_keys(&paths[0], true).into_iter().collect();
        assert_eq!(merged_twice, expected);
    }
}

#[test]
fn source_order_does_not_change_the_key_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let dir = tempfile::tempdir().unwrap();
        let originals: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("o{i}.sqlite3"))).collect();
        for p in &originals {
            random_db(p, &mut rng);
        }
        let mut results = Vec::new();
        for order in [[1usize, 2], [2, 1]] {
            let target = dir.path().join(format!("t{}{}.sqlite3", order[0], order[1]));
            std::fs::copy(&originals[0], &target).unwrap();
            let sources: Vec<_> = order.iter().map(|&i| originals[i].clone()).collect();
            merge_paths(&target, &sources);
            results.push(raw_keys(&target, true).into_iter().collect::<BTreeSet<_>>());
        }
        assert_eq!(results[0], results[1]);
    }
}

fn make_db(dir: &Path, name: &str, live: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let store = SqliteStore::open(&path).unwrap();
    store.add_statement(NewStatement::training("shared training", None)).unwrap();
    for text in live {
        store
            .add_statement(NewStatement::live(*text, None).at(Timestamp::from_unix(1_700_000_000).unwrap()))
            .unwrap();
    }
    path
}

fn run(options: &MergeCliOptions, stdin: &str) -> (i32, String, String) {
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_merge_cli(options, &mut input, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn discovery_filters_by_extension_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "b.sqlite3", &[]);
    make_db(dir.path(), "a.sqlite3", &[]);
    std::fs::write(dir.path().join("notes.txt"), "hello").unwrap();
    Connection::open(dir.path().join("x.sqlite3"))
        .unwrap()
        .execute_batch("CREATE TABLE other (id INTEGER);")
        .unwrap();
    std::fs::create_dir(dir.path().join("nested.sqlite3")).unwrap();

    let found = discover_databases(dir.path()).unwrap();
    let names: Vec<_> = found
        .databases
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap())
        .collect();
    assert_eq!(names, ["a.sqlite3", "b.sqlite3"]);
    assert_eq!(found.rejected.len(), 1);
    assert!(found.rejected[0].0.ends_with("x.sqlite3"));
}

#[test]
fn single_database_is_not_enough() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "only.sqlite3", &["a"]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        ..Default::default()
    };
    let (code, _, err) = run(&opts, "");
    assert_eq!(code, EXIT_NOT_ENOUGH);
    assert!(err.contains("not enough databases to merge"), "{err}");
    assert!(err.contains(".sqlite3"), "{err}");
}

#[test]
fn interactive_selection_merges_into_choice() {
    let dir = tempfile::tempdir().unwrap();
    let a = make_db(dir.path(), "a.sqlite3", &["from a"]);
    let b = make_db(dir.path(), "b.sqlite3", &["from b"]);
    let c = make_db(dir.path(), "c.sqlite3", &["from c", "from a"]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        ..Default::default()
    };
    // junk and out-of-range answers are re-prompted
    let (code, out, err) = run(&opts, "zero\n9\n2\n");
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.matches("invalid selection").count(), 2);
    let last = out.lines().last().unwrap();
    assert!(last.ends_with(&b.display().to_string()), "{last}");

    let texts: BTreeSet<_> = raw_keys(&b, true).into_iter().map(|k| k.0).collect();
    assert_eq!(texts, BTreeSet::from(["from a".into(), "from b".into(), "from c".into()]));
    assert_eq!(training_count(&b), 1);
    assert_eq!(raw_keys(&a, true).len(), 1);
    assert_eq!(raw_keys(&c, true).len(), 2);
}

#[test]
fn interactive_eof_without_selection_fails() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "a.sqlite3", &[]);
    make_db(dir.path(), "b.sqlite3", &[]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        ..Default::default()
    };
    assert_eq!(run(&opts, "").0, EXIT_FAILURE);
}

#[test]
fn flag_mode_with_yes_and_json_report() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "a.sqlite3", &["one"]);
    let b = make_db(dir.path(), "b.sqlite3", &[]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        target: Some(b.clone()),
        yes: true,
        report: ReportFormat::Json,
    };
    let (code, out, err) = run(&opts, "");
    assert_eq!(code, EXIT_OK, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["target"], b.display().to_string());
    assert_eq!(report["sources"][0]["copied"], 1);
    assert_eq!(report["sources"][0]["skipped_training"], 1);
}

#[test]
fn target_flag_without_yes_asks_for_confirmation() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "a.sqlite3", &["one"]);
    let b = make_db(dir.path(), "b.sqlite3", &[]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        target: Some(b.clone()),
        ..Default::default()
    };
    assert_eq!(run(&opts, "n\n").0, EXIT_FAILURE);
    assert_eq!(raw_keys(&b, true).len(), 0);
    assert_eq!(run(&opts, "y\n").0, EXIT_OK);
    assert_eq!(raw_keys(&b, true).len(), 1);
}

#[test]
fn missing_target_fails() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "a.sqlite3", &[]);
    make_db(dir.path(), "b.sqlite3", &[]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        target: Some(dir.path().join("missing.sqlite3")),
        yes: true,
        ..Default::default()
    };
    let (code, _, err) = run(&opts, "");
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("target not found"), "{err}");
}

#[test]
fn yes_without_target_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    make_db(dir.path(), "a.sqlite3", &[]);
    make_db(dir.path(), "b.sqlite3", &[]);
    let opts = MergeCliOptions {
        dir: dir.path().into(),
        yes: true,
        ..Default::default()
    };
    assert_eq!(run(&opts, "1\n").0, EXIT_FAILURE);
}
