use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use rusqlite::types::Value;
use rusqlite::{params, params_from_iter, Connection, ErrorCode, OpenFlags, OptionalExtension, Transaction};

use super::{validate_new, FilterCriteria, StatementStore, StoreError};
use crate::statement::{NewStatement, Statement, Timestamp};

const SCHEMA: &str = "
CREATE TABLE statement (
    id INTEGER PRIMARY KEY,
    text TEXT NOT NULL,
    in_response_to TEXT,
    conversation TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL
);
CREATE TABLE tag (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE statement_tag (
    statement_id INTEGER NOT NULL REFERENCES statement(id),
    tag_id INTEGER NOT NULL REFERENCES tag(id)
);
CREATE INDEX statement_text_idx ON statement(text);
CREATE INDEX statement_in_response_to_idx ON statement(in_response_to);
CREATE INDEX statement_tag_statement_idx ON statement_tag(statement_id);
";

const REQUIRED_COLUMNS: [(&str, &[&str]); 3] = [
    ("statement", &["id", "text", "in_response_to", "conversation", "created_at"]),
    ("tag", &["id", "name"]),
    ("statement_tag", &["statement_id", "tag_id"]),
];

/// Single-file SQLite store.
pub struct SqliteStore {
    conn: Mutex<Connection>,
    path: PathBuf,
}

impl SqliteStore {
    /// Opens `path`, creating the file and the three tables when it is absent
    /// or an empty database.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if path.is_dir() {
            return Err(StoreError::Open {
                reason: "path is a directory".into(),
                path,
            });
        }
        let conn = Connection::open(&path).map_err(|e| open_error(&path, e))?;
        let store = Self::configure(conn, path)?;
        store.init_or_validate()?;
        Ok(store)
    }

    /// Opens an existing file without ever writing to it.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if !path.is_file() {
            return Err(StoreError::Missing(path));
        }
        let conn = Connection::open_with_flags(
            &path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| open_error(&path, e))?;
        let store = Self::configure(conn, path)?;
        {
            let conn = store.lock();
            check_schema(&conn, &store.path)?;
        }
        Ok(store)
    }

    /// Opens like [`SqliteStore::open`] and holds an exclusive file lock until
    /// the store is dropped. Other connections can neither read nor write.
    pub fn open_exclusive(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let store = Self::open(path)?;
        {
            let conn = store.lock();
            conn.pragma_update(None, "locking_mode", "EXCLUSIVE")
                .and_then(|_| conn.execute_batch("BEGIN EXCLUSIVE; COMMIT;"))
                .map_err(|e| StoreError::Open {
                    path: store.path.clone(),
                    reason: format!("could not lock: {e}"),
                })?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn configure(conn: Connection, path: PathBuf) -> Result<Self, StoreError> {
        conn.busy_timeout(Duration::from_secs(5))
            .map_err(|e| open_error(&path, e))?;
        Ok(Self {
            conn: Mutex::new(conn),
            path,
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().expect("sqlite connection lock poisoned")
    }

    fn init_or_validate(&self) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let objects: i64 = conn
            .query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get(0))
            .map_err(|e| open_error(&self.path, e))?;
        if objects == 0 {
            let tx = conn.transaction().map_err(write_err)?;
            tx.execute_batch(SCHEMA).map_err(write_err)?;
            tx.commit().map_err(write_err)?;
            return Ok(());
        }
        check_schema(&conn, &self.path)
    }
}

/// Checks that `path` is a database with the three statement tables,
/// opening it read-only.
pub fn validate_database(path: &Path) -> Result<(), StoreError> {
    SqliteStore::open_read_only(path).map(|_| ())
}

fn check_schema(conn: &Connection, path: &Path) -> Result<(), StoreError> {
    for (table, required) in REQUIRED_COLUMNS {
        let mut stmt = conn
            .prepare("SELECT name FROM pragma_table_info(?1)")
            .map_err(|e| open_error(path, e))?;
        let columns: BTreeSet<String> = stmt
            .query_map([table], |r| r.get(0))
            .and_then(|rows| rows.collect())
            .map_err(|e| open_error(path, e))?;
        if columns.is_empty() {
            return Err(StoreError::SchemaMismatch {
                path: path.to_path_buf(),
                reason: format!("missing table `{table}`"),
            });
        }
        if let Some(missing) = required.iter().find(|c| !columns.contains(**c)) {
            return Err(StoreError::SchemaMismatch {
                path: path.to_path_buf(),
                reason: format!("table `{table}` lacks column `{missing}`"),
            });
        }
    }
    Ok(())
}

fn open_error(path: &Path, e: rusqlite::Error) -> StoreError {
    match e.sqlite_error_code() {
        Some(ErrorCode::NotADatabase) | Some(ErrorCode::DatabaseCorrupt) => StoreError::CorruptFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
        _ => StoreError::Open {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
    }
}

fn write_err(e: rusqlite::Error) -> StoreError {
    StoreError::WriteFailure(e.to_string())
}

fn read_err(e: rusqlite::Error) -> StoreError {
    StoreError::ReadFailure(e.to_string())
}

fn insert(tx: &Transaction<'_>, stmt: &NewStatement) -> rusqlite::Result<i64> {
    tx.execute(
        "INSERT INTO statement (text, in_response_to, conversation, created_at) VALUES (?1, ?2, ?3, ?4)",
        params![stmt.text, stmt.in_response_to, stmt.conversation, stmt.created_at.to_string()],
    )?;
    let id = tx.last_insert_rowid();
    for tag in &stmt.tags {
        let existing: Option<i64> = tx
            .query_row("SELECT id FROM tag WHERE name = ?1 ORDER BY id LIMIT 1", [tag], |r| r.get(0))
            .optional()?;
        let tag_id = match existing {
            Some(tag_id) => tag_id,
            None => {
                tx.execute("INSERT INTO tag (name) VALUES (?1)", [tag])?;
                tx.last_insert_rowid()
            }
        };
        tx.execute(
            "INSERT INTO statement_tag (statement_id, tag_id) VALUES (?1, ?2)",
            params![id, tag_id],
        )?;
    }
    Ok(id)
}

fn where_clause(criteria: &FilterCriteria) -> (String, Vec<Value>) {
    let mut clauses = Vec::new();
    let mut args = Vec::new();
    if let Some(text) = &criteria.text_equals {
        clauses.push("text = ?");
        args.push(Value::Text(text.clone()));
    }
    match &criteria.in_response_to_equals {
        Some(Some(prompt)) => {
            clauses.push("in_response_to = ?");
            args.push(Value::Text(prompt.clone()));
        }
        Some(None) => clauses.push("in_response_to IS NULL"),
        None => {}
    }
    if let Some(conversation) = &criteria.conversation_equals {
        clauses.push("COALESCE(conversation, '') = ?");
        args.push(Value::Text(conversation.clone()));
    }
    if let Some(tag) = &criteria.has_tag {
        clauses.push(
            "EXISTS (SELECT 1 FROM statement_tag st JOIN tag t ON t.id = st.tag_id \
             WHERE st.statement_id = statement.id AND t.name = ?)",
        );
        args.push(Value::Text(tag.clone()));
    }
    if let Some(ts) = criteria.created_before {
        clauses.push("created_at < ?");
        args.push(Value::Text(ts.to_string()));
    }
    if let Some(ts) = criteria.created_after {
        clauses.push("created_at > ?");
        args.push(Value::Text(ts.to_string()));
    }
    if clauses.is_empty() {
        (String::new(), args)
    } else {
        (format!(" WHERE {}", clauses.join(" AND ")), args)
    }
}

impl StatementStore for SqliteStore {
    fn add_statements(&self, statements: Vec<NewStatement>) -> Result<Vec<i64>, StoreError> {
        for stmt in &statements {
            validate_new(stmt)?;
        }
        let mut conn = self.lock();
        let tx = conn
            .transaction_with_behavior(rusqlite::TransactionBehavior::Immediate)
            .map_err(write_err)?;
        let ids = statements
            .iter()
            .map(|stmt| insert(&tx, stmt))
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(write_err)?;
        tx.commit().map_err(write_err)?;
        Ok(ids)
    }

    fn filter_statements(&self, criteria: &FilterCriteria) -> Result<Vec<Statement>, StoreError> {
        let (where_sql, args) = where_clause(criteria);
        let conn = self.lock();

        let sql = format!(
            "SELECT id, text, in_response_to, conversation, created_at FROM statement{where_sql} ORDER BY id"
        );
        let mut query = conn.prepare(&sql).map_err(read_err)?;
        let rows = query
            .query_map(params_from_iter(args.iter()), |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, Option<String>>(2)?,
                    r.get::<_, Option<String>>(3)?,
                    r.get::<_, String>(4)?,
                ))
            })
            .and_then(|rows| rows.collect::<rusqlite::Result<Vec<_>>>())
            .map_err(read_err)?;

        let mut statements = Vec::with_capacity(rows.len());
        let mut index = BTreeMap::new();
        for (id, text, in_response_to, conversation, created_at) in rows {
            let created_at: Timestamp = created_at
                .parse()
                .map_err(|e| StoreError::ReadFailure(format!("statement {id}: {e}")))?;
            index.insert(id, statements.len());
            statements.push(Statement {
                id,
                text,
                in_response_to,
                conversation: conversation.unwrap_or_default(),
                created_at,
                tags: BTreeSet::new(),
            });
        }
        if statements.is_empty() {
            return Ok(statements);
        }

        let tag_sql = format!(
            "SELECT st.statement_id, t.name FROM statement_tag st JOIN tag t ON t.id = st.tag_id \
             WHERE st.statement_id IN (SELECT id FROM statement{where_sql})"
        );
        let mut query = conn.prepare(&tag_sql).map_err(read_err)?;
        let links = query
            .query_map(params_from_iter(args.iter()), |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))
            .and_then(|rows| rows.collect::<rusqlite::Result<Vec<_>>>())
            .map_err(read_err)?;
        for (id, name) in links {
            if let Some(&i) = index.get(&id) {
                statements[i].tags.insert(name);
            }
        }
        Ok(statements)
    }

    fn count_statements(&self) -> Result<u64, StoreError> {
        let conn = self.lock();
        let n: i64 = conn
            .query_row("SELECT count(*) FROM statement", [], |r| r.get(0))
            .map_err(read_err)?;
        Ok(n as u64)
    }

    fn distinct_texts(&self) -> Result<BTreeSet<String>, StoreError> {
        let conn = self.lock();
        let mut query = conn.prepare("SELECT DISTINCT text FROM statement").map_err(read_err)?;
        query
            .query_map([], |r| r.get(0))
            .and_then(|rows| rows.collect())
            .map_err(read_err)
    }

    fn check_health(&self) -> Result<(), StoreError> {
        if !self.path.is_file() {
            return Err(StoreError::Missing(self.path.clone()));
        }
        self.count_statements().map(|_| ())
    }
}
