use std::collections::BTreeSet;
use std::sync::RwLock;

use super::{validate_new, FilterCriteria, StatementStore, StoreError};
use crate::statement::{NewStatement, Statement};

#[derive(Default)]
struct Rows {
    statements: Vec<Statement>,
    next_id: i64,
}

/// Process-local store. Rows are kept in id order.
pub struct MemoryStore {
    rows: RwLock<Rows>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self {
            rows: RwLock::new(Rows {
                statements: Vec::new(),
                next_id: 1,
            }),
        }
    }
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl StatementStore for MemoryStore {
    fn add_statements(&self, statements: Vec<NewStatement>) -> Result<Vec<i64>, StoreError> {
        for stmt in &statements {
            validate_new(stmt)?;
        }
        let mut rows = self.rows.write().expect("memory store lock poisoned");
        let mut ids = Vec::with_capacity(statements.len());
        for stmt in statements {
            let id = rows.next_id;
            rows.next_id += 1;
            rows.statements.push(stmt.into_statement(id));
            ids.push(id);
        }
        Ok(ids)
    }

    fn filter_statements(&self, criteria: &FilterCriteria) -> Result<Vec<Statement>, StoreError> {
        let rows = self.rows.read().expect("memory store lock poisoned");
        Ok(rows
            .statements
            .iter()
            .filter(|s| criteria.matches(s))
            .cloned()
            .collect())
    }

    fn count_statements(&self) -> Result<u64, StoreError> {
        let rows = self.rows.read().expect("memory store lock poisoned");
        Ok(rows.statements.len() as u64)
    }

    fn distinct_texts(&self) -> Result<BTreeSet<String>, StoreError> {
        let rows = self.rows.read().expect("memory store lock poisoned");
        Ok(rows.statements.iter().map(|s| s.text.clone()).collect())
    }
}
