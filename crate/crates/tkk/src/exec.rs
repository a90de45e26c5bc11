//! Execution backend contract and the SQLite implementation behind
//! execution accuracy.

use std::cmp::Ordering;
use std::path::Path;

use thiserror::Error;

/// One cell of a result row.
#[derive(Debug, Clone)]
pub enum SqlValue {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl PartialEq for SqlValue {
    fn eq(&self, other: &SqlValue) -> bool {
        match (self, other) {
            (SqlValue::Null, SqlValue::Null) => true,
            (SqlValue::Text(a), SqlValue::Text(b)) => a == b,
            (SqlValue::Blob(a), SqlValue::Blob(b)) => a == b,
            // integers and reals compare numerically
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
        }
    }
}

impl SqlValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            SqlValue::Int(i) => Some(*i as f64),
            SqlValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            SqlValue::Null => 0,
            SqlValue::Int(_) | SqlValue::Real(_) => 1,
            SqlValue::Text(_) => 2,
            SqlValue::Blob(_) => 3,
        }
    }
}

/// Canonical value ordering used to sort result rows before comparison:
/// null < numbers < text < blob, numbers by value, text and blob bytewise.
pub fn compare_values(a: &SqlValue, b: &SqlValue) -> Ordering {
    match a.type_rank().cmp(&b.type_rank()) {
        Ordering::Equal => match (a, b) {
            (SqlValue::Null, SqlValue::Null) => Ordering::Equal,
            (SqlValue::Text(x), SqlValue::Text(y)) => x.cmp(y),
            (SqlValue::Blob(x), SqlValue::Blob(y)) => x.cmp(y),
            (x, y) => x
                .as_f64()
                .unwrap_or(f64::NAN)
                .partial_cmp(&y.as_f64().unwrap_or(f64::NAN))
                .unwrap_or(Ordering::Equal),
        },
        other => other,
    }
}

pub fn compare_rows(a: &[SqlValue], b: &[SqlValue]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = compare_values(x, y);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("execution failed: {0}")]
pub struct ExecError(pub String);

/// Read-only query execution against a database file. Implementations must
/// be deterministic for deterministic queries and must not allow one
/// example's execution to interfere with another's.
pub trait ExecutionBackend {
    fn execute(&self, db: &Path, sql: &str) -> Result<Vec<Vec<SqlValue>>, ExecError>;
}

/// Outcome of comparing one prediction's results against gold's.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecVerdict {
    Match,
    /// Not equal, or the prediction failed to execute (reason attached).
    Mismatch(Option<String>),
    /// The gold query itself failed: a corpus defect, excluded from rates.
    GoldError(String),
}

/// Execution accuracy for one pair: both run, and the result multisets are
/// equal after row sorting under the canonical value ordering. Column order
/// is significant; no column permutation is forgiven.
pub fn execution_match(
    pred: &str,
    gold: &str,
    db: &Path,
    backend: &dyn ExecutionBackend,
) -> ExecVerdict {
    let gold_rows = match backend.execute(db, gold) {
        Ok(rows) => rows,
        Err(e) => return ExecVerdict::GoldError(e.to_string()),
    };
    let pred_rows = match backend.execute(db, pred) {
        Ok(rows) => rows,
        Err(e) => return ExecVerdict::Mismatch(Some(format!("prediction failed: {e}"))),
    };
    let mut gold_sorted = gold_rows;
    let mut pred_sorted = pred_rows;
    gold_sorted.sort_by(|a, b| compare_rows(a, b));
    pred_sorted.sort_by(|a, b| compare_rows(a, b));
    if gold_sorted == pred_sorted {
        ExecVerdict::Match
    } else {
        ExecVerdict::Mismatch(None)
    }
}

/// SQLite-backed execution. Opens read-only per call, so concurrent reads of
/// one database file cannot interfere.
pub struct SqliteBackend;

impl ExecutionBackend for SqliteBackend {
    fn execute(&self, db: &Path, sql: &str) -> Result<Vec<Vec<SqlValue>>, ExecError> {
        let conn = rusqlite::Connection::open_with_flags(
            db,
            rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY,
        )
        .map_err(|e| ExecError(e.to_string()))?;
        let mut stmt = conn.prepare(sql).map_err(|e| ExecError(e.to_string()))?;
        let ncols = stmt.column_count();
        let rows = stmt
            .query_map([], |row| {
                let mut out = Vec::with_capacity(ncols);
                for i in 0..ncols {
                    let v = match row.get_ref(i)? {
                        rusqlite::types::ValueRef::Null => SqlValue::Null,
                        rusqlite::types::ValueRef::Integer(x) => SqlValue::Int(x),
                        rusqlite::types::ValueRef::Real(x) => SqlValue::Real(x),
                        rusqlite::types::ValueRef::Text(x) => {
                            SqlValue::Text(String::from_utf8_lossy(x).into_owned())
                        }
                        rusqlite::types::ValueRef::Blob(x) => SqlValue::Blob(x.to_vec()),
                    };
                    out.push(v);
                }
                Ok(out)
            })
            .map_err(|e| ExecError(e.to_string()))?
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExecError(e.to_string()))?;
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_db() -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        let conn = rusqlite::Connection::open(file.path()).unwrap();
        conn.execute_batch(
            "create table dogs (name text, age integer, weight real);
             insert into dogs values ('rex', 3, 12.5), ('fido', 5, 7.0), ('ace', 3, 30.0);",
        )
        .unwrap();
        file
    }

    #[test]
    fn identical_queries_match() {
        let db = fixture_db();
        let v = execution_match(
            "select name from dogs where age = 3",
            "select name from dogs where age = 3",
            db.path(),
            &SqliteBackend,
        );
        assert_eq!(v, ExecVerdict::Match);
    }

    #[test]
    fn row_order_is_forgiven_column_order_is_not() {
        let db = fixture_db();
        let v = execution_match(
            "select name from dogs order by age",
            "select name from dogs order by name",
            db.path(),
            &SqliteBackend,
        );
        assert_eq!(v, ExecVerdict::Match);

        let v = execution_match(
            "select age, name from dogs",
            "select name, age from dogs",
            db.path(),
            &SqliteBackend,
        );
        assert!(matches!(v, ExecVerdict::Mismatch(_)));
    }

    #[test]
    fn unknown_table_in_prediction_is_mismatch() {
        let db = fixture_db();
        let v = execution_match(
            "select name from cats",
            "select name from dogs",
            db.path(),
            &SqliteBackend,
        );
        assert!(matches!(v, ExecVerdict::Mismatch(Some(_))));
    }

    #[test]
    fn failing_gold_is_reported_as_defect() {
        let db = fixture_db();
        let v = execution_match(
            "select name from dogs",
            "select name from cats",
            db.path(),
            &SqliteBackend,
        );
        assert!(matches!(v, ExecVerdict::GoldError(_)));
    }

    #[test]
    fn value_comparison_is_numeric_across_int_and_real() {
        assert_eq!(SqlValue::Int(3), SqlValue::Real(3.0));
        assert_eq!(
            compare_values(&SqlValue::Int(2), &SqlValue::Real(2.5)),
            Ordering::Less
        );
        assert_eq!(
            compare_values(&SqlValue::Null, &SqlValue::Int(0)),
            Ordering::Less
        );
    }
}
