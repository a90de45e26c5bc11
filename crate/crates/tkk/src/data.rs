//! Benchmark file ingestion and pipeline file emission.
//!
//! Inputs follow the benchmark distribution formats: a tables file (JSON
//! array of database objects), single-turn example files, and multi-turn
//! interaction files. Outputs are JSON-lines training files with a
//! provenance header and plain-text or JSON-lines prediction files.
//! docs/format.md specifies every format byte-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{ExampleKind, SubtaskExample, Task};

/// Format version stamped into every emitted file header.
pub const FORMAT_VERSION: &str = "tkk.v1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema file {path}: {detail}")]
    MalformedSchemaFile { path: String, detail: String },
    #[error("duplicate db_id '{0}' in schema file")]
    DuplicateDbId(String),
    #[error("malformed example file {path}: {detail}")]
    MalformedExampleFile { path: String, detail: String },
    #[error("example {index} references unknown db_id '{db_id}'")]
    UnknownDbId { index: usize, db_id: String },
    #[error("interaction {index} has no turns")]
    EmptyInteraction { index: usize },
    #[error("prediction count {actual} does not match gold count {expected}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("prediction references unknown example id '{0}'")]
    UnknownExampleId(String),
    #[error("malformed prediction file {path} at line {line}: {detail}")]
    MalformedPredictionFile {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("malformed training file {path}: {detail}")]
    MalformedTrainingFile { path: String, detail: String },
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

/// One database schema from the tables file. Column 0 is the star column by
/// convention of the file format (table index -1, name `*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<String>,
    pub columns: Vec<SchemaColumn>,
    pub primary_keys: Vec<usize>,
    pub foreign_keys: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaColumn {
    /// Index into `tables`, or -1 for the star column.
    pub table_index: i32,
    pub name: String,
    pub col_type: String,
}

impl DatabaseSchema {
    /// Columns of one table, in file order.
    pub fn table_columns(&self, table_index: usize) -> impl Iterator<Item = &SchemaColumn> {
        self.columns
            .iter()
            .filter(move |c| c.table_index == table_index as i32)
    }
}

/// Loaded schema collection, keyed by db_id.
pub type SchemaSet = BTreeMap<String, DatabaseSchema>;

#[derive(Deserialize)]
struct RawSchemaEntry {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i32, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<usize>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

/// Load the tables file: a JSON array of database objects with fields db_id,
/// table_names_original, column_names_original, column_types, primary_keys,
/// foreign_keys.
pub fn load_tables(path: &Path) -> Result<SchemaSet, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let malformed = |detail: String| DataError::MalformedSchemaFile {
        path: path.display().to_string(),
        detail,
    };
    let entries: Vec<RawSchemaEntry> =
        serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let mut out = SchemaSet::new();
    for entry in entries {
        if entry.column_names_original.len() != entry.column_types.len() {
            return Err(malformed(format!(
                "db '{}': {} column names but {} column types",
                entry.db_id,
                entry.column_names_original.len(),
                entry.column_types.len()
            )));
        }
        let columns: Vec<SchemaColumn> = entry
            .column_names_original
            .iter()
            .zip(&entry.column_types)
            .map(|((table_index, name), col_type)| SchemaColumn {
                table_index: *table_index,
                name: name.clone(),
                col_type: col_type.clone(),
            })
            .collect();
        if columns.is_empty() || columns[0].table_index != -1 || columns[0].name != "*" {
            return Err(malformed(format!(
                "db '{}': column 0 must be the star column",
                entry.db_id
            )));
        }
        let n_tables = entry.table_names_original.len() as i32;
        for (i, col) in columns.iter().enumerate().skip(1) {
            if col.table_index < 0 || col.table_index >= n_tables {
                return Err(malformed(format!(
                    "db '{}': column {} has out-of-range table index {}",
                    entry.db_id, i, col.table_index
                )));
            }
        }
        for &pk in &entry.primary_keys {
            if pk == 0 || pk >= columns.len() {
                return Err(malformed(format!(
                    "db '{}': dangling primary key index {}",
                    entry.db_id, pk
                )));
            }
        }
        for &(a, b) in &entry.foreign_keys {
            if a == 0 || b == 0 || a >= columns.len() || b >= columns.len() {
                return Err(malformed(format!(
                    "db '{}': dangling foreign key ({}, {})",
                    entry.db_id, a, b
                )));
            }
        }
        let schema = DatabaseSchema {
            db_id: entry.db_id.clone(),
            tables: entry.table_names_original,
            columns,
            primary_keys: entry.primary_keys,
            foreign_keys: entry.foreign_keys,
        };
        if out.insert(entry.db_id.clone(), schema).is_some() {
            return Err(DataError::DuplicateDbId(entry.db_id));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Examples
// ---------------------------------------------------------------------------

/// One training or evaluation example, single- or multi-turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExample {
    pub example_id: String,
    pub db_id: String,
    pub question: String,
    pub gold_query: String,
    /// Prior utterances, oldest first. Empty for single-turn data.
    pub context: Vec<String>,
    /// File-order interaction index; None for single-turn data.
    pub interaction_id: Option<usize>,
    /// Turn index within the interaction, contiguous from 0.
    pub turn_index: Option<usize>,
}

#[derive(Deserialize)]
struct RawSpiderEntry {
    db_id: String,
    question: String,
    query: String,
}

/// Load a single-turn example file: JSON array with db_id, question, query.
/// Example ids are the zero-based file positions.
pub fn load_spider_examples(path: &Path, schemas: &SchemaSet) -> Result<Vec<RawExample>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let entries: Vec<RawSpiderEntry> =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedExampleFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    let mut out = Vec::with_capacity(entries.len());
    for (index, entry) in entries.into_iter().enumerate() {
        if !schemas.contains_key(&entry.db_id) {
            return Err(DataError::UnknownDbId {
                index,
                db_id: entry.db_id,
            });
        }
        out.push(RawExample {
            example_id: index.to_string(),
            db_id: entry.db_id,
            question: entry.question,
            gold_query: entry.query,
            context: Vec::new(),
            interaction_id: None,
            turn_index: None,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawInteractionEntry {
    database_id: String,
    interaction: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawTurn {
    utterance: String,
    /// Absent for non-SQL system acts; the utterance still joins the context.
    #[serde(default)]
    query: Option<String>,
}

/// Interactions loaded from a multi-turn file, plus the indices of
/// interactions containing turns without gold SQL (kept as context only).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLoad {
    pub examples: Vec<RawExample>,
    pub flagged_interactions: Vec<usize>,
}

/// Load a multi-turn interaction file: JSON array of interactions, each with
/// database_id and an ordered turn list of (utterance, query). Turn k's
/// context is utterances 0..k-1; ids are `<interaction>-<turn>`.
pub fn load_interaction_examples(
    path: &Path,
    schemas: &SchemaSet,
) -> Result<Vec<RawExample>, DataError> {
    Ok(load_interactions(path, schemas)?.examples)
}

/// As [`load_interaction_examples`], reporting interactions that contain
/// turns without gold SQL instead of dropping them silently.
pub fn load_interactions(path: &Path, schemas: &SchemaSet) -> Result<InteractionLoad, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let entries: Vec<RawInteractionEntry> =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedExampleFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    let mut out = Vec::new();
    let mut flagged = Vec::new();
    for (interaction_id, entry) in entries.into_iter().enumerate() {
        if entry.interaction.is_empty() {
            return Err(DataError::EmptyInteraction {
                index: interaction_id,
            });
        }
        if !schemas.contains_key(&entry.database_id) {
            return Err(DataError::UnknownDbId {
                index: interaction_id,
                db_id: entry.database_id,
            });
        }
        let mut context: Vec<String> = Vec::new();
        for (turn_index, turn) in entry.interaction.into_iter().enumerate() {
            match turn.query {
                Some(query) => out.push(RawExample {
                    example_id: format!("{interaction_id}-{turn_index}"),
                    db_id: entry.database_id.clone(),
                    question: turn.utterance.clone(),
                    gold_query: query,
                    context: context.clone(),
                    interaction_id: Some(interaction_id),
                    turn_index: Some(turn_index),
                }),
                None => {
                    if flagged.last() != Some(&interaction_id) {
                        flagged.push(interaction_id);
                    }
                }
            }
            context.push(turn.utterance);
        }
    }
    Ok(InteractionLoad {
        examples: out,
        flagged_interactions: flagged,
    })
}

/// True when the file uses the interaction layout (first entry carries an
/// `interaction` field).
pub fn is_interaction_file(path: &Path) -> Result<bool, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedExampleFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    Ok(probe
        .as_array()
        .and_then(|arr| arr.first())
        .map(|entry| entry.get("interaction").is_some())
        .unwrap_or(false))
}

/// Autodetect single-turn vs interaction layout from the first array entry.
pub fn load_examples_auto(path: &Path, schemas: &SchemaSet) -> Result<Vec<RawExample>, DataError> {
    if is_interaction_file(path)? {
        load_interaction_examples(path, schemas)
    } else {
        load_spider_examples(path, schemas)
    }
}

// ---------------------------------------------------------------------------
// Training files
// ---------------------------------------------------------------------------

/// Provenance header written as the first line of every emitted file.
/// Field order is the byte layout; optional fields are omitted, not null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHeader {
    pub format_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tables: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_empty_markers: Option<bool>,
}

impl FileHeader {
    pub fn new(command: &str) -> FileHeader {
        FileHeader {
            format_version: FORMAT_VERSION.to_string(),
            command: command.to_string(),
            tables: None,
            data: None,
            ratio: None,
            seed: None,
            include_empty_markers: None,
        }
    }
}

/// Record layout of one training line. Key order is fixed by field order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainingRecord {
    id: String,
    task: Task,
    kind: ExampleKind,
    prompt: String,
    input: String,
    target: String,
}

/// Write records as JSON lines under a provenance header. Re-running with
/// identical inputs produces byte-identical files.
pub fn write_training_file(
    records: &[SubtaskExample],
    header: &FileHeader,
    path: &Path,
) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let header_line = serde_json::to_string(header).expect("header serializes");
    writeln!(w, "{header_line}").map_err(|e| io_err(path, e))?;
    for rec in records {
        let line = TrainingRecord {
            id: rec.example_id.clone(),
            task: rec.task,
            kind: rec.kind,
            prompt: rec.prompt.clone(),
            input: rec.input.clone(),
            target: rec.target.clone(),
        };
        let line = serde_json::to_string(&line).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read a training file back: header plus records, field-for-field.
pub fn read_training_file(path: &Path) -> Result<(FileHeader, Vec<SubtaskExample>), DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let malformed = |detail: String| DataError::MalformedTrainingFile {
        path: path.display().to_string(),
        detail,
    };
    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| malformed("empty file".into()))?;
    let header: FileHeader =
        serde_json::from_str(header_line).map_err(|e| malformed(format!("bad header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrainingRecord = serde_json::from_str(line)
            .map_err(|e| malformed(format!("bad record at line {}: {e}", i + 2)))?;
        records.push(SubtaskExample {
            example_id: rec.id,
            task: rec.task,
            prompt: rec.prompt,
            input: rec.input,
            target: rec.target,
            kind: rec.kind,
        });
    }
    Ok((header, records))
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// One model prediction joined against a gold example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    /// Raw model target string (special-token sequence or plain SQL).
    pub raw_target: String,
    /// SQL candidate recovered from the target; filled by the decomposer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recomposed_sql: Option<String>,
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    target: String,
}

/// Load predictions: either plain text (one target per line, aligned with the
/// gold order) or JSON lines with id + target (re-aligned by id). Count and
/// id alignment are validated against the gold examples.
pub fn load_predictions(path: &Path, golds: &[RawExample]) -> Result<Vec<Prediction>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    let is_jsonl = lines
        .iter()
        .find(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str::<PredictionLine>(l).is_ok()
        })
        .unwrap_or(false);
    if is_jsonl {
        let mut by_id: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: PredictionLine =
                serde_json::from_str(line).map_err(|e| DataError::MalformedPredictionFile {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: e.to_string(),
                })?;
            if by_id.insert(parsed.id.clone(), parsed.target).is_some() {
                return Err(DataError::MalformedPredictionFile {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: format!("duplicate prediction id '{}'", parsed.id),
                });
            }
        }
        for id in by_id.keys() {
            if !golds.iter().any(|g| &g.example_id == id) {
                return Err(DataError::UnknownExampleId(id.clone()));
            }
        }
        if by_id.len() != golds.len() {
            return Err(DataError::CountMismatch {
                expected: golds.len(),
                actual: by_id.len(),
            });
        }
        Ok(golds
            .iter()
            .map(|g| Prediction {
                example_id: g.example_id.clone(),
                raw_target: by_id[&g.example_id].clone(),
                recomposed_sql: None,
            })
            .collect())
    } else {
        if lines.len() != golds.len() {
            return Err(DataError::CountMismatch {
                expected: golds.len(),
                actual: lines.len(),
            });
        }
        Ok(golds
            .iter()
            .zip(lines)
            .map(|(g, line)| Prediction {
                example_id: g.example_id.clone(),
                raw_target: line.to_string(),
                recomposed_sql: None,
            })
            .collect())
    }
}
