//! Task prompts and the Question-Schema-Context input serialization.
//!
//! The input layout is `<prompt> ; <question> ; <context> ; <schema>` with
//! context utterances joined oldest-first by ` | ` (empty in the single-turn
//! setting) and the schema rendered as
//! `<db_id> | <table1> : <col1> , <col2> | <table2> : ...`, all lowercased.
//! This exact separator grammar is versioned in docs/format.md.

use crate::data::DatabaseSchema;
use crate::decompose::{Task, SPECIAL_TOKENS};

/// Prompt string of one task: the space-joined special tokens of the clauses
/// it covers. The main task concatenates all five subtask prompts in order.
pub fn task_prompt(task: Task) -> &'static str {
    match task {
        Task::Select => "[SELECT]",
        Task::From => "[FROM]",
        Task::Where => "[WHERE]",
        Task::Ghol => "[GROUP_BY] [HAVING] [ORDER_BY] [LIMIT]",
        Task::Sql => "[SQL]",
        Task::Main => "[SELECT] [FROM] [WHERE] [GROUP_BY] [HAVING] [ORDER_BY] [LIMIT] [SQL]",
    }
}

/// Serialized input with length accessors for model-limit reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedInput {
    pub text: String,
}

impl SerializedInput {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn whitespace_token_len(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Render a schema as `db | table : col , col | table : ...` in file order,
/// names lowercased. The star column belongs to no table and is skipped.
pub fn serialize_schema(schema: &DatabaseSchema) -> String {
    let mut out = schema.db_id.to_lowercase();
    for (t, table) in schema.tables.iter().enumerate() {
        out.push_str(" | ");
        out.push_str(&table.to_lowercase());
        out.push_str(" :");
        let cols: Vec<String> = schema
            .table_columns(t)
            .map(|c| c.name.to_lowercase())
            .collect();
        if !cols.is_empty() {
            out.push(' ');
            out.push_str(&cols.join(" , "));
        }
    }
    out
}

/// Build the full model input. Question and context are lowercased; an empty
/// context renders as an empty field.
pub fn serialize_input(
    prompt: &str,
    question: &str,
    context: &[String],
    schema: &DatabaseSchema,
) -> SerializedInput {
    let context_field = context
        .iter()
        .map(|u| u.to_lowercase())
        .collect::<Vec<_>>()
        .join(" | ");
    let text = format!(
        "{prompt} ; {} ; {context_field} ; {}",
        question.to_lowercase(),
        serialize_schema(schema)
    );
    SerializedInput { text }
}

/// True if any special token of the substitution table occurs in the text.
/// Used to detect collisions between raw data and the token vocabulary.
pub fn contains_special_token(text: &str) -> bool {
    SPECIAL_TOKENS.iter().any(|tok| text.contains(tok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SchemaColumn;

    fn schema(db: &str, tables: &[(&str, &[&str])]) -> DatabaseSchema {
        let mut columns = vec![SchemaColumn {
            table_index: -1,
            name: "*".into(),
            col_type: "text".into(),
        }];
        for (t, (_name, cols)) in tables.iter().enumerate() {
            for col in cols.iter() {
                columns.push(SchemaColumn {
                    table_index: t as i32,
                    name: (*col).into(),
                    col_type: "text".into(),
                });
            }
        }
        DatabaseSchema {
            db_id: db.into(),
            tables: tables.iter().map(|(n, _)| (*n).to_string()).collect(),
            columns,
            primary_keys: vec![],
            foreign_keys: vec![],
        }
    }

    #[test]
    fn ghol_prompt_lists_its_four_clauses() {
        assert_eq!(task_prompt(Task::Ghol), "[GROUP_BY] [HAVING] [ORDER_BY] [LIMIT]");
        assert_eq!(task_prompt(Task::Where), "[WHERE]");
    }

    #[test]
    fn main_prompt_is_the_joined_subtask_prompts() {
        let joined = [Task::Select, Task::From, Task::Where, Task::Ghol, Task::Sql]
            .iter()
            .map(|t| task_prompt(*t))
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(task_prompt(Task::Main), joined);
    }

    #[test]
    fn schema_serialization_format() {
        let s = schema("concert_singer", &[("stadium", &["name", "capacity"])]);
        assert_eq!(
            serialize_schema(&s),
            "concert_singer | stadium : name , capacity"
        );
    }

    #[test]
    fn empty_column_table_keeps_bare_colon() {
        let s = schema("db", &[("t", &[])]);
        assert_eq!(serialize_schema(&s), "db | t :");
    }

    #[test]
    fn two_tables_pipe_separated_in_file_order() {
        let s = schema("db", &[("b_table", &["x"]), ("a_table", &["y", "z"])]);
        assert_eq!(serialize_schema(&s), "db | b_table : x | a_table : y , z");
    }

    #[test]
    fn single_turn_input_has_empty_context_field() {
        let s = schema("doc_templates", &[("templates", &["template_id"])]);
        let input = serialize_input("[SELECT]", "How many templates do we have?", &[], &s);
        assert_eq!(
            input.text,
            "[SELECT] ; how many templates do we have? ;  ; doc_templates | templates : template_id"
        );
    }

    #[test]
    fn context_joins_oldest_first() {
        let s = schema("db", &[("t", &["a"])]);
        let ctx = vec!["First one.".to_string(), "Second one.".to_string()];
        let input = serialize_input("[WHERE]", "And now?", &ctx, &s);
        assert!(input
            .text
            .contains("; and now? ; first one. | second one. ; db"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let s = schema("db", &[("t", &["a", "b"])]);
        let a = serialize_input("[FROM]", "q?", &["c".into()], &s);
        let b = serialize_input("[FROM]", "q?", &["c".into()], &s);
        assert_eq!(a, b);
        assert_eq!(a.whitespace_token_len(), a.text.split(' ').filter(|s| !s.is_empty()).count());
    }

    #[test]
    fn collision_detector_sees_tokens_only_when_present() {
        assert!(!contains_special_token("how many templates do we have?"));
        assert!(contains_special_token("weird question with [SELECT] inside"));
    }
}
