//! Clause-level task decomposition and its inverse.
//!
//! One gold query yields five subtask targets (select, from, where, ghol,
//! sql) whose clause keywords are replaced by special tokens. The ghol target
//! always carries its four markers in order with possibly empty bodies; a
//! set-operator tail becomes the body of the sql target, tokenized
//! recursively. The main-task target is the five subtask targets joined in
//! order, and `recompose` inverts any target sequence back to an SQL
//! candidate string.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DatabaseSchema, RawExample};
use crate::prompt::{serialize_input, task_prompt};
use crate::sql::{
    self, print_from_body, print_group_by_body, print_having_body, print_limit_body,
    print_order_by_body, print_select_body, print_set_tail, print_where_body, SqlError, SqlQuery,
};

/// Keyword/special-token substitution pairs. The two-word keywords are single
/// entries; substitution operates on whole words outside string literals.
pub const KEYWORD_TOKEN_PAIRS: [(&str, &str); 10] = [
    ("select", "[SELECT]"),
    ("from", "[FROM]"),
    ("where", "[WHERE]"),
    ("group by", "[GROUP_BY]"),
    ("having", "[HAVING]"),
    ("order by", "[ORDER_BY]"),
    ("limit", "[LIMIT]"),
    ("intersect", "[INTERSECT]"),
    ("union", "[UNION]"),
    ("except", "[EXCEPT]"),
];

/// Marker of the set-operator subtask; erases to the empty string.
pub const SQL_MARKER: &str = "[SQL]";

/// All eleven special tokens.
pub const SPECIAL_TOKENS: [&str; 11] = [
    "[SELECT]",
    "[FROM]",
    "[WHERE]",
    "[GROUP_BY]",
    "[HAVING]",
    "[ORDER_BY]",
    "[LIMIT]",
    "[INTERSECT]",
    "[UNION]",
    "[EXCEPT]",
    SQL_MARKER,
];

/// Clause-marker tokens that may stand alone for an empty clause. Set-operator
/// tokens are connectives, never empty markers.
const EMPTY_CAPABLE_MARKERS: [&str; 8] = [
    "[SELECT]",
    "[FROM]",
    "[WHERE]",
    "[GROUP_BY]",
    "[HAVING]",
    "[ORDER_BY]",
    "[LIMIT]",
    SQL_MARKER,
];

pub fn token_for_keyword(keyword: &str) -> Option<&'static str> {
    KEYWORD_TOKEN_PAIRS
        .iter()
        .find(|(kw, _)| *kw == keyword)
        .map(|(_, tok)| *tok)
}

pub fn keyword_for_token(token: &str) -> Option<&'static str> {
    if token == SQL_MARKER {
        return Some("");
    }
    KEYWORD_TOKEN_PAIRS
        .iter()
        .find(|(_, tok)| *tok == token)
        .map(|(kw, _)| *kw)
}

fn is_special_token(word: &str) -> bool {
    SPECIAL_TOKENS.contains(&word)
}

// ---------------------------------------------------------------------------
// Tasks and examples
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Select,
    From,
    Where,
    Ghol,
    Sql,
    Main,
}

/// The five subtasks in canonical order (main excluded).
pub const SUBTASKS: [Task; 5] = [Task::Select, Task::From, Task::Where, Task::Ghol, Task::Sql];

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Select => "select",
            Task::From => "from",
            Task::Where => "where",
            Task::Ghol => "ghol",
            Task::Sql => "sql",
            Task::Main => "main",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown task '{0}'")]
pub struct UnknownTask(pub String);

impl std::str::FromStr for Task {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Task, UnknownTask> {
        Ok(match s {
            "select" => Task::Select,
            "from" => Task::From,
            "where" => Task::Where,
            "ghol" => Task::Ghol,
            "sql" => Task::Sql,
            "main" => Task::Main,
            other => return Err(UnknownTask(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleKind {
    Parsing,
    Classification,
}

/// One training record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtaskExample {
    pub example_id: String,
    pub task: Task,
    pub prompt: String,
    pub input: String,
    pub target: String,
    pub kind: ExampleKind,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("example {example_id}: gold query does not parse: {source}")]
    Parse {
        example_id: String,
        #[source]
        source: SqlError,
    },
}

// ---------------------------------------------------------------------------
// Word scanner
// ---------------------------------------------------------------------------

/// Whitespace-separated pieces of a target or canonical SQL string. Quoted
/// literals are single segments so substitution never touches their content;
/// an unterminated quote swallows the rest of the text (total, for arbitrary
/// model output).
#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Word(String),
    Quoted(String),
}

impl Segment {
    fn text(&self) -> &str {
        match self {
            Segment::Word(s) | Segment::Quoted(s) => s,
        }
    }
}

fn scan_segments(text: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut chars = text.chars().peekable();
    let mut word = String::new();
    while let Some(c) = chars.next() {
        if c.is_whitespace() {
            if !word.is_empty() {
                segments.push(Segment::Word(std::mem::take(&mut word)));
            }
        } else if c == '\'' || c == '"' {
            if !word.is_empty() {
                segments.push(Segment::Word(std::mem::take(&mut word)));
            }
            let mut quoted = String::new();
            quoted.push(c);
            for q in chars.by_ref() {
                quoted.push(q);
                if q == c {
                    break;
                }
            }
            segments.push(Segment::Quoted(quoted));
        } else {
            word.push(c);
        }
    }
    if !word.is_empty() {
        segments.push(Segment::Word(word));
    }
    segments
}

fn join_segments(segments: &[Segment]) -> String {
    segments
        .iter()
        .map(Segment::text)
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// Replace the ten clause keywords with their special tokens; everything else
/// including string literal content is unchanged. Expects canonical text.
pub fn keywords_to_tokens(text: &str) -> String {
    let segments = scan_segments(text);
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    let mut i = 0;
    while i < segments.len() {
        match &segments[i] {
            Segment::Word(w) => {
                // two-word keywords first
                if (w == "group" || w == "order") && i + 1 < segments.len() {
                    if let Segment::Word(next) = &segments[i + 1] {
                        if next == "by" {
                            let phrase = format!("{w} by");
                            out.push(Segment::Word(
                                token_for_keyword(&phrase).expect("phrase in table").to_string(),
                            ));
                            i += 2;
                            continue;
                        }
                    }
                }
                match token_for_keyword(w) {
                    Some(tok) => out.push(Segment::Word(tok.to_string())),
                    None => out.push(segments[i].clone()),
                }
                i += 1;
            }
            quoted => {
                out.push(quoted.clone());
                i += 1;
            }
        }
    }
    join_segments(&out)
}

/// Inverse substitution: special tokens back to keywords, the `[SQL]` marker
/// erased. Unknown bracketed words are kept verbatim and reported in the
/// warning list. Total over arbitrary model output.
pub fn tokens_to_keywords(text: &str) -> (String, Vec<String>) {
    let mut warnings = Vec::new();
    let segments = scan_segments(text);
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in &segments {
        match seg {
            Segment::Word(w) => {
                if w == SQL_MARKER {
                    continue;
                }
                match keyword_for_token(w) {
                    Some(kw) => out.push(Segment::Word(kw.to_string())),
                    None => {
                        if w.starts_with('[') && w.ends_with(']') {
                            warnings.push(format!("unknown special token {w}"));
                        }
                        out.push(seg.clone());
                    }
                }
            }
            quoted => out.push(quoted.clone()),
        }
    }
    (join_segments(&out), warnings)
}

/// Drop clause markers that carry no body: a marker token directly followed
/// by another special token or by the end of the sequence.
pub fn strip_empty_markers(text: &str) -> String {
    let segments = scan_segments(text);
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        if let Segment::Word(w) = seg {
            if EMPTY_CAPABLE_MARKERS.contains(&w.as_str()) {
                let empty = match segments.get(i + 1) {
                    None => true,
                    Some(Segment::Word(next)) => is_special_token(next),
                    Some(Segment::Quoted(_)) => false,
                };
                if empty {
                    continue;
                }
            }
        }
        out.push(seg.clone());
    }
    join_segments(&out)
}

/// Classification targets contain nothing but special tokens and whitespace.
pub fn classify_kind(target: &str) -> ExampleKind {
    let has_content = scan_segments(target).iter().any(|seg| match seg {
        Segment::Word(w) => !is_special_token(w),
        Segment::Quoted(_) => true,
    });
    if has_content {
        ExampleKind::Parsing
    } else {
        ExampleKind::Classification
    }
}

// ---------------------------------------------------------------------------
// Clause extraction
// ---------------------------------------------------------------------------

/// The five token-substituted clause strings of one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseSet {
    pub select_text: String,
    pub from_text: String,
    pub where_text: String,
    pub ghol_text: String,
    pub sql_text: String,
    pub select_empty: bool,
    pub from_empty: bool,
    pub where_empty: bool,
    pub ghol_empty: bool,
    pub sql_empty: bool,
}

impl ClauseSet {
    /// Targets in subtask order.
    pub fn target(&self, task: Task) -> &str {
        match task {
            Task::Select => &self.select_text,
            Task::From => &self.from_text,
            Task::Where => &self.where_text,
            Task::Ghol => &self.ghol_text,
            Task::Sql => &self.sql_text,
            Task::Main => unreachable!("main has no single clause"),
        }
    }

    /// The main-task target with empty markers retained: the five subtask
    /// targets joined by single spaces in fixed order.
    pub fn main_target(&self) -> String {
        SUBTASKS
            .iter()
            .map(|t| self.target(*t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Extract the five clause groups from a parsed query. Clause bodies are
/// canonical-form substrings with keywords tokenized recursively into nested
/// subqueries; the set-operator tail renders into the sql target.
pub fn extract_clauses(q: &SqlQuery) -> ClauseSet {
    let select_body = keywords_to_tokens(&print_select_body(q));
    let from_body = keywords_to_tokens(&print_from_body(q));

    let where_text = match print_where_body(q) {
        Some(body) => format!("[WHERE] {}", keywords_to_tokens(&body)),
        None => "[WHERE]".to_string(),
    };

    let mut ghol = String::new();
    let ghol_parts: [(&str, Option<String>); 4] = [
        ("[GROUP_BY]", print_group_by_body(q)),
        ("[HAVING]", print_having_body(q)),
        ("[ORDER_BY]", print_order_by_body(q)),
        ("[LIMIT]", print_limit_body(q)),
    ];
    let ghol_empty = ghol_parts.iter().all(|(_, body)| body.is_none());
    for (marker, body) in &ghol_parts {
        if !ghol.is_empty() {
            ghol.push(' ');
        }
        ghol.push_str(marker);
        if let Some(body) = body {
            ghol.push(' ');
            ghol.push_str(&keywords_to_tokens(body));
        }
    }

    let (sql_text, sql_empty) = match print_set_tail(q) {
        Some((op, tail)) => {
            let op_token = token_for_keyword(op.as_str()).expect("set operator in table");
            (
                format!("{SQL_MARKER} {op_token} {}", keywords_to_tokens(&tail)),
                false,
            )
        }
        None => (SQL_MARKER.to_string(), true),
    };

    ClauseSet {
        select_text: format!("[SELECT] {select_body}"),
        from_text: format!("[FROM] {from_body}"),
        where_empty: q.where_clause.is_none(),
        where_text,
        ghol_text: ghol,
        ghol_empty,
        sql_text,
        sql_empty,
        select_empty: false,
        from_empty: false,
    }
}

// ---------------------------------------------------------------------------
// Example construction
// ---------------------------------------------------------------------------

/// Build the five subtask records for one example, in subtask order.
pub fn build_subtask_examples(
    ex: &RawExample,
    schema: &DatabaseSchema,
) -> Result<Vec<SubtaskExample>, BuildError> {
    let query = parse_gold(ex)?;
    let clauses = extract_clauses(&query);
    Ok(SUBTASKS
        .iter()
        .map(|task| {
            let prompt = task_prompt(*task);
            let target = clauses.target(*task).to_string();
            SubtaskExample {
                example_id: ex.example_id.clone(),
                task: *task,
                prompt: prompt.to_string(),
                input: serialize_input(prompt, &ex.question, &ex.context, schema).text,
                kind: classify_kind(&target),
                target,
            }
        })
        .collect())
}

/// Build the main-task record: subtask prompts concatenated, subtask targets
/// concatenated. With `include_empty_markers` off, bare markers are dropped
/// from the target.
pub fn build_main_example(
    ex: &RawExample,
    schema: &DatabaseSchema,
    include_empty_markers: bool,
) -> Result<SubtaskExample, BuildError> {
    let query = parse_gold(ex)?;
    let clauses = extract_clauses(&query);
    let mut target = clauses.main_target();
    if !include_empty_markers {
        target = strip_empty_markers(&target);
    }
    let prompt = task_prompt(Task::Main);
    Ok(SubtaskExample {
        example_id: ex.example_id.clone(),
        task: Task::Main,
        prompt: prompt.to_string(),
        input: serialize_input(prompt, &ex.question, &ex.context, schema).text,
        kind: classify_kind(&target),
        target,
    })
}

fn parse_gold(ex: &RawExample) -> Result<SqlQuery, BuildError> {
    sql::parse_query(&ex.gold_query).map_err(|source| BuildError::Parse {
        example_id: ex.example_id.clone(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Recomposition
// ---------------------------------------------------------------------------

/// Result of inverting a target sequence. The candidate is not guaranteed to
/// parse; the evaluator decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recomposed {
    pub sql: String,
    pub warnings: Vec<String>,
}

/// Invert a model target sequence: strip empty-clause markers, replace the
/// remaining special tokens with their keywords, normalize whitespace.
pub fn recompose(target: &str) -> Recomposed {
    let stripped = strip_empty_markers(target);
    let (sql, warnings) = tokens_to_keywords(&stripped);
    Recomposed { sql, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parse_query;

    #[test]
    fn token_table_is_a_bijection() {
        for (kw, tok) in KEYWORD_TOKEN_PAIRS {
            assert_eq!(keyword_for_token(tok), Some(kw));
            assert_eq!(token_for_keyword(kw), Some(tok));
        }
        let mut tokens: Vec<&str> = KEYWORD_TOKEN_PAIRS.iter().map(|(_, t)| *t).collect();
        tokens.sort_unstable();
        tokens.dedup();
        assert_eq!(tokens.len(), KEYWORD_TOKEN_PAIRS.len());
        assert_eq!(keyword_for_token(SQL_MARKER), Some(""));
    }

    #[test]
    fn substitution_examples() {
        assert_eq!(
            keywords_to_tokens("select count ( * ) from templates"),
            "[SELECT] count ( * ) [FROM] templates"
        );
        assert_eq!(keywords_to_tokens(""), "");
        assert_eq!(
            keywords_to_tokens("where id in ( select id from t )"),
            "[WHERE] id in ( [SELECT] id [FROM] t )"
        );
    }

    #[test]
    fn substitution_skips_string_literals() {
        assert_eq!(
            keywords_to_tokens("where name = 'select from order by'"),
            "[WHERE] name = 'select from order by'"
        );
    }

    #[test]
    fn inverse_substitution() {
        let (sql, warnings) = tokens_to_keywords("[SELECT] count ( * ) [FROM] templates");
        assert_eq!(sql, "select count ( * ) from templates");
        assert!(warnings.is_empty());

        let (sql, _) = tokens_to_keywords("[SQL]");
        assert_eq!(sql, "");

        let (sql, warnings) = tokens_to_keywords("[FOO] x");
        assert_eq!(sql, "[FOO] x");
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn substitution_roundtrips_on_canonical_text() {
        let samples = [
            "select count ( * ) from templates",
            "select a from t where b in ( select b from u ) group by a having count ( * ) > 2 order by a desc limit 3",
            "select name from a union select name from b intersect select name from c",
            "select a from t where s = 'group by order by'",
        ];
        for text in samples {
            let (back, warnings) = tokens_to_keywords(&keywords_to_tokens(text));
            assert_eq!(back, text);
            assert!(warnings.is_empty());
        }
    }

    #[test]
    fn extract_ghol_with_order_and_limit() {
        let q = parse_query("SELECT model FROM cars_data ORDER BY horsepower LIMIT 1").unwrap();
        let clauses = extract_clauses(&q);
        assert_eq!(clauses.where_text, "[WHERE]");
        assert!(clauses.where_empty);
        assert_eq!(
            clauses.ghol_text,
            "[GROUP_BY] [HAVING] [ORDER_BY] horsepower [LIMIT] 1"
        );
        assert!(!clauses.ghol_empty);
        assert_eq!(clauses.sql_text, "[SQL]");
    }

    #[test]
    fn extract_set_tail_into_sql_clause() {
        let q = parse_query("select name from a union select name from b").unwrap();
        let clauses = extract_clauses(&q);
        assert_eq!(clauses.sql_text, "[SQL] [UNION] [SELECT] name [FROM] b");
        assert!(!clauses.sql_empty);
    }

    #[test]
    fn extraction_tokenizes_nested_subqueries() {
        let q = parse_query("select a from t where id in (select id from u where x = 1)").unwrap();
        let clauses = extract_clauses(&q);
        assert_eq!(
            clauses.where_text,
            "[WHERE] id in ( [SELECT] id [FROM] u [WHERE] x = 1 )"
        );
    }

    #[test]
    fn classify_kind_rules() {
        assert_eq!(classify_kind("[WHERE]"), ExampleKind::Classification);
        assert_eq!(
            classify_kind("[GROUP_BY] [HAVING] [ORDER_BY] horsepower [LIMIT] 1"),
            ExampleKind::Parsing
        );
        assert_eq!(classify_kind(""), ExampleKind::Classification);
        assert_eq!(
            classify_kind("[GROUP_BY]   [HAVING] \t [ORDER_BY] [LIMIT]"),
            ExampleKind::Classification
        );
        assert_eq!(
            classify_kind("[SQL] [UNION] [SELECT] name [FROM] b"),
            ExampleKind::Parsing
        );
    }

    fn example(gold: &str) -> RawExample {
        RawExample {
            example_id: "0".into(),
            db_id: "db".into(),
            question: "How many templates do we have?".into(),
            gold_query: gold.into(),
            context: vec![],
            interaction_id: None,
            turn_index: None,
        }
    }

    fn mini_schema() -> DatabaseSchema {
        DatabaseSchema {
            db_id: "db".into(),
            tables: vec!["templates".into()],
            columns: vec![
                crate::data::SchemaColumn {
                    table_index: -1,
                    name: "*".into(),
                    col_type: "text".into(),
                },
                crate::data::SchemaColumn {
                    table_index: 0,
                    name: "template_id".into(),
                    col_type: "number".into(),
                },
            ],
            primary_keys: vec![],
            foreign_keys: vec![],
        }
    }

    #[test]
    fn five_subtask_records_with_expected_kinds() {
        let records =
            build_subtask_examples(&example("SELECT count(*) FROM templates"), &mini_schema())
                .unwrap();
        assert_eq!(records.len(), 5);
        let by_task: Vec<(Task, ExampleKind)> =
            records.iter().map(|r| (r.task, r.kind)).collect();
        assert_eq!(
            by_task,
            vec![
                (Task::Select, ExampleKind::Parsing),
                (Task::From, ExampleKind::Parsing),
                (Task::Where, ExampleKind::Classification),
                (Task::Ghol, ExampleKind::Classification),
                (Task::Sql, ExampleKind::Classification),
            ]
        );
        let where_rec = &records[2];
        assert_eq!(where_rec.target, "[WHERE]");
        assert_eq!(where_rec.prompt, "[WHERE]");
        assert!(where_rec.input.starts_with("[WHERE] ; how many templates do we have? ;  ; db |"));
    }

    #[test]
    fn main_example_concatenates_subtask_targets() {
        let ex = example("SELECT count(*) FROM templates");
        let schema = mini_schema();
        let main = build_main_example(&ex, &schema, true).unwrap();
        assert_eq!(
            main.target,
            "[SELECT] count ( * ) [FROM] templates [WHERE] [GROUP_BY] [HAVING] [ORDER_BY] [LIMIT] [SQL]"
        );
        assert_eq!(main.kind, ExampleKind::Parsing);
        assert_eq!(
            main.prompt,
            "[SELECT] [FROM] [WHERE] [GROUP_BY] [HAVING] [ORDER_BY] [LIMIT] [SQL]"
        );

        let stripped = build_main_example(&ex, &schema, false).unwrap();
        assert_eq!(stripped.target, "[SELECT] count ( * ) [FROM] templates");
    }

    #[test]
    fn recompose_examples() {
        let r = recompose(
            "[SELECT] count ( * ) [FROM] templates [WHERE] [GROUP_BY] [HAVING] [ORDER_BY] [LIMIT] [SQL]",
        );
        assert_eq!(r.sql, "select count ( * ) from templates");
        assert!(r.warnings.is_empty());

        assert_eq!(recompose("[WHERE]").sql, "");

        let r = recompose("[FOO] x");
        assert_eq!(r.sql, "[FOO] x");
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn recompose_keeps_set_operator_tail() {
        let q = parse_query("select name from a union select name from b").unwrap();
        let clauses = extract_clauses(&q);
        let r = recompose(&clauses.main_target());
        assert_eq!(r.sql, "select name from a union select name from b");
    }

    #[test]
    fn recompose_handles_ghol_with_body() {
        let r = recompose("[GROUP_BY] [HAVING] [ORDER_BY] horsepower [LIMIT] 1");
        assert_eq!(r.sql, "order by horsepower limit 1");
    }
}
