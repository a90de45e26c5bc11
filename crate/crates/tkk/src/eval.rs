//! Prediction scoring: exact match in strict and set-match modes, execution
//! accuracy, question/interaction match, and hardness classification.
//!
//! Set match compares clause components as unordered multisets on a
//! normalized AST: aliases are resolved to the table names they bind,
//! literal values (and the limit count) are placeholdered, and nested
//! queries normalize recursively. Strict mode compares canonical strings,
//! so a strict match is always a set match.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Prediction, RawExample};
use crate::exec::ExecutionBackend;
use crate::sql::{
    self, print_value_expr, ColumnRef, Comparison, ConditionTree, Operand, RightOperand, SqlQuery,
    TableSource, ValueExpr,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold query for example {example_id} does not parse: {detail}")]
    GoldUnparseable { example_id: String, detail: String },
    #[error("predictions misaligned with gold examples: {0}")]
    Misaligned(String),
    #[error("execution backend unavailable: {0}")]
    BackendUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmMode {
    Strict,
    SetMatch,
}

impl std::str::FromStr for EmMode {
    type Err = String;

    fn from_str(s: &str) -> Result<EmMode, String> {
        match s {
            "strict" => Ok(EmMode::Strict),
            "set_match" => Ok(EmMode::SetMatch),
            other => Err(format!("unknown em mode '{other}' (strict | set_match)")),
        }
    }
}

/// Exact match of a prediction against a gold query. The gold must parse;
/// an unparseable prediction is simply false.
pub fn exact_match(pred: &str, gold: &str, mode: EmMode) -> Result<bool, EvalError> {
    let gold_query = sql::parse_query(gold).map_err(|e| EvalError::GoldUnparseable {
        example_id: String::new(),
        detail: e.to_string(),
    })?;
    let pred_query = match sql::parse_query(pred) {
        Ok(q) => q,
        Err(_) => return Ok(false),
    };
    Ok(match mode {
        EmMode::Strict => {
            sql::print_canonical(&pred_query) == sql::print_canonical(&gold_query)
        }
        EmMode::SetMatch => set_match_form(&pred_query) == set_match_form(&gold_query),
    })
}

// ---------------------------------------------------------------------------
// Set-match normal form
// ---------------------------------------------------------------------------

/// Deterministic normal form whose string equality defines set match.
pub fn set_match_form(q: &SqlQuery) -> String {
    let resolved = resolve_aliases(q, &[]);
    render_form(&resolved)
}

/// Replace alias qualifiers by the table name (or `sub` for derived tables)
/// their source binds, recursively. Scopes nest lexically; set-operator tails
/// open fresh scopes.
fn resolve_aliases(q: &SqlQuery, outer: &[(String, String)]) -> SqlQuery {
    let mut scope: Vec<(String, String)> = outer.to_vec();
    for source in q.from.sources() {
        if let Some(alias) = source.alias() {
            let resolved = match source {
                TableSource::Table { name, .. } => name.clone(),
                TableSource::Subquery { .. } => "sub".to_string(),
            };
            scope.push((alias.to_string(), resolved));
        }
    }

    let map_col = |col: &ColumnRef| -> ColumnRef {
        match &col.table {
            Some(q) => {
                // innermost binding wins
                let resolved = scope
                    .iter()
                    .rev()
                    .find(|(alias, _)| alias == q)
                    .map(|(_, to)| to.clone());
                ColumnRef {
                    table: Some(resolved.unwrap_or_else(|| q.clone())),
                    column: col.column.clone(),
                }
            }
            None => col.clone(),
        }
    };
    let map_operand = |op: &Operand| -> Operand {
        match op {
            Operand::Column(c) => Operand::Column(map_col(c)),
            Operand::Aggregate {
                func,
                distinct,
                arg,
            } => Operand::Aggregate {
                func: *func,
                distinct: *distinct,
                arg: sql::AggArg {
                    left: map_col(&arg.left),
                    arith: arg.arith.as_ref().map(|(o, r)| (*o, map_col(r))),
                },
            },
        }
    };
    let map_expr = |e: &ValueExpr| -> ValueExpr {
        ValueExpr {
            left: map_operand(&e.left),
            arith: e.arith.as_ref().map(|(o, r)| (*o, map_operand(r))),
        }
    };

    fn map_tree(
        tree: &ConditionTree,
        map_expr: &dyn Fn(&ValueExpr) -> ValueExpr,
        map_col: &dyn Fn(&ColumnRef) -> ColumnRef,
        scope: &[(String, String)],
    ) -> ConditionTree {
        match tree {
            ConditionTree::Leaf(cmp) => ConditionTree::Leaf(Comparison {
                left: map_expr(&cmp.left),
                op: cmp.op,
                negated: cmp.negated,
                right: match &cmp.right {
                    RightOperand::Column(c) => RightOperand::Column(map_col(c)),
                    RightOperand::Subquery(sub) => {
                        RightOperand::Subquery(Box::new(resolve_aliases(sub, scope)))
                    }
                    other => other.clone(),
                },
            }),
            ConditionTree::And(cs) => ConditionTree::And(
                cs.iter()
                    .map(|c| map_tree(c, map_expr, map_col, scope))
                    .collect(),
            ),
            ConditionTree::Or(cs) => ConditionTree::Or(
                cs.iter()
                    .map(|c| map_tree(c, map_expr, map_col, scope))
                    .collect(),
            ),
        }
    }

    let map_source = |source: &TableSource| -> TableSource {
        match source {
            TableSource::Table { name, .. } => TableSource::Table {
                name: name.clone(),
                alias: None,
            },
            TableSource::Subquery { query, .. } => TableSource::Subquery {
                query: Box::new(resolve_aliases(query, &scope)),
                alias: None,
            },
        }
    };

    SqlQuery {
        select: sql::SelectClause {
            distinct: q.select.distinct,
            items: q.select.items.iter().map(map_expr).collect(),
        },
        from: sql::FromClause {
            base: map_source(&q.from.base),
            joins: q
                .from
                .joins
                .iter()
                .map(|j| sql::Join {
                    source: map_source(&j.source),
                    conditions: j
                        .conditions
                        .iter()
                        .map(|c| sql::JoinCondition {
                            left: map_col(&c.left),
                            right: map_col(&c.right),
                        })
                        .collect(),
                })
                .collect(),
        },
        where_clause: q
            .where_clause
            .as_ref()
            .map(|t| map_tree(t, &map_expr, &map_col, &scope)),
        group_by: q.group_by.iter().map(&map_col).collect(),
        having: q
            .having
            .as_ref()
            .map(|t| map_tree(t, &map_expr, &map_col, &scope)),
        order_by: q.order_by.as_ref().map(|spec| sql::OrderSpec {
            keys: spec.keys.iter().map(&map_expr).collect(),
            direction: spec.direction,
        }),
        limit: q.limit,
        set_tail: q
            .set_tail
            .as_ref()
            .map(|(op, tail)| (*op, Box::new(resolve_aliases(tail, &[])))),
    }
}

fn render_form(q: &SqlQuery) -> String {
    let mut select: Vec<String> = q.select.items.iter().map(print_value_expr).collect();
    select.sort();

    let mut from: Vec<String> = q
        .from
        .sources()
        .map(|s| match s {
            TableSource::Table { name, .. } => name.clone(),
            TableSource::Subquery { query, .. } => format!("({})", render_form(query)),
        })
        .collect();
    from.sort();

    let mut join_conds: Vec<String> = q
        .from
        .join_conditions()
        .map(|c| {
            let mut pair = [column_form(&c.left), column_form(&c.right)];
            pair.sort();
            format!("{}={}", pair[0], pair[1])
        })
        .collect();
    join_conds.sort();

    let mut group: Vec<String> = q.group_by.iter().map(column_form).collect();
    group.sort();

    let order = match &q.order_by {
        None => "-".to_string(),
        Some(spec) => {
            let mut keys: Vec<String> = spec.keys.iter().map(print_value_expr).collect();
            keys.sort();
            format!("{} {}", keys.join(","), spec.effective_direction().as_str())
        }
    };

    format!(
        "select[{}{}] from[{}] on[{}] where[{}] group[{}] having[{}] order[{}] limit[{}] tail[{}]",
        if q.select.distinct { "distinct " } else { "" },
        select.join(","),
        from.join(","),
        join_conds.join(","),
        q.where_clause.as_ref().map(condition_form).unwrap_or_default(),
        group.join(","),
        q.having.as_ref().map(condition_form).unwrap_or_default(),
        order,
        if q.limit.is_some() { "present" } else { "-" },
        match &q.set_tail {
            Some((op, tail)) => format!("{} {}", op.as_str(), render_form(tail)),
            None => "-".to_string(),
        }
    )
}

fn column_form(col: &ColumnRef) -> String {
    match &col.table {
        Some(t) => format!("{t}.{}", col.column),
        None => col.column.clone(),
    }
}

/// Condition normal form: AND/OR children sorted (multiset semantics),
/// literal values replaced by a placeholder, nested queries recursive.
fn condition_form(tree: &ConditionTree) -> String {
    match tree {
        ConditionTree::Leaf(cmp) => {
            let op = if cmp.negated {
                format!("not {}", cmp.op.as_str())
            } else {
                cmp.op.as_str().to_string()
            };
            let rhs = match &cmp.right {
                RightOperand::Literal(_) => "value".to_string(),
                RightOperand::Bounds(_, _) => "value value".to_string(),
                RightOperand::Column(c) => column_form(c),
                RightOperand::Subquery(sub) => format!("({})", render_form(sub)),
            };
            format!("{} {op} {rhs}", print_value_expr(&cmp.left))
        }
        ConditionTree::And(cs) => {
            let mut parts: Vec<String> = cs.iter().map(condition_form).collect();
            parts.sort();
            format!("and({})", parts.join(";"))
        }
        ConditionTree::Or(cs) => {
            let mut parts: Vec<String> = cs.iter().map(condition_form).collect();
            parts.sort();
            format!("or({})", parts.join(";"))
        }
    }
}

// ---------------------------------------------------------------------------
// Hardness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }

    pub const ALL: [Hardness; 4] = [
        Hardness::Easy,
        Hardness::Medium,
        Hardness::Hard,
        Hardness::Extra,
    ];
}

/// Difficulty level from component counts, thresholded per the benchmark
/// evaluation procedure. Group-1 counts clause presence, joins, OR and LIKE
/// uses; group-2 counts nested subqueries and the set-operator tail; the
/// "others" group counts >1 aggregate, >1 select column, >1 where predicate,
/// and >1 group-by key.
pub fn classify_hardness(q: &SqlQuery) -> Hardness {
    let comp1 = count_component1(q);
    let comp2 = count_component2(q);
    let others = count_others(q);

    if comp1 <= 1 && others == 0 && comp2 == 0 {
        Hardness::Easy
    } else if (others <= 2 && comp1 <= 1 && comp2 == 0)
        || (comp1 <= 2 && others < 2 && comp2 == 0)
    {
        Hardness::Medium
    } else if (others > 2 && comp1 <= 2 && comp2 == 0)
        || (comp1 > 2 && comp1 <= 3 && others <= 2 && comp2 == 0)
        || (comp1 <= 1 && others == 0 && comp2 <= 1)
    {
        Hardness::Hard
    } else {
        Hardness::Extra
    }
}

fn count_component1(q: &SqlQuery) -> usize {
    let mut count = 0;
    if q.where_clause.is_some() {
        count += 1;
    }
    if !q.group_by.is_empty() {
        count += 1;
    }
    if q.order_by.is_some() {
        count += 1;
    }
    if q.limit.is_some() {
        count += 1;
    }
    count += q.from.source_count() - 1;
    for tree in [&q.where_clause, &q.having].into_iter().flatten() {
        count += tree.or_connective_count();
        count += tree
            .leaves()
            .iter()
            .filter(|leaf| leaf.op == sql::CompareOp::Like)
            .count();
    }
    count
}

fn count_component2(q: &SqlQuery) -> usize {
    let mut count = 0;
    for tree in [&q.where_clause, &q.having].into_iter().flatten() {
        count += tree
            .leaves()
            .iter()
            .filter(|leaf| matches!(leaf.right, RightOperand::Subquery(_)))
            .count();
    }
    if q.set_tail.is_some() {
        count += 1;
    }
    count
}

fn count_others(q: &SqlQuery) -> usize {
    let mut count = 0;
    let mut agg_count: usize = q.select.items.iter().map(|i| i.aggregate_count()).sum();
    for tree in [&q.where_clause, &q.having].into_iter().flatten() {
        agg_count += tree
            .leaves()
            .iter()
            .map(|leaf| leaf.left.aggregate_count())
            .sum::<usize>();
    }
    if let Some(spec) = &q.order_by {
        agg_count += spec.keys.iter().map(|k| k.aggregate_count()).sum::<usize>();
    }
    if agg_count > 1 {
        count += 1;
    }
    if q.select.items.len() > 1 {
        count += 1;
    }
    if let Some(tree) = &q.where_clause {
        if tree.leaves().len() > 1 {
            count += 1;
        }
    }
    if q.group_by.len() > 1 {
        count += 1;
    }
    count
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Mode feeding the headline EM, QM/IM, and the hardness table. Both EM
    /// variants are always reported.
    pub em_mode: EmMode,
    /// Directory of `<db_id>/<db_id>.sqlite` files; enables execution
    /// accuracy when present.
    pub db_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            em_mode: EmMode::SetMatch,
            db_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub example_id: String,
    pub em_strict: bool,
    pub em_set: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex: Option<bool>,
    pub hardness: Hardness,
    pub pred_sql: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardnessRow {
    pub hardness: Hardness,
    pub count: usize,
    pub em_count: usize,
    pub em_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub scored: usize,
    pub em_mode: EmMode,
    pub em_rate: f64,
    pub em_strict_rate: f64,
    pub em_set_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex_scored: Option<usize>,
    pub qm_rate: f64,
    pub im_rate: f64,
    pub interactions: usize,
    pub multi_turn: bool,
    pub hardness_table: Vec<HardnessRow>,
    pub verdicts: Vec<Verdict>,
    /// Gold-side defects (unparseable / failing gold), reported not dropped.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub defects: Vec<String>,
}

/// Fraction of questions matched and fraction of interactions whose every
/// question matched. Groups are (interaction key, per-turn verdicts).
pub fn interaction_metrics(groups: &[(String, Vec<bool>)]) -> (f64, f64) {
    let questions: usize = groups.iter().map(|(_, v)| v.len()).sum();
    if questions == 0 {
        return (0.0, 0.0);
    }
    let matched: usize = groups
        .iter()
        .map(|(_, v)| v.iter().filter(|b| **b).count())
        .sum();
    let full: usize = groups
        .iter()
        .filter(|(_, v)| !v.is_empty() && v.iter().all(|b| *b))
        .count();
    (
        matched as f64 / questions as f64,
        full as f64 / groups.len() as f64,
    )
}

/// Score an aligned prediction list. Gold queries that fail to parse are
/// excluded and listed in the defects; execution accuracy runs only when a
/// backend is supplied and the database file exists.
pub fn evaluate_corpus(
    preds: &[Prediction],
    golds: &[RawExample],
    options: &EvalOptions,
    backend: Option<&dyn ExecutionBackend>,
) -> Result<EvalReport, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::Misaligned(format!(
            "{} predictions vs {} gold examples",
            preds.len(),
            golds.len()
        )));
    }
    let mut verdicts = Vec::with_capacity(golds.len());
    let mut defects = Vec::new();
    let mut ex_scored = 0usize;
    let mut ex_matched = 0usize;
    let mut ran_ex = false;

    for (pred, gold) in preds.iter().zip(golds) {
        if pred.example_id != gold.example_id {
            return Err(EvalError::Misaligned(format!(
                "prediction id '{}' vs gold id '{}'",
                pred.example_id, gold.example_id
            )));
        }
        let gold_query = match sql::parse_query(&gold.gold_query) {
            Ok(q) => q,
            Err(e) => {
                defects.push(format!(
                    "example {}: gold does not parse: {e}",
                    gold.example_id
                ));
                continue;
            }
        };
        let gold_canonical = sql::print_canonical(&gold_query);
        let pred_sql = pred
            .recomposed_sql
            .clone()
            .unwrap_or_else(|| pred.raw_target.clone());

        let mut diagnostics = Vec::new();
        let (em_strict, em_set) = match sql::parse_query(&pred_sql) {
            Ok(pred_query) => (
                sql::print_canonical(&pred_query) == gold_canonical,
                set_match_form(&pred_query) == set_match_form(&gold_query),
            ),
            Err(e) => {
                diagnostics.push(format!("prediction does not parse: {e}"));
                (false, false)
            }
        };

        let ex = match (&options.db_dir, backend) {
            (Some(dir), Some(backend)) => {
                let db_path = dir.join(&gold.db_id).join(format!("{}.sqlite", gold.db_id));
                if db_path.is_file() {
                    ran_ex = true;
                    match crate::exec::execution_match(&pred_sql, &gold_canonical, &db_path, backend)
                    {
                        crate::exec::ExecVerdict::Match => {
                            ex_scored += 1;
                            ex_matched += 1;
                            Some(true)
                        }
                        crate::exec::ExecVerdict::Mismatch(reason) => {
                            ex_scored += 1;
                            if let Some(reason) = reason {
                                diagnostics.push(reason);
                            }
                            Some(false)
                        }
                        crate::exec::ExecVerdict::GoldError(detail) => {
                            defects.push(format!(
                                "example {}: gold execution failed: {detail}",
                                gold.example_id
                            ));
                            None
                        }
                    }
                } else {
                    diagnostics.push(format!("database file missing: {}", db_path.display()));
                    None
                }
            }
            _ => None,
        };

        verdicts.push((
            gold.interaction_id,
            Verdict {
                example_id: gold.example_id.clone(),
                em_strict,
                em_set,
                ex,
                hardness: classify_hardness(&gold_query),
                pred_sql,
                diagnostics,
            },
        ));
    }

    let scored = verdicts.len();
    let headline = |v: &Verdict| match options.em_mode {
        EmMode::Strict => v.em_strict,
        EmMode::SetMatch => v.em_set,
    };

    let rate = |count: usize| {
        if scored == 0 {
            0.0
        } else {
            count as f64 / scored as f64
        }
    };
    let em_count = verdicts.iter().filter(|(_, v)| headline(v)).count();
    let em_strict_count = verdicts.iter().filter(|(_, v)| v.em_strict).count();
    let em_set_count = verdicts.iter().filter(|(_, v)| v.em_set).count();

    // Interaction grouping: single-turn examples stand alone.
    let multi_turn = verdicts.iter().any(|(iid, _)| iid.is_some());
    let mut groups: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for (iid, v) in &verdicts {
        let key = match iid {
            Some(i) => format!("i{i:08}"),
            None => format!("q{}", v.example_id),
        };
        groups.entry(key).or_default().push(headline(v));
    }
    let group_list: Vec<(String, Vec<bool>)> = groups.into_iter().collect();
    let (qm_rate, im_rate) = interaction_metrics(&group_list);

    let hardness_table = Hardness::ALL
        .iter()
        .map(|h| {
            let bucket: Vec<&Verdict> = verdicts
                .iter()
                .filter(|(_, v)| v.hardness == *h)
                .map(|(_, v)| v)
                .collect();
            let em = bucket.iter().filter(|v| headline(v)).count();
            HardnessRow {
                hardness: *h,
                count: bucket.len(),
                em_count: em,
                em_rate: if bucket.is_empty() {
                    0.0
                } else {
                    em as f64 / bucket.len() as f64
                },
            }
        })
        .collect();

    Ok(EvalReport {
        total: golds.len(),
        scored,
        em_mode: options.em_mode,
        em_rate: rate(em_count),
        em_strict_rate: rate(em_strict_count),
        em_set_rate: rate(em_set_count),
        ex_rate: if ran_ex {
            Some(if ex_scored == 0 {
                0.0
            } else {
                ex_matched as f64 / ex_scored as f64
            })
        } else {
            None
        },
        ex_scored: if ran_ex { Some(ex_scored) } else { None },
        qm_rate,
        im_rate,
        interactions: group_list.len(),
        multi_turn,
        hardness_table,
        verdicts: verdicts.into_iter().map(|(_, v)| v).collect(),
        defects,
    })
}

// Re-exported here because scoring owns the check; the CLI and tests call it
// through the evaluator.
pub use crate::exec::ExecVerdict;
