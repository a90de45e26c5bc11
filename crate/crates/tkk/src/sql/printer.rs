//! Canonical printer. Every clause body has its own function so clause
//! extraction and full-query printing share one rendering path; the full
//! canonical form is the clause bodies assembled in grammar order.

use super::ast::*;

/// Deterministic canonical rendering: lowercase keywords and identifiers,
/// single spaces between tokens, literal contents byte-exact, no trailing
/// whitespace. `parse_query(print_canonical(q))` reproduces `q`.
pub fn print_canonical(q: &SqlQuery) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.push(format!("select {}", print_select_body(q)));
    parts.push(format!("from {}", print_from_body(q)));
    if let Some(body) = print_where_body(q) {
        parts.push(format!("where {body}"));
    }
    if let Some(body) = print_group_by_body(q) {
        parts.push(format!("group by {body}"));
    }
    if let Some(body) = print_having_body(q) {
        parts.push(format!("having {body}"));
    }
    if let Some(body) = print_order_by_body(q) {
        parts.push(format!("order by {body}"));
    }
    if let Some(body) = print_limit_body(q) {
        parts.push(format!("limit {body}"));
    }
    if let Some((op, tail)) = print_set_tail(q) {
        parts.push(format!("{} {}", op.as_str(), tail));
    }
    parts.join(" ")
}

/// Select body without the leading keyword: `distinct a , b` or `count ( * )`.
pub fn print_select_body(q: &SqlQuery) -> String {
    let items: Vec<String> = q.select.items.iter().map(print_value_expr).collect();
    if q.select.distinct {
        format!("distinct {}", items.join(" , "))
    } else {
        items.join(" , ")
    }
}

pub fn print_from_body(q: &SqlQuery) -> String {
    let mut out = print_table_source(&q.from.base);
    for join in &q.from.joins {
        out.push_str(" join ");
        out.push_str(&print_table_source(&join.source));
        if !join.conditions.is_empty() {
            let conds: Vec<String> = join
                .conditions
                .iter()
                .map(|c| format!("{} = {}", print_column(&c.left), print_column(&c.right)))
                .collect();
            out.push_str(" on ");
            out.push_str(&conds.join(" and "));
        }
    }
    out
}

pub fn print_where_body(q: &SqlQuery) -> Option<String> {
    q.where_clause.as_ref().map(print_condition)
}

pub fn print_group_by_body(q: &SqlQuery) -> Option<String> {
    if q.group_by.is_empty() {
        return None;
    }
    Some(
        q.group_by
            .iter()
            .map(print_column)
            .collect::<Vec<_>>()
            .join(" , "),
    )
}

pub fn print_having_body(q: &SqlQuery) -> Option<String> {
    q.having.as_ref().map(print_condition)
}

pub fn print_order_by_body(q: &SqlQuery) -> Option<String> {
    q.order_by.as_ref().map(|spec| {
        let keys: Vec<String> = spec.keys.iter().map(print_value_expr).collect();
        match spec.direction {
            Some(dir) => format!("{} {}", keys.join(" , "), dir.as_str()),
            None => keys.join(" , "),
        }
    })
}

pub fn print_limit_body(q: &SqlQuery) -> Option<String> {
    q.limit.map(|n| n.to_string())
}

/// Set-operator tail rendered as a full canonical query, recursively.
pub fn print_set_tail(q: &SqlQuery) -> Option<(SetOperator, String)> {
    q.set_tail
        .as_ref()
        .map(|(op, tail)| (*op, print_canonical(tail)))
}

pub fn print_value_expr(expr: &ValueExpr) -> String {
    match &expr.arith {
        None => print_operand(&expr.left),
        Some((op, rhs)) => format!(
            "{} {} {}",
            print_operand(&expr.left),
            op.as_str(),
            print_operand(rhs)
        ),
    }
}

fn print_operand(op: &Operand) -> String {
    match op {
        Operand::Column(col) => print_column(col),
        Operand::Aggregate {
            func,
            distinct,
            arg,
        } => {
            let inner = match &arg.arith {
                None => print_column(&arg.left),
                Some((op, rhs)) => format!(
                    "{} {} {}",
                    print_column(&arg.left),
                    op.as_str(),
                    print_column(rhs)
                ),
            };
            if *distinct {
                format!("{} ( distinct {} )", func.as_str(), inner)
            } else {
                format!("{} ( {} )", func.as_str(), inner)
            }
        }
    }
}

fn print_column(col: &ColumnRef) -> String {
    match &col.table {
        Some(table) => format!("{}.{}", table, col.column),
        None => col.column.clone(),
    }
}

fn print_table_source(source: &TableSource) -> String {
    match source {
        TableSource::Table { name, alias } => match alias {
            Some(a) => format!("{name} as {a}"),
            None => name.clone(),
        },
        TableSource::Subquery { query, alias } => {
            let inner = print_canonical(query);
            match alias {
                Some(a) => format!("( {inner} ) as {a}"),
                None => format!("( {inner} )"),
            }
        }
    }
}

/// Render a condition tree with minimal parentheses: AND binds tighter than
/// OR, so only OR groups nested under AND need parens.
pub fn print_condition(tree: &ConditionTree) -> String {
    print_condition_prec(tree, false)
}

fn print_condition_prec(tree: &ConditionTree, parenthesize_or: bool) -> String {
    match tree {
        ConditionTree::Leaf(cmp) => print_comparison(cmp),
        ConditionTree::And(children) => children
            .iter()
            .map(|c| print_condition_prec(c, true))
            .collect::<Vec<_>>()
            .join(" and "),
        ConditionTree::Or(children) => {
            let body = children
                .iter()
                .map(|c| print_condition_prec(c, false))
                .collect::<Vec<_>>()
                .join(" or ");
            if parenthesize_or {
                format!("( {body} )")
            } else {
                body
            }
        }
    }
}

fn print_comparison(cmp: &Comparison) -> String {
    let left = print_value_expr(&cmp.left);
    let op = if cmp.negated {
        format!("not {}", cmp.op.as_str())
    } else {
        cmp.op.as_str().to_string()
    };
    match &cmp.right {
        RightOperand::Literal(lit) => format!("{left} {op} {}", print_literal(lit)),
        RightOperand::Column(col) => format!("{left} {op} {}", print_column(col)),
        RightOperand::Subquery(sub) => {
            format!("{left} {op} ( {} )", print_canonical(sub))
        }
        RightOperand::Bounds(lo, hi) => format!(
            "{left} between {} and {}",
            print_literal(lo),
            print_literal(hi)
        ),
    }
}

fn print_literal(lit: &Literal) -> String {
    match lit {
        Literal::Number(raw) => raw.clone(),
        // single quotes unless the content itself contains one
        Literal::Str(content) => {
            if content.contains('\'') {
                format!("\"{content}\"")
            } else {
                format!("'{content}'")
            }
        }
        Literal::Null => "null".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{canonicalize, parse_query};
    use super::*;

    #[test]
    fn canonical_form_of_count_star() {
        assert_eq!(
            canonicalize("SELECT count(*) FROM templates").unwrap(),
            "select count ( * ) from templates"
        );
    }

    #[test]
    fn canonicalize_respects_case_and_spacing_only() {
        assert_eq!(
            canonicalize("select COUNT(*) from Templates").unwrap(),
            "select count ( * ) from templates"
        );
        assert_eq!(
            canonicalize("SELECT model FROM cars_data ORDER BY horsepower LIMIT 1").unwrap(),
            "select model from cars_data order by horsepower limit 1"
        );
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let inputs = [
            "SELECT avg(gnp), sum(population) FROM country WHERE governmentform = 'US Territory'",
            "select a from t where x = 1 or y = 2 and z = 3",
            "select name from a union select name from b",
            "select t1.a from x as t1 join y as t2 on t1.a = t2.b group by t1.a having count(*) > 2 order by count(*) desc limit 5",
        ];
        for text in inputs {
            let once = canonicalize(text).unwrap();
            assert_eq!(canonicalize(&once).unwrap(), once, "not idempotent: {text}");
        }
    }

    #[test]
    fn set_tail_renders_on_one_line() {
        assert_eq!(
            canonicalize("SELECT name FROM a UNION SELECT name FROM b").unwrap(),
            "select name from a union select name from b"
        );
    }

    #[test]
    fn string_literals_survive_byte_exact() {
        let canon =
            canonicalize("SELECT name FROM country WHERE governmentform = \"US Territory\"")
                .unwrap();
        assert!(canon.contains("'US Territory'"));
        let canon = canonicalize("select a from t where b like '%So n%'").unwrap();
        assert!(canon.contains("'%So n%'"));
    }

    #[test]
    fn or_group_under_and_keeps_parens() {
        let text = "select a from t where ( a = 1 or b = 2 ) and c = 3";
        let canon = canonicalize(text).unwrap();
        assert_eq!(canon, text);
        let reparsed = parse_query(&canon).unwrap();
        assert_eq!(parse_query(text).unwrap(), reparsed);
    }

    #[test]
    fn roundtrip_reproduces_ast() {
        let samples = [
            "select count ( * ) from templates",
            "select distinct a , b from t",
            "select max ( a ) - min ( b ) from t",
            "select count ( distinct status ) from dogs",
            "select a from t where b not in ( select b from u )",
            "select a from t where b between 2 and 4",
            "select a from ( select a from u group by a ) as d where a > 10",
            "select a from t where b is null",
            "select a from t order by a , b desc limit 3",
            "select a from t intersect select a from u except select a from v",
        ];
        for text in samples {
            let ast = parse_query(text).unwrap();
            let printed = print_canonical(&ast);
            assert_eq!(parse_query(&printed).unwrap(), ast, "roundtrip failed: {text}");
            assert_eq!(printed, text, "already-canonical text must be a fixpoint");
        }
    }
}
