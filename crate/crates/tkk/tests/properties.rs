//! Property tests over randomly generated query ASTs: the printer/parser
//! round trip, substitution bijectivity, decompose/recompose inversion, and
//! sampler bounds hold for arbitrary queries in the grammar, not just the
//! bundled fixtures.

use proptest::prelude::*;

use tkk::decompose::{
    classify_kind, extract_clauses, keywords_to_tokens, recompose, strip_empty_markers,
    tokens_to_keywords, ExampleKind, SubtaskExample, Task,
};
use tkk::sample::{classification_keep_count, downsample, BalanceConfig};
use tkk::sql::{
    parse_query, print_canonical, AggArg, AggregateFn, ArithOp, ColumnRef, CompareOp, Comparison,
    ConditionTree, FromClause, Join, JoinCondition, Literal, Operand, OrderDirection, OrderSpec,
    RightOperand, SelectClause, SetOperator, SqlQuery, TableSource, ValueExpr,
};

const TABLES: [&str; 5] = ["singer", "stadium", "country", "dogs", "treatments"];
const COLUMNS: [&str; 6] = ["name", "age", "population", "gnp", "weight", "cost"];

fn column() -> BoxedStrategy<ColumnRef> {
    (
        proptest::option::of(prop_oneof![
            proptest::sample::select(&TABLES[..]).prop_map(str::to_string),
            proptest::sample::select(&["t1", "t2", "t3"][..]).prop_map(str::to_string),
        ]),
        proptest::sample::select(&COLUMNS[..]),
    )
        .prop_map(|(table, column)| ColumnRef {
            table,
            column: column.to_string(),
        })
        .boxed()
}

fn arith_op() -> BoxedStrategy<ArithOp> {
    prop_oneof![
        Just(ArithOp::Add),
        Just(ArithOp::Sub),
        Just(ArithOp::Mul),
        Just(ArithOp::Div)
    ]
    .boxed()
}

fn operand() -> BoxedStrategy<Operand> {
    let func = prop_oneof![
        Just(AggregateFn::Count),
        Just(AggregateFn::Sum),
        Just(AggregateFn::Avg),
        Just(AggregateFn::Min),
        Just(AggregateFn::Max),
    ];
    let aggregate = (
        func,
        any::<bool>(),
        column(),
        proptest::option::of((arith_op(), column())),
    )
        .prop_map(|(func, distinct, left, arith)| {
            if func == AggregateFn::Count && !distinct && arith.is_none() {
                Operand::Aggregate {
                    func,
                    distinct: false,
                    arg: AggArg {
                        left: ColumnRef::star(),
                        arith: None,
                    },
                }
            } else {
                Operand::Aggregate {
                    func,
                    distinct,
                    arg: AggArg { left, arith },
                }
            }
        });
    prop_oneof![3 => column().prop_map(Operand::Column), 1 => aggregate].boxed()
}

fn value_expr() -> BoxedStrategy<ValueExpr> {
    (operand(), proptest::option::of((arith_op(), operand())))
        .prop_map(|(left, arith)| ValueExpr { left, arith })
        .boxed()
}

fn literal() -> BoxedStrategy<Literal> {
    prop_oneof![
        proptest::sample::select(&["0", "1", "42", "3.5", "-7", "100"][..])
            .prop_map(|raw| Literal::Number(raw.to_string())),
        proptest::sample::select(&["", "US Territory", "%son%", "a b c", "select from"][..])
            .prop_map(|s| Literal::Str(s.to_string())),
        Just(Literal::Null),
    ]
    .boxed()
}

fn number_literal() -> BoxedStrategy<Literal> {
    proptest::sample::select(&["0", "2", "9", "1.5"][..])
        .prop_map(|raw| Literal::Number(raw.to_string()))
        .boxed()
}

/// One comparison. `sub` supplies nested subqueries; `None` keeps this level
/// subquery-free.
fn comparison(sub: Option<BoxedStrategy<SqlQuery>>) -> BoxedStrategy<Comparison> {
    let op = prop_oneof![
        Just(CompareOp::Eq),
        Just(CompareOp::Ne),
        Just(CompareOp::Lt),
        Just(CompareOp::Gt),
        Just(CompareOp::Le),
        Just(CompareOp::Ge),
    ];
    let rhs: BoxedStrategy<RightOperand> = match &sub {
        None => prop_oneof![
            3 => literal().prop_map(RightOperand::Literal),
            1 => column().prop_map(RightOperand::Column),
        ]
        .boxed(),
        Some(sub) => prop_oneof![
            3 => literal().prop_map(RightOperand::Literal),
            1 => column().prop_map(RightOperand::Column),
            1 => sub.clone().prop_map(|q| RightOperand::Subquery(Box::new(q))),
        ]
        .boxed(),
    };
    let plain = (value_expr(), op, rhs).prop_map(|(left, op, right)| Comparison {
        left,
        op,
        negated: false,
        right,
    });
    let like = (value_expr(), any::<bool>()).prop_map(|(left, negated)| Comparison {
        left,
        op: CompareOp::Like,
        negated,
        right: RightOperand::Literal(Literal::Str("%x%".into())),
    });
    let between =
        (value_expr(), number_literal(), number_literal()).prop_map(|(left, lo, hi)| Comparison {
            left,
            op: CompareOp::Between,
            negated: false,
            right: RightOperand::Bounds(lo, hi),
        });
    let is_null = value_expr().prop_map(|left| Comparison {
        left,
        op: CompareOp::Is,
        negated: false,
        right: RightOperand::Literal(Literal::Null),
    });
    match sub {
        None => prop_oneof![4 => plain, 1 => like, 1 => between, 1 => is_null].boxed(),
        Some(sub) => {
            let in_subquery = (value_expr(), any::<bool>(), sub).prop_map(
                |(left, negated, inner)| Comparison {
                    left,
                    op: CompareOp::In,
                    negated,
                    right: RightOperand::Subquery(Box::new(inner)),
                },
            );
            prop_oneof![3 => plain, 1 => like, 1 => between, 1 => is_null, 2 => in_subquery]
                .boxed()
        }
    }
}

/// Alternating And/Or trees, pre-flattened the way the parser builds them.
fn condition(sub: Option<BoxedStrategy<SqlQuery>>) -> BoxedStrategy<ConditionTree> {
    let cmp = comparison(sub);
    let leaf = cmp.clone().prop_map(ConditionTree::Leaf).boxed();
    let or_of_leaves = proptest::collection::vec(cmp.clone(), 2..4)
        .prop_map(|cs| ConditionTree::Or(cs.into_iter().map(ConditionTree::Leaf).collect()))
        .boxed();
    let and_of_leaves = proptest::collection::vec(cmp, 2..3)
        .prop_map(|cs| ConditionTree::And(cs.into_iter().map(ConditionTree::Leaf).collect()))
        .boxed();
    let and_node = proptest::collection::vec(
        prop_oneof![3 => leaf.clone(), 1 => or_of_leaves.clone()],
        2..4,
    )
    .prop_map(ConditionTree::And)
    .boxed();
    let or_node = proptest::collection::vec(
        prop_oneof![3 => leaf.clone(), 1 => and_of_leaves],
        2..4,
    )
    .prop_map(ConditionTree::Or)
    .boxed();
    prop_oneof![3 => leaf, 1 => or_of_leaves, 1 => and_node, 1 => or_node].boxed()
}

fn from_clause(sub: Option<BoxedStrategy<SqlQuery>>) -> BoxedStrategy<FromClause> {
    let base: BoxedStrategy<TableSource> = match sub {
        None => (0..TABLES.len())
            .prop_map(|i| TableSource::Table {
                name: TABLES[i].to_string(),
                alias: None,
            })
            .boxed(),
        Some(sub) => prop_oneof![
            4 => (0..TABLES.len()).prop_map(|i| TableSource::Table {
                name: TABLES[i].to_string(),
                alias: None,
            }),
            1 => sub.prop_map(|q| TableSource::Subquery {
                query: Box::new(q),
                alias: None,
            }),
        ]
        .boxed(),
    };
    let join_conds = proptest::collection::vec((column(), column()), 0..3).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(left, right)| JoinCondition { left, right })
            .collect::<Vec<_>>()
    });
    (base, 0..3usize, join_conds, any::<bool>())
        .prop_map(|(base, joins, conds, aliased)| {
            let mut from = FromClause {
                base,
                joins: Vec::new(),
            };
            for j in 0..joins {
                from.joins.push(Join {
                    source: TableSource::Table {
                        name: TABLES[(j + 1) % TABLES.len()].to_string(),
                        alias: None,
                    },
                    conditions: if j == 0 { conds.clone() } else { Vec::new() },
                });
            }
            if aliased {
                let mut counter = 0;
                let mut sources: Vec<&mut TableSource> = vec![&mut from.base];
                sources.extend(from.joins.iter_mut().map(|j| &mut j.source));
                for source in sources {
                    counter += 1;
                    match source {
                        TableSource::Table { alias, .. } | TableSource::Subquery { alias, .. } => {
                            *alias = Some(format!("t{counter}"));
                        }
                    }
                }
            }
            from
        })
        .boxed()
}

/// One query level. `sub` feeds nested subqueries and set-operator tails;
/// the innermost level passes `None`.
fn query_level(sub: Option<BoxedStrategy<SqlQuery>>) -> BoxedStrategy<SqlQuery> {
    let items = prop_oneof![
        5 => proptest::collection::vec(value_expr(), 1..4),
        1 => Just(vec![ValueExpr::column(ColumnRef::star())]),
    ];
    let order = proptest::option::of((
        proptest::collection::vec(value_expr(), 1..3),
        proptest::option::of(prop_oneof![
            Just(OrderDirection::Asc),
            Just(OrderDirection::Desc)
        ]),
    ));
    let set_tail: BoxedStrategy<Option<(SetOperator, SqlQuery)>> = match &sub {
        None => Just(None).boxed(),
        Some(sub) => proptest::option::weighted(
            0.25,
            (
                prop_oneof![
                    Just(SetOperator::Union),
                    Just(SetOperator::Intersect),
                    Just(SetOperator::Except)
                ],
                sub.clone(),
            ),
        )
        .boxed(),
    };
    (
        any::<bool>(),
        items,
        from_clause(sub.clone()),
        proptest::option::of(condition(sub)),
        proptest::collection::vec(column(), 0..3),
        proptest::option::of(condition(None)),
        order,
        proptest::option::of(0u64..100),
        set_tail,
    )
        .prop_map(
            |(distinct, items, from, where_clause, group_by, having, order, limit, tail)| {
                let having = if group_by.is_empty() { None } else { having };
                SqlQuery {
                    select: SelectClause { distinct, items },
                    from,
                    where_clause,
                    group_by,
                    having,
                    order_by: order.map(|(keys, direction)| OrderSpec { keys, direction }),
                    limit,
                    set_tail: tail.map(|(op, q)| (op, Box::new(q))),
                }
            },
        )
        .boxed()
}

/// Queries with subqueries and set tails nested up to `depth` levels.
fn query(depth: u32) -> BoxedStrategy<SqlQuery> {
    let mut level = query_level(None);
    for _ in 0..depth {
        level = query_level(Some(level));
    }
    level
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printer_parser_roundtrip(q in query(2)) {
        let printed = print_canonical(&q);
        let reparsed = parse_query(&printed)
            .unwrap_or_else(|e| panic!("canonical text failed to parse: {e}\n{printed}"));
        prop_assert_eq!(&reparsed, &q, "printed: {}", printed);
        // canonical text is a fixpoint
        prop_assert_eq!(print_canonical(&reparsed), printed);
    }

    #[test]
    fn substitution_bijective_on_canonical_text(q in query(2)) {
        let text = print_canonical(&q);
        let tokenized = keywords_to_tokens(&text);
        let (back, warnings) = tokens_to_keywords(&tokenized);
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(back, text);
    }

    #[test]
    fn recompose_inverts_decomposition(q in query(2)) {
        let text = print_canonical(&q);
        let clauses = extract_clauses(&q);
        let main = clauses.main_target();
        prop_assert_eq!(recompose(&main).sql, text.clone());
        // markers stripped up front changes nothing
        prop_assert_eq!(recompose(&strip_empty_markers(&main)).sql, text);
    }

    #[test]
    fn classify_kind_ignores_whitespace(q in query(1)) {
        let clauses = extract_clauses(&q);
        for target in [&clauses.where_text, &clauses.ghol_text, &clauses.sql_text] {
            let spaced = target.replace(' ', "   ");
            prop_assert_eq!(classify_kind(target), classify_kind(&spaced));
        }
    }

    // IM <= QM holds when interactions share one turn count (with ragged
    // lengths a short fully-matched interaction can outweigh its questions).
    #[test]
    fn interaction_match_bounded_by_question_match_for_uniform_lengths(
        turns in 1usize..5,
        pattern in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 4), 1..8)
    ) {
        let groups: Vec<(String, Vec<bool>)> = pattern
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("g{i}"), v[..turns].to_vec()))
            .collect();
        let (qm, im) = tkk::eval::interaction_metrics(&groups);
        prop_assert!(im <= qm + 1e-12, "im {} > qm {}", im, qm);
        prop_assert!((0.0..=1.0).contains(&qm));
        prop_assert!((0.0..=1.0).contains(&im));
        // a fully matched interaction has every question matched
        for (_, verdicts) in &groups {
            if !verdicts.is_empty() && verdicts.iter().all(|b| *b) {
                prop_assert!(verdicts.iter().filter(|b| **b).count() == verdicts.len());
            }
        }
    }

    #[test]
    fn sampler_bound_holds(parsing in 0usize..40, classification in 0usize..120,
                           ratio in 0.05f64..1.0, seed in 0u64..1000) {
        let mut records = Vec::new();
        for i in 0..parsing {
            records.push(SubtaskExample {
                example_id: format!("p{i}"),
                task: Task::Ghol,
                prompt: "[GROUP_BY] [HAVING] [ORDER_BY] [LIMIT]".into(),
                input: format!("in {i}"),
                target: format!("[GROUP_BY] x{i} [HAVING] [ORDER_BY] [LIMIT]"),
                kind: ExampleKind::Parsing,
            });
        }
        for i in 0..classification {
            records.push(SubtaskExample {
                example_id: format!("c{i}"),
                task: Task::Ghol,
                prompt: "[GROUP_BY] [HAVING] [ORDER_BY] [LIMIT]".into(),
                input: format!("in c{i}"),
                target: "[GROUP_BY] [HAVING] [ORDER_BY] [LIMIT]".into(),
                kind: ExampleKind::Classification,
            });
        }
        let out = downsample(&records, &BalanceConfig { ratio, seed }).unwrap();
        let kept_parsing = out.iter().filter(|r| r.kind == ExampleKind::Parsing).count();
        let kept_class = out.len() - kept_parsing;
        prop_assert_eq!(kept_parsing, parsing);
        if parsing > 0 {
            prop_assert!(kept_parsing as f64 / (kept_parsing + kept_class) as f64 >= ratio);
            prop_assert_eq!(kept_class, classification_keep_count(parsing, classification, ratio));
        } else {
            prop_assert_eq!(kept_class, classification);
        }
        // original order preserved
        let positions: Vec<usize> = out.iter().map(|r| {
            records.iter().position(|x| x.example_id == r.example_id).unwrap()
        }).collect();
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        prop_assert_eq!(positions, sorted);
    }
}
