//! Clause-level abstract syntax tree for the supported SQL subset.

/// A full query: seven optional-or-required clause slots plus an optional
/// set-operator tail forming a right-leaning chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub select: SelectClause,
    pub from: FromClause,
    pub where_clause: Option<ConditionTree>,
    pub group_by: Vec<ColumnRef>,
    pub having: Option<ConditionTree>,
    pub order_by: Option<OrderSpec>,
    pub limit: Option<u64>,
    pub set_tail: Option<(SetOperator, Box<SqlQuery>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectClause {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
}

/// Select items are value expressions; a lone aggregate operand covers the
/// common `count ( * )` / `avg ( gnp )` shapes.
pub type SelectItem = ValueExpr;

/// `operand` or `operand <arith> operand`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueExpr {
    pub left: Operand,
    pub arith: Option<(ArithOp, Operand)>,
}

impl ValueExpr {
    pub fn column(col: ColumnRef) -> ValueExpr {
        ValueExpr {
            left: Operand::Column(col),
            arith: None,
        }
    }

    /// The aggregate applied when this expression is a single aggregate
    /// operand, e.g. `count ( * )`. Arithmetic between two aggregates has no
    /// single outer aggregate and reports `None`.
    pub fn outer_aggregate(&self) -> Option<AggregateFn> {
        match (&self.left, &self.arith) {
            (Operand::Aggregate { func, .. }, None) => Some(*func),
            _ => None,
        }
    }

    /// Count aggregate applications anywhere in the expression.
    pub fn aggregate_count(&self) -> usize {
        let one = |op: &Operand| match op {
            Operand::Aggregate { .. } => 1,
            Operand::Column(_) => 0,
        };
        one(&self.left)
            + self
                .arith
                .as_ref()
                .map(|(_, rhs)| one(rhs))
                .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Column(ColumnRef),
    Aggregate {
        func: AggregateFn,
        distinct: bool,
        arg: AggArg,
    },
}

/// Argument of an aggregate: a column or arithmetic between two columns.
/// Star is only legal under `count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggArg {
    pub left: ColumnRef,
    pub arith: Option<(ArithOp, ColumnRef)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggregateFn {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregateFn::Count => "count",
            AggregateFn::Sum => "sum",
            AggregateFn::Avg => "avg",
            AggregateFn::Min => "min",
            AggregateFn::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

/// `table.column`, bare `column`, or the star column `*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub table: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn star() -> ColumnRef {
        ColumnRef {
            table: None,
            column: "*".to_string(),
        }
    }

    pub fn is_star(&self) -> bool {
        self.table.is_none() && self.column == "*"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromClause {
    pub base: TableSource,
    pub joins: Vec<Join>,
}

impl FromClause {
    pub fn sources(&self) -> impl Iterator<Item = &TableSource> {
        std::iter::once(&self.base).chain(self.joins.iter().map(|j| &j.source))
    }

    pub fn source_count(&self) -> usize {
        1 + self.joins.len()
    }

    pub fn join_conditions(&self) -> impl Iterator<Item = &JoinCondition> {
        self.joins.iter().flat_map(|j| j.conditions.iter())
    }

    /// Aliases declared by the sources, in declaration order.
    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.sources().filter_map(|s| s.alias())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    Table {
        name: String,
        alias: Option<String>,
    },
    Subquery {
        query: Box<SqlQuery>,
        alias: Option<String>,
    },
}

impl TableSource {
    pub fn alias(&self) -> Option<&str> {
        match self {
            TableSource::Table { alias, .. } | TableSource::Subquery { alias, .. } => {
                alias.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Join {
    pub source: TableSource,
    pub conditions: Vec<JoinCondition>,
}

/// Equality between two column refs in an ON clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinCondition {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// Boolean tree over comparisons. AND/OR nodes are n-ary and flattened, so
/// `a and ( b and c )` and `a and b and c` parse to the same tree.
// Leaves stay unboxed; comparisons dominate real trees anyway.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionTree {
    Leaf(Comparison),
    And(Vec<ConditionTree>),
    Or(Vec<ConditionTree>),
}

impl ConditionTree {
    /// Top-level conjuncts: children of an AND root, otherwise the tree itself.
    pub fn conjuncts(&self) -> Vec<&ConditionTree> {
        match self {
            ConditionTree::And(children) => children.iter().collect(),
            other => vec![other],
        }
    }

    pub fn leaves(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            ConditionTree::Leaf(c) => out.push(c),
            ConditionTree::And(cs) | ConditionTree::Or(cs) => {
                for c in cs {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Number of OR connectives, counting an n-ary OR node as n-1.
    pub fn or_connective_count(&self) -> usize {
        match self {
            ConditionTree::Leaf(_) => 0,
            ConditionTree::And(cs) => cs.iter().map(|c| c.or_connective_count()).sum(),
            ConditionTree::Or(cs) => {
                cs.len().saturating_sub(1)
                    + cs.iter().map(|c| c.or_connective_count()).sum::<usize>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub left: ValueExpr,
    pub op: CompareOp,
    /// True for `not like` / `not in`.
    pub negated: bool,
    pub right: RightOperand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
    In,
    Between,
    Is,
}

impl CompareOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
            CompareOp::Like => "like",
            CompareOp::In => "in",
            CompareOp::Between => "between",
            CompareOp::Is => "is",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RightOperand {
    Literal(Literal),
    Column(ColumnRef),
    Subquery(Box<SqlQuery>),
    /// Exactly two literal bounds of a BETWEEN.
    Bounds(Literal, Literal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    /// Raw number text, reprinted byte-exact.
    Number(String),
    /// String content without quotes, byte-exact.
    Str(String),
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderSpec {
    pub keys: Vec<ValueExpr>,
    /// One direction applies to the whole key list; `None` means the query
    /// spelled no direction (ascending by default, and the printer omits it).
    pub direction: Option<OrderDirection>,
}

impl OrderSpec {
    pub fn effective_direction(&self) -> OrderDirection {
        self.direction.unwrap_or(OrderDirection::Asc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderDirection {
    Asc,
    Desc,
}

impl OrderDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrderDirection::Asc => "asc",
            OrderDirection::Desc => "desc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOperator {
    Intersect,
    Union,
    Except,
}

impl SetOperator {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetOperator::Intersect => "intersect",
            SetOperator::Union => "union",
            SetOperator::Except => "except",
        }
    }
}

impl SqlQuery {
    /// Queries in the set-operator chain, this one first.
    pub fn chain(&self) -> Vec<&SqlQuery> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some((_, next)) = &cur.set_tail {
            out.push(next);
            cur = next;
        }
        out
    }

    /// Nested subqueries reachable from this query's own clauses: right
    /// operands in WHERE/HAVING, and FROM sources. Set tails are not included.
    pub fn nested_in_clauses(&self) -> Vec<&SqlQuery> {
        let mut out = Vec::new();
        for cond in [&self.where_clause, &self.having].into_iter().flatten() {
            for leaf in cond.leaves() {
                if let RightOperand::Subquery(q) = &leaf.right {
                    out.push(q.as_ref());
                }
            }
        }
        for source in self.from.sources() {
            if let TableSource::Subquery { query, .. } = source {
                out.push(query.as_ref());
            }
        }
        out
    }
}
