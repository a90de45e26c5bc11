//! Hand-written recursive descent parser over the token stream.

use super::ast::*;
use super::token::{tokenize, Keyword as Kw, Token, TokenKind};
use super::SqlError;

/// Parse one SQL query (with optional set-operator tail). A single trailing
/// semicolon is tolerated; any other leftover input is a syntax error.
pub fn parse_query(text: &str) -> Result<SqlQuery, SqlError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let query = parser.parse_query()?;
    if parser.peek_symbol(";") {
        parser.pos += 1;
    }
    if let Some(tok) = parser.peek() {
        return Err(SqlError::Syntax {
            message: format!("unexpected {} after end of query", describe(&tok.kind)),
            offset: tok.offset,
        });
    }
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Keyword(kw) => format!("keyword '{}'", kw.as_str()),
        TokenKind::Ident(s) => format!("identifier '{s}'"),
        TokenKind::Str(_) => "string literal".to_string(),
        TokenKind::Num(n) => format!("number '{n}'"),
        TokenKind::Symbol(s) => format!("'{s}'"),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn offset(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.end)
    }

    fn syntax(&self, message: impl Into<String>) -> SqlError {
        SqlError::Syntax {
            message: message.into(),
            offset: self.offset(),
        }
    }

    fn unsupported(&self, construct: impl Into<String>) -> SqlError {
        SqlError::Unsupported {
            construct: construct.into(),
            offset: self.offset(),
        }
    }

    fn peek_keyword(&self, kw: Kw) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Keyword(k), .. }) if *k == kw)
    }

    fn peek_symbol(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Symbol(s), .. }) if *s == sym)
    }

    fn eat_keyword(&mut self, kw: Kw) -> bool {
        if self.peek_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.peek_symbol(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: Kw) -> Result<(), SqlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.syntax(format!(
                "expected keyword '{}', found {}",
                kw.as_str(),
                self.found()
            )))
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{}', found {}", sym, self.found())))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(tok) => describe(&tok.kind),
            None => "end of input".to_string(),
        }
    }

    /// Identifier, also accepting aggregate keywords used as plain names.
    fn expect_ident(&mut self) -> Result<String, SqlError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(name)
            }
            Some(TokenKind::Keyword(kw))
                if matches!(kw, Kw::Count | Kw::Sum | Kw::Avg | Kw::Min | Kw::Max) =>
            {
                self.pos += 1;
                Ok(kw.as_str().to_string())
            }
            _ => Err(self.syntax(format!("expected identifier, found {}", self.found()))),
        }
    }

    fn parse_query(&mut self) -> Result<SqlQuery, SqlError> {
        let mut query = self.parse_select_core()?;
        let set_op = if self.eat_keyword(Kw::Intersect) {
            Some(SetOperator::Intersect)
        } else if self.eat_keyword(Kw::Union) {
            Some(SetOperator::Union)
        } else if self.eat_keyword(Kw::Except) {
            Some(SetOperator::Except)
        } else {
            None
        };
        if let Some(op) = set_op {
            if let Some(Token { kind: TokenKind::Ident(word), offset }) = self.peek() {
                if word == "all" {
                    return Err(SqlError::Unsupported {
                        construct: format!("{} all", op.as_str()),
                        offset: *offset,
                    });
                }
            }
            let tail = self.parse_query()?;
            query.set_tail = Some((op, Box::new(tail)));
        }
        Ok(query)
    }

    fn parse_select_core(&mut self) -> Result<SqlQuery, SqlError> {
        self.expect_keyword(Kw::Select)?;
        let distinct = self.eat_keyword(Kw::Distinct);
        let mut items = vec![self.parse_select_item()?];
        while self.eat_symbol(",") {
            items.push(self.parse_select_item()?);
        }

        self.expect_keyword(Kw::From)?;
        let from = self.parse_from()?;

        let where_clause = if self.eat_keyword(Kw::Where) {
            Some(self.parse_condition()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.eat_keyword(Kw::Group) {
            self.expect_keyword(Kw::By)?;
            group_by.push(self.parse_column_ref()?);
            while self.eat_symbol(",") {
                group_by.push(self.parse_column_ref()?);
            }
        }

        let having = if self.peek_keyword(Kw::Having) {
            if group_by.is_empty() {
                return Err(self.syntax("having clause without group by"));
            }
            self.pos += 1;
            Some(self.parse_condition()?)
        } else {
            None
        };

        let order_by = if self.eat_keyword(Kw::Order) {
            self.expect_keyword(Kw::By)?;
            let mut keys = vec![self.parse_value_expr()?];
            while self.eat_symbol(",") {
                keys.push(self.parse_value_expr()?);
            }
            let direction = if self.eat_keyword(Kw::Asc) {
                Some(OrderDirection::Asc)
            } else if self.eat_keyword(Kw::Desc) {
                Some(OrderDirection::Desc)
            } else {
                None
            };
            Some(OrderSpec { keys, direction })
        } else {
            None
        };

        let limit = if self.eat_keyword(Kw::Limit) {
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokenKind::Num(raw)) => {
                    let n: u64 = raw
                        .parse()
                        .map_err(|_| self.syntax(format!("limit must be a non-negative integer, found '{raw}'")))?;
                    self.pos += 1;
                    Some(n)
                }
                _ => {
                    return Err(
                        self.syntax(format!("expected limit count, found {}", self.found()))
                    )
                }
            }
        } else {
            None
        };

        Ok(SqlQuery {
            select: SelectClause { distinct, items },
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
            set_tail: None,
        })
    }

    fn parse_select_item(&mut self) -> Result<SelectItem, SqlError> {
        let expr = self.parse_value_expr()?;
        if self.peek_keyword(Kw::As) {
            return Err(self.unsupported("column alias in select list"));
        }
        Ok(expr)
    }

    fn parse_value_expr(&mut self) -> Result<ValueExpr, SqlError> {
        let left = self.parse_operand()?;
        let arith = if let Some(op) = self.peek_arith_op() {
            self.pos += 1;
            Some((op, self.parse_operand()?))
        } else {
            None
        };
        Ok(ValueExpr { left, arith })
    }

    fn peek_arith_op(&self) -> Option<ArithOp> {
        match self.peek() {
            Some(Token { kind: TokenKind::Symbol(s), .. }) => match *s {
                "+" => Some(ArithOp::Add),
                "-" => Some(ArithOp::Sub),
                "*" => Some(ArithOp::Mul),
                "/" => Some(ArithOp::Div),
                _ => None,
            },
            _ => None,
        }
    }

    fn peek_aggregate_call(&self) -> Option<AggregateFn> {
        let func = match self.peek() {
            Some(Token { kind: TokenKind::Keyword(kw), .. }) => match kw {
                Kw::Count => AggregateFn::Count,
                Kw::Sum => AggregateFn::Sum,
                Kw::Avg => AggregateFn::Avg,
                Kw::Min => AggregateFn::Min,
                Kw::Max => AggregateFn::Max,
                _ => return None,
            },
            _ => return None,
        };
        match self.peek_at(1) {
            Some(Token { kind: TokenKind::Symbol("("), .. }) => Some(func),
            _ => None,
        }
    }

    fn parse_operand(&mut self) -> Result<Operand, SqlError> {
        if let Some(func) = self.peek_aggregate_call() {
            self.pos += 2; // aggregate name and '('
            let distinct = self.eat_keyword(Kw::Distinct);
            let left = self.parse_agg_column(func)?;
            let arith = if let Some(op) = self.peek_arith_op() {
                self.pos += 1;
                Some((op, self.parse_agg_column(func)?))
            } else {
                None
            };
            self.expect_symbol(")")?;
            return Ok(Operand::Aggregate {
                func,
                distinct,
                arg: AggArg { left, arith },
            });
        }
        Ok(Operand::Column(self.parse_column_ref()?))
    }

    fn parse_agg_column(&mut self, func: AggregateFn) -> Result<ColumnRef, SqlError> {
        if self.peek_symbol("*") {
            if func != AggregateFn::Count {
                return Err(self.syntax(format!("'*' is only valid under count, not {}", func.as_str())));
            }
            self.pos += 1;
            return Ok(ColumnRef::star());
        }
        self.parse_column_ref()
    }

    /// `*`, `name`, or `qualifier.name`. The star column is accepted here and
    /// validated by callers that disallow it.
    fn parse_column_ref(&mut self) -> Result<ColumnRef, SqlError> {
        if self.eat_symbol("*") {
            return Ok(ColumnRef::star());
        }
        let first = self.expect_ident()?;
        if self.eat_symbol(".") {
            if self.peek_symbol("*") {
                return Err(self.unsupported("qualified star column"));
            }
            let column = self.expect_ident()?;
            Ok(ColumnRef {
                table: Some(first),
                column,
            })
        } else {
            Ok(ColumnRef {
                table: None,
                column: first,
            })
        }
    }

    fn parse_from(&mut self) -> Result<FromClause, SqlError> {
        let base = self.parse_table_source()?;
        let mut joins = Vec::new();
        loop {
            if self.eat_keyword(Kw::Join) {
                let source = self.parse_table_source()?;
                let mut conditions = Vec::new();
                if self.eat_keyword(Kw::On) {
                    conditions.push(self.parse_join_condition()?);
                    while self.peek_keyword(Kw::And) {
                        self.pos += 1;
                        conditions.push(self.parse_join_condition()?);
                    }
                }
                joins.push(Join { source, conditions });
            } else if self.eat_symbol(",") {
                // comma-separated sources normalize to condition-free joins
                let source = self.parse_table_source()?;
                joins.push(Join {
                    source,
                    conditions: Vec::new(),
                });
            } else {
                break;
            }
        }
        let from = FromClause { base, joins };
        let mut seen = std::collections::HashSet::new();
        for alias in from.aliases() {
            if !seen.insert(alias.to_string()) {
                return Err(self.syntax(format!("duplicate table alias '{alias}'")));
            }
        }
        Ok(from)
    }

    fn parse_table_source(&mut self) -> Result<TableSource, SqlError> {
        if self.eat_symbol("(") {
            if !self.peek_keyword(Kw::Select) {
                return Err(self.syntax(format!(
                    "expected subquery after '(' in from, found {}",
                    self.found()
                )));
            }
            let query = self.parse_query()?;
            self.expect_symbol(")")?;
            let alias = self.parse_optional_alias()?;
            return Ok(TableSource::Subquery {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.expect_ident()?;
        let alias = self.parse_optional_alias()?;
        Ok(TableSource::Table { name, alias })
    }

    fn parse_optional_alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_keyword(Kw::As) {
            return Ok(Some(self.expect_ident()?));
        }
        // bare alias: an identifier directly after the source
        if let Some(Token { kind: TokenKind::Ident(name), .. }) = self.peek() {
            let name = name.clone();
            self.pos += 1;
            return Ok(Some(name));
        }
        Ok(None)
    }

    fn parse_join_condition(&mut self) -> Result<JoinCondition, SqlError> {
        let left = self.parse_column_ref()?;
        if left.is_star() {
            return Err(self.syntax("'*' is not a join condition column"));
        }
        self.expect_symbol("=")?;
        let right = self.parse_column_ref()?;
        if right.is_star() {
            return Err(self.syntax("'*' is not a join condition column"));
        }
        Ok(JoinCondition { left, right })
    }

    fn parse_condition(&mut self) -> Result<ConditionTree, SqlError> {
        let mut terms = vec![self.parse_condition_term()?];
        while self.eat_keyword(Kw::Or) {
            terms.push(self.parse_condition_term()?);
        }
        if terms.len() == 1 {
            Ok(terms.pop().unwrap())
        } else {
            Ok(ConditionTree::Or(flatten_or(terms)))
        }
    }

    fn parse_condition_term(&mut self) -> Result<ConditionTree, SqlError> {
        let mut atoms = vec![self.parse_condition_atom()?];
        while self.peek_keyword(Kw::And) {
            self.pos += 1;
            atoms.push(self.parse_condition_atom()?);
        }
        if atoms.len() == 1 {
            Ok(atoms.pop().unwrap())
        } else {
            Ok(ConditionTree::And(flatten_and(atoms)))
        }
    }

    fn parse_condition_atom(&mut self) -> Result<ConditionTree, SqlError> {
        if self.peek_symbol("(") {
            // distinguish a boolean group from a subquery comparison operand
            if let Some(Token { kind: TokenKind::Keyword(Kw::Select), .. }) = self.peek_at(1) {
                return Err(self.unsupported("subquery as comparison left operand"));
            }
            self.pos += 1;
            let inner = self.parse_condition()?;
            self.expect_symbol(")")?;
            return Ok(inner);
        }
        Ok(ConditionTree::Leaf(self.parse_comparison()?))
    }

    fn parse_comparison(&mut self) -> Result<Comparison, SqlError> {
        let left = self.parse_value_expr()?;

        let negated = self.eat_keyword(Kw::Not);
        if negated && !(self.peek_keyword(Kw::In) || self.peek_keyword(Kw::Like)) {
            return Err(self.syntax(format!(
                "expected 'in' or 'like' after 'not', found {}",
                self.found()
            )));
        }

        if self.eat_keyword(Kw::Like) {
            let lit = self.parse_literal()?;
            return Ok(Comparison {
                left,
                op: CompareOp::Like,
                negated,
                right: RightOperand::Literal(lit),
            });
        }
        if self.eat_keyword(Kw::In) {
            self.expect_symbol("(")?;
            if !self.peek_keyword(Kw::Select) {
                return Err(self.unsupported("in with a literal value list"));
            }
            let sub = self.parse_query()?;
            self.expect_symbol(")")?;
            return Ok(Comparison {
                left,
                op: CompareOp::In,
                negated,
                right: RightOperand::Subquery(Box::new(sub)),
            });
        }
        if self.eat_keyword(Kw::Between) {
            let low = self.parse_literal()?;
            self.expect_keyword(Kw::And)?;
            let high = self.parse_literal()?;
            return Ok(Comparison {
                left,
                op: CompareOp::Between,
                negated: false,
                right: RightOperand::Bounds(low, high),
            });
        }
        if self.eat_keyword(Kw::Is) {
            if self.eat_keyword(Kw::Not) {
                return Err(self.unsupported("is not"));
            }
            self.expect_keyword(Kw::Null)?;
            return Ok(Comparison {
                left,
                op: CompareOp::Is,
                negated: false,
                right: RightOperand::Literal(Literal::Null),
            });
        }

        let op = match self.peek() {
            Some(Token { kind: TokenKind::Symbol(s), .. }) => match *s {
                "=" => CompareOp::Eq,
                "!=" => CompareOp::Ne,
                "<" => CompareOp::Lt,
                ">" => CompareOp::Gt,
                "<=" => CompareOp::Le,
                ">=" => CompareOp::Ge,
                _ => return Err(self.syntax(format!("expected comparison operator, found '{s}'"))),
            },
            _ => {
                return Err(self.syntax(format!(
                    "expected comparison operator, found {}",
                    self.found()
                )))
            }
        };
        self.pos += 1;

        let right = self.parse_right_operand()?;
        Ok(Comparison {
            left,
            op,
            negated: false,
            right,
        })
    }

    fn parse_right_operand(&mut self) -> Result<RightOperand, SqlError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Symbol("(")) => {
                self.pos += 1;
                if !self.peek_keyword(Kw::Select) {
                    return Err(self.syntax(format!(
                        "expected subquery after '(', found {}",
                        self.found()
                    )));
                }
                let sub = self.parse_query()?;
                self.expect_symbol(")")?;
                Ok(RightOperand::Subquery(Box::new(sub)))
            }
            Some(TokenKind::Ident(_)) => Ok(RightOperand::Column(self.parse_column_ref()?)),
            Some(TokenKind::Keyword(Kw::Count | Kw::Sum | Kw::Avg | Kw::Min | Kw::Max)) => {
                Ok(RightOperand::Column(self.parse_column_ref()?))
            }
            _ => Ok(RightOperand::Literal(self.parse_literal()?)),
        }
    }

    fn parse_literal(&mut self) -> Result<Literal, SqlError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Num(raw)) => {
                self.pos += 1;
                Ok(Literal::Number(raw))
            }
            Some(TokenKind::Str(content)) => {
                self.pos += 1;
                Ok(Literal::Str(content))
            }
            Some(TokenKind::Keyword(Kw::Null)) => {
                self.pos += 1;
                Ok(Literal::Null)
            }
            Some(TokenKind::Symbol("-")) => {
                // negative number literal
                match self.peek_at(1).map(|t| t.kind.clone()) {
                    Some(TokenKind::Num(raw)) => {
                        self.pos += 2;
                        Ok(Literal::Number(format!("-{raw}")))
                    }
                    _ => Err(self.syntax("expected number after '-'")),
                }
            }
            _ => Err(self.syntax(format!("expected literal value, found {}", self.found()))),
        }
    }
}

fn flatten_and(terms: Vec<ConditionTree>) -> Vec<ConditionTree> {
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            ConditionTree::And(children) => out.extend(children),
            other => out.push(other),
        }
    }
    out
}

fn flatten_or(terms: Vec<ConditionTree>) -> Vec<ConditionTree> {
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            ConditionTree::Or(children) => out.extend(children),
            other => out.push(other),
        }
    }
    out
}
