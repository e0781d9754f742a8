use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{QueryError, Result};

/// Parses one statement of the supported SELECT subset.
pub fn parse_sql(text: &str) -> Result<Query> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let query = p.query()?;
    if p.peek().is_sym(";") {
        p.pos += 1;
    }
    let t = p.peek();
    if !matches!(t.tok, Tok::Eof) {
        if p.tokens[p.pos - 1].is_sym(";") {
            return Err(p.unsupported_at("multiple statements", p.pos));
        }
        for (kw, what) in [
            ("UNION", "set operation (UNION)"),
            ("INTERSECT", "set operation (INTERSECT)"),
            ("EXCEPT", "set operation (EXCEPT)"),
            ("HAVING", "HAVING"),
            ("OFFSET", "OFFSET"),
            ("QUALIFY", "QUALIFY"),
            ("WINDOW", "window function"),
        ] {
            if t.is_keyword(kw) {
                return Err(p.unsupported_at(what, p.pos));
            }
        }
        return Err(p.syntax("unexpected token after end of query"));
    }
    validate_query(&query)?;
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    #[allow(dead_code)]
    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: &str) -> QueryError {
        let t = self.peek();
        QueryError::Syntax { line: t.line, column: t.column, token: t.text.clone(), message: message.to_owned() }
    }

    fn unsupported_at(&self, construct: &str, pos: usize) -> QueryError {
        let t = &self.tokens[pos.min(self.tokens.len() - 1)];
        QueryError::Unsupported { construct: construct.to_owned(), line: t.line, column: t.column }
    }

    fn unsupported(&self, construct: &str) -> QueryError {
        self.unsupported_at(construct, self.pos)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek().is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.peek().is_sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected {kw}")))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{sym}'")))
        }
    }

    /// Any identifier usable as a name: quoted, or bare and not reserved.
    fn ident(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident { text, quoted } if *quoted || !is_reserved(text) => {
                let text = text.clone();
                self.pos += 1;
                Ok(text)
            }
            _ => Err(self.syntax(&format!("expected {what}"))),
        }
    }

    fn is_name(&self) -> bool {
        matches!(&self.peek().tok, Tok::Ident { text, quoted } if *quoted || !is_reserved(text))
    }

    fn query(&mut self) -> Result<Query> {
        let mut ctes = Vec::new();
        if self.eat_keyword("WITH") {
            if self.peek().is_keyword("RECURSIVE") {
                return Err(self.unsupported("recursive CTE"));
            }
            loop {
                let name = self.ident("CTE name")?;
                if self.peek().is_sym("(") {
                    return Err(self.unsupported("CTE column list"));
                }
                self.expect_keyword("AS")?;
                if self.peek().is_keyword("MATERIALIZED") || self.peek().is_keyword("NOT") {
                    return Err(self.unsupported("CTE materialization hint"));
                }
                self.expect_sym("(")?;
                if self.peek().is_keyword("WITH") {
                    return Err(self.unsupported("nested WITH"));
                }
                let query = self.select()?;
                if !self.peek().is_sym(")") {
                    if self.peek().is_keyword("UNION") || self.peek().is_keyword("INTERSECT") || self.peek().is_keyword("EXCEPT")
                    {
                        return Err(self.unsupported("set operation"));
                    }
                    if self.peek().is_keyword("HAVING") {
                        return Err(self.unsupported("HAVING"));
                    }
                }
                self.expect_sym(")")?;
                ctes.push(Cte { name, query });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let body = self.select()?;
        Ok(Query { ctes, body })
    }

    fn select(&mut self) -> Result<Select> {
        self.expect_keyword("SELECT")?;
        if self.peek().is_keyword("DISTINCT") {
            return Err(self.unsupported("DISTINCT"));
        }
        self.eat_keyword("ALL");
        let mut items = Vec::new();
        loop {
            if self.peek().is_sym("*") {
                return Err(self.unsupported("SELECT *"));
            }
            let expr = self.expr()?;
            if self.peek().is_keyword("OVER") {
                return Err(self.unsupported("window function"));
            }
            let alias = if self.eat_keyword("AS") || self.is_name() { Some(self.ident("alias")?) } else { None };
            items.push(SelectItem { expr, alias });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_keyword("FROM")?;
        let from = self.table_ref()?;
        if self.peek().is_sym(",") {
            return Err(self.unsupported("comma join (implicit cross join)"));
        }
        let mut joins = Vec::new();
        loop {
            for (kw, what) in [
                ("LEFT", "LEFT JOIN"),
                ("RIGHT", "RIGHT JOIN"),
                ("FULL", "FULL JOIN"),
                ("CROSS", "CROSS JOIN"),
                ("NATURAL", "NATURAL JOIN"),
                ("OUTER", "OUTER JOIN"),
            ] {
                if self.peek().is_keyword(kw) {
                    return Err(self.unsupported(what));
                }
            }
            if self.eat_keyword("INNER") {
                self.expect_keyword("JOIN")?;
            } else if !self.eat_keyword("JOIN") {
                break;
            }
            let table = self.table_ref()?;
            if self.peek().is_keyword("USING") {
                return Err(self.unsupported("JOIN ... USING"));
            }
            self.expect_keyword("ON")?;
            let cond_pos = self.pos;
            let cond = self.expr()?;
            let mut on = Vec::new();
            if !equi_pairs(&cond, &mut on) {
                return Err(self.unsupported_at("non-equality join condition", cond_pos));
            }
            joins.push(Join { table, on });
        }
        let filter = if self.eat_keyword("WHERE") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            if self.peek().is_keyword("ALL") {
                return Err(self.unsupported("GROUP BY ALL"));
            }
            loop {
                group_by.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        if self.peek().is_keyword("HAVING") {
            return Err(self.unsupported("HAVING"));
        }
        let mut order_by = Vec::new();
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_keyword("DESC") {
                    true
                } else {
                    self.eat_keyword("ASC");
                    false
                };
                let nulls_first = if self.eat_keyword("NULLS") {
                    if self.eat_keyword("FIRST") {
                        Some(true)
                    } else if self.eat_keyword("LAST") {
                        Some(false)
                    } else {
                        return Err(self.syntax("expected FIRST or LAST"));
                    }
                } else {
                    None
                };
                order_by.push(OrderItem { expr, descending, nulls_first });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_keyword("LIMIT") {
            match self.peek().tok {
                Tok::Int(n) if n >= 0 => {
                    self.pos += 1;
                    Some(n as u64)
                }
                _ => return Err(self.syntax("expected a non-negative integer after LIMIT")),
            }
        } else {
            None
        };
        if self.peek().is_keyword("OFFSET") {
            return Err(self.unsupported("OFFSET"));
        }
        Ok(Select { items, from, joins, filter, group_by, order_by, limit })
    }

    fn table_ref(&mut self) -> Result<TableRef> {
        if self.peek().is_sym("(") {
            return Err(self.unsupported("subquery in FROM"));
        }
        let name = self.ident("table name")?;
        if self.peek().is_sym(".") {
            return Err(self.unsupported("schema-qualified table name"));
        }
        if self.peek().is_sym("(") {
            return Err(self.unsupported("table function"));
        }
        let alias = if self.eat_keyword("AS") || self.is_name() { Some(self.ident("table alias")?) } else { None };
        Ok(TableRef { name, alias })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut left = self.and_expr()?;
        while self.eat_keyword("OR") {
            let right = self.and_expr()?;
            left = Expr::binary(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut left = self.not_expr()?;
        while self.eat_keyword("AND") {
            let right = self.not_expr()?;
            left = Expr::binary(BinOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_keyword("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr> {
        let mut left = self.additive()?;
        loop {
            if self.eat_keyword("IS") {
                let negated = self.eat_keyword("NOT");
                if self.peek().is_keyword("DISTINCT") {
                    return Err(self.unsupported("IS DISTINCT FROM"));
                }
                self.expect_keyword("NULL")?;
                left = Expr::IsNull { expr: Box::new(left), negated };
                continue;
            }
            let negation = usize::from(self.peek().is_keyword("NOT"));
            for (kw, what) in [("IN", "IN list"), ("LIKE", "LIKE"), ("ILIKE", "ILIKE"), ("BETWEEN", "BETWEEN")] {
                if self.peek_at(negation).is_keyword(kw) {
                    return Err(self.unsupported_at(what, self.pos + negation));
                }
            }
            let op = match &self.peek().tok {
                Tok::Sym("=") => BinOp::Eq,
                Tok::Sym("<>") | Tok::Sym("!=") => BinOp::NotEq,
                Tok::Sym("<") => BinOp::Lt,
                Tok::Sym("<=") => BinOp::LtEq,
                Tok::Sym(">") => BinOp::Gt,
                Tok::Sym(">=") => BinOp::GtEq,
                _ => break,
            };
            self.pos += 1;
            let right = self.additive()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else if self.peek().is_sym("||") {
                return Err(self.unsupported("string concatenation (||)"));
            } else {
                break;
            };
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.peek().is_sym("%") {
                return Err(self.unsupported("modulo operator (%)"));
            } else {
                break;
            };
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        let e = self.primary()?;
        if self.peek().is_sym("::") {
            return Err(self.unsupported("type cast (::)"));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Int(i) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Int(*i)))
            }
            Tok::Real(r) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Real(*r)))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Text(s.clone())))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                if self.peek().is_keyword("SELECT") || self.peek().is_keyword("WITH") {
                    return Err(self.unsupported("subquery"));
                }
                let e = self.expr()?;
                if self.peek().is_sym(",") {
                    return Err(self.unsupported("row value"));
                }
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident { text, quoted: false } if is_reserved(text) => {
                let upper = text.to_ascii_uppercase();
                match upper.as_str() {
                    "NULL" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Null))
                    }
                    "TRUE" | "FALSE" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Bool(upper == "TRUE")))
                    }
                    "CASE" => {
                        self.pos += 1;
                        self.case_expr()
                    }
                    "EXISTS" => Err(self.unsupported("subquery")),
                    "CAST" => Err(self.unsupported("type cast (CAST)")),
                    _ => Err(self.syntax("expected an expression")),
                }
            }
            Tok::Ident { text, quoted } => {
                let text = text.clone();
                self.pos += 1;
                if !quoted && self.peek().is_sym("(") {
                    return self.call(&text);
                }
                if self.eat_sym(".") {
                    if self.peek().is_sym("*") {
                        return Err(self.unsupported("SELECT *"));
                    }
                    let name = self.ident("column name")?;
                    return Ok(Expr::Column(ColumnRef { table: Some(text), name }));
                }
                Ok(Expr::Column(ColumnRef { table: None, name: text }))
            }
            _ => Err(self.syntax("expected an expression")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let name_pos = self.pos - 1;
        self.expect_sym("(")?;
        let upper = name.to_ascii_uppercase();
        let expr = if let Some(func) = AggFunc::from_name(&upper) {
            if self.peek().is_keyword("DISTINCT") {
                return Err(self.unsupported(&format!("{upper}(DISTINCT ...)")));
            }
            let arg = if func == AggFunc::Count && self.eat_sym("*") { None } else { Some(Box::new(self.expr()?)) };
            if self.peek().is_keyword("ORDER") {
                return Err(self.unsupported("ordered aggregate"));
            }
            self.expect_sym(")")?;
            Expr::Aggregate { func, arg }
        } else if upper == "EPOCH" {
            let arg = self.expr()?;
            self.expect_sym(")")?;
            Expr::Epoch(Box::new(arg))
        } else {
            return Err(self.unsupported_at(&format!("function {upper}"), name_pos));
        };
        if self.peek().is_keyword("OVER") {
            return Err(self.unsupported("window function"));
        }
        if self.peek().is_keyword("FILTER") {
            return Err(self.unsupported("aggregate FILTER"));
        }
        Ok(expr)
    }

    fn case_expr(&mut self) -> Result<Expr> {
        let operand = if self.peek().is_keyword("WHEN") { None } else { Some(self.expr()?) };
        let mut branches = Vec::new();
        while self.eat_keyword("WHEN") {
            let mut cond = self.expr()?;
            if let Some(op) = &operand {
                cond = Expr::binary(BinOp::Eq, op.clone(), cond);
            }
            self.expect_keyword("THEN")?;
            branches.push((cond, self.expr()?));
        }
        if branches.is_empty() {
            return Err(self.syntax("expected WHEN"));
        }
        let otherwise = if self.eat_keyword("ELSE") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_keyword("END")?;
        Ok(Expr::Case { branches, otherwise })
    }
}

fn equi_pairs(e: &Expr, out: &mut Vec<(ColumnRef, ColumnRef)>) -> bool {
    match e {
        Expr::Binary { op: BinOp::And, left, right } => equi_pairs(left, out) && equi_pairs(right, out),
        Expr::Binary { op: BinOp::Eq, left, right } => match (&**left, &**right) {
            (Expr::Column(l), Expr::Column(r)) => {
                out.push((l.clone(), r.clone()));
                true
            }
            _ => false,
        },
        _ => false,
    }
}

fn semantic(message: impl Into<String>) -> QueryError {
    QueryError::Semantic(message.into())
}

fn no_aggregate(e: &Expr, clause: &str) -> Result<()> {
    if e.contains_aggregate() {
        return Err(semantic(format!("aggregate functions are not allowed in {clause}")));
    }
    Ok(())
}

fn no_nested_aggregate(e: &Expr) -> Result<()> {
    let mut nested = false;
    e.walk(&mut |x| {
        if let Expr::Aggregate { arg: Some(a), .. } = x {
            nested |= a.contains_aggregate();
        }
    });
    if nested {
        return Err(semantic("aggregate function calls cannot be nested"));
    }
    Ok(())
}

fn validate_select(s: &Select) -> Result<()> {
    for item in &s.items {
        no_nested_aggregate(&item.expr)?;
    }
    for o in &s.order_by {
        no_nested_aggregate(&o.expr)?;
    }
    if let Some(w) = &s.filter {
        no_aggregate(w, "WHERE")?;
    }
    for g in &s.group_by {
        no_aggregate(g, "GROUP BY")?;
    }
    Ok(())
}

fn validate_query(q: &Query) -> Result<()> {
    for c in &q.ctes {
        validate_select(&c.query)?;
    }
    validate_select(&q.body)
}
