//! Query evaluation over the flat event table.
//!
//! Expressions are first bound to column positions of the joined row, then evaluated per row or
//! per group. Only the event-table columns a query mentions are materialised.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::ast::*;
use super::{QueryError, Result, ResultTable};
use crate::event_log::{parse_timestamp, AttributeValue, EventLog};

type Row = Vec<AttributeValue>;

#[derive(Debug, Clone, PartialEq)]
enum Bound {
    Col(usize),
    Lit(AttributeValue),
    Bin(BinOp, Box<Bound>, Box<Bound>),
    Neg(Box<Bound>),
    Not(Box<Bound>),
    IsNull(Box<Bound>, bool),
    Case(Vec<(Bound, Bound)>, Option<Box<Bound>>),
    Agg(AggFunc, Option<Box<Bound>>),
    Epoch(Box<Bound>),
}

/// Table bindings in scope and (binding, column name) per row position.
#[derive(Default)]
struct Scope {
    bindings: Vec<String>,
    columns: Vec<(String, String)>,
}

struct Relation {
    scope: Scope,
    rows: Vec<Row>,
}

/// Runs `query` against `log`, exposed under `table_name`.
pub fn evaluate(query: &Query, log: &EventLog, table_name: &str) -> Result<ResultTable> {
    let mut ctes: Vec<(String, ResultTable)> = Vec::new();
    for cte in &query.ctes {
        if ctes.iter().any(|(n, _)| n.eq_ignore_ascii_case(&cte.name)) {
            return Err(QueryError::Semantic(format!("CTE {} is defined twice", cte.name)));
        }
        let table = eval_select(&cte.query, log, table_name, &ctes)?;
        ctes.push((cte.name.clone(), table));
    }
    eval_select(&query.body, log, table_name, &ctes)
}

fn column_refs(s: &Select) -> Vec<ColumnRef> {
    let mut refs: Vec<ColumnRef> = s.joins.iter().flat_map(|j| j.on.iter().flat_map(|(l, r)| [l.clone(), r.clone()])).collect();
    let exprs =
        s.items.iter().map(|i| &i.expr).chain(s.filter.iter()).chain(s.group_by.iter()).chain(s.order_by.iter().map(|o| &o.expr));
    for e in exprs {
        e.walk(&mut |x| {
            if let Expr::Column(c) = x {
                refs.push(c.clone());
            }
        });
    }
    refs
}

fn find_name<'a, I: Iterator<Item = &'a String> + Clone>(names: I, wanted: &str) -> Option<usize> {
    names.clone().position(|n| n == wanted).or_else(|| {
        let ci: Vec<usize> = names.enumerate().filter(|(_, n)| n.eq_ignore_ascii_case(wanted)).map(|(i, _)| i).collect();
        (ci.len() == 1).then(|| ci[0])
    })
}

fn load(tref: &TableRef, select: &Select, log: &EventLog, table_name: &str, ctes: &[(String, ResultTable)]) -> Result<Relation> {
    let binding = tref.binding().to_owned();
    if let Some((_, t)) = ctes.iter().rev().find(|(n, _)| n.eq_ignore_ascii_case(&tref.name)) {
        let columns = t.columns.iter().map(|c| (binding.clone(), c.clone())).collect();
        return Ok(Relation { scope: Scope { bindings: vec![binding], columns }, rows: t.rows.clone() });
    }
    if !tref.name.eq_ignore_ascii_case(table_name) {
        return Err(QueryError::UnknownTable(tref.name.clone()));
    }
    let all = log.columns();
    let mut wanted: Vec<usize> = column_refs(select)
        .into_iter()
        .filter(|c| c.table.as_ref().is_none_or(|t| t.eq_ignore_ascii_case(&binding)))
        .filter_map(|c| find_name(all.iter(), &c.name))
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let names: Vec<&str> = wanted.iter().map(|&i| all[i].as_str()).collect();
    let rows = log.events().map(|(case, event)| names.iter().map(|n| log.value(case, event, n)).collect()).collect();
    let columns = names.iter().map(|n| (binding.clone(), n.to_string())).collect();
    Ok(Relation { scope: Scope { bindings: vec![binding], columns }, rows })
}

fn resolve(scope: &Scope, c: &ColumnRef) -> Result<usize> {
    let columns = &scope.columns;
    let candidates: Vec<usize> =
        (0..columns.len()).filter(|&i| c.table.as_ref().is_none_or(|t| columns[i].0.eq_ignore_ascii_case(t))).collect();
    if let Some(t) = &c.table {
        if !scope.bindings.iter().any(|b| b.eq_ignore_ascii_case(t)) {
            return Err(QueryError::UnknownTable(t.clone()));
        }
    }
    let exact: Vec<usize> = candidates.iter().copied().filter(|&i| columns[i].1 == c.name).collect();
    let hits = if exact.is_empty() {
        candidates.into_iter().filter(|&i| columns[i].1.eq_ignore_ascii_case(&c.name)).collect()
    } else {
        exact
    };
    match hits.len() {
        1 => Ok(hits[0]),
        0 => Err(QueryError::UnknownColumn(c.to_string())),
        _ => Err(QueryError::AmbiguousColumn(c.to_string())),
    }
}

fn literal(l: &Literal) -> AttributeValue {
    match l {
        Literal::Int(i) => AttributeValue::Int(*i),
        Literal::Real(r) => AttributeValue::Real(*r),
        Literal::Text(s) => AttributeValue::Text(s.clone()),
        Literal::Bool(b) => AttributeValue::Bool(*b),
        Literal::Null => AttributeValue::Missing,
    }
}

fn bind(e: &Expr, columns: &Scope) -> Result<Bound> {
    let b = |x: &Expr| bind(x, columns).map(Box::new);
    Ok(match e {
        Expr::Column(c) => Bound::Col(resolve(columns, c)?),
        Expr::Literal(l) => Bound::Lit(literal(l)),
        Expr::Binary { op, left, right } => Bound::Bin(*op, b(left)?, b(right)?),
        Expr::Neg(x) => Bound::Neg(b(x)?),
        Expr::Not(x) => Bound::Not(b(x)?),
        Expr::IsNull { expr, negated } => Bound::IsNull(b(expr)?, *negated),
        Expr::Case { branches, otherwise } => Bound::Case(
            branches.iter().map(|(w, t)| Ok((bind(w, columns)?, bind(t, columns)?))).collect::<Result<_>>()?,
            otherwise.as_deref().map(b).transpose()?,
        ),
        Expr::Aggregate { func, arg } => Bound::Agg(*func, arg.as_deref().map(b).transpose()?),
        Expr::Epoch(x) => Bound::Epoch(b(x)?),
    })
}

fn check_grouped(b: &Bound, keys: &[Bound], scope: &Scope) -> Result<()> {
    if keys.contains(b) {
        return Ok(());
    }
    let rec = |x: &Bound| check_grouped(x, keys, scope);
    match b {
        Bound::Col(i) => Err(QueryError::Semantic(format!(
            "column {} must appear in GROUP BY or be used in an aggregate function",
            Ident(&scope.columns[*i].1)
        ))),
        Bound::Lit(_) | Bound::Agg(..) => Ok(()),
        Bound::Bin(_, l, r) => rec(l).and(rec(r)),
        Bound::Neg(x) | Bound::Not(x) | Bound::IsNull(x, _) | Bound::Epoch(x) => rec(x),
        Bound::Case(branches, otherwise) => {
            for (w, t) in branches {
                rec(w)?;
                rec(t)?;
            }
            otherwise.as_deref().map_or(Ok(()), rec)
        }
    }
}

fn join(left: Relation, right: Relation, on: &[(ColumnRef, ColumnRef)]) -> Result<Relation> {
    for b in &right.scope.bindings {
        if left.scope.bindings.iter().any(|lb| lb.eq_ignore_ascii_case(b)) {
            return Err(QueryError::Semantic(format!("table name {b} is used more than once; give it an alias")));
        }
    }
    let split = left.scope.columns.len();
    let mut scope = left.scope;
    scope.bindings.extend(right.scope.bindings);
    scope.columns.extend(right.scope.columns);
    let mut lkeys = Vec::new();
    let mut rkeys = Vec::new();
    for (a, b) in on {
        let (ia, ib) = (resolve(&scope, a)?, resolve(&scope, b)?);
        match (ia < split, ib < split) {
            (true, false) => {
                lkeys.push(ia);
                rkeys.push(ib - split);
            }
            (false, true) => {
                lkeys.push(ib);
                rkeys.push(ia - split);
            }
            _ => {
                return Err(QueryError::Semantic(format!("join condition {a} = {b} must compare columns of both joined tables")))
            }
        }
    }
    let mut index: HashMap<Vec<KeyPart>, Vec<usize>> = HashMap::new();
    for (i, r) in right.rows.iter().enumerate() {
        if rkeys.iter().any(|&k| r[k].is_missing()) {
            continue;
        }
        index.entry(rkeys.iter().map(|&k| KeyPart::of(&r[k])).collect()).or_default().push(i);
    }
    let mut rows = Vec::new();
    for l in &left.rows {
        if lkeys.iter().any(|&k| l[k].is_missing()) {
            continue;
        }
        let key: Vec<KeyPart> = lkeys.iter().map(|&k| KeyPart::of(&l[k])).collect();
        for &ri in index.get(&key).into_iter().flatten() {
            let mut row = l.clone();
            row.extend(right.rows[ri].iter().cloned());
            rows.push(row);
        }
    }
    Ok(Relation { scope, rows })
}

enum OrderKey {
    Output(usize),
    Computed(Bound),
}

fn output_name(item: &SelectItem) -> String {
    match (&item.alias, &item.expr) {
        (Some(a), _) => a.clone(),
        (None, Expr::Column(c)) => c.name.clone(),
        (None, e) => e.to_string(),
    }
}

fn eval_select(s: &Select, log: &EventLog, table_name: &str, ctes: &[(String, ResultTable)]) -> Result<ResultTable> {
    let mut rel = load(&s.from, s, log, table_name, ctes)?;
    for j in &s.joins {
        let right = load(&j.table, s, log, table_name, ctes)?;
        rel = join(rel, right, &j.on)?;
    }
    let cols = &rel.scope;

    let mut rows: Vec<&Row> = Vec::with_capacity(rel.rows.len());
    if let Some(w) = &s.filter {
        let cond = bind(w, cols)?;
        for r in &rel.rows {
            match eval(&cond, Ctx::Row(r))? {
                AttributeValue::Bool(true) => rows.push(r),
                AttributeValue::Bool(false) | AttributeValue::Missing => {}
                other => return Err(QueryError::Type(format!("WHERE condition must be boolean, got {}", kind_name(&other)))),
            }
        }
    } else {
        rows.extend(rel.rows.iter());
    }

    let names: Vec<String> = s.items.iter().map(output_name).collect();
    let items: Vec<Bound> = s.items.iter().map(|i| bind(&i.expr, cols)).collect::<Result<_>>()?;
    let grouped = !s.group_by.is_empty()
        || s.items.iter().any(|i| i.expr.contains_aggregate())
        || s.order_by.iter().any(|o| o.expr.contains_aggregate());

    let mut keys = Vec::with_capacity(s.group_by.len());
    for g in &s.group_by {
        keys.push(bind_group_key(g, s, cols)?);
    }

    let mut order = Vec::with_capacity(s.order_by.len());
    for o in &s.order_by {
        let key = match &o.expr {
            Expr::Literal(Literal::Int(k)) => {
                if *k < 1 || *k as usize > names.len() {
                    return Err(QueryError::Semantic(format!("ORDER BY position {k} is not in the select list")));
                }
                OrderKey::Output(*k as usize - 1)
            }
            Expr::Column(ColumnRef { table: None, name }) if find_name(names.iter(), name).is_some() => {
                OrderKey::Output(find_name(names.iter(), name).unwrap())
            }
            e => OrderKey::Computed(bind(e, cols)?),
        };
        order.push(key);
    }

    // Each output row with its sort keys.
    let mut out: Vec<(Row, Vec<AttributeValue>)> = Vec::new();
    let computed = |ctx: Ctx<'_>, projected: &Row| -> Result<Vec<AttributeValue>> {
        order
            .iter()
            .map(|k| match k {
                OrderKey::Output(i) => Ok(projected[*i].clone()),
                OrderKey::Computed(b) => eval(b, ctx),
            })
            .collect()
    };
    if grouped {
        for b in items.iter().chain(order.iter().filter_map(|k| match k {
            OrderKey::Computed(b) => Some(b),
            OrderKey::Output(_) => None,
        })) {
            check_grouped(b, &keys, cols)?;
        }
        let mut groups: Vec<(Vec<AttributeValue>, Vec<&Row>)> = Vec::new();
        if keys.is_empty() {
            groups.push((Vec::new(), rows));
        } else {
            let mut index: HashMap<Vec<KeyPart>, usize> = HashMap::new();
            for r in rows {
                let values: Vec<AttributeValue> = keys.iter().map(|k| eval(k, Ctx::Row(r))).collect::<Result<_>>()?;
                let id = values.iter().map(KeyPart::of).collect();
                let slot = *index.entry(id).or_insert_with(|| {
                    groups.push((values, Vec::new()));
                    groups.len() - 1
                });
                groups[slot].1.push(r);
            }
            groups.sort_by(|a, b| cmp_rows(&a.0, &b.0));
        }
        for (_, members) in &groups {
            let ctx = Ctx::Group(members);
            let projected: Row = items.iter().map(|b| eval(b, ctx)).collect::<Result<_>>()?;
            let sort = computed(ctx, &projected)?;
            out.push((projected, sort));
        }
    } else {
        for r in rows {
            let ctx = Ctx::Row(r);
            let projected: Row = items.iter().map(|b| eval(b, ctx)).collect::<Result<_>>()?;
            let sort = computed(ctx, &projected)?;
            out.push((projected, sort));
        }
    }

    if !s.order_by.is_empty() {
        out.sort_by(|a, b| {
            for (i, o) in s.order_by.iter().enumerate() {
                let ord = order_cmp(&a.1[i], &b.1[i], o.descending, o.nulls_first.unwrap_or(false));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }
    let mut rows: Vec<Row> = out.into_iter().map(|(r, _)| r).collect();
    if let Some(n) = s.limit {
        rows.truncate(usize::try_from(n).unwrap_or(usize::MAX));
    }
    Ok(ResultTable { columns: names, rows })
}

fn bind_group_key(g: &Expr, s: &Select, cols: &Scope) -> Result<Bound> {
    let from_item = |item: &SelectItem| {
        if item.expr.contains_aggregate() {
            return Err(QueryError::Semantic(format!("cannot group by aggregate {}", item.expr)));
        }
        bind(&item.expr, cols)
    };
    match g {
        Expr::Literal(Literal::Int(k)) => {
            if *k < 1 || *k as usize > s.items.len() {
                return Err(QueryError::Semantic(format!("GROUP BY position {k} is not in the select list")));
            }
            from_item(&s.items[*k as usize - 1])
        }
        Expr::Column(c @ ColumnRef { table: None, name }) => match resolve(cols, c) {
            Ok(i) => Ok(Bound::Col(i)),
            Err(QueryError::UnknownColumn(_)) => {
                let aliases: Vec<String> = s.items.iter().map(|i| i.alias.clone().unwrap_or_default()).collect();
                match find_name(aliases.iter(), name) {
                    Some(i) => from_item(&s.items[i]),
                    None => Err(QueryError::UnknownColumn(c.to_string())),
                }
            }
            Err(e) => Err(e),
        },
        e => bind(e, cols),
    }
}

/// Lexicographic comparison with missing values last.
fn cmp_rows(a: &[AttributeValue], b: &[AttributeValue]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
}

fn order_cmp(a: &AttributeValue, b: &AttributeValue, descending: bool, nulls_first: bool) -> Ordering {
    match (a.is_missing(), b.is_missing()) {
        (true, true) => Ordering::Equal,
        (true, false) => {
            if nulls_first {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        (false, true) => {
            if nulls_first {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        (false, false) => {
            let o = a.total_cmp(b);
            if descending {
                o.reverse()
            } else {
                o
            }
        }
    }
}

/// Hashable grouping and join key. Integral reals key like integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum KeyPart {
    Missing,
    Bool(bool),
    Int(i64),
    Real(u64),
    Text(String),
    Timestamp(i64),
}

impl KeyPart {
    pub(crate) fn of(v: &AttributeValue) -> Self {
        match v {
            AttributeValue::Missing => KeyPart::Missing,
            AttributeValue::Bool(b) => KeyPart::Bool(*b),
            AttributeValue::Int(i) => KeyPart::Int(*i),
            AttributeValue::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e18 => KeyPart::Int(*r as i64),
            AttributeValue::Real(r) if r.is_nan() => KeyPart::Real(f64::NAN.to_bits()),
            AttributeValue::Real(r) => KeyPart::Real(r.to_bits()),
            AttributeValue::Text(s) => KeyPart::Text(s.clone()),
            AttributeValue::Timestamp(t) => KeyPart::Timestamp(t.timestamp_micros()),
        }
    }
}

#[derive(Clone, Copy)]
enum Ctx<'a> {
    Row(&'a [AttributeValue]),
    /// Column references read the first member; the binder guarantees they are group keys.
    Group(&'a [&'a Row]),
}

pub(crate) fn kind_name(v: &AttributeValue) -> &'static str {
    match v {
        AttributeValue::Text(_) => "text",
        AttributeValue::Int(_) => "integer",
        AttributeValue::Real(_) => "real",
        AttributeValue::Timestamp(_) => "timestamp",
        AttributeValue::Bool(_) => "boolean",
        AttributeValue::Missing => "NULL",
    }
}

fn type_error(what: String) -> QueryError {
    QueryError::Type(what)
}

fn eval(b: &Bound, ctx: Ctx<'_>) -> Result<AttributeValue> {
    use AttributeValue as V;
    Ok(match b {
        Bound::Col(i) => match ctx {
            Ctx::Row(r) => r[*i].clone(),
            Ctx::Group(rows) => rows.first().map_or(V::Missing, |r| r[*i].clone()),
        },
        Bound::Lit(v) => v.clone(),
        Bound::Bin(op, l, r) => binary(*op, eval(l, ctx)?, eval(r, ctx)?)?,
        Bound::Neg(x) => match eval(x, ctx)? {
            V::Int(i) => V::Int(i.checked_neg().ok_or_else(|| type_error("integer overflow".into()))?),
            V::Real(r) => V::Real(-r),
            V::Missing => V::Missing,
            other => return Err(type_error(format!("cannot negate {}", kind_name(&other)))),
        },
        Bound::Not(x) => match eval(x, ctx)? {
            V::Bool(v) => V::Bool(!v),
            V::Missing => V::Missing,
            other => return Err(type_error(format!("NOT expects a boolean, got {}", kind_name(&other)))),
        },
        Bound::IsNull(x, negated) => V::Bool(eval(x, ctx)?.is_missing() != *negated),
        Bound::Case(branches, otherwise) => {
            for (w, t) in branches {
                match eval(w, ctx)? {
                    V::Bool(true) => return eval(t, ctx),
                    V::Bool(false) | V::Missing => {}
                    other => return Err(type_error(format!("CASE WHEN condition must be boolean, got {}", kind_name(&other)))),
                }
            }
            match otherwise {
                Some(o) => eval(o, ctx)?,
                None => V::Missing,
            }
        }
        Bound::Agg(func, arg) => {
            let Ctx::Group(rows) = ctx else {
                return Err(QueryError::Semantic(format!("aggregate {} used outside a grouped query", func.name())));
            };
            let values = match arg {
                None => return Ok(V::Int(rows.len() as i64)),
                Some(a) => rows.iter().map(|r| eval(a, Ctx::Row(r))).collect::<Result<Vec<_>>>()?,
            };
            aggregate(*func, values.into_iter().filter(|v| !v.is_missing()).collect())?
        }
        Bound::Epoch(x) => match eval(x, ctx)? {
            V::Timestamp(t) => V::Real(t.timestamp_micros() as f64 / 1e6),
            V::Missing => V::Missing,
            other => return Err(type_error(format!("EPOCH expects a timestamp, got {}", kind_name(&other)))),
        },
    })
}

/// Three-valued comparison; `None` when either side is missing.
pub(crate) fn compare(a: &AttributeValue, b: &AttributeValue) -> Result<Option<Ordering>> {
    use AttributeValue as V;
    Ok(match (a, b) {
        (V::Missing, _) | (_, V::Missing) => None,
        (V::Int(x), V::Int(y)) => Some(x.cmp(y)),
        (V::Int(_) | V::Real(_), V::Int(_) | V::Real(_)) => a.as_f64().unwrap().partial_cmp(&b.as_f64().unwrap()),
        (V::Text(x), V::Text(y)) => Some(x.cmp(y)),
        (V::Bool(x), V::Bool(y)) => Some(x.cmp(y)),
        (V::Timestamp(x), V::Timestamp(y)) => Some(x.cmp(y)),
        (V::Timestamp(x), V::Text(s)) => Some(x.cmp(&text_timestamp(s)?)),
        (V::Text(s), V::Timestamp(y)) => Some(text_timestamp(s)?.cmp(y)),
        _ => return Err(type_error(format!("cannot compare {} with {}", kind_name(a), kind_name(b)))),
    })
}

fn text_timestamp(s: &str) -> Result<crate::event_log::Timestamp> {
    parse_timestamp(s, true).ok_or_else(|| type_error(format!("cannot convert '{s}' to a timestamp")))
}

fn binary(op: BinOp, a: AttributeValue, b: AttributeValue) -> Result<AttributeValue> {
    use AttributeValue as V;
    match op {
        BinOp::And | BinOp::Or => {
            let truth = |v: &V| match v {
                V::Bool(x) => Ok(Some(*x)),
                V::Missing => Ok(None),
                other => Err(type_error(format!("{} expects booleans, got {}", op.symbol(), kind_name(other)))),
            };
            let (x, y) = (truth(&a)?, truth(&b)?);
            let out = if op == BinOp::And {
                match (x, y) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                }
            } else {
                match (x, y) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                }
            };
            Ok(out.map_or(V::Missing, V::Bool))
        }
        _ if op.is_comparison() => Ok(match compare(&a, &b)? {
            None => V::Missing,
            Some(o) => V::Bool(match op {
                BinOp::Eq => o == Ordering::Equal,
                BinOp::NotEq => o != Ordering::Equal,
                BinOp::Lt => o == Ordering::Less,
                BinOp::LtEq => o != Ordering::Greater,
                BinOp::Gt => o == Ordering::Greater,
                _ => o != Ordering::Less,
            }),
        }),
        _ => arithmetic(op, a, b),
    }
}

fn arithmetic(op: BinOp, a: AttributeValue, b: AttributeValue) -> Result<AttributeValue> {
    use AttributeValue as V;
    let overflow = || type_error("integer overflow".into());
    match (&a, &b) {
        (V::Missing, _) | (_, V::Missing) => Ok(V::Missing),
        (V::Int(x), V::Int(y)) => Ok(match op {
            BinOp::Add => V::Int(x.checked_add(*y).ok_or_else(overflow)?),
            BinOp::Sub => V::Int(x.checked_sub(*y).ok_or_else(overflow)?),
            BinOp::Mul => V::Int(x.checked_mul(*y).ok_or_else(overflow)?),
            _ if *y == 0 => V::Missing,
            _ => V::Real(*x as f64 / *y as f64),
        }),
        (V::Int(_) | V::Real(_), V::Int(_) | V::Real(_)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            Ok(match op {
                BinOp::Add => V::Real(x + y),
                BinOp::Sub => V::Real(x - y),
                BinOp::Mul => V::Real(x * y),
                _ if y == 0.0 => V::Missing,
                _ => V::Real(x / y),
            })
        }
        _ => Err(type_error(format!("cannot apply {} to {} and {}", op.symbol(), kind_name(&a), kind_name(&b)))),
    }
}

fn aggregate(func: AggFunc, values: Vec<AttributeValue>) -> Result<AttributeValue> {
    use AttributeValue as V;
    if func == AggFunc::Count {
        return Ok(V::Int(values.len() as i64));
    }
    if values.is_empty() {
        return Ok(V::Missing);
    }
    match func {
        AggFunc::Sum | AggFunc::Avg => {
            if let Some(bad) = values.iter().find(|v| !matches!(v, V::Int(_) | V::Real(_))) {
                return Err(type_error(format!("{} expects numeric values, got {}", func.name(), kind_name(bad))));
            }
            let n = values.len();
            if values.iter().all(|v| matches!(v, V::Int(_))) {
                let total: i128 = values.iter().map(|v| if let V::Int(i) = v { *i as i128 } else { 0 }).sum();
                return Ok(if func == AggFunc::Sum {
                    V::Int(i64::try_from(total).map_err(|_| type_error("integer overflow in SUM".into()))?)
                } else {
                    V::Real(total as f64 / n as f64)
                });
            }
            let total: f64 = values.iter().map(|v| v.as_f64().unwrap()).sum();
            Ok(V::Real(if func == AggFunc::Sum { total } else { total / n as f64 }))
        }
        AggFunc::Min | AggFunc::Max => {
            let mut best = values[0].clone();
            for v in &values[1..] {
                let o = compare(v, &best)?.unwrap_or(Ordering::Equal);
                if (func == AggFunc::Min && o == Ordering::Less) || (func == AggFunc::Max && o == Ordering::Greater) {
                    best = v.clone();
                }
            }
            Ok(best)
        }
        AggFunc::Count => unreachable!(),
    }
}
