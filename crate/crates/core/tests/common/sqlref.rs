//! A naive reference evaluator for the SQL subset, driven by its own query description
//! rather than the engine's AST, plus a random generator of such queries.
//!
//! Joins are nested loops, groups are found by scanning for an equal key, and every
//! expression is interpreted directly over name-addressed rows.

use std::cmp::Ordering;

use promptmine::event_log::Timestamp;
use promptmine::{AttributeValue as V, EventLog};
use rand::seq::IndexedRandom;
use rand::Rng;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::logs::{close, random_log};
use promptmine::query_engine::run_sql;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggKind {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub enum E {
    Col(String),
    Lit(V),
    Bin(&'static str, Box<E>, Box<E>),
    Not(Box<E>),
    IsNull(Box<E>, bool),
    Case(Box<E>, Box<E>, Box<E>),
    Epoch(Box<E>),
    /// `None` argument is `COUNT(*)`.
    Agg(AggKind, Option<Box<E>>),
}

#[derive(Debug, Clone)]
pub struct Item {
    pub expr: E,
    pub alias: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CteSpec {
    pub agg: E,
    pub filter: Option<E>,
}

#[derive(Debug, Clone)]
pub struct RefQuery {
    pub cte: Option<CteSpec>,
    pub items: Vec<Item>,
    pub filter: Option<E>,
    /// Grouping expressions; each is also the leading select item.
    pub group_by: Option<Vec<E>>,
    pub group_by_ordinal: bool,
    /// Direction per output column, in column order.
    pub order: Option<Vec<bool>>,
    pub limit: Option<usize>,
}

impl RefQuery {
    fn aggregated(&self) -> bool {
        self.group_by.is_some() || self.items.iter().any(|i| matches!(i.expr, E::Agg(..)))
    }
}

type Row = Vec<(String, V)>;

fn get<'a>(row: &'a Row, name: &str) -> &'a V {
    &row.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no column {name}")).1
}

// ---------------------------------------------------------------- rendering

fn quote_text(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn agg_name(k: AggKind) -> &'static str {
    match k {
        AggKind::Count => "COUNT",
        AggKind::Sum => "SUM",
        AggKind::Avg => "AVG",
        AggKind::Min => "MIN",
        AggKind::Max => "MAX",
    }
}

pub fn render_expr(e: &E) -> String {
    match e {
        E::Col(n) => format!("\"{n}\""),
        E::Lit(V::Int(i)) if *i < 0 => format!("({i})"),
        E::Lit(V::Int(i)) => i.to_string(),
        E::Lit(V::Real(r)) if *r < 0.0 => format!("({r:?})"),
        E::Lit(V::Real(r)) => format!("{r:?}"),
        E::Lit(V::Text(s)) => quote_text(s),
        E::Lit(V::Missing) => "NULL".into(),
        E::Lit(other) => panic!("unsupported literal {other:?}"),
        E::Bin(op, l, r) => format!("({} {op} {})", render_expr(l), render_expr(r)),
        E::Not(x) => format!("(NOT {})", render_expr(x)),
        E::IsNull(x, false) => format!("({} IS NULL)", render_expr(x)),
        E::IsNull(x, true) => format!("({} IS NOT NULL)", render_expr(x)),
        E::Case(c, a, b) => format!("CASE WHEN {} THEN {} ELSE {} END", render_expr(c), render_expr(a), render_expr(b)),
        E::Epoch(x) => format!("EPOCH({})", render_expr(x)),
        E::Agg(k, None) => format!("{}(*)", agg_name(*k)),
        E::Agg(k, Some(x)) => format!("{}({})", agg_name(*k), render_expr(x)),
    }
}

pub fn render(q: &RefQuery, table: &str) -> String {
    let mut sql = String::new();
    if let Some(cte) = &q.cte {
        sql.push_str(&format!(
            "WITH t AS (SELECT \"case:concept:name\" AS cid, {} AS v, COUNT(*) AS n FROM {table}",
            render_expr(&cte.agg)
        ));
        if let Some(f) = &cte.filter {
            sql.push_str(&format!(" WHERE {}", render_expr(f)));
        }
        sql.push_str(" GROUP BY \"case:concept:name\")\n");
    }
    let items: Vec<String> = q
        .items
        .iter()
        .map(|i| match &i.alias {
            Some(a) => format!("{} AS {a}", render_expr(&i.expr)),
            None => render_expr(&i.expr),
        })
        .collect();
    sql.push_str(&format!("SELECT {}\nFROM {table}", items.join(", ")));
    if q.cte.is_some() {
        sql.push_str(&format!(" JOIN t ON {table}.\"case:concept:name\" = t.cid"));
    }
    if let Some(f) = &q.filter {
        sql.push_str(&format!("\nWHERE {}", render_expr(f)));
    }
    if let Some(keys) = &q.group_by {
        let keys: Vec<String> = if q.group_by_ordinal {
            (1..=keys.len()).map(|i| i.to_string()).collect()
        } else {
            keys.iter().map(render_expr).collect()
        };
        sql.push_str(&format!("\nGROUP BY {}", keys.join(", ")));
    }
    if let Some(dirs) = &q.order {
        let parts: Vec<String> =
            dirs.iter().enumerate().map(|(i, d)| format!("{}{}", i + 1, if *d { " DESC" } else { "" })).collect();
        sql.push_str(&format!("\nORDER BY {}", parts.join(", ")));
    }
    if let Some(n) = q.limit {
        sql.push_str(&format!("\nLIMIT {n}"));
    }
    sql
}

// ---------------------------------------------------------------- evaluation

fn num(v: &V) -> Option<f64> {
    match v {
        V::Int(i) => Some(*i as f64),
        V::Real(r) => Some(*r),
        _ => None,
    }
}

fn cmp_values(a: &V, b: &V) -> Option<Ordering> {
    match (a, b) {
        (V::Missing, _) | (_, V::Missing) => None,
        (V::Text(x), V::Text(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (V::Timestamp(x), V::Timestamp(y)) => Some(x.cmp(y)),
        _ => Some(num(a).expect("numeric").partial_cmp(&num(b).expect("numeric")).unwrap()),
    }
}

fn truth(v: &V) -> Option<bool> {
    match v {
        V::Bool(b) => Some(*b),
        V::Missing => None,
        other => panic!("not a boolean: {other:?}"),
    }
}

fn from_truth(t: Option<bool>) -> V {
    t.map_or(V::Missing, V::Bool)
}

fn epoch(t: &Timestamp) -> f64 {
    t.timestamp() as f64 + f64::from(t.timestamp_subsec_micros()) / 1e6
}

fn eval_row(e: &E, row: &Row) -> V {
    match e {
        E::Col(n) => get(row, n).clone(),
        E::Lit(v) => v.clone(),
        E::Not(x) => from_truth(truth(&eval_row(x, row)).map(|b| !b)),
        E::IsNull(x, negated) => V::Bool(matches!(eval_row(x, row), V::Missing) != *negated),
        E::Case(c, a, b) => {
            if truth(&eval_row(c, row)) == Some(true) {
                eval_row(a, row)
            } else {
                eval_row(b, row)
            }
        }
        E::Epoch(x) => match eval_row(x, row) {
            V::Timestamp(t) => V::Real(epoch(&t)),
            V::Missing => V::Missing,
            other => panic!("EPOCH of {other:?}"),
        },
        E::Agg(..) => panic!("aggregate evaluated per row"),
        E::Bin(op, l, r) => {
            let (a, b) = (eval_row(l, row), eval_row(r, row));
            match *op {
                "AND" => from_truth(match (truth(&a), truth(&b)) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                }),
                "OR" => from_truth(match (truth(&a), truth(&b)) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                }),
                "=" | "<>" | "<" | "<=" | ">" | ">=" => from_truth(cmp_values(&a, &b).map(|o| match *op {
                    "=" => o.is_eq(),
                    "<>" => o.is_ne(),
                    "<" => o.is_lt(),
                    "<=" => o.is_le(),
                    ">" => o.is_gt(),
                    _ => o.is_ge(),
                })),
                _ => arith(op, &a, &b),
            }
        }
    }
}

fn arith(op: &str, a: &V, b: &V) -> V {
    if matches!(a, V::Missing) || matches!(b, V::Missing) {
        return V::Missing;
    }
    if let (V::Int(x), V::Int(y), "+" | "-" | "*") = (a, b, op) {
        return V::Int(match op {
            "+" => x + y,
            "-" => x - y,
            _ => x * y,
        });
    }
    let (x, y) = (num(a).unwrap(), num(b).unwrap());
    match op {
        "+" => V::Real(x + y),
        "-" => V::Real(x - y),
        "*" => V::Real(x * y),
        _ if y == 0.0 => V::Missing,
        _ => V::Real(x / y),
    }
}

fn eval_agg(kind: AggKind, arg: Option<&E>, rows: &[&Row]) -> V {
    let Some(arg) = arg else { return V::Int(rows.len() as i64) };
    let vals: Vec<V> = rows.iter().map(|r| eval_row(arg, r)).filter(|v| !matches!(v, V::Missing)).collect();
    if kind == AggKind::Count {
        return V::Int(vals.len() as i64);
    }
    if vals.is_empty() {
        return V::Missing;
    }
    match kind {
        AggKind::Sum | AggKind::Avg => {
            if vals.iter().all(|v| matches!(v, V::Int(_))) {
                let s: i64 = vals.iter().map(|v| if let V::Int(i) = v { *i } else { 0 }).sum();
                if kind == AggKind::Sum {
                    V::Int(s)
                } else {
                    V::Real(s as f64 / vals.len() as f64)
                }
            } else {
                let s: f64 = vals.iter().map(|v| num(v).unwrap()).sum();
                V::Real(if kind == AggKind::Sum { s } else { s / vals.len() as f64 })
            }
        }
        _ => {
            let mut best = vals[0].clone();
            for v in &vals[1..] {
                let o = cmp_values(v, &best).unwrap();
                if (kind == AggKind::Min && o.is_lt()) || (kind == AggKind::Max && o.is_gt()) {
                    best = v.clone();
                }
            }
            best
        }
    }
}

fn eval_group(e: &E, rows: &[&Row]) -> V {
    match e {
        E::Agg(k, arg) => eval_agg(*k, arg.as_deref(), rows),
        other => rows.first().map_or(V::Missing, |r| eval_row(other, r)),
    }
}

/// Grouping equality: missing equals missing, numbers compare by value.
fn same_key(a: &V, b: &V) -> bool {
    match (a, b) {
        (V::Missing, V::Missing) => true,
        (V::Missing, _) | (_, V::Missing) => false,
        _ => cmp_values(a, b) == Some(Ordering::Equal),
    }
}

pub fn event_rows(log: &EventLog) -> Vec<Row> {
    let mut rows = Vec::new();
    for case in log.cases() {
        for e in &case.events {
            let mut row: Row = vec![
                ("case:concept:name".into(), V::Text(case.case_id.clone())),
                ("concept:name".into(), V::Text(e.activity.clone())),
                ("time:timestamp".into(), V::Timestamp(e.timestamp)),
                ("org:resource".into(), e.resource.clone().map_or(V::Missing, V::Text)),
            ];
            for name in ["x", "y"] {
                row.push((name.into(), e.extras.get(name).cloned().unwrap_or(V::Missing)));
            }
            row.push(("case:amount".into(), case.case_attributes.get("amount").cloned().unwrap_or(V::Missing)));
            rows.push(row);
        }
    }
    rows
}

fn group_rows<'a>(rows: &'a [Row], keys: &[E]) -> Vec<Vec<&'a Row>> {
    let mut groups: Vec<(Vec<V>, Vec<&Row>)> = Vec::new();
    for row in rows {
        let key: Vec<V> = keys.iter().map(|k| eval_row(k, row)).collect();
        match groups.iter_mut().find(|(k, _)| k.iter().zip(&key).all(|(a, b)| same_key(a, b))) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

pub fn output_names(q: &RefQuery) -> Vec<String> {
    q.items
        .iter()
        .map(|i| match (&i.alias, &i.expr) {
            (Some(a), _) => a.clone(),
            (None, E::Col(n)) => n.clone(),
            (None, e) => render_expr(e),
        })
        .collect()
}

/// Column names and rows, sorted when the query has an ORDER BY, otherwise in arbitrary order.
pub fn reference_eval(q: &RefQuery, log: &EventLog) -> (Vec<String>, Vec<Vec<V>>) {
    let events = event_rows(log);
    let mut rows: Vec<Row> = match &q.cte {
        None => events,
        Some(cte) => {
            let inner: Vec<Row> = events
                .iter()
                .filter(|r| cte.filter.as_ref().is_none_or(|f| truth(&eval_row(f, r)) == Some(true)))
                .cloned()
                .collect();
            let cte_rows: Vec<Row> = group_rows(&inner, &[E::Col("case:concept:name".into())])
                .into_iter()
                .map(|g| {
                    vec![
                        ("cid".to_owned(), get(g[0], "case:concept:name").clone()),
                        ("v".to_owned(), eval_group(&cte.agg, &g)),
                        ("n".to_owned(), V::Int(g.len() as i64)),
                    ]
                })
                .collect();
            let mut joined = Vec::new();
            for l in &events {
                for r in &cte_rows {
                    if same_key(get(l, "case:concept:name"), get(r, "cid")) && !matches!(get(r, "cid"), V::Missing) {
                        let mut row = l.clone();
                        row.extend(r.iter().cloned());
                        joined.push(row);
                    }
                }
            }
            joined
        }
    };
    if let Some(f) = &q.filter {
        rows.retain(|r| truth(&eval_row(f, r)) == Some(true));
    }
    let mut out: Vec<Vec<V>> = if let Some(keys) = &q.group_by {
        group_rows(&rows, keys).iter().map(|g| q.items.iter().map(|i| eval_group(&i.expr, g)).collect()).collect()
    } else if q.aggregated() {
        let all: Vec<&Row> = rows.iter().collect();
        vec![q.items.iter().map(|i| eval_group(&i.expr, &all)).collect()]
    } else {
        rows.iter().map(|r| q.items.iter().map(|i| eval_row(&i.expr, r)).collect()).collect()
    };
    if let Some(dirs) = &q.order {
        out.sort_by(|a, b| order_rows(a, b, dirs));
        if let Some(n) = q.limit {
            out.truncate(n);
        }
    }
    (output_names(q), out)
}

/// `ORDER BY` comparison with missing values last in both directions.
pub fn order_rows(a: &[V], b: &[V], desc: &[bool]) -> Ordering {
    for ((x, y), d) in a.iter().zip(b).zip(desc) {
        let o = match (x, y) {
            (V::Missing, V::Missing) => Ordering::Equal,
            (V::Missing, _) => Ordering::Greater,
            (_, V::Missing) => Ordering::Less,
            _ => {
                let o = cmp_values(x, y).unwrap();
                if *d {
                    o.reverse()
                } else {
                    o
                }
            }
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

pub fn same_value(a: &V, b: &V) -> bool {
    match (a, b) {
        (V::Real(x), V::Real(y)) => close(*x, *y, 1e-9),
        (V::Int(_) | V::Real(_), V::Int(_) | V::Real(_)) => matches!((a, b), (V::Int(x), V::Int(y)) if x == y),
        _ => a == b,
    }
}

fn canonical(rows: &[Vec<V>]) -> Vec<Vec<V>> {
    let mut v = rows.to_vec();
    v.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    v
}

/// Multiset equality with the value rules of [`same_value`].
pub fn same_rows(a: &[Vec<V>], b: &[Vec<V>]) -> bool {
    a.len() == b.len()
        && canonical(a)
            .iter()
            .zip(canonical(b).iter())
            .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same_value(p, q)))
}

// ---------------------------------------------------------------- generation

struct Scope {
    num: Vec<&'static str>,
    text: Vec<&'static str>,
}

impl Scope {
    fn events() -> Self {
        Scope { num: vec!["x", "y", "case:amount"], text: vec!["case:concept:name", "concept:name", "org:resource"] }
    }

    fn joined() -> Self {
        let mut s = Self::events();
        s.num.extend(["v", "n"]);
        s.text.push("cid");
        s
    }
}

fn col(n: &str) -> E {
    E::Col(n.to_owned())
}

fn bin(op: &'static str, l: E, r: E) -> E {
    E::Bin(op, Box::new(l), Box::new(r))
}

fn gen_num(rng: &mut impl Rng, s: &Scope, depth: u32) -> E {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        return match rng.random_range(0..6) {
            0..=2 => col(s.num.choose(rng).unwrap()),
            3 => E::Lit(V::Int(rng.random_range(-3..10))),
            4 => E::Lit(V::Real([0.5, 2.0, -1.5, 3.25][rng.random_range(0..4)])),
            _ => E::Epoch(Box::new(col("time:timestamp"))),
        };
    }
    match rng.random_range(0..5) {
        0..=3 => {
            let op = ["+", "-", "*", "/"][rng.random_range(0..4)];
            bin(op, gen_num(rng, s, depth - 1), gen_num(rng, s, depth - 1))
        }
        _ => E::Case(
            Box::new(gen_bool(rng, s, depth - 1)),
            Box::new(gen_num(rng, s, depth - 1)),
            Box::new(gen_num(rng, s, depth - 1)),
        ),
    }
}

fn gen_text(rng: &mut impl Rng, s: &Scope) -> E {
    col(s.text.choose(rng).unwrap())
}

fn text_literal(rng: &mut impl Rng) -> E {
    let pool = ["Create Fine", "Payment", "Send Fine", "r1", "case01", "Appeal -> Judge", "it's"];
    E::Lit(V::Text(pool[rng.random_range(0..pool.len())].to_owned()))
}

fn gen_bool(rng: &mut impl Rng, s: &Scope, depth: u32) -> E {
    let cmp = ["=", "<>", "<", "<=", ">", ">="];
    let leaf = depth == 0 || rng.random_bool(0.5);
    if leaf {
        return match rng.random_range(0..4) {
            0 | 1 => bin(cmp[rng.random_range(0..6)], gen_num(rng, s, 1), gen_num(rng, s, 1)),
            2 => bin(cmp[rng.random_range(0..6)], gen_text(rng, s), text_literal(rng)),
            _ => {
                let c = if rng.random_bool(0.5) { gen_text(rng, s) } else { col(s.num.choose(rng).unwrap()) };
                E::IsNull(Box::new(c), rng.random_bool(0.5))
            }
        };
    }
    match rng.random_range(0..3) {
        0 => bin("AND", gen_bool(rng, s, depth - 1), gen_bool(rng, s, depth - 1)),
        1 => bin("OR", gen_bool(rng, s, depth - 1), gen_bool(rng, s, depth - 1)),
        _ => E::Not(Box::new(gen_bool(rng, s, depth - 1))),
    }
}

fn gen_agg(rng: &mut impl Rng, s: &Scope, numeric_only: bool) -> E {
    match rng.random_range(0..7) {
        5 if numeric_only => E::Agg(AggKind::Min, Some(Box::new(gen_num(rng, s, 1)))),
        0 => E::Agg(AggKind::Count, None),
        1 => E::Agg(AggKind::Count, Some(Box::new(gen_num(rng, s, 1)))),
        2 => E::Agg(AggKind::Sum, Some(Box::new(gen_num(rng, s, 2)))),
        3 => E::Agg(AggKind::Avg, Some(Box::new(gen_num(rng, s, 2)))),
        4 => E::Agg(AggKind::Min, Some(Box::new(gen_num(rng, s, 2)))),
        5 => E::Agg(AggKind::Max, Some(Box::new(gen_text(rng, s)))),
        _ => E::Agg(AggKind::Max, Some(Box::new(gen_num(rng, s, 2)))),
    }
}

fn gen_key(rng: &mut impl Rng, s: &Scope) -> E {
    match rng.random_range(0..4) {
        0 | 1 => gen_text(rng, s),
        2 => col(["x", "case:amount"][rng.random_range(0..2)]),
        _ => E::Case(
            Box::new(bin("=", col("concept:name"), text_literal(rng))),
            Box::new(E::Lit(V::Int(1))),
            Box::new(E::Lit(V::Int(0))),
        ),
    }
}

/// A random query over the event table named `table`.
pub fn random_query(rng: &mut impl Rng) -> RefQuery {
    let cte = rng.random_bool(0.25).then(|| {
        let s = Scope::events();
        CteSpec { agg: gen_agg(rng, &s, true), filter: rng.random_bool(0.3).then(|| gen_bool(rng, &s, 1)) }
    });
    let s = if cte.is_some() { Scope::joined() } else { Scope::events() };
    let filter = rng.random_bool(0.5).then(|| gen_bool(rng, &s, 2));
    let mut q = RefQuery { cte, items: Vec::new(), filter, group_by: None, group_by_ordinal: false, order: None, limit: None };
    match rng.random_range(0..3) {
        0 => {
            for i in 0..rng.random_range(1..=3) {
                let expr = match rng.random_range(0..3) {
                    0 => gen_text(rng, &s),
                    1 => col(s.num.choose(rng).unwrap()),
                    _ => gen_num(rng, &s, 2),
                };
                let alias = (!matches!(expr, E::Col(_)) || rng.random_bool(0.5)).then(|| format!("c{i}"));
                q.items.push(Item { expr, alias });
            }
        }
        1 => {
            let nkeys = rng.random_range(1..=2);
            let mut keys = Vec::new();
            for i in 0..nkeys {
                let k = gen_key(rng, &s);
                q.items.push(Item { expr: k.clone(), alias: Some(format!("k{i}")) });
                keys.push(k);
            }
            for i in 0..rng.random_range(1..=3) {
                q.items.push(Item { expr: gen_agg(rng, &s, false), alias: Some(format!("a{i}")) });
            }
            q.group_by = Some(keys);
            q.group_by_ordinal = rng.random_bool(0.3);
        }
        _ => {
            for i in 0..rng.random_range(1..=3) {
                q.items.push(Item { expr: gen_agg(rng, &s, false), alias: Some(format!("a{i}")) });
            }
        }
    }
    if rng.random_bool(0.5) {
        q.order = Some((0..q.items.len()).map(|_| rng.random_bool(0.5)).collect());
        if rng.random_bool(0.5) {
            q.limit = Some(rng.random_range(0..6));
        }
    }
    q
}

/// Runs `n` random queries and returns the failures as readable reports.
pub fn differential(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for i in 0..n {
        let log = random_log(&mut rng, 5, 8, 6);
        let q = random_query(&mut rng);
        let sql = render(&q, "dataframe");
        let (names, expected) = reference_eval(&q, &log);
        match run_sql(&sql, &log, "dataframe") {
            Err(e) => failures.push(format!("#{i}: {e}\n{sql}")),
            Ok(t) => {
                let ordered = q.order.as_ref().is_none_or(|d| t.rows.windows(2).all(|w| order_rows(&w[0], &w[1], d).is_le()));
                if t.columns != names || !same_rows(&t.rows, &expected) || !ordered {
                    failures.push(format!("#{i}:\n{sql}\nengine {:?} {:?}\nreference {names:?} {expected:?}", t.columns, t.rows));
                }
            }
        }
    }
    failures
}
