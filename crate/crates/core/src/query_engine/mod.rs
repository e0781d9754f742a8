//! A small analytical SQL engine over the flat event table.
//!
//! Supported: `WITH` CTEs, `SELECT` lists with aliases, `FROM` with one table, inner
//! equi-joins, `WHERE`, `GROUP BY` (expressions, aliases, ordinals), `ORDER BY` and `LIMIT`.
//! Expressions cover arithmetic, comparisons, `AND`/`OR`/`NOT`, `IS [NOT] NULL`, `CASE`,
//! `AVG`/`SUM`/`MIN`/`MAX`/`COUNT` and `EPOCH`. Anything else is rejected with
//! [`QueryError::Unsupported`] naming the construct.
//!
//! Missing values behave like SQL `NULL`: comparisons with them are unknown and filter the row
//! out, aggregates skip them, and `GROUP BY` keeps them as their own group.

mod ast;
mod eval;
mod lexer;
mod parser;

use std::io::Write;

use serde::Serialize;

pub use self::ast::{AggFunc, BinOp, ColumnRef, Cte, Expr, Ident, Join, Literal, OrderItem, Query, Select, SelectItem, TableRef};
pub use self::eval::evaluate;
pub use self::parser::parse_sql;
use crate::event_log::{AttributeValue, EventLog};

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("no SQL found in the response; paste the query manually")]
    NoSql,
    #[error("syntax error at line {line}, column {column} near {token:?}: {message}")]
    Syntax { line: usize, column: usize, token: String, message: String },
    #[error("unsupported construct: {construct} (line {line}, column {column}); run this query on an external SQL engine")]
    Unsupported { construct: String, line: usize, column: usize },
    #[error("{0}")]
    Semantic(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("ambiguous column {0}; qualify it with a table name")]
    AmbiguousColumn(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("type error: {0}")]
    Type(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QueryError {
    pub fn is_unsupported(&self) -> bool {
        matches!(self, QueryError::Unsupported { .. })
    }
}

pub type Result<T, E = QueryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<AttributeValue>>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Parses and evaluates `sql` in one step.
pub fn run_sql(sql: &str, log: &EventLog, table_name: &str) -> Result<ResultTable> {
    evaluate(&parse_sql(sql)?, log, table_name)
}

const SQL_TAGS: [&str; 5] = ["sql", "duckdb", "postgresql", "sqlite", "mysql"];

/// Skips whitespace and SQL comments.
fn skip_trivia(mut s: &str) -> &str {
    loop {
        s = s.trim_start();
        if let Some(rest) = s.strip_prefix("--") {
            s = rest.split_once('\n').map_or("", |(_, r)| r);
        } else if let Some(rest) = s.strip_prefix("/*") {
            s = rest.split_once("*/").map_or("", |(_, r)| r);
        } else {
            return s;
        }
    }
}

fn leading_word(s: &str) -> &str {
    let end = s.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(s.len());
    &s[..end]
}

fn next_token(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    if let Some(rest) = s.strip_prefix('"') {
        let end = rest.find('"')?;
        return Some((&s[..end + 2], &rest[end + 1..]));
    }
    let w = leading_word(s);
    (!w.is_empty()).then(|| (w, &s[w.len()..]))
}

/// Whether `text` starts like a query: `SELECT ... FROM` or `WITH name AS (`.
fn looks_like_sql(text: &str) -> bool {
    let s = skip_trivia(text);
    let Some((first, rest)) = next_token(s) else { return false };
    if first.eq_ignore_ascii_case("SELECT") {
        return rest.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).any(|w| w.eq_ignore_ascii_case("FROM"));
    }
    if first.eq_ignore_ascii_case("WITH") {
        let Some((name, mut rest)) = next_token(rest) else { return false };
        if name.eq_ignore_ascii_case("RECURSIVE") {
            let Some((_, after)) = next_token(rest) else { return false };
            rest = after;
        }
        return match next_token(rest) {
            Some((kw, after)) if kw.eq_ignore_ascii_case("AS") => after.trim_start().starts_with('('),
            _ => false,
        };
    }
    false
}

/// Finds the query in an LLM reply.
///
/// Preference order: the first fenced block tagged as SQL, the first untagged fenced block that
/// starts like a query, then the whole reply if it is a bare query. Applying it to its own output
/// returns the same text.
pub fn extract_sql(response: &str) -> Result<String> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in response.lines() {
        let trimmed = line.trim_start();
        match (&mut current, trimmed.strip_prefix("```")) {
            (None, Some(info)) => current = Some((info.trim().to_ascii_lowercase(), Vec::new())),
            (Some(_), Some(_)) => {
                let (info, body) = current.take().unwrap();
                blocks.push((info, body.join("\n")));
            }
            (Some((_, body)), None) => body.push(line),
            (None, None) => {}
        }
    }
    if let Some((info, body)) = current {
        blocks.push((info, body.join("\n")));
    }
    let tagged = blocks
        .iter()
        .find(|(info, body)| SQL_TAGS.contains(&info.split_whitespace().next().unwrap_or("")) && looks_like_sql(body));
    let untagged = || blocks.iter().find(|(info, body)| info.is_empty() && looks_like_sql(body));
    if let Some((_, body)) = tagged.or_else(untagged) {
        return Ok(body.trim().to_owned());
    }
    if blocks.is_empty() && looks_like_sql(response) {
        return Ok(response.trim().to_owned());
    }
    Err(QueryError::NoSql)
}

fn right_aligned(v: &AttributeValue) -> bool {
    matches!(v, AttributeValue::Int(_) | AttributeValue::Real(_))
}

/// Fixed-width rendering: header, dashed rule, at most `max_rows` rows, then a footer when
/// rows were cut (`(k more rows)`) or there were none (`(0 rows)`).
pub fn format_result(table: &ResultTable, max_rows: usize) -> String {
    let max_rows = max_rows.max(1);
    let shown = &table.rows[..table.rows.len().min(max_rows)];
    let cells: Vec<Vec<String>> = shown.iter().map(|r| r.iter().map(|v| v.to_string().replace('\n', " ")).collect()).collect();
    let mut widths: Vec<usize> = table.columns.iter().map(|c| c.chars().count()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut lines = Vec::with_capacity(shown.len() + 3);
    let header: Vec<String> = table.columns.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
    lines.push(header.join(" | "));
    lines.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for (row, values) in cells.iter().zip(shown) {
        let parts: Vec<String> = row
            .iter()
            .zip(&widths)
            .zip(values)
            .map(|((c, w), v)| if right_aligned(v) { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect();
        lines.push(parts.join(" | "));
    }
    if table.rows.is_empty() {
        lines.push("(0 rows)".to_owned());
    } else if table.rows.len() > shown.len() {
        lines.push(format!("({} more rows)", table.rows.len() - shown.len()));
    }
    let mut out: Vec<&str> = lines.iter().map(|l| l.trim_end()).collect();
    out.push("");
    out.join("\n")
}

/// Writes the table as CSV; missing values become empty fields.
pub fn write_result_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| QueryError::Io(std::io::Error::other(e));
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| if v.is_missing() { String::new() } else { v.to_string() })).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAYMENT_QUERY: &str = "WITH case_has_payment AS (\n    SELECT \"case:concept:name\",\n           MAX(CASE WHEN \"concept:name\" = 'Payment' THEN 1 ELSE 0 END)\n\t\t   as has_payment\n    FROM dataframe\n    GROUP BY \"case:concept:name\"\n)\nSELECT has_payment, AVG(expense) as avg_expense\nFROM dataframe\nJOIN case_has_payment ON\ndataframe.\"case:concept:name\" = case_has_payment.\"case:concept:name\"\nGROUP BY has_payment;";

    #[test]
    fn extracts_tagged_fence() {
        let reply =
            format!("Hypothesis: paid fines are cheaper.\n\n```sql\n{PAYMENT_QUERY}\n```\n\nRun it and send me the results.");
        assert_eq!(extract_sql(&reply).unwrap(), PAYMENT_QUERY);
    }

    #[test]
    fn extraction_is_idempotent() {
        for reply in [
            format!("```sql\n{PAYMENT_QUERY}\n```"),
            "Try:\n```\nSELECT a FROM t\n```\n```sql\nSELECT b FROM t\n```".to_owned(),
            "```\nsome code\n```\n```\n-- comment\nselect x from t\n```".to_owned(),
            "  SELECT COUNT(*) FROM dataframe  ".to_owned(),
        ] {
            let once = extract_sql(&reply).unwrap();
            assert_eq!(extract_sql(&once).unwrap(), once, "{reply}");
        }
        assert_eq!(extract_sql("Try:\n```\nSELECT a FROM t\n```\n```sql\nSELECT b FROM t\n```").unwrap(), "SELECT b FROM t");
    }

    #[test]
    fn prose_has_no_sql() {
        for reply in [
            "The amount attribute clearly influences payment.",
            "With this data, I select the hypothesis that payments come from small fines.",
            "```python\nprint(1)\n```",
        ] {
            assert!(matches!(extract_sql(reply), Err(QueryError::NoSql)), "{reply}");
        }
    }

    fn table(n: usize) -> ResultTable {
        ResultTable {
            columns: vec!["has_payment".into(), "name".into()],
            rows: (0..n).map(|i| vec![AttributeValue::Int(i as i64), AttributeValue::Text(format!("r{i}"))]).collect(),
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_result(&table(2), 30), "has_payment | name\n------------+-----\n          0 | r0\n          1 | r1\n");
        assert!(format_result(&table(100), 30).ends_with("\n(70 more rows)\n"));
        assert_eq!(format_result(&table(100), 30).lines().count(), 33);
        assert_eq!(format_result(&table(0), 30), "has_payment | name\n------------+-----\n(0 rows)\n");
        let missing = ResultTable { columns: vec!["x".into()], rows: vec![vec![AttributeValue::Missing]] };
        assert_eq!(format_result(&missing, 5), "x\n----\nNULL\n");
    }

    #[test]
    fn csv_export() {
        let mut out = Vec::new();
        let t = ResultTable {
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![AttributeValue::Real(1.5), AttributeValue::Missing]],
        };
        write_result_csv(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1.5,\n");
    }
}
