//! Line grammars of the textual abstractions.
//!
//! ```text
//! dfg-line     = activity " -> " activity suffix
//! variant-line = activity *( " -> " activity ) suffix
//! suffix       = " ( frequency = " 1*DIGIT "  performance = " number " )"
//! activity     = bare / quoted
//! quoted       = DQUOTE *( escaped / char ) DQUOTE   ; \" \\ \n \r escapes
//! ```
//!
//! An activity is quoted when it contains `->`, a double quote, a backslash, a line break,
//! leading or trailing whitespace, or is empty.

use std::borrow::Cow;
use std::fmt::Write as _;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::dfg::sort_edges;
use super::{fit_lines, AbstractionError, DfgEdge, DirectlyFollowsGraph, RenderBudget, Result, Variant, VariantTable};
use crate::event_log::{attribute_statistics, AttributeSummary, EventLog, QuantileValue, Timestamp, QUANTILE_LEVELS};
use crate::petri_net::{Marking, PetriNet};
use crate::pyfmt;

const ARROW: &str = " -> ";
const FREQ_PREFIX: &str = " ( frequency = ";
const PERF_INFIX: &str = "  performance = ";

fn needs_quotes(activity: &str) -> bool {
    activity.is_empty()
        || activity.contains("->")
        || activity.contains(['"', '\\', '\n', '\r'])
        || activity.starts_with(char::is_whitespace)
        || activity.ends_with(char::is_whitespace)
}

fn quote_activity(activity: &str) -> Cow<'_, str> {
    if !needs_quotes(activity) {
        return Cow::Borrowed(activity);
    }
    let mut out = String::with_capacity(activity.len() + 2);
    out.push('"');
    for c in activity.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    Cow::Owned(out)
}

fn performance_text(value: f64, decimals: Option<u32>) -> String {
    match decimals {
        Some(d) => pyfmt::float_repr(pyfmt::round_to(value, d)),
        None => pyfmt::float_repr(value),
    }
}

fn sequence_line<'a>(activities: impl IntoIterator<Item = &'a str>, frequency: usize, perf: &str) -> String {
    let mut line = String::new();
    for (i, a) in activities.into_iter().enumerate() {
        if i > 0 {
            line.push_str(ARROW);
        }
        line.push_str(&quote_activity(a));
    }
    let _ = write!(line, "{FREQ_PREFIX}{frequency}{PERF_INFIX}{perf} )");
    line
}

pub(crate) fn dfg_line(edge: &DfgEdge, decimals: u32) -> String {
    sequence_line(
        [edge.source.as_str(), edge.target.as_str()],
        edge.frequency,
        &performance_text(edge.performance, Some(decimals)),
    )
}

pub(crate) fn variant_line(variant: &Variant, decimals: Option<u32>) -> String {
    sequence_line(
        variant.sequence.iter().map(String::as_str),
        variant.frequency,
        &performance_text(variant.performance, decimals),
    )
}

/// One line per edge, most frequent first, performance rounded to `decimals`.
pub fn render_dfg(dfg: &DirectlyFollowsGraph, budget: &RenderBudget, decimals: u32) -> Result<String> {
    let mut edges = dfg.edges.clone();
    sort_edges(&mut edges);
    let lines: Vec<String> = edges.iter().map(|e| dfg_line(e, decimals)).collect();
    fit_lines(&lines, budget)
}

/// One line per variant, most frequent first. Without `decimals` performance is printed at
/// full round-trip precision.
pub fn render_variants(table: &VariantTable, budget: &RenderBudget, decimals: Option<u32>) -> Result<String> {
    let mut variants: Vec<&Variant> = table.variants.iter().collect();
    variants.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.sequence.cmp(&b.sequence)));
    let lines: Vec<String> = variants.iter().map(|v| variant_line(v, decimals)).collect();
    fit_lines(&lines, budget)
}

fn unquote(text: &str) -> Option<(String, &str)> {
    let mut chars = text.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut out = String::new();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &text[i + 1..])),
            '\\' => match chars.next()?.1 {
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                other => out.push(other),
            },
            c => out.push(c),
        }
    }
    None
}

fn grammar(line: &str, reason: &'static str) -> AbstractionError {
    AbstractionError::Grammar { line: line.to_owned(), reason }
}

fn parse_sequence_line(line: &str) -> Result<(Vec<String>, usize, f64)> {
    let cut = line.rfind(FREQ_PREFIX).ok_or_else(|| grammar(line, "missing frequency annotation"))?;
    let (head, tail) = (&line[..cut], &line[cut + FREQ_PREFIX.len()..]);
    let tail = tail.strip_suffix(" )").ok_or_else(|| grammar(line, "missing closing parenthesis"))?;
    let (freq, perf) = tail.split_once(PERF_INFIX).ok_or_else(|| grammar(line, "missing performance annotation"))?;
    let frequency = freq.parse().map_err(|_| grammar(line, "frequency is not an integer"))?;
    let performance = perf.parse().map_err(|_| grammar(line, "performance is not a number"))?;

    let mut activities = Vec::new();
    let mut rest = head;
    loop {
        let (activity, after) = if rest.starts_with('"') {
            unquote(rest).ok_or_else(|| grammar(line, "unterminated quoted activity"))?
        } else {
            match rest.find(ARROW) {
                Some(i) => (rest[..i].to_owned(), &rest[i..]),
                None => (rest.to_owned(), ""),
            }
        };
        activities.push(activity);
        if after.is_empty() {
            break;
        }
        rest = after.strip_prefix(ARROW).ok_or_else(|| grammar(line, "expected ' -> ' between activities"))?;
    }
    Ok((activities, frequency, performance))
}

/// Reads one rendered DFG line back into an edge.
pub fn parse_dfg_line(line: &str) -> Result<DfgEdge> {
    let (mut acts, frequency, performance) = parse_sequence_line(line)?;
    if acts.len() != 2 {
        return Err(grammar(line, "a DFG line has exactly two activities"));
    }
    let target = acts.pop().unwrap();
    let source = acts.pop().unwrap();
    Ok(DfgEdge { source, target, frequency, performance })
}

/// Reads one rendered variant line back.
pub fn parse_variant_line(line: &str) -> Result<Variant> {
    let (sequence, frequency, performance) = parse_sequence_line(line)?;
    Ok(Variant { sequence, frequency, performance })
}

/// How timestamp quantiles are printed in attribute summaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampStyle {
    /// `2000-01-01T00:00:00+00:00`
    #[default]
    Iso8601,
    /// `Timestamp('2000-01-01 00:00:00+0000', tz='UTC')`, the dataframe repr.
    Pandas,
}

impl std::str::FromStr for TimestampStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "iso8601" | "iso" => Ok(Self::Iso8601),
            "pandas" => Ok(Self::Pandas),
            other => Err(format!("unknown timestamp style {other:?} (expected iso8601 or pandas)")),
        }
    }
}

fn timestamp_text(t: Timestamp, style: TimestampStyle) -> String {
    match style {
        TimestampStyle::Iso8601 => crate::event_log::AttributeValue::Timestamp(t).to_string(),
        TimestampStyle::Pandas => {
            let mut s =
                format!("{:04}-{:02}-{:02} {:02}:{:02}:{:02}", t.year(), t.month(), t.day(), t.hour(), t.minute(), t.second());
            let micros = t.timestamp_subsec_micros();
            if micros != 0 {
                let _ = write!(s, ".{micros:06}");
            }
            format!("Timestamp('{s}+0000', tz='UTC')")
        }
    }
}

fn quantile_text(v: &QuantileValue, style: TimestampStyle) -> String {
    match v {
        QuantileValue::Int(i) => i.to_string(),
        QuantileValue::Real(r) => pyfmt::float_repr(*r),
        QuantileValue::Timestamp(t) => timestamp_text(*t, style),
    }
}

/// `{name}  empty: {n}  quantiles: {0.0: .., 0.25: .., 0.5: .., 0.75: .., 1.0: ..}`
pub fn attribute_line(summary: &AttributeSummary, style: TimestampStyle) -> String {
    let dict = match &summary.quantiles {
        None => "{}".to_owned(),
        Some(q) => {
            let entries: Vec<String> = QUANTILE_LEVELS
                .iter()
                .zip(q)
                .map(|(level, v)| format!("{}: {}", pyfmt::float_repr(*level), quantile_text(v, style)))
                .collect();
            format!("{{{}}}", entries.join(", "))
        }
    };
    format!("{}  empty: {}  quantiles: {}", summary.name, summary.empty_count, dict)
}

pub fn render_attribute_summaries(summaries: &[AttributeSummary], style: TimestampStyle) -> String {
    summaries.iter().map(|s| attribute_line(s, style)).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedAttributes {
    pub text: String,
    /// Requested attributes that could not be summarised, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Summarises the requested attributes in the given order, skipping non-numeric ones.
pub fn render_attributes(log: &EventLog, attributes: &[String], style: TimestampStyle) -> RenderedAttributes {
    let mut summaries = Vec::new();
    let mut skipped = Vec::new();
    for name in attributes {
        match attribute_statistics(log, name) {
            Ok(s) => summaries.push(s),
            Err(e) => {
                log::warn!("attribute {name:?} skipped: {e}");
                skipped.push((name.clone(), e.to_string()));
            }
        }
    }
    RenderedAttributes { text: render_attribute_summaries(&summaries, style), skipped }
}

/// Names of all numeric and timestamp columns, sorted.
pub fn numeric_attributes(log: &EventLog) -> Vec<String> {
    log.attribute_catalog()
        .iter()
        .filter(|(_, info)| info.kind.is_numeric() || info.kind == crate::event_log::AttributeKind::Timestamp)
        .map(|(name, _)| name.clone())
        .collect()
}

fn transition_text(net: &PetriNet, id: &str) -> String {
    match net.transition(id).and_then(|t| t.label.as_deref()) {
        Some(label) => format!("({id}, {})", pyfmt::str_repr(label)),
        None => format!("({id}, None)"),
    }
}

fn node_text(net: &PetriNet, id: &str) -> String {
    if net.transition(id).is_some() {
        transition_text(net, id)
    } else {
        id.to_owned()
    }
}

fn marking_text(m: &Marking) -> String {
    let items: Vec<String> = m.iter().map(|(p, n)| pyfmt::str_repr(&format!("{p}:{n}"))).collect();
    format!("[{}]", items.join(", "))
}

/// Five lines: places, transitions, arcs, initial marking, final marking.
pub fn render_petri_net(net: &PetriNet, initial: &Marking, final_marking: &Marking) -> String {
    let mut places: Vec<&str> = net.places().map(|p| p.id.as_str()).collect();
    places.sort_unstable();
    let transitions: Vec<String> = net.transitions().map(|t| transition_text(net, &t.id)).collect();
    let mut arcs: Vec<String> =
        net.arcs().iter().map(|a| format!("{}->{}", node_text(net, &a.source), node_text(net, &a.target))).collect();
    arcs.sort_unstable();
    format!(
        "places: [ {} ]\ntransitions: [ {} ]\narcs: [ {} ]\ninitial marking: {}\nfinal marking: {}",
        places.join(", "),
        transitions.join(", "),
        arcs.join(", "),
        marking_text(initial),
        marking_text(final_marking)
    )
}
