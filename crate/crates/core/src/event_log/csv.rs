//! CSV ingestion (RFC 4180, header row required) and the matching writer.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::value::{format_timestamp, parse_timestamp, parse_timestamp_with};
use super::{
    AttributeKind, AttributeValue, Case, ColumnMapping, Event, EventLog, EventLogError, IngestOptions, ParseReport, Result,
};
use crate::pyfmt;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub mapping: ColumnMapping,
    /// strftime-style format for the timestamp column; ISO-8601 when absent.
    pub timestamp_format: Option<String>,
    pub delimiter: u8,
    pub ingest: IngestOptions,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { mapping: ColumnMapping::default(), timestamp_format: None, delimiter: b',', ingest: IngestOptions::default() }
    }
}

fn column_index(header: &csv::StringRecord, role: &'static str, name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| EventLogError::UnknownColumn { role, column: name.to_owned() })
}

/// Infers one type for a whole column: numeric only if every non-empty cell parses.
fn infer_kind<'a>(cells: impl Iterator<Item = &'a str> + Clone, assume_utc: bool) -> Option<AttributeKind> {
    let mut present = cells.filter(|c| !c.is_empty()).peekable();
    present.peek()?;
    let all = |f: &dyn Fn(&str) -> bool| present.clone().all(f);
    Some(if all(&|c| c.trim().parse::<i64>().is_ok()) {
        AttributeKind::Integer
    } else if all(&|c| c.trim().parse::<f64>().is_ok()) {
        AttributeKind::Real
    } else if all(&|c| matches!(c.trim(), "true" | "false")) {
        AttributeKind::Boolean
    } else if all(&|c| parse_timestamp(c, assume_utc).is_some()) {
        AttributeKind::Timestamp
    } else {
        AttributeKind::Text
    })
}

fn convert(cell: &str, kind: Option<AttributeKind>, assume_utc: bool) -> AttributeValue {
    if cell.is_empty() {
        return AttributeValue::Missing;
    }
    let t = cell.trim();
    match kind {
        Some(AttributeKind::Integer) => AttributeValue::Int(t.parse().expect("inferred integer")),
        Some(AttributeKind::Real) => AttributeValue::Real(t.parse().expect("inferred real")),
        Some(AttributeKind::Boolean) => AttributeValue::Bool(t == "true"),
        Some(AttributeKind::Timestamp) => AttributeValue::Timestamp(parse_timestamp(t, assume_utc).expect("inferred timestamp")),
        Some(AttributeKind::Text) | None => AttributeValue::Text(cell.to_owned()),
    }
}

/// Reads a CSV event table. Rows are grouped by case id in order of first appearance.
pub fn parse_csv(source: impl Read, options: &CsvOptions) -> Result<(EventLog, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new().delimiter(options.delimiter).has_headers(true).flexible(false).from_reader(source);
    let header = reader.headers().map_err(|e| EventLogError::Csv(e.to_string()))?.clone();
    let mut mapping = options.mapping.clone();
    let mut report = ParseReport::default();
    if header.is_empty() {
        return Ok((EventLog::empty(mapping), report));
    }

    let case_col = column_index(&header, "case id", &mapping.case_id)?;
    let act_col = column_index(&header, "activity", &mapping.activity)?;
    let ts_col = column_index(&header, "timestamp", &mapping.timestamp)?;
    let res_col = match &mapping.resource {
        Some(r) => match header.iter().position(|h| h == r) {
            Some(i) => Some(i),
            None => {
                report.warn(format!("resource column {r:?} not present; resources left empty"));
                mapping.resource = None;
                None
            }
        },
        None => None,
    };

    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| EventLogError::Csv(format!("row {}: {e}", n + 2)))?;
        rows.push(rec);
    }

    let standard: BTreeSet<usize> = [Some(case_col), Some(act_col), Some(ts_col), res_col].into_iter().flatten().collect();
    let extra_cols: Vec<(usize, String, Option<AttributeKind>)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| !standard.contains(i))
        .map(|(i, name)| {
            let kind = infer_kind(rows.iter().map(move |r| r.get(i).unwrap_or("")), options.ingest.assume_utc);
            (i, name.to_owned(), kind)
        })
        .collect();

    let mut cases: Vec<Case> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let assume_utc = options.ingest.assume_utc;
    for (n, rec) in rows.iter().enumerate() {
        let case_id = rec.get(case_col).unwrap_or("");
        let activity = rec.get(act_col).unwrap_or("");
        let raw_ts = rec.get(ts_col).unwrap_or("");
        let ts = match &options.timestamp_format {
            Some(fmt) => parse_timestamp_with(raw_ts, fmt, assume_utc),
            None => parse_timestamp(raw_ts, assume_utc),
        };
        let Some(timestamp) = ts else {
            report.rejected_events += 1;
            log::debug!("row {}: unparseable timestamp {raw_ts:?}", n + 2);
            continue;
        };
        if case_id.is_empty() || activity.is_empty() {
            report.rejected_events += 1;
            continue;
        }
        let resource = res_col.and_then(|i| rec.get(i)).filter(|r| !r.is_empty()).map(str::to_owned);
        let extras = extra_cols
            .iter()
            .filter_map(|(i, name, kind)| {
                let v = convert(rec.get(*i).unwrap_or(""), *kind, assume_utc);
                (!v.is_missing()).then(|| (name.clone(), v))
            })
            .collect();
        let event = Event { activity: activity.to_owned(), timestamp, resource, extras };
        let slot = *index.entry(case_id.to_owned()).or_insert_with(|| {
            cases.push(Case { case_id: case_id.to_owned(), events: Vec::new(), case_attributes: BTreeMap::new() });
            cases.len() - 1
        });
        cases[slot].events.push(event);
    }
    if report.rejected_events > 0 {
        report.warn(format!("{} rows rejected", report.rejected_events));
    }
    let log = EventLog::from_cases_with_report(cases, mapping, &mut report);
    Ok((log, report))
}

fn cell(v: &AttributeValue) -> String {
    match v {
        AttributeValue::Missing => String::new(),
        AttributeValue::Real(r) => pyfmt::float_repr(*r),
        AttributeValue::Timestamp(t) => format_timestamp(*t),
        other => other.to_string(),
    }
}

/// Writes the event table (case id, activity, timestamp, resource, event attributes).
/// Case-level attributes are not written.
pub fn write_csv(log: &EventLog, sink: impl Write) -> Result<()> {
    let m = log.column_mapping();
    let extras: BTreeSet<&str> = log.events().flat_map(|(_, e)| e.extras.keys().map(String::as_str)).collect();
    let mut writer = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| EventLogError::Csv(e.to_string());

    let mut header = vec![m.case_id.as_str(), m.activity.as_str(), m.timestamp.as_str()];
    header.extend(m.resource.as_deref());
    header.extend(extras.iter().copied());
    writer.write_record(&header).map_err(csv_err)?;

    for (case, event) in log.events() {
        let mut row = vec![case.case_id.clone(), event.activity.clone(), format_timestamp(event.timestamp)];
        if m.resource.is_some() {
            row.push(event.resource.clone().unwrap_or_default());
        }
        for name in &extras {
            row.push(event.extras.get(*name).map(cell).unwrap_or_default());
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}
