//! In-memory event log model.
//!
//! An [`EventLog`] is an ordered list of [`Case`]s, each holding its events sorted by
//! timestamp. Ingestion happens through [`parse_xes`] or [`parse_csv`]; after that the log is
//! immutable and can be shared freely between threads.
//!
//! Besides the case-grouped view, the log can be seen as one flat table with one row per event
//! (see [`EventLog::columns`] and [`EventLog::value`]). Case attributes appear in that view
//! under a `case:` prefix and are repeated on every event of the case.

mod csv;
mod stats;
mod value;
mod xes;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use self::csv::{parse_csv, write_csv, CsvOptions};
pub use self::stats::{attribute_statistics, quantile_linear, AttributeSummary, QuantileValue, QUANTILE_LEVELS};
pub use self::value::{parse_timestamp, AttributeKind, AttributeValue, Timestamp};
pub use self::xes::parse_xes;

/// Prefix used for case-level attributes in the flat table view.
pub const CASE_PREFIX: &str = "case:";

#[derive(Debug, thiserror::Error)]
pub enum EventLogError {
    #[error("XML error at line {line}, column {column}: {message}")]
    Xml { line: usize, column: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("mapped column {role} = {column:?} not found in CSV header")]
    UnknownColumn { role: &'static str, column: String },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {name:?} has type {kind}, expected a numeric or timestamp attribute")]
    NonNumericAttribute { name: String, kind: AttributeKind },
}

pub type Result<T, E = EventLogError> = std::result::Result<T, E>;

/// Names of the standard columns in the flat table view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    pub resource: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            case_id: "case:concept:name".to_owned(),
            activity: "concept:name".to_owned(),
            timestamp: "time:timestamp".to_owned(),
            resource: Some("org:resource".to_owned()),
        }
    }
}

impl ColumnMapping {
    fn is_standard(&self, name: &str) -> bool {
        name == self.case_id || name == self.activity || name == self.timestamp || self.resource.as_deref() == Some(name)
    }
}

/// Options shared by all ingestion paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Coerce timestamps without an offset to UTC; when off they are rejected.
    pub assume_utc: bool,
    /// Keep only events whose `lifecycle:transition` is absent or `complete`.
    pub lifecycle_complete_only: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { assume_utc: true, lifecycle_complete_only: false }
    }
}

/// Counts of what ingestion had to throw away.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rejected_events: usize,
    pub dropped_cases: usize,
    pub filtered_events: usize,
    pub warnings: Vec<String>,
}

impl ParseReport {
    pub(crate) fn warn(&mut self, message: String) {
        log::debug!("{message}");
        self.warnings.push(message);
    }

    pub fn is_clean(&self) -> bool {
        self.rejected_events == 0 && self.dropped_cases == 0 && self.warnings.is_empty()
    }
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rejected events: {}, dropped cases: {}, filtered events: {}, warnings: {}",
            self.rejected_events,
            self.dropped_cases,
            self.filtered_events,
            self.warnings.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub activity: String,
    pub timestamp: Timestamp,
    pub resource: Option<String>,
    pub extras: BTreeMap<String, AttributeValue>,
}

impl Event {
    pub fn new(activity: impl Into<String>, timestamp: Timestamp) -> Self {
        Self { activity: activity.into(), timestamp, resource: None, extras: BTreeMap::new() }
    }

    pub fn with_resource(mut self, resource: impl Into<String>) -> Self {
        self.resource = Some(resource.into());
        self
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.extras.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case {
    pub case_id: String,
    pub events: Vec<Event>,
    pub case_attributes: BTreeMap<String, AttributeValue>,
}

impl Case {
    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.activity.as_str())
    }

    /// Seconds between the first and last event.
    pub fn throughput_seconds(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(first), Some(last)) => seconds_between(first.timestamp, last.timestamp),
            _ => 0.0,
        }
    }
}

pub(crate) fn seconds_between(from: Timestamp, to: Timestamp) -> f64 {
    (to - from).num_microseconds().map(|us| us as f64 / 1e6).unwrap_or(f64::INFINITY)
}

/// Type and fill statistics of one flat-view column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AttributeInfo {
    pub kind: AttributeKind,
    pub empty_count: usize,
    pub total_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLog {
    cases: Vec<Case>,
    attribute_catalog: BTreeMap<String, AttributeInfo>,
    column_mapping: ColumnMapping,
}

impl EventLog {
    /// Builds a log from raw cases.
    ///
    /// Events are stably sorted by timestamp inside each case, cases without events are
    /// dropped, and cases sharing an id are merged in order of appearance. Extras that collide
    /// with a standard column name are removed.
    pub fn from_cases(cases: Vec<Case>, column_mapping: ColumnMapping) -> Self {
        Self::from_cases_with_report(cases, column_mapping, &mut ParseReport::default())
    }

    pub(crate) fn from_cases_with_report(cases: Vec<Case>, column_mapping: ColumnMapping, report: &mut ParseReport) -> Self {
        let mut merged: Vec<Case> = Vec::with_capacity(cases.len());
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for mut case in cases {
            for event in &mut case.events {
                event.extras.retain(|k, _| !column_mapping.is_standard(k));
                event.timestamp = value::truncate_to_micros(event.timestamp);
            }
            if case.events.is_empty() {
                report.dropped_cases += 1;
                report.warn(format!("case {:?} has no valid events and was dropped", case.case_id));
                continue;
            }
            match index.get(&case.case_id) {
                Some(&i) => {
                    report.warn(format!("case id {:?} occurs more than once; traces merged", case.case_id));
                    let target = &mut merged[i];
                    target.events.append(&mut case.events);
                    for (k, v) in case.case_attributes {
                        target.case_attributes.entry(k).or_insert(v);
                    }
                }
                None => {
                    index.insert(case.case_id.clone(), merged.len());
                    merged.push(case);
                }
            }
        }
        for case in &mut merged {
            case.events.sort_by_key(|e| e.timestamp);
        }
        let attribute_catalog = build_catalog(&merged, &column_mapping);
        Self { cases: merged, attribute_catalog, column_mapping }
    }

    pub fn empty(column_mapping: ColumnMapping) -> Self {
        Self::from_cases(Vec::new(), column_mapping)
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.cases.iter().map(|c| c.events.len()).sum()
    }

    pub fn attribute_catalog(&self) -> &BTreeMap<String, AttributeInfo> {
        &self.attribute_catalog
    }

    pub fn column_mapping(&self) -> &ColumnMapping {
        &self.column_mapping
    }

    /// Column names of the flat table view, standard columns first.
    pub fn columns(&self) -> Vec<String> {
        let m = &self.column_mapping;
        let mut cols = vec![m.case_id.clone(), m.activity.clone(), m.timestamp.clone()];
        if let Some(r) = &m.resource {
            cols.push(r.clone());
        }
        cols.extend(self.attribute_catalog.keys().filter(|k| !m.is_standard(k)).cloned());
        cols
    }

    /// Value of `column` for one event in the flat table view.
    pub fn value(&self, case: &Case, event: &Event, column: &str) -> AttributeValue {
        let m = &self.column_mapping;
        if column == m.case_id {
            return AttributeValue::Text(case.case_id.clone());
        }
        if column == m.activity {
            return AttributeValue::Text(event.activity.clone());
        }
        if column == m.timestamp {
            return AttributeValue::Timestamp(event.timestamp);
        }
        if m.resource.as_deref() == Some(column) {
            return event.resource.clone().map_or(AttributeValue::Missing, AttributeValue::Text);
        }
        if let Some(v) = event.extras.get(column) {
            return v.clone();
        }
        column.strip_prefix(CASE_PREFIX).and_then(|k| case.case_attributes.get(k)).cloned().unwrap_or(AttributeValue::Missing)
    }

    /// Iterates all events in case order.
    pub fn events(&self) -> impl Iterator<Item = (&Case, &Event)> {
        self.cases.iter().flat_map(|c| c.events.iter().map(move |e| (c, e)))
    }
}

fn build_catalog(cases: &[Case], mapping: &ColumnMapping) -> BTreeMap<String, AttributeInfo> {
    let total: usize = cases.iter().map(|c| c.events.len()).sum();
    let mut kinds: BTreeMap<String, (Option<AttributeKind>, usize)> = BTreeMap::new();
    let mut observe = |name: &str, value: &AttributeValue, times: usize| {
        let slot = kinds.entry(name.to_owned()).or_insert((None, 0));
        if let Some(kind) = value.kind() {
            slot.0 = Some(slot.0.map_or(kind, |k| k.merge(kind)));
            slot.1 += times;
        }
    };
    for case in cases {
        for event in &case.events {
            for (k, v) in &event.extras {
                observe(k, v, 1);
            }
        }
        for (k, v) in &case.case_attributes {
            observe(&format!("{CASE_PREFIX}{k}"), v, case.events.len());
        }
    }

    let mut catalog: BTreeMap<String, AttributeInfo> = kinds
        .into_iter()
        .map(|(name, (kind, filled))| {
            let info =
                AttributeInfo { kind: kind.unwrap_or(AttributeKind::Text), empty_count: total - filled, total_count: total };
            (name, info)
        })
        .collect();
    let full = |kind| AttributeInfo { kind, empty_count: 0, total_count: total };
    catalog.insert(mapping.case_id.clone(), full(AttributeKind::Text));
    catalog.insert(mapping.activity.clone(), full(AttributeKind::Text));
    catalog.insert(mapping.timestamp.clone(), full(AttributeKind::Timestamp));
    if let Some(r) = &mapping.resource {
        let filled = cases.iter().flat_map(|c| &c.events).filter(|e| e.resource.is_some()).count();
        catalog.insert(r.clone(), AttributeInfo { kind: AttributeKind::Text, empty_count: total - filled, total_count: total });
    }
    catalog
}

/// Convenience for tests and synthetic logs: `at(0)` is the Unix epoch plus zero seconds.
pub fn at(seconds: i64) -> Timestamp {
    DateTime::<Utc>::from_timestamp(seconds, 0).expect("timestamp in range")
}
