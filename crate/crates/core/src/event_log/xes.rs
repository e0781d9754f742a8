//! XES reader (IEEE 1849 subset).
//!
//! Understands `log`/`trace`/`event` with `string`, `date`, `int`, `float`, `boolean` and `id`
//! attribute elements. Nested attributes, lists and containers are skipped. `extension`
//! declarations are ignored; `global` and `classifier` declarations are ignored with a warning.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::value::parse_timestamp;
use super::{AttributeValue, Case, ColumnMapping, Event, EventLog, EventLogError, IngestOptions, ParseReport, Result};
use crate::xml;

const CONCEPT_NAME: &str = "concept:name";
const TIMESTAMP: &str = "time:timestamp";
const RESOURCE: &str = "org:resource";
const LIFECYCLE: &str = "lifecycle:transition";

const ATTRIBUTE_ELEMENTS: &[&str] = &["string", "date", "int", "float", "boolean", "id", "list", "container"];

#[derive(Default)]
struct TraceBuilder {
    attributes: BTreeMap<String, AttributeValue>,
    events: Vec<Event>,
}

enum Owner {
    Log,
    Trace,
    Event,
}

struct XesBuilder<'a> {
    options: &'a IngestOptions,
    report: ParseReport,
    cases: Vec<Case>,
    trace: Option<TraceBuilder>,
    event: Option<BTreeMap<String, AttributeValue>>,
    // open attribute elements; children of attributes are meta-attributes and are skipped
    attr_depth: usize,
    // open `global` elements whose children declare defaults, not values
    ignored_depth: usize,
    ignored_seen: BTreeSet<String>,
    anonymous_traces: usize,
}

impl<'a> XesBuilder<'a> {
    fn owner(&self) -> Owner {
        if self.event.is_some() {
            Owner::Event
        } else if self.trace.is_some() {
            Owner::Trace
        } else {
            Owner::Log
        }
    }

    fn open(&mut self, e: &BytesStart<'_>, empty: bool) {
        let name = xml::local_name(e);
        if self.ignored_depth > 0 {
            if !empty {
                self.ignored_depth += 1;
            }
            return;
        }
        match name.as_str() {
            "trace" => {
                if self.trace.is_some() {
                    self.report.warn("nested trace element ignored".to_owned());
                } else {
                    self.trace = Some(TraceBuilder::default());
                    if empty {
                        self.close_trace();
                    }
                }
            }
            "event" => {
                if self.trace.is_none() {
                    self.report.rejected_events += 1;
                    self.report.warn("event outside of a trace ignored".to_owned());
                    if !empty {
                        self.ignored_depth = 1;
                    }
                } else {
                    self.event = Some(BTreeMap::new());
                    if empty {
                        self.close_event();
                    }
                }
            }
            "extension" | "global" | "classifier" => {
                if name != "extension" && self.ignored_seen.insert(name.clone()) {
                    self.report.warn(format!("XES {name} declarations are ignored"));
                }
                if !empty {
                    self.ignored_depth = 1;
                }
            }
            n if ATTRIBUTE_ELEMENTS.contains(&n) => {
                if self.attr_depth == 0 {
                    self.attribute(n, e);
                }
                if !empty {
                    self.attr_depth += 1;
                }
            }
            _ => {}
        }
    }

    fn close(&mut self, name: &str) {
        if self.ignored_depth > 0 {
            self.ignored_depth -= 1;
            return;
        }
        match name {
            "event" if self.attr_depth == 0 => self.close_event(),
            "trace" if self.attr_depth == 0 => self.close_trace(),
            n if ATTRIBUTE_ELEMENTS.contains(&n) => self.attr_depth = self.attr_depth.saturating_sub(1),
            _ => {}
        }
    }

    fn attribute(&mut self, element: &str, e: &BytesStart<'_>) {
        let attrs = xml::attributes(e);
        let Some(key) = attrs.get("key").cloned() else {
            self.report.warn(format!("<{element}> without key ignored"));
            return;
        };
        let raw = attrs.get("value").cloned().unwrap_or_default();
        let value = match element {
            "string" | "id" => AttributeValue::Text(raw),
            "int" => raw.trim().parse().map(AttributeValue::Int).unwrap_or(AttributeValue::Text(raw)),
            "float" => raw.trim().parse().map(AttributeValue::Real).unwrap_or(AttributeValue::Text(raw)),
            "boolean" => match raw.trim().to_ascii_lowercase().as_str() {
                "true" => AttributeValue::Bool(true),
                "false" => AttributeValue::Bool(false),
                _ => AttributeValue::Text(raw),
            },
            "date" => match parse_timestamp(&raw, self.options.assume_utc) {
                Some(t) => AttributeValue::Timestamp(t),
                None => {
                    self.report.warn(format!("unparseable date {raw:?} for key {key:?}"));
                    AttributeValue::Missing
                }
            },
            // lists and containers carry no scalar value
            _ => return,
        };
        match self.owner() {
            Owner::Event => {
                self.event.as_mut().unwrap().insert(key, value);
            }
            Owner::Trace => {
                self.trace.as_mut().unwrap().attributes.insert(key, value);
            }
            Owner::Log => {}
        }
    }

    fn close_event(&mut self) {
        let Some(mut attrs) = self.event.take() else { return };
        let activity = match attrs.remove(CONCEPT_NAME) {
            Some(AttributeValue::Text(s)) if !s.is_empty() => s,
            _ => {
                self.report.rejected_events += 1;
                return;
            }
        };
        let timestamp = match attrs.remove(TIMESTAMP) {
            Some(AttributeValue::Timestamp(t)) => t,
            _ => {
                self.report.rejected_events += 1;
                return;
            }
        };
        if self.options.lifecycle_complete_only {
            if let Some(v) = attrs.get(LIFECYCLE) {
                if !v.to_string().eq_ignore_ascii_case("complete") {
                    self.report.filtered_events += 1;
                    return;
                }
            }
        }
        let resource = match attrs.remove(RESOURCE) {
            None | Some(AttributeValue::Missing) => None,
            Some(v) => Some(v.to_string()),
        };
        let trace = self.trace.as_mut().expect("event inside trace");
        trace.events.push(Event { activity, timestamp, resource, extras: attrs });
    }

    fn close_trace(&mut self) {
        let Some(mut trace) = self.trace.take() else { return };
        let case_id = match trace.attributes.remove(CONCEPT_NAME) {
            Some(v) if !v.is_missing() => v.to_string(),
            _ => {
                self.anonymous_traces += 1;
                let id = format!("trace-{}", self.anonymous_traces);
                self.report.warn(format!("trace without {CONCEPT_NAME}; assigned id {id:?}"));
                id
            }
        };
        self.cases.push(Case { case_id, events: trace.events, case_attributes: trace.attributes });
    }
}

/// Reads an XES document into an [`EventLog`] with the standard column mapping.
pub fn parse_xes(mut source: impl Read, options: &IngestOptions) -> Result<(EventLog, ParseReport)> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;

    let mut reader = Reader::from_reader(bytes.as_slice());
    reader.config_mut().trim_text(true);
    let mut builder = XesBuilder {
        options,
        report: ParseReport::default(),
        cases: Vec::new(),
        trace: None,
        event: None,
        attr_depth: 0,
        ignored_depth: 0,
        ignored_seen: BTreeSet::new(),
        anonymous_traces: 0,
    };
    let mut saw_log = false;

    loop {
        match reader.read_event() {
            Ok(XmlEvent::Start(e)) => {
                saw_log |= e.local_name().as_ref() == b"log";
                builder.open(&e, false);
            }
            Ok(XmlEvent::Empty(e)) => {
                saw_log |= e.local_name().as_ref() == b"log";
                builder.open(&e, true);
            }
            Ok(XmlEvent::End(e)) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                builder.close(&name);
            }
            Ok(XmlEvent::Eof) => break,
            Ok(_) => {}
            Err(err) => {
                let (line, column) = xml::error_position(&reader, &bytes);
                return Err(EventLogError::Xml { line, column, message: err.to_string() });
            }
        }
    }
    if !saw_log {
        return Err(EventLogError::Xml { line: 1, column: 1, message: "no <log> element found".to_owned() });
    }

    let XesBuilder { cases, mut report, .. } = builder;
    if report.rejected_events > 0 {
        report.warn(format!("{} events rejected for missing {CONCEPT_NAME} or {TIMESTAMP}", report.rejected_events));
    }
    let log = EventLog::from_cases_with_report(cases, ColumnMapping::default(), &mut report);
    Ok((log, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::AttributeKind;

    fn parse(src: &str) -> (EventLog, ParseReport) {
        parse_xes(src.as_bytes(), &IngestOptions::default()).unwrap()
    }

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="c1"/>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2020-01-01T00:00:00Z"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2020-01-01T00:00:10Z"/>
    </event>
  </trace>
</log>"#;

    #[test]
    fn minimal_document() {
        let (log, report) = parse(MINIMAL);
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(log.cases().len(), 1);
        assert_eq!(log.cases()[0].case_id, "c1");
        assert_eq!(log.cases()[0].activities().collect::<Vec<_>>(), ["A", "B"]);
    }

    #[test]
    fn out_of_order_events_are_sorted() {
        let src = MINIMAL.replace("2020-01-01T00:00:10Z", "2019-12-31T23:59:50Z");
        let (log, _) = parse(&src);
        assert_eq!(log.cases()[0].activities().collect::<Vec<_>>(), ["B", "A"]);
    }

    #[test]
    fn typed_attributes_and_standard_mapping() {
        let src = r#"<log>
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <global scope="event"><string key="concept:name" value="__INVALID__"/></global>
  <classifier name="Activity" keys="concept:name"/>
  <trace>
    <string key="concept:name" value="A1"/>
    <float key="amount" value="35.0"/>
    <event>
      <string key="concept:name" value="Create Fine"/>
      <string key="org:resource" value="561"/>
      <date key="time:timestamp" value="2006-07-24T00:00:00.000+02:00"/>
      <int key="article" value="157"/>
      <boolean key="paid" value="false"/>
      <string key="note" value="x"><string key="meta" value="ignored"/></string>
      <list key="tags"><values><string key="t" value="nested"/></values></list>
    </event>
  </trace>
</log>"#;
        let (log, report) = parse(src);
        assert_eq!(report.rejected_events, 0);
        assert_eq!(report.warnings.len(), 2);
        let case = &log.cases()[0];
        assert_eq!(case.case_attributes["amount"], AttributeValue::Real(35.0));
        let e = &case.events[0];
        assert_eq!(e.resource.as_deref(), Some("561"));
        assert_eq!(e.extras["article"], AttributeValue::Int(157));
        assert_eq!(e.extras["paid"], AttributeValue::Bool(false));
        assert_eq!(e.extras["note"], AttributeValue::Text("x".into()));
        assert!(!e.extras.contains_key("meta") && !e.extras.contains_key("t"));
        assert_eq!(log.attribute_catalog()["case:amount"].kind, AttributeKind::Real);
        assert_eq!(e.timestamp.to_rfc3339(), "2006-07-23T22:00:00+00:00");
    }

    #[test]
    fn invalid_events_rejected_and_empty_traces_dropped() {
        let src = r#"<log>
  <trace><string key="concept:name" value="c1"/>
    <event><string key="concept:name" value="A"/></event>
    <event><date key="time:timestamp" value="2020-01-01T00:00:00Z"/></event>
  </trace>
  <trace><string key="concept:name" value="c2"/>
    <event><string key="concept:name" value="A"/><date key="time:timestamp" value="2020-01-01T00:00:00Z"/></event>
  </trace>
</log>"#;
        let (log, report) = parse(src);
        assert_eq!(report.rejected_events, 2);
        assert_eq!(report.dropped_cases, 1);
        assert_eq!(log.cases().len(), 1);
        assert_eq!(log.cases()[0].case_id, "c2");
    }

    #[test]
    fn lifecycle_filter() {
        let src = r#"<log><trace><string key="concept:name" value="c1"/>
    <event><string key="concept:name" value="A"/><string key="lifecycle:transition" value="start"/><date key="time:timestamp" value="2020-01-01T00:00:00Z"/></event>
    <event><string key="concept:name" value="A"/><string key="lifecycle:transition" value="complete"/><date key="time:timestamp" value="2020-01-01T00:00:05Z"/></event>
</trace></log>"#;
        let (all, _) = parse(src);
        assert_eq!(all.event_count(), 2);
        let opts = IngestOptions { lifecycle_complete_only: true, ..Default::default() };
        let (filtered, report) = parse_xes(src.as_bytes(), &opts).unwrap();
        assert_eq!(filtered.event_count(), 1);
        assert_eq!(report.filtered_events, 1);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_xes("<log>\n  <trace>\n  </event>\n</log>".as_bytes(), &IngestOptions::default()).unwrap_err();
        match err {
            EventLogError::Xml { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn naive_dates_rejected_without_assume_utc() {
        let src = MINIMAL.replace("00:00:00Z", "00:00:00").replace("00:00:10Z", "00:00:10");
        let opts = IngestOptions { assume_utc: false, ..Default::default() };
        let (log, report) = parse_xes(src.as_bytes(), &opts).unwrap();
        assert!(log.is_empty());
        assert_eq!(report.rejected_events, 2);
    }
}
