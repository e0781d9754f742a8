//! Random event logs and brute-force oracles for the log abstractions.

use std::collections::BTreeMap;

use promptmine::abstraction::Aggregation;
use promptmine::event_log::{at, Timestamp};
use promptmine::{AttributeValue, Case, ColumnMapping, Event, EventLog};
use rand::Rng;

pub const ACTIVITIES: [&str; 6] = ["Create Fine", "Send Fine", "Payment", "Add penalty", "Appeal -> Judge", "Notify"];
const REALS: [f64; 6] = [0.5, 1.25, 2.0, -3.5, 10.0, 7.75];

/// At most `max_cases` cases of 1..=`max_events` events over the first `activities` names.
/// The first event of the first case carries every optional attribute so all columns exist.
pub fn random_log(rng: &mut impl Rng, max_cases: usize, max_events: usize, activities: usize) -> EventLog {
    let n_cases = rng.random_range(1..=max_cases);
    let mut cases = Vec::with_capacity(n_cases);
    for c in 0..n_cases {
        let n = rng.random_range(1..=max_events);
        let mut t = rng.random_range(0..1_000_000i64) * 1_000;
        let mut events = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                t += match rng.random_range(0..4) {
                    0 => 0,
                    1 => rng.random_range(1..1_000),
                    _ => rng.random_range(1..100_000) * 1_000,
                };
            }
            let ts = at(t.div_euclid(1_000)) + chrono::Duration::milliseconds(t.rem_euclid(1_000));
            let mut e = Event::new(ACTIVITIES[rng.random_range(0..activities)], ts);
            let full = c == 0 && i == 0;
            if full || rng.random_bool(0.6) {
                e = e.with_resource(if rng.random_bool(0.5) { "r1" } else { "r2" });
            }
            if full || rng.random_bool(0.7) {
                e = e.with_attr("x", AttributeValue::Int(rng.random_range(-5..20)));
            }
            if full || rng.random_bool(0.7) {
                e = e.with_attr("y", AttributeValue::Real(REALS[rng.random_range(0..REALS.len())]));
            }
            events.push(e);
        }
        let mut case_attributes = BTreeMap::new();
        if c == 0 || rng.random_bool(0.7) {
            case_attributes.insert("amount".to_owned(), AttributeValue::Real(rng.random_range(0..200) as f64 / 4.0));
        }
        cases.push(Case { case_id: format!("case{c:02}"), events, case_attributes });
    }
    EventLog::from_cases(cases, ColumnMapping::default())
}

fn seconds(a: Timestamp, b: Timestamp) -> f64 {
    (b - a).num_microseconds().unwrap() as f64 / 1e6
}

fn aggregate(values: &[f64], agg: Aggregation) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    match agg {
        Aggregation::Mean => v.iter().sum::<f64>() / v.len() as f64,
        Aggregation::Median if v.len() % 2 == 1 => v[v.len() / 2],
        Aggregation::Median => (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0,
    }
}

/// Every consecutive event pair of every case, counted.
pub fn dfg_oracle(log: &EventLog, agg: Aggregation) -> BTreeMap<(String, String), (usize, f64)> {
    let mut gaps: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for case in log.cases() {
        for i in 1..case.events.len() {
            let (a, b) = (&case.events[i - 1], &case.events[i]);
            gaps.entry((a.activity.clone(), b.activity.clone())).or_default().push(seconds(a.timestamp, b.timestamp));
        }
    }
    gaps.into_iter().map(|(k, v)| (k, (v.len(), aggregate(&v, agg)))).collect()
}

pub fn variant_oracle(log: &EventLog, agg: Aggregation) -> BTreeMap<Vec<String>, (usize, f64)> {
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for case in log.cases() {
        let seq = case.events.iter().map(|e| e.activity.clone()).collect();
        let span = seconds(case.events[0].timestamp, case.events[case.events.len() - 1].timestamp);
        groups.entry(seq).or_default().push(span);
    }
    groups.into_iter().map(|(k, v)| (k, (v.len(), aggregate(&v, agg)))).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Quantile at `p` by linear interpolation between the two closest ranks.
pub fn interpolated(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn log_with(values: &[Option<f64>]) -> EventLog {
    let events = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let e = Event::new("A", at(i as i64));
            match v {
                Some(x) => e.with_attr("amount", AttributeValue::Real(*x)),
                None => e,
            }
        })
        .collect();
    EventLog::from_cases(
        vec![Case { case_id: "c".into(), events, case_attributes: Default::default() }],
        ColumnMapping::default(),
    )
}
