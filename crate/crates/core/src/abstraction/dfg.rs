use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::Aggregation;
use crate::event_log::{seconds_between, EventLog};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfgEdge {
    pub source: String,
    pub target: String,
    pub frequency: usize,
    /// Aggregated time between the two events, in seconds.
    pub performance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DirectlyFollowsGraph {
    /// Frequency-descending, then by (source, target).
    pub edges: Vec<DfgEdge>,
    pub activities: BTreeSet<String>,
    pub start_activities: BTreeMap<String, usize>,
    pub end_activities: BTreeMap<String, usize>,
}

impl DirectlyFollowsGraph {
    /// Builds a graph from arbitrary edges, restoring the canonical edge order.
    pub fn from_edges(mut edges: Vec<DfgEdge>) -> Self {
        sort_edges(&mut edges);
        let activities = edges.iter().flat_map(|e| [e.source.clone(), e.target.clone()]).collect();
        Self { edges, activities, ..Default::default() }
    }

    pub fn total_frequency(&self) -> usize {
        self.edges.iter().map(|e| e.frequency).sum()
    }
}

pub(crate) fn sort_edges(edges: &mut [DfgEdge]) {
    edges.sort_by(|a, b| {
        b.frequency.cmp(&a.frequency).then_with(|| a.source.cmp(&b.source)).then_with(|| a.target.cmp(&b.target))
    });
}

/// Counts directly-follows pairs within each case and aggregates their time deltas.
pub fn compute_dfg(log: &EventLog, aggregation: Aggregation) -> DirectlyFollowsGraph {
    let mut deltas: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut dfg = DirectlyFollowsGraph::default();
    for case in log.cases() {
        for pair in case.events.windows(2) {
            let delta = seconds_between(pair[0].timestamp, pair[1].timestamp);
            debug_assert!(delta >= 0.0, "events are sorted at ingestion");
            deltas.entry((&pair[0].activity, &pair[1].activity)).or_default().push(delta);
        }
        for e in &case.events {
            if !dfg.activities.contains(&e.activity) {
                dfg.activities.insert(e.activity.clone());
            }
        }
        if let (Some(first), Some(last)) = (case.events.first(), case.events.last()) {
            *dfg.start_activities.entry(first.activity.clone()).or_default() += 1;
            *dfg.end_activities.entry(last.activity.clone()).or_default() += 1;
        }
    }
    dfg.edges = deltas
        .into_iter()
        .map(|((source, target), mut values)| DfgEdge {
            source: source.to_owned(),
            target: target.to_owned(),
            frequency: values.len(),
            performance: aggregation.apply(&mut values),
        })
        .collect();
    sort_edges(&mut dfg.edges);
    dfg
}
