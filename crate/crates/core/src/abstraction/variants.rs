use std::collections::BTreeMap;

use serde::Serialize;

use super::Aggregation;
use crate::event_log::EventLog;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub sequence: Vec<String>,
    /// Number of cases following this sequence.
    pub frequency: usize,
    /// Aggregated case throughput time, in seconds.
    pub performance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VariantTable {
    /// Frequency-descending, ties by sequence.
    pub variants: Vec<Variant>,
}

impl VariantTable {
    pub fn from_variants(mut variants: Vec<Variant>) -> Self {
        sort_variants(&mut variants);
        Self { variants }
    }

    pub fn case_count(&self) -> usize {
        self.variants.iter().map(|v| v.frequency).sum()
    }
}

fn sort_variants(variants: &mut [Variant]) {
    variants.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.sequence.cmp(&b.sequence)));
}

pub fn compute_variants(log: &EventLog, aggregation: Aggregation) -> VariantTable {
    let mut groups: BTreeMap<Vec<&str>, Vec<f64>> = BTreeMap::new();
    for case in log.cases() {
        groups.entry(case.activities().collect()).or_default().push(case.throughput_seconds());
    }
    let variants = groups
        .into_iter()
        .map(|(seq, mut durations)| Variant {
            sequence: seq.into_iter().map(str::to_owned).collect(),
            frequency: durations.len(),
            performance: aggregation.apply(&mut durations),
        })
        .collect();
    VariantTable::from_variants(variants)
}
