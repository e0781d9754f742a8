//! Synthetic fine-management logs for benchmarking.

use promptmine::event_log::at;
use promptmine::{AttributeValue, Case, ColumnMapping, Event, EventLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATHS: [&[&str]; 4] = [
    &["Create Fine", "Send Fine", "Insert Fine Notification", "Add penalty", "Send for Credit Collection"],
    &["Create Fine", "Payment"],
    &["Create Fine", "Send Fine"],
    &["Create Fine", "Send Fine", "Insert Fine Notification", "Add penalty", "Payment"],
];

/// `cases` cases drawn from four process paths, with amount and expense attributes.
pub fn fines_log(cases: usize, seed: u64) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..cases)
        .map(|c| {
            let path = PATHS[rng.random_range(0..PATHS.len())];
            let mut t = rng.random_range(946_684_800..1_371_513_600i64);
            let events = path
                .iter()
                .map(|a| {
                    t += rng.random_range(0..10_000_000);
                    let mut e = Event::new(*a, at(t)).with_resource(format!("r{}", rng.random_range(0..50)));
                    if *a == "Create Fine" {
                        e = e.with_attr("amount", AttributeValue::Real(rng.random_range(20..400) as f64 / 2.0));
                    }
                    if rng.random_bool(0.3) {
                        e = e.with_attr("expense", AttributeValue::Real(rng.random_range(0..80) as f64 / 4.0));
                    }
                    e
                })
                .collect();
            Case { case_id: format!("A{c}"), events, case_attributes: Default::default() }
        })
        .collect();
    EventLog::from_cases(cases, ColumnMapping::default())
}

pub const PAYMENT_QUERY: &str = r#"WITH case_has_payment AS (
    SELECT "case:concept:name",
           MAX(CASE WHEN "concept:name" = 'Payment' THEN 1 ELSE 0 END) AS has_payment
    FROM dataframe
    GROUP BY "case:concept:name"
)
SELECT has_payment, AVG(expense) AS avg_expense
FROM dataframe
JOIN case_has_payment ON dataframe."case:concept:name" = case_has_payment."case:concept:name"
GROUP BY has_payment;"#;
