#![allow(dead_code)]

pub mod golden;
pub mod logs;
pub mod sqlref;

use std::cell::RefCell;
use std::path::PathBuf;

use promptmine::event_log::at;
use promptmine::llm_client::{ChatBackend, Conversation, LlmError, Result};
use promptmine::session::SessionConfig;
use promptmine::{AttributeValue, Case, ColumnMapping, Event, EventLog};

pub const PAYMENT_QUERY: &str = "WITH case_has_payment AS (\n    SELECT \"case:concept:name\", \n           MAX(CASE WHEN \"concept:name\" = 'Payment' THEN 1 ELSE 0 END)\n\t\t   as has_payment\n    FROM dataframe\n    GROUP BY \"case:concept:name\"\n)\nSELECT has_payment, AVG(expense) as avg_expense\nFROM dataframe\nJOIN case_has_payment ON\ndataframe.\"case:concept:name\" = case_has_payment.\"case:concept:name\"\nGROUP BY has_payment;";

pub fn hypothesis_reply() -> String {
    format!(
        "Hypothesis: fines that end up paid carry lower expenses than fines that are not paid. \
         This query compares the average expense of the events in cases with and without a Payment:\n\n\
         ```sql\n{PAYMENT_QUERY}\n```\n\nPlease run it and send me the results."
    )
}

pub const VERDICT_REPLY: &str = "The averages differ (10.0 with a payment, 25.0 without), but with so few cases the gap is not \
significant, so the expense hypothesis is not supported. As a next step I would examine whether the 'amount' \
attribute influences the presence of a Payment.";

pub const DQ1_REPLY: &str =
    "This is a road traffic fine management process: a fine is created, then either paid directly or sent to the offender.";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn hypothesis_config() -> SessionConfig {
    let mut c = SessionConfig::new(Some(fixture("fines.xes")), "HYP");
    c.replay = Some(fixture("hypothesis.jsonl"));
    c
}

pub fn dq1_config() -> SessionConfig {
    let mut c = SessionConfig::new(Some(fixture("fines.xes")), "DQ1");
    c.abstraction = Some(promptmine::AbstractionKind::Variants);
    c.replay = Some(fixture("dq1_variants.jsonl"));
    c
}

/// Answers from a fixed script, in order.
pub struct Scripted(RefCell<Vec<String>>);

impl Scripted {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        let mut v: Vec<String> = replies.into_iter().map(Into::into).collect();
        v.reverse();
        Self(RefCell::new(v))
    }
}

impl ChatBackend for Scripted {
    fn complete(&self, _: &Conversation, _: &mut Vec<String>) -> Result<String> {
        self.0.borrow_mut().pop().ok_or(LlmError::NotAwaitingReply)
    }
}

/// Two fines: c1 is paid (expenses 10 and missing), c2 is not (expenses 20 and 30).
pub fn two_cases() -> EventLog {
    let ev = |a: &str, t: i64, x: Option<i64>| {
        let e = Event::new(a, at(t));
        match x {
            Some(v) => e.with_attr("expense", AttributeValue::Int(v)),
            None => e,
        }
    };
    EventLog::from_cases(
        vec![
            Case {
                case_id: "c1".into(),
                events: vec![ev("Create Fine", 0, Some(10)), ev("Payment", 5, None)],
                case_attributes: Default::default(),
            },
            Case {
                case_id: "c2".into(),
                events: vec![ev("Create Fine", 0, Some(20)), ev("Send Fine", 9, Some(30))],
                case_attributes: Default::default(),
            },
        ],
        ColumnMapping::default(),
    )
}
