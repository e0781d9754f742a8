//! Pinned inputs whose rendering must match published text byte for byte.

use std::fs;

use chrono::{TimeZone, Utc};
use promptmine::abstraction::{
    render_attribute_summaries, render_dfg, render_petri_net, render_variants, DfgEdge, DirectlyFollowsGraph, RenderBudget,
    TimestampStyle, Variant, VariantTable,
};
use promptmine::event_log::{AttributeKind, AttributeSummary, QuantileValue};
use promptmine::petri_net::parse_pnml;
use promptmine::prompt_catalog::{build_hypothesis_prompt, catalog};
use promptmine::ColumnMapping;

use super::fixture;

pub const DFG_TOP5: &str = "Create Fine -> Send Fine ( frequency = 103392  performance = 7568635.65 )
Send Fine -> Insert Fine Notification ( frequency = 79757  performance = 1501626.95 )
Insert Fine Notification -> Add penalty ( frequency = 72334  performance = 5184000.0 )
Add penalty -> Send for Credit Collection ( frequency = 57182  performance = 45566346.44 )
Create Fine -> Payment ( frequency = 46952  performance = 905663.45 )";

pub const PETRI_NET: &str = "places: [ p1, sink, source ]
transitions: [ (A, 'A'), (B, 'B') ]
arcs: [ (A, 'A')->p1, (B, 'B')->sink, p1->(B, 'B'), source->(A, 'A') ]
initial marking: ['source:1']
final marking: ['sink:1']";

pub const VARIANTS_TOP3: &str = "Create Fine -> Send Fine -> Insert Fine Notification -> Add penalty -> Send for Credit Collection ( frequency = 56482  performance = 59591524.946000494 )
Create Fine -> Payment ( frequency = 46371  performance = 889688.4000776347 )
Create Fine -> Send Fine ( frequency = 20385  performance = 8380516.026490066 )";

pub const ATTRIBUTES: &str = "amount  empty: 331240  quantiles: {0.0: 0.0, 0.25: 33.6, 0.5: 38.0, 0.75: 71.5, 1.0: 8000.0}
article  empty: 411100  quantiles: {0.0: 7.0, 0.25: 7.0, 0.5: 157.0, 0.75: 157.0, 1.0: 401.0}
expense  empty: 457483  quantiles: {0.0: 0.0, 0.25: 10.0, 0.5: 11.88, 0.75: 13.5, 1.0: 76.0}
time:timestamp  empty: 0  quantiles: {0.0: Timestamp('2000-01-01 00:00:00+0000', tz='UTC'), 0.25: Timestamp('2002-11-12 00:00:00+0000', tz='UTC'), 0.5: Timestamp('2006-02-28 00:00:00+0000', tz='UTC'), 0.75: Timestamp('2009-03-30 00:00:00+0000', tz='UTC'), 1.0: Timestamp('2013-06-18 00:00:00+0000', tz='UTC')}";

/// The hypothesis prompt with the elided lines of the published example removed.
pub const HYPOTHESIS_PROMPT: &str = r#"If I have a process with the following process variants:
 Create Fine -> Send Fine -> Insert Fine Notification -> Add penalty -> Send for Credit Collection ( frequency = 56482  performance = 59591524.946000494 )
 Create Fine -> Payment ( frequency = 46371  performance = 889688.4000776347 )
 Create Fine -> Send Fine ( frequency = 20385  performance = 8380516.026490066 )

and the log of the process contains the following attributes:
amount  empty: 331240  quantiles: {0.0: 0.0, 0.25: 33.6, 0.5: 38.0, 0.75: 71.5, 1.0: 8000.0}
article  empty: 411100  quantiles: {0.0: 7.0, 0.25: 7.0, 0.5: 157.0, 0.75: 157.0, 1.0: 401.0}
expense  empty: 457483  quantiles: {0.0: 0.0, 0.25: 10.0, 0.5: 11.88, 0.75: 13.5, 1.0: 76.0}
time:timestamp  empty: 0  quantiles: {0.0: Timestamp('2000-01-01 00:00:00+0000', tz='UTC'), 0.25: Timestamp('2002-11-12 00:00:00+0000', tz='UTC'), 0.5: Timestamp('2006-02-28 00:00:00+0000', tz='UTC'), 0.75: Timestamp('2009-03-30 00:00:00+0000', tz='UTC'), 1.0: Timestamp('2013-06-18 00:00:00+0000', tz='UTC')}

Can you provide some hypothesis between the execution of the process and its attributes? I mean, can you provide me a DuckDB SQL query that I can execute, and return the results to you, in order for you to evaluate such hypothesis about the process? More in detail, the data is stored in a Pandas dataframe where each row is an event having the provided attributes (so there are no separate table containing the variant). Can you tell me in advance which hypothesis you want to verify? Please consider the following information: the case identifier is called "case:concept:name", the activity is stored inside the attribute "concept:name", the timestamp is stored inside the attribute "time:timestamp", the resource is stored inside the attribute "org:resource", there is not a variant column but that can be obtained as concatenation of the activities of a case, there is not a duration column but that can be obtained as difference between the timestamp of the first and the last event. Also, the dataframe is called "dataframe". You should use the EPOCH function of DuckDB to get the timestamp from the date."#;

fn check(what: &str, actual: &str, expected: &str) -> Result<(), String> {
    if actual == expected {
        Ok(())
    } else {
        Err(format!("{what} differs:\n--- expected\n{expected}\n--- actual\n{actual}"))
    }
}

fn edge(s: &str, t: &str, frequency: usize, performance: f64) -> DfgEdge {
    DfgEdge { source: s.into(), target: t.into(), frequency, performance }
}

/// Nine edges with the published top five; a budget of exactly five lines must keep just those.
pub fn dfg_top5() -> Result<(), String> {
    let dfg = DirectlyFollowsGraph::from_edges(vec![
        edge("Payment", "Payment", 3891, 1_026_000.3),
        edge("Add penalty", "Send for Credit Collection", 57182, 45566346.4412),
        edge("Create Fine", "Send Fine", 103392, 7568635.6459),
        edge("Insert Fine Notification", "Add penalty", 72334, 5184000.0),
        edge("Send Fine", "Insert Fine Notification", 79757, 1501626.9471),
        edge("Add penalty", "Payment", 18621, 10_149_306.2),
        edge("Create Fine", "Payment", 46952, 905663.4502),
        edge("Insert Fine Notification", "Payment", 3891, 3_465_000.0),
        edge("Send Fine", "Payment", 3300, 2_000_000.0),
    ]);
    let text = render_dfg(&dfg, &RenderBudget::chars(DFG_TOP5.len()), 2).map_err(|e| e.to_string())?;
    check("DFG", &text, DFG_TOP5)
}

pub fn petri_net() -> Result<(), String> {
    let file = fs::File::open(fixture("sequential.pnml")).map_err(|e| e.to_string())?;
    let model = parse_pnml(file).map_err(|e| e.to_string())?;
    check("Petri net", &render_petri_net(&model.net, &model.initial, &model.final_marking), PETRI_NET)
}

fn variants() -> VariantTable {
    let v = |seq: &[&str], frequency, performance| Variant {
        sequence: seq.iter().map(|s| s.to_string()).collect(),
        frequency,
        performance,
    };
    VariantTable::from_variants(vec![
        v(&["Create Fine", "Payment"], 46371, 889688.4000776347),
        v(&["Create Fine", "Send Fine"], 20385, 8380516.026490066),
        v(
            &["Create Fine", "Send Fine", "Insert Fine Notification", "Add penalty", "Send for Credit Collection"],
            56482,
            59591524.946000494,
        ),
        v(&["Create Fine", "Send Fine", "Insert Fine Notification", "Add penalty", "Payment"], 9520, 35037723.46218488),
    ])
}

fn summaries() -> Vec<AttributeSummary> {
    let real = |name: &str, empty, q: [f64; 5]| AttributeSummary {
        name: name.into(),
        kind: AttributeKind::Real,
        empty_count: empty,
        total_count: 561470,
        quantiles: Some(q.map(QuantileValue::Real)),
    };
    let day = |y, m, d| QuantileValue::Timestamp(Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap());
    vec![
        real("amount", 331240, [0.0, 33.6, 38.0, 71.5, 8000.0]),
        real("article", 411100, [7.0, 7.0, 157.0, 157.0, 401.0]),
        real("expense", 457483, [0.0, 10.0, 11.88, 13.5, 76.0]),
        AttributeSummary {
            name: "time:timestamp".into(),
            kind: AttributeKind::Timestamp,
            empty_count: 0,
            total_count: 561470,
            quantiles: Some([day(2000, 1, 1), day(2002, 11, 12), day(2006, 2, 28), day(2009, 3, 30), day(2013, 6, 18)]),
        },
    ]
}

/// Variant and attribute lines, and the whole hypothesis prompt built from them.
pub fn hypothesis_prompt() -> Result<(), String> {
    let variants_text =
        render_variants(&variants(), &RenderBudget::chars(VARIANTS_TOP3.len()), None).map_err(|e| e.to_string())?;
    check("variants", &variants_text, VARIANTS_TOP3)?;
    let attributes = render_attribute_summaries(&summaries(), TimestampStyle::Pandas);
    check("attributes", &attributes, ATTRIBUTES)?;
    let bundle =
        build_hypothesis_prompt(&variants_text, &attributes, &ColumnMapping::default(), "dataframe", &RenderBudget::unlimited())
            .map_err(|e| e.to_string())?;
    check("hypothesis prompt", &bundle.user_message(), HYPOTHESIS_PROMPT)
}

/// Built-in question texts and rubrics against hand transcriptions in `fixtures/questions`.
pub fn catalog_transcriptions() -> Result<(), String> {
    let questions = catalog();
    for q in &questions {
        let path = fixture("questions").join(format!("{}.txt", q.id));
        let expected = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut actual = format!("{}\n", q.text);
        for line in q.rubric_lines() {
            actual.push_str(&line);
            actual.push('\n');
        }
        check(&q.id, &actual, &expected)?;
    }
    let files = fs::read_dir(fixture("questions")).map_err(|e| e.to_string())?.count();
    if files != questions.len() {
        return Err(format!("{files} transcriptions for {} questions", questions.len()));
    }
    Ok(())
}
