//! End-to-end runs: load inputs, build the abstraction and prompt, talk to the model and, in
//! hypothesis mode, relay query results until the model stops asking for queries.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use self::config::{LogFormat, SessionConfig};
use crate::abstraction::{
    compute_dfg, compute_variants, numeric_attributes, render_attributes, render_dfg, render_petri_net, render_variants,
    RenderBudget,
};
use crate::event_log::{parse_csv, parse_xes, CsvOptions, EventLog, IngestOptions, ParseReport};
use crate::llm_client::{record_transcript, send, ChatBackend, Conversation};
use crate::petri_net::parse_pnml;
use crate::prompt_catalog::{build_direct_prompt, build_hypothesis_prompt, AbstractionKind, PromptBundle, Question};
use crate::query_engine::{evaluate, extract_sql, format_result, parse_sql, QueryError, ResultTable};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
}

pub type Result<T, E = SessionError> = std::result::Result<T, E>;

fn stage<T, E: Into<BoxError>>(name: &'static str, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| SessionError::Stage { stage: name, source: e.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    Hypothesis,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Direct question answered.
    Answered,
    /// The model gave a final reply without SQL after at least one evaluated query.
    Verdict,
    /// The model's first reply contained no SQL.
    NoQueryVerdict,
    MaxRoundsReached,
    /// Two consecutive queries could not be evaluated.
    QueryFailed,
    /// The user declined to run a query.
    Declined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub sql: Option<String>,
    pub result: Option<ResultTable>,
    /// The text relayed back to the model.
    pub relayed: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_ms: u128,
    pub llm_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionInfo {
    pub id: String,
    pub text: String,
    pub rubric: Vec<String>,
}

/// Everything a run produced. Timings are left out under replay so records are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    pub mode: Mode,
    pub config: SessionConfig,
    pub question: QuestionInfo,
    pub abstraction: Vec<AbstractionKind>,
    pub ingest_warnings: Vec<String>,
    pub prompt: PromptBundle,
    pub conversation: Conversation,
    pub rounds: Vec<RoundRecord>,
    pub outcome: Outcome,
    pub timings: Option<Timings>,
}

impl SessionRecord {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serialises");
        s.push('\n');
        s
    }

    pub fn final_answer(&self) -> Option<&str> {
        self.conversation.last_assistant()
    }

    /// Final answer followed by the question's rubric, for human grading.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(self.final_answer().unwrap_or(""));
        out.push_str("\n\n");
        out.push_str(&format!("Rubric for {}:\n", self.question.id));
        for line in &self.question.rubric {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Writes `session.json` into a new directory under `root` named by the current UTC time.
    pub fn persist(&self, root: &Path) -> std::io::Result<PathBuf> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut dir = root.join(&stamp);
        let mut n = 1;
        while dir.exists() {
            dir = root.join(format!("{stamp}-{n}"));
            n += 1;
        }
        fs::create_dir_all(&dir)?;
        let path = dir.join("session.json");
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

fn open(path: &Path) -> std::io::Result<Box<dyn Read>> {
    let file = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz")) {
        Ok(Box::new(flate2::read::GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

/// Reads the configured event log.
pub fn load_log(config: &SessionConfig) -> Result<(EventLog, ParseReport)> {
    let path = config.log.as_deref().ok_or_else(|| SessionError::Config("no event log configured".into()))?;
    let format = config
        .log_format
        .or_else(|| LogFormat::infer(path))
        .ok_or_else(|| SessionError::Config(format!("cannot tell the format of {}; set log_format", path.display())))?;
    let reader = stage("load log", open(path))?;
    let ingest = IngestOptions { lifecycle_complete_only: config.lifecycle_complete_only, ..IngestOptions::default() };
    match format {
        LogFormat::Xes => stage("load log", parse_xes(reader, &ingest)),
        LogFormat::Csv => {
            let opts = CsvOptions {
                mapping: config.columns.clone(),
                timestamp_format: config.timestamp_format.clone(),
                ingest,
                ..CsvOptions::default()
            };
            stage("load log", parse_csv(reader, &opts))
        }
    }
}

/// Renders one abstraction as configured. `log` may be `None` only for the Petri-net kind.
pub fn render_abstraction(
    config: &SessionConfig,
    kind: AbstractionKind,
    log: Option<&EventLog>,
    budget: &RenderBudget,
) -> Result<String> {
    let need_log = || log.ok_or_else(|| SessionError::Config(format!("the {kind} abstraction requires an event log")));
    match kind {
        AbstractionKind::Dfg => {
            let dfg = compute_dfg(need_log()?, config.aggregation);
            stage("abstraction", render_dfg(&dfg, budget, config.decimals.unwrap_or(2)))
        }
        AbstractionKind::Variants => {
            let table = compute_variants(need_log()?, config.aggregation);
            stage("abstraction", render_variants(&table, budget, config.decimals))
        }
        AbstractionKind::Attributes => {
            let log = need_log()?;
            let rendered = render_attributes(log, &numeric_attributes(log), config.timestamp_style);
            Ok(rendered.text)
        }
        AbstractionKind::PetriNet => {
            let path = config.pnml.as_deref().ok_or_else(|| SessionError::Config("no PNML file configured".into()))?;
            let model = stage("load Petri net", parse_pnml(stage("load Petri net", open(path))?))?;
            for w in &model.warnings {
                log::warn!("{w}");
            }
            Ok(render_petri_net(&model.net, &model.initial, &model.final_marking))
        }
    }
}

fn question_info(q: &Question) -> QuestionInfo {
    QuestionInfo { id: q.id.clone(), text: q.text.clone(), rubric: q.rubric_lines() }
}

fn start_conversation(config: &SessionConfig, bundle: &PromptBundle) -> Result<Conversation> {
    let mut conv = stage("conversation", config.llm.conversation().with_system(&bundle.system_preamble))?;
    stage("conversation", conv.push_user(bundle.user_message()))?;
    Ok(conv)
}

fn finish(config: &SessionConfig, record: &SessionRecord) -> Result<()> {
    if let Some(path) = &config.record {
        stage("record transcript", record_transcript(&record.conversation, path))?;
    }
    if let Some(dir) = &config.output_dir {
        let path = stage("persist record", record.persist(dir))?;
        log::info!("session record written to {}", path.display());
    }
    Ok(())
}

fn timings(config: &SessionConfig, started: Instant, llm_ms: u128) -> Option<Timings> {
    config.replay.is_none().then(|| Timings { total_ms: started.elapsed().as_millis(), llm_ms })
}

/// Asks one question about one abstraction.
pub fn run_direct(config: &SessionConfig, backend: &dyn ChatBackend) -> Result<SessionRecord> {
    let started = Instant::now();
    config.validate()?;
    let question = config.question()?;
    if config.is_hypothesis()? {
        return Err(SessionError::Config(format!("{} is a hypothesis question; run it in hypothesis mode", question.id)));
    }
    let kind = config.abstraction.expect("validated");
    let (log, report) = match kind {
        AbstractionKind::PetriNet => (None, ParseReport::default()),
        _ => {
            let (log, report) = load_log(config)?;
            (Some(log), report)
        }
    };
    let budget = config.budget();
    let text = render_abstraction(config, kind, log.as_ref(), &budget)?;
    let bundle = stage("prompt", build_direct_prompt(&text, &question, &budget))?;
    let bundle = stage("prompt", bundle.with_system_preamble(&config.system_preamble, &budget))?;
    let mut conversation = start_conversation(config, &bundle)?;
    let llm_start = Instant::now();
    stage("llm", send(&mut conversation, backend))?;
    let llm_ms = llm_start.elapsed().as_millis();
    let record = SessionRecord {
        mode: Mode::Direct,
        config: config.clone(),
        question: question_info(&question),
        abstraction: vec![kind],
        ingest_warnings: report.warnings,
        prompt: bundle,
        conversation,
        rounds: Vec::new(),
        outcome: Outcome::Answered,
        timings: timings(config, started, llm_ms),
    };
    finish(config, &record)?;
    Ok(record)
}

fn failure_message(err: &QueryError, table_name: &str) -> String {
    match err {
        QueryError::Unsupported { construct, .. } => format!(
            "The query uses {construct}, which I cannot execute. Please rewrite it using only WITH, SELECT, FROM, JOIN ... ON, WHERE, GROUP BY, ORDER BY, LIMIT, CASE, the aggregates AVG, SUM, MIN, MAX, COUNT and the EPOCH function."
        ),
        other => format!(
            "The query could not be executed: {other}. Please send a corrected query over the \"{table_name}\" table."
        ),
    }
}

/// Runs the hypothesis loop for at most `max_rounds` model replies.
///
/// `confirm` is consulted before each query is evaluated when the configuration asks for
/// confirmation; returning `false` ends the run.
pub fn run_hypothesis(
    config: &SessionConfig,
    backend: &dyn ChatBackend,
    max_rounds: usize,
    confirm: &mut dyn FnMut(&str) -> bool,
) -> Result<SessionRecord> {
    let started = Instant::now();
    config.validate()?;
    if max_rounds == 0 {
        return Err(SessionError::Config("max_rounds must be at least 1".into()));
    }
    let question = config.question()?;
    if !config.is_hypothesis()? {
        return Err(SessionError::Config(format!("{} is not a hypothesis question", question.id)));
    }
    let (log, report) = load_log(config)?;
    let unlimited = RenderBudget::with_ratio(usize::MAX, config.chars_per_token.max(1));
    let variants = render_abstraction(config, AbstractionKind::Variants, Some(&log), &unlimited)?;
    let attributes = render_abstraction(config, AbstractionKind::Attributes, Some(&log), &unlimited)?;
    if attributes.is_empty() {
        return Err(SessionError::Config("the log has no numeric or timestamp attributes to summarise".into()));
    }
    let budget = config.budget();
    let bundle =
        stage("prompt", build_hypothesis_prompt(&variants, &attributes, log.column_mapping(), &config.table_name, &budget))?;
    let bundle = stage("prompt", bundle.with_system_preamble(&config.system_preamble, &budget))?;
    let mut conversation = start_conversation(config, &bundle)?;

    let mut rounds = Vec::new();
    let mut evaluated = 0usize;
    let mut failures = 0usize;
    let mut llm_ms = 0u128;
    let mut outcome = Outcome::MaxRoundsReached;
    for round in 1..=max_rounds {
        let t = Instant::now();
        let reply = stage("llm", send(&mut conversation, backend))?;
        llm_ms += t.elapsed().as_millis();
        let sql = match extract_sql(&reply) {
            Ok(sql) => sql,
            Err(_) => {
                rounds.push(RoundRecord { round, sql: None, result: None, relayed: None, error: None });
                outcome = if evaluated == 0 { Outcome::NoQueryVerdict } else { Outcome::Verdict };
                break;
            }
        };
        if let Some(path) = &config.emit_sql {
            stage("emit SQL", fs::write(path, format!("{sql}\n")))?;
        }
        if config.confirm_queries() && !confirm(&sql) {
            rounds.push(RoundRecord {
                round,
                sql: Some(sql),
                result: None,
                relayed: None,
                error: Some("declined by user".into()),
            });
            outcome = Outcome::Declined;
            break;
        }
        let (record, message) = match parse_sql(&sql).and_then(|q| evaluate(&q, &log, &config.table_name)) {
            Ok(table) => {
                evaluated += 1;
                failures = 0;
                let text = format_result(&table, config.max_result_rows);
                let message = format!("The query returned:\n\n{text}");
                (RoundRecord { round, sql: Some(sql), result: Some(table), relayed: Some(message.clone()), error: None }, message)
            }
            Err(e) => {
                failures += 1;
                log::warn!("round {round}: {e}");
                let message = failure_message(&e, &config.table_name);
                (
                    RoundRecord {
                        round,
                        sql: Some(sql),
                        result: None,
                        relayed: Some(message.clone()),
                        error: Some(e.to_string()),
                    },
                    message,
                )
            }
        };
        rounds.push(record);
        if failures >= 2 {
            outcome = Outcome::QueryFailed;
            break;
        }
        if round == max_rounds {
            break;
        }
        stage("conversation", conversation.push_user(message))?;
    }
    if outcome == Outcome::MaxRoundsReached || outcome == Outcome::QueryFailed {
        // The last relayed message was never sent; keep the record faithful to the conversation.
        if let Some(last) = rounds.last_mut() {
            last.relayed = None;
        }
    }
    let record = SessionRecord {
        mode: Mode::Hypothesis,
        config: config.clone(),
        question: question_info(&question),
        abstraction: vec![AbstractionKind::Variants, AbstractionKind::Attributes],
        ingest_warnings: report.warnings,
        prompt: bundle,
        conversation,
        rounds,
        outcome,
        timings: timings(config, started, llm_ms),
    };
    finish(config, &record)?;
    Ok(record)
}
