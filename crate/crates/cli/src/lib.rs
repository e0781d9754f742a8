//! The `promptmine` command line.
//!
//! Every subcommand reads an optional `--config` TOML file first and lets flags override it.
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on runtime failures.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use promptmine::abstraction::{Aggregation, TimestampStyle};
use promptmine::llm_client::{backend_from, ChatBackend};
use promptmine::prompt_catalog::{export_catalog, AbstractionKind, Category};
use promptmine::query_engine::{extract_sql, format_result, run_sql, write_result_csv};
use promptmine::session::{self, LogFormat, Outcome, SessionConfig, SessionError, SessionRecord};

/// Builds the chat backend for a session. Tests substitute one that refuses to be called.
pub type BackendFactory<'a> = &'a dyn Fn(&SessionConfig) -> Result<Box<dyn ChatBackend>>;

#[derive(Parser, Debug)]
#[command(name = "promptmine", version, about = "Process-mining abstractions for LLM prompts, with SQL hypothesis checking")]
pub struct Cli {
    /// Session configuration file (TOML); flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log progress to stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print an abstraction of a log or Petri net
    Abstract(AbstractArgs),
    /// Ask one catalog question about one abstraction
    Ask(AskArgs),
    /// Run the hypothesis formulation and SQL verification loop
    Hypothesize(HypothesizeArgs),
    /// Evaluate a SQL file against a log, without any model involved
    Query(QueryArgs),
    /// List the question catalog
    Catalog(CatalogArgs),
}

fn parse_format(s: &str) -> Result<LogFormat, String> {
    match s.to_ascii_lowercase().as_str() {
        "xes" => Ok(LogFormat::Xes),
        "csv" => Ok(LogFormat::Csv),
        other => Err(format!("unknown log format {other:?} (expected xes or csv)")),
    }
}

#[derive(Args, Debug, Default)]
struct LogArgs {
    /// Event log (.xes, .csv, optionally .gz)
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Override the format inferred from the file name
    #[arg(long, value_parser = parse_format)]
    log_format: Option<LogFormat>,
    /// CSV column holding the case id
    #[arg(long)]
    case_column: Option<String>,
    /// CSV column holding the activity
    #[arg(long)]
    activity_column: Option<String>,
    /// CSV column holding the timestamp
    #[arg(long)]
    timestamp_column: Option<String>,
    /// CSV column holding the resource
    #[arg(long)]
    resource_column: Option<String>,
    /// strftime pattern for CSV timestamps
    #[arg(long)]
    timestamp_format: Option<String>,
    /// Keep only lifecycle:transition=complete events
    #[arg(long)]
    lifecycle_complete_only: bool,
}

#[derive(Args, Debug, Default)]
struct RenderArgs {
    /// mean or median
    #[arg(long)]
    aggregation: Option<Aggregation>,
    /// Decimals for performance values
    #[arg(long)]
    decimals: Option<u32>,
    /// Prompt budget in tokens
    #[arg(long)]
    budget_tokens: Option<usize>,
    /// Characters per token used for budget estimates
    #[arg(long)]
    chars_per_token: Option<usize>,
    /// iso8601 or pandas
    #[arg(long)]
    timestamp_style: Option<TimestampStyle>,
}

#[derive(Args, Debug, Default)]
struct LlmArgs {
    /// Replay responses from this transcript instead of calling the API
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Save the conversation as a replay transcript
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Directory for session records
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Question catalog replacing the built-in one
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// System message sent before the prompt
    #[arg(long)]
    system_preamble: Option<String>,
}

#[derive(Args, Debug)]
struct AbstractArgs {
    #[command(flatten)]
    log: LogArgs,
    #[command(flatten)]
    render: RenderArgs,
    /// dfg, variants, petri_net or attributes
    #[arg(long)]
    kind: Option<AbstractionKind>,
    /// PNML file for the petri_net kind
    #[arg(long, value_name = "FILE")]
    pnml: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AskArgs {
    #[command(flatten)]
    log: LogArgs,
    #[command(flatten)]
    render: RenderArgs,
    #[command(flatten)]
    llm: LlmArgs,
    /// Question id (DQ1, CQ1, IQ1, IQ2)
    #[arg(long)]
    question: Option<String>,
    /// Abstraction to send with the question
    #[arg(long)]
    abstraction: Option<AbstractionKind>,
    #[arg(long, value_name = "FILE")]
    pnml: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HypothesizeArgs {
    #[command(flatten)]
    log: LogArgs,
    #[command(flatten)]
    render: RenderArgs,
    #[command(flatten)]
    llm: LlmArgs,
    /// Hypothesis question id
    #[arg(long)]
    question: Option<String>,
    /// Upper bound on model replies
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Result rows relayed to the model per query
    #[arg(long)]
    max_result_rows: Option<usize>,
    /// Table name the model is told to query
    #[arg(long)]
    table_name: Option<String>,
    /// Write each extracted query to this file
    #[arg(long, value_name = "FILE")]
    emit_sql: Option<PathBuf>,
    /// Ask before evaluating each query
    #[arg(long, overrides_with = "no_confirm")]
    confirm: bool,
    /// Evaluate queries without asking
    #[arg(long)]
    no_confirm: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[command(flatten)]
    log: LogArgs,
    /// File holding the query, or a model reply with --extract
    #[arg(long, value_name = "FILE")]
    sql: PathBuf,
    /// Pull the query out of a model reply first
    #[arg(long)]
    extract: bool,
    #[arg(long)]
    table_name: Option<String>,
    /// Rows to print (all by default)
    #[arg(long)]
    max_rows: Option<usize>,
    /// Also write the result as CSV
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    /// Catalog file to list instead of the built-in one
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Include the rubric of each question
    #[arg(long)]
    rubric: bool,
    /// Print the catalog as TOML, suitable for editing and --catalog
    #[arg(long)]
    export: bool,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<SessionError>() {
            Some(SessionError::Config(m)) => Failure::Usage(m.clone()),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn default_backend(config: &SessionConfig) -> Result<Box<dyn ChatBackend>> {
    Ok(backend_from(&config.llm, config.replay.as_deref())?)
}

/// Runs the CLI with the real backend.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, stdin, stdout, stderr, &default_backend)
}

pub fn run_with<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    backend: BackendFactory<'_>,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => return parse_failure(e, &args, stdout, stderr),
    };
    log::set_max_level(match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    });
    let name = subcommand_name(&cli.command);
    match dispatch(cli, stdin, stdout, stderr, backend) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}\n\nSee 'promptmine {name} --help'.");
            1
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e:#}");
            2
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Abstract(_) => "abstract",
        Command::Ask(_) => "ask",
        Command::Hypothesize(_) => "hypothesize",
        Command::Query(_) => "query",
        Command::Catalog(_) => "catalog",
    }
}

fn parse_failure(e: clap::Error, args: &[OsString], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    use clap::error::ErrorKind;
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        let _ = write!(stdout, "{}", e.render());
        return 0;
    }
    let _ = writeln!(stderr, "{}", e.render());
    let mut cmd = Cli::command();
    let sub = args.iter().skip(1).filter_map(|a| a.to_str()).find(|a| cmd.find_subcommand(a).is_some()).map(str::to_owned);
    let help = match sub.as_deref().and_then(|s| cmd.find_subcommand_mut(s)) {
        Some(sub) => sub.render_help(),
        None => cmd.render_help(),
    };
    let _ = write!(stderr, "{help}");
    1
}

fn base_config(path: Option<&PathBuf>) -> Result<SessionConfig, Failure> {
    match path {
        Some(p) => Ok(SessionConfig::load(p)?),
        None => Ok(SessionConfig::new(None, "")),
    }
}

fn apply_log(c: &mut SessionConfig, a: LogArgs) {
    if a.log.is_some() {
        c.log = a.log;
    }
    if a.log_format.is_some() {
        c.log_format = a.log_format;
    }
    if let Some(v) = a.case_column {
        c.columns.case_id = v;
    }
    if let Some(v) = a.activity_column {
        c.columns.activity = v;
    }
    if let Some(v) = a.timestamp_column {
        c.columns.timestamp = v;
    }
    if a.resource_column.is_some() {
        c.columns.resource = a.resource_column;
    }
    if a.timestamp_format.is_some() {
        c.timestamp_format = a.timestamp_format;
    }
    c.lifecycle_complete_only |= a.lifecycle_complete_only;
}

fn apply_render(c: &mut SessionConfig, a: RenderArgs) {
    if let Some(v) = a.aggregation {
        c.aggregation = v;
    }
    if a.decimals.is_some() {
        c.decimals = a.decimals;
    }
    if a.budget_tokens.is_some() {
        c.budget_tokens = a.budget_tokens;
    }
    if let Some(v) = a.chars_per_token {
        c.chars_per_token = v;
    }
    if let Some(v) = a.timestamp_style {
        c.timestamp_style = v;
    }
}

fn apply_llm(c: &mut SessionConfig, a: LlmArgs) {
    if a.replay.is_some() {
        c.replay = a.replay;
    }
    if a.record.is_some() {
        c.record = a.record;
    }
    if let Some(v) = a.model {
        c.llm.model = v;
    }
    if let Some(v) = a.base_url {
        c.llm.base_url = v;
    }
    if let Some(v) = a.temperature {
        c.llm.temperature = v;
    }
    if a.output_dir.is_some() {
        c.output_dir = a.output_dir;
    }
    if a.catalog.is_some() {
        c.catalog = a.catalog;
    }
    if let Some(v) = a.system_preamble {
        c.system_preamble = v;
    }
}

fn dispatch(
    cli: Cli,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    backend: BackendFactory<'_>,
) -> Result<(), Failure> {
    let mut config = base_config(cli.config.as_ref())?;
    match cli.command {
        Command::Abstract(a) => {
            apply_log(&mut config, a.log);
            apply_render(&mut config, a.render);
            if a.pnml.is_some() {
                config.pnml = a.pnml;
            }
            let kind = a
                .kind
                .or(config.abstraction)
                .ok_or_else(|| Failure::Usage("--kind is required (dfg, variants, petri_net or attributes)".into()))?;
            let log = match kind {
                AbstractionKind::PetriNet => None,
                _ => Some(load(&config, stderr)?),
            };
            let text = session::render_abstraction(&config, kind, log.as_ref(), &config.budget())?;
            writeln!(stdout, "{text}").context("writing output")?;
        }
        Command::Ask(a) => {
            apply_log(&mut config, a.log);
            apply_render(&mut config, a.render);
            apply_llm(&mut config, a.llm);
            if let Some(q) = a.question {
                config.question = q;
            }
            if a.abstraction.is_some() {
                config.abstraction = a.abstraction;
            }
            if a.pnml.is_some() {
                config.pnml = a.pnml;
            }
            if config.question.is_empty() {
                return Err(Failure::Usage("--question is required".into()));
            }
            config.validate()?;
            let backend = backend(&config)?;
            let record = session::run_direct(&config, backend.as_ref())?;
            report_warnings(&record, stderr);
            write!(stdout, "{}", record.summary()).context("writing output")?;
        }
        Command::Hypothesize(a) => {
            apply_log(&mut config, a.log);
            apply_render(&mut config, a.render);
            apply_llm(&mut config, a.llm);
            if let Some(q) = a.question {
                config.question = q;
            }
            if config.question.is_empty() {
                config.question = "HYP".into();
            }
            if let Some(v) = a.max_rounds {
                config.max_rounds = v;
            }
            if let Some(v) = a.max_result_rows {
                config.max_result_rows = v;
            }
            if let Some(v) = a.table_name {
                config.table_name = v;
            }
            if a.emit_sql.is_some() {
                config.emit_sql = a.emit_sql;
            }
            if a.confirm {
                config.confirm = Some(true);
            } else if a.no_confirm {
                config.confirm = Some(false);
            }
            config.validate()?;
            let backend = backend(&config)?;
            let mut confirm = |sql: &str| ask_confirmation(sql, stdin, stderr);
            let record = session::run_hypothesis(&config, backend.as_ref(), config.max_rounds, &mut confirm)?;
            report_warnings(&record, stderr);
            write_hypothesis(&record, config.max_result_rows, stdout).context("writing output")?;
        }
        Command::Query(a) => {
            apply_log(&mut config, a.log);
            if let Some(t) = a.table_name {
                config.table_name = t;
            }
            let text = fs::read_to_string(&a.sql).with_context(|| format!("reading {}", a.sql.display()))?;
            let sql = if a.extract { extract_sql(&text).context("extracting SQL")? } else { text };
            let log = load(&config, stderr)?;
            let table = run_sql(&sql, &log, &config.table_name).context("evaluating query")?;
            write!(stdout, "{}", format_result(&table, a.max_rows.unwrap_or(usize::MAX))).context("writing output")?;
            if let Some(path) = a.csv {
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_result_csv(&table, file).context("writing CSV")?;
            }
        }
        Command::Catalog(a) => {
            if a.catalog.is_some() {
                config.catalog = a.catalog;
            }
            let questions = config.questions()?;
            if a.export {
                write!(stdout, "{}", export_catalog(&questions)).context("writing output")?;
            } else {
                for q in &questions {
                    let kinds: Vec<&str> = q.compatible_abstractions.iter().map(|k| k.as_str()).collect();
                    let mode = if q.category == Category::Hypothesis { "hypothesize" } else { "ask" };
                    writeln!(stdout, "{}  [{}; {}; {}]", q.id, category_name(q.category), kinds.join(", "), mode)
                        .context("writing output")?;
                    writeln!(stdout, "    {}", q.text.replace('\n', "\n    ")).context("writing output")?;
                    if a.rubric {
                        for line in q.rubric_lines() {
                            writeln!(stdout, "    {line}").context("writing output")?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn category_name(c: Category) -> &'static str {
    match c {
        Category::Descriptive => "descriptive",
        Category::Conformance => "conformance",
        Category::Improvement => "improvement",
        Category::Hypothesis => "hypothesis",
    }
}

fn load(config: &SessionConfig, stderr: &mut dyn Write) -> Result<promptmine::EventLog, Failure> {
    let (log, report) = session::load_log(config)?;
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    Ok(log)
}

fn report_warnings(record: &SessionRecord, stderr: &mut dyn Write) {
    for w in &record.ingest_warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
}

fn ask_confirmation(sql: &str, stdin: &mut dyn BufRead, stderr: &mut dyn Write) -> bool {
    let _ = write!(stderr, "The model proposes this query:\n\n{sql}\n\nEvaluate it? [y/N] ");
    let _ = stderr.flush();
    let mut answer = String::new();
    if stdin.read_line(&mut answer).is_err() {
        return false;
    }
    matches!(answer.trim().to_ascii_lowercase().as_str(), "y" | "yes")
}

fn outcome_text(o: Outcome) -> &'static str {
    match o {
        Outcome::Answered => "answered",
        Outcome::Verdict => "verdict",
        Outcome::NoQueryVerdict => "no-query verdict",
        Outcome::MaxRoundsReached => "stopped after the maximum number of rounds",
        Outcome::QueryFailed => "stopped after repeated query failures",
        Outcome::Declined => "stopped: query declined",
    }
}

fn write_hypothesis(record: &SessionRecord, max_rows: usize, out: &mut dyn Write) -> std::io::Result<()> {
    for r in &record.rounds {
        let Some(sql) = &r.sql else { continue };
        writeln!(out, "-- round {}\n{sql}\n", r.round)?;
        if let Some(t) = &r.result {
            writeln!(out, "{}", format_result(t, max_rows))?;
        }
        if let Some(e) = &r.error {
            writeln!(out, "error: {e}\n")?;
        }
    }
    writeln!(out, "{}", record.final_answer().unwrap_or(""))?;
    writeln!(out, "\n({})", outcome_text(record.outcome))
}
