use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, SessionError};
use crate::abstraction::{Aggregation, RenderBudget, TimestampStyle, DEFAULT_CHARS_PER_TOKEN};
use crate::event_log::ColumnMapping;
use crate::llm_client::LlmConfig;
use crate::prompt_catalog::{catalog, find_question, import_catalog, AbstractionKind, Category, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Xes,
    Csv,
}

impl LogFormat {
    /// Guesses the format from the file name; `.gz` is looked through.
    pub fn infer(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
        let name = name.strip_suffix(".gz").unwrap_or(&name);
        if name.ends_with(".xes") {
            Some(LogFormat::Xes)
        } else if name.ends_with(".csv") {
            Some(LogFormat::Csv)
        } else {
            None
        }
    }
}

fn default_ratio() -> usize {
    DEFAULT_CHARS_PER_TOKEN
}

fn default_table() -> String {
    "dataframe".to_owned()
}

fn default_rows() -> usize {
    30
}

fn default_rounds() -> usize {
    5
}

/// Everything one run needs. Loadable from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Event log (XES or CSV, optionally gzip-compressed). Not needed for Petri-net questions.
    #[serde(default)]
    pub log: Option<PathBuf>,
    #[serde(default)]
    pub log_format: Option<LogFormat>,
    /// Column names for CSV logs.
    #[serde(default)]
    pub columns: ColumnMapping,
    #[serde(default)]
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub lifecycle_complete_only: bool,
    #[serde(default)]
    pub pnml: Option<PathBuf>,
    /// Question catalog file replacing the built-in questions.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    pub question: String,
    #[serde(default)]
    pub abstraction: Option<AbstractionKind>,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Prompt budget in tokens; unlimited when absent.
    #[serde(default)]
    pub budget_tokens: Option<usize>,
    #[serde(default = "default_ratio")]
    pub chars_per_token: usize,
    /// Rounding of performance values; DFG lines default to 2 decimals, variants to full precision.
    #[serde(default)]
    pub decimals: Option<u32>,
    #[serde(default)]
    pub timestamp_style: TimestampStyle,
    #[serde(default = "default_table")]
    pub table_name: String,
    #[serde(default = "default_rows")]
    pub max_result_rows: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub system_preamble: String,
    #[serde(default)]
    pub llm: LlmConfig,
    /// Replay fixture; when set no network access happens.
    #[serde(default)]
    pub replay: Option<PathBuf>,
    /// Where to write the conversation as a replay fixture.
    #[serde(default)]
    pub record: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write each extracted query here for use with an external engine.
    #[serde(default)]
    pub emit_sql: Option<PathBuf>,
    /// Ask before evaluating model-written SQL. Defaults to on for live backends, off for replay.
    #[serde(default)]
    pub confirm: Option<bool>,
}

impl SessionConfig {
    pub fn new(log: Option<PathBuf>, question: &str) -> Self {
        Self {
            log,
            log_format: None,
            columns: ColumnMapping::default(),
            timestamp_format: None,
            lifecycle_complete_only: false,
            pnml: None,
            catalog: None,
            question: question.to_owned(),
            abstraction: None,
            aggregation: Aggregation::default(),
            budget_tokens: None,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
            decimals: None,
            timestamp_style: TimestampStyle::default(),
            table_name: default_table(),
            max_result_rows: default_rows(),
            max_rounds: default_rounds(),
            system_preamble: String::new(),
            llm: LlmConfig::default(),
            replay: None,
            record: None,
            output_dir: None,
            emit_sql: None,
            confirm: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SessionError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn budget(&self) -> RenderBudget {
        let ratio = self.chars_per_token.max(1);
        match self.budget_tokens {
            Some(t) => RenderBudget::with_ratio(t.saturating_mul(ratio).max(1), ratio),
            None => RenderBudget::with_ratio(usize::MAX, ratio),
        }
    }

    pub fn confirm_queries(&self) -> bool {
        self.confirm.unwrap_or(self.replay.is_none())
    }

    pub fn questions(&self) -> Result<Vec<Question>> {
        match &self.catalog {
            None => Ok(catalog()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| SessionError::Config(format!("{}: {e}", p.display())))?;
                import_catalog(&text).map_err(|e| SessionError::Config(e.to_string()))
            }
        }
    }

    pub fn question(&self) -> Result<Question> {
        let all = self.questions()?;
        find_question(&all, &self.question)
            .cloned()
            .ok_or_else(|| SessionError::Config(format!("unknown question {:?}", self.question)))
    }

    pub fn is_hypothesis(&self) -> Result<bool> {
        Ok(self.question()?.category == Category::Hypothesis)
    }

    /// Checks the question/abstraction pairing and required inputs.
    pub fn validate(&self) -> Result<()> {
        let q = self.question()?;
        let err = |m: String| Err(SessionError::Config(m));
        if self.chars_per_token == 0 {
            return err("chars_per_token must be positive".into());
        }
        if self.budget_tokens == Some(0) {
            return err("budget_tokens must be positive".into());
        }
        if self.max_rounds == 0 {
            return err("max_rounds must be at least 1".into());
        }
        if self.max_result_rows == 0 {
            return err("max_result_rows must be at least 1".into());
        }
        if q.category == Category::Hypothesis {
            if let Some(k) = self.abstraction {
                if !matches!(k, AbstractionKind::Variants | AbstractionKind::Attributes) {
                    return err(format!("{} uses the variants and attributes abstractions, not {k}", q.id));
                }
            }
            if !(q.is_compatible(AbstractionKind::Variants) && q.is_compatible(AbstractionKind::Attributes)) {
                return err(format!("hypothesis question {} must accept the variants and attributes abstractions", q.id));
            }
            if self.log.is_none() {
                return err("hypothesis mode requires an event log".into());
            }
            return Ok(());
        }
        let Some(kind) = self.abstraction else {
            let kinds: Vec<&str> = q.compatible_abstractions.iter().map(|k| k.as_str()).collect();
            return err(format!("question {} needs an abstraction ({})", q.id, kinds.join(" or ")));
        };
        if !q.is_compatible(kind) {
            let kinds: Vec<&str> = q.compatible_abstractions.iter().map(|k| k.as_str()).collect();
            return err(format!("question {} does not use the {kind} abstraction (use {})", q.id, kinds.join(" or ")));
        }
        if kind == AbstractionKind::PetriNet {
            if self.pnml.is_none() {
                return err(format!("{} requires a Petri net (set pnml)", q.id));
            }
        } else if self.log.is_none() {
            return err(format!("the {kind} abstraction requires an event log"));
        }
        Ok(())
    }
}
