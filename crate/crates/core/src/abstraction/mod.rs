//! Textual abstractions of event logs and Petri nets.
//!
//! Computation ([`compute_dfg`], [`compute_variants`]) is separated from rendering so the
//! renderers can be fed pinned structures. All renderers are deterministic: frequency-descending
//! order with lexicographic tie-breaks, and numbers printed in shortest round-trip form.
//!
//! Renderers that accept a [`RenderBudget`] drop whole lines from the low-frequency end until
//! the text fits; the kept lines are always a prefix of the full ordering.

mod dfg;
mod render;
mod variants;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::dfg::{compute_dfg, DfgEdge, DirectlyFollowsGraph};
pub use self::render::{
    attribute_line, numeric_attributes, parse_dfg_line, parse_variant_line, render_attribute_summaries, render_attributes,
    render_dfg, render_petri_net, render_variants, RenderedAttributes, TimestampStyle,
};
pub use self::variants::{compute_variants, Variant, VariantTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbstractionError {
    #[error("budget of {available} characters cannot hold a single line; at least {required} are needed")]
    BudgetTooSmall { required: usize, available: usize },
    #[error("cannot parse abstraction line {line:?}: {reason}")]
    Grammar { line: String, reason: &'static str },
}

pub type Result<T, E = AbstractionError> = std::result::Result<T, E>;

/// How per-edge or per-variant durations are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

impl Aggregation {
    /// Aggregates `values` (seconds). Empty input yields 0.
    pub fn apply(self, values: &mut [f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                values.sort_by(f64::total_cmp);
                let mid = values.len() / 2;
                if values.len() % 2 == 1 {
                    values[mid]
                } else {
                    (values[mid - 1] + values[mid]) / 2.0
                }
            }
        }
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mean" | "avg" | "average" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(format!("unknown aggregation {other:?} (expected mean or median)")),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

pub const DEFAULT_CHARS_PER_TOKEN: usize = 4;

/// Size limit for rendered text, in characters, with a chars-per-token ratio for estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderBudget {
    max_chars: usize,
    chars_per_token: usize,
}

impl RenderBudget {
    /// Panics when `max_chars` or `chars_per_token` is zero.
    pub fn chars(max_chars: usize) -> Self {
        Self::with_ratio(max_chars, DEFAULT_CHARS_PER_TOKEN)
    }

    pub fn with_ratio(max_chars: usize, chars_per_token: usize) -> Self {
        assert!(max_chars > 0, "budget must be positive");
        assert!(chars_per_token > 0, "chars-per-token ratio must be positive");
        Self { max_chars, chars_per_token }
    }

    /// A budget of `tokens` tokens at the default ratio.
    pub fn tokens(tokens: usize) -> Self {
        Self::chars(tokens.saturating_mul(DEFAULT_CHARS_PER_TOKEN))
    }

    pub fn unlimited() -> Self {
        Self::chars(usize::MAX)
    }

    pub fn max_chars(&self) -> usize {
        self.max_chars
    }

    pub fn chars_per_token(&self) -> usize {
        self.chars_per_token
    }

    pub fn max_tokens(&self) -> usize {
        self.max_chars.div_ceil(self.chars_per_token)
    }

    pub fn estimate_tokens(&self, text: &str) -> usize {
        estimate_tokens(text, self.chars_per_token)
    }

    pub fn fits(&self, text: &str) -> bool {
        text.chars().count() <= self.max_chars
    }
}

impl Default for RenderBudget {
    fn default() -> Self {
        Self::unlimited()
    }
}

/// `ceil(chars / ratio)`.
pub fn estimate_tokens(text: &str, chars_per_token: usize) -> usize {
    text.chars().count().div_ceil(chars_per_token.max(1))
}

/// Keeps the longest prefix of `lines` whose newline-joined length fits the budget.
pub fn fit_lines(lines: &[String], budget: &RenderBudget) -> Result<String> {
    let Some(first) = lines.first() else { return Ok(String::new()) };
    let mut used = 0usize;
    let mut keep = 0usize;
    for (i, line) in lines.iter().enumerate() {
        let add = line.chars().count() + usize::from(i > 0);
        if used.saturating_add(add) > budget.max_chars {
            break;
        }
        used += add;
        keep += 1;
    }
    if keep == 0 {
        return Err(AbstractionError::BudgetTooSmall { required: first.chars().count(), available: budget.max_chars });
    }
    Ok(lines[..keep].join("\n"))
}
