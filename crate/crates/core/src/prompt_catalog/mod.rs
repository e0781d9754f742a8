//! Built-in analysis questions and prompt assembly.
//!
//! Every question carries its grading rubric as data; nothing here grades answers. The
//! catalog can be exported to and re-imported from a TOML file so that new questions can be
//! added without rebuilding.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abstraction::RenderBudget;
use crate::event_log::ColumnMapping;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt needs {needed} tokens but the budget is {budget} ({deficit} over)")]
    OverBudget { needed: usize, budget: usize, deficit: usize },
    #[error("{0} is a hypothesis question; use the hypothesis prompt")]
    HypothesisQuestion(String),
    #[error("abstraction text is empty")]
    EmptyAbstraction,
    #[error("invalid question catalog: {0}")]
    Catalog(String),
}

pub type Result<T, E = PromptError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractionKind {
    Dfg,
    Variants,
    PetriNet,
    Attributes,
}

impl AbstractionKind {
    pub const ALL: [AbstractionKind; 4] = [Self::Dfg, Self::Variants, Self::PetriNet, Self::Attributes];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dfg => "dfg",
            Self::Variants => "variants",
            Self::PetriNet => "petri_net",
            Self::Attributes => "attributes",
        }
    }
}

impl fmt::Display for AbstractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AbstractionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dfg" => Ok(Self::Dfg),
            "variants" => Ok(Self::Variants),
            "petri_net" | "petrinet" => Ok(Self::PetriNet),
            "attributes" => Ok(Self::Attributes),
            other => Err(format!("unknown abstraction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Descriptive,
    Conformance,
    Improvement,
    Hypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfactory,
    Unsatisfactory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricCriterion {
    pub verdict: Verdict,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: String,
    pub category: Category,
    pub text: String,
    pub rubric: Vec<RubricCriterion>,
    pub compatible_abstractions: BTreeSet<AbstractionKind>,
}

impl Question {
    pub fn is_compatible(&self, kind: AbstractionKind) -> bool {
        self.compatible_abstractions.contains(&kind)
    }

    /// Rubric as printable lines, `+` for satisfactory and `-` for unsatisfactory criteria.
    pub fn rubric_lines(&self) -> Vec<String> {
        self.rubric
            .iter()
            .map(|c| {
                let mark = match c.verdict {
                    Verdict::Satisfactory => '+',
                    Verdict::Unsatisfactory => '-',
                };
                format!("{mark} {}", c.text)
            })
            .collect()
    }
}

pub const HYPOTHESIS_REQUEST: &str = "Can you provide some hypothesis between the execution of the process and its attributes? I mean, can you provide me a DuckDB SQL query that I can execute, and return the results to you, in order for you to evaluate such hypothesis about the process? More in detail, the data is stored in a Pandas dataframe where each row is an event having the provided attributes (so there are no separate table containing the variant). Can you tell me in advance which hypothesis you want to verify?";

fn criterion(verdict: Verdict, text: &str) -> RubricCriterion {
    RubricCriterion { verdict, text: text.to_owned() }
}

fn question(id: &str, category: Category, text: &str, rubric: Vec<RubricCriterion>, kinds: &[AbstractionKind]) -> Question {
    Question {
        id: id.to_owned(),
        category,
        text: text.to_owned(),
        rubric,
        compatible_abstractions: kinds.iter().copied().collect(),
    }
}

/// The built-in questions: DQ1, CQ1, IQ1, IQ2 and the hypothesis template HYP.
pub fn catalog() -> Vec<Question> {
    use AbstractionKind::*;
    use Verdict::*;
    vec![
        question(
            "DQ1",
            Category::Descriptive,
            "Can you describe the process contained in this data?",
            vec![
                criterion(Satisfactory, "GPT-4 should provide the name/category of the process underlying the data and the description of the main steps of the process)."),
                criterion(Unsatisfactory, "If GPT-4 does not correctly understand the context and identifies the wrong name or category for the process, the response is considered unsatisfactory."),
            ],
            &[Dfg, Variants],
        ),
        question(
            "CQ1",
            Category::Conformance,
            "Can you pinpoint the central anomalies of the process from this data? Please only process and data-specific considerations, not general considerations.",
            vec![
                criterion(Satisfactory, "Our expectation is that GPT-4, using its domain knowledge, is able to identify paths that are illogical, rework, or missing activities."),
                criterion(Unsatisfactory, "A response is deemed unsatisfactory if GPT-4 points to infrequent activities/paths, and to paths with high performance, without exploiting the domain knowledge about the process."),
            ],
            &[Dfg, Variants],
        ),
        question(
            "IQ1",
            Category::Improvement,
            "What are the root causes of performance issues specific to the process and related data? Please refrain from providing general considerations and focus on issues directly tied to the process and its data.",
            vec![
                criterion(Satisfactory, "Our expectation is that GPT-4 should identify activities, paths, or rework that lead to higher throughput times."),
                criterion(Unsatisfactory, "A response is deemed unsatisfactory when GPT-4 identifies just the infrequent activities or paths, or is able to detect different execution orders for the activities but asks the user to verify if there is something wrong."),
            ],
            &[Dfg, Variants],
        ),
        question(
            "IQ2",
            Category::Improvement,
            "Please suggest improving the process model based on your domain knowledge. Also, please compare it against implementations of similar processes. Provide only process and data-specific considerations, not general ones.",
            vec![
                criterion(Satisfactory, "We expect that GPT-4 can suggest additional activities to optimize the throughput time and reduce rework. Also, it should be able to detect when the activities are executed in a suboptimal order."),
                criterion(Unsatisfactory, "A response is deemed unsatisfactory if general considerations about merging activities or reducing invisible steps are provided."),
            ],
            &[PetriNet],
        ),
        question("HYP", Category::Hypothesis, HYPOTHESIS_REQUEST, Vec::new(), &[Variants, Attributes]),
    ]
}

pub fn find_question<'a>(questions: &'a [Question], id: &str) -> Option<&'a Question> {
    questions.iter().find(|q| q.id.eq_ignore_ascii_case(id))
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(rename = "question", default)]
    questions: Vec<QuestionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QuestionRecord {
    id: String,
    category: Category,
    abstractions: Vec<AbstractionKind>,
    text: String,
    #[serde(default)]
    satisfactory: Vec<String>,
    #[serde(default)]
    unsatisfactory: Vec<String>,
}

/// Serialises questions as TOML, one `[[question]]` table per question.
pub fn export_catalog(questions: &[Question]) -> String {
    let file = CatalogFile {
        questions: questions
            .iter()
            .map(|q| {
                let pick = |v: Verdict| q.rubric.iter().filter(|c| c.verdict == v).map(|c| c.text.clone()).collect();
                QuestionRecord {
                    id: q.id.clone(),
                    category: q.category,
                    abstractions: q.compatible_abstractions.iter().copied().collect(),
                    text: q.text.clone(),
                    satisfactory: pick(Verdict::Satisfactory),
                    unsatisfactory: pick(Verdict::Unsatisfactory),
                }
            })
            .collect(),
    };
    toml::to_string(&file).expect("catalog serialises")
}

pub fn import_catalog(text: &str) -> Result<Vec<Question>> {
    let file: CatalogFile = toml::from_str(text).map_err(|e| PromptError::Catalog(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(file.questions.len());
    for r in file.questions {
        if r.id.trim().is_empty() || r.text.trim().is_empty() {
            return Err(PromptError::Catalog("question with empty id or text".to_owned()));
        }
        if !seen.insert(r.id.to_ascii_uppercase()) {
            return Err(PromptError::Catalog(format!("duplicate question id {:?}", r.id)));
        }
        if r.abstractions.is_empty() {
            return Err(PromptError::Catalog(format!("question {:?} lists no compatible abstraction", r.id)));
        }
        let rubric = r
            .satisfactory
            .into_iter()
            .map(|t| RubricCriterion { verdict: Verdict::Satisfactory, text: t })
            .chain(r.unsatisfactory.into_iter().map(|t| RubricCriterion { verdict: Verdict::Unsatisfactory, text: t }))
            .collect();
        out.push(Question {
            id: r.id,
            category: r.category,
            text: r.text,
            rubric,
            compatible_abstractions: r.abstractions.into_iter().collect(),
        });
    }
    Ok(out)
}

/// A fully assembled LLM request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system_preamble: String,
    pub abstraction_text: String,
    pub question_text: String,
    pub schema_guidance: Option<String>,
    pub estimated_tokens: usize,
}

impl PromptBundle {
    /// The user message: abstraction, blank line, question, then schema guidance on the same
    /// paragraph when present.
    pub fn user_message(&self) -> String {
        compose(&self.abstraction_text, &self.question_text, self.schema_guidance.as_deref())
    }

    /// Adds a system preamble, re-checking the budget.
    pub fn with_system_preamble(mut self, preamble: &str, budget: &RenderBudget) -> Result<Self> {
        self.system_preamble = preamble.to_owned();
        self.estimated_tokens = budget.estimate_tokens(&self.system_preamble) + budget.estimate_tokens(&self.user_message());
        check(self.estimated_tokens, budget)?;
        Ok(self)
    }
}

fn compose(abstraction: &str, question: &str, guidance: Option<&str>) -> String {
    match guidance {
        Some(g) => format!("{abstraction}\n\n{question} {g}"),
        None => format!("{abstraction}\n\n{question}"),
    }
}

fn check(needed: usize, budget: &RenderBudget) -> Result<()> {
    let limit = budget.max_tokens();
    if needed > limit {
        return Err(PromptError::OverBudget { needed, budget: limit, deficit: needed - limit });
    }
    Ok(())
}

/// Drops trailing lines of `lines` (keeping at least one) until `build` fits the budget.
fn fit<F: Fn(&str) -> String>(lines: &[&str], budget: &RenderBudget, build: F) -> Result<(String, usize)> {
    let mut keep = lines.len();
    loop {
        let body = lines[..keep].join("\n");
        let tokens = budget.estimate_tokens(&build(&body));
        if tokens <= budget.max_tokens() {
            return Ok((body, tokens));
        }
        if keep == 1 {
            check(tokens, budget)?;
        }
        keep -= 1;
    }
}

/// Abstraction followed by the question. Lowest-ranked abstraction lines are dropped when the
/// prompt exceeds the budget.
pub fn build_direct_prompt(abstraction_text: &str, question: &Question, budget: &RenderBudget) -> Result<PromptBundle> {
    if question.category == Category::Hypothesis {
        return Err(PromptError::HypothesisQuestion(question.id.clone()));
    }
    let lines: Vec<&str> = abstraction_text.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(PromptError::EmptyAbstraction);
    }
    let (abstraction, estimated_tokens) = fit(&lines, budget, |body| compose(body, &question.text, None))?;
    Ok(PromptBundle {
        system_preamble: String::new(),
        abstraction_text: abstraction,
        question_text: question.text.clone(),
        schema_guidance: None,
        estimated_tokens,
    })
}

/// The paragraph telling the model how the flat event table is laid out.
pub fn schema_guidance(schema: &ColumnMapping, table_name: &str) -> String {
    let resource = match &schema.resource {
        Some(r) => format!(" the resource is stored inside the attribute \"{r}\","),
        None => String::new(),
    };
    format!(
        "Please consider the following information: the case identifier is called \"{}\", the activity is stored inside the attribute \"{}\", the timestamp is stored inside the attribute \"{}\",{resource} there is not a variant column but that can be obtained as concatenation of the activities of a case, there is not a duration column but that can be obtained as difference between the timestamp of the first and the last event. Also, the dataframe is called \"{table_name}\". You should use the EPOCH function of DuckDB to get the timestamp from the date.",
        schema.case_id, schema.activity, schema.timestamp
    )
}

fn hypothesis_data(variant_lines: &str, attributes_text: &str) -> String {
    let indented: Vec<String> = variant_lines.lines().map(|l| format!(" {l}")).collect();
    format!(
        "If I have a process with the following process variants:\n{}\n\nand the log of the process contains the following attributes:\n{}",
        indented.join("\n"),
        attributes_text
    )
}

/// Variants and attribute summaries followed by the hypothesis request and schema guidance.
/// Least frequent variants are dropped when over budget.
pub fn build_hypothesis_prompt(
    variants_text: &str,
    attributes_text: &str,
    schema: &ColumnMapping,
    table_name: &str,
    budget: &RenderBudget,
) -> Result<PromptBundle> {
    let lines: Vec<&str> = variants_text.lines().collect();
    if lines.is_empty() || attributes_text.trim().is_empty() {
        return Err(PromptError::EmptyAbstraction);
    }
    let guidance = schema_guidance(schema, table_name);
    let (variants, estimated_tokens) =
        fit(&lines, budget, |body| compose(&hypothesis_data(body, attributes_text), HYPOTHESIS_REQUEST, Some(&guidance)))?;
    Ok(PromptBundle {
        system_preamble: String::new(),
        abstraction_text: hypothesis_data(&variants, attributes_text),
        question_text: HYPOTHESIS_REQUEST.to_owned(),
        schema_guidance: Some(guidance),
        estimated_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str) -> Question {
        find_question(&catalog(), id).unwrap().clone()
    }

    const VARIANTS: &str = "A -> B ( frequency = 2  performance = 10.0 )\nA ( frequency = 1  performance = 0.0 )";

    #[test]
    fn catalog_shape() {
        let all = catalog();
        let ids: Vec<_> = all.iter().map(|q| q.id.as_str()).collect();
        assert_eq!(ids, ["DQ1", "CQ1", "IQ1", "IQ2", "HYP"]);
        assert!(q("DQ1").rubric[0].text.contains("name/category of the process"));
        assert!(q("CQ1")
            .rubric
            .iter()
            .any(|c| c.verdict == Verdict::Unsatisfactory && c.text.contains("infrequent activities/paths")));
        assert_eq!(q("IQ2").compatible_abstractions, BTreeSet::from([AbstractionKind::PetriNet]));
        assert!(all.iter().all(|q| !q.compatible_abstractions.is_empty()));
    }

    #[test]
    fn direct_prompt_ends_with_question() {
        let b = build_direct_prompt(VARIANTS, &q("DQ1"), &RenderBudget::unlimited()).unwrap();
        assert!(b.user_message().ends_with("Can you describe the process contained in this data?"));
        assert!(b.user_message().starts_with(VARIANTS));
        assert_eq!(b.estimated_tokens, RenderBudget::unlimited().estimate_tokens(&b.user_message()));
    }

    #[test]
    fn direct_prompt_keeps_guardrail() {
        let b = build_direct_prompt(VARIANTS, &q("IQ1"), &RenderBudget::unlimited()).unwrap();
        assert!(b.user_message().contains("Please refrain from providing general considerations"));
    }

    #[test]
    fn direct_prompt_truncates_then_fails() {
        let question = q("DQ1");
        let one_line = compose(VARIANTS.lines().next().unwrap(), &question.text, None);
        let budget = RenderBudget::chars(one_line.chars().count() + 2);
        let b = build_direct_prompt(VARIANTS, &question, &budget).unwrap();
        assert_eq!(b.abstraction_text.lines().count(), 1);
        assert!(b.estimated_tokens <= budget.max_tokens());

        let err = build_direct_prompt(VARIANTS, &question, &RenderBudget::tokens(10)).unwrap_err();
        let needed = RenderBudget::tokens(10).estimate_tokens(&one_line);
        assert_eq!(err, PromptError::OverBudget { needed, budget: 10, deficit: needed - 10 });
    }

    #[test]
    fn hypothesis_question_is_not_direct() {
        assert!(matches!(
            build_direct_prompt(VARIANTS, &q("HYP"), &RenderBudget::unlimited()),
            Err(PromptError::HypothesisQuestion(_))
        ));
        assert_eq!(build_direct_prompt("\n", &q("DQ1"), &RenderBudget::unlimited()), Err(PromptError::EmptyAbstraction));
    }

    #[test]
    fn hypothesis_prompt_layout() {
        let b = build_hypothesis_prompt(
            VARIANTS,
            "x  empty: 0  quantiles: {}",
            &ColumnMapping::default(),
            "dataframe",
            &RenderBudget::unlimited(),
        )
        .unwrap();
        let msg = b.user_message();
        assert!(msg.starts_with("If I have a process with the following process variants:\n A -> B ( frequency = 2"));
        assert!(msg.contains("\n\nand the log of the process contains the following attributes:\nx  empty: 0"));
        assert!(msg.contains(r#"the case identifier is called "case:concept:name""#));
        assert!(msg.contains(r#"the dataframe is called "dataframe""#));
        assert!(msg.ends_with("You should use the EPOCH function of DuckDB to get the timestamp from the date."));
        let req = msg.find(HYPOTHESIS_REQUEST).unwrap();
        assert!(msg.find("Please consider the following information").unwrap() > req);
    }

    #[test]
    fn hypothesis_guidance_is_parameterised() {
        let mapping =
            ColumnMapping { case_id: "caseId".into(), activity: "action".into(), timestamp: "ts".into(), resource: None };
        let g = schema_guidance(&mapping, "events");
        assert!(g.contains(r#"the case identifier is called "caseId""#));
        assert!(g.contains(r#"stored inside the attribute "action""#));
        assert!(g.contains(r#"stored inside the attribute "ts""#));
        assert!(g.contains(r#"the dataframe is called "events""#));
        assert!(!g.contains("resource"));
    }

    #[test]
    fn catalog_file_round_trip() {
        let text = export_catalog(&catalog());
        assert_eq!(import_catalog(&text).unwrap(), catalog());
    }

    #[test]
    fn catalog_file_validation() {
        let dup = "[[question]]\nid='A'\ncategory='descriptive'\nabstractions=['dfg']\ntext='x'\n".repeat(2);
        assert!(matches!(import_catalog(&dup), Err(PromptError::Catalog(m)) if m.contains("duplicate")));
        let none = "[[question]]\nid='A'\ncategory='descriptive'\nabstractions=[]\ntext='x'\n";
        assert!(import_catalog(none).is_err());
        let custom = "[[question]]\nid='DQ2'\ncategory='descriptive'\nabstractions=['variants']\ntext='Which activity comes first?'\nsatisfactory=['names the start activity']\n";
        let qs = import_catalog(custom).unwrap();
        assert_eq!(qs[0].rubric_lines(), ["+ names the start activity"]);
    }
}
