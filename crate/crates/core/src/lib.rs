//! Textual abstractions of process-mining artifacts for LLM prompts.
//!
//! The crate turns event logs and Petri nets into compact text (directly-follows graphs,
//! variants, attribute summaries, net structure), assembles prompts from a question catalog,
//! talks to a chat-completion endpoint (or replays a recorded transcript), and evaluates the
//! SQL the model proposes against the full event log.

pub mod abstraction;
pub mod event_log;
pub mod llm_client;
pub mod petri_net;
pub mod prompt_catalog;
pub mod pyfmt;
pub mod query_engine;
pub mod session;
mod xml;

pub use abstraction::{Aggregation, DirectlyFollowsGraph, RenderBudget, VariantTable};
pub use event_log::{AttributeValue, Case, ColumnMapping, Event, EventLog};
pub use petri_net::{Marking, PetriNet};
pub use prompt_catalog::{AbstractionKind, PromptBundle, Question};
pub use query_engine::ResultTable;
pub use session::{SessionConfig, SessionRecord};
