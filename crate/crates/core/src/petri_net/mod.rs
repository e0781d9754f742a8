//! Place/transition nets with initial and final markings.
//!
//! [`PetriNet`] only grows through its `add_*` methods, which reject duplicate node ids and
//! arcs that are not place→transition or transition→place. Nets are usually loaded from PNML
//! via [`parse_pnml`].

mod pnml;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use self::pnml::{parse_pnml, PnmlModel};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PetriNetError {
    #[error("XML error at line {line}, column {column}: {message}")]
    Xml { line: usize, column: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("arc {from:?} -> {to:?} references unknown node {missing:?}")]
    UnknownNode { from: String, to: String, missing: String },
    #[error("arc {from:?} -> {to:?} connects two {kind}s")]
    NotBipartite { from: String, to: String, kind: NodeKind },
    #[error("invalid PNML: {0}")]
    Invalid(String),
}

pub type Result<T, E = PetriNetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Place,
    Transition,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Place => "place",
            NodeKind::Transition => "transition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Place {
    pub id: String,
}

/// A transition; `label == None` marks a silent (invisible) step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Transition {
    pub id: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Arc {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PetriNet {
    places: BTreeMap<String, Place>,
    transitions: BTreeMap<String, Transition>,
    arcs: Vec<Arc>,
}

impl PetriNet {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_fresh(&self, id: &str) -> Result<()> {
        if self.places.contains_key(id) || self.transitions.contains_key(id) {
            return Err(PetriNetError::DuplicateNode(id.to_owned()));
        }
        Ok(())
    }

    pub fn add_place(&mut self, id: impl Into<String>) -> Result<()> {
        let id = id.into();
        if id.is_empty() {
            return Err(PetriNetError::Invalid("place with empty id".to_owned()));
        }
        self.check_fresh(&id)?;
        self.places.insert(id.clone(), Place { id });
        Ok(())
    }

    pub fn add_transition(&mut self, id: impl Into<String>, label: Option<String>) -> Result<()> {
        let id = id.into();
        if id.is_empty() {
            return Err(PetriNetError::Invalid("transition with empty id".to_owned()));
        }
        self.check_fresh(&id)?;
        self.transitions.insert(id.clone(), Transition { id, label });
        Ok(())
    }

    pub fn add_arc(&mut self, source: impl Into<String>, target: impl Into<String>) -> Result<()> {
        let (source, target) = (source.into(), target.into());
        let kind_of = |id: &str| self.node_kind(id);
        let (s, t) = match (kind_of(&source), kind_of(&target)) {
            (Some(s), Some(t)) => (s, t),
            (None, _) => return Err(PetriNetError::UnknownNode { missing: source.clone(), from: source, to: target }),
            (_, None) => return Err(PetriNetError::UnknownNode { missing: target.clone(), from: source, to: target }),
        };
        if s == t {
            return Err(PetriNetError::NotBipartite { from: source, to: target, kind: s });
        }
        let arc = Arc { source, target };
        if !self.arcs.contains(&arc) {
            self.arcs.push(arc);
            self.arcs.sort();
        }
        Ok(())
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.places.contains_key(id) {
            Some(NodeKind::Place)
        } else if self.transitions.contains_key(id) {
            Some(NodeKind::Transition)
        } else {
            None
        }
    }

    pub fn places(&self) -> impl Iterator<Item = &Place> {
        self.places.values()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.values()
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.get(id)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn has_place(&self, id: &str) -> bool {
        self.places.contains_key(id)
    }
}

/// Token counts per place. Counts are always at least one; a zero count removes the entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, place: impl Into<String>, tokens: u32) {
        let place = place.into();
        if tokens == 0 {
            self.0.remove(&place);
        } else {
            self.0.insert(place, tokens);
        }
    }

    pub fn get(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries in place-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Marking {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut m = Marking::new();
        for (p, n) in iter {
            m.set(p, n);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Diagnostic {
    IsolatedNode { kind: NodeKind, id: String },
    EmptyInitialMarking,
    UnknownPlace { marking: &'static str, place: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::IsolatedNode { kind, id } => write!(f, "{kind} {id} is not connected to any arc"),
            Diagnostic::EmptyInitialMarking => f.write_str("initial marking is empty"),
            Diagnostic::UnknownPlace { marking, place } => {
                write!(f, "{marking} marking references unknown place {place}")
            }
        }
    }
}

/// Structural checks that do not prevent rendering. An empty result means the model is clean.
pub fn validate(net: &PetriNet, initial: &Marking, final_marking: &Marking) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let connected = |id: &str| net.arcs.iter().any(|a| a.source == id || a.target == id);
    for p in net.places() {
        if !connected(&p.id) {
            out.push(Diagnostic::IsolatedNode { kind: NodeKind::Place, id: p.id.clone() });
        }
    }
    for t in net.transitions() {
        if !connected(&t.id) {
            out.push(Diagnostic::IsolatedNode { kind: NodeKind::Transition, id: t.id.clone() });
        }
    }
    if initial.is_empty() {
        out.push(Diagnostic::EmptyInitialMarking);
    }
    for (name, marking) in [("initial", initial), ("final", final_marking)] {
        for (place, _) in marking.iter() {
            if !net.has_place(place) {
                out.push(Diagnostic::UnknownPlace { marking: name, place: place.to_owned() });
            }
        }
    }
    out
}

/// The two-transition sequential net `source -> A -> p1 -> B -> sink`.
pub fn sequential_example() -> (PetriNet, Marking, Marking) {
    let mut net = PetriNet::new();
    for p in ["source", "p1", "sink"] {
        net.add_place(p).expect("fresh id");
    }
    net.add_transition("A", Some("A".into())).expect("fresh id");
    net.add_transition("B", Some("B".into())).expect("fresh id");
    for (s, t) in [("source", "A"), ("A", "p1"), ("p1", "B"), ("B", "sink")] {
        net.add_arc(s, t).expect("valid arc");
    }
    (net, Marking::from_iter([("source", 1)]), Marking::from_iter([("sink", 1)]))
}
