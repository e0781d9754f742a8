//! PNML reader for place/transition nets.
//!
//! Reads places (with `initialMarking`), transitions (label from `name/text`, silent when the
//! name is absent or a `toolspecific` element declares `activity="$invisible$"`) and arcs from
//! any page depth. The final marking comes from the `finalmarkings` tool extension when present.

use std::io::Read;

use quick_xml::events::Event as XmlEvent;
use quick_xml::Reader;

use super::{Marking, PetriNet, PetriNetError, Result};
use crate::xml;

#[derive(Debug, Clone, PartialEq)]
pub struct PnmlModel {
    pub net: PetriNet,
    pub initial: Marking,
    pub final_marking: Marking,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct RawTransition {
    id: String,
    label: Option<String>,
    invisible: bool,
}

#[derive(Default)]
struct Collected {
    places: Vec<(String, u32)>,
    transitions: Vec<RawTransition>,
    arcs: Vec<(String, String, String)>,
    final_markings: Vec<Vec<(String, u32)>>,
    nets: usize,
}

fn tokens(text: &str) -> Result<u32> {
    text.trim().parse().map_err(|_| PetriNetError::Invalid(format!("token count {text:?} is not a non-negative integer")))
}

pub fn parse_pnml(mut source: impl Read) -> Result<PnmlModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| PetriNetError::Io(e.to_string()))?;
    let mut reader = Reader::from_reader(bytes.as_slice());
    reader.config_mut().trim_text(true);

    let mut c = Collected::default();
    let mut stack: Vec<String> = Vec::new();
    // idref of the place currently open inside a final marking
    let mut final_place: Option<String> = None;

    loop {
        let event = match reader.read_event() {
            Ok(e) => e,
            Err(err) => {
                let (line, column) = xml::error_position(&reader, &bytes);
                return Err(PetriNetError::Xml { line, column, message: err.to_string() });
            }
        };
        match event {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let name = xml::local_name(e);
                let attrs = xml::attributes(e);
                let parent = stack.last().map(String::as_str);
                let in_final = stack.iter().any(|s| s == "finalmarkings");
                match name.as_str() {
                    "net" => c.nets += 1,
                    "place" if in_final => {
                        final_place = attrs.get("idref").cloned();
                        if let Some(marking) = c.final_markings.last_mut() {
                            if let Some(p) = &final_place {
                                marking.push((p.clone(), 0));
                            }
                        }
                    }
                    "marking" if in_final => c.final_markings.push(Vec::new()),
                    "place" => c.places.push((attrs.get("id").cloned().unwrap_or_default(), 0)),
                    "transition" => c
                        .transitions
                        .push(RawTransition { id: attrs.get("id").cloned().unwrap_or_default(), ..Default::default() }),
                    "arc" => c.arcs.push((
                        attrs.get("id").cloned().unwrap_or_default(),
                        attrs.get("source").cloned().unwrap_or_default(),
                        attrs.get("target").cloned().unwrap_or_default(),
                    )),
                    "toolspecific"
                        if parent == Some("transition") && attrs.get("activity").map(String::as_str) == Some("$invisible$") =>
                    {
                        if let Some(t) = c.transitions.last_mut() {
                            t.invisible = true;
                        }
                    }
                    _ => {}
                }
                if matches!(event, XmlEvent::Start(_)) {
                    stack.push(name);
                }
            }
            XmlEvent::Text(t) => {
                let text = t.unescape().map_err(|e| PetriNetError::Invalid(e.to_string()))?.into_owned();
                let path: Vec<&str> = stack.iter().rev().take(3).map(String::as_str).collect();
                let in_final = stack.iter().any(|s| s == "finalmarkings");
                match path.as_slice() {
                    ["text", "place", ..] if in_final => {
                        if let (Some(marking), Some(_)) = (c.final_markings.last_mut(), &final_place) {
                            if let Some(last) = marking.last_mut() {
                                last.1 = tokens(&text)?;
                            }
                        }
                    }
                    ["text", "initialMarking", "place"] => {
                        if let Some(p) = c.places.last_mut() {
                            p.1 = tokens(&text)?;
                        }
                    }
                    ["text", "name", "transition"] => {
                        if let Some(t) = c.transitions.last_mut() {
                            t.label = Some(text);
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(_) => {
                if stack.pop().as_deref() == Some("place") {
                    final_place = None;
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
    }

    match c.nets {
        0 => return Err(PetriNetError::Invalid("no <net> element".to_owned())),
        1 => {}
        n => return Err(PetriNetError::Invalid(format!("expected one <net> element, found {n}"))),
    }

    let mut warnings = Vec::new();
    let mut net = PetriNet::new();
    let mut initial = Marking::new();
    for (id, count) in c.places {
        net.add_place(id.clone())?;
        initial.set(id, count);
    }
    for t in c.transitions {
        let label = if t.invisible { None } else { t.label };
        net.add_transition(t.id, label)?;
    }
    for (_, source, target) in c.arcs {
        net.add_arc(source, target)?;
    }
    let final_marking = match c.final_markings.into_iter().next() {
        Some(entries) => entries.into_iter().collect(),
        None => {
            let msg = "PNML has no final marking; rendering an empty one".to_owned();
            log::warn!("{msg}");
            warnings.push(msg);
            Marking::new()
        }
    };
    Ok(PnmlModel { net, initial, final_marking, warnings })
}
