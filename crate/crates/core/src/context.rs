//! Context-aware matching over the AMS subset: compares the client's context
//! profile and requested capability signature against each service, grades
//! the match (Exact / Subsume / PartialContext / Fail) and produces the final
//! ordering the client scrolls through.
//!
//! Semantic matching runs over a hand-authored concept DAG with a reflexive,
//! transitive subsumption relation; no inference engine is involved.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advert::Tick;
use crate::overlay::PeerId;
use crate::publishing::ModuleSpecBody;
use crate::ranking::AmsEntry;

/// Default context-predicate knobs, scenario-configurable.
pub const DEFAULT_MAX_DISTANCE: f64 = 100.0;
pub const DEFAULT_MAX_LOAD: f64 = 0.8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("ontology contains a cycle through {0}")]
    CyclicOntology(String),
}

/// Location, availability window, device capability class and current load
/// of a peer. Clients carry load 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextProfile {
    /// Position on an abstract 2-D plane, in abstract distance units.
    pub location: (f64, f64),
    /// Inclusive availability window in ticks.
    pub available_window: (Tick, Tick),
    /// Ordered capability level: 1 = basic phone, 3 = desktop-grade.
    pub device_class: u8,
    /// Current load in [0, 1].
    pub load: f64,
}

impl ContextProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.available_window.0 > self.available_window.1 {
            return Err("available_window start exceeds end".into());
        }
        if !(0.0..=1.0).contains(&self.load) || self.load.is_nan() {
            return Err(format!("load must lie in [0, 1], got {}", self.load));
        }
        if !(1..=3).contains(&self.device_class) {
            return Err(format!(
                "device_class must be 1, 2 or 3, got {}",
                self.device_class
            ));
        }
        Ok(())
    }

    pub fn distance_to(&self, other: &ContextProfile) -> f64 {
        let dx = self.location.0 - other.location.0;
        let dy = self.location.1 - other.location.1;
        (dx * dx + dy * dy).sqrt()
    }

    /// Permissive fallback for services without a context source: available
    /// for the whole run, unloaded, desktop-grade, located at the querying
    /// client. Such services are capped at Subsume, never Exact.
    pub fn permissive_default(client: &ContextProfile, run_end: Tick) -> Self {
        Self {
            location: client.location,
            available_window: (0, run_end),
            device_class: 3,
            load: 0.0,
        }
    }
}

/// A concept DAG: labels plus parent edges (multiple parents allowed).
/// `subsumes(a, b)` holds when b reaches a via parent edges, reflexively.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptOntology {
    pub concepts: BTreeSet<String>,
    /// concept -> its parents.
    #[serde(default)]
    pub parents: BTreeMap<String, Vec<String>>,
}

impl ConceptOntology {
    /// Checks that all parent edges stay inside the concept set and the
    /// graph is acyclic.
    pub fn validate(&self) -> Result<(), ContextError> {
        for (child, parents) in &self.parents {
            if !self.concepts.contains(child) {
                return Err(ContextError::UnknownConcept(child.clone()));
            }
            for parent in parents {
                if !self.concepts.contains(parent) {
                    return Err(ContextError::UnknownConcept(parent.clone()));
                }
            }
        }
        // Cycle check: walk up from every concept; meeting the start again
        // means a cycle.
        for concept in &self.concepts {
            let mut visited = BTreeSet::new();
            let mut stack = vec![concept.clone()];
            while let Some(c) = stack.pop() {
                for parent in self.parents.get(&c).into_iter().flatten() {
                    if parent == concept {
                        return Err(ContextError::CyclicOntology(concept.clone()));
                    }
                    if visited.insert(parent.clone()) {
                        stack.push(parent.clone());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }

    /// True when `specific` is `general` itself or a (transitive)
    /// specialization of it.
    pub fn subsumes(&self, general: &str, specific: &str) -> bool {
        if general == specific {
            return true;
        }
        let mut visited = BTreeSet::new();
        let mut stack = vec![specific.to_string()];
        while let Some(c) = stack.pop() {
            for parent in self.parents.get(&c).into_iter().flatten() {
                if parent == general {
                    return true;
                }
                if visited.insert(parent.clone()) {
                    stack.push(parent.clone());
                }
            }
        }
        false
    }
}

/// Input and output concepts of a service (or of a client request), derived
/// from the WSDL operations' message parts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapabilitySignature {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl CapabilitySignature {
    pub fn from_wsdl(wsdl: &crate::publishing::WsdlDescriptor) -> Self {
        let mut inputs: Vec<String> = Vec::new();
        let mut outputs: Vec<String> = Vec::new();
        for op in &wsdl.operations {
            for c in &op.input_parts {
                if !inputs.contains(c) {
                    inputs.push(c.clone());
                }
            }
            for c in &op.output_parts {
                if !outputs.contains(c) {
                    outputs.push(c.clone());
                }
            }
        }
        Self { inputs, outputs }
    }

    pub fn check_concepts(&self, ontology: &ConceptOntology) -> Result<(), ContextError> {
        for c in self.inputs.iter().chain(self.outputs.iter()) {
            if !ontology.contains(c) {
                return Err(ContextError::UnknownConcept(c.clone()));
            }
        }
        Ok(())
    }
}

/// Graded match outcome, totally ordered: Exact > Subsume > PartialContext
/// > Fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchDegree {
    Fail = 0,
    PartialContext = 1,
    Subsume = 2,
    Exact = 3,
}

impl std::fmt::Display for MatchDegree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MatchDegree::Fail => "fail",
            MatchDegree::PartialContext => "partial_context",
            MatchDegree::Subsume => "subsume",
            MatchDegree::Exact => "exact",
        };
        f.write_str(s)
    }
}

/// Context-predicate knobs for one matching pass.
#[derive(Debug, Clone, Copy)]
pub struct MatchParams {
    pub max_distance: f64,
    pub max_load: f64,
    pub now: Tick,
}

/// One node of the services graph: an AMS member with its context profile
/// and capability signature attached.
#[derive(Debug, Clone)]
pub struct ServiceNode {
    pub class_id: String,
    pub score: f64,
    pub publisher: PeerId,
    pub binding_path: String,
    pub spec_id: String,
    pub profile: ContextProfile,
    /// True when the service had no context source and received the
    /// permissive default profile; caps the degree at Subsume.
    pub profile_defaulted: bool,
    pub signature: CapabilitySignature,
}

/// Nodes keyed by class_id plus symmetric shared-output-concept edges.
/// The edges are a queryable artifact used for reporting, not scoring.
#[derive(Debug, Clone, Default)]
pub struct ServicesGraph {
    pub nodes: BTreeMap<String, ServiceNode>,
    /// (class_id_a, class_id_b, shared concept), a < b.
    pub edges: BTreeSet<(String, String, String)>,
}

/// Builds the services graph for the AMS: one node per entry with profile
/// (resolved via the spec's context source reference, defaulting
/// permissively) and signature, plus one edge per unordered pair and shared
/// output concept.
pub fn build_services_graph(
    ams: &[AmsEntry],
    specs: &BTreeMap<String, ModuleSpecBody>,
    profiles: &BTreeMap<String, ContextProfile>,
    ontology: &ConceptOntology,
    client: &ContextProfile,
    run_end: Tick,
) -> Result<ServicesGraph, ContextError> {
    let mut graph = ServicesGraph::default();
    for entry in ams {
        let Some(spec) = specs.get(&entry.class_id) else {
            continue;
        };
        let signature = CapabilitySignature::from_wsdl(&spec.wsdl);
        signature.check_concepts(ontology)?;
        let (profile, defaulted) = match spec
            .wsdl
            .context_source_ref
            .as_ref()
            .and_then(|r| profiles.get(r))
        {
            Some(p) => (p.clone(), false),
            None => (ContextProfile::permissive_default(client, run_end), true),
        };
        graph.nodes.insert(
            entry.class_id.clone(),
            ServiceNode {
                class_id: entry.class_id.clone(),
                score: entry.score,
                publisher: spec.access.publisher.clone(),
                binding_path: spec.access.binding_path.clone(),
                spec_id: spec.spec_id.clone(),
                profile,
                profile_defaulted: defaulted,
                signature,
            },
        );
    }
    let ids: Vec<String> = graph.nodes.keys().cloned().collect();
    let mut edges = BTreeSet::new();
    for (i, a) in ids.iter().enumerate() {
        for b in ids.iter().skip(i + 1) {
            let outs_a = &graph.nodes[a].signature.outputs;
            let outs_b = &graph.nodes[b].signature.outputs;
            for concept in outs_a {
                if outs_b.contains(concept) {
                    edges.insert((a.clone(), b.clone(), concept.clone()));
                }
            }
        }
    }
    graph.edges = edges;
    Ok(graph)
}

fn capability_matches(
    requested: &CapabilitySignature,
    svc: &CapabilitySignature,
    relation: impl Fn(&str, &str) -> bool,
) -> bool {
    // Every requested output concept is provided by some service output
    // (the service output being the requested concept or a specialization
    // of it), and every service input concept is supplied by some
    // client-provided input (the supplied concept being the service input
    // or a specialization of it).
    let outputs_ok = requested
        .outputs
        .iter()
        .all(|req| svc.outputs.iter().any(|out| relation(req, out)));
    let inputs_ok = svc
        .inputs
        .iter()
        .all(|needed| requested.inputs.iter().any(|given| relation(needed, given)));
    outputs_ok && inputs_ok
}

/// Grades one service against the client.
///
/// The context predicate requires: Euclidean distance within `max_distance`
/// (boundary inclusive), `now` inside the service's availability window
/// (inclusive), service device class at least the client's, and service
/// load at most `max_load`. With the predicate true, the capability
/// relation decides Exact (equality) or Subsume (under subsumption); a
/// failed capability still earns PartialContext. A false predicate is Fail
/// regardless of capabilities.
pub fn context_match(
    client: &ContextProfile,
    requested: &CapabilitySignature,
    svc: &ServiceNode,
    ontology: &ConceptOntology,
    params: &MatchParams,
) -> Result<MatchDegree, ContextError> {
    requested.check_concepts(ontology)?;
    svc.signature.check_concepts(ontology)?;

    let context_ok = client.distance_to(&svc.profile) <= params.max_distance
        && svc.profile.available_window.0 <= params.now
        && params.now <= svc.profile.available_window.1
        && svc.profile.device_class >= client.device_class
        && svc.profile.load <= params.max_load;
    if !context_ok {
        return Ok(MatchDegree::Fail);
    }
    let exact = capability_matches(requested, &svc.signature, |a, b| a == b);
    let subsume = capability_matches(requested, &svc.signature, |a, b| ontology.subsumes(a, b));
    let degree = if exact && !svc.profile_defaulted {
        MatchDegree::Exact
    } else if subsume {
        // Exact implies Subsume (subsumption is reflexive); services with a
        // defaulted profile land here even on an exact capability match.
        MatchDegree::Subsume
    } else {
        MatchDegree::PartialContext
    };
    Ok(degree)
}

/// One row of the final ordering handed back to the client.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedService {
    pub class_id: String,
    pub degree: MatchDegree,
    pub score: f64,
    pub publisher: PeerId,
    pub binding_path: String,
    pub spec_id: String,
}

/// Removes failing services and sorts the rest by descending degree, then
/// descending TF-IDF score, then ascending class_id. May return an empty
/// list: no suitable service.
pub fn rank_final(
    ams: &[AmsEntry],
    graph: &ServicesGraph,
    client: &ContextProfile,
    requested: &CapabilitySignature,
    ontology: &ConceptOntology,
    params: &MatchParams,
) -> Result<Vec<RankedService>, ContextError> {
    let mut out = Vec::new();
    for entry in ams {
        let Some(node) = graph.nodes.get(&entry.class_id) else {
            continue;
        };
        let degree = context_match(client, requested, node, ontology, params)?;
        if degree == MatchDegree::Fail {
            continue;
        }
        out.push(RankedService {
            class_id: node.class_id.clone(),
            degree,
            score: node.score,
            publisher: node.publisher.clone(),
            binding_path: node.binding_path.clone(),
            spec_id: node.spec_id.clone(),
        });
    }
    out.sort_by(|a, b| {
        b.degree
            .cmp(&a.degree)
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.class_id.cmp(&b.class_id))
    });
    Ok(out)
}
