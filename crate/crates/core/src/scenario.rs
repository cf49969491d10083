//! Scenario configuration: one JSON document describing the topology,
//! peer groups, ontology, context sources, hosted services, churn, scripted
//! events and queries, plus every tunable default in a single `params`
//! block. Everything is cross-checked at load time, before any tick runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advert::{PeerGroup, PeerGroupId, Tick, DEFAULT_LIFETIME};
use crate::context::{
    CapabilitySignature, ConceptOntology, ContextProfile, DEFAULT_MAX_DISTANCE, DEFAULT_MAX_LOAD,
};
use crate::discovery::DEFAULT_MAX_RESULTS;
use crate::overlay::{ChurnSpec, PeerRole, TopologySpec, DEFAULT_HOP_BUDGET};
use crate::publishing::WsdlDescriptor;
use crate::ranking::{tokenize, DEFAULT_AMS_THRESHOLD};

/// Default republish period: half the default lifetime, so an always-online
/// host never leaves a visibility gap.
pub const DEFAULT_REPUBLISH_PERIOD: Tick = DEFAULT_LIFETIME / 2;

/// A validation failure, pointing at the offending field.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid scenario at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn default_ticks() -> Tick {
    1000
}

fn default_true() -> bool {
    true
}

fn default_version() -> String {
    "1.0".to_string()
}

fn default_platforms() -> Vec<String> {
    vec!["midp".to_string()]
}

/// Tunable knobs with their documented defaults (see docs/formats.md for
/// the one-table summary).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub lifetime: Tick,
    pub republish_period: Tick,
    pub hop_budget: u32,
    pub max_results: usize,
    pub ams_threshold: f64,
    pub max_distance: f64,
    pub max_load: f64,
    pub cache_capacity: Option<usize>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            lifetime: DEFAULT_LIFETIME,
            republish_period: DEFAULT_REPUBLISH_PERIOD,
            hop_budget: DEFAULT_HOP_BUDGET,
            max_results: DEFAULT_MAX_RESULTS,
            ams_threshold: DEFAULT_AMS_THRESHOLD,
            max_distance: DEFAULT_MAX_DISTANCE,
            max_load: DEFAULT_MAX_LOAD,
            cache_capacity: None,
        }
    }
}

/// One service hosted on an edge peer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceScript {
    /// Name of the hosting edge peer.
    pub host: String,
    pub wsdl: WsdlDescriptor,
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default)]
    pub groups: Vec<PeerGroupId>,
    #[serde(default = "default_platforms")]
    pub platforms: Vec<String>,
    /// Overrides params.lifetime for this service.
    #[serde(default)]
    pub lifetime: Option<Tick>,
    /// Overrides params.republish_period for this service.
    #[serde(default)]
    pub republish_period: Option<Tick>,
    /// When false the service is published exactly once at the first tick
    /// its host is online and never refreshed.
    #[serde(default = "default_true")]
    pub auto_republish: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedEventKind {
    Join,
    Leave,
    Rebind,
}

/// A deterministic, scripted overlay event.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEvent {
    pub at_tick: Tick,
    pub peer: String,
    pub event: ScriptedEventKind,
    /// Required for rebind events.
    #[serde(default)]
    pub address: Option<String>,
}

/// One scripted discovery query, run through the whole pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryScript {
    #[serde(default)]
    pub query_id: Option<String>,
    pub at_tick: Tick,
    /// Name of the querying peer.
    pub origin: String,
    pub keywords: String,
    #[serde(default)]
    pub group: Option<PeerGroupId>,
    #[serde(default)]
    pub search_wsdl: bool,
    #[serde(default)]
    pub hop_budget: Option<u32>,
    #[serde(default)]
    pub max_results: Option<usize>,
    /// Client context; defaults to a basic device at the origin of the
    /// plane, available for the whole run, load 0.
    #[serde(default)]
    pub client: Option<ContextProfile>,
    #[serde(default)]
    pub requested: CapabilitySignature,
}

impl QueryScript {
    /// Effective id: the declared one, or q<index+1>.
    pub fn effective_id(&self, index: usize) -> String {
        self.query_id
            .clone()
            .unwrap_or_else(|| format!("q{}", index + 1))
    }

    pub fn effective_client(&self, ticks: Tick) -> ContextProfile {
        self.client.clone().unwrap_or(ContextProfile {
            location: (0.0, 0.0),
            available_window: (0, ticks),
            device_class: 1,
            load: 0.0,
        })
    }
}

/// The whole scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ticks")]
    pub ticks: Tick,
    pub topology: TopologySpec,
    #[serde(default)]
    pub peer_groups: Vec<PeerGroup>,
    #[serde(default)]
    pub ontology: ConceptOntology,
    #[serde(default)]
    pub context_sources: BTreeMap<String, ContextProfile>,
    #[serde(default)]
    pub services: Vec<ServiceScript>,
    #[serde(default)]
    pub churn: ChurnSpec,
    #[serde(default)]
    pub events: Vec<ScriptedEvent>,
    #[serde(default)]
    pub queries: Vec<QueryScript>,
    #[serde(default)]
    pub params: ScenarioParams,
}

impl ScenarioConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new("$", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("$", format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    fn peer_role(&self, name: &str) -> Option<PeerRole> {
        self.topology
            .peers
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.role)
    }

    /// Cross-checks every reference (peers, groups, concepts, context
    /// sources) and every numeric bound. The returned error names the
    /// offending field by path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ticks == 0 {
            return Err(ConfigError::new("ticks", "must be positive"));
        }
        // Topology invariants are enforced by overlay construction; run it
        // once here so errors surface with a config path.
        crate::overlay::Overlay::create(&self.topology, self.seed)
            .map_err(|e| ConfigError::new("topology.peers", e.to_string()))?;

        let mut group_ids: Vec<&PeerGroupId> = Vec::new();
        for (i, group) in self.peer_groups.iter().enumerate() {
            group
                .validate()
                .map_err(|e| ConfigError::new(format!("peer_groups[{i}]"), e))?;
            if group_ids.contains(&&group.id) {
                return Err(ConfigError::new(
                    format!("peer_groups[{i}].id"),
                    format!("duplicate peer group id {}", group.id),
                ));
            }
            group_ids.push(&group.id);
        }

        self.ontology
            .validate()
            .map_err(|e| ConfigError::new("ontology", e.to_string()))?;

        for (name, profile) in &self.context_sources {
            profile
                .validate()
                .map_err(|e| ConfigError::new(format!("context_sources.{name}"), e))?;
        }

        self.churn
            .validate()
            .map_err(|e| ConfigError::new("churn", e))?;

        let p = &self.params;
        if p.lifetime == 0 {
            return Err(ConfigError::new("params.lifetime", "must be positive"));
        }
        if p.republish_period == 0 {
            return Err(ConfigError::new(
                "params.republish_period",
                "must be positive",
            ));
        }
        if p.hop_budget == 0 {
            return Err(ConfigError::new("params.hop_budget", "must be positive"));
        }
        if p.max_results == 0 {
            return Err(ConfigError::new("params.max_results", "must be positive"));
        }
        if !(0.0..=1.0).contains(&p.ams_threshold) || p.ams_threshold.is_nan() {
            return Err(ConfigError::new(
                "params.ams_threshold",
                "must lie in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&p.max_load) || p.max_load.is_nan() {
            return Err(ConfigError::new("params.max_load", "must lie in [0, 1]"));
        }
        if p.max_distance < 0.0 || p.max_distance.is_nan() {
            return Err(ConfigError::new(
                "params.max_distance",
                "must be non-negative",
            ));
        }

        for (i, svc) in self.services.iter().enumerate() {
            let path = |field: &str| format!("services[{i}].{field}");
            match self.peer_role(&svc.host) {
                Some(PeerRole::Edge) => {}
                Some(_) => {
                    return Err(ConfigError::new(
                        path("host"),
                        "service host must be an edge peer",
                    ))
                }
                None => {
                    return Err(ConfigError::new(
                        path("host"),
                        format!("unknown peer {}", svc.host),
                    ))
                }
            }
            svc.wsdl
                .validate()
                .map_err(|e| ConfigError::new(path("wsdl"), e.to_string()))?;
            for (j, g) in svc.groups.iter().enumerate() {
                if !group_ids.contains(&g) {
                    return Err(ConfigError::new(
                        format!("services[{i}].groups[{j}]"),
                        format!("unknown peer group {g}"),
                    ));
                }
            }
            for term in svc.wsdl.concept_terms() {
                if !self.ontology.contains(term) {
                    return Err(ConfigError::new(
                        path("wsdl.operations"),
                        format!("concept {term} is not in the ontology"),
                    ));
                }
            }
            if let Some(r) = &svc.wsdl.context_source_ref {
                if !self.context_sources.contains_key(r) {
                    return Err(ConfigError::new(
                        path("wsdl.context_source_ref"),
                        format!("unknown context source {r}"),
                    ));
                }
            }
            if svc.lifetime == Some(0) {
                return Err(ConfigError::new(path("lifetime"), "must be positive"));
            }
            if svc.republish_period == Some(0) {
                return Err(ConfigError::new(
                    path("republish_period"),
                    "must be positive",
                ));
            }
            if svc.platforms.is_empty() {
                return Err(ConfigError::new(
                    path("platforms"),
                    "at least one platform required",
                ));
            }
        }

        for (i, ev) in self.events.iter().enumerate() {
            let path = |field: &str| format!("events[{i}].{field}");
            if self.peer_role(&ev.peer).is_none() {
                return Err(ConfigError::new(
                    path("peer"),
                    format!("unknown peer {}", ev.peer),
                ));
            }
            if ev.event == ScriptedEventKind::Rebind && ev.address.is_none() {
                return Err(ConfigError::new(
                    path("address"),
                    "rebind events need an address",
                ));
            }
            if ev.at_tick >= self.ticks {
                return Err(ConfigError::new(
                    path("at_tick"),
                    "beyond the end of the run",
                ));
            }
        }

        for (i, q) in self.queries.iter().enumerate() {
            let path = |field: &str| format!("queries[{i}].{field}");
            if self.peer_role(&q.origin).is_none() {
                return Err(ConfigError::new(
                    path("origin"),
                    format!("unknown peer {}", q.origin),
                ));
            }
            if tokenize(&q.keywords).is_empty() {
                return Err(ConfigError::new(
                    path("keywords"),
                    "no keywords left after normalization",
                ));
            }
            if let Some(g) = &q.group {
                if !group_ids.contains(&g) {
                    return Err(ConfigError::new(
                        path("group"),
                        format!("unknown peer group {g}"),
                    ));
                }
            }
            if q.at_tick >= self.ticks {
                return Err(ConfigError::new(
                    path("at_tick"),
                    "beyond the end of the run",
                ));
            }
            if q.hop_budget == Some(0) {
                return Err(ConfigError::new(path("hop_budget"), "must be positive"));
            }
            if q.max_results == Some(0) {
                return Err(ConfigError::new(path("max_results"), "must be positive"));
            }
            if let Some(client) = &q.client {
                client
                    .validate()
                    .map_err(|e| ConfigError::new(path("client"), e))?;
            }
            for concept in q.requested.inputs.iter().chain(q.requested.outputs.iter()) {
                if !self.ontology.contains(concept) {
                    return Err(ConfigError::new(
                        path("requested"),
                        format!("concept {concept} is not in the ontology"),
                    ));
                }
            }
        }
        Ok(())
    }
}
