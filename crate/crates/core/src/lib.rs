//! Deterministic simulator and library for publishing and discovering web
//! services hosted on resource-constrained peers in a structured P2P
//! overlay.
//!
//! Services live on edge peers ("mobile hosts") attached to rendezvous
//! super peers. Publication maps each service onto a module class / spec /
//! impl advertisement triple with bounded lifetimes; discovery floods
//! keyword queries through the super-peer layer; a TF-IDF post-filter
//! narrows the hits to the advanced matching subset; and a context engine
//! grades each survivor against the client's location, time window, device
//! class, load and requested capabilities before the final ranking goes
//! back to the client.
//!
//! Everything is driven by a tick clock and a single seeded generator:
//! identical scenario documents produce byte-identical outputs.

pub mod advert;
pub mod context;
pub mod discovery;
pub mod overlay;
pub mod pipeline;
pub mod publishing;
pub mod ranking;
pub mod scenario;
pub mod snapshot;

pub use advert::{
    deserialize_adv, serialize_adv, AdvBody, AdvKind, AdvertError, Advertisement,
    AdvertisementCache, PeerGroup, PeerGroupId, Tick,
};
pub use context::{
    build_services_graph, context_match, rank_final, CapabilitySignature, ConceptOntology,
    ContextError, ContextProfile, MatchDegree, MatchParams, RankedService, ServiceNode,
    ServicesGraph,
};
pub use discovery::{
    discover, fetch_spec, match_local, DiscoveryError, DiscoveryOutcome, MatchRecord, Query,
};
pub use overlay::{
    apply_churn, ChurnSpec, Destination, Endpoint, MessageKind, Overlay, OverlayError,
    OverlayMessage, PeerId, PeerNode, PeerRole, PeerSpec, SimClock, TopologySpec,
};
pub use pipeline::{
    run_scenario, select_and_invoke, EventRecord, InvokeAck, MetricsSummary, PipelineError,
    PipelineTrace, RunOutput, Simulation, StageCounts,
};
pub use publishing::{
    auto_republish, build_service_batch, categorize, publish_service, ModuleClassBody,
    ModuleImplBody, ModuleSpecBody, PublishError, PublishedService, WsdlDescriptor, WsdlOperation,
};
pub use ranking::{
    build_corpus, cosine_rank, filter_to_ams, tfidf_weight, tokenize, AmsEntry, DocumentCorpus,
    RankingError,
};
pub use scenario::{ConfigError, ScenarioConfig, ScenarioParams};
pub use snapshot::{
    apply_snapshot, parse_snapshot, read_snapshot, snapshot_string, write_snapshot, SnapshotError,
};
