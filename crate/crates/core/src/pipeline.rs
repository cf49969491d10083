//! The end-to-end mediation pipeline and run driver.
//!
//! A run advances the clock tick by tick. Within one tick, in this order:
//! scripted events, churn draws, service publish/republish, expiry sweeps on
//! online peers, then scripted queries, each flowing through
//! discover -> TF-IDF post-filter -> services graph -> context ranking.
//! Every output is a deterministic function of the scenario document.
//!
//! The mediation stages (post-filter, context engine) run co-located with
//! the querying peer's rendezvous and add zero overlay hops; query latency
//! is the flood out plus the responses back.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::advert::{derive_id, AdvBody, Advertisement, Tick};
use crate::context::{build_services_graph, rank_final, ContextError, MatchParams, RankedService};
use crate::discovery::{discover, fetch_impl_package, fetch_spec, DiscoveryError, Query};
use crate::overlay::{
    ChurnEventKind, Destination, MessageKind, MessagePayload, Overlay, OverlayError,
    OverlayMessage, PeerId,
};
use crate::publishing::{publish_service, PublishError};
use crate::ranking::{filter_to_ams, AmsEntry, RankingError};
use crate::scenario::{ConfigError, QueryScript, ScenarioConfig, ScriptedEventKind};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Publish(#[from] PublishError),
    #[error("choice rank {rank} outside final list of size {final_size}")]
    RankOutOfRange { rank: usize, final_size: usize },
    #[error("publisher {0} unreachable at invoke time")]
    PublisherUnreachable(String),
}

/// One line of the run's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub tick: Tick,
    pub event: String,
    pub peer: PeerId,
    pub detail: String,
}

/// One keyword-stage result row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordHit {
    pub class_id: String,
    pub hops: u32,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub keyword_matches: usize,
    pub ams_size: usize,
    pub final_size: usize,
}

/// Full record of one query's trip through the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub query_id: String,
    pub tick: Tick,
    pub origin: PeerId,
    pub hop_budget: u32,
    pub stage_counts: StageCounts,
    pub keyword: Vec<KeywordHit>,
    pub ams: Vec<AmsEntry>,
    pub final_ranking: Vec<RankedService>,
    pub latency_ticks: Tick,
    /// Set when the query could not run (for example an origin downed by
    /// churn); all stage counts are zero in that case.
    pub error: Option<String>,
}

/// Logical messages sent during a run, by kind. One QueryRequest per query
/// flood, one QueryResponse per responding peer, one PublishAdv per batch
/// forwarded to a rendezvous, one ServiceInvoke/ServiceResult per invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MessageCounts {
    pub publish_adv: u64,
    pub query_request: u64,
    pub query_response: u64,
    pub service_invoke: u64,
    pub service_result: u64,
}

impl MessageCounts {
    fn bump(&mut self, kind: MessageKind, n: u64) {
        match kind {
            MessageKind::PublishAdv => self.publish_adv += n,
            MessageKind::QueryRequest => self.query_request += n,
            MessageKind::QueryResponse => self.query_response += n,
            MessageKind::ServiceInvoke => self.service_invoke += n,
            MessageKind::ServiceResult => self.service_result += n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub keyword_matches: usize,
    pub ams_size: usize,
    pub final_size: usize,
    pub latency_ticks: Tick,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub publishes: u64,
    pub republishes: u64,
    pub expiries: u64,
    pub messages: MessageCounts,
    pub queries: Vec<QueryMetrics>,
}

/// Everything a run produces. The string renderings are the byte-exact
/// outputs used for cross-run diffs.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<EventRecord>,
    pub traces: Vec<PipelineTrace>,
    pub metrics: MetricsSummary,
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

impl RunOutput {
    /// One JSON object per line: {tick, event, peer, detail}.
    pub fn event_log_jsonl(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    /// Per-query records, one JSON object per line: a summary row followed
    /// by keyword, ams and final rows. Scores carry nine decimal places so
    /// cross-run diffs are exact.
    pub fn traces_jsonl(&self) -> String {
        let mut out = String::new();
        for trace in &self.traces {
            out.push_str(&trace_lines(trace));
        }
        out
    }

    /// The metrics summary as a single JSON line.
    pub fn metrics_json(&self) -> String {
        let mut s =
            serde_json::to_string(&self.metrics).expect("metrics serialization cannot fail");
        s.push('\n');
        s
    }
}

fn trace_lines(trace: &PipelineTrace) -> String {
    let qid = json_str(&trace.query_id);
    let mut out = String::new();
    let error_field = match &trace.error {
        Some(e) => format!(",\"error\":{}", json_str(e)),
        None => String::new(),
    };
    out.push_str(&format!(
        "{{\"query_id\":{qid},\"stage\":\"summary\",\"tick\":{},\"origin\":{},\"keyword_matches\":{},\"ams_size\":{},\"final_size\":{},\"latency_ticks\":{}{error_field}}}\n",
        trace.tick,
        json_str(trace.origin.as_hex()),
        trace.stage_counts.keyword_matches,
        trace.stage_counts.ams_size,
        trace.stage_counts.final_size,
        trace.latency_ticks,
    ));
    for hit in &trace.keyword {
        let terms = serde_json::to_string(&hit.matched_terms).expect("term list serializes");
        out.push_str(&format!(
            "{{\"query_id\":{qid},\"stage\":\"keyword\",\"class_id\":{},\"hops\":{},\"matched_terms\":{terms}}}\n",
            json_str(&hit.class_id),
            hit.hops,
        ));
    }
    for entry in &trace.ams {
        out.push_str(&format!(
            "{{\"query_id\":{qid},\"stage\":\"ams\",\"rank\":{},\"class_id\":{},\"score\":{:.9}}}\n",
            entry.rank,
            json_str(&entry.class_id),
            entry.score,
        ));
    }
    for (i, svc) in trace.final_ranking.iter().enumerate() {
        out.push_str(&format!(
            "{{\"query_id\":{qid},\"stage\":\"final\",\"rank\":{},\"class_id\":{},\"degree\":\"{}\",\"score\":{:.9}}}\n",
            i + 1,
            json_str(&svc.class_id),
            svc.degree,
            svc.score,
        ));
    }
    out
}

/// The adv_id under which a peer's own peer advertisement is published.
pub fn peer_adv_id(peer: &PeerId) -> String {
    derive_id("peer-adv", &[peer.as_hex()])
}

/// Acknowledgment of a service invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvokeAck {
    pub query_id: String,
    pub class_id: String,
    pub publisher: PeerId,
    /// Request out and canned result back along the same path.
    pub round_trip_ticks: Tick,
    /// Installable client package for the requested platform, when one is
    /// advertised and still cached somewhere reachable.
    pub package_ref: Option<String>,
    pub ack: String,
}

/// Sends a ServiceInvoke to the publisher ranked `choice_rank` (1-based) in
/// the trace's final list and returns the canned acknowledgment. Resolving
/// the ModuleImpl package for the client's platform models downloading the
/// installable client.
pub fn select_and_invoke(
    trace: &PipelineTrace,
    choice_rank: usize,
    overlay: &mut Overlay,
    platform: &str,
) -> Result<InvokeAck, PipelineError> {
    let final_size = trace.final_ranking.len();
    if choice_rank == 0 || choice_rank > final_size {
        return Err(PipelineError::RankOutOfRange {
            rank: choice_rank,
            final_size,
        });
    }
    let chosen = &trace.final_ranking[choice_rank - 1];
    let msg = OverlayMessage::new(
        overlay.next_msg_id(),
        trace.origin.clone(),
        Destination::Peer(chosen.publisher.clone()),
        trace.hop_budget,
        MessagePayload::ServiceInvoke {
            class_id: chosen.class_id.clone(),
        },
    );
    let report = overlay.route(&msg)?;
    let Some((_, delivered_at)) = report.first() else {
        return Err(PipelineError::PublisherUnreachable(
            chosen.publisher.to_string(),
        ));
    };
    let one_way = delivered_at - overlay.now();
    let package_ref = fetch_impl_package(&trace.origin, &chosen.spec_id, platform, overlay);
    Ok(InvokeAck {
        query_id: trace.query_id.clone(),
        class_id: chosen.class_id.clone(),
        publisher: chosen.publisher.clone(),
        round_trip_ticks: 2 * one_way,
        package_ref,
        ack: "ok".to_string(),
    })
}

/// One running scenario: the overlay plus all accumulated outputs.
pub struct Simulation {
    config: ScenarioConfig,
    overlay: Overlay,
    rng: ChaCha8Rng,
    events: Vec<EventRecord>,
    traces: Vec<PipelineTrace>,
    publishes: u64,
    republishes: u64,
    expiries: u64,
    messages: MessageCounts,
    service_published: Vec<bool>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let overlay = Overlay::create_with_capacity(
            &config.topology,
            config.seed,
            config.params.cache_capacity,
        )?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_services = config.services.len();
        Ok(Self {
            config,
            overlay,
            rng,
            events: Vec::new(),
            traces: Vec::new(),
            publishes: 0,
            republishes: 0,
            expiries: 0,
            messages: MessageCounts::default(),
            service_published: vec![false; n_services],
        })
    }

    pub fn overlay(&self) -> &Overlay {
        &self.overlay
    }

    pub fn overlay_mut(&mut self) -> &mut Overlay {
        &mut self.overlay
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn traces(&self) -> &[PipelineTrace] {
        &self.traces
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    fn log(&mut self, event: &str, peer: PeerId, detail: String) {
        self.events.push(EventRecord {
            tick: self.overlay.now(),
            event: event.to_string(),
            peer,
            detail,
        });
    }

    /// Steps 1-4 of the tick cycle: scripted events, churn, publishing,
    /// expiry sweeps.
    fn tick_maintenance(&mut self) {
        let now = self.overlay.now();

        // 1. Scripted events, in document order.
        let scripted: Vec<_> = self
            .config
            .events
            .iter()
            .filter(|e| e.at_tick == now)
            .cloned()
            .collect();
        for ev in scripted {
            let peer = self
                .overlay
                .resolve(&ev.peer)
                .expect("validated peer")
                .clone();
            match ev.event {
                ScriptedEventKind::Join => {
                    self.overlay.set_online(&peer, true).expect("peer exists");
                    self.log("join", peer, "scripted".into());
                }
                ScriptedEventKind::Leave => {
                    self.overlay.set_online(&peer, false).expect("peer exists");
                    self.log("leave", peer, "scripted".into());
                }
                ScriptedEventKind::Rebind => {
                    let address = ev.address.expect("validated rebind address");
                    self.overlay
                        .rebind_endpoint(&peer, &address)
                        .expect("peer exists");
                    self.log("rebind", peer, address);
                }
            }
        }

        // 2. Seeded churn on the edge peers.
        let churn = self.config.churn.clone();
        for ev in self.overlay.churn_tick(&churn, &mut self.rng) {
            let event = match ev.event {
                ChurnEventKind::Join => "join",
                ChurnEventKind::Leave => "leave",
                ChurnEventKind::Rebind => "rebind",
            };
            self.log(event, ev.peer, ev.detail);
        }

        // 3a. Peer advertisements, once at tick 0.
        if now == 0 {
            let lifetime = self.config.params.lifetime;
            let peers: Vec<PeerId> = self.overlay.peer_ids().cloned().collect();
            for id in peers {
                let node = self.overlay.peer(&id).expect("peer exists");
                let adv = Advertisement::new(
                    peer_adv_id(&id),
                    id.clone(),
                    vec![],
                    now,
                    lifetime,
                    AdvBody::Peer {
                        name: node.name.clone(),
                        address: node.endpoint().address.clone(),
                    },
                );
                let adv_id = adv.adv_id.clone();
                self.overlay
                    .peer_mut(&id)
                    .expect("peer exists")
                    .cache
                    .publish(adv, now)
                    .expect("positive lifetime");
                self.publishes += 1;
                self.log("publish", id, adv_id);
            }
        }

        // 3b. Service publishing. While the host is online, the triple is
        // (re)published at every tick that is a multiple of the period;
        // with auto_republish off it is published exactly once. Publishing
        // the full batch again re-derives the same adv_ids, so this covers
        // the republish semantics even after the host's own copies expired
        // during a long offline stretch.
        for i in 0..self.config.services.len() {
            let svc = self.config.services[i].clone();
            let period = svc
                .republish_period
                .unwrap_or(self.config.params.republish_period);
            let lifetime = svc.lifetime.unwrap_or(self.config.params.lifetime);
            let due = if svc.auto_republish {
                now % period == 0
            } else {
                !self.service_published[i]
            };
            if !due {
                continue;
            }
            let host = self
                .overlay
                .resolve(&svc.host)
                .expect("validated host")
                .clone();
            if !self.overlay.peer(&host).is_some_and(|p| p.online) {
                continue;
            }
            let published = publish_service(
                &mut self.overlay,
                &host,
                &svc.wsdl,
                &svc.version,
                &svc.groups,
                &svc.platforms,
                now,
                lifetime,
                &|_| true, // group references validated at load
            )
            .expect("validated service on an online host");
            let event = if self.service_published[i] {
                "republish"
            } else {
                "publish"
            };
            for adv in &published.batch {
                if self.service_published[i] {
                    self.republishes += 1;
                } else {
                    self.publishes += 1;
                }
                self.log(event, host.clone(), adv.adv_id.clone());
            }
            if published.forwarded {
                self.messages.bump(MessageKind::PublishAdv, 1);
            }
            self.service_published[i] = true;
        }

        // 4. Expiry sweeps on online peers. Offline caches stay frozen;
        // their entries are judged against the global tick once they are
        // back online.
        let online: Vec<PeerId> = self
            .overlay
            .peers()
            .filter(|p| p.online)
            .map(|p| p.id.clone())
            .collect();
        for id in online {
            let expired = self
                .overlay
                .peer_mut(&id)
                .expect("peer exists")
                .cache
                .expire_sweep(now);
            for adv_id in expired {
                self.expiries += 1;
                self.log("expire", id.clone(), adv_id);
            }
        }
    }

    /// Runs one scripted query through the full pipeline and records the
    /// trace.
    pub fn execute_query(&mut self, script: &QueryScript, query_id: String) -> &PipelineTrace {
        let now = self.overlay.now();
        let origin = self
            .overlay
            .resolve(&script.origin)
            .expect("validated origin")
            .clone();
        let trace = match self.query_pipeline(script, &query_id, &origin, now) {
            Ok(trace) => trace,
            Err(e) => PipelineTrace {
                query_id: query_id.clone(),
                tick: now,
                origin: origin.clone(),
                hop_budget: script.hop_budget.unwrap_or(self.config.params.hop_budget),
                stage_counts: StageCounts {
                    keyword_matches: 0,
                    ams_size: 0,
                    final_size: 0,
                },
                keyword: vec![],
                ams: vec![],
                final_ranking: vec![],
                latency_ticks: 0,
                error: Some(e.to_string()),
            },
        };
        self.log("query", origin, query_id);
        self.traces.push(trace);
        self.traces.last().expect("just pushed")
    }

    fn query_pipeline(
        &mut self,
        script: &QueryScript,
        query_id: &str,
        origin: &PeerId,
        now: Tick,
    ) -> Result<PipelineTrace, PipelineError> {
        let params = &self.config.params;
        let mut query = Query::new(query_id, &script.keywords)?
            .with_wsdl_search(script.search_wsdl)
            .with_hop_budget(script.hop_budget.unwrap_or(params.hop_budget))
            .with_max_results(script.max_results.unwrap_or(params.max_results));
        if let Some(group) = &script.group {
            query = query.with_group(group.clone());
        }

        let outcome = discover(origin, &query, &self.overlay, now)?;
        self.messages.bump(MessageKind::QueryRequest, 1);
        self.messages
            .bump(MessageKind::QueryResponse, outcome.responders as u64);
        let keyword: Vec<KeywordHit> = outcome
            .records
            .iter()
            .map(|r| KeywordHit {
                class_id: r.class_id().to_string(),
                hops: r.hops,
                matched_terms: r.matched_terms.iter().cloned().collect(),
            })
            .collect();

        let (ams, retained) = if outcome.records.is_empty() {
            (vec![], vec![])
        } else {
            filter_to_ams(&outcome.records, &query.keywords, params.ams_threshold)?
        };

        // Collect spec bodies for the survivors; records usually carry the
        // linked spec, with a network fetch as fallback. Entries whose spec
        // expired in between drop out (results are snapshots).
        let mut specs = BTreeMap::new();
        for entry in &ams {
            let from_record = retained
                .iter()
                .find(|r| r.class_id() == entry.class_id)
                .and_then(|r| r.spec_body().cloned());
            let spec = match from_record {
                Some(s) => Some(s),
                None => fetch_spec(origin, &entry.class_id, &self.overlay).ok(),
            };
            if let Some(s) = spec {
                specs.insert(entry.class_id.clone(), s);
            }
        }

        let client = script.effective_client(self.config.ticks);
        let graph = build_services_graph(
            &ams,
            &specs,
            &self.config.context_sources,
            &self.config.ontology,
            &client,
            self.config.ticks,
        )?;
        let match_params = MatchParams {
            max_distance: params.max_distance,
            max_load: params.max_load,
            now,
        };
        let final_ranking = rank_final(
            &ams,
            &graph,
            &client,
            &script.requested,
            &self.config.ontology,
            &match_params,
        )?;

        Ok(PipelineTrace {
            query_id: query_id.to_string(),
            tick: now,
            origin: origin.clone(),
            hop_budget: query.hop_budget,
            stage_counts: StageCounts {
                keyword_matches: keyword.len(),
                ams_size: ams.len(),
                final_size: final_ranking.len(),
            },
            keyword,
            ams,
            final_ranking,
            latency_ticks: outcome.latency_ticks(),
            error: None,
        })
    }

    /// Advances the simulation by exactly one tick: maintenance, scripted
    /// queries, clock.
    pub fn run_tick(&mut self) {
        self.tick_maintenance();
        let now = self.overlay.now();
        let due: Vec<(usize, QueryScript)> = self
            .config
            .queries
            .iter()
            .enumerate()
            .filter(|(_, q)| q.at_tick == now)
            .map(|(i, q)| (i, q.clone()))
            .collect();
        for (i, script) in due {
            let qid = script.effective_id(i);
            self.execute_query(&script, qid);
        }
        self.overlay.advance_tick();
    }

    /// Runs full ticks until the clock reaches `tick`.
    pub fn run_until(&mut self, tick: Tick) {
        while self.overlay.now() < tick {
            self.run_tick();
        }
    }

    /// Runs maintenance for the current tick without executing scripted
    /// queries or advancing the clock; used for one-shot queries against
    /// the simulated state at a chosen tick.
    pub fn prepare_tick(&mut self) {
        self.tick_maintenance();
    }

    /// Invokes a ranked service from a trace, counting the messages.
    pub fn invoke(
        &mut self,
        trace: &PipelineTrace,
        choice_rank: usize,
        platform: &str,
    ) -> Result<InvokeAck, PipelineError> {
        self.messages.bump(MessageKind::ServiceInvoke, 1);
        let ack = select_and_invoke(trace, choice_rank, &mut self.overlay, platform)?;
        self.messages.bump(MessageKind::ServiceResult, 1);
        Ok(ack)
    }

    pub fn output(&self) -> RunOutput {
        RunOutput {
            events: self.events.clone(),
            traces: self.traces.clone(),
            metrics: MetricsSummary {
                publishes: self.publishes,
                republishes: self.republishes,
                expiries: self.expiries,
                messages: self.messages,
                queries: self
                    .traces
                    .iter()
                    .map(|t| QueryMetrics {
                        query_id: t.query_id.clone(),
                        keyword_matches: t.stage_counts.keyword_matches,
                        ams_size: t.stage_counts.ams_size,
                        final_size: t.stage_counts.final_size,
                        latency_ticks: t.latency_ticks,
                    })
                    .collect(),
            },
        }
    }
}

/// Runs a validated scenario to completion.
pub fn run_scenario(config: ScenarioConfig) -> Result<RunOutput, PipelineError> {
    let mut sim = Simulation::new(config)?;
    let ticks = sim.config.ticks;
    sim.run_until(ticks);
    Ok(sim.output())
}
