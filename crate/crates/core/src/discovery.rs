//! Basic keyword search over cached module advertisements: local matching
//! plus hop-limited propagation through the rendezvous/super layer.
//!
//! Matching is whole-token, case-insensitive equality over the class name
//! and description (no stemming, no substrings); `search_wsdl` extends the
//! token set to the linked spec's WSDL text. Keywords use OR semantics: this
//! stage deliberately over-returns and precision is the post-filter's job.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::advert::{AdvBody, Advertisement, AdvertisementCache, PeerGroupId, Tick};
use crate::overlay::{
    derive_msg_id, Destination, MessagePayload, Overlay, OverlayError, OverlayMessage, PeerId,
    DEFAULT_HOP_BUDGET,
};
use crate::publishing::ModuleSpecBody;
use crate::ranking::tokenize;

/// Default result cap per query.
pub const DEFAULT_MAX_RESULTS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiscoveryError {
    #[error("query origin peer is offline")]
    OriginOffline,
    #[error("no keywords left after normalization")]
    EmptyQuery,
    #[error("no cached spec found for class {0}")]
    SpecNotFound(String),
    #[error("unknown peer: {0}")]
    UnknownPeer(String),
}

/// A keyword query. Keywords are normalized with the post-filter tokenizer
/// at construction, so they are lowercase with punctuation stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub keywords: Vec<String>,
    pub group_filter: Option<PeerGroupId>,
    pub search_wsdl: bool,
    pub hop_budget: u32,
    pub max_results: usize,
}

impl Query {
    pub fn new(query_id: impl Into<String>, raw_keywords: &str) -> Result<Self, DiscoveryError> {
        let keywords = tokenize(raw_keywords);
        if keywords.is_empty() {
            return Err(DiscoveryError::EmptyQuery);
        }
        Ok(Self {
            query_id: query_id.into(),
            keywords,
            group_filter: None,
            search_wsdl: false,
            hop_budget: DEFAULT_HOP_BUDGET,
            max_results: DEFAULT_MAX_RESULTS,
        })
    }

    pub fn with_group(mut self, group: PeerGroupId) -> Self {
        self.group_filter = Some(group);
        self
    }

    pub fn with_wsdl_search(mut self, on: bool) -> Self {
        self.search_wsdl = on;
        self
    }

    pub fn with_hop_budget(mut self, budget: u32) -> Self {
        self.hop_budget = budget;
        self
    }

    pub fn with_max_results(mut self, max: usize) -> Self {
        self.max_results = max;
        self
    }
}

/// One discovered module class, along with its linked spec when the same
/// cache held it, where it was found and how far away that was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    /// The matching advertisement; always kind ModuleClass.
    pub class: Advertisement,
    /// The spec advertisement linked by class_id, from the same cache.
    pub spec: Option<Advertisement>,
    pub found_at: PeerId,
    pub hops: u32,
    pub matched_terms: BTreeSet<String>,
}

impl MatchRecord {
    pub fn class_id(&self) -> &str {
        match &self.class.body {
            AdvBody::ModuleClass(c) => &c.class_id,
            _ => unreachable!("match records always wrap module classes"),
        }
    }

    pub fn class_body(&self) -> &crate::publishing::ModuleClassBody {
        match &self.class.body {
            AdvBody::ModuleClass(c) => c,
            _ => unreachable!("match records always wrap module classes"),
        }
    }

    pub fn spec_body(&self) -> Option<&ModuleSpecBody> {
        match self.spec.as_ref().map(|a| &a.body) {
            Some(AdvBody::ModuleSpec(s)) => Some(s),
            _ => None,
        }
    }

    /// The post-filter document text: class name + class description +
    /// the spec's WSDL text when available.
    pub fn document_text(&self) -> String {
        let body = self.class_body();
        match self.spec_body() {
            Some(spec) => {
                format!(
                    "{} {} {}",
                    body.name,
                    body.description,
                    spec.wsdl.search_text()
                )
            }
            None => format!("{} {}", body.name, body.description),
        }
    }
}

fn find_spec_for_class<'a>(
    cache: &'a AdvertisementCache,
    class_id: &str,
    now: Tick,
) -> Option<&'a Advertisement> {
    cache.iter_visible(now).find(|a| match &a.body {
        AdvBody::ModuleSpec(s) => s.class_id == class_id,
        _ => false,
    })
}

/// Runs the keyword predicate over one cache: unexpired module classes where
/// at least one keyword occurs as a token of the name or description (or of
/// the linked spec's WSDL text when `search_wsdl` is set), filtered by group
/// tag when requested. Hops are filled in by the caller.
pub fn match_local(cache: &AdvertisementCache, q: &Query, now: Tick) -> Vec<MatchRecord> {
    let mut out = Vec::new();
    for adv in cache.iter_visible(now) {
        let AdvBody::ModuleClass(class) = &adv.body else {
            continue;
        };
        if let Some(group) = &q.group_filter {
            if !adv.has_group(group) {
                continue;
            }
        }
        let spec = find_spec_for_class(cache, &class.class_id, now);
        let mut tokens: BTreeSet<String> =
            tokenize(&format!("{} {}", class.name, class.description))
                .into_iter()
                .collect();
        if q.search_wsdl {
            if let Some(AdvBody::ModuleSpec(s)) = spec.map(|a| &a.body) {
                tokens.extend(tokenize(&s.wsdl.search_text()));
            }
        }
        let matched_terms: BTreeSet<String> = q
            .keywords
            .iter()
            .filter(|k| tokens.contains(*k))
            .cloned()
            .collect();
        if matched_terms.is_empty() {
            continue;
        }
        out.push(MatchRecord {
            class: adv.clone(),
            spec: spec.cloned(),
            found_at: cache.owner().clone(),
            hops: 0,
            matched_terms,
        });
    }
    out
}

/// Outcome of a network-wide discovery: the deduplicated, truncated result
/// list plus enough bookkeeping for latency accounting and metrics.
#[derive(Debug, Clone)]
pub struct DiscoveryOutcome {
    pub records: Vec<MatchRecord>,
    /// Number of peers that replied with at least one match (QueryResponse
    /// messages on the wire).
    pub responders: usize,
    /// Deepest peer reached by the query flood within the hop budget.
    pub max_depth_reached: u32,
}

impl DiscoveryOutcome {
    /// Request out plus responses back along the reverse path. The
    /// post-filter and context stages run co-located with the rendezvous
    /// and cost zero additional hops.
    pub fn latency_ticks(&self) -> Tick {
        2 * self.max_depth_reached as Tick
    }
}

/// Broadcasts a QueryRequest from `origin` per [`Overlay::route`] semantics
/// with the query's hop budget, runs [`match_local`] at the origin and
/// every peer the flood delivers to, routes responses back along the
/// reverse path, deduplicates by class_id keeping the lowest-hop copy, and
/// truncates to `max_results` by ascending (hops, adv_id). Completes within
/// 2 x hop_budget ticks.
pub fn discover(
    origin: &PeerId,
    q: &Query,
    overlay: &Overlay,
    now: Tick,
) -> Result<DiscoveryOutcome, DiscoveryError> {
    let request = OverlayMessage::new(
        derive_msg_id(&q.query_id),
        origin.clone(),
        Destination::Broadcast,
        q.hop_budget,
        MessagePayload::QueryRequest {
            query_id: q.query_id.clone(),
        },
    );
    let report = overlay.route(&request).map_err(|e| match e {
        OverlayError::SourceOffline => DiscoveryError::OriginOffline,
        OverlayError::UnknownPeer(p) => DiscoveryError::UnknownPeer(p),
        other => DiscoveryError::UnknownPeer(other.to_string()),
    })?;

    let base = overlay.now();
    let mut searched: Vec<(PeerId, u32)> = vec![(origin.clone(), 0)];
    let mut max_depth_reached = 0u32;
    for (peer, delivered_at) in report {
        let depth = (delivered_at - base) as u32;
        max_depth_reached = max_depth_reached.max(depth);
        searched.push((peer, depth));
    }

    let mut responders = 0usize;
    let mut all: Vec<MatchRecord> = Vec::new();
    for (peer, depth) in searched {
        let node = overlay.peer(&peer).expect("reachable peers exist");
        let mut local = match_local(&node.cache, q, now);
        if local.is_empty() {
            continue;
        }
        if depth > 0 {
            responders += 1;
        }
        for rec in &mut local {
            rec.hops = depth;
        }
        all.append(&mut local);
    }

    // Deduplicate by class_id, keeping the lowest (hops, found_at) copy.
    all.sort_by(|a, b| (a.hops, a.found_at.clone()).cmp(&(b.hops, b.found_at.clone())));
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut deduped: Vec<MatchRecord> = all
        .into_iter()
        .filter(|r| seen.insert(r.class_id().to_string()))
        .collect();

    deduped.sort_by(|a, b| (a.hops, a.class.adv_id.clone()).cmp(&(b.hops, b.class.adv_id.clone())));
    deduped.truncate(q.max_results);
    Ok(DiscoveryOutcome {
        records: deduped,
        responders,
        max_depth_reached,
    })
}

/// Fetches the spec body for a class from the nearest cache holding an
/// unexpired copy, searching outward from `origin` over the online overlay
/// (nearest first, ties broken by peer id). Results are snapshots: an
/// advertisement may expire between search and fetch, which surfaces here
/// as [`DiscoveryError::SpecNotFound`].
pub fn fetch_spec(
    origin: &PeerId,
    class_id: &str,
    overlay: &Overlay,
) -> Result<ModuleSpecBody, DiscoveryError> {
    let origin_node = overlay
        .peer(origin)
        .ok_or_else(|| DiscoveryError::UnknownPeer(origin.to_string()))?;
    if !origin_node.online {
        return Err(DiscoveryError::OriginOffline);
    }
    let now = overlay.now();
    let mut candidates: Vec<(PeerId, u32)> = vec![(origin.clone(), 0)];
    candidates.extend(overlay.reachable_within(origin, u32::MAX));
    for (peer, _) in candidates {
        let node = overlay.peer(&peer).expect("reachable peers exist");
        if let Some(adv) = find_spec_for_class(&node.cache, class_id, now) {
            if let AdvBody::ModuleSpec(spec) = &adv.body {
                return Ok(spec.clone());
            }
        }
    }
    Err(DiscoveryError::SpecNotFound(class_id.to_string()))
}

/// Fetches the package reference of an implementation for `spec_id` on the
/// given platform, from the nearest cache holding an unexpired copy.
pub fn fetch_impl_package(
    origin: &PeerId,
    spec_id: &str,
    platform: &str,
    overlay: &Overlay,
) -> Option<String> {
    let now = overlay.now();
    let mut candidates: Vec<(PeerId, u32)> = vec![(origin.clone(), 0)];
    candidates.extend(overlay.reachable_within(origin, u32::MAX));
    for (peer, _) in candidates {
        let node = overlay.peer(&peer)?;
        for adv in node.cache.iter_visible(now) {
            if let AdvBody::ModuleImpl(body) = &adv.body {
                if body.spec_id == spec_id && body.platform == platform {
                    return Some(body.package_ref.clone());
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlay::{PeerRole, PeerSpec, TopologySpec};
    use crate::publishing::{publish_service, WsdlDescriptor, WsdlOperation};

    fn edge(name: &str, rdv: &str) -> PeerSpec {
        PeerSpec {
            name: name.into(),
            role: PeerRole::Edge,
            address: None,
            rendezvous: Some(rdv.into()),
            links: vec![],
            phone_number: None,
        }
    }

    fn sup(name: &str, links: &[&str]) -> PeerSpec {
        PeerSpec {
            name: name.into(),
            role: PeerRole::Super,
            address: None,
            rendezvous: None,
            links: links.iter().map(|s| s.to_string()).collect(),
            phone_number: None,
        }
    }

    fn weather_wsdl() -> WsdlDescriptor {
        WsdlDescriptor {
            service_name: "WeatherService".into(),
            description: "local weather forecasts".into(),
            operations: vec![WsdlOperation {
                name: "getForecast".into(),
                input_parts: vec!["location".into()],
                output_parts: vec!["forecast".into()],
            }],
            binding_path: "/weather".into(),
            context_source_ref: None,
        }
    }

    fn publish_on(overlay: &mut Overlay, host_name: &str, wsdl: &WsdlDescriptor) -> String {
        let host = overlay.resolve(host_name).unwrap().clone();
        let batch = publish_service(
            overlay,
            &host,
            wsdl,
            "1.0",
            &[],
            &["midp".into()],
            0,
            100,
            &|_| true,
        )
        .unwrap()
        .batch;
        batch[0].adv_id.clone()
    }

    #[test]
    fn match_local_whole_token_hit() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s")],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let a = overlay.resolve("a").unwrap().clone();
        let cache = &overlay.peer(&a).unwrap().cache;

        let q = Query::new("q1", "weather").unwrap();
        let hits = match_local(cache, &q, 0);
        assert_eq!(hits.len(), 1);
        assert_eq!(
            hits[0].matched_terms,
            BTreeSet::from(["weather".to_string()])
        );

        // No prefix matching: "weath" is not a token of anything.
        let q = Query::new("q2", "weath").unwrap();
        assert!(match_local(cache, &q, 0).is_empty());
    }

    #[test]
    fn match_local_wsdl_extension_flag() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s")],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let a = overlay.resolve("a").unwrap().clone();
        let cache = &overlay.peer(&a).unwrap().cache;

        // "getForecast" tokenizes to "getforecast", an operation-name token.
        let q = Query::new("q1", "getforecast")
            .unwrap()
            .with_wsdl_search(true);
        assert_eq!(match_local(cache, &q, 0).len(), 1);
        let q = Query::new("q2", "getforecast").unwrap();
        assert!(match_local(cache, &q, 0).is_empty());
    }

    #[test]
    fn match_local_group_filter() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s")],
            },
            0,
        )
        .unwrap();
        let host = overlay.resolve("a").unwrap().clone();
        let group = PeerGroupId("g-travel".into());
        publish_service(
            &mut overlay,
            &host,
            &weather_wsdl(),
            "1.0",
            &[group.clone()],
            &[],
            0,
            100,
            &|_| true,
        )
        .unwrap();
        let cache = &overlay.peer(&host).unwrap().cache;
        let q = Query::new("q", "weather").unwrap().with_group(group);
        assert_eq!(match_local(cache, &q, 0).len(), 1);
        let q = Query::new("q", "weather")
            .unwrap()
            .with_group(PeerGroupId("other".into()));
        assert!(match_local(cache, &q, 0).is_empty());
    }

    #[test]
    fn match_local_respects_expiry() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s")],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let a = overlay.resolve("a").unwrap().clone();
        let cache = &overlay.peer(&a).unwrap().cache;
        let q = Query::new("q", "weather").unwrap();
        assert_eq!(match_local(cache, &q, 99).len(), 1);
        assert!(match_local(cache, &q, 100).is_empty());
    }

    #[test]
    fn discover_same_rendezvous() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s"), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let b = overlay.resolve("b").unwrap().clone();
        let q = Query::new("q", "weather").unwrap().with_hop_budget(2);
        let outcome = discover(&b, &q, &overlay, 0).unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert!(outcome.records[0].hops <= 2);
        assert!(outcome.latency_ticks() <= 4);
    }

    #[test]
    fn discover_budget_arithmetic_across_super_chain() {
        // b - s3 - s2 - s1 - a: the publisher's rendezvous copy sits at s1,
        // three super hops plus the edge hop away from b's own cache.
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![
                    sup("s1", &["s2"]),
                    sup("s2", &["s3"]),
                    sup("s3", &[]),
                    edge("a", "s1"),
                    edge("b", "s3"),
                ],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let b = overlay.resolve("b").unwrap().clone();
        let q = Query::new("q", "weather").unwrap().with_hop_budget(2);
        assert!(discover(&b, &q, &overlay, 0).unwrap().records.is_empty());
        let q = Query::new("q", "weather").unwrap().with_hop_budget(4);
        let outcome = discover(&b, &q, &overlay, 0).unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.records[0].hops, 3);
    }

    #[test]
    fn discover_origin_offline() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        let b = overlay.resolve("b").unwrap().clone();
        overlay.set_online(&b, false).unwrap();
        let q = Query::new("q", "weather").unwrap();
        assert_eq!(
            discover(&b, &q, &overlay, 0).unwrap_err(),
            DiscoveryError::OriginOffline
        );
    }

    #[test]
    fn discover_max_results_tie_break() {
        // Two distinct services matching "weather" at equal hop distance:
        // with max_results = 1, the smaller (hops, adv_id) pair wins. Both
        // orderings of the pair are covered by comparing against a sorted
        // enumeration of the candidates.
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![
                    sup("s", &[]),
                    edge("a1", "s"),
                    edge("a2", "s"),
                    edge("b", "s"),
                ],
            },
            0,
        )
        .unwrap();
        let mut wsdl2 = weather_wsdl();
        wsdl2.service_name = "WeatherMaps".into();
        let id1 = publish_on(&mut overlay, "a1", &weather_wsdl());
        let id2 = publish_on(&mut overlay, "a2", &wsdl2);
        let b = overlay.resolve("b").unwrap().clone();

        let q = Query::new("q", "weather").unwrap().with_hop_budget(2);
        let all = discover(&b, &q, &overlay, 0).unwrap().records;
        assert_eq!(all.len(), 2);
        assert!(
            all.iter().all(|r| r.hops == 1),
            "both found at the shared rendezvous"
        );

        let expected_winner = std::cmp::min(id1, id2);
        let q = q.with_max_results(1);
        let one = discover(&b, &q, &overlay, 0).unwrap().records;
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].class.adv_id, expected_winner);
    }

    #[test]
    fn discover_lower_hops_beat_smaller_adv_id() {
        // The service with the lexicographically larger adv_id sits closer;
        // hops dominate the tie-break so it must win at max_results = 1.
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![
                    sup("s1", &["s2"]),
                    sup("s2", &[]),
                    edge("a1", "s1"),
                    edge("a2", "s2"),
                    edge("b", "s1"),
                ],
            },
            0,
        )
        .unwrap();
        let mut wsdl2 = weather_wsdl();
        wsdl2.service_name = "WeatherMaps".into();
        let near = publish_on(&mut overlay, "a1", &weather_wsdl());
        let far = publish_on(&mut overlay, "a2", &wsdl2);
        let b = overlay.resolve("b").unwrap().clone();
        let q = Query::new("q", "weather")
            .unwrap()
            .with_hop_budget(4)
            .with_max_results(1);
        let got = discover(&b, &q, &overlay, 0).unwrap().records;
        assert_eq!(got[0].class.adv_id, near);
        assert_ne!(got[0].class.adv_id, far);
    }

    #[test]
    fn discover_monotone_in_budget() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![
                    sup("s1", &["s2"]),
                    sup("s2", &["s3"]),
                    sup("s3", &[]),
                    edge("a", "s1"),
                    edge("c", "s2"),
                    edge("b", "s3"),
                ],
            },
            0,
        )
        .unwrap();
        let mut wsdl2 = weather_wsdl();
        wsdl2.service_name = "WeatherMaps".into();
        publish_on(&mut overlay, "a", &weather_wsdl());
        publish_on(&mut overlay, "c", &wsdl2);
        let b = overlay.resolve("b").unwrap().clone();
        let mut previous: BTreeSet<String> = BTreeSet::new();
        for budget in 0..=6 {
            let q = Query::new("q", "weather").unwrap().with_hop_budget(budget);
            let ids: BTreeSet<String> = discover(&b, &q, &overlay, 0)
                .unwrap()
                .records
                .iter()
                .map(|r| r.class_id().to_string())
                .collect();
            assert!(
                previous.is_subset(&ids),
                "results shrank when budget grew to {budget}"
            );
            previous = ids;
        }
        assert_eq!(previous.len(), 2);
    }

    #[test]
    fn group_filtered_discover_returns_every_publisher_in_the_group() {
        // Two publishers tag their services with the same group; a
        // group-filtered query must return both, and an exhaustive check
        // over the other groups returns exactly the expected members.
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![
                    sup("s", &[]),
                    edge("a1", "s"),
                    edge("a2", "s"),
                    edge("b", "s"),
                ],
            },
            0,
        )
        .unwrap();
        let shared = PeerGroupId("g-weather".into());
        let other = PeerGroupId("g-finance".into());
        let mut wsdl2 = weather_wsdl();
        wsdl2.service_name = "WeatherMaps".into();
        let h1 = overlay.resolve("a1").unwrap().clone();
        let h2 = overlay.resolve("a2").unwrap().clone();
        publish_service(
            &mut overlay,
            &h1,
            &weather_wsdl(),
            "1.0",
            &[shared.clone()],
            &[],
            0,
            100,
            &|_| true,
        )
        .unwrap();
        publish_service(
            &mut overlay,
            &h2,
            &wsdl2,
            "1.0",
            &[shared.clone(), other.clone()],
            &[],
            0,
            100,
            &|_| true,
        )
        .unwrap();
        let b = overlay.resolve("b").unwrap().clone();
        for (group, expected) in [
            (shared, 2usize),
            (other, 1),
            (PeerGroupId("g-none".into()), 0),
        ] {
            let q = Query::new("q", "weather")
                .unwrap()
                .with_hop_budget(2)
                .with_group(group);
            assert_eq!(
                discover(&b, &q, &overlay, 0).unwrap().records.len(),
                expected
            );
        }
    }

    #[test]
    fn fetch_spec_after_discover() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s"), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        let class_id = publish_on(&mut overlay, "a", &weather_wsdl());
        let a = overlay.resolve("a").unwrap().clone();
        let b = overlay.resolve("b").unwrap().clone();
        let spec = fetch_spec(&b, &class_id, &overlay).unwrap();
        assert_eq!(spec.access.publisher, a);
        assert_eq!(spec.class_id, class_id);
    }

    #[test]
    fn fetch_spec_expired_everywhere() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s"), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        let class_id = publish_on(&mut overlay, "a", &weather_wsdl());
        let b = overlay.resolve("b").unwrap().clone();
        for _ in 0..100 {
            overlay.advance_tick();
        }
        // Lifetime was 100 and nothing republished: the spec is invisible
        // everywhere at tick 100.
        assert_eq!(
            fetch_spec(&b, &class_id, &overlay).unwrap_err(),
            DiscoveryError::SpecNotFound(class_id)
        );
    }

    #[test]
    fn fetch_spec_from_rendezvous_while_publisher_offline() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s"), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        let class_id = publish_on(&mut overlay, "a", &weather_wsdl());
        let a = overlay.resolve("a").unwrap().clone();
        overlay.set_online(&a, false).unwrap();
        let b = overlay.resolve("b").unwrap().clone();
        let spec = fetch_spec(&b, &class_id, &overlay).unwrap();
        assert_eq!(spec.access.publisher, a);
    }

    #[test]
    fn discover_soundness_of_returned_records() {
        let mut overlay = Overlay::create(
            &TopologySpec {
                peers: vec![sup("s", &[]), edge("a", "s"), edge("b", "s")],
            },
            0,
        )
        .unwrap();
        publish_on(&mut overlay, "a", &weather_wsdl());
        let b = overlay.resolve("b").unwrap().clone();
        let q = Query::new("q", "weather forecasts")
            .unwrap()
            .with_hop_budget(3);
        for rec in discover(&b, &q, &overlay, 50).unwrap().records {
            assert!(!rec.matched_terms.is_empty());
            assert!(rec.matched_terms.iter().all(|t| q.keywords.contains(t)));
            assert!(rec.hops <= q.hop_budget);
            assert!(rec.class.visible_at(50));
        }
    }
}
