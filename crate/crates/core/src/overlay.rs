//! Simulated P2P overlay: peer identities and roles, rendezvous topology,
//! hop-limited routing with duplicate suppression, endpoint rebinding and
//! seeded churn, all driven by a deterministic tick clock.
//!
//! Edge peers (the mobile hosts and clients) attach to exactly one
//! rendezvous; super peers form a graph among themselves and relay all edge
//! traffic. Relay peers are accepted in the role enum and treated exactly
//! like super peers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advert::{AdvertisementCache, Tick};

/// Default hop budget for broadcast queries (classic flooding TTL).
pub const DEFAULT_HOP_BUDGET: u32 = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OverlayError {
    #[error("topology declares no peers")]
    EmptyTopology,
    #[error("duplicate peer id: {0}")]
    DuplicatePeerId(String),
    #[error("edge peer {edge} names unknown or non-super rendezvous {rendezvous}")]
    DanglingRendezvous { edge: String, rendezvous: String },
    #[error("edge peer {0} declares no rendezvous")]
    MissingRendezvous(String),
    #[error("peer {peer} declares invalid super link to {target}")]
    InvalidLink { peer: String, target: String },
    #[error("peer {0} has an invalid phone number (digit string, edge peers only)")]
    InvalidPhoneNumber(String),
    #[error("source peer is offline")]
    SourceOffline,
    #[error("unknown peer: {0}")]
    UnknownPeer(String),
}

/// Static 128-bit peer identifier, rendered as 32 lowercase hex characters.
/// Immutable for the lifetime of a peer and never reused within a run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeerId(String);

impl PeerId {
    /// Derives the id from the peer's declared name. Distinct names yield
    /// distinct ids; a collision is a simulation-construction error.
    pub fn from_name(name: &str) -> Self {
        PeerId(crate::advert::derive_id("peer", &[name]))
    }

    pub fn as_hex(&self) -> &str {
        &self.0
    }

    /// Wraps an already-rendered hex id, e.g. one read back from a
    /// snapshot. No derivation is performed.
    pub fn from_hex_unchecked(hex: impl Into<String>) -> Self {
        PeerId(hex.into())
    }
}

impl std::fmt::Display for PeerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// An abstract network locator bound to a peer from `valid_from` onward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub address: String,
    pub valid_from: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerRole {
    Edge,
    Super,
    Relay,
}

impl PeerRole {
    /// Relay peers behave exactly like super peers at this abstraction.
    pub fn is_super_like(self) -> bool {
        matches!(self, PeerRole::Super | PeerRole::Relay)
    }
}

/// One overlay participant. The peer id stays fixed across endpoint rebinds;
/// the full endpoint history is kept, last entry current.
#[derive(Debug, Clone)]
pub struct PeerNode {
    pub id: PeerId,
    pub name: String,
    pub phone_number: Option<String>,
    pub role: PeerRole,
    pub endpoints: Vec<Endpoint>,
    pub rendezvous: Option<PeerId>,
    pub online: bool,
    pub cache: AdvertisementCache,
}

impl PeerNode {
    pub fn endpoint(&self) -> &Endpoint {
        self.endpoints.last().expect("peer always has an endpoint")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PublishAdv,
    QueryRequest,
    QueryResponse,
    ServiceInvoke,
    ServiceResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Peer(PeerId),
    Broadcast,
}

/// Kind-specific message body. Routing never inspects it; the pipeline
/// stages do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessagePayload {
    PublishAdv { adv_ids: Vec<String> },
    QueryRequest { query_id: String },
    QueryResponse { query_id: String },
    ServiceInvoke { class_id: String },
    ServiceResult { class_id: String },
}

impl MessagePayload {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessagePayload::PublishAdv { .. } => MessageKind::PublishAdv,
            MessagePayload::QueryRequest { .. } => MessageKind::QueryRequest,
            MessagePayload::QueryResponse { .. } => MessageKind::QueryResponse,
            MessagePayload::ServiceInvoke { .. } => MessageKind::ServiceInvoke,
            MessagePayload::ServiceResult { .. } => MessageKind::ServiceResult,
        }
    }
}

/// A routable overlay message.
#[derive(Debug, Clone)]
pub struct OverlayMessage {
    pub msg_id: u64,
    pub kind: MessageKind,
    pub source: PeerId,
    pub destination: Destination,
    pub hops_remaining: u32,
    pub payload: MessagePayload,
}

impl OverlayMessage {
    pub fn new(
        msg_id: u64,
        source: PeerId,
        destination: Destination,
        hops_remaining: u32,
        payload: MessagePayload,
    ) -> Self {
        Self {
            msg_id,
            kind: payload.kind(),
            source,
            destination,
            hops_remaining,
            payload,
        }
    }
}

/// Message id derived from a stable tag, for the read-only paths that
/// cannot draw from the overlay's counter.
pub fn derive_msg_id(tag: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(tag.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Deterministic tick clock; all randomness in a run derives from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    pub tick: Tick,
    pub seed: u64,
}

/// Declarative description of one peer in a topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerSpec {
    pub name: String,
    pub role: PeerRole,
    #[serde(default)]
    pub address: Option<String>,
    /// Required for edge peers: the name of their super/relay peer.
    #[serde(default)]
    pub rendezvous: Option<String>,
    /// Super-to-super links, by peer name. Symmetric; either side may declare.
    #[serde(default)]
    pub links: Vec<String>,
    #[serde(default)]
    pub phone_number: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub peers: Vec<PeerSpec>,
}

/// Per-tick Bernoulli churn probabilities, applied to edge peers (the
/// mobile nodes; supers and relays stay up unless scripted offline).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChurnSpec {
    pub p_join: f64,
    pub p_leave: f64,
    pub p_rebind: f64,
}

impl Default for ChurnSpec {
    fn default() -> Self {
        Self {
            p_join: 0.0,
            p_leave: 0.0,
            p_rebind: 0.0,
        }
    }
}

impl ChurnSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_join", self.p_join),
            ("p_leave", self.p_leave),
            ("p_rebind", self.p_rebind),
        ] {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.p_join == 0.0 && self.p_leave == 0.0 && self.p_rebind == 0.0
    }
}

/// One entry of a churn event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChurnEvent {
    pub tick: Tick,
    pub event: ChurnEventKind,
    pub peer: PeerId,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChurnEventKind {
    Join,
    Leave,
    Rebind,
}

/// Delivery report of a routed message: which peers received it and when.
/// Sorted by (tick, peer id); each peer appears at most once.
pub type DeliveryReport = Vec<(PeerId, Tick)>;

/// The simulated overlay. Mutated by exactly one driver at a time.
#[derive(Debug, Clone)]
pub struct Overlay {
    clock: SimClock,
    peers: BTreeMap<PeerId, PeerNode>,
    /// Symmetric super-peer adjacency.
    super_links: BTreeMap<PeerId, BTreeSet<PeerId>>,
    /// name -> id, from the topology spec.
    aliases: BTreeMap<String, PeerId>,
    next_msg_id: u64,
}

impl Overlay {
    /// Builds an overlay at tick 0 with all declared peers online,
    /// validating the topology invariants.
    pub fn create(spec: &TopologySpec, seed: u64) -> Result<Self, OverlayError> {
        Self::create_with_capacity(spec, seed, None)
    }

    pub fn create_with_capacity(
        spec: &TopologySpec,
        seed: u64,
        cache_capacity: Option<usize>,
    ) -> Result<Self, OverlayError> {
        if spec.peers.is_empty() {
            return Err(OverlayError::EmptyTopology);
        }
        let mut aliases = BTreeMap::new();
        for p in &spec.peers {
            let id = PeerId::from_name(&p.name);
            if aliases.insert(p.name.clone(), id.clone()).is_some() {
                return Err(OverlayError::DuplicatePeerId(p.name.clone()));
            }
        }
        let role_of = |name: &str| -> Option<PeerRole> {
            spec.peers.iter().find(|p| p.name == name).map(|p| p.role)
        };

        let mut peers = BTreeMap::new();
        let mut super_links: BTreeMap<PeerId, BTreeSet<PeerId>> = BTreeMap::new();
        for p in &spec.peers {
            let id = aliases[&p.name].clone();
            let rendezvous = match (p.role, &p.rendezvous) {
                (PeerRole::Edge, Some(r)) => match role_of(r) {
                    Some(role) if role.is_super_like() => Some(aliases[r].clone()),
                    _ => {
                        return Err(OverlayError::DanglingRendezvous {
                            edge: p.name.clone(),
                            rendezvous: r.clone(),
                        })
                    }
                },
                (PeerRole::Edge, None) => {
                    return Err(OverlayError::MissingRendezvous(p.name.clone()))
                }
                // Supers and relays never attach upward.
                (_, _) => None,
            };
            for target in &p.links {
                if p.role == PeerRole::Edge {
                    return Err(OverlayError::InvalidLink {
                        peer: p.name.clone(),
                        target: target.clone(),
                    });
                }
                match role_of(target) {
                    Some(role) if role.is_super_like() => {
                        let tid = aliases[target].clone();
                        super_links
                            .entry(id.clone())
                            .or_default()
                            .insert(tid.clone());
                        super_links.entry(tid).or_default().insert(id.clone());
                    }
                    _ => {
                        return Err(OverlayError::InvalidLink {
                            peer: p.name.clone(),
                            target: target.clone(),
                        })
                    }
                }
            }
            if let Some(phone) = &p.phone_number {
                // Mobile numbers belong to the handsets, not the fixed
                // infrastructure peers.
                if p.role != PeerRole::Edge
                    || phone.is_empty()
                    || !phone.chars().all(|c| c.is_ascii_digit())
                {
                    return Err(OverlayError::InvalidPhoneNumber(p.name.clone()));
                }
            }
            let address = p
                .address
                .clone()
                .unwrap_or_else(|| format!("sim://{}/0", p.name));
            peers.insert(
                id.clone(),
                PeerNode {
                    id: id.clone(),
                    name: p.name.clone(),
                    phone_number: p.phone_number.clone(),
                    role: p.role,
                    endpoints: vec![Endpoint {
                        address,
                        valid_from: 0,
                    }],
                    rendezvous,
                    online: true,
                    cache: AdvertisementCache::new(id, cache_capacity),
                },
            );
        }
        Ok(Self {
            clock: SimClock { tick: 0, seed },
            peers,
            super_links,
            aliases,
            next_msg_id: 0,
        })
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn now(&self) -> Tick {
        self.clock.tick
    }

    pub fn advance_tick(&mut self) {
        self.clock.tick += 1;
    }

    pub fn next_msg_id(&mut self) -> u64 {
        let id = self.next_msg_id;
        self.next_msg_id += 1;
        id
    }

    pub fn resolve(&self, name: &str) -> Option<&PeerId> {
        self.aliases.get(name)
    }

    /// Dual addressing: a handset can also be addressed by its mobile
    /// phone number. Distinct peers never share a number at creation.
    pub fn resolve_phone(&self, phone_number: &str) -> Option<&PeerId> {
        self.peers
            .values()
            .find(|p| p.phone_number.as_deref() == Some(phone_number))
            .map(|p| &p.id)
    }

    pub fn peer(&self, id: &PeerId) -> Option<&PeerNode> {
        self.peers.get(id)
    }

    pub fn peer_mut(&mut self, id: &PeerId) -> Option<&mut PeerNode> {
        self.peers.get_mut(id)
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerNode> {
        self.peers.values()
    }

    pub fn peer_ids(&self) -> impl Iterator<Item = &PeerId> {
        self.peers.keys()
    }

    pub fn super_neighbors(&self, id: &PeerId) -> impl Iterator<Item = &PeerId> {
        self.super_links.get(id).into_iter().flatten()
    }

    /// Online edge peers attached to the given super peer, in id order.
    pub fn attached_edges(&self, super_id: &PeerId) -> Vec<PeerId> {
        self.peers
            .values()
            .filter(|p| p.online && p.rendezvous.as_ref() == Some(super_id))
            .map(|p| p.id.clone())
            .collect()
    }

    /// Forwarding neighbors of an online peer, in deterministic id order.
    /// Edge traffic always transits the rendezvous; edges never talk to
    /// each other directly.
    fn neighbors(&self, id: &PeerId) -> Vec<PeerId> {
        let Some(node) = self.peers.get(id) else {
            return Vec::new();
        };
        match node.role {
            PeerRole::Edge => node
                .rendezvous
                .iter()
                .filter(|r| self.peers.get(*r).is_some_and(|p| p.online))
                .cloned()
                .collect(),
            _ => {
                let mut out: Vec<PeerId> = self
                    .super_neighbors(id)
                    .filter(|n| self.peers.get(*n).is_some_and(|p| p.online))
                    .cloned()
                    .collect();
                out.extend(self.attached_edges(id));
                out.sort();
                out
            }
        }
    }

    /// Breadth-first reachability from `source` over online peers, bounded
    /// by `budget` forwarding steps. Returns (peer, depth) for every peer
    /// reached, excluding the source; duplicate suppression keeps the first
    /// (lowest-depth) arrival.
    pub fn reachable_within(&self, source: &PeerId, budget: u32) -> Vec<(PeerId, u32)> {
        let mut seen: BTreeSet<PeerId> = BTreeSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(source.clone());
        queue.push_back((source.clone(), 0u32));
        while let Some((peer, depth)) = queue.pop_front() {
            if depth == budget {
                continue;
            }
            for next in self.neighbors(&peer) {
                if seen.insert(next.clone()) {
                    out.push((next.clone(), depth + 1));
                    queue.push_back((next, depth + 1));
                }
            }
        }
        out
    }

    /// Routes a message through the overlay. Each forwarding step (edge to
    /// super, super to super, super to edge) consumes one hop and one tick.
    /// Unicast reports the destination only; broadcast reports every peer
    /// reached within the budget. An unreachable destination yields an
    /// empty report (a partition, not a failure).
    pub fn route(&self, msg: &OverlayMessage) -> Result<DeliveryReport, OverlayError> {
        let source = self
            .peers
            .get(&msg.source)
            .ok_or_else(|| OverlayError::UnknownPeer(msg.source.to_string()))?;
        if !source.online {
            return Err(OverlayError::SourceOffline);
        }
        let now = self.clock.tick;
        let reached = self.reachable_within(&msg.source, msg.hops_remaining);
        let mut report: DeliveryReport = match &msg.destination {
            Destination::Peer(dest) => reached
                .into_iter()
                .filter(|(p, _)| p == dest)
                .map(|(p, d)| (p, now + d as Tick))
                .collect(),
            Destination::Broadcast => reached
                .into_iter()
                .map(|(p, d)| (p, now + d as Tick))
                .collect(),
        };
        report.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(report)
    }

    /// Replaces a peer's endpoint with `valid_from` = current tick. The
    /// peer id is untouched, so routing by id is unaffected.
    pub fn rebind_endpoint(
        &mut self,
        peer: &PeerId,
        new_address: &str,
    ) -> Result<(), OverlayError> {
        let now = self.clock.tick;
        let node = self
            .peers
            .get_mut(peer)
            .ok_or_else(|| OverlayError::UnknownPeer(peer.to_string()))?;
        node.endpoints.push(Endpoint {
            address: new_address.to_string(),
            valid_from: now,
        });
        Ok(())
    }

    pub fn set_online(&mut self, peer: &PeerId, online: bool) -> Result<(), OverlayError> {
        let node = self
            .peers
            .get_mut(peer)
            .ok_or_else(|| OverlayError::UnknownPeer(peer.to_string()))?;
        node.online = online;
        Ok(())
    }

    /// Applies one tick of churn to the edge peers, in peer-id order.
    ///
    /// Exactly two draws are consumed per edge peer per tick (one for the
    /// join/leave toggle, one for rebind) so the random stream stays aligned
    /// regardless of outcomes. A departing peer's cache is left frozen; the
    /// caches of other peers keep its advertisements until expiry.
    pub fn churn_tick(&mut self, spec: &ChurnSpec, rng: &mut ChaCha8Rng) -> Vec<ChurnEvent> {
        let now = self.clock.tick;
        let edges: Vec<PeerId> = self
            .peers
            .values()
            .filter(|p| p.role == PeerRole::Edge)
            .map(|p| p.id.clone())
            .collect();
        let mut events = Vec::new();
        for id in edges {
            let toggle: f64 = rng.gen();
            let rebind: f64 = rng.gen();
            let node = self.peers.get_mut(&id).expect("edge peer exists");
            if node.online {
                if toggle < spec.p_leave {
                    node.online = false;
                    events.push(ChurnEvent {
                        tick: now,
                        event: ChurnEventKind::Leave,
                        peer: id.clone(),
                        detail: String::new(),
                    });
                }
            } else if toggle < spec.p_join {
                node.online = true;
                events.push(ChurnEvent {
                    tick: now,
                    event: ChurnEventKind::Join,
                    peer: id.clone(),
                    detail: String::new(),
                });
            }
            let node = self.peers.get_mut(&id).expect("edge peer exists");
            if node.online && rebind < spec.p_rebind {
                let address = format!("sim://{}/{}", node.name, now + 1);
                node.endpoints.push(Endpoint {
                    address: address.clone(),
                    valid_from: now,
                });
                events.push(ChurnEvent {
                    tick: now,
                    event: ChurnEventKind::Rebind,
                    peer: id.clone(),
                    detail: address,
                });
            }
        }
        events
    }
}

/// Runs `ticks` rounds of churn on a fresh clock segment, advancing the
/// overlay clock once per round. The log is fully determined by
/// (rng seed, spec, topology).
pub fn apply_churn(
    overlay: &mut Overlay,
    spec: &ChurnSpec,
    ticks: Tick,
    rng: &mut ChaCha8Rng,
) -> Vec<ChurnEvent> {
    let mut log = Vec::new();
    for _ in 0..ticks {
        log.extend(overlay.churn_tick(spec, rng));
        overlay.advance_tick();
    }
    log
}
