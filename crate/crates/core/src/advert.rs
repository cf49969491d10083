//! Advertisements with lifetimes, per-peer caches and canonical serialization.
//!
//! An advertisement is visible strictly before `published_at + lifetime` and
//! invisible at or after it. Expiry needs no coordination: sweeping is a pure
//! function of (cache, now). Republishing the same resource keeps its adv_id
//! and moves `published_at` forward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::overlay::PeerId;
use crate::publishing::{ModuleClassBody, ModuleImplBody, ModuleSpecBody};

/// Simulation time, in ticks.
pub type Tick = u64;

/// Default advertisement lifetime in ticks, scenario-configurable.
pub const DEFAULT_LIFETIME: Tick = 500;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdvertError {
    #[error("advertisement lifetime must be positive")]
    NonPositiveLifetime,
    #[error("unknown advertisement: {0}")]
    UnknownAdvertisement(String),
    #[error("malformed advertisement document: {0}")]
    MalformedDocument(String),
}

/// Identifier of a peer group (the category container playing the role of
/// UDDI's tModel classification).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeerGroupId(pub String);

impl std::fmt::Display for PeerGroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A category container for advertisements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerGroup {
    pub id: PeerGroupId,
    pub name: String,
    /// Ordered category labels, e.g. ["travel", "weather"]. Non-empty,
    /// lowercase, no embedded separators.
    pub category_path: Vec<String>,
}

impl PeerGroup {
    pub fn validate(&self) -> Result<(), String> {
        if self.category_path.is_empty() {
            return Err(format!("peer group {} has an empty category path", self.id));
        }
        for label in &self.category_path {
            if label.is_empty()
                || label
                    .chars()
                    .any(|c| c.is_uppercase() || c.is_whitespace() || c == '/')
            {
                return Err(format!(
                    "peer group {} category label {label:?} must be lowercase without separators",
                    self.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvKind {
    Peer,
    PeerGroup,
    ModuleClass,
    ModuleSpec,
    ModuleImpl,
}

/// Kind-specific payload. The serialized form carries the kind tag as the
/// first field of the body object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdvBody {
    Peer { name: String, address: String },
    PeerGroup { group: PeerGroup },
    ModuleClass(ModuleClassBody),
    ModuleSpec(ModuleSpecBody),
    ModuleImpl(ModuleImplBody),
}

impl AdvBody {
    pub fn kind(&self) -> AdvKind {
        match self {
            AdvBody::Peer { .. } => AdvKind::Peer,
            AdvBody::PeerGroup { .. } => AdvKind::PeerGroup,
            AdvBody::ModuleClass(_) => AdvKind::ModuleClass,
            AdvBody::ModuleSpec(_) => AdvKind::ModuleSpec,
            AdvBody::ModuleImpl(_) => AdvKind::ModuleImpl,
        }
    }
}

/// A lifetime-bounded metadata record: the unit of publication and caching.
///
/// Serialized field order is fixed by struct declaration order; see
/// `docs/formats.md` for the canonical document layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Advertisement {
    /// Stable across republishes of the same resource.
    pub adv_id: String,
    pub publisher: PeerId,
    /// Peer-group tags, kept sorted and deduplicated.
    pub groups: Vec<PeerGroupId>,
    pub published_at: Tick,
    pub lifetime: Tick,
    pub body: AdvBody,
}

impl Advertisement {
    pub fn new(
        adv_id: impl Into<String>,
        publisher: PeerId,
        mut groups: Vec<PeerGroupId>,
        published_at: Tick,
        lifetime: Tick,
        body: AdvBody,
    ) -> Self {
        groups.sort();
        groups.dedup();
        Self {
            adv_id: adv_id.into(),
            publisher,
            groups,
            published_at,
            lifetime,
            body,
        }
    }

    pub fn kind(&self) -> AdvKind {
        self.body.kind()
    }

    pub fn expiry(&self) -> Tick {
        self.published_at.saturating_add(self.lifetime)
    }

    /// Visible strictly before expiry, invisible at or after it.
    pub fn visible_at(&self, now: Tick) -> bool {
        self.published_at <= now && now < self.expiry()
    }

    pub fn has_group(&self, group: &PeerGroupId) -> bool {
        self.groups.binary_search(group).is_ok()
    }
}

/// Canonical byte serialization: fixed field order, no insignificant
/// whitespace. Equal advertisements serialize to equal bytes.
pub fn serialize_adv(adv: &Advertisement) -> Vec<u8> {
    serde_json::to_vec(adv).expect("advertisement serialization cannot fail")
}

/// Inverse of [`serialize_adv`]. Strict: missing or unknown fields are a
/// [`AdvertError::MalformedDocument`].
pub fn deserialize_adv(bytes: &[u8]) -> Result<Advertisement, AdvertError> {
    serde_json::from_slice(bytes).map_err(|e| AdvertError::MalformedDocument(e.to_string()))
}

/// Per-peer store of advertisements, keyed by adv_id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvertisementCache {
    owner: PeerId,
    capacity: Option<usize>,
    entries: BTreeMap<String, Advertisement>,
}

impl AdvertisementCache {
    pub fn new(owner: PeerId, capacity: Option<usize>) -> Self {
        Self {
            owner,
            capacity,
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &PeerId {
        &self.owner
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts (or replaces, for the same adv_id) with `published_at = now`.
    /// On capacity overflow the entry with the earliest expiry tick is
    /// evicted after insertion, ties broken by smaller adv_id; the fresh
    /// entry itself may lose.
    pub fn publish(&mut self, mut adv: Advertisement, now: Tick) -> Result<(), AdvertError> {
        if adv.lifetime == 0 {
            return Err(AdvertError::NonPositiveLifetime);
        }
        adv.published_at = now;
        self.entries.insert(adv.adv_id.clone(), adv);
        if let Some(cap) = self.capacity {
            while self.entries.len() > cap {
                let evictee = self
                    .entries
                    .values()
                    .min_by_key(|a| (a.expiry(), a.adv_id.clone()))
                    .map(|a| a.adv_id.clone())
                    .expect("non-empty cache over capacity");
                self.entries.remove(&evictee);
            }
        }
        Ok(())
    }

    /// Moves `published_at` to `now`, optionally replacing the lifetime.
    pub fn republish(
        &mut self,
        adv_id: &str,
        now: Tick,
        new_lifetime: Option<Tick>,
    ) -> Result<(), AdvertError> {
        if new_lifetime == Some(0) {
            return Err(AdvertError::NonPositiveLifetime);
        }
        let adv = self
            .entries
            .get_mut(adv_id)
            .ok_or_else(|| AdvertError::UnknownAdvertisement(adv_id.to_string()))?;
        adv.published_at = now;
        if let Some(lt) = new_lifetime {
            adv.lifetime = lt;
        }
        Ok(())
    }

    /// Removes exactly the entries with expiry <= now; returns their ids
    /// sorted ascending.
    pub fn expire_sweep(&mut self, now: Tick) -> Vec<String> {
        let expired: Vec<String> = self
            .entries
            .values()
            .filter(|a| a.expiry() <= now)
            .map(|a| a.adv_id.clone())
            .collect();
        for id in &expired {
            self.entries.remove(id);
        }
        expired
    }

    /// Time-filtered lookup: entries past their expiry are invisible even
    /// before a sweep physically removes them.
    pub fn lookup(&self, adv_id: &str, now: Tick) -> Option<&Advertisement> {
        self.entries.get(adv_id).filter(|a| a.visible_at(now))
    }

    /// Raw lookup ignoring visibility; used by republish bookkeeping.
    pub fn get(&self, adv_id: &str) -> Option<&Advertisement> {
        self.entries.get(adv_id)
    }

    pub fn contains(&self, adv_id: &str) -> bool {
        self.entries.contains_key(adv_id)
    }

    /// All entries visible at `now`, in adv_id order.
    pub fn iter_visible(&self, now: Tick) -> impl Iterator<Item = &Advertisement> {
        self.entries.values().filter(move |a| a.visible_at(now))
    }

    /// All physically present entries, in adv_id order.
    pub fn iter_all(&self) -> impl Iterator<Item = &Advertisement> {
        self.entries.values()
    }

    /// Replaces the whole entry set; used by snapshot restore.
    pub fn install(&mut self, advs: Vec<Advertisement>) {
        self.entries = advs.into_iter().map(|a| (a.adv_id.clone(), a)).collect();
    }
}

/// Deterministic 128-bit identifier rendered as 32 lowercase hex chars,
/// derived from a domain label and the identifying components.
pub fn derive_id(domain: &str, parts: &[&str]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    hex::encode(&hasher.finalize()[..16])
}
