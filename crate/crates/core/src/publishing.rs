//! Maps a web service description hosted on an edge peer onto the
//! module-class / module-spec / module-impl advertisement triple, tags it
//! with category peer groups, and keeps it alive through periodic
//! republishing.
//!
//! The class advertises that a behavior exists (its name and description are
//! the searchable fields), the spec carries everything needed to access the
//! service including the full WSDL stub, and each impl names an installable
//! client package for one platform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advert::{derive_id, AdvBody, AdvertError, Advertisement, PeerGroupId, Tick};
use crate::overlay::{Destination, MessagePayload, Overlay, OverlayMessage, PeerId, PeerRole};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PublishError {
    #[error("host peer is offline")]
    HostOffline,
    #[error("unknown peer group: {0}")]
    UnknownPeerGroup(String),
    #[error("invalid wsdl: {0}")]
    InvalidWsdl(String),
    #[error("host peer must be an edge peer")]
    HostNotEdge,
    #[error("unknown host peer: {0}")]
    UnknownHost(String),
    #[error("inconsistent class/spec/impl batch: {0}")]
    InconsistentBatch(String),
    #[error(transparent)]
    Cache(#[from] AdvertError),
}

/// One operation of a service description: a name plus the input and output
/// concept terms of its message parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WsdlOperation {
    pub name: String,
    #[serde(default)]
    pub input_parts: Vec<String>,
    #[serde(default)]
    pub output_parts: Vec<String>,
}

/// Structural stub of a service description. Not real WSDL XML; the scenario
/// importer maps structured records onto this shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WsdlDescriptor {
    pub service_name: String,
    pub description: String,
    pub operations: Vec<WsdlOperation>,
    pub binding_path: String,
    /// Reference to the publisher's context source (resolved against the
    /// scenario's context_sources table).
    #[serde(default)]
    pub context_source_ref: Option<String>,
}

impl WsdlDescriptor {
    /// Structural invariants: non-empty service name, at least one operation.
    /// Concept-vocabulary membership is checked against the ontology at
    /// scenario load.
    pub fn validate(&self) -> Result<(), PublishError> {
        if self.service_name.is_empty() {
            return Err(PublishError::InvalidWsdl("service_name is empty".into()));
        }
        if self.operations.is_empty() {
            return Err(PublishError::InvalidWsdl(
                "at least one operation required".into(),
            ));
        }
        Ok(())
    }

    /// All concept terms used by the operations' message parts.
    pub fn concept_terms(&self) -> impl Iterator<Item = &String> {
        self.operations
            .iter()
            .flat_map(|op| op.input_parts.iter().chain(op.output_parts.iter()))
    }

    /// The text searched by WSDL-level discovery and indexed by the
    /// post-filter: service name, description, operation names and concept
    /// terms. The binding path is access detail, not searchable text.
    pub fn search_text(&self) -> String {
        let mut parts: Vec<&str> = vec![&self.service_name, &self.description];
        for op in &self.operations {
            parts.push(&op.name);
            for term in op.input_parts.iter().chain(op.output_parts.iter()) {
                parts.push(term);
            }
        }
        parts.join(" ")
    }
}

/// Advertises the existence of a behavior. `name` and `description` are
/// exactly the fields basic discovery searches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleClassBody {
    pub class_id: String,
    pub name: String,
    pub description: String,
    /// Flat key/value pairs lifted from the WSDL (service name, operation
    /// names) as extra parameters.
    pub wsdl_extras: Vec<(String, String)>,
}

/// Everything needed to access or invoke the module, including the full
/// WSDL stub.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpecBody {
    pub spec_id: String,
    pub class_id: String,
    pub version: String,
    pub access: ModuleAccess,
    pub wsdl: WsdlDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleAccess {
    pub publisher: PeerId,
    pub binding_path: String,
}

/// A platform-specific implementation of a spec: an installable client
/// application named by an opaque package reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleImplBody {
    pub spec_id: String,
    pub platform: String,
    pub package_ref: String,
}

/// One republish action performed by [`auto_republish`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepublishAction {
    pub adv_id: String,
    pub tick: Tick,
    pub forwarded_to_rendezvous: bool,
}

/// Builds the class/spec/impl advertisement batch for a service, without
/// touching any cache. Ids are derived from (publisher, service name,
/// version) so republishing the same resource keeps its adv_ids.
pub fn build_service_batch(
    publisher: &PeerId,
    wsdl: &WsdlDescriptor,
    version: &str,
    groups: &[PeerGroupId],
    platforms: &[String],
    now: Tick,
    lifetime: Tick,
) -> Result<Vec<Advertisement>, PublishError> {
    wsdl.validate()?;
    let class_id = derive_id(
        "module-class",
        &[publisher.as_hex(), &wsdl.service_name, version],
    );
    let spec_id = derive_id(
        "module-spec",
        &[publisher.as_hex(), &wsdl.service_name, version],
    );
    let group_tags = groups.to_vec();

    let mut wsdl_extras = vec![("service_name".to_string(), wsdl.service_name.clone())];
    for op in &wsdl.operations {
        wsdl_extras.push(("operation".to_string(), op.name.clone()));
    }

    let mut batch = vec![
        Advertisement::new(
            class_id.clone(),
            publisher.clone(),
            group_tags.clone(),
            now,
            lifetime,
            AdvBody::ModuleClass(ModuleClassBody {
                class_id: class_id.clone(),
                name: wsdl.service_name.clone(),
                description: wsdl.description.clone(),
                wsdl_extras,
            }),
        ),
        Advertisement::new(
            spec_id.clone(),
            publisher.clone(),
            group_tags.clone(),
            now,
            lifetime,
            AdvBody::ModuleSpec(ModuleSpecBody {
                spec_id: spec_id.clone(),
                class_id: class_id.clone(),
                version: version.to_string(),
                access: ModuleAccess {
                    publisher: publisher.clone(),
                    binding_path: wsdl.binding_path.clone(),
                },
                wsdl: wsdl.clone(),
            }),
        ),
    ];
    for platform in platforms {
        let impl_id = derive_id(
            "module-impl",
            &[publisher.as_hex(), &wsdl.service_name, version, platform],
        );
        batch.push(Advertisement::new(
            impl_id,
            publisher.clone(),
            group_tags.clone(),
            now,
            lifetime,
            AdvBody::ModuleImpl(ModuleImplBody {
                spec_id: spec_id.clone(),
                platform: platform.clone(),
                package_ref: format!("pkg://{}/{}-{}", platform, wsdl.service_name, version),
            }),
        ));
    }
    Ok(batch)
}

/// Publishes a service hosted on an edge peer: inserts the class/spec/impl
/// triple into the host's cache and forwards it (one PublishAdv message) to
/// the host's rendezvous, which caches copies with the publisher's
/// published_at and lifetime unchanged. Returns the batch and whether the
/// forward was delivered.
pub fn publish_service(
    overlay: &mut Overlay,
    host: &PeerId,
    wsdl: &WsdlDescriptor,
    version: &str,
    groups: &[PeerGroupId],
    platforms: &[String],
    now: Tick,
    lifetime: Tick,
    known_groups: &dyn Fn(&PeerGroupId) -> bool,
) -> Result<PublishedService, PublishError> {
    let node = overlay
        .peer(host)
        .ok_or_else(|| PublishError::UnknownHost(host.to_string()))?;
    if node.role != PeerRole::Edge {
        return Err(PublishError::HostNotEdge);
    }
    if !node.online {
        return Err(PublishError::HostOffline);
    }
    for g in groups {
        if !known_groups(g) {
            return Err(PublishError::UnknownPeerGroup(g.to_string()));
        }
    }
    let rendezvous = node.rendezvous.clone();
    let batch = build_service_batch(host, wsdl, version, groups, platforms, now, lifetime)?;

    let host_node = overlay.peer_mut(host).expect("host exists");
    for adv in &batch {
        host_node.cache.publish(adv.clone(), now)?;
    }
    let mut forwarded = false;
    if let Some(rdv) = rendezvous {
        // One PublishAdv message carries the whole batch one hop up. An
        // unreachable rendezvous simply drops the forward; the local copies
        // stay.
        let message = OverlayMessage::new(
            overlay.next_msg_id(),
            host.clone(),
            Destination::Peer(rdv.clone()),
            1,
            MessagePayload::PublishAdv {
                adv_ids: batch.iter().map(|a| a.adv_id.clone()).collect(),
            },
        );
        if !overlay
            .route(&message)
            .expect("host checked online")
            .is_empty()
        {
            let rdv_node = overlay.peer_mut(&rdv).expect("rendezvous exists");
            for adv in &batch {
                rdv_node.cache.publish(adv.clone(), now)?;
            }
            forwarded = true;
        }
    }
    Ok(PublishedService { batch, forwarded })
}

/// Result of [`publish_service`]: the advertisement triple plus whether the
/// PublishAdv forward reached the rendezvous.
#[derive(Debug, Clone)]
pub struct PublishedService {
    pub batch: Vec<Advertisement>,
    pub forwarded: bool,
}

/// Returns the ids of the host's own service advertisements (module kinds
/// published by the host itself), in adv_id order.
pub fn own_service_adv_ids(overlay: &Overlay, host: &PeerId) -> Vec<String> {
    overlay
        .peer(host)
        .map(|node| {
            node.cache
                .iter_all()
                .filter(|a| {
                    &a.publisher == host
                        && matches!(
                            a.body,
                            AdvBody::ModuleClass(_)
                                | AdvBody::ModuleSpec(_)
                                | AdvBody::ModuleImpl(_)
                        )
                })
                .map(|a| a.adv_id.clone())
                .collect()
        })
        .unwrap_or_default()
}

/// At every tick that is a multiple of `period` while the host is online,
/// republishes all of the host's own service advertisements locally and
/// re-forwards them to the rendezvous (one PublishAdv message). An offline
/// host performs no actions. `period` must be positive; scenario loading
/// rejects zero before a run ever starts.
pub fn auto_republish(
    overlay: &mut Overlay,
    host: &PeerId,
    period: Tick,
    now: Tick,
) -> Vec<RepublishAction> {
    assert!(period > 0, "republish period must be positive");
    if now % period != 0 {
        return Vec::new();
    }
    let Some(node) = overlay.peer(host) else {
        return Vec::new();
    };
    if !node.online {
        return Vec::new();
    }
    let rendezvous = node.rendezvous.clone();
    let rdv_online = rendezvous
        .as_ref()
        .is_some_and(|r| overlay.peer(r).is_some_and(|p| p.online));
    let ids = own_service_adv_ids(overlay, host);
    let mut actions = Vec::new();
    for adv_id in ids {
        let host_node = overlay.peer_mut(host).expect("host exists");
        host_node
            .cache
            .republish(&adv_id, now, None)
            .expect("own advertisement present");
        let refreshed = host_node
            .cache
            .get(&adv_id)
            .expect("just republished")
            .clone();
        let mut forwarded = false;
        if rdv_online {
            let rdv = rendezvous.as_ref().expect("rendezvous checked online");
            let rdv_node = overlay.peer_mut(rdv).expect("rendezvous exists");
            rdv_node
                .cache
                .publish(refreshed, now)
                .expect("forwarded advertisement has positive lifetime");
            forwarded = true;
        }
        actions.push(RepublishAction {
            adv_id,
            tick: now,
            forwarded_to_rendezvous: forwarded,
        });
    }
    actions
}

/// Tags every advertisement of a consistent class/spec/impl batch with the
/// given group. Queries filtered by that group then match the batch.
pub fn categorize(batch: &mut [Advertisement], group: &PeerGroupId) -> Result<(), PublishError> {
    check_batch_consistency(batch)?;
    for adv in batch.iter_mut() {
        if !adv.has_group(group) {
            adv.groups.push(group.clone());
            adv.groups.sort();
        }
    }
    Ok(())
}

/// A batch is consistent when every spec references a class in the batch and
/// every impl references a spec in the batch.
pub fn check_batch_consistency(batch: &[Advertisement]) -> Result<(), PublishError> {
    let class_ids: Vec<&str> = batch
        .iter()
        .filter_map(|a| match &a.body {
            AdvBody::ModuleClass(c) => Some(c.class_id.as_str()),
            _ => None,
        })
        .collect();
    let spec_ids: Vec<&str> = batch
        .iter()
        .filter_map(|a| match &a.body {
            AdvBody::ModuleSpec(s) => Some(s.spec_id.as_str()),
            _ => None,
        })
        .collect();
    for adv in batch {
        match &adv.body {
            AdvBody::ModuleSpec(s) if !class_ids.contains(&s.class_id.as_str()) => {
                return Err(PublishError::InconsistentBatch(format!(
                    "spec {} references class {} outside the batch",
                    s.spec_id, s.class_id
                )));
            }
            AdvBody::ModuleImpl(i) if !spec_ids.contains(&i.spec_id.as_str()) => {
                return Err(PublishError::InconsistentBatch(format!(
                    "impl for platform {} references spec {} outside the batch",
                    i.platform, i.spec_id
                )));
            }
            _ => {}
        }
    }
    Ok(())
}
