//! Cache snapshot persistence: every peer's advertisement cache written as
//! line-delimited canonical advertisement documents, grouped by peer.
//!
//! Each group is one header line `{"peer":"<hex>","entries":N}` followed by
//! N canonical advertisement lines. Peers appear in id order, entries in
//! adv_id order, so restoring a snapshot and snapshotting again reproduces
//! the bytes exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advert::{deserialize_adv, serialize_adv, Advertisement};
use crate::overlay::{Overlay, PeerId};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot document at line {line}: {message}")]
    MalformedDocument { line: usize, message: String },
    #[error("snapshot names unknown peer {0}")]
    UnknownPeer(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupHeader {
    peer: String,
    entries: usize,
}

/// Renders per-peer advertisement lists in the snapshot format: peers in
/// map order, one header line then the entry lines.
pub fn render_caches(caches: &BTreeMap<PeerId, Vec<Advertisement>>) -> String {
    let mut out = String::new();
    for (peer, advs) in caches {
        let header = GroupHeader {
            peer: peer.as_hex().to_string(),
            entries: advs.len(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for adv in advs {
            out.push_str(
                std::str::from_utf8(&serialize_adv(adv)).expect("canonical docs are utf-8"),
            );
            out.push('\n');
        }
    }
    out
}

/// Renders all peer caches, including the physically-present entries that
/// have expired but not yet been swept. The snapshot is a faithful copy of
/// cache state, not a visibility filter.
pub fn snapshot_string(overlay: &Overlay) -> String {
    let caches: BTreeMap<PeerId, Vec<Advertisement>> = overlay
        .peers()
        .map(|p| (p.id.clone(), p.cache.iter_all().cloned().collect()))
        .collect();
    render_caches(&caches)
}

pub fn write_snapshot(overlay: &Overlay, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, snapshot_string(overlay))?;
    Ok(())
}

/// Parses a snapshot back into per-peer advertisement lists. Errors name
/// the offending line (1-based).
pub fn parse_snapshot(text: &str) -> Result<BTreeMap<PeerId, Vec<Advertisement>>, SnapshotError> {
    let mut out: BTreeMap<PeerId, Vec<Advertisement>> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    while let Some((idx, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let header: GroupHeader =
            serde_json::from_str(line).map_err(|e| SnapshotError::MalformedDocument {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let mut advs = Vec::with_capacity(header.entries);
        for _ in 0..header.entries {
            let Some((adv_idx, adv_line)) = lines.next() else {
                return Err(SnapshotError::MalformedDocument {
                    line: idx + 1,
                    message: format!(
                        "group for peer {} declares {} entries but the file ends early",
                        header.peer, header.entries
                    ),
                });
            };
            let adv = deserialize_adv(adv_line.as_bytes()).map_err(|e| {
                SnapshotError::MalformedDocument {
                    line: adv_idx + 1,
                    message: e.to_string(),
                }
            })?;
            advs.push(adv);
        }
        out.insert(PeerId::from_hex_unchecked(header.peer), advs);
    }
    Ok(out)
}

pub fn read_snapshot(path: &Path) -> Result<BTreeMap<PeerId, Vec<Advertisement>>, SnapshotError> {
    let text = std::fs::read_to_string(path)?;
    parse_snapshot(&text)
}

/// Installs restored caches into an overlay: every cache is cleared first,
/// then the listed entries are put back, so restoring from an empty
/// snapshot empties all caches.
pub fn apply_snapshot(
    overlay: &mut Overlay,
    caches: BTreeMap<PeerId, Vec<Advertisement>>,
) -> Result<(), SnapshotError> {
    for peer in caches.keys() {
        if overlay.peer(peer).is_none() {
            return Err(SnapshotError::UnknownPeer(peer.to_string()));
        }
    }
    let ids: Vec<PeerId> = overlay.peer_ids().cloned().collect();
    for id in ids {
        let entries = caches.get(&id).cloned().unwrap_or_default();
        overlay
            .peer_mut(&id)
            .expect("peer exists")
            .cache
            .install(entries);
    }
    Ok(())
}
