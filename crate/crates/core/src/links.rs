//! Undirected links between anchors, the stored metadata of source anchors,
//! and integrity checks against a project scan.
//!
//! `links.json` layout:
//!
//! ```json
//! {
//!   "version": 1,
//!   "links": [{"a": "<anchor>", "b": "<anchor>", "created": "<rfc3339>"}],
//!   "records": [{"anchor": "<anchor>", "project": "...", "path": "src/A.java",
//!                "referent_kind": "method", "artifact_path": "p.A.run",
//!                "modified": "<rfc3339>"}]
//! }
//! ```
//!
//! Within a link `a < b` in anchor order. Both arrays are sorted.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchor::{AnchorId, AnchorKind};
use crate::scanner::{ProjectIndex, ReferentKind};
use crate::sketch::{SketchCatalog, SketchPeer};

pub const LINKS_FILE: &str = "links.json";
pub const LINKS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("cannot link {0} to itself")]
    SelfLink(AnchorId),
    #[error("links between two {} anchors are not allowed", .0.as_str())]
    ForbiddenKindPair(AnchorKind),
    #[error("unknown anchor {0}")]
    UnknownAnchor(AnchorId),
    #[error("{0} is not a source code anchor")]
    NotSourceAnchor(AnchorId),
    #[error("unsupported links.json version {0}")]
    UnsupportedVersion(u32),
    #[error("links.json is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub a: AnchorId,
    pub b: AnchorId,
    #[serde(with = "rfc3339")]
    pub created: DateTime<Utc>,
}

impl Link {
    pub fn key(&self) -> (AnchorId, AnchorId) {
        (self.a, self.b)
    }

    pub fn touches(&self, anchor: &AnchorId) -> bool {
        self.a == *anchor || self.b == *anchor
    }

    /// The other end, when `anchor` is one end.
    pub fn peer(&self, anchor: &AnchorId) -> Option<AnchorId> {
        if self.a == *anchor {
            Some(self.b)
        } else if self.b == *anchor {
            Some(self.a)
        } else {
            None
        }
    }

    /// The source-code end, if any.
    pub fn source_end(&self) -> Option<AnchorId> {
        [self.a, self.b].into_iter().find(|x| x.kind() == AnchorKind::SourceCode)
    }
}

/// Orders the pair and checks the kind rules.
pub fn normalize_pair(a: AnchorId, b: AnchorId) -> Result<(AnchorId, AnchorId), LinkError> {
    if a == b {
        return Err(LinkError::SelfLink(a));
    }
    if a.kind() == AnchorKind::SourceCode && b.kind() == AnchorKind::SourceCode {
        return Err(LinkError::ForbiddenKindPair(AnchorKind::SourceCode));
    }
    Ok(if a < b { (a, b) } else { (b, a) })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceAnchorRecord {
    pub anchor: AnchorId,
    pub project: String,
    pub path: String,
    pub referent_kind: ReferentKind,
    pub artifact_path: String,
    #[serde(with = "rfc3339")]
    pub modified: DateTime<Utc>,
}

impl SourceAnchorRecord {
    /// Builds the record for `anchor` from a scan, if the scan contains it.
    pub fn from_index(index: &ProjectIndex, anchor: &AnchorId, now: DateTime<Utc>) -> Option<Self> {
        let (file, hit) = index.find(anchor)?;
        Some(SourceAnchorRecord {
            anchor: *anchor,
            project: index.project_name.clone(),
            path: file.path.clone(),
            referent_kind: hit.referent.kind,
            artifact_path: hit.referent.artifact_path.clone(),
            modified: now,
        })
    }

    fn same_location(&self, other: &SourceAnchorRecord) -> bool {
        self.project == other.project
            && self.path == other.path
            && self.referent_kind == other.referent_kind
            && self.artifact_path == other.artifact_path
    }
}

/// Existence oracle used by `create_link`.
pub trait AnchorLookup {
    fn exists(&self, anchor: &AnchorId) -> bool;
}

impl<F: Fn(&AnchorId) -> bool> AnchorLookup for F {
    fn exists(&self, anchor: &AnchorId) -> bool {
        self(anchor)
    }
}

impl AnchorLookup for SketchCatalog {
    fn exists(&self, anchor: &AnchorId) -> bool {
        self.contains(anchor)
    }
}

impl AnchorLookup for ProjectIndex {
    fn exists(&self, anchor: &AnchorId) -> bool {
        self.contains(anchor)
    }
}

/// One entry of `links_of`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkView {
    pub link: Link,
    pub peer: AnchorId,
    pub peer_kind: AnchorKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<SourceAnchorRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sketch: Option<SketchPeer>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkStore {
    links: BTreeMap<(AnchorId, AnchorId), Link>,
    adjacency: BTreeMap<AnchorId, BTreeSet<AnchorId>>,
    records: BTreeMap<AnchorId, SourceAnchorRecord>,
}

#[derive(Serialize, Deserialize)]
struct LinksFile {
    version: u32,
    links: Vec<Link>,
    records: Vec<SourceAnchorRecord>,
}

impl LinkStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn records(&self) -> impl Iterator<Item = &SourceAnchorRecord> {
        self.records.values()
    }

    pub fn record(&self, anchor: &AnchorId) -> Option<&SourceAnchorRecord> {
        self.records.get(anchor)
    }

    pub fn get(&self, a: AnchorId, b: AnchorId) -> Option<&Link> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.links.get(&key)
    }

    pub fn has_links(&self, anchor: &AnchorId) -> bool {
        self.adjacency.get(anchor).is_some_and(|s| !s.is_empty())
    }

    /// Creates the link or returns the existing one. The flag is true when
    /// the store changed. Source anchors are known if they have a record or
    /// `lookup` knows them; other anchors must be known to `lookup`.
    pub fn create_link(
        &mut self,
        a: AnchorId,
        b: AnchorId,
        lookup: &dyn AnchorLookup,
        now: DateTime<Utc>,
    ) -> Result<(Link, bool), LinkError> {
        let key = normalize_pair(a, b)?;
        if let Some(existing) = self.links.get(&key) {
            return Ok((*existing, false));
        }
        for end in [key.0, key.1] {
            let known = (end.kind() == AnchorKind::SourceCode && self.records.contains_key(&end)) || lookup.exists(&end);
            if !known {
                return Err(LinkError::UnknownAnchor(end));
            }
        }
        let link = Link {
            a: key.0,
            b: key.1,
            created: now,
        };
        self.insert(link);
        Ok((link, true))
    }

    fn insert(&mut self, link: Link) {
        self.links.insert(link.key(), link);
        self.adjacency.entry(link.a).or_default().insert(link.b);
        self.adjacency.entry(link.b).or_default().insert(link.a);
    }

    pub fn remove_link(&mut self, a: AnchorId, b: AnchorId) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        if self.links.remove(&key).is_none() {
            return false;
        }
        for (x, y) in [(key.0, key.1), (key.1, key.0)] {
            if let Some(set) = self.adjacency.get_mut(&x) {
                set.remove(&y);
                if set.is_empty() {
                    self.adjacency.remove(&x);
                }
            }
        }
        true
    }

    /// Links touching `anchor`, newest first.
    pub fn raw_links_of(&self, anchor: &AnchorId) -> Vec<Link> {
        let mut out: Vec<Link> = self
            .adjacency
            .get(anchor)
            .into_iter()
            .flatten()
            .filter_map(|peer| self.get(*anchor, *peer).copied())
            .collect();
        out.sort_by(|x, y| y.created.cmp(&x.created).then(x.key().cmp(&y.key())));
        out
    }

    /// Links touching `anchor`, newest first, with peer metadata.
    pub fn links_of(&self, anchor: &AnchorId, catalog: Option<&SketchCatalog>) -> Vec<LinkView> {
        self.raw_links_of(anchor)
            .into_iter()
            .map(|link| {
                let peer = link.peer(anchor).expect("adjacent link touches anchor");
                LinkView {
                    link,
                    peer,
                    peer_kind: peer.kind(),
                    source: self.records.get(&peer).cloned(),
                    sketch: catalog.and_then(|c| c.peer(&peer)),
                }
            })
            .collect()
    }

    /// Upserts a record; `modified` is taken from the record.
    pub fn record_source_anchor(&mut self, record: SourceAnchorRecord) -> Result<(), LinkError> {
        if record.anchor.kind() != AnchorKind::SourceCode {
            return Err(LinkError::NotSourceAnchor(record.anchor));
        }
        self.records.insert(record.anchor, record);
        Ok(())
    }

    pub fn remove_record(&mut self, anchor: &AnchorId) -> bool {
        self.records.remove(anchor).is_some()
    }

    /// Rewrites the records of `index.project_name` whose location changed.
    /// Records of anchors missing from the scan are kept. Returns the number
    /// of updated records.
    pub fn refresh_records(&mut self, index: &ProjectIndex, now: DateTime<Utc>) -> usize {
        let mut changed = 0;
        for record in self.records.values_mut() {
            if record.project != index.project_name {
                continue;
            }
            if let Some(fresh) = SourceAnchorRecord::from_index(index, &record.anchor, now) {
                if !fresh.same_location(record) {
                    *record = fresh;
                    changed += 1;
                }
            }
        }
        changed
    }

    pub fn to_json(&self) -> String {
        let file = LinksFile {
            version: LINKS_VERSION,
            links: self.links.values().copied().collect(),
            records: self.records.values().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("links serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LinkError> {
        let file: LinksFile = serde_json::from_str(text).map_err(|e| LinkError::Corrupt(e.to_string()))?;
        if file.version != LINKS_VERSION {
            return Err(LinkError::UnsupportedVersion(file.version));
        }
        let mut store = LinkStore::new();
        for link in file.links {
            let (a, b) = normalize_pair(link.a, link.b).map_err(|e| LinkError::Corrupt(e.to_string()))?;
            store.insert(Link { a, b, created: link.created });
        }
        for record in file.records {
            store
                .record_source_anchor(record)
                .map_err(|e| LinkError::Corrupt(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn path_in(data_dir: &Path) -> PathBuf {
        data_dir.join(LINKS_FILE)
    }

    /// Writes `<data_dir>/links.json` atomically.
    pub fn save(&self, data_dir: &Path) -> Result<(), LinkError> {
        crate::sketch::write_atomically(&Self::path_in(data_dir), self.to_json().as_bytes())?;
        Ok(())
    }

    /// Loads `<data_dir>/links.json`; a missing file is an empty store.
    pub fn load(data_dir: &Path) -> Result<Self, LinkError> {
        match fs::read_to_string(Self::path_in(data_dir)) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }
}

/// A link with an end that no longer exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingLink {
    pub link: Link,
    pub missing: AnchorId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrphanAnchor {
    pub anchor: AnchorId,
    pub path: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaleRecord {
    pub recorded: SourceAnchorRecord,
    pub path: String,
    pub referent_kind: ReferentKind,
    pub artifact_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub dangling_source: Vec<DanglingLink>,
    pub dangling_sketch: Vec<DanglingLink>,
    pub orphan_anchors: Vec<OrphanAnchor>,
    pub stale_records: Vec<StaleRecord>,
}

impl IntegrityReport {
    pub fn is_empty(&self) -> bool {
        self.dangling_source.is_empty()
            && self.dangling_sketch.is_empty()
            && self.orphan_anchors.is_empty()
            && self.stale_records.is_empty()
    }

    pub fn finding_count(&self) -> usize {
        self.dangling_source.len() + self.dangling_sketch.len() + self.orphan_anchors.len() + self.stale_records.len()
    }
}

/// Checks the store against one project's scan and the sketch repository.
///
/// Source ends recorded for another project are not judged against this
/// scan. A record whose anchor is absent from the scan is not stale; if it is
/// linked it shows up as a dangling source end instead.
pub fn verify(store: &LinkStore, index: &ProjectIndex, catalog: &SketchCatalog) -> IntegrityReport {
    let mut report = IntegrityReport::default();
    let foreign = |anchor: &AnchorId| {
        store
            .record(anchor)
            .is_some_and(|r| r.project != index.project_name)
    };
    for link in store.links() {
        for end in [link.a, link.b] {
            match end.kind() {
                AnchorKind::SourceCode => {
                    if !foreign(&end) && !index.contains(&end) {
                        report.dangling_source.push(DanglingLink { link: *link, missing: end });
                    }
                }
                AnchorKind::Sketch | AnchorKind::Marker => {
                    if !catalog.contains(&end) {
                        report.dangling_sketch.push(DanglingLink { link: *link, missing: end });
                    }
                }
            }
        }
    }
    for (file, hit) in index.anchors() {
        let anchor = hit.occurrence.anchor;
        if !store.has_links(&anchor) {
            report.orphan_anchors.push(OrphanAnchor {
                anchor,
                path: file.path.clone(),
                line: hit.occurrence.tag_line,
            });
        }
    }
    for record in store.records() {
        if record.project != index.project_name {
            continue;
        }
        if let Some(current) = SourceAnchorRecord::from_index(index, &record.anchor, record.modified) {
            if !current.same_location(record) {
                report.stale_records.push(StaleRecord {
                    recorded: record.clone(),
                    path: current.path,
                    referent_kind: current.referent_kind,
                    artifact_path: current.artifact_path,
                });
            }
        }
    }
    report
}

mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(super::SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}
