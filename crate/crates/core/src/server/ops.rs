use std::collections::HashSet;
use std::path::{Component, Path};
use std::sync::Arc;

use base64::Engine;
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::{ServerState, SessionId, Snapshot};
use crate::anchor::{AnchorId, AnchorKind};
use crate::links::{verify, LinkError, SourceAnchorRecord};
use crate::protocol::*;
use crate::scanner::{index_file, ProjectIndex};
use crate::sketch::{create_sketch, SketchError, SketchMeta, SketchSummary};

pub(crate) fn sketch_err(e: SketchError) -> ProtocolError {
    let detail = match &e {
        SketchError::NotFound(_) | SketchError::MarkerNotFound(_) | SketchError::TargetNotFound(_) => {
            return ProtocolError::new(ErrorCode::NotFound, e.to_string())
        }
        SketchError::Io(_) => return ProtocolError::new(ErrorCode::Internal, e.to_string()),
        SketchError::UnsupportedFormat(_) => "unsupported_format",
        SketchError::CorruptImage(_) => "corrupt_image",
        SketchError::InvalidRect(_) => "invalid_rect",
        SketchError::InvalidText => "invalid_text",
        SketchError::WrongKind(_) => "wrong_kind",
        SketchError::MalformedSvg(_)
        | SketchError::MissingSketchAnchor
        | SketchError::BadSketchAnchor(_)
        | SketchError::BadMarkerId(_) => "malformed_svg",
    };
    ProtocolError::validation(detail, e.to_string())
}

pub(crate) fn link_err(e: LinkError) -> ProtocolError {
    let detail = match &e {
        LinkError::UnknownAnchor(_) => return ProtocolError::new(ErrorCode::UnknownAnchor, e.to_string()),
        LinkError::Io(_) | LinkError::Corrupt(_) | LinkError::UnsupportedVersion(_) => {
            return ProtocolError::new(ErrorCode::Internal, e.to_string())
        }
        LinkError::SelfLink(_) => "self_link",
        LinkError::ForbiddenKindPair(_) => "forbidden_kind_pair",
        LinkError::NotSourceAnchor(_) => "wrong_kind",
    };
    ProtocolError::validation(detail, e.to_string())
}

fn parse<T: DeserializeOwned>(payload: Value) -> Result<T, ProtocolError> {
    let payload = if payload.is_null() { json!({}) } else { payload };
    serde_json::from_value(payload).map_err(|e| ProtocolError::validation("bad_payload", e.to_string()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response serializes")
}

fn expect_kind(anchor: &AnchorId, kind: AnchorKind) -> Result<(), ProtocolError> {
    if anchor.kind() == kind {
        Ok(())
    } else {
        Err(ProtocolError::validation(
            "wrong_kind",
            format!("expected a {} anchor, got {anchor}", kind.as_str()),
        ))
    }
}

/// Handles one request.
pub(crate) async fn dispatch(
    state: &Arc<ServerState>,
    session: SessionId,
    kind: &str,
    payload: Value,
) -> Result<Value, ProtocolError> {
    match kind {
        types::SUBSCRIBE => {
            let req: SubscribeRequest = parse(payload)?;
            let filter: HashSet<AnchorId> = req.anchors.into_iter().collect();
            let count = filter.len();
            state.set_subscription(session, Some(filter));
            Ok(json!({"subscribed": true, "anchors": count}))
        }
        types::UNSUBSCRIBE => {
            state.set_subscription(session, None);
            Ok(json!({"subscribed": false}))
        }
        types::UPLOAD_SKETCH => {
            let req: UploadSketchRequest = parse(payload)?;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(req.image_base64.trim())
                .map_err(|e| ProtocolError::validation("bad_payload", format!("image_base64: {e}")))?;
            let meta = SketchMeta {
                annotation: req.annotation,
                authors: req.authors,
            };
            let summary = upload(state, bytes, req.mime, meta).await?;
            Ok(upload_response(state, &summary))
        }
        types::GET_SKETCH => {
            let req: AnchorRequest = parse(payload)?;
            get_sketch(state, &req.anchor).await
        }
        types::LIST_SKETCHES => {
            let snap = state.snapshot();
            let mut list: Vec<&SketchSummary> = snap.catalog.summaries().collect();
            list.sort_by(|a, b| b.modified.cmp(&a.modified).then(a.anchor.cmp(&b.anchor)));
            Ok(json!({"sketches": list}))
        }
        types::ADD_MARKER => {
            let req: AddMarkerRequest = parse(payload)?;
            expect_kind(&req.sketch, AnchorKind::Sketch)?;
            state
                .write(move |txn| {
                    let mut doc = txn.state.repo.load_document(&req.sketch).map_err(sketch_err)?;
                    let marker = doc
                        .add_marker(req.rect, &req.annotation, &mut rand::thread_rng())
                        .map_err(sketch_err)?;
                    txn.state.repo.update(&doc).map_err(sketch_err)?;
                    txn.catalog_mut().insert(&doc);
                    txn.emit(
                        Envelope::event(
                            events::SKETCH_CHANGED,
                            to_value(&SketchChangedEvent {
                                sketch: doc.anchor,
                                change: SketchChange::MarkerAdded,
                                marker: Some(marker.anchor),
                            }),
                        ),
                        vec![doc.anchor, marker.anchor],
                    );
                    Ok(json!({"sketch": doc, "marker": marker}))
                })
                .await
        }
        types::REMOVE_MARKER => {
            let req: RemoveMarkerRequest = parse(payload)?;
            expect_kind(&req.sketch, AnchorKind::Sketch)?;
            state
                .write(move |txn| {
                    let mut doc = txn.state.repo.load_document(&req.sketch).map_err(sketch_err)?;
                    let marker = doc.remove_marker(&req.marker).map_err(sketch_err)?;
                    txn.state.repo.update(&doc).map_err(sketch_err)?;
                    txn.catalog_mut().insert(&doc);
                    txn.emit(
                        Envelope::event(
                            events::SKETCH_CHANGED,
                            to_value(&SketchChangedEvent {
                                sketch: doc.anchor,
                                change: SketchChange::MarkerRemoved,
                                marker: Some(marker.anchor),
                            }),
                        ),
                        vec![doc.anchor, marker.anchor],
                    );
                    Ok(json!({"sketch": doc}))
                })
                .await
        }
        types::UPDATE_ANNOTATION => {
            let req: UpdateAnnotationRequest = parse(payload)?;
            state
                .write(move |txn| {
                    let sketch = txn.snap.catalog.sketch_of(&req.target).ok_or_else(|| {
                        ProtocolError::new(ErrorCode::NotFound, format!("{} is not a known sketch or marker", req.target))
                    })?;
                    let mut doc = txn.state.repo.load_document(&sketch).map_err(sketch_err)?;
                    doc.update_annotation(&req.target, &req.text).map_err(sketch_err)?;
                    txn.state.repo.update(&doc).map_err(sketch_err)?;
                    txn.catalog_mut().insert(&doc);
                    let marker = (req.target != sketch).then_some(req.target);
                    txn.emit(
                        Envelope::event(
                            events::SKETCH_CHANGED,
                            to_value(&SketchChangedEvent {
                                sketch,
                                change: SketchChange::AnnotationUpdated,
                                marker,
                            }),
                        ),
                        vec![sketch, req.target],
                    );
                    Ok(json!({"sketch": doc}))
                })
                .await
        }
        types::CREATE_LINK => {
            let req: LinkRequest = parse(payload)?;
            state
                .write(move |txn| {
                    let snap = txn.snap.clone();
                    let lookup = |a: &AnchorId| match a.kind() {
                        AnchorKind::SourceCode => snap.source_known(a),
                        _ => snap.catalog.contains(a),
                    };
                    let now = Utc::now();
                    let (link, created) = txn.links_mut().create_link(req.a, req.b, &lookup, now).map_err(link_err)?;
                    for end in [link.a, link.b] {
                        if end.kind() == AnchorKind::SourceCode && snap.links.record(&end).is_none() {
                            if let Some(index) = snap.locate_source(&end) {
                                let record = SourceAnchorRecord::from_index(index, &end, now).expect("located");
                                txn.links_mut().record_source_anchor(record).map_err(link_err)?;
                            }
                        }
                    }
                    if created {
                        txn.emit(
                            Envelope::event(
                                events::LINK_CHANGED,
                                to_value(&LinkChangedEvent {
                                    a: link.a,
                                    b: link.b,
                                    change: LinkChange::Created,
                                }),
                            ),
                            link_event_anchors(&snap, &link.a, &link.b),
                        );
                    }
                    Ok(json!({"link": link, "created": created}))
                })
                .await
        }
        types::REMOVE_LINK => {
            let req: LinkRequest = parse(payload)?;
            state
                .write(move |txn| {
                    if txn.snap.links.get(req.a, req.b).is_none() {
                        return Ok(json!({"removed": false}));
                    }
                    txn.links_mut().remove_link(req.a, req.b);
                    let (a, b) = if req.a < req.b { (req.a, req.b) } else { (req.b, req.a) };
                    let anchors = link_event_anchors(&txn.snap, &a, &b);
                    txn.emit(
                        Envelope::event(
                            events::LINK_CHANGED,
                            to_value(&LinkChangedEvent {
                                a,
                                b,
                                change: LinkChange::Removed,
                            }),
                        ),
                        anchors,
                    );
                    Ok(json!({"removed": true}))
                })
                .await
        }
        types::QUERY_LINKS => {
            let req: AnchorRequest = parse(payload)?;
            let snap = state.snapshot();
            Ok(json!({"anchor": req.anchor, "links": snap.links.links_of(&req.anchor, Some(&snap.catalog))}))
        }
        types::LIST_ARTIFACTS => {
            let req: ProjectRequest = parse(payload)?;
            let snap = state.snapshot();
            match req.project {
                None => Ok(project_list(state, &snap)),
                Some(name) => {
                    state.project(&name)?;
                    let index = snap.index(&name).expect("configured project is indexed");
                    Ok(artifact_listing(index))
                }
            }
        }
        types::RESCAN => {
            let req: ProjectRequest = parse(payload)?;
            let names: Vec<String> = match req.project {
                Some(name) => {
                    state.project(&name)?;
                    vec![name]
                }
                None => state.config.projects.keys().cloned().collect(),
            };
            let mut listings = Vec::new();
            for name in names {
                let index = rescan(state, &name).await?;
                listings.push(artifact_listing(&index));
            }
            Ok(if listings.len() == 1 {
                listings.pop().expect("one listing")
            } else {
                json!({"projects": listings})
            })
        }
        types::REGISTER_EDITOR => {
            let req: RegisterEditorRequest = parse(payload)?;
            state.project(&req.project)?;
            state.set_editor(session, req.project.clone());
            Ok(json!({"session": session, "project": req.project}))
        }
        types::REGISTER_ANCHOR => {
            let req: RegisterAnchorRequest = parse(payload)?;
            register_anchor(state, req).await
        }
        types::NAVIGATE => {
            let req: AnchorRequest = parse(payload)?;
            let event = navigate_target(&state.snapshot(), &req.anchor)?;
            let delivered = state.send_to_editors(&event.project, &Envelope::event(events::NAVIGATE, to_value(&event)));
            if delivered == 0 {
                return Err(ProtocolError::new(
                    ErrorCode::NoEditorConnected,
                    format!("no editor registered for project `{}`", event.project),
                ));
            }
            Ok(json!({"delivered": delivered, "target": event}))
        }
        types::VERIFY => {
            let req: ProjectRequest = parse(payload)?;
            let name = req
                .project
                .ok_or_else(|| ProtocolError::validation("bad_payload", "missing field `project`"))?;
            state.project(&name)?;
            let snap = state.snapshot();
            let index = snap.index(&name).expect("configured project is indexed");
            Ok(to_value(&verify(&snap.links, index, &snap.catalog)))
        }
        other => Err(ProtocolError::new(
            ErrorCode::UnknownType,
            format!("unknown message type `{other}`"),
        )),
    }
}

/// Events about a link reach subscribers of either end and of the sketch
/// owning a marker end.
fn link_event_anchors(snap: &Snapshot, a: &AnchorId, b: &AnchorId) -> Vec<AnchorId> {
    let mut anchors = vec![*a, *b];
    for end in [a, b] {
        if let Some(sketch) = snap.catalog.sketch_of(end).filter(|s| s != end) {
            anchors.push(sketch);
        }
    }
    anchors
}

pub(crate) async fn upload(
    state: &Arc<ServerState>,
    bytes: Vec<u8>,
    mime: String,
    meta: SketchMeta,
) -> Result<SketchSummary, ProtocolError> {
    state
        .write(move |txn| {
            let doc = create_sketch(&bytes, &mime, meta, &mut rand::thread_rng(), Utc::now()).map_err(sketch_err)?;
            txn.state.repo.store(&doc, &bytes).map_err(sketch_err)?;
            txn.catalog_mut().insert(&doc);
            txn.emit(
                Envelope::event(
                    events::SKETCH_CHANGED,
                    to_value(&SketchChangedEvent {
                        sketch: doc.anchor,
                        change: SketchChange::Created,
                        marker: None,
                    }),
                ),
                vec![doc.anchor],
            );
            Ok(doc.summary())
        })
        .await
}

pub(crate) fn upload_response(state: &ServerState, summary: &SketchSummary) -> Value {
    json!({
        "anchor": summary.anchor,
        "sketch": summary,
        "svg_url": format!("/sketch/{}.svg", summary.anchor),
        "app_url": format!("{}/app#sketch={}", state.config.base_url(), summary.anchor),
    })
}

async fn get_sketch(state: &Arc<ServerState>, anchor: &AnchorId) -> Result<Value, ProtocolError> {
    let snap = state.snapshot();
    let sketch = match anchor.kind() {
        AnchorKind::Marker => snap
            .catalog
            .sketch_of(anchor)
            .ok_or_else(|| ProtocolError::new(ErrorCode::NotFound, format!("marker {anchor} not found")))?,
        _ => {
            expect_kind(anchor, AnchorKind::Sketch)?;
            *anchor
        }
    };
    let repo = state.repo.clone();
    let (doc, image, svg) = tokio::task::spawn_blocking(move || {
        let (doc, image) = repo.load(&sketch)?;
        let svg = repo.load_svg_bytes(&sketch)?;
        Ok::<_, SketchError>((doc, image, svg))
    })
    .await
    .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?
    .map_err(sketch_err)?;
    Ok(json!({
        "sketch": doc,
        "svg": String::from_utf8_lossy(&svg),
        "image_base64": base64::engine::general_purpose::STANDARD.encode(&image),
        "svg_url": format!("/sketch/{sketch}.svg"),
        "image_url": format!("/image/{}", sketch.uuid()),
    }))
}

fn project_list(state: &ServerState, snap: &Snapshot) -> Value {
    let projects: Vec<Value> = state
        .config
        .projects
        .iter()
        .map(|(name, p)| {
            let index = snap.index(name);
            json!({
                "name": name,
                "root": p.root,
                "files": index.map_or(0, |i| i.files.len()),
                "anchors": index.map_or(0, |i| i.occurrence_count()),
                "scanned_at": index.map(|i| i.scanned_at),
            })
        })
        .collect();
    json!({"projects": projects})
}

/// The artifact tree of one project: files, declarations and anchors.
pub fn artifact_listing(index: &ProjectIndex) -> Value {
    let files: Vec<Value> = index
        .files
        .iter()
        .map(|f| {
            let anchors: Vec<Value> = f
                .anchors
                .iter()
                .map(|a| {
                    json!({
                        "anchor": a.occurrence.anchor,
                        "tag_line": a.occurrence.tag_line,
                        "referent": a.referent,
                    })
                })
                .collect();
            json!({
                "path": f.path,
                "profile": f.profile,
                "declarations": f.declarations,
                "anchors": anchors,
            })
        })
        .collect();
    json!({
        "project": index.project_name,
        "scanned_at": index.scanned_at,
        "files": files,
        "errors": index.errors,
    })
}

/// Scans outside the writer lock, then swaps the index in and refreshes
/// the records of that project.
pub(crate) async fn rescan(state: &Arc<ServerState>, name: &str) -> Result<Arc<ProjectIndex>, ProtocolError> {
    let s = state.clone();
    let n = name.to_string();
    let index = tokio::task::spawn_blocking(move || s.scan_project(&n))
        .await
        .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?
        .map_err(|e| ProtocolError::new(ErrorCode::Internal, e.to_string()))?;
    let index = Arc::new(index);
    let name = name.to_string();
    let fresh = index.clone();
    state
        .write(move |txn| {
            if txn.snap.links.records().any(|r| r.project == name) {
                let mut links = (*txn.snap.links).clone();
                if links.refresh_records(&fresh, Utc::now()) > 0 {
                    *txn.links_mut() = links;
                }
            }
            txn.snap.indexes.insert(name, fresh);
            Ok(())
        })
        .await?;
    Ok(index)
}

/// Project-relative path without `..`, root or prefix components.
fn safe_relative(path: &str) -> Option<&Path> {
    let p = Path::new(path);
    let ok = !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    ok.then_some(p)
}

async fn register_anchor(state: &Arc<ServerState>, req: RegisterAnchorRequest) -> Result<Value, ProtocolError> {
    expect_kind(&req.anchor, AnchorKind::SourceCode)?;
    let project = state.project(&req.project)?.clone();
    let rel = safe_relative(&req.path)
        .ok_or_else(|| ProtocolError::validation("bad_path", format!("`{}` is not a project-relative path", req.path)))?
        .to_path_buf();
    let profile = state
        .profiles
        .for_path(&rel)
        .cloned()
        .ok_or_else(|| ProtocolError::validation("unsupported_file", format!("no language profile for `{}`", req.path)))?;
    let full = project.root.join(&rel);
    let text = tokio::fs::read(&full)
        .await
        .map_err(|e| ProtocolError::new(ErrorCode::NotFound, format!("{}: {e}", full.display())))?;
    let text = String::from_utf8(text)
        .map_err(|_| ProtocolError::validation("encoding", format!("{} is not UTF-8", req.path)))?;
    let slash_path: String = rel
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/");
    let entry = index_file(&text, &slash_path, &profile);
    if !entry.anchors.iter().any(|a| a.occurrence.anchor == req.anchor) {
        return Err(ProtocolError::new(
            ErrorCode::UnknownAnchor,
            format!("{} does not occur in {}", req.anchor, req.path),
        ));
    }
    let name = req.project.clone();
    let anchor = req.anchor;
    let record = state
        .write(move |txn| {
            let mut index = txn
                .snap
                .indexes
                .get(&name)
                .map(|i| (**i).clone())
                .expect("configured project is indexed");
            index.replace_file(&slash_path, Some(entry));
            let record = SourceAnchorRecord::from_index(&index, &anchor, Utc::now()).expect("anchor is in the entry");
            txn.links_mut().record_source_anchor(record.clone()).map_err(link_err)?;
            txn.snap.indexes.insert(name, Arc::new(index));
            Ok(record)
        })
        .await?;
    Ok(json!({
        "record": record,
        "url": format!("{}/app#link={}", state.config.base_url(), anchor),
    }))
}

pub(crate) fn navigate_target(snap: &Snapshot, anchor: &AnchorId) -> Result<NavigateEvent, ProtocolError> {
    expect_kind(anchor, AnchorKind::SourceCode)?;
    let index = snap
        .locate_source(anchor)
        .ok_or_else(|| ProtocolError::new(ErrorCode::UnknownAnchor, format!("{anchor} does not occur in any project")))?;
    let (file, hit) = index.find(anchor).expect("located");
    Ok(NavigateEvent {
        anchor: *anchor,
        project: index.project_name.clone(),
        path: file.path.clone(),
        start_line: hit.referent.lines.start,
        end_line: hit.referent.lines.end,
        kind: hit.referent.kind,
        name: hit.referent.name.clone(),
        artifact_path: hit.referent.artifact_path.clone(),
    })
}
