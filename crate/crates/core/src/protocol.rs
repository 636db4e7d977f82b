//! WebSocket message schema.
//!
//! Every frame is a JSON text message `{"type", "request_id", "payload"}`.
//! A request carries a `request_id` (string or number) and gets exactly one
//! response with the same id: either `{"type": "<request type>", ...}` or
//! `{"type": "error", "payload": {"code", "message"}}`. Events carry no
//! `request_id`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::anchor::AnchorId;
use crate::scanner::ReferentKind;
use crate::sketch::Rect;

pub const WS_PATH: &str = "/ws";

pub mod types {
    pub const SUBSCRIBE: &str = "subscribe";
    pub const UNSUBSCRIBE: &str = "unsubscribe";
    pub const UPLOAD_SKETCH: &str = "upload_sketch";
    pub const GET_SKETCH: &str = "get_sketch";
    pub const LIST_SKETCHES: &str = "list_sketches";
    pub const ADD_MARKER: &str = "add_marker";
    pub const REMOVE_MARKER: &str = "remove_marker";
    pub const UPDATE_ANNOTATION: &str = "update_annotation";
    pub const CREATE_LINK: &str = "create_link";
    pub const REMOVE_LINK: &str = "remove_link";
    pub const QUERY_LINKS: &str = "query_links";
    pub const LIST_ARTIFACTS: &str = "list_artifacts";
    pub const RESCAN: &str = "rescan";
    pub const REGISTER_EDITOR: &str = "register_editor";
    pub const REGISTER_ANCHOR: &str = "register_anchor";
    pub const NAVIGATE: &str = "navigate";
    pub const VERIFY: &str = "verify";
    pub const ERROR: &str = "error";

    pub const REQUESTS: [&str; 17] = [
        SUBSCRIBE,
        UNSUBSCRIBE,
        UPLOAD_SKETCH,
        GET_SKETCH,
        LIST_SKETCHES,
        ADD_MARKER,
        REMOVE_MARKER,
        UPDATE_ANNOTATION,
        CREATE_LINK,
        REMOVE_LINK,
        QUERY_LINKS,
        LIST_ARTIFACTS,
        RESCAN,
        REGISTER_EDITOR,
        REGISTER_ANCHOR,
        NAVIGATE,
        VERIFY,
    ];
}

pub mod events {
    pub const SKETCH_CHANGED: &str = "sketch_changed";
    pub const LINK_CHANGED: &str = "link_changed";
    /// Sent to editor sessions only; same name as the request.
    pub const NAVIGATE: &str = "navigate";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<Value>,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn request(kind: &str, request_id: impl Into<Value>, payload: Value) -> Self {
        Envelope {
            kind: kind.to_string(),
            request_id: Some(request_id.into()),
            payload,
        }
    }

    pub fn event(kind: &str, payload: Value) -> Self {
        Envelope {
            kind: kind.to_string(),
            request_id: None,
            payload,
        }
    }

    pub fn error(request_id: Option<Value>, err: &ProtocolError) -> Self {
        Envelope {
            kind: types::ERROR.to_string(),
            request_id,
            payload: serde_json::to_value(err).expect("error payload"),
        }
    }

    pub fn is_error(&self) -> bool {
        self.kind == types::ERROR
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not JSON, or not an envelope.
    BadRequest,
    UnknownType,
    /// Payload fields missing or of the wrong shape, or a domain rule was
    /// violated; `detail` names the rule.
    ValidationError,
    NotFound,
    UnknownAnchor,
    NoEditorConnected,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message}")]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ProtocolError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn validation(detail: &str, message: impl Into<String>) -> Self {
        ProtocolError {
            code: ErrorCode::ValidationError,
            message: message.into(),
            detail: Some(detail.to_string()),
        }
    }
}

// Request payloads.

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubscribeRequest {
    /// Restrict events to these anchors (sketch, marker or source). Empty
    /// means everything.
    #[serde(default)]
    pub anchors: Vec<AnchorId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UploadSketchRequest {
    pub mime: String,
    pub image_base64: String,
    #[serde(default)]
    pub annotation: String,
    #[serde(default)]
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorRequest {
    pub anchor: AnchorId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddMarkerRequest {
    pub sketch: AnchorId,
    pub rect: Rect,
    #[serde(default)]
    pub annotation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoveMarkerRequest {
    pub sketch: AnchorId,
    pub marker: AnchorId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateAnnotationRequest {
    /// Sketch or marker anchor.
    pub target: AnchorId,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRequest {
    pub a: AnchorId,
    pub b: AnchorId,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProjectRequest {
    #[serde(default)]
    pub project: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterEditorRequest {
    pub project: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterAnchorRequest {
    pub project: String,
    /// Project-relative path with `/` separators.
    pub path: String,
    pub anchor: AnchorId,
}

// Event payloads.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchChange {
    Created,
    MarkerAdded,
    MarkerRemoved,
    AnnotationUpdated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchChangedEvent {
    pub sketch: AnchorId,
    pub change: SketchChange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<AnchorId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkChange {
    Created,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkChangedEvent {
    pub a: AnchorId,
    pub b: AnchorId,
    pub change: LinkChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigateEvent {
    pub anchor: AnchorId,
    pub project: String,
    pub path: String,
    pub start_line: usize,
    pub end_line: usize,
    pub kind: ReferentKind,
    pub name: String,
    pub artifact_path: String,
}
