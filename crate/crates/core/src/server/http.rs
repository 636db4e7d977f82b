use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State, WebSocketUpgrade};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use uuid::Uuid;

use super::ops::{sketch_err, upload, upload_response};
use super::ServerState;
use crate::anchor::{AnchorId, AnchorKind};
use crate::protocol::{ErrorCode, ProtocolError, WS_PATH};
use crate::sketch::{ImageFormat, SketchMeta};

pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

pub(crate) fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/", get(|| async { Redirect::temporary("/app") }))
        .route("/health", get(health))
        .route(WS_PATH, get(ws))
        .route("/sketch/{file}", get(sketch_svg))
        .route("/image/{id}", get(image))
        .route("/images/{file}", get(image))
        .route("/upload", post(upload_multipart))
        .route("/app", get(app))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

struct ApiError(ProtocolError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match (self.0.code, self.0.detail.as_deref()) {
            (ErrorCode::NotFound, _) | (ErrorCode::UnknownAnchor, _) => StatusCode::NOT_FOUND,
            (ErrorCode::Internal, _) => StatusCode::INTERNAL_SERVER_ERROR,
            (ErrorCode::ValidationError, Some("unsupported_format")) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            (ErrorCode::NoEditorConnected, _) => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(self.0)).into_response()
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        ApiError(e)
    }
}

fn not_found(what: impl Into<String>) -> ApiError {
    ApiError(ProtocolError::new(ErrorCode::NotFound, what))
}

async fn health(State(state): State<Arc<ServerState>>) -> Json<serde_json::Value> {
    let snap = state.snapshot();
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "projects": snap.indexes.keys().collect::<Vec<_>>(),
        "sketches": snap.catalog.len(),
        "links": snap.links.len(),
    }))
}

async fn ws(State(state): State<Arc<ServerState>>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| super::ws::session(state, socket))
}

async fn sketch_svg(State(state): State<Arc<ServerState>>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let text = file.strip_suffix(".svg").unwrap_or(&file);
    let anchor: AnchorId = text.parse().map_err(|_| not_found(format!("no sketch `{file}`")))?;
    if anchor.kind() != AnchorKind::Sketch {
        return Err(not_found(format!("{anchor} is not a sketch anchor")));
    }
    let repo = state.repo().clone();
    let bytes = tokio::task::spawn_blocking(move || repo.load_svg_bytes(&anchor))
        .await
        .map_err(|e| ApiError(ProtocolError::new(ErrorCode::Internal, e.to_string())))?
        .map_err(sketch_err)?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], bytes).into_response())
}

/// `/image/<uuid>` and `/images/<uuid>.<ext>`.
async fn image(State(state): State<Arc<ServerState>>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let stem = file.split('.').next().unwrap_or(&file);
    let uuid = Uuid::parse_str(stem).map_err(|_| not_found(format!("no image `{file}`")))?;
    let repo = state.repo().clone();
    let (bytes, format) = tokio::task::spawn_blocking(move || repo.image(&uuid))
        .await
        .map_err(|e| ApiError(ProtocolError::new(ErrorCode::Internal, e.to_string())))?
        .map_err(sketch_err)?;
    Ok(([(header::CONTENT_TYPE, format.mime())], bytes).into_response())
}

/// Multipart fields: `image` (file part), `annotation`, `authors`
/// (repeatable).
async fn upload_multipart(
    State(state): State<Arc<ServerState>>,
    mut multipart: Multipart,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let bad = |m: String| ApiError(ProtocolError::validation("bad_payload", m));
    let mut image: Option<(Bytes, String)> = None;
    let mut meta = SketchMeta::default();
    while let Some(field) = multipart.next_field().await.map_err(|e| bad(e.to_string()))? {
        match field.name().unwrap_or("") {
            "image" => {
                let mime = field
                    .content_type()
                    .map(str::to_string)
                    .filter(|m| m != "application/octet-stream")
                    .or_else(|| {
                        field
                            .file_name()
                            .and_then(|n| n.rsplit('.').next())
                            .and_then(ImageFormat::from_extension)
                            .map(|f| f.mime().to_string())
                    })
                    .unwrap_or_default();
                let bytes = field.bytes().await.map_err(|e| bad(e.to_string()))?;
                image = Some((bytes, mime));
            }
            "annotation" => meta.annotation = field.text().await.map_err(|e| bad(e.to_string()))?,
            "authors" => {
                let author = field.text().await.map_err(|e| bad(e.to_string()))?;
                if !author.trim().is_empty() {
                    meta.authors.push(author.trim().to_string());
                }
            }
            _ => {}
        }
    }
    let (bytes, mime) = image.ok_or_else(|| bad("missing `image` part".into()))?;
    let summary = upload(&state, bytes.to_vec(), mime, meta).await?;
    Ok((StatusCode::CREATED, Json(upload_response(&state, &summary))))
}

const APP_PLACEHOLDER: &str = r#"<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>SketchLink</title></head>
<body>
<h1>SketchLink</h1>
<p>The web client is not bundled with this server. It talks to <code>/ws</code>
and <code>/upload</code>; deep links use <code>/app#sketch=&lt;anchor&gt;</code>.</p>
</body></html>
"#;

async fn app() -> Html<&'static str> {
    Html(APP_PLACEHOLDER)
}
