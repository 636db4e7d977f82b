use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket};
use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::sync::mpsc;

use super::ops::dispatch;
use super::ServerState;
use crate::protocol::{Envelope, ErrorCode, ProtocolError};

/// Serves one connection. Requests are handled in arrival order; responses
/// and events share one outbound queue.
pub(crate) async fn session(state: Arc<ServerState>, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let id = state.open_session(tx.clone());
    let mut closing = state.closing();

    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    loop {
        let msg = tokio::select! {
            msg = stream.next() => msg,
            _ = closing.wait_for(|c| *c) => break,
        };
        let text = match msg {
            Some(Ok(Message::Text(t))) => t,
            Some(Ok(Message::Binary(_))) => {
                let err = ProtocolError::new(ErrorCode::BadRequest, "binary frames are not supported");
                let _ = tx.send(Envelope::error(None, &err).to_text());
                continue;
            }
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
            Some(Ok(_)) => continue,
        };
        let reply = handle_text(&state, id, text.as_str()).await;
        if tx.send(reply.to_text()).is_err() {
            break;
        }
    }

    state.close_session(id);
    drop(tx);
    let _ = writer.await;
}

async fn handle_text(state: &Arc<ServerState>, id: super::SessionId, text: &str) -> Envelope {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            let err = ProtocolError::new(ErrorCode::BadRequest, format!("invalid JSON: {e}"));
            return Envelope::error(None, &err);
        }
    };
    let request_id = value.get("request_id").cloned().filter(|v| !v.is_null());
    let envelope: Envelope = match serde_json::from_value(value) {
        Ok(e) => e,
        Err(e) => {
            let err = ProtocolError::new(ErrorCode::BadRequest, format!("not a message envelope: {e}"));
            return Envelope::error(request_id, &err);
        }
    };
    let kind = envelope.kind.clone();
    match dispatch(state, id, &kind, envelope.payload).await {
        Ok(payload) => Envelope {
            kind,
            request_id,
            payload,
        },
        Err(err) => Envelope::error(request_id, &err),
    }
}
