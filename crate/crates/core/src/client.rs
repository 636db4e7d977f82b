//! Minimal WebSocket client for the server protocol.

use std::collections::VecDeque;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::protocol::{Envelope, ProtocolError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot connect to {url}: {message}")]
    Connect { url: String, message: String },
    #[error("connection closed")]
    Closed,
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected frame: {0}")]
    Unexpected(String),
    #[error("timed out")]
    Timeout,
    #[error("server error: {0}")]
    Server(ProtocolError),
}

/// Turns `host:port`, `http://...` or `ws://...` into the WebSocket URL.
pub fn ws_url(server: &str) -> String {
    let s = server.trim_end_matches('/');
    let base = if let Some(rest) = s.strip_prefix("http://") {
        format!("ws://{rest}")
    } else if let Some(rest) = s.strip_prefix("https://") {
        format!("wss://{rest}")
    } else if s.starts_with("ws://") || s.starts_with("wss://") {
        s.to_string()
    } else {
        format!("ws://{s}")
    };
    if base.ends_with(crate::protocol::WS_PATH) {
        base
    } else {
        format!("{base}{}", crate::protocol::WS_PATH)
    }
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    events: VecDeque<Envelope>,
}

impl Client {
    pub async fn connect(server: &str) -> Result<Self, ClientError> {
        let url = ws_url(server);
        let (ws, _) = tokio_tungstenite::connect_async(url.as_str())
            .await
            .map_err(|e| ClientError::Connect {
                url: url.clone(),
                message: e.to_string(),
            })?;
        Ok(Client {
            ws,
            next_id: 0,
            events: VecDeque::new(),
        })
    }

    pub async fn send_raw(&mut self, text: String) -> Result<(), ClientError> {
        self.ws
            .send(Message::Text(text.into()))
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))
    }

    /// Next frame from the server, whatever it is.
    pub async fn recv(&mut self) -> Result<Envelope, ClientError> {
        loop {
            match self.ws.next().await {
                Some(Ok(Message::Text(t))) => {
                    return serde_json::from_str(t.as_str()).map_err(|_| ClientError::Unexpected(t.to_string()))
                }
                Some(Ok(Message::Close(_))) | None => return Err(ClientError::Closed),
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(ClientError::Transport(e.to_string())),
            }
        }
    }

    /// Sends a request and waits for its response. Events arriving in
    /// between are queued for [`Client::next_event`].
    pub async fn request(&mut self, kind: &str, payload: Value) -> Result<Value, ClientError> {
        self.next_id += 1;
        let id = format!("r{}", self.next_id);
        self.send_raw(Envelope::request(kind, id.clone(), payload).to_text()).await?;
        loop {
            let msg = self.recv().await?;
            if msg.request_id.as_ref().and_then(Value::as_str) == Some(id.as_str()) {
                if msg.is_error() {
                    let err: ProtocolError =
                        serde_json::from_value(msg.payload).map_err(|e| ClientError::Unexpected(e.to_string()))?;
                    return Err(ClientError::Server(err));
                }
                return Ok(msg.payload);
            }
            if msg.request_id.is_none() {
                self.events.push_back(msg);
            }
        }
    }

    pub async fn next_event(&mut self) -> Result<Envelope, ClientError> {
        if let Some(e) = self.events.pop_front() {
            return Ok(e);
        }
        loop {
            let msg = self.recv().await?;
            if msg.request_id.is_none() && !msg.is_error() {
                return Ok(msg);
            }
        }
    }

    pub async fn next_event_within(&mut self, timeout: Duration) -> Result<Envelope, ClientError> {
        tokio::time::timeout(timeout, self.next_event())
            .await
            .map_err(|_| ClientError::Timeout)?
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_forms() {
        assert_eq!(ws_url("127.0.0.1:7878"), "ws://127.0.0.1:7878/ws");
        assert_eq!(ws_url("http://h:1/"), "ws://h:1/ws");
        assert_eq!(ws_url("https://h"), "wss://h/ws");
        assert_eq!(ws_url("ws://h:1/ws"), "ws://h:1/ws");
    }
}
