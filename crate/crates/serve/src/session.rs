use axum::extract::ws::{Message, WebSocket};
use pmu_core::detect::HitEvent;
use pmu_core::game::{Command, MatchEvent};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinSet;

use crate::protocol::{decode, encode, DecodeError, MessageKind, SeqStatus, SeqTracker, WireMessage};
use crate::service::{AppState, SubmitError};

/// Protocol state for one connection, independent of transport.
pub(crate) struct Session {
    app: AppState,
    authenticated: bool,
    seqs: SeqTracker,
}

pub(crate) struct Reply {
    pub messages: Vec<WireMessage>,
    pub close: bool,
    /// Authentication completed on this message.
    pub authenticated_now: bool,
}

impl Reply {
    fn one(m: WireMessage) -> Self {
        Self {
            messages: vec![m],
            close: false,
            authenticated_now: false,
        }
    }
}

#[derive(Deserialize)]
struct AuthPayload {
    token: String,
}

#[derive(Deserialize)]
struct SwordClashPayload {
    source: String,
    #[serde(default)]
    intensity: Option<f64>,
}

#[derive(Deserialize)]
struct OverridePayload {
    target_seq: u64,
    location: Option<String>,
}

fn payload_as<T: serde::de::DeserializeOwned>(payload: &Value) -> Result<T, String> {
    serde_json::from_value(payload.clone()).map_err(|e| e.to_string())
}

fn is_auth(msg: &WireMessage) -> bool {
    msg.kind == MessageKind::Command && msg.payload.get("command").and_then(Value::as_str) == Some("auth")
}

impl Session {
    pub fn new(app: AppState) -> Self {
        Self {
            app,
            authenticated: false,
            seqs: SeqTracker::default(),
        }
    }

    pub fn authenticated(&self) -> bool {
        self.authenticated
    }

    pub async fn handle_line(&mut self, line: &str) -> Reply {
        let msg = match decode(line) {
            Ok(m) => m,
            Err(e) if !self.authenticated => {
                return Reply {
                    close: true,
                    ..Reply::one(WireMessage::error(0, "auth_required", e.to_string()))
                }
            }
            Err(e) => {
                let seq = match &e {
                    DecodeError::UnknownType { seq, .. } => seq.unwrap_or(0),
                    _ => 0,
                };
                return Reply::one(WireMessage::error(seq, e.code(), e.to_string()));
            }
        };

        if !self.authenticated {
            let ok = is_auth(&msg)
                && payload_as::<AuthPayload>(&msg.payload).is_ok_and(|a| a.token == *self.app.token);
            if !ok {
                return Reply {
                    close: true,
                    ..Reply::one(WireMessage::error(msg.seq, "auth_failed", "first message must authenticate with the match token"))
                };
            }
            self.authenticated = true;
            let ack = WireMessage::new(MessageKind::Ack, msg.seq, json!({ "authenticated": true, "duplicate": false }));
            self.seqs.record(msg.seq, ack.clone());
            return Reply {
                authenticated_now: true,
                ..Reply::one(ack)
            };
        }

        match self.seqs.classify(msg.seq) {
            SeqStatus::Duplicate => {
                let mut again = self.seqs.previous_ack(msg.seq).cloned().unwrap_or_else(|| {
                    WireMessage::new(MessageKind::Ack, msg.seq, json!({}))
                });
                if let Value::Object(o) = &mut again.payload {
                    o.insert("duplicate".into(), Value::Bool(true));
                }
                return Reply::one(again);
            }
            SeqStatus::Regression { previous } => {
                self.seqs.flag();
                let mut err = WireMessage::error(
                    msg.seq,
                    "seq_regression",
                    format!("seq {} after {previous}", msg.seq),
                );
                err.payload["flagged"] = Value::Bool(true);
                return Reply::one(err);
            }
            SeqStatus::Fresh => {}
        }

        let reply = self.dispatch(&msg).await;
        self.seqs.record(msg.seq, reply.clone());
        Reply::one(reply)
    }

    async fn dispatch(&mut self, msg: &WireMessage) -> WireMessage {
        let invalid = |e: String| WireMessage::error(msg.seq, "invalid_payload", e);
        let event = match msg.kind {
            MessageKind::Hit => match payload_as::<HitEvent>(&msg.payload) {
                Ok(h) => MatchEvent::Hit(h),
                Err(e) => return invalid(e),
            },
            MessageKind::SwordClash => match payload_as::<SwordClashPayload>(&msg.payload) {
                Ok(p) => MatchEvent::SwordClash {
                    source: p.source,
                    intensity: p.intensity,
                },
                Err(e) => return invalid(e),
            },
            MessageKind::Override => match payload_as::<OverridePayload>(&msg.payload) {
                Ok(p) => MatchEvent::Override {
                    target_seq: p.target_seq,
                    location: p.location,
                },
                Err(e) => return invalid(e),
            },
            MessageKind::Command if is_auth(msg) => {
                return WireMessage::new(MessageKind::Ack, msg.seq, json!({ "authenticated": true, "duplicate": false }));
            }
            MessageKind::Command => match payload_as::<Command>(&msg.payload) {
                Ok(c) => MatchEvent::Command(c),
                Err(e) => return invalid(e),
            },
            MessageKind::State => {
                return WireMessage::new(MessageKind::State, msg.seq, snapshot_value(&self.app));
            }
            MessageKind::Ack | MessageKind::Error => {
                return WireMessage::error(
                    msg.seq,
                    "unexpected_type",
                    format!("'{}' messages are server-to-client only", msg.kind.as_str()),
                );
            }
        };
        match self.app.handle.submit(event).await {
            Ok(entry) => {
                let mut ack = WireMessage::new(
                    MessageKind::Ack,
                    msg.seq,
                    json!({
                        "log_seq": entry.seq,
                        "disposition": entry.disposition,
                        "effect": entry.effect,
                        "duplicate": false,
                    }),
                );
                ack.ts_ms = entry.ts_ms;
                ack
            }
            Err(SubmitError::Overflow) => WireMessage::error(msg.seq, "overflow", SubmitError::Overflow.to_string()),
            Err(e) => WireMessage::error(msg.seq, "unavailable", e.to_string()),
        }
    }
}

fn snapshot_value(app: &AppState) -> Value {
    serde_json::to_value(app.handle.snapshot()).expect("snapshot serializes")
}

pub(crate) async fn accept_tcp(listener: TcpListener, app: AppState) {
    let mut sessions = JoinSet::new();
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tracing::debug!(%peer, "pmu connected");
                sessions.spawn(run_tcp(stream, app.clone()));
            }
            Err(e) => tracing::warn!("accept failed: {e}"),
        }
        while sessions.try_join_next().is_some() {}
    }
}

async fn run_tcp(stream: TcpStream, app: AppState) {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let mut session = Session::new(app);
    while let Ok(Some(line)) = lines.next_line().await {
        if line.trim().is_empty() {
            continue;
        }
        let reply = session.handle_line(&line).await;
        for m in &reply.messages {
            if write.write_all(encode(m).as_bytes()).await.is_err() {
                return;
            }
        }
        if reply.close {
            let _ = write.shutdown().await;
            return;
        }
    }
}

pub(crate) async fn run_ws(mut socket: WebSocket, app: AppState) {
    let mut updates = app.handle.subscribe();
    let mut session = Session::new(app.clone());
    let mut out_seq = 0u64;
    let mut state_message = |app: &AppState| {
        out_seq += 1;
        let m = WireMessage::new(MessageKind::State, out_seq, snapshot_value(app));
        Message::Text(encode(&m).trim_end().to_string().into())
    };
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let reply = session.handle_line(line).await;
                    for m in &reply.messages {
                        let text = encode(m).trim_end().to_string();
                        if socket.send(Message::Text(text.into())).await.is_err() {
                            return;
                        }
                    }
                    if reply.close {
                        let _ = socket.send(Message::Close(None)).await;
                        return;
                    }
                    if reply.authenticated_now {
                        updates.mark_unchanged();
                        if socket.send(state_message(&app)).await.is_err() {
                            return;
                        }
                    }
                }
            }
            changed = updates.changed(), if session.authenticated() => {
                if changed.is_err() {
                    return;
                }
                updates.mark_unchanged();
                if socket.send(state_message(&app)).await.is_err() {
                    return;
                }
            }
        }
    }
}
