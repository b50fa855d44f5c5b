//! Wire format: one JSON object per line, `{type, seq, ts_ms, payload}`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Hit,
    SwordClash,
    Override,
    Command,
    State,
    Ack,
    Error,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        Self::Hit,
        Self::SwordClash,
        Self::Override,
        Self::Command,
        Self::State,
        Self::Ack,
        Self::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hit => "hit",
            Self::SwordClash => "sword_clash",
            Self::Override => "override",
            Self::Command => "command",
            Self::State => "state",
            Self::Ack => "ack",
            Self::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub seq: u64,
    #[serde(default)]
    pub ts_ms: u64,
    #[serde(default = "empty_object")]
    pub payload: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl WireMessage {
    pub fn new(kind: MessageKind, seq: u64, payload: Value) -> Self {
        Self {
            kind,
            seq,
            ts_ms: 0,
            payload,
        }
    }

    pub fn error(seq: u64, code: &str, message: impl Into<String>) -> Self {
        Self::new(
            MessageKind::Error,
            seq,
            json!({ "code": code, "message": message.into() }),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("missing required field '{0}'")]
    MissingField(&'static str),
    #[error("field '{field}' has the wrong type")]
    WrongType { field: &'static str },
    #[error("unknown message type '{name}'")]
    UnknownType { name: String, seq: Option<u64> },
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Malformed(_) => "malformed",
            Self::MissingField(_) | Self::WrongType { .. } => "invalid_message",
            Self::UnknownType { .. } => "unknown_type",
        }
    }
}

/// Serialize as one line, newline-terminated.
pub fn encode(msg: &WireMessage) -> String {
    let mut line = serde_json::to_string(msg).expect("wire messages serialize");
    line.push('\n');
    line
}

pub fn decode(line: &str) -> Result<WireMessage, DecodeError> {
    let value: Value = serde_json::from_str(line.trim_end_matches(['\r', '\n']))
        .map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::Malformed("expected a JSON object".into()));
    };
    let seq = match obj.get("seq") {
        None => None,
        Some(v) => Some(v.as_u64().ok_or(DecodeError::WrongType { field: "seq" })?),
    };
    let name = match obj.get("type") {
        None => return Err(DecodeError::MissingField("type")),
        Some(v) => v.as_str().ok_or(DecodeError::WrongType { field: "type" })?.to_string(),
    };
    let kind = MessageKind::parse(&name).ok_or(DecodeError::UnknownType { name, seq })?;
    let seq = seq.ok_or(DecodeError::MissingField("seq"))?;
    let ts_ms = match obj.get("ts_ms") {
        None | Some(Value::Null) => 0,
        Some(v) => v.as_u64().ok_or(DecodeError::WrongType { field: "ts_ms" })?,
    };
    let payload = match obj.remove("payload") {
        None | Some(Value::Null) => empty_object(),
        Some(v @ Value::Object(_)) => v,
        Some(_) => return Err(DecodeError::WrongType { field: "payload" }),
    };
    Ok(WireMessage {
        kind,
        seq,
        ts_ms,
        payload,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqStatus {
    Fresh,
    /// Already seen on this connection: acknowledge again, do not re-apply.
    Duplicate,
    /// Below the highest seq seen and never seen before.
    Regression { previous: u64 },
}

/// Per-connection sequence bookkeeping and the acks already sent, so that
/// retransmissions get the original answer.
#[derive(Debug, Default)]
pub struct SeqTracker {
    highest: Option<u64>,
    seen: BTreeSet<u64>,
    acks: BTreeMap<u64, WireMessage>,
    flagged: bool,
}

/// Stored acks per connection before the oldest are forgotten.
const ACK_MEMORY: usize = 4096;

impl SeqTracker {
    pub fn classify(&self, seq: u64) -> SeqStatus {
        if self.seen.contains(&seq) {
            return SeqStatus::Duplicate;
        }
        match self.highest {
            Some(h) if seq < h => SeqStatus::Regression { previous: h },
            _ => SeqStatus::Fresh,
        }
    }

    /// Record an accepted message and the ack it produced.
    pub fn record(&mut self, seq: u64, ack: WireMessage) {
        self.seen.insert(seq);
        self.highest = Some(self.highest.map_or(seq, |h| h.max(seq)));
        self.acks.insert(seq, ack);
        while self.acks.len() > ACK_MEMORY {
            let (&oldest, _) = self.acks.iter().next().expect("non-empty");
            self.acks.remove(&oldest);
        }
    }

    pub fn previous_ack(&self, seq: u64) -> Option<&WireMessage> {
        self.acks.get(&seq)
    }

    pub fn flag(&mut self) {
        self.flagged = true;
    }

    pub fn flagged(&self) -> bool {
        self.flagged
    }
}
