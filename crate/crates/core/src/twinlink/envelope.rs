use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvelopeKind {
    TrafficUpdate,
    EvalRequest,
    EvalResult,
    ModelRequest,
    ModelArtifactMsg,
    BenchPing,
    BenchPong,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 7] = [
        EnvelopeKind::TrafficUpdate,
        EnvelopeKind::EvalRequest,
        EnvelopeKind::EvalResult,
        EnvelopeKind::ModelRequest,
        EnvelopeKind::ModelArtifactMsg,
        EnvelopeKind::BenchPing,
        EnvelopeKind::BenchPong,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvelopeKind::TrafficUpdate => "TrafficUpdate",
            EnvelopeKind::EvalRequest => "EvalRequest",
            EnvelopeKind::EvalResult => "EvalResult",
            EnvelopeKind::ModelRequest => "ModelRequest",
            EnvelopeKind::ModelArtifactMsg => "ModelArtifactMsg",
            EnvelopeKind::BenchPing => "BenchPing",
            EnvelopeKind::BenchPong => "BenchPong",
        }
    }
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvelopeKind {
    type Err = EnvelopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EnvelopeError::UnknownKind(s.to_owned()))
    }
}

/// Application message carried over the link.
///
/// `seq` is assigned per (sender, topic) and `sent_at` (microseconds since
/// the Unix epoch) when the link publishes the envelope, not when it is
/// built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageEnvelope {
    pub topic: String,
    pub seq: u64,
    pub sent_at: u64,
    pub kind: EnvelopeKind,
    pub payload: Vec<u8>,
}

impl MessageEnvelope {
    pub fn new(topic: impl Into<String>, kind: EnvelopeKind, payload: Vec<u8>) -> Self {
        Self {
            topic: topic.into(),
            seq: 0,
            sent_at: 0,
            kind,
            payload,
        }
    }

    /// Build an envelope whose payload is a JSON document.
    pub fn json<T: Serialize>(
        topic: impl Into<String>,
        kind: EnvelopeKind,
        body: &T,
    ) -> Result<Self, EnvelopeError> {
        let payload = serde_json::to_vec(body).map_err(|e| EnvelopeError::Json(e.to_string()))?;
        Ok(Self::new(topic, kind, payload))
    }

    pub fn payload_json<T: serde::de::DeserializeOwned>(&self) -> Result<T, EnvelopeError> {
        serde_json::from_slice(&self.payload).map_err(|e| EnvelopeError::Json(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("envelope is not JSON: {0}")]
    Json(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("key {0:?} has the wrong type")]
    WrongType(&'static str),
    #[error("unknown envelope kind {0:?}")]
    UnknownKind(String),
    #[error("payload_b64 is not valid base64")]
    InvalidBase64,
}

#[derive(Serialize)]
struct Wire<'a> {
    topic: &'a str,
    seq: u64,
    sent_at: u64,
    kind: &'static str,
    payload_b64: String,
}

/// Canonical JSON with key order topic, seq, sent_at, kind, payload_b64.
pub fn encode_envelope(e: &MessageEnvelope) -> Vec<u8> {
    let wire = Wire {
        topic: &e.topic,
        seq: e.seq,
        sent_at: e.sent_at,
        kind: e.kind.as_str(),
        payload_b64: B64.encode(&e.payload),
    };
    serde_json::to_vec(&wire).expect("envelope serialization is infallible")
}

pub fn decode_envelope(bytes: &[u8]) -> Result<MessageEnvelope, EnvelopeError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| EnvelopeError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(EnvelopeError::WrongType("<root>"))?;
    let field = |k: &'static str| obj.get(k).ok_or(EnvelopeError::MissingKey(k));
    let as_str = |k: &'static str| -> Result<&str, EnvelopeError> {
        field(k)?.as_str().ok_or(EnvelopeError::WrongType(k))
    };
    let as_u64 = |k: &'static str| -> Result<u64, EnvelopeError> {
        field(k)?.as_u64().ok_or(EnvelopeError::WrongType(k))
    };
    let topic = as_str("topic")?.to_owned();
    let seq = as_u64("seq")?;
    let sent_at = as_u64("sent_at")?;
    let kind = as_str("kind")?.parse()?;
    let payload = B64
        .decode(as_str("payload_b64")?)
        .map_err(|_| EnvelopeError::InvalidBase64)?;
    Ok(MessageEnvelope {
        topic,
        seq,
        sent_at,
        kind,
        payload,
    })
}
