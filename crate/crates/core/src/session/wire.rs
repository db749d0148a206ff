//! Client/server messages: structured documents `{type, seq, payload}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::events::SessionEvent;

/// Server to client: one per logged event, in `seq` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    pub payload: Value,
}

impl From<&SessionEvent> for ServerMessage {
    fn from(e: &SessionEvent) -> Self {
        let mut v = e.to_value();
        let payload = v
            .as_object_mut()
            .and_then(|m| m.remove("payload"))
            .unwrap_or(Value::Null);
        ServerMessage {
            kind: e.kind().to_string(),
            seq: e.seq,
            payload,
        }
    }
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ClientMessage {
    UtteranceText {
        speaker: String,
        text: String,
    },
    /// A timed chunk of speech; exactly one of `text` or `audio_ref`.
    AudioEvent {
        speaker: String,
        start: f64,
        end: f64,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        audio_ref: Option<String>,
    },
    SelectChart {
        spec_id: String,
    },
    DeleteChart {
        spec_id: String,
    },
    MoveResize {
        spec_id: String,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    #[serde(default)]
    pub seq: Option<u64>,
    #[serde(flatten)]
    pub message: ClientMessage,
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, serde_json::Error> {
    serde_json::from_str::<ClientEnvelope>(text).map(|e| e.message)
}
