//! JSON text messages exchanged with browser clients.

use serde::{Deserialize, Serialize};

pub const WIRE_SCHEMA: &str = "co-maze-wire/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Player,
    Spectator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialEventKind {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    Welcome { role: Role },
    /// Sent once per control frame.
    State {
        frame: usize,
        x: f64,
        y: f64,
        theta: f64,
        phi: f64,
        trial: usize,
        score_so_far: u32,
        captured: bool,
    },
    TrialEvent {
        kind: TrialEventKind,
        beeps: u8,
        trial: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        score: Option<u32>,
    },
    SessionEvent { block: usize, curve: Vec<u32> },
}

impl ServerMessage {
    pub fn trial_start(trial: usize) -> Self {
        Self::TrialEvent {
            kind: TrialEventKind::Start,
            beeps: 3,
            trial,
            score: None,
        }
    }

    pub fn trial_end(trial: usize, score: u32) -> Self {
        Self::TrialEvent {
            kind: TrialEventKind::End,
            beeps: 1,
            trial,
            score: Some(score),
        }
    }
}

#[derive(Serialize)]
struct OutEnvelope<'a> {
    schema: &'a str,
    seq: u64,
    #[serde(flatten)]
    msg: &'a ServerMessage,
}

/// Serialises `msg` with the schema tag and a connection's sequence number.
pub fn encode(msg: &ServerMessage, seq: u64) -> String {
    serde_json::to_string(&OutEnvelope {
        schema: WIRE_SCHEMA,
        seq,
        msg,
    })
    .expect("server messages serialise")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InEnvelope<M> {
    pub schema: String,
    pub seq: u64,
    #[serde(flatten)]
    pub msg: M,
}

pub fn decode_server(text: &str) -> Result<InEnvelope<ServerMessage>, String> {
    decode(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlAction {
    Start,
    Pause,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command { phi_human: f64 },
    Control { action: ControlAction },
}

pub fn encode_client(msg: &ClientMessage, seq: u64) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        schema: &'a str,
        seq: u64,
        #[serde(flatten)]
        msg: &'a ClientMessage,
    }
    serde_json::to_string(&Out {
        schema: WIRE_SCHEMA,
        seq,
        msg,
    })
    .expect("client messages serialise")
}

pub fn decode_client(text: &str) -> Result<InEnvelope<ClientMessage>, String> {
    decode(text)
}

fn decode<M: for<'de> Deserialize<'de>>(text: &str) -> Result<InEnvelope<M>, String> {
    let env: InEnvelope<M> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if env.schema != WIRE_SCHEMA {
        return Err(format!("unsupported schema {:?}", env.schema));
    }
    Ok(env)
}
