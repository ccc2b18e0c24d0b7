//! Line-delimited JSON messages exchanged with charging stations.
//!
//! Every message is one JSON object per line with a `type` tag, so station
//! firmware can parse a stream incrementally and skip unknown lines.

use lac::{SessionId, Slot, SocketId};
use plant::MeterReading;
use serde::{Deserialize, Serialize};

/// Session granted: the station may close the contactor for this vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthMsg {
    pub session: SessionId,
    pub socket: SocketId,
    pub rfid: String,
    pub slot: Slot,
}

/// Charging plan push: whole-ampere current limits per slot from
/// `from_slot` on, plus the unquantized setpoints they were derived from
/// (useful for diagnostics and idealized-hardware experiments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMsg {
    pub session: SessionId,
    pub socket: SocketId,
    pub from_slot: Slot,
    pub amps: Vec<u32>,
    pub setpoints_kw: Vec<f64>,
}

/// One metering sample travelling back from a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMsg {
    pub reading: MeterReading,
}

/// Session closed: the station must stop charging and release the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminateMsg {
    pub session: SessionId,
    pub socket: SocketId,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Auth(AuthMsg),
    Schedule(ScheduleMsg),
    Report(ReportMsg),
    Terminate(TerminateMsg),
}

/// Renders messages as line-delimited JSON (one object per line).
pub fn encode_lines(messages: &[WireMessage]) -> String {
    let mut out = String::new();
    for msg in messages {
        out.push_str(&serde_json::to_string(msg).expect("wire messages serialize"));
        out.push('\n');
    }
    out
}

/// Parses line-delimited JSON produced by [`encode_lines`]; empty lines are
/// skipped.
pub fn decode_lines(text: &str) -> Result<Vec<WireMessage>, serde_json::Error> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
