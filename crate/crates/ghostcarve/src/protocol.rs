//! Newline-delimited JSON messages between the engine and a human-loop UI.
//!
//! Unknown fields are ignored; unknown `type`s fail to parse and are answered
//! with a `reject`.

use serde::{Deserialize, Serialize};

use crate::experiment::TYPED_MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Stimulus { pattern_id: usize, level: f64, freq_hz: f64, dwell_s: f64 },
    Response { pattern_id: usize, value: i64 },
    Heartbeat,
    Resume { checkpoint: String },
    /// Engine → UI: the last message was not accepted.
    Reject {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern_id: Option<usize>,
    },
}

impl Message {
    pub fn parse(line: &str) -> Result<Self, String> {
        serde_json::from_str(line.trim()).map_err(|e| e.to_string())
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages always encode");
        s.push('\n');
        s
    }

    pub fn reject(reason: impl Into<String>, pattern_id: Option<usize>) -> Self {
        Message::Reject { reason: reason.into(), pattern_id }
    }
}

/// Typed responses must lie on the 0–15 scale.
pub fn check_value(value: i64) -> Result<u8, String> {
    u8::try_from(value)
        .ok()
        .filter(|&v| v <= TYPED_MAX)
        .ok_or_else(|| format!("value {value} outside 0..={TYPED_MAX}"))
}
