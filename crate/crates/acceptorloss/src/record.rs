use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Named result value. Non-finite numbers are stored as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Output {
    Flag(bool),
    Number(f64),
    Numbers(Vec<f64>),
    Text(String),
}

impl From<f64> for Output {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Output::Number(v)
        } else {
            Output::Text(v.to_string())
        }
    }
}

impl From<bool> for Output {
    fn from(v: bool) -> Self {
        Output::Flag(v)
    }
}

impl From<&str> for Output {
    fn from(v: &str) -> Self {
        Output::Text(v.to_string())
    }
}

impl From<Vec<f64>> for Output {
    fn from(v: Vec<f64>) -> Self {
        Output::Numbers(v)
    }
}

impl Output {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Output::Number(v) => Some(*v),
            Output::Text(t) => t.parse().ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    pub kind: String,
    pub message: String,
}

impl From<&CliError> for RecordError {
    fn from(e: &CliError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub coordinates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub run_id: String,
    pub config_hash: String,
    pub command: String,
    pub toolkit_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` wins when set.
    pub timestamp_unix_s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_point: Option<SweepPoint>,
    pub outputs: BTreeMap<String, Output>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub curves: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RecordError>,
}

pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

impl ResultRecord {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let hash = config.hash();
        Self {
            run_id: hash[..16].to_string(),
            config_hash: hash,
            command: command.to_string(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            timestamp_unix_s: timestamp(),
            sweep_point: None,
            outputs: BTreeMap::new(),
            warnings: Vec::new(),
            curves: Vec::new(),
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}
