//! Persisted experiment records.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

/// Natural-log values with magnitude above this are emitted in log form only.
pub const LOG_EMIT_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Reset,
    Clumsy,
    Careless,
    Combined,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Reset => "reset",
            Model::Clumsy => "clumsy",
            Model::Careless => "careless",
            Model::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reset" => Ok(Model::Reset),
            "clumsy" => Ok(Model::Clumsy),
            "careless" => Ok(Model::Careless),
            "combined" => Ok(Model::Combined),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// One named output number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputValue {
    Number(f64),
    /// Non-finite value spelled out, e.g. `"-inf"`.
    Tagged(String),
    /// A natural log too large in magnitude to exponentiate.
    Log { ln: f64, log_space: bool },
}

impl OutputValue {
    pub fn number(x: f64) -> Self {
        if x.is_finite() {
            OutputValue::Number(x)
        } else {
            OutputValue::Tagged(tag(x))
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            OutputValue::Number(x) => Some(*x),
            OutputValue::Tagged(s) => match s.as_str() {
                "-inf" => Some(f64::NEG_INFINITY),
                "inf" => Some(f64::INFINITY),
                _ => None,
            },
            OutputValue::Log { .. } => None,
        }
    }
}

fn tag(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub model: Model,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub outputs: BTreeMap<String, OutputValue>,
    /// True when any output is carried in log form only.
    pub log_space: bool,
    pub tool_version: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn new(model: Model, seed: u64, timestamp: impl Into<String>) -> Self {
        ExperimentRecord {
            schema_version: SCHEMA_VERSION,
            model,
            params: BTreeMap::new(),
            seed,
            outputs: BTreeMap::new(),
            log_space: false,
            tool_version: crate::VERSION.to_string(),
            timestamp: timestamp.into(),
            samples: None,
            error: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn put(&mut self, key: &str, x: f64) {
        self.outputs.insert(key.to_string(), OutputValue::number(x));
    }

    /// Stores `log_<key>` and, when `|ln| <= 700`, the linear `key`;
    /// otherwise `key` holds the log form flagged as such.
    pub fn put_log(&mut self, key: &str, ln: f64) {
        self.outputs.insert(format!("log_{key}"), OutputValue::number(ln));
        let value = if ln.is_finite() && ln.abs() > LOG_EMIT_LIMIT {
            self.log_space = true;
            OutputValue::Log { ln, log_space: true }
        } else {
            OutputValue::number(ln.exp())
        };
        self.outputs.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.outputs.get(key).and_then(OutputValue::as_f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
