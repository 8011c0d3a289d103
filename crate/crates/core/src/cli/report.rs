//! Run report written as `report.json`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: Value,
    pub metrics: Map<String, Value>,
    pub seeds: Map<String, Value>,
    pub version: String,
}

impl Report {
    pub fn new(experiment: &str, config: Value, seed: u64) -> Self {
        let mut seeds = Map::new();
        seeds.insert("seed".into(), seed.into());
        Self {
            experiment: experiment.to_string(),
            config,
            metrics: Map::new(),
            seeds,
            version: VERSION.to_string(),
        }
    }

    pub fn metric(&mut self, name: &str, value: impl Into<Value>) -> &mut Self {
        self.metrics.insert(name.to_string(), value.into());
        self
    }

    /// Stores `value`, or `null` plus a `<name>_note` when it is an error.
    pub fn metric_or_note(&mut self, name: &str, value: crate::Result<f64>) -> &mut Self {
        match value {
            Ok(v) => self.metric(name, v),
            Err(e) => {
                self.metric(name, Value::Null);
                self.metric(&format!("{name}_note"), e.to_string())
            }
        }
    }
}
