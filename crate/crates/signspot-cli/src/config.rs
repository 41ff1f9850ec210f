//! Optional JSON config file: a flat object keyed by long flag names that
//! supplies defaults; command-line flags always win.

use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Every key any command accepts. Unknown config keys are usage errors so
/// typos do not pass silently.
const KNOWN_KEYS: &[&str] = &[
    "acc-iou-threshold",
    "acc-thresholds",
    "beam-width",
    "beta",
    "delta-f",
    "delta-l",
    "epsilon",
    "insertion-bias",
    "instances",
    "iou-thresholds",
    "jobs",
    "lambda",
    "lm-weight",
    "max-boxes",
    "max-n",
    "max-proposals",
    "min-confidence",
    "n",
    "nms-iou",
    "order",
    "recall-levels",
    "seed",
    "smooth-window",
    "smoothing-k",
    "tolerance",
    "top",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: serde_json::Map<String, Value>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let Value::Object(values) = value else {
            return Err(CliError::Usage(format!(
                "config {} must be a JSON object",
                path.display()
            )));
        };
        for key in values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config {}: unknown key {key:?}",
                    path.display()
                )));
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a number"))),
        }
    }

    pub fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a nonnegative integer"))),
        }
    }

    pub fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a nonnegative integer"))),
        }
    }

    pub fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a string"))),
        }
    }
}

/// CLI flag if given, else config value, else the built-in default.
pub fn resolve<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Comma-separated threshold list, e.g. "0.1,0.3,0.5".
pub fn parse_threshold_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("invalid threshold {part:?}: {e}")))
        })
        .collect()
}
