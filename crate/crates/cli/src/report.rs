use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gpamr_core::GpConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Machine-readable summary of one command. Everything except `timings` is
/// reproduced exactly by a rerun with the same flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// The effective flags after any `--config` override.
    pub args: Value,
    pub gp_config: Option<GpConfig>,
    pub metrics: BTreeMap<String, Value>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(command: &str, args: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            args: serde_json::to_value(args)?,
            gp_config: None,
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn metric(&mut self, key: &str, v: impl Serialize) -> anyhow::Result<()> {
        self.metrics.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn emit(&self, dir: Option<&Path>) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        if let Some(d) = dir {
            std::fs::write(d.join("report.json"), &text)?;
        }
        println!("{text}");
        Ok(())
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}
