//! JSON run configurations.
//!
//! A config file holds one of three shapes, told apart by their top-level keys:
//! a full run file `{"scenario": .., "sim": ..}`, a bare scenario, or the
//! `.header.json` sidecar written next to every recorded run.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use upsc_core::record::RecordHeader;
use upsc_core::{ScenarioSpec, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            sim: SimConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| anyhow!("invalid scenario: {e}"))?;
        self.sim.validate().map_err(|e| anyhow!("invalid sim config: {e}"))?;
        Ok(())
    }
}

/// Deserializes `T`, naming the offending field on failure.
fn parse_at<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            anyhow!("malformed {what}: {inner}")
        } else {
            anyhow!("malformed {what}: field `{path}`: {inner}")
        }
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let obj = value
        .as_object()
        .ok_or_else(|| anyhow!("config must be a JSON object"))?;
    let cfg = if obj.contains_key("status") && obj.contains_key("version") {
        let h: RecordHeader = parse_at(text, "run header")?;
        RunConfig {
            scenario: h.scenario,
            sim: h.config,
        }
    } else if obj.contains_key("scenario") {
        parse_at(text, "run config")?
    } else {
        RunConfig::new(parse_at(text, "scenario")?)
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

pub fn to_json(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("run config serializes")
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, to_json(cfg)).with_context(|| format!("writing {}", path.display()))
}
