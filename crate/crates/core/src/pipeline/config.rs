use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blend::BlendMode;
use crate::restore::{RestoreError, RestorerParams, RestorerRegistry};
use crate::route::{RouterConfig, DEFAULT_BAND_LOW, DEFAULT_THETA};
use crate::synth::DegradationKind;

use super::PipelineError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    pub mode: BlendMode,
}

/// Everything `run`/`bench` need. Loaded from TOML; every key can be
/// overridden with its dotted name (`blend.mode`, `restorers.deblurring.amount`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: Option<PathBuf>,
    pub theta: f64,
    pub band_low: f64,
    pub source: Option<String>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub seed: u64,
    /// Frames larger than this are reduced before feature extraction.
    pub working_size: [usize; 2],
    pub blend: BlendConfig,
    pub restorers: RestorerParams,
    /// Kind key (`deraining`, `super_resolution`, ...) to command template.
    pub external: BTreeMap<String, String>,
    pub external_timeout_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: None,
            theta: DEFAULT_THETA,
            band_low: DEFAULT_BAND_LOW,
            source: None,
            out: None,
            log: None,
            jobs: 0,
            seed: 0,
            working_size: [256, 256],
            blend: BlendConfig::default(),
            restorers: RestorerParams::default(),
            external: BTreeMap::new(),
            external_timeout_ms: 10_000,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::load_with_overrides(Some(path), &[])
    }

    /// Reads `path` (if any), applies `key=value` overrides, validates.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| PipelineError::Io(p.to_path_buf(), e))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_dotted(&mut table, key, parse_value(value))?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.router()?;
        if self.working_size.iter().any(|&d| d < crate::features::MIN_SIDE) {
            return Err(PipelineError::Config(format!("working_size {:?} below 16", self.working_size)));
        }
        self.registry().map(|_| ())
    }

    pub fn router(&self) -> Result<RouterConfig, PipelineError> {
        RouterConfig::new(self.theta, self.band_low).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn registry(&self) -> Result<RestorerRegistry, PipelineError> {
        let mut reg = RestorerRegistry::new(self.restorers.clone());
        let timeout = std::time::Duration::from_millis(self.external_timeout_ms);
        for (key, template) in &self.external {
            reg = reg
                .set_external_with_timeout(kind_from_key(key)?, template, timeout)
                .map_err(|e: RestoreError| PipelineError::Config(e.to_string()))?;
        }
        Ok(reg)
    }

    pub fn thread_count(&self) -> usize {
        if self.jobs == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            self.jobs
        }
    }
}

fn kind_from_key(key: &str) -> Result<DegradationKind, PipelineError> {
    key.parse().map_err(|_| PipelineError::Config(format!("unknown degradation kind {key:?}")))
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), PipelineError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PipelineError::Config(format!("bad key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| PipelineError::Config(format!("{key:?}: {part:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
