use std::path::Path;

use clap::ValueEnum;
use mfoc::linearization::{PlOptions, StabilityOptions};
use mfoc::model::ProblemSpec;
use mfoc::optimizer::PicardOptions;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Grid,
    Particle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentSettings {
    pub backend: Backend,
    pub steps: usize,
    pub h: f64,
    /// Particles per node for the particle backend.
    pub particles: usize,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self {
            backend: Backend::Grid,
            steps: 100,
            h: 1e-3,
            particles: 2000,
        }
    }
}

impl DescentSettings {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(CliError::config("descent.h", "must be finite and ≥ 0"));
        }
        if self.backend == Backend::Particle && self.particles == 0 {
            return Err(CliError::config("descent.particles", "must be at least 1"));
        }
        Ok(())
    }
}

/// The whole configuration document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solve: PicardOptions,
    pub descent: DescentSettings,
    pub stability: StabilityOptions,
    pub pl: PlOptions,
}

impl RunConfig {
    /// Reads the document (or starts from defaults), applies `--set`
    /// overrides and the seed, then deserializes with the offending key
    /// path reported on failure.
    pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::config("--config", format!("{} is not valid JSON: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        let defaults = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        for s in sets {
            apply_override(&mut doc, &defaults, s)?;
        }
        if let Some(seed) = seed {
            apply_override(&mut doc, &defaults, &format!("problem.seed={seed}"))?;
        }
        let run: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let key = e.path().to_string();
            CliError::config(if key == "." { "<root>".into() } else { key }, e.into_inner().to_string())
        })?;
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.problem.build::<f64>().map_err(|e| CliError::from_core("problem", e))?;
        self.solve.validate().map_err(|e| CliError::from_core("", e))?;
        self.descent.validate()?;
        if !(self.pl.radius.is_finite() && self.pl.radius >= 0.0) {
            return Err(CliError::config("pl.radius", "must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// `a.b.c=value`: the value is parsed as JSON, falling back to a string.
/// Sections absent from the document are seeded from `defaults` so a single
/// field can be overridden without restating its siblings.
fn apply_override(doc: &mut Value, defaults: &Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config("--set", format!("expected KEY=VALUE, got `{assignment}`")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config("--set", format!("malformed key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let mut fallback = Some(defaults);
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(parts[..i].join("."), "is not an object"))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        fallback = fallback.and_then(|d| d.get(part));
        node = map
            .entry(part.to_string())
            .or_insert_with(|| fallback.filter(|d| d.is_object()).cloned().unwrap_or_else(|| Value::Object(Map::new())));
    }
    unreachable!("loop returns on the last key")
}
