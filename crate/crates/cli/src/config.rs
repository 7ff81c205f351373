use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use herdtrack_core::metrics::MetricsConfig;
use herdtrack_core::pipeline::{PipelineConfig, TrackingConfig};
use herdtrack_core::refine::RefineConfig;
use herdtrack_core::reid::ReidConfig;

/// Threshold grid for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start: 0.01,
            end: 0.60,
            step: 0.01,
        }
    }
}

/// File locations. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub inputs: Vec<PathBuf>,
    pub frames: Vec<PathBuf>,
    pub pen: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub refine: RefineConfig,
    pub reid: ReidConfig,
    pub metrics: MetricsConfig,
    pub sweep: SweepConfig,
    pub io: IoConfig,
}

impl RunConfig {
    pub fn tracking(&self) -> TrackingConfig {
        TrackingConfig {
            pipeline: self.pipeline.clone(),
            refine: self.refine.clone(),
            reid: self.reid.clone(),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.tracking().validate()?;
        let m = &self.metrics;
        if !(m.iou_threshold > 0.0 && m.iou_threshold <= 1.0) {
            bail!("metrics.iou_threshold must lie in (0, 1]");
        }
        let s = &self.sweep;
        if !(s.step > 0.0 && s.start <= s.end && s.start >= 0.0 && s.end <= 1.0) {
            bail!("sweep needs 0 <= start <= end <= 1 and a positive step");
        }
        Ok(())
    }
}

/// Sets `dotted.path` in a JSON object, creating intermediate objects.
/// The value is parsed as JSON when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key.path=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override `{assignment}` has an empty key");
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override `{path}`: `{key}` is not inside an object"))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| anyhow!("override `{path}` does not address an object field"))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Reads the optional config file, applies overrides and fills defaults.
pub fn resolve(file: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut root = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let mut v = serde_json::json!({"pipeline": {"scan_stride": 4}});
        apply_override(&mut v, "pipeline.visibility_window=30").unwrap();
        apply_override(&mut v, "metrics.identity_matching=by_id").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.pipeline.scan_stride, 4);
        assert_eq!(cfg.pipeline.visibility_window, 30);
        assert!(apply_override(&mut serde_json::json!({}), "novalue").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let v = serde_json::json!({"pipeline": {"scan_strid": 4}});
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
        let v = serde_json::json!({"extra": 1});
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }
}
