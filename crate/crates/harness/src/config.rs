//! Experiment configuration: a JSON document plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tvsnet::network::{GradientMode, Optimizer};
use tvsnet::{Activation, SpaceDescriptor, SpaceKind};

use crate::error::HarnessError;
use crate::targets::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    Train,
    Construct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub train: usize,
    pub validation: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples {
            train: 8192,
            validation: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructSettings {
    pub dict_start: usize,
    pub dict_cap: usize,
    pub ridge: f64,
    /// Size of the sampled sphere used to normalize dictionary functionals.
    pub sphere_points: Option<usize>,
    pub mollifier_delta: f64,
    pub mollifier_nodes: usize,
    pub max_degree: usize,
    pub training_fallback: bool,
    pub hull_margin: f64,
    /// Admissible threshold interval; the whole line when absent.
    pub thresholds: Option<[f64; 2]>,
}

impl Default for ConstructSettings {
    fn default() -> Self {
        ConstructSettings {
            dict_start: 16,
            dict_cap: 2048,
            ridge: 1e-10,
            sphere_points: None,
            mollifier_delta: 0.25,
            mollifier_nodes: 4096,
            max_degree: 16,
            training_fallback: true,
            hull_margin: 0.1,
            thresholds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: Option<usize>,
    pub optimizer: Optimizer,
    pub gradient_mode: GradientMode,
    pub init_scale: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: 0.05,
            iterations: 2000,
            batch_size: None,
            optimizer: Optimizer::Momentum { beta: 0.9 },
            gradient_mode: GradientMode::Smooth,
            init_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub budgets: Option<Vec<f64>>,
    pub widths: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub space: SpaceKind,
    #[serde(default = "one")]
    pub radius: f64,
    pub activation: String,
    pub target: TargetSpec,
    pub route: RouteKind,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub width: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub construct: ConstructSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub parallel: bool,
    /// Adds wall-clock fields to records; off keeps output byte-reproducible.
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}

fn one() -> f64 {
    1.0
}

fn usage(path: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage {
        path: path.into(),
        message: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| usage("", format!("malformed JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            usage(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_activation(&self) -> Result<Activation, HarnessError> {
        self.activation.parse().map_err(|e: tvsnet::Error| usage("activation", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let space = SpaceDescriptor::new(self.space.clone()).map_err(|e| usage("space", e.to_string()))?;
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(usage("radius", "must be positive"));
        }
        self.parse_activation()?;
        self.target.validate(&space, "target")?;
        match self.route {
            RouteKind::Construct => {
                let b = self.budget.ok_or_else(|| usage("budget", "the construct route needs a budget"))?;
                if !(b.is_finite() && b > 0.0) {
                    return Err(usage("budget", "must be positive"));
                }
            }
            RouteKind::Train => {
                let w = self.width.ok_or_else(|| usage("width", "the train route needs a width"))?;
                if w == 0 {
                    return Err(usage("width", "must be at least 1"));
                }
            }
        }
        if self.samples.train == 0 {
            return Err(usage("samples.train", "must be at least 1"));
        }
        if self.samples.validation == 0 {
            return Err(usage("samples.validation", "must be at least 1"));
        }
        let c = &self.construct;
        if c.dict_start == 0 || c.dict_cap < c.dict_start {
            return Err(usage("construct.dict_cap", "need 1 <= dict_start <= dict_cap"));
        }
        if !(c.ridge.is_finite() && c.ridge >= 0.0) {
            return Err(usage("construct.ridge", "must be finite and >= 0"));
        }
        if c.sphere_points == Some(0) {
            return Err(usage("construct.sphere_points", "must be at least 1"));
        }
        if let Some([lo, hi]) = c.thresholds {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(usage("construct.thresholds", "need lo < hi"));
            }
        }
        let t = &self.train;
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
            return Err(usage("train.learning_rate", "must be positive"));
        }
        if t.iterations == 0 {
            return Err(usage("train.iterations", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if matches!(&sweep.budgets, Some(v) if v.is_empty()) {
                return Err(usage("sweep.budgets", "sweep lists must be nonempty"));
            }
            if matches!(&sweep.widths, Some(v) if v.is_empty()) {
                return Err(usage("sweep.widths", "sweep lists must be nonempty"));
            }
            if matches!(&sweep.seeds, Some(v) if v.is_empty()) {
                return Err(usage("sweep.seeds", "sweep lists must be nonempty"));
            }
            if let Some(b) = &sweep.budgets {
                if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(usage("sweep.budgets", "budgets must be positive"));
                }
            }
            if matches!(&sweep.widths, Some(v) if v.contains(&0)) {
                return Err(usage("sweep.widths", "widths must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Applies `a.b.c=value`; the value is read as JSON when it parses, else as a
/// string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| usage("", format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(usage(key, "empty override key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(usage(&parts[..i].join("."), "cannot descend into a non-object")),
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}
