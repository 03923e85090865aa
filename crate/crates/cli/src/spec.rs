//! RunSpec: the JSON description of one command invocation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Solution id with parameter overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// One λ or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    One(f64),
    Many(Vec<f64>),
}

impl LambdaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaSpec::One(v) => vec![*v],
            LambdaSpec::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub kind: String,
    pub path: String,
}

/// Every field but `command` is optional; commands fill in their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSpec>,
    /// (xmin, xmax, ymin, ymax)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 4]>,
    /// (nx, ny)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    /// Named thresholds, overriding each check's default.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Named numeric settings of a command (step counts, CFL, ...).
    #[serde(default)]
    pub settings: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    /// Reports read by `report`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

impl RunSpec {
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn setting(&self, name: &str, default: f64) -> f64 {
        self.settings.get(name).copied().unwrap_or(default)
    }

    pub fn output(&self, kind: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.kind == kind).map(|o| o.path.as_str())
    }
}
