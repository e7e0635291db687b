//! Run configuration, schema version 1:
//!
//! ```toml
//! version = 1
//! seed = 7                   # optional, default 0
//! out = "reports"            # optional, default "wavecert-out"
//! tolerance_scale = 1.0      # optional
//! jobs = 4                   # optional
//!
//! [model]
//! builtin = "cycle:64"       # or: file = "model.toml"
//!
//! [[checks]]
//! name = "davies_gaffney"
//! [checks.params]            # optional overrides of the check defaults
//! rho = [2.0, 4.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wavecert::{Error, Result};

use crate::model::{builtin, from_file, Model};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl ModelSource {
    /// Relative model files resolve against `base`.
    pub fn resolve(&self, seed: u64, base: &Path) -> Result<Model> {
        match (&self.builtin, &self.file) {
            (Some(b), None) => builtin(b, seed),
            (None, Some(f)) => from_file(&if f.is_absolute() { f.clone() } else { base.join(f) }),
            _ => Err(Error::Validation("[model] needs exactly one of `builtin` or `file`".into())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub tolerance_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub model: ModelSource,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

fn one() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if c.version != CONFIG_VERSION {
            return Err(Error::Parse(format!("config version {} is not supported (expected {CONFIG_VERSION})", c.version)));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Validation(format!("config file {} does not exist", path.display())));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
