//! JSON system files.
//!
//! ```json
//! { "vars": ["x", "y"], "equations": ["x^2 + y^2 - 1", "x - y"],
//!   "box": [[-1, 1], [-1, 1]], "precision": 1e-6 }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{IntervalError, NBox};

use super::{FuncSystem, SystemError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub vars: Vec<String>,
    pub equations: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_b: Option<f64>,
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("malformed system file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("box has {got} dimensions but the system has {expected} variables")]
    BoxDimension { expected: usize, got: usize },
    #[error("invalid box: {0}")]
    Box(#[from] IntervalError),
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_system(sys: &FuncSystem, b: &NBox) -> Self {
        SystemFile {
            vars: sys.names().to_vec(),
            equations: sys.equations(),
            bounds: b.dims().iter().map(|d| [d.lo(), d.hi()]).collect(),
            precision: None,
            epsilon_b: None,
        }
    }

    pub fn system(&self) -> Result<FuncSystem, FileError> {
        Ok(FuncSystem::parse(&self.vars, &self.equations)?)
    }

    pub fn nbox(&self) -> Result<NBox, FileError> {
        if self.bounds.len() != self.vars.len() {
            return Err(FileError::BoxDimension {
                expected: self.vars.len(),
                got: self.bounds.len(),
            });
        }
        let pairs: Vec<(f64, f64)> = self.bounds.iter().map(|b| (b[0], b[1])).collect();
        Ok(NBox::from_bounds(&pairs)?)
    }

    /// Parsed system and search box.
    pub fn load(&self) -> Result<(FuncSystem, NBox), FileError> {
        Ok((self.system()?, self.nbox()?))
    }
}
