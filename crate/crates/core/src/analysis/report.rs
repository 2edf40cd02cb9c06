//! JSON records for diagnostic results.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One diagnostic result: the operation, a digest of its inputs, the
/// estimate with an optional interval, and the seed used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub operation: String,
    pub inputs_digest: String,
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(operation: &str, inputs: &impl Serialize, estimate: f64, ci: Option<(f64, f64)>, seed: Option<u64>) -> Result<Self> {
        Ok(Self { operation: operation.to_string(), inputs_digest: digest(inputs)?, estimate, ci, seed })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Hex SHA-256 of the JSON encoding of `inputs`.
pub fn digest(inputs: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(inputs).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
