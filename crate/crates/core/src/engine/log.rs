use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::models::LogColumn;
use crate::vehicle::VehicleSpec;

/// Leading columns shared by every model, in order.
pub const BASE_COLUMNS: [(&str, bool); 14] = [
    ("t", false),
    ("x", false),
    ("y", true),
    ("heading", true),
    ("vx", false),
    ("vy", true),
    ("yaw_rate", true),
    ("lean", true),
    ("steer_intent", true),
    ("speed_intent", false),
    ("brake_intent", false),
    ("cmd_steer", true),
    ("cmd_longitudinal", false),
    ("cmd_brake", false),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub vehicle: String,
    /// SHA-256 of the resolved vehicle spec.
    pub spec_hash: String,
    pub dt: f64,
    /// Runs use no random state; equal inputs give bit-identical logs.
    pub deterministic: bool,
}

/// Time-aligned record of a run in the internal (y-left) convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub columns: Vec<String>,
    /// Columns whose sign flips at the y-right boundary.
    pub lateral: Vec<bool>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: RunMetadata,
    /// Set when an integration fault truncated the run.
    pub fault: Option<String>,
}

/// Hex SHA-256 over the spec's debug form, which prints floats exactly.
pub fn spec_hash(spec: &VehicleSpec) -> String {
    let digest = Sha256::digest(format!("{spec:?}").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunLog {
    pub fn new(metadata: RunMetadata, model_columns: &[LogColumn]) -> Self {
        let (mut columns, mut lateral): (Vec<String>, Vec<bool>) =
            BASE_COLUMNS.iter().map(|&(n, l)| (n.to_string(), l)).unzip();
        for c in model_columns {
            columns.push(c.name.clone());
            lateral.push(c.lateral);
        }
        Self { columns, lateral, rows: Vec::new(), metadata, fault: None }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Rows with lateral columns negated.
    pub fn mirrored_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(&self.lateral).map(|(&v, &lat)| if lat { -v } else { v }).collect())
            .collect()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.fault = None;
    }
}
