//! Config hash + master seed stamped into every pipeline artifact.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

const CSV_PREFIX: &str = "# rvl ";

impl Provenance {
    /// Leading comment line for CSV artifacts.
    pub fn csv_line(&self) -> String {
        format!(
            "{CSV_PREFIX}config_hash={} seed={}\n",
            self.config_hash, self.seed
        )
    }

    /// Prefix `body` with the provenance comment.
    pub fn stamp_csv(&self, body: &str) -> String {
        let mut out = self.csv_line();
        out.push_str(body);
        out
    }

    /// Read the provenance comment from the first line of a stamped CSV.
    pub fn from_csv(text: &str) -> Option<Self> {
        let first = text.lines().next()?;
        let rest = first.strip_prefix(CSV_PREFIX)?;
        let mut hash = None;
        let mut seed = None;
        for part in rest.split_whitespace() {
            if let Some(h) = part.strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            } else if let Some(s) = part.strip_prefix("seed=") {
                seed = s.parse().ok();
            }
        }
        Some(Self {
            config_hash: hash?,
            seed: seed?,
        })
    }
}

/// Drop a leading provenance comment, if any.
pub fn strip_csv_stamp(text: &str) -> &str {
    if text.starts_with(CSV_PREFIX) {
        text.split_once('\n').map(|(_, rest)| rest).unwrap_or("")
    } else {
        text
    }
}
