//! Robustness bound catalog and numerical verification.
//!
//! [`bound_catalog`] evaluates every right-hand side from `(n, ε₀, ε₁, ε₂)`;
//! [`ledger_verify`] measures the matching left-hand sides on a device and
//! reports margins.

pub mod catalog;
pub mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::strategies::DeviceError;

pub use catalog::{
    bound_catalog, catalog_delta, delta_log_slope, final_robustness, state_estimate_bound, CatalogEntry,
    Relation, Robustness,
};
pub use verify::{chain_permutations, exact_epsilons, ledger_verify, CrossCheck, VerifyOptions};

/// An entry passes when `margin ≥ -PASS_TOLERANCE`.
pub const PASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("n = {0} is not 3 and not 3 mod 4")]
    UnsupportedN(usize),
    #[error("deficit {0} outside [0, 2]")]
    Epsilon(f64),
    #[error("n = {0} is beyond the dense engine")]
    TooLarge(usize),
    #[error("device: {0}")]
    Device(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl From<DeviceError> for LedgerError {
    fn from(e: DeviceError) -> Self {
        LedgerError::Device(e.to_string())
    }
}

/// One row of a report. Measured fields are absent for catalog-only reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub relation: Relation,
    pub name: String,
    pub summary: bool,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    pub instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_instance: Option<String>,
    /// Largest `|analytic − dense|` over the cross-checked instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub eps: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_worst: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<String>,
    pub entries: Vec<BoundEntry>,
    pub delta: f64,
    pub scaling_note: String,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Catalog-only report (right-hand sides, no measurements).
    pub fn from_catalog(n: usize, eps: [f64; 3]) -> Result<Self, LedgerError> {
        let cat = bound_catalog(n, eps)?;
        let delta = catalog_delta(&cat);
        let worst = eps.iter().copied().fold(0.0, f64::max);
        Ok(BoundReport {
            n,
            eps,
            eps_worst: None,
            route: None,
            cross_check: None,
            entries: cat
                .into_iter()
                .map(|c| BoundEntry {
                    relation: c.relation,
                    name: c.name,
                    summary: c.summary,
                    rhs: c.rhs,
                    lhs: None,
                    margin: None,
                    pass: None,
                    instances: 0,
                    worst_instance: None,
                    cross_check_diff: None,
                })
                .collect(),
            delta,
            scaling_note: final_robustness(n, worst)?.note,
            notes: vec![catalog::ISOMETRY_CAVEAT.to_string()],
        })
    }

    /// False when any measured entry fails.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass != Some(false))
    }

    pub fn entry(&self, r: Relation) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.relation == r)
    }

    pub fn min_margin(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.margin).min_by(f64::total_cmp)
    }
}
