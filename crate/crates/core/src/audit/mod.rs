//! Economic-property measurements: score monotonicity, payment error and
//! incentive compatibility.

pub mod isic;
pub mod monotonicity;
pub mod per;
pub mod report;
pub mod spearman;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use isic::{i_sic, paired_unpaired_variance, IsicReport};
pub use monotonicity::{
    bid_grid, monotonicity_metric, monotonicity_of, test_states, MonotonicityReport, TestState,
};
pub use per::{payment_error_rate, percentile, PerReport};
pub use report::{audit_actor, format_table, AuditRow};
pub use spearman::{average_ranks, spearman_rho, Rho};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Bid-grid cardinality for the monotonicity statistic.
    pub grid_size: usize,
    /// Grid spans `[grid_lo * b, grid_hi * b]` around each observed bid.
    pub grid_lo: f64,
    pub grid_hi: f64,
    /// Request rounds whose candidates form the monotonicity test set.
    pub mono_rounds: usize,
    /// Request rounds audited for payment error.
    pub per_rounds: usize,
    pub alpha: f64,
    pub isic_samples: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            grid_size: 20,
            grid_lo: 0.1,
            grid_hi: 10.0,
            mono_rounds: 250,
            per_rounds: 2_000,
            alpha: 0.01,
            isic_samples: 100_000,
            seed: 4_242,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.grid_size < 2 {
            problems.push("grid_size must be at least 2".to_string());
        }
        if !(self.grid_lo > 0.0
            && self.grid_lo < 1.0
            && self.grid_hi > 1.0
            && self.grid_hi.is_finite())
        {
            problems.push("grid range must satisfy 0 < grid_lo < 1 < grid_hi".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push("alpha must lie in (0, 1)".into());
        }
        if self.mono_rounds == 0 || self.per_rounds == 0 || self.isic_samples == 0 {
            problems.push("sample counts must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
