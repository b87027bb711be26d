use serde::Serialize;

use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Converged,
    IterationBudget,
    TimeBudget,
    LeftSafeRegion,
    Diverged,
}

/// Metrics at one recorded iterate.
///
/// For retraction baselines `psi_norm` holds the Riemannian gradient norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub k: usize,
    pub time_s: f64,
    pub f_val: f64,
    /// `‖h‖_F` summed over blocks in quadrature; per block in `h_blocks`.
    pub h_norm: f64,
    pub psi_norm: f64,
    pub field_norm: f64,
    /// Step taken from this iterate; 0 at the final record.
    pub eta: f64,
    pub safeguard: Option<f64>,
    pub merit: Option<f64>,
    pub extra: Option<f64>,
    pub h_blocks: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterateTrace {
    pub records: Vec<IterateRecord>,
    pub merit_beta: Option<f64>,
    pub status: RunStatus,
    /// Steps after which some block had `‖h‖ > ε`.
    pub safe_region_violations: usize,
    #[serde(skip)]
    pub final_point: Vec<Mat>,
}

impl IterateTrace {
    pub(crate) fn new(merit_beta: Option<f64>) -> Self {
        Self {
            records: Vec::new(),
            merit_beta,
            status: RunStatus::Running,
            safe_region_violations: 0,
            final_point: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, rec: IterateRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|r| r.k < rec.k && r.time_s <= rec.time_s));
        self.records.push(rec);
    }

    pub(crate) fn finish(&mut self, status: RunStatus, xs: Vec<Mat>) {
        self.status = status;
        self.final_point = xs;
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    /// Number of steps taken, from the last record.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }
}
