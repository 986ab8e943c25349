//! Run records shared by every algorithm.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    AllClassified,
    ToleranceRoundCap,
    BudgetExhausted,
}

/// One robust estimate from a round: `arm` alone, or the pair `(arm, other)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub arm: usize,
    pub other: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundHistory {
    pub round: usize,
    pub delta_t: f64,
    pub gamma: f64,
    pub design: Vec<f64>,
    pub design_value: f64,
    pub n_samples: u64,
    pub estimates: Vec<TargetEstimate>,
    pub newly_good: Vec<usize>,
    pub newly_bad: Vec<usize>,
    pub n_active_after: usize,
}

/// Declared set at a point in the run, used for F1 trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub samples: u64,
    pub round: usize,
    pub declared: Vec<usize>,
    /// Arms certified above the threshold.
    pub good: Vec<usize>,
    pub n_bad: usize,
    pub n_active: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    /// Arms declared above the threshold.
    pub good: Vec<usize>,
    /// Arms declared below the threshold.
    pub bad: Vec<usize>,
    /// Arms never classified.
    pub active: Vec<usize>,
    /// The returned set, `X \ bad` for the elimination algorithms.
    pub returned: Vec<usize>,
    pub rounds: Vec<RoundHistory>,
    pub total_samples: u64,
    pub stop_reason: StopReason,
    pub trajectory: Vec<Snapshot>,
}

impl Snapshot {
    pub fn n_good(&self) -> usize {
        self.good.len()
    }
}

impl RunResult {
    /// Declared set after `samples` samples (the last snapshot not beyond it).
    pub fn declared_at(&self, samples: u64) -> Option<&Snapshot> {
        self.trajectory.iter().take_while(|s| s.samples <= samples).last()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run results always serialize")
    }
}

/// Pushes a snapshot unless the declared set and counts are unchanged.
pub(crate) fn record(trajectory: &mut Vec<Snapshot>, snap: Snapshot) {
    if let Some(last) = trajectory.last_mut() {
        if last.declared == snap.declared
            && last.good == snap.good
            && last.n_bad == snap.n_bad
            && last.n_active == snap.n_active
        {
            return;
        }
        if last.samples == snap.samples {
            *last = snap;
            return;
        }
    }
    trajectory.push(snap);
}

pub(crate) fn complement(n: usize, excluded: &[bool]) -> Vec<usize> {
    (0..n).filter(|&i| !excluded[i]).collect()
}

pub(crate) fn members(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}
