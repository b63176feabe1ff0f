//! Scenario generation, batch experiments and summary statistics.

mod batch;
mod case_study;
mod scenario;
mod stats;

pub use batch::{compare, run_batch, run_greedy, run_one, run_seeds, BatchResult, Comparison, RunRow};
pub use case_study::{case_study_config, replanning_case_study, CASE_STUDY_WIND_MPS};
pub use scenario::{generate_scenario, Scenario, ScenarioError};
pub use stats::{mean_ci95, Summary};

use crate::disturbance::{HIGH_WIND_MPS, LOW_WIND_MPS};
use crate::exec::Execution;
use crate::mission::{MissionConfig, Policy};
use serde::{Deserialize, Serialize};

/// Flight areas of the standard sweep, in meters.
pub const STANDARD_AREAS: [(f64, f64); 3] = [(52.0, 30.0), (78.0, 45.0), (104.0, 60.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindLevel {
    Calm,
    Low,
    High,
}

impl WindLevel {
    pub fn speed(self) -> f64 {
        match self {
            WindLevel::Calm => 0.0,
            WindLevel::Low => LOW_WIND_MPS,
            WindLevel::High => HIGH_WIND_MPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub width_m: f64,
    pub height_m: f64,
    /// Nodes to visit, depots not included.
    pub n_nodes: usize,
    pub n_uavs: usize,
    pub wind: WindLevel,
    /// Redivision period, s; `None` divides once.
    pub nd_period_s: Option<f64>,
    pub op: bool,
    pub runs: usize,
    pub seed: u64,
    pub obstacles: usize,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            width_m: 52.0,
            height_m: 30.0,
            n_nodes: 30,
            n_uavs: 4,
            wind: WindLevel::Low,
            nd_period_s: Some(10.0),
            op: false,
            runs: 20,
            seed: 1,
            obstacles: 0,
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.runs == 0 || self.n_uavs == 0 {
            return Err(ScenarioError::Config("runs and uav count must be at least 1".into()));
        }
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(ScenarioError::Config("area dimensions must be positive".into()));
        }
        if matches!(self.nd_period_s, Some(p) if !(p > 0.0)) {
            return Err(ScenarioError::Config("division period must be positive".into()));
        }
        Ok(())
    }

    /// Mission settings for `policy` under this experiment.
    pub fn mission_config(&self, policy: Policy) -> MissionConfig {
        let mut m = MissionConfig::new(policy, self.wind.speed()).with_nd(self.nd_period_s).with_op(self.op);
        m.execution = Execution::Sequential;
        m
    }
}
