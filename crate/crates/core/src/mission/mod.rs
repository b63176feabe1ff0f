//! Per-agent mission loop: goal choice, risk-driven replanning and travel,
//! together with the global plan record.

mod record;
mod sim;

pub use record::{Choice, PlanRecord, PlanViolation, Visit};
pub use sim::{simulate, Event, MissionOutcome, TraceRow};

use crate::astar::{PlanError, PlannerConfig};
use crate::division::{DivisionError, DivisionParams};
use crate::exec::Execution;
use crate::hexgrid::NodeId;
use crate::msgbus::{BusError, DEFAULT_GOSSIP_PERIOD_S};
use crate::pid::{EnergyTriple, PidController};
use crate::quadrotor::{EnergyJ, QuadError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Floor on the risk denominator.
pub const RISK_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("no energy triple for node {0}")]
    MissingTriple(NodeId),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Craft(#[from] QuadError),
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("invalid mission configuration: {0}")]
    Config(String),
}

/// Decision policy; the flight machinery is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Node division plus energy-predicted goal choice.
    Divided,
    /// Each idle uav takes the closest unclaimed node.
    Greedy,
}

/// How the division rounds are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisionDriver {
    #[default]
    Sequential,
    /// One thread per agent over a blocking bus.
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplanParams {
    /// Minimum replanning interval, s.
    pub alpha: f64,
    pub beta: f64,
    /// Interval used when no competitor carries any risk, s.
    pub tau_cap: f64,
}

impl Default for ReplanParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, tau_cap: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub policy: Policy,
    /// Redivision period in seconds; `None` divides once at the start.
    pub nd_period_s: Option<f64>,
    /// Risk-timed online replanning.
    pub online_replanning: bool,
    /// Largest wind magnitude the planners guard against, m/s.
    pub wind_cap: f64,
    pub planner: PlannerConfig,
    pub division: DivisionParams,
    pub controller: PidController,
    pub replan: ReplanParams,
    pub gossip_period_s: f64,
    /// Arrival radius as a fraction of the hex side.
    pub arrival_radius_frac: f64,
    pub arrival_speed: f64,
    pub max_time_s: f64,
    /// Ticks between trace rows; `None` disables the trace.
    pub trace_every: Option<u64>,
    pub execution: Execution,
    pub division_driver: DivisionDriver,
}

impl MissionConfig {
    pub fn new(policy: Policy, wind_cap: f64) -> Self {
        Self {
            policy,
            nd_period_s: None,
            online_replanning: false,
            wind_cap,
            planner: PlannerConfig::for_wind_cap(wind_cap),
            division: DivisionParams::new(wind_cap),
            controller: PidController::default(),
            replan: ReplanParams::default(),
            gossip_period_s: DEFAULT_GOSSIP_PERIOD_S,
            arrival_radius_frac: 0.25,
            arrival_speed: 0.1,
            max_time_s: 1800.0,
            trace_every: None,
            execution: Execution::default(),
            division_driver: DivisionDriver::default(),
        }
    }

    pub fn with_nd(mut self, period_s: Option<f64>) -> Self {
        self.nd_period_s = period_s;
        self
    }

    pub fn with_op(mut self, on: bool) -> Self {
        self.online_replanning = on;
        self
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |m: &str| Err(MissionError::Config(m.to_string()));
        if !(self.planner.t_s > 0.0) {
            return bad("sampling period must be positive");
        }
        if matches!(self.nd_period_s, Some(p) if !(p >= self.planner.t_s)) {
            return bad("division period must cover at least one tick");
        }
        if !(self.replan.alpha > 0.0 && self.replan.beta > 0.0 && self.replan.tau_cap >= self.replan.alpha) {
            return bad("replanning needs alpha > 0, beta > 0, tau_cap >= alpha");
        }
        if !(self.gossip_period_s > 0.0 && self.max_time_s > 0.0 && self.wind_cap >= 0.0) {
            return bad("gossip period, time limit and wind cap must be positive");
        }
        Ok(())
    }
}

/// Node with the least predicted energy, ties to the lower id. `None` when
/// the set is empty or nothing in it is reachable.
pub fn select_goal(goal_set: &BTreeSet<NodeId>, triples: &BTreeMap<NodeId, EnergyTriple>) -> Result<Option<NodeId>, MissionError> {
    let mut best: Option<(EnergyJ, NodeId)> = None;
    for &n in goal_set {
        let t = triples.get(&n).ok_or(MissionError::MissingTriple(n))?;
        if !t.predicted.is_feasible() {
            continue;
        }
        if best.is_none_or(|(e, _)| t.predicted < e) {
            best = Some((t.predicted, n));
        }
    }
    Ok(best.map(|(_, n)| n))
}

/// Risk that node `v` overtakes the current goal as the cheapest one.
pub fn risk_number(goal: &EnergyTriple, v: &EnergyTriple) -> f64 {
    let num = (goal.max.value() - v.min.value()).max(0.0);
    if num == 0.0 || num.is_nan() {
        return 0.0;
    }
    let den = (v.max.value() - goal.min.value()).max(RISK_EPSILON);
    num / den
}

/// Time until the next planning pass, clipped to `[alpha, tau_cap]`.
pub fn replanning_interval(r_max: f64, p: &ReplanParams) -> f64 {
    if !(r_max > 0.0) {
        return p.tau_cap;
    }
    (p.alpha * (1.0 + p.beta / r_max)).clamp(p.alpha, p.tau_cap)
}
