//! The global plan: who chose which node when, and who visited what.

use crate::hexgrid::{NodeId, UavId};
use crate::quadrotor::EnergyJ;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("uav {first} and uav {second} both chose node {node} at tick {tick}")]
    SharedGoal { node: NodeId, first: UavId, second: UavId, tick: u64 },
    #[error("node {0} was never visited")]
    NotVisited(NodeId),
    #[error("node {0} was visited more than once")]
    VisitedTwice(NodeId),
    #[error("uav {uav} visited node {node} at tick {tick} without choosing it")]
    UnchosenVisit { uav: UavId, node: NodeId, tick: u64 },
    #[error("uav {0} still has a goal at the termination index")]
    NotTerminated(UavId),
    #[error("record entry for unknown uav {0} or node")]
    Unknown(UavId),
}

/// A change of goal; the choice holds until the uav's next entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub tick: u64,
    pub uav: UavId,
    pub goal: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub tick: u64,
    pub uav: UavId,
    pub node: NodeId,
    /// Number of choices recorded before the visit.
    pub seq: usize,
}

/// Plan record of one mission, stored as change points in tick order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub uavs: BTreeSet<UavId>,
    pub nodes: BTreeSet<NodeId>,
    pub choices: Vec<Choice>,
    pub visits: Vec<Visit>,
    /// Termination index T.
    pub termination_tick: u64,
    /// Realized travel energy per uav.
    pub per_uav_energy: BTreeMap<UavId, EnergyJ>,
    /// Hover energy spent waiting without a goal, kept apart from travel.
    pub per_uav_idle_energy: BTreeMap<UavId, EnergyJ>,
}

impl PlanRecord {
    pub fn new(uavs: BTreeSet<UavId>, nodes: BTreeSet<NodeId>) -> Self {
        let zeros: BTreeMap<UavId, EnergyJ> = uavs.iter().map(|&u| (u, EnergyJ::ZERO)).collect();
        Self {
            uavs,
            nodes,
            choices: Vec::new(),
            visits: Vec::new(),
            termination_tick: 0,
            per_uav_energy: zeros.clone(),
            per_uav_idle_energy: zeros,
        }
    }

    /// Goal of `uav` right after all entries at `tick`.
    pub fn choice_at(&self, uav: UavId, tick: u64) -> Option<NodeId> {
        self.choices.iter().take_while(|c| c.tick <= tick).filter(|c| c.uav == uav).last().and_then(|c| c.goal)
    }

    pub fn total_energy(&self) -> EnergyJ {
        self.per_uav_energy.values().copied().sum()
    }

    pub fn total_idle_energy(&self) -> EnergyJ {
        self.per_uav_idle_energy.values().copied().sum()
    }

    /// Goal of `uav` according to the first `seq` choices.
    pub fn choice_before(&self, uav: UavId, seq: usize) -> Option<NodeId> {
        self.choices[..seq.min(self.choices.len())].iter().rev().find(|c| c.uav == uav).and_then(|c| c.goal)
    }

    /// Runs the four checks: no shared goal at any index, every node visited,
    /// no node visited twice, every uav at rest with no goal at the end.
    pub fn check(&self) -> Result<(), PlanViolation> {
        self.check_unique_goals()?;
        self.check_visits()?;
        self.check_termination()
    }

    pub fn check_unique_goals(&self) -> Result<(), PlanViolation> {
        let mut current: BTreeMap<UavId, NodeId> = BTreeMap::new();
        let mut i = 0;
        while i < self.choices.len() {
            let tick = self.choices[i].tick;
            while i < self.choices.len() && self.choices[i].tick == tick {
                let c = self.choices[i];
                if !self.uavs.contains(&c.uav) {
                    return Err(PlanViolation::Unknown(c.uav));
                }
                match c.goal {
                    Some(n) => current.insert(c.uav, n),
                    None => current.remove(&c.uav),
                };
                i += 1;
            }
            let mut owner: BTreeMap<NodeId, UavId> = BTreeMap::new();
            for (&uav, &node) in &current {
                if let Some(&first) = owner.get(&node) {
                    return Err(PlanViolation::SharedGoal { node, first, second: uav, tick });
                }
                owner.insert(node, uav);
            }
        }
        Ok(())
    }

    pub fn check_visits(&self) -> Result<(), PlanViolation> {
        let mut seen = BTreeSet::new();
        for v in &self.visits {
            if !seen.insert(v.node) {
                return Err(PlanViolation::VisitedTwice(v.node));
            }
            if self.choice_before(v.uav, v.seq) != Some(v.node) {
                return Err(PlanViolation::UnchosenVisit { uav: v.uav, node: v.node, tick: v.tick });
            }
        }
        match self.nodes.iter().find(|n| !seen.contains(n)) {
            Some(&n) => Err(PlanViolation::NotVisited(n)),
            None => Ok(()),
        }
    }

    pub fn check_termination(&self) -> Result<(), PlanViolation> {
        for &u in &self.uavs {
            let last = self.choices.iter().rev().find(|c| c.uav == u);
            if let Some(c) = last {
                if c.goal.is_some() || c.tick > self.termination_tick {
                    return Err(PlanViolation::NotTerminated(u));
                }
            }
        }
        Ok(())
    }
}
