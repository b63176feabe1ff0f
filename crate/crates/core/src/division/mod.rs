//! Synchronous node division.
//!
//! A division takes three bus rounds. Agents first pool their visited sets so
//! everyone agrees on the unvisited set `V_G`. Each agent then claims the
//! nodes it can reach far more cheaply than any competitor, and broadcasts
//! the claim. Finally every agent bids the growth of its estimated tour
//! length on each leftover node; the lowest bid wins, ties to the lower id.

mod circle;

pub use circle::{min_enclosing_circle, Circle};

use crate::disturbance::{best_case_wind, worst_case_wind};
use crate::geometry::Position2D;
use crate::hexgrid::{NodeId, UavId};
use crate::msgbus::{Bid, Body, BusError, Envelope, RoundBus, SharedBus};
use crate::quadrotor::{max_relative_speed, travel_energy_with, CraftParams, EnergyJ, QuadError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Beardwood-Halton-Hammersley constant for random Euclidean tours.
pub const DEFAULT_TSP_CONSTANT: f64 = 0.7124;

#[derive(Debug, Error)]
pub enum DivisionError {
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Craft(#[from] QuadError),
    #[error("uav {agent} expected a {expected} message from uav {from}")]
    UnexpectedMessage { agent: UavId, from: UavId, expected: &'static str },
    #[error("node {node} assigned to both uav {first} and uav {second}")]
    Overlap { node: NodeId, first: UavId, second: UavId },
    #[error("node {0} is neither assigned nor reported unassigned")]
    Uncovered(NodeId),
    #[error("node {0} assigned outside the unvisited set")]
    Foreign(NodeId),
    #[error("agents disagree on the outcome of the division")]
    Disagreement,
}

/// How the claim phase treats a candidate that fails the energy test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase1Scan {
    /// Keep scanning farther nodes.
    #[default]
    Continue,
    /// Stop claiming at the first failure.
    StopAtFirstFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisionParams {
    /// Wind magnitude used for the worst and best case claim energies, m/s.
    pub wind_cap: f64,
    pub tsp_constant: f64,
    pub scan: Phase1Scan,
}

impl DivisionParams {
    pub fn new(wind_cap: f64) -> Self {
        Self { wind_cap, tsp_constant: DEFAULT_TSP_CONSTANT, scan: Phase1Scan::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSet {
    pub owner: UavId,
    pub nodes: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TourEstimate {
    pub circ_area_m2: f64,
    pub est_length: f64,
    /// Points on the tour, the agent's own position included.
    pub n: usize,
}

/// Expected tour length through `nodes` starting from `own_pos`, from the
/// area of their minimum enclosing circle.
pub fn tour_length_estimate(nodes: &[Position2D], own_pos: Position2D, c: f64) -> TourEstimate {
    let n = nodes.len() + 1;
    if n == 1 {
        return TourEstimate { circ_area_m2: 0.0, est_length: 0.0, n };
    }
    let mut pts = Vec::with_capacity(n);
    pts.push(own_pos);
    pts.extend_from_slice(nodes);
    let area = min_enclosing_circle(&pts).area();
    TourEstimate { circ_area_m2: area, est_length: c * (n as f64 * area).sqrt(), n }
}

/// Straight-line energy between two points with the wind at `cap` straight
/// against (`worst`) or along the direction of travel.
fn bounded_leg(from: Position2D, to: Position2D, cap: f64, worst: bool, v_rel: f64, power: f64) -> EnergyJ {
    let dir = to - from;
    let wind = if worst { worst_case_wind(cap, dir) } else { best_case_wind(cap, dir) };
    match wind {
        Ok(d) => travel_energy_with(from, to, d, v_rel, power),
        Err(_) => EnergyJ::ZERO, // zero-length leg
    }
}

/// Claim phase for `agent`: scan `v_g` by distance (ties to the lower node id)
/// and keep a node when twice the worst-case energy of all claimed nodes
/// plus it stays below every competitor's best-case energy to it.
pub fn phase1_claim(
    agent: UavId,
    v_g: &BTreeMap<NodeId, Position2D>,
    positions: &BTreeMap<UavId, Position2D>,
    skip: &BTreeSet<NodeId>,
    craft: &CraftParams,
    params: &DivisionParams,
) -> Result<BTreeSet<NodeId>, QuadError> {
    let v_rel = max_relative_speed(craft)?;
    let power = craft.max_power();
    let me = positions[&agent];
    let mut order: Vec<(f64, NodeId, Position2D)> =
        v_g.iter().filter(|(id, _)| !skip.contains(id)).map(|(&id, &p)| (me.distance(p), id, p)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut claimed = BTreeSet::new();
    let mut sum_max = EnergyJ::ZERO;
    for (_, id, p) in order {
        let e_max = bounded_leg(me, p, params.wind_cap, true, v_rel, power);
        let lhs = 2.0 * (sum_max + e_max).value();
        let beats_all = positions
            .iter()
            .filter(|(&other, _)| other != agent)
            .all(|(_, &q)| lhs < bounded_leg(q, p, params.wind_cap, false, v_rel, power).value());
        if beats_all {
            claimed.insert(id);
            sum_max += e_max;
        } else if params.scan == Phase1Scan::StopAtFirstFailure {
            break;
        }
    }
    Ok(claimed)
}

/// Tour-length growth bids on every leftover node the agent can reach.
pub fn phase2_bids(
    own_pos: Position2D,
    own: &BTreeSet<NodeId>,
    leftover: &BTreeSet<NodeId>,
    nodes: &BTreeMap<NodeId, Position2D>,
    skip: &BTreeSet<NodeId>,
    c: f64,
) -> Vec<Bid> {
    let mut pts: Vec<Position2D> = own.iter().map(|id| nodes[id]).collect();
    let base = tour_length_estimate(&pts, own_pos, c).est_length;
    leftover
        .iter()
        .filter(|id| !skip.contains(id))
        .map(|&id| {
            pts.push(nodes[&id]);
            let grown = tour_length_estimate(&pts, own_pos, c).est_length;
            pts.pop();
            Bid::new(id, grown - base)
        })
        .collect()
}

/// Winner per bid-on node: lowest bid, ties to the lowest id.
pub fn assignment_table<'a>(bids: impl IntoIterator<Item = (UavId, &'a [Bid])>) -> BTreeMap<NodeId, UavId> {
    let mut best: BTreeMap<NodeId, (i64, UavId)> = BTreeMap::new();
    for (agent, list) in bids {
        for bid in list {
            let entry = best.entry(bid.node).or_insert((bid.delta_micro, agent));
            if (bid.delta_micro, agent) < *entry {
                *entry = (bid.delta_micro, agent);
            }
        }
    }
    best.into_iter().map(|(node, (_, agent))| (node, agent)).collect()
}

/// What one agent ends a division with.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisionOutcome {
    pub goal_set: GoalSet,
    /// Phase-1 claims of this agent.
    pub claimed: BTreeSet<NodeId>,
    /// The agreed unvisited set.
    pub v_g: BTreeSet<NodeId>,
    /// Owner of every node, as computed by this agent.
    pub owners: BTreeMap<NodeId, UavId>,
    /// Nodes nobody claimed or bid on.
    pub unassigned: BTreeSet<NodeId>,
}

/// Everything the agents share going into a division.
#[derive(Debug, Clone, Copy)]
pub struct DivisionWorld<'a> {
    /// Every mission node with its position.
    pub nodes: &'a BTreeMap<NodeId, Position2D>,
    /// Current positions of all agents.
    pub positions: &'a BTreeMap<UavId, Position2D>,
    pub craft: &'a CraftParams,
    pub params: &'a DivisionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Visited,
    GoalSets,
    Bids,
}

/// Local state of one agent through the three rounds of a division.
#[derive(Debug, Clone)]
pub struct DivisionAgent {
    id: UavId,
    epoch: u64,
    visited: BTreeSet<NodeId>,
    unreachable: BTreeSet<NodeId>,
    stage: Stage,
    v_g: BTreeMap<NodeId, Position2D>,
    claimed: BTreeSet<NodeId>,
    leftover: BTreeSet<NodeId>,
    owners: BTreeMap<NodeId, UavId>,
}

impl DivisionAgent {
    /// `visited` is the agent's local knowledge; `unreachable` lists nodes it
    /// knows it cannot path to and will neither claim nor bid on.
    pub fn new(id: UavId, epoch: u64, visited: BTreeSet<NodeId>, unreachable: BTreeSet<NodeId>) -> Self {
        Self {
            id,
            epoch,
            visited,
            unreachable,
            stage: Stage::Visited,
            v_g: BTreeMap::new(),
            claimed: BTreeSet::new(),
            leftover: BTreeSet::new(),
            owners: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> UavId {
        self.id
    }

    fn envelope(&self, body: Body) -> Envelope {
        let stage = match self.stage {
            Stage::Visited => 0,
            Stage::GoalSets => 1,
            Stage::Bids => 2,
        };
        Envelope::new(self.id, self.epoch * 3 + stage, body)
    }

    /// First message: the local visited set.
    pub fn open(&self) -> Envelope {
        self.envelope(Body::Visited { nodes: self.visited.iter().copied().collect() })
    }

    /// Pools visited sets, runs the claim phase and returns the claim message.
    pub fn on_visited(&mut self, gathered: &BTreeMap<UavId, Envelope>, world: &DivisionWorld) -> Result<Envelope, DivisionError> {
        for (&from, env) in gathered {
            match &env.body {
                Body::Visited { nodes } => self.visited.extend(nodes.iter().copied()),
                _ => return Err(DivisionError::UnexpectedMessage { agent: self.id, from, expected: "visited" }),
            }
        }
        self.v_g = world.nodes.iter().filter(|(id, _)| !self.visited.contains(id)).map(|(&id, &p)| (id, p)).collect();
        self.claimed = phase1_claim(self.id, &self.v_g, world.positions, &self.unreachable, world.craft, world.params)?;
        self.stage = Stage::GoalSets;
        Ok(self.envelope(Body::GoalSet { nodes: self.claimed.iter().copied().collect() }))
    }

    /// Records everyone's claims and returns this agent's bids on the rest.
    pub fn on_goal_sets(&mut self, gathered: &BTreeMap<UavId, Envelope>, world: &DivisionWorld) -> Result<Envelope, DivisionError> {
        self.owners.clear();
        for (&from, env) in gathered {
            match &env.body {
                Body::GoalSet { nodes } => {
                    for &n in nodes {
                        if !self.v_g.contains_key(&n) {
                            return Err(DivisionError::Foreign(n));
                        }
                        if let Some(&first) = self.owners.get(&n) {
                            return Err(DivisionError::Overlap { node: n, first, second: from });
                        }
                        self.owners.insert(n, from);
                    }
                }
                _ => return Err(DivisionError::UnexpectedMessage { agent: self.id, from, expected: "goal set" }),
            }
        }
        self.leftover = self.v_g.keys().filter(|n| !self.owners.contains_key(n)).copied().collect();
        let bids = phase2_bids(
            world.positions[&self.id],
            &self.claimed,
            &self.leftover,
            world.nodes,
            &self.unreachable,
            world.params.tsp_constant,
        );
        self.stage = Stage::Bids;
        Ok(self.envelope(Body::Bids { bids }))
    }

    /// Settles the bids and returns the agent's final goal set.
    pub fn on_bids(mut self, gathered: &BTreeMap<UavId, Envelope>) -> Result<DivisionOutcome, DivisionError> {
        let mut lists = Vec::with_capacity(gathered.len());
        for (&from, env) in gathered {
            match &env.body {
                Body::Bids { bids } => {
                    if let Some(b) = bids.iter().find(|b| !self.leftover.contains(&b.node)) {
                        return Err(DivisionError::Foreign(b.node));
                    }
                    lists.push((from, bids.as_slice()));
                }
                _ => return Err(DivisionError::UnexpectedMessage { agent: self.id, from, expected: "bids" }),
            }
        }
        self.owners.extend(assignment_table(lists));
        let nodes: BTreeSet<NodeId> = self.owners.iter().filter(|(_, &o)| o == self.id).map(|(&n, _)| n).collect();
        let unassigned = self.v_g.keys().filter(|n| !self.owners.contains_key(n)).copied().collect();
        Ok(DivisionOutcome {
            goal_set: GoalSet { owner: self.id, nodes },
            claimed: self.claimed,
            v_g: self.v_g.into_keys().collect(),
            owners: self.owners,
            unassigned,
        })
    }
}

/// Runs a division for all `agents` on one thread, in id order.
pub fn divide_sequential(
    world: &DivisionWorld,
    mut agents: Vec<DivisionAgent>,
    bus: &mut RoundBus<Envelope>,
) -> Result<BTreeMap<UavId, DivisionOutcome>, DivisionError> {
    agents.sort_by_key(|a| a.id);
    let gathered = bus.exchange(agents.iter().map(|a| (a.id, a.open())))?;
    let claims = agents.iter_mut().map(|a| Ok((a.id, a.on_visited(&gathered, world)?))).collect::<Result<Vec<_>, DivisionError>>()?;
    let gathered = bus.exchange(claims)?;
    let bids = agents.iter_mut().map(|a| Ok((a.id, a.on_goal_sets(&gathered, world)?))).collect::<Result<Vec<_>, DivisionError>>()?;
    let gathered = bus.exchange(bids)?;
    agents.into_iter().map(|a| Ok((a.id, a.on_bids(&gathered)?))).collect()
}

/// Runs a division with one thread per agent over a blocking bus.
pub fn divide_threaded(
    world: &DivisionWorld,
    agents: Vec<DivisionAgent>,
    bus: &SharedBus<Envelope>,
) -> Result<BTreeMap<UavId, DivisionOutcome>, DivisionError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = agents
            .into_iter()
            .map(|mut agent| {
                scope.spawn(move || -> Result<(UavId, DivisionOutcome), DivisionError> {
                    let gathered = bus.broadcast_and_gather(agent.id, agent.open())?;
                    let claim = agent.on_visited(&gathered, world)?;
                    let gathered = bus.broadcast_and_gather(agent.id, claim)?;
                    let bids = agent.on_goal_sets(&gathered, world)?;
                    let gathered = bus.broadcast_and_gather(agent.id, bids)?;
                    Ok((agent.id, agent.on_bids(&gathered)?))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("division thread panicked")).collect()
    })
}

/// Checks agreement, disjointness and coverage of a finished division.
pub fn check_partition(outcomes: &BTreeMap<UavId, DivisionOutcome>) -> Result<(), DivisionError> {
    let Some(first) = outcomes.values().next() else {
        return Ok(());
    };
    if outcomes.values().any(|o| o.v_g != first.v_g || o.owners != first.owners || o.unassigned != first.unassigned) {
        return Err(DivisionError::Disagreement);
    }
    let mut owner: BTreeMap<NodeId, UavId> = BTreeMap::new();
    for (&agent, o) in outcomes {
        if !o.claimed.is_subset(&o.goal_set.nodes) {
            return Err(DivisionError::Disagreement);
        }
        for &n in &o.goal_set.nodes {
            if !first.v_g.contains(&n) {
                return Err(DivisionError::Foreign(n));
            }
            if let Some(&prev) = owner.get(&n) {
                return Err(DivisionError::Overlap { node: n, first: prev, second: agent });
            }
            owner.insert(n, agent);
        }
    }
    for &n in &first.v_g {
        if !owner.contains_key(&n) && !first.unassigned.contains(&n) {
            return Err(DivisionError::Uncovered(n));
        }
    }
    Ok(())
}
