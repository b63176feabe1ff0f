//! Synchronous round-based broadcast.
//!
//! In every round each member sends one message to all members (itself
//! included) and receives the full set before anyone moves on. [`RoundBus`]
//! is driven by a single-threaded scheduler; [`SharedBus`] offers the same
//! semantics to agents on separate threads with a blocking barrier. Gathered
//! maps are keyed and ordered by ascending [`UavId`].

use crate::hexgrid::{NodeId, UavId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Condvar, Mutex};
use thiserror::Error;

pub const WIRE_VERSION: u32 = 1;

/// Default gossip period for visited sets, seconds.
pub const DEFAULT_GOSSIP_PERIOD_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BusError {
    #[error("uav {agent} already broadcast in round {round}")]
    DoubleBroadcast { agent: UavId, round: u64 },
    #[error("uav {0} is not a member of this bus")]
    NotMember(UavId),
    #[error("round {round} still waits for {missing} member(s)")]
    Incomplete { round: u64, missing: usize },
    #[error("bus has no members")]
    Empty,
    #[error("malformed message: {0}")]
    Codec(String),
    #[error("unsupported wire version {0}")]
    Version(u32),
}

/// Lockstep bus for a single-threaded scheduler.
#[derive(Debug, Clone)]
pub struct RoundBus<P> {
    members: BTreeSet<UavId>,
    round: u64,
    pending: BTreeMap<UavId, P>,
}

impl<P: Clone> RoundBus<P> {
    pub fn new(members: impl IntoIterator<Item = UavId>) -> Result<Self, BusError> {
        let members: BTreeSet<UavId> = members.into_iter().collect();
        if members.is_empty() {
            return Err(BusError::Empty);
        }
        Ok(Self { members, round: 0, pending: BTreeMap::new() })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn members(&self) -> &BTreeSet<UavId> {
        &self.members
    }

    pub fn broadcast(&mut self, agent: UavId, payload: P) -> Result<(), BusError> {
        if !self.members.contains(&agent) {
            return Err(BusError::NotMember(agent));
        }
        if self.pending.contains_key(&agent) {
            return Err(BusError::DoubleBroadcast { agent, round: self.round });
        }
        self.pending.insert(agent, payload);
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.pending.len() == self.members.len()
    }

    /// Closes the round and hands every member's payload out, keyed by sender.
    pub fn finish_round(&mut self) -> Result<BTreeMap<UavId, P>, BusError> {
        if !self.is_complete() {
            return Err(BusError::Incomplete { round: self.round, missing: self.members.len() - self.pending.len() });
        }
        self.round += 1;
        Ok(std::mem::take(&mut self.pending))
    }

    /// Broadcasts one payload per member and completes the round.
    pub fn exchange(&mut self, payloads: impl IntoIterator<Item = (UavId, P)>) -> Result<BTreeMap<UavId, P>, BusError> {
        for (agent, payload) in payloads {
            self.broadcast(agent, payload)?;
        }
        self.finish_round()
    }
}

#[derive(Debug)]
struct SharedState<P> {
    round: u64,
    pending: BTreeMap<UavId, P>,
    completed: Option<Arc<BTreeMap<UavId, P>>>,
}

/// Thread-safe bus with a blocking barrier per round.
#[derive(Debug)]
pub struct SharedBus<P> {
    members: BTreeSet<UavId>,
    state: Mutex<SharedState<P>>,
    turned: Condvar,
}

impl<P> SharedBus<P> {
    pub fn new(members: impl IntoIterator<Item = UavId>) -> Result<Self, BusError> {
        let members: BTreeSet<UavId> = members.into_iter().collect();
        if members.is_empty() {
            return Err(BusError::Empty);
        }
        Ok(Self {
            members,
            state: Mutex::new(SharedState { round: 0, pending: BTreeMap::new(), completed: None }),
            turned: Condvar::new(),
        })
    }

    pub fn members(&self) -> &BTreeSet<UavId> {
        &self.members
    }

    /// Sends `payload` and blocks until every member has sent for this round.
    pub fn broadcast_and_gather(&self, agent: UavId, payload: P) -> Result<Arc<BTreeMap<UavId, P>>, BusError> {
        if !self.members.contains(&agent) {
            return Err(BusError::NotMember(agent));
        }
        let mut st = self.state.lock().expect("bus lock poisoned");
        if st.pending.contains_key(&agent) {
            return Err(BusError::DoubleBroadcast { agent, round: st.round });
        }
        st.pending.insert(agent, payload);
        if st.pending.len() == self.members.len() {
            let done = Arc::new(std::mem::take(&mut st.pending));
            st.completed = Some(Arc::clone(&done));
            st.round += 1;
            self.turned.notify_all();
            return Ok(done);
        }
        let my_round = st.round;
        // the completed map is only replaced once this agent has sent again
        let st = self.turned.wait_while(st, |s| s.round == my_round).expect("bus lock poisoned");
        Ok(Arc::clone(st.completed.as_ref().expect("a finished round leaves its map")))
    }
}

/// A bid for one node: the growth of the bidder's tour estimate, in
/// micro-units so every agent compares identical integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bid {
    pub node: NodeId,
    pub delta_micro: i64,
}

impl Bid {
    pub fn new(node: NodeId, delta: f64) -> Self {
        Self { node, delta_micro: (delta * 1e6).round() as i64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    GoalSet { nodes: Vec<NodeId> },
    Bids { bids: Vec<Bid> },
    Visited { nodes: Vec<NodeId> },
}

/// Versioned wire message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    pub sender: UavId,
    pub round: u64,
    pub body: Body,
}

impl Envelope {
    pub fn new(sender: UavId, round: u64, body: Body) -> Self {
        Self { version: WIRE_VERSION, sender, round, body }
    }

    /// One-line JSON encoding.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn decode(text: &str) -> Result<Self, BusError> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| BusError::Codec(e.to_string()))?;
        if env.version != WIRE_VERSION {
            return Err(BusError::Version(env.version));
        }
        Ok(env)
    }
}

/// Union of everyone's visited sets from one gossip round.
pub fn merge_visited<'a>(gathered: impl IntoIterator<Item = &'a BTreeSet<NodeId>>) -> BTreeSet<NodeId> {
    gathered.into_iter().flat_map(|s| s.iter().copied()).collect()
}

/// One gossip round over `bus`: every agent sends its visited set and
/// receives the union.
pub fn gossip_visited(bus: &mut RoundBus<Envelope>, local: &BTreeMap<UavId, BTreeSet<NodeId>>) -> Result<BTreeSet<NodeId>, BusError> {
    let round = bus.round();
    let gathered = bus.exchange(
        local.iter().map(|(&a, set)| (a, Envelope::new(a, round, Body::Visited { nodes: set.iter().copied().collect() }))),
    )?;
    let mut merged = BTreeSet::new();
    for env in gathered.values() {
        if let Body::Visited { nodes } = &env.body {
            merged.extend(nodes.iter().copied());
        }
    }
    Ok(merged)
}

/// Tracks when the next gossip round is due.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GossipSchedule {
    pub period_s: f64,
    next_s: f64,
}

impl GossipSchedule {
    pub fn new(period_s: f64) -> Self {
        Self { period_s, next_s: period_s }
    }

    /// True (and advances) when time `t` has reached the next gossip instant.
    pub fn due(&mut self, t: f64) -> bool {
        if t + 1e-9 >= self.next_s {
            while self.next_s <= t + 1e-9 {
                self.next_s += self.period_s;
            }
            true
        } else {
            false
        }
    }
}
