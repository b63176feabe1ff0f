//! Lockstep mission simulation.
//!
//! Every tick has a decision phase (division, gossip, planning) followed by
//! one sampling period of flight for every agent, both in ascending id
//! order. Agents only learn about each other through the bus and through
//! the positions the division reads off the world clock.

use super::{replanning_interval, risk_number, select_goal, DivisionDriver, MissionConfig, MissionError, PlanRecord, Policy};
use crate::astar::{desirable_states, plan_path_from, DesirablePath};
use crate::disturbance::WindField;
use crate::division::{check_partition, divide_sequential, divide_threaded, DivisionAgent, DivisionWorld};
use crate::geometry::{Position2D, Vec2};
use crate::hexgrid::{HexGrid, NodeId, UavId};
use crate::mission::{Choice, Visit};
use crate::msgbus::{gossip_visited, Envelope, RoundBus, SharedBus};
use crate::pid::{predict_energy, predict_energy_triple, EnergyTriple, ReferencePoint};
use crate::quadrotor::{clamp_to_realizable, rotor_power, step_dynamics, CraftParams, EnergyJ, InputVector, UavState};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Division { tick: u64, epoch: u64, goal_sets: BTreeMap<UavId, Vec<NodeId>>, unassigned: Vec<NodeId> },
    Plan { tick: u64, uav: UavId, goal: Option<NodeId>, predicted_j: f64, tau_s: Option<f64> },
    GoalSwitch { tick: u64, uav: UavId, from: NodeId, to: NodeId },
    Arrival { tick: u64, uav: UavId, node: NodeId },
    Unreachable { tick: u64, uav: UavId, node: NodeId },
    /// Nothing left in the goal set is reachable; the uav holds and releases it.
    Landed { tick: u64, uav: UavId, released: Vec<NodeId> },
    Gossip { tick: u64, known_visited: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub uav: UavId,
    pub x: f64,
    pub y: f64,
    pub goal: Option<NodeId>,
    pub energy_j: f64,
}

#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub record: PlanRecord,
    pub events: Vec<Event>,
    pub trace: Vec<TraceRow>,
    /// Every node visited and every uav done.
    pub completed: bool,
    pub timed_out: bool,
    pub divisions: u64,
    pub plans: u64,
}

impl MissionOutcome {
    pub fn total_energy(&self) -> EnergyJ {
        self.record.total_energy()
    }

    /// Trace as CSV with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,uav,x,y,goal,energy_J_cumulative\n");
        for r in &self.trace {
            let goal = r.goal.map(|g| g.0.to_string()).unwrap_or_default();
            out.push_str(&format!("{:.3},{},{:.4},{:.4},{},{:.6}\n", r.t, r.uav.0, r.x, r.y, goal, r.energy_j));
        }
        out
    }

    /// Event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }
}

struct Flight {
    /// `None` while braking to a stop after losing the goal in flight.
    goal: Option<NodeId>,
    points: Vec<ReferencePoint>,
    start_tick: u64,
}

struct Agent {
    id: UavId,
    x: UavState,
    goal_set: BTreeSet<NodeId>,
    goal: Option<NodeId>,
    flight: Option<Flight>,
    replan_due: bool,
    timer_tick: Option<u64>,
    known_visited: BTreeSet<NodeId>,
    unreachable: BTreeSet<NodeId>,
    energy: f64,
    idle: f64,
}

/// Read-only inputs of one planning pass.
struct PlanInput {
    id: UavId,
    x: UavState,
    goal_set: BTreeSet<NodeId>,
}

struct PlanResult {
    goal: Option<NodeId>,
    path: Option<DesirablePath>,
    predicted: EnergyJ,
    unreachable: Vec<NodeId>,
    tau_s: Option<f64>,
}

struct Ctx<'a> {
    grid: &'a HexGrid,
    craft: &'a CraftParams,
    cfg: &'a MissionConfig,
}

/// Plans every goal in the set from the current state and picks the cheapest.
fn plan_divided(inp: &PlanInput, d_now: Vec2, ctx: &Ctx) -> Result<PlanResult, MissionError> {
    let cfg = ctx.cfg;
    let mut paths = BTreeMap::new();
    let mut triples = BTreeMap::new();
    let mut unreachable = Vec::new();
    let start = inp.x.position_2d();
    let vel = inp.x.velocity_2d();
    for &node in &inp.goal_set {
        match plan_path_from(ctx.grid, start, vel, node, d_now, ctx.craft, &cfg.planner)? {
            None => {
                unreachable.push(node);
                triples.insert(node, EnergyTriple::INFEASIBLE);
            }
            Some(path) => {
                let triple = if cfg.online_replanning {
                    predict_energy_triple(&path, &inp.x, cfg.wind_cap, &cfg.controller, ctx.craft, &cfg.planner)?
                } else {
                    let e = predict_energy(&path, &inp.x, &cfg.controller, ctx.craft, cfg.planner.t_s)?;
                    EnergyTriple { predicted: e, max: e, min: e }
                };
                triples.insert(node, triple);
                paths.insert(node, path);
            }
        }
    }
    let goal = select_goal(&inp.goal_set, &triples)?;
    let tau_s = match (goal, cfg.online_replanning) {
        (Some(g), true) => {
            let gt = triples[&g];
            let r_max = triples.iter().filter(|(&n, _)| n != g).map(|(_, t)| risk_number(&gt, t)).fold(0.0, f64::max);
            Some(replanning_interval(r_max, &cfg.replan))
        }
        _ => None,
    };
    let predicted = goal.map(|g| triples[&g].predicted).unwrap_or(EnergyJ::ZERO);
    let path = goal.and_then(|g| paths.remove(&g));
    Ok(PlanResult { goal, path, predicted, unreachable, tau_s })
}

fn ticks_for(seconds: f64, t_s: f64) -> u64 {
    (seconds / t_s - 1e-9).ceil().max(1.0) as u64
}

/// Runs one mission on `grid` (nodes and depots included) under `wind`.
///
/// Every uav starts hovering over its depot, which counts as visited at
/// tick 0. The run ends once no uav has anything left to do, or at the
/// configured time limit.
pub fn simulate(grid: &HexGrid, wind: &WindField, craft: &CraftParams, cfg: &MissionConfig) -> Result<MissionOutcome, MissionError> {
    cfg.validate()?;
    let t_s = cfg.planner.t_s;
    let ctx = Ctx { grid, craft, cfg };
    let uav_ids: Vec<UavId> = grid.depots().keys().copied().collect();
    if uav_ids.is_empty() {
        return Err(MissionError::Config("scenario has no uavs".into()));
    }
    let node_pos: BTreeMap<NodeId, Position2D> =
        grid.nodes().keys().map(|&n| Ok((n, grid.node_position(n)?))).collect::<Result<_, crate::hexgrid::GridError>>().map_err(crate::astar::PlanError::from)?;
    let all_nodes: BTreeSet<NodeId> = node_pos.keys().copied().collect();
    let hover_power = {
        let (_, w, _) = clamp_to_realizable(&InputVector::hover(craft), craft);
        rotor_power(&w, craft)
    };
    let arrival_radius = cfg.arrival_radius_frac * grid.side_m();

    let mut record = PlanRecord::new(uav_ids.iter().copied().collect(), all_nodes.clone());
    let mut events = Vec::new();
    let mut trace = Vec::new();
    let mut agents: Vec<Agent> = Vec::with_capacity(uav_ids.len());
    for (&id, &depot) in grid.depots() {
        let p = node_pos[&depot];
        record.choices.push(Choice { tick: 0, uav: id, goal: Some(depot) });
        record.visits.push(Visit { tick: 0, uav: id, node: depot, seq: record.choices.len() });
        agents.push(Agent {
            id,
            x: UavState::at_rest(p, cfg.planner.altitude),
            goal_set: BTreeSet::new(),
            goal: Some(depot),
            flight: None,
            replan_due: true,
            timer_tick: None,
            known_visited: BTreeSet::from([depot]),
            unreachable: BTreeSet::new(),
            energy: 0.0,
            idle: 0.0,
        });
    }
    let mut visited: BTreeSet<NodeId> = grid.depots().values().copied().collect();

    let mut bus: RoundBus<Envelope> = RoundBus::new(uav_ids.iter().copied())?;
    let nd_ticks = cfg.nd_period_s.map(|p| ticks_for(p, t_s));
    let gossip_ticks = ticks_for(cfg.gossip_period_s, t_s);
    let max_ticks = (cfg.max_time_s / t_s).round() as u64;
    let mut epoch = 0u64;
    let mut plans = 0u64;
    let mut force_division = false;
    let mut tick = 0u64;
    let mut timed_out = false;

    loop {
        let d_now = wind.at_step(tick, t_s);

        // node division
        let division_due = cfg.policy == Policy::Divided
            && (tick == 0 || force_division || nd_ticks.is_some_and(|p| tick.is_multiple_of(p)));
        if division_due {
            force_division = false;
            let positions: BTreeMap<UavId, Position2D> = agents.iter().map(|a| (a.id, a.x.position_2d())).collect();
            let world = DivisionWorld { nodes: &node_pos, positions: &positions, craft, params: &cfg.division };
            let members: Vec<DivisionAgent> =
                agents.iter().map(|a| DivisionAgent::new(a.id, epoch, a.known_visited.clone(), a.unreachable.clone())).collect();
            let outcomes = match cfg.division_driver {
                DivisionDriver::Sequential => divide_sequential(&world, members, &mut bus)?,
                DivisionDriver::Threaded => divide_threaded(&world, members, &SharedBus::new(uav_ids.iter().copied())?)?,
            };
            check_partition(&outcomes)?;
            for a in agents.iter_mut() {
                let out = &outcomes[&a.id];
                a.known_visited = all_nodes.difference(&out.v_g).copied().collect();
                a.goal_set = out.goal_set.nodes.clone();
                a.replan_due = true;
            }
            let any = outcomes.values().next().expect("at least one uav");
            events.push(Event::Division {
                tick,
                epoch,
                goal_sets: outcomes.iter().map(|(&u, o)| (u, o.goal_set.nodes.iter().copied().collect())).collect(),
                unassigned: any.unassigned.iter().copied().collect(),
            });
            epoch += 1;
        }

        // visited-set gossip
        if tick > 0 && tick.is_multiple_of(gossip_ticks) {
            let local: BTreeMap<UavId, BTreeSet<NodeId>> = agents.iter().map(|a| (a.id, a.known_visited.clone())).collect();
            let merged = gossip_visited(&mut bus, &local)?;
            for a in agents.iter_mut() {
                a.known_visited.clone_from(&merged);
                a.goal_set.retain(|n| !merged.contains(n));
            }
            events.push(Event::Gossip { tick, known_visited: merged.len() });
        }

        // replanning timers
        if cfg.online_replanning && cfg.policy == Policy::Divided {
            for a in agents.iter_mut() {
                if a.flight.is_some() && a.timer_tick.is_some_and(|t| t <= tick) {
                    a.replan_due = true;
                }
            }
        }

        // planning
        let mut new_goals: Vec<(usize, Option<NodeId>, Option<DesirablePath>)> = Vec::new();
        match cfg.policy {
            Policy::Divided => {
                let inputs: Vec<(usize, PlanInput)> = agents
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.replan_due)
                    .map(|(i, a)| (i, PlanInput { id: a.id, x: a.x, goal_set: a.goal_set.clone() }))
                    .collect();
                let results = cfg.execution.map(&inputs, |(_, inp)| plan_divided(inp, d_now, &ctx));
                for ((i, inp), res) in inputs.iter().zip(results) {
                    let res = res?;
                    plans += 1;
                    let a = &mut agents[*i];
                    a.replan_due = false;
                    for &n in &res.unreachable {
                        events.push(Event::Unreachable { tick, uav: inp.id, node: n });
                        a.unreachable.insert(n);
                        a.goal_set.remove(&n);
                        force_division = true;
                    }
                    if res.goal.is_none() && !res.unreachable.is_empty() {
                        events.push(Event::Landed { tick, uav: a.id, released: res.unreachable.clone() });
                    }
                    a.timer_tick = res.tau_s.map(|tau| tick + ticks_for(tau, t_s));
                    events.push(Event::Plan { tick, uav: a.id, goal: res.goal, predicted_j: res.predicted.value(), tau_s: res.tau_s });
                    new_goals.push((*i, res.goal, res.path));
                }
            }
            Policy::Greedy => {
                let mut claimed: BTreeSet<NodeId> = agents.iter().filter_map(|a| a.flight.as_ref().and_then(|f| f.goal)).collect();
                for i in 0..agents.len() {
                    if !agents[i].replan_due {
                        continue;
                    }
                    plans += 1;
                    agents[i].replan_due = false;
                    let here = agents[i].x.position_2d();
                    let mut candidates: Vec<(f64, NodeId)> = node_pos
                        .iter()
                        .filter(|(n, _)| !visited.contains(n) && !claimed.contains(n) && !agents[i].unreachable.contains(n))
                        .map(|(&n, &p)| (here.distance(p), n))
                        .collect();
                    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut choice = (None, None);
                    for (_, n) in candidates {
                        match plan_path_from(grid, here, agents[i].x.velocity_2d(), n, d_now, craft, &cfg.planner)? {
                            Some(path) => {
                                claimed.insert(n);
                                choice = (Some(n), Some(path));
                                break;
                            }
                            None => {
                                events.push(Event::Unreachable { tick, uav: agents[i].id, node: n });
                                agents[i].unreachable.insert(n);
                            }
                        }
                    }
                    let predicted = match &choice.1 {
                        Some(p) => predict_energy(p, &agents[i].x, &cfg.controller, craft, t_s)?.value(),
                        None => 0.0,
                    };
                    events.push(Event::Plan { tick, uav: agents[i].id, goal: choice.0, predicted_j: predicted, tau_s: None });
                    new_goals.push((i, choice.0, choice.1));
                }
            }
        }
        for (i, goal, path) in new_goals {
            let a = &mut agents[i];
            if let (Some(from), Some(to), true) = (a.goal, goal, a.flight.is_some()) {
                if from != to {
                    events.push(Event::GoalSwitch { tick, uav: a.id, from, to });
                }
            }
            if goal != a.goal {
                record.choices.push(Choice { tick, uav: a.id, goal });
                a.goal = goal;
            }
            a.flight = match path {
                Some(p) => Some(Flight {
                    goal: Some(p.goal),
                    points: cfg.controller.reference_points(&p.trajectory, |_| p.wind, craft, t_s),
                    start_tick: tick,
                }),
                None if a.x.v.norm() >= cfg.arrival_speed => {
                    let hold = desirable_states(&[a.x.position_2d()], &[], Vec2::ZERO, &cfg.planner.trajectory_params());
                    Some(Flight { goal: None, points: cfg.controller.reference_points(&hold, |_| d_now, craft, t_s), start_tick: tick })
                }
                None => None,
            };
        }

        if let Some(every) = cfg.trace_every {
            if tick.is_multiple_of(every) {
                for a in &agents {
                    let p = a.x.position_2d();
                    trace.push(TraceRow { t: tick as f64 * t_s, uav: a.id, x: p.x, y: p.y, goal: a.goal, energy_j: a.energy });
                }
            }
        }

        // termination
        let busy = agents.iter().any(|a| a.flight.is_some() || a.replan_due);
        if !busy && !force_division {
            break;
        }
        if tick >= max_ticks {
            timed_out = true;
            break;
        }

        // flight
        for a in agents.iter_mut() {
            let Some(f) = &a.flight else {
                a.idle += hover_power * t_s;
                continue;
            };
            let j = (tick - f.start_tick) as usize;
            let target = &f.points[(j + 1).min(f.points.len() - 1)];
            let out = cfg.controller.command(&a.x, target, d_now, craft);
            a.energy += rotor_power(&out.rotor_speeds, craft) * t_s;
            a.x = step_dynamics(&a.x, &out.input, d_now, craft, t_s)?;
            let slow = a.x.v.norm() < cfg.arrival_speed;
            let Some(goal) = f.goal else {
                if slow {
                    a.flight = None;
                }
                continue;
            };
            if slow && a.x.position_2d().distance(node_pos[&goal]) <= arrival_radius {
                a.flight = None;
                a.goal_set.remove(&goal);
                a.known_visited.insert(goal);
                a.replan_due = true;
                visited.insert(goal);
                record.visits.push(Visit { tick: tick + 1, uav: a.id, node: goal, seq: record.choices.len() });
                events.push(Event::Arrival { tick: tick + 1, uav: a.id, node: goal });
            }
        }
        tick += 1;
    }

    record.termination_tick = tick;
    for a in &agents {
        record.per_uav_energy.insert(a.id, EnergyJ::new(a.energy));
        record.per_uav_idle_energy.insert(a.id, EnergyJ::new(a.idle));
    }
    let completed = !timed_out && visited == all_nodes;
    Ok(MissionOutcome { record, events, trace, completed, timed_out, divisions: epoch, plans })
}
