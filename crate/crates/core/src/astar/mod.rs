//! Energy-aware A* over the hex grid.
//!
//! Edge weights are straight-hop travel energies between adjacent hex
//! centers at maximum power under a frozen wind; the heuristic is the
//! straight-line travel energy from a hex center to the goal center. Under
//! a constant wind the hop energy is a gauge function of the displacement
//! (positively homogeneous and subadditive), so the heuristic is consistent
//! and the search returns the same cost as an exhaustive shortest-path
//! search, tailwind or not.

pub mod trajectory;

use crate::disturbance::WindVector;
use crate::geometry::{Position2D, Vec2};
use crate::hexgrid::{GridError, HexCoord, HexGrid, NodeId};
use crate::quadrotor::{ground_speed_along, max_relative_speed, travel_energy_with, CraftParams, EnergyJ, QuadError, UavState};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use thiserror::Error;
pub use trajectory::{desirable_states, segment_ground_speed, Trajectory, TrajectoryParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start hex {0} is an obstacle")]
    StartOnObstacle(HexCoord),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Craft(#[from] QuadError),
}

/// Settings for turning a hex path into a reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlannerConfig {
    /// Airspeed the reference is built for. Ground speed per segment follows
    /// from it and the frozen wind.
    pub cruise_airspeed: f64,
    /// Floor on the per-segment ground speed.
    pub min_ground_speed: f64,
    pub altitude: f64,
    pub t_s: f64,
    pub min_segment_s: f64,
    pub max_accel: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { cruise_airspeed: 4.0, min_ground_speed: 1.0, altitude: 5.0, t_s: 0.005, min_segment_s: 0.1, max_accel: 6.0 }
    }
}

impl PlannerConfig {
    /// Cruise airspeed 2 m/s above the wind cap, so headwind segments still
    /// make progress at the reference speed.
    pub fn for_wind_cap(cap: f64) -> Self {
        Self { cruise_airspeed: cap + 2.0, ..Self::default() }
    }

    pub fn trajectory_params(&self) -> TrajectoryParams {
        TrajectoryParams { t_s: self.t_s, altitude: self.altitude, min_segment_s: self.min_segment_s, max_accel: self.max_accel }
    }
}

/// Book-keeping of one search, indexed by the grid's dense hex index.
#[derive(Debug, Clone)]
pub struct SearchRecord {
    pub hexes: Vec<HexCoord>,
    pub g: Vec<EnergyJ>,
    pub f: Vec<EnergyJ>,
    pub parent: Vec<Option<usize>>,
    /// Predicted arrival time in seconds after departure.
    pub t_reach: Vec<f64>,
    pub open: Vec<bool>,
    pub closed: Vec<bool>,
    /// Hexes in the order they were closed.
    pub expansion_order: Vec<HexCoord>,
    pub start: usize,
    pub goal: usize,
    pub reached: bool,
}

impl SearchRecord {
    /// Hex path from start to goal, or `None` when the goal was not reached.
    pub fn build_path(&self) -> Option<Vec<HexCoord>> {
        if !self.reached {
            return None;
        }
        let mut path = vec![self.hexes[self.goal]];
        let mut cur = self.goal;
        while let Some(p) = self.parent[cur] {
            path.push(self.hexes[p]);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    /// One expanded hex per line as `q,r`, for golden comparisons.
    pub fn dump_expansions(&self) -> String {
        let mut out = String::new();
        for h in &self.expansion_order {
            let _ = writeln!(out, "{},{}", h.q, h.r);
        }
        out
    }
}

/// Runs the search from `start` to `goal` under frozen wind `d`.
pub fn search(grid: &HexGrid, start: HexCoord, goal: HexCoord, d: WindVector, params: &CraftParams) -> Result<SearchRecord, PlanError> {
    let start_idx = grid.index_of(start).ok_or(GridError::OutOfBounds(start))?;
    let goal_idx = grid.index_of(goal).ok_or(GridError::OutOfBounds(goal))?;
    if grid.is_obstacle(start) {
        return Err(PlanError::StartOnObstacle(start));
    }
    let v_rel = max_relative_speed(params)?;
    let power = params.max_power();
    let goal_center = grid.center_unchecked(goal);

    let hexes: Vec<HexCoord> = grid.hexes().collect();
    let n = hexes.len();
    let mut rec = SearchRecord {
        hexes,
        g: vec![EnergyJ::INFEASIBLE; n],
        f: vec![EnergyJ::INFEASIBLE; n],
        parent: vec![None; n],
        t_reach: vec![f64::INFINITY; n],
        open: vec![false; n],
        closed: vec![false; n],
        expansion_order: Vec::new(),
        start: start_idx,
        goal: goal_idx,
        reached: false,
    };
    let h = |c: Position2D| travel_energy_with(c, goal_center, d, v_rel, power);

    rec.g[start_idx] = EnergyJ::ZERO;
    rec.f[start_idx] = h(grid.center_unchecked(start));
    rec.t_reach[start_idx] = 0.0;
    rec.open[start_idx] = true;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((rec.f[start_idx], start)));

    while let Some(Reverse((f, lc))) = heap.pop() {
        let ci = grid.index_of(lc).expect("heap holds grid hexes");
        if rec.closed[ci] || f != rec.f[ci] {
            continue; // stale entry
        }
        if ci == goal_idx {
            rec.reached = true;
            break;
        }
        rec.open[ci] = false;
        rec.closed[ci] = true;
        rec.expansion_order.push(lc);
        let pc = grid.center_unchecked(lc);
        for ln in grid.neighbors_unchecked(lc) {
            let ni = grid.index_of(ln).expect("neighbors are in the grid");
            if rec.closed[ni] || grid.is_obstacle(ln) {
                continue;
            }
            let pn = grid.center_unchecked(ln);
            let edge = travel_energy_with(pc, pn, d, v_rel, power);
            if !edge.is_feasible() {
                continue;
            }
            rec.open[ni] = true;
            let new_g = rec.g[ci] + edge;
            if new_g >= rec.g[ni] {
                continue;
            }
            rec.parent[ni] = Some(ci);
            rec.g[ni] = new_g;
            rec.f[ni] = new_g + h(pn);
            let dir = (pn - pc) * (1.0 / pc.distance(pn));
            let hop_time = pc.distance(pn) / ground_speed_along(v_rel, d, dir).expect("feasible edge has forward speed");
            rec.t_reach[ni] = rec.t_reach[ci] + hop_time;
            heap.push(Reverse((rec.f[ni], ln)));
        }
    }
    Ok(rec)
}

/// A planned route together with its sampled reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DesirablePath {
    pub goal: NodeId,
    pub hexes: Vec<HexCoord>,
    /// First entry is the UAV's own position, the rest are hex centers.
    pub waypoints: Vec<Position2D>,
    pub segment_speeds: Vec<f64>,
    pub trajectory: Trajectory,
    /// Search cost at maximum power.
    pub cost: EnergyJ,
    /// Wind the plan was made under.
    pub wind: WindVector,
}

impl DesirablePath {
    pub fn states(&self) -> &[UavState] {
        &self.trajectory.states
    }

    /// Number of sampling periods from departure to arrival.
    pub fn predicted_travel_time(&self) -> usize {
        self.trajectory.steps()
    }
}

/// Plans from a UAV at rest at `start` to node `goal`.
///
/// Returns `Ok(None)` when no obstacle-free, wind-feasible route exists.
pub fn plan_path(
    grid: &HexGrid,
    start: Position2D,
    goal: NodeId,
    d_now: WindVector,
    params: &CraftParams,
    cfg: &PlannerConfig,
) -> Result<Option<DesirablePath>, PlanError> {
    plan_path_from(grid, start, Vec2::ZERO, goal, d_now, params, cfg)
}

/// Like [`plan_path`] for a UAV currently moving with `start_velocity`; the
/// reference begins with that velocity so tracking starts without a jump.
pub fn plan_path_from(
    grid: &HexGrid,
    start: Position2D,
    start_velocity: Vec2,
    goal: NodeId,
    d_now: WindVector,
    params: &CraftParams,
    cfg: &PlannerConfig,
) -> Result<Option<DesirablePath>, PlanError> {
    let goal_hex = grid.node_hex(goal)?;
    let start_hex = grid.nearest_hex(start)?;
    let rec = search(grid, start_hex, goal_hex, d_now, params)?;
    let Some(hexes) = rec.build_path() else {
        return Ok(None);
    };
    let cost = rec.g[rec.goal];

    let mut waypoints: Vec<Position2D> = Vec::with_capacity(hexes.len() + 1);
    waypoints.push(start);
    for h in &hexes[1..] {
        waypoints.push(grid.center_unchecked(*h));
    }
    let goal_center = grid.center_unchecked(goal_hex);
    if hexes.len() == 1 && start.distance(goal_center) > 1e-9 * grid.side_m() {
        waypoints.push(goal_center);
    }
    let segment_speeds: Vec<f64> = waypoints
        .windows(2)
        .map(|w| {
            let dir = (w[1] - w[0]).normalized().unwrap_or(Vec2::new(1.0, 0.0));
            segment_ground_speed(cfg.cruise_airspeed, d_now, dir, cfg.min_ground_speed)
        })
        .collect();
    let trajectory = desirable_states(&waypoints, &segment_speeds, start_velocity, &cfg.trajectory_params());
    Ok(Some(DesirablePath { goal, hexes, waypoints, segment_speeds, trajectory, cost, wind: d_now }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain Dijkstra over the same edge weights, O(V^2).
    fn dijkstra(grid: &HexGrid, start: HexCoord, goal: HexCoord, d: WindVector, params: &CraftParams) -> EnergyJ {
        let vr = max_relative_speed(params).unwrap();
        let power = params.max_power();
        let hexes: Vec<HexCoord> = grid.hexes().collect();
        let mut dist = vec![f64::INFINITY; hexes.len()];
        let mut done = vec![false; hexes.len()];
        dist[grid.index_of(start).unwrap()] = 0.0;
        loop {
            let next = (0..hexes.len()).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let Some(u) = next else { break };
            done[u] = true;
            for nb in grid.neighbors(hexes[u]).unwrap() {
                if grid.is_obstacle(nb) {
                    continue;
                }
                let e = travel_energy_with(grid.center_unchecked(hexes[u]), grid.center_unchecked(nb), d, vr, power).value();
                let v = grid.index_of(nb).unwrap();
                if dist[u] + e < dist[v] {
                    dist[v] = dist[u] + e;
                }
            }
        }
        EnergyJ::new(dist[grid.index_of(goal).unwrap()])
    }

    fn random_grid(rng: &mut ChaCha8Rng) -> HexGrid {
        let w = rng.gen_range(3.0..12.0);
        let h = rng.gen_range(3.0..12.0);
        let mut grid = HexGrid::new(w, h, 1.0).unwrap();
        let hexes: Vec<HexCoord> = grid.hexes().collect();
        for _ in 0..rng.gen_range(0..=20) {
            let _ = grid.add_obstacle(hexes[rng.gen_range(0..hexes.len())]);
        }
        grid
    }

    #[test]
    fn matches_dijkstra_on_random_grids() {
        let params = CraftParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut reached = 0;
        for _ in 0..150 {
            let grid = random_grid(&mut rng);
            let free: Vec<HexCoord> = grid.free_hexes().collect();
            if free.len() < 2 {
                continue;
            }
            let s = free[rng.gen_range(0..free.len())];
            let g = free[rng.gen_range(0..free.len())];
            let cap = if rng.gen_bool(0.5) { 8.0 } else { 60.0 };
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = Vec2::new(ang.cos(), ang.sin()) * rng.gen_range(0.0..cap);
            let rec = search(&grid, s, g, d, &params).unwrap();
            let oracle = dijkstra(&grid, s, g, d, &params);
            if rec.reached {
                reached += 1;
                assert!((rec.g[rec.goal].value() - oracle.value()).abs() <= 1e-9 * oracle.value().max(1.0));
            } else {
                assert!(!oracle.is_feasible());
            }
        }
        assert!(reached > 50);
    }

    #[test]
    fn goal_in_start_hex_is_free() {
        let mut grid = HexGrid::new(10.0, 10.0, 1.0).unwrap();
        grid.add_node(NodeId(0), HexCoord::new(2, 2)).unwrap();
        let start = grid.center_unchecked(HexCoord::new(2, 2));
        let p = plan_path(&grid, start, NodeId(0), Vec2::new(0.0, 2.0), &CraftParams::default(), &PlannerConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert_eq!(p.cost, EnergyJ::ZERO);
        assert_eq!(p.predicted_travel_time(), 0);
        assert_eq!(p.states().len(), 1);
    }

    #[test]
    fn wall_makes_goal_unreachable() {
        let mut grid = HexGrid::new(12.0, 8.0, 1.0).unwrap();
        let wall: Vec<HexCoord> = grid.hexes().filter(|h| h.q == 4).collect();
        for h in wall {
            grid.add_obstacle(h).unwrap();
        }
        grid.add_node(NodeId(1), HexCoord::new(7, 0)).unwrap();
        let start = grid.center_unchecked(HexCoord::new(1, 1));
        let out = plan_path(&grid, start, NodeId(1), Vec2::ZERO, &CraftParams::default(), &PlannerConfig::default()).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn start_on_obstacle_is_rejected() {
        let mut grid = HexGrid::new(6.0, 6.0, 1.0).unwrap();
        grid.add_obstacle(HexCoord::new(1, 1)).unwrap();
        grid.add_node(NodeId(0), HexCoord::new(3, 0)).unwrap();
        let start = grid.center_unchecked(HexCoord::new(1, 1));
        let err = plan_path(&grid, start, NodeId(0), Vec2::ZERO, &CraftParams::default(), &PlannerConfig::default()).unwrap_err();
        assert_eq!(err, PlanError::StartOnObstacle(HexCoord::new(1, 1)));
    }

    #[test]
    fn path_avoids_obstacles_and_steps_between_neighbors() {
        let mut grid = HexGrid::new(15.0, 10.0, 1.0).unwrap();
        for r in 0..4 {
            grid.add_obstacle(HexCoord::new(5, r)).unwrap();
        }
        grid.add_node(NodeId(3), HexCoord::new(9, 0)).unwrap();
        let start = grid.center_unchecked(HexCoord::new(1, 0));
        let p = plan_path(&grid, start, NodeId(3), Vec2::new(2.0, 0.0), &CraftParams::default(), &PlannerConfig::default())
            .unwrap()
            .unwrap();
        assert!(p.hexes.iter().all(|h| !grid.is_obstacle(*h)));
        assert!(p.hexes.windows(2).all(|w| w[0].hex_distance(w[1]) == 1));
        assert_eq!(p.hexes.len(), p.waypoints.len());
        assert_eq!(*p.hexes.last().unwrap(), HexCoord::new(9, 0));
        let last = p.states().last().unwrap();
        assert!((last.position_2d() - grid.center_unchecked(HexCoord::new(9, 0))).norm() < 1e-9);
        assert_eq!(p.states().len(), p.predicted_travel_time() + 1);
    }

    #[test]
    fn search_is_deterministic() {
        let grid = HexGrid::new(12.0, 12.0, 1.0).unwrap();
        let params = CraftParams::default();
        let a = search(&grid, HexCoord::new(0, 0), HexCoord::new(7, -1), Vec2::ZERO, &params).unwrap();
        let b = search(&grid, HexCoord::new(0, 0), HexCoord::new(7, -1), Vec2::ZERO, &params).unwrap();
        assert_eq!(a.dump_expansions(), b.dump_expansions());
        assert_eq!(a.build_path(), b.build_path());
    }

    #[test]
    fn record_invariants_hold() {
        let mut grid = HexGrid::new(12.0, 12.0, 1.0).unwrap();
        grid.add_obstacle(HexCoord::new(3, 2)).unwrap();
        let rec = search(&grid, HexCoord::new(0, 1), HexCoord::new(6, 1), Vec2::new(0.0, -8.0), &CraftParams::default()).unwrap();
        assert_eq!(rec.g[rec.start], EnergyJ::ZERO);
        for i in 0..rec.hexes.len() {
            assert!(!(rec.open[i] && rec.closed[i]));
            if rec.closed[i] {
                let mut cur = i;
                let mut hops = 0;
                while let Some(p) = rec.parent[cur] {
                    cur = p;
                    hops += 1;
                    assert!(hops <= rec.hexes.len());
                }
                assert_eq!(cur, rec.start);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn heuristic_never_exceeds_remaining_cost(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = random_grid(&mut rng);
            let free: Vec<HexCoord> = grid.free_hexes().collect();
            prop_assume!(!free.is_empty());
            let g = free[rng.gen_range(0..free.len())];
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = Vec2::new(ang.cos(), ang.sin()) * rng.gen_range(0.0..30.0);
            let params = CraftParams::default();
            let vr = max_relative_speed(&params).unwrap();
            for &l in &free {
                let exact = dijkstra(&grid, l, g, d, &params);
                let h = travel_energy_with(grid.center_unchecked(l), grid.center_unchecked(g), d, vr, params.max_power());
                if exact.is_feasible() {
                    prop_assert!(h.value() <= exact.value() * (1.0 + 1e-12) + 1e-12);
                }
            }
        }
    }
}
