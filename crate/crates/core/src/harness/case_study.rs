//! Hand-built two-uav scenario where a short wind event makes a goal switch pay.

use super::Scenario;
use crate::disturbance::{WindField, WindTrace};
use crate::geometry::Vec2;
use crate::hexgrid::{HexCoord, NodeId, UavId};
use crate::mission::{MissionConfig, Policy};
use crate::quadrotor::CraftParams;

pub const CASE_STUDY_WIND_MPS: f64 = 8.0;

/// Uav 1 starts between node 6 (20 hexes north) and node 4 (21 hexes
/// south). In calm air it heads for node 6; one tick later an 8 m/s wind
/// starts blowing south and stops at 5 s. Uav 2 and its nodes sit far east.
pub fn replanning_case_study() -> Scenario {
    let nodes = [(1, (6, 22)), (2, (30, 10)), (3, (32, 10)), (4, (6, 1)), (5, (30, 13)), (6, (6, 42))]
        .into_iter()
        .map(|(i, (q, r))| (NodeId(i), HexCoord::new(q, r)))
        .collect();
    let samples = vec![(0.0, Vec2::ZERO), (0.005, Vec2::new(0.0, -CASE_STUDY_WIND_MPS)), (5.0, Vec2::ZERO)];
    Scenario {
        width_m: 60.0,
        height_m: 84.0,
        side_m: 1.0,
        obstacles: Vec::new(),
        nodes,
        depots: [(UavId(1), NodeId(1)), (UavId(2), NodeId(2))].into(),
        wind: WindField::Trace(WindTrace::new(samples).expect("non-empty trace")),
        wind_cap: CASE_STUDY_WIND_MPS,
        craft: CraftParams::default(),
    }
}

/// One-time division, online replanning on or off, 0.2 s minimum interval.
pub fn case_study_config(op: bool) -> MissionConfig {
    let mut cfg = MissionConfig::new(Policy::Divided, CASE_STUDY_WIND_MPS).with_nd(None).with_op(op);
    cfg.replan.alpha = 0.2;
    cfg
}
