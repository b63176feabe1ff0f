use super::{ExperimentConfig, WindLevel};
use crate::disturbance::{WindField, WindPattern};
use crate::hexgrid::{GridError, HexCoord, HexGrid, NodeId, UavId};
use crate::quadrotor::CraftParams;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("need {needed} free hexes but the grid has {free}")]
    Capacity { needed: usize, free: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("bad scenario file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

/// A complete, self-contained mission setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub width_m: f64,
    pub height_m: f64,
    pub side_m: f64,
    #[serde(default)]
    pub obstacles: Vec<HexCoord>,
    pub nodes: BTreeMap<NodeId, HexCoord>,
    pub depots: BTreeMap<UavId, NodeId>,
    pub wind: WindField,
    /// Wind magnitude the planners guard against, m/s.
    pub wind_cap: f64,
    #[serde(default)]
    pub craft: CraftParams,
}

impl Scenario {
    pub fn build_grid(&self) -> Result<HexGrid, ScenarioError> {
        let mut grid = HexGrid::new(self.width_m, self.height_m, self.side_m)?;
        for &h in &self.obstacles {
            grid.add_obstacle(h)?;
        }
        for (&id, &h) in &self.nodes {
            grid.add_node(id, h)?;
        }
        for (&uav, &node) in &self.depots {
            grid.assign_depot(uav, node)?;
        }
        Ok(grid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Random scenario for `cfg`: obstacles, depots and nodes on distinct hexes
/// drawn uniformly, depots numbered 1..=n_uavs for uavs 1..=n_uavs.
pub fn generate_scenario(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = HexGrid::new(cfg.width_m, cfg.height_m, 1.0)?;
    let hexes: Vec<HexCoord> = grid.hexes().collect();
    let needed = cfg.obstacles + cfg.n_uavs + cfg.n_nodes;
    if needed > hexes.len() {
        return Err(ScenarioError::Capacity { needed, free: hexes.len() });
    }
    let picks: Vec<HexCoord> = sample(&mut rng, hexes.len(), needed).into_iter().map(|i| hexes[i]).collect();
    let (obstacles, placed) = picks.split_at(cfg.obstacles);
    let nodes: BTreeMap<NodeId, HexCoord> = placed.iter().enumerate().map(|(i, &h)| (NodeId(i as u32 + 1), h)).collect();
    let depots = (1..=cfg.n_uavs as u32).map(|i| (UavId(i), NodeId(i))).collect();
    let wind = match cfg.wind {
        WindLevel::Calm => WindField::Calm,
        level => WindField::Pattern(WindPattern::new(level.speed(), rng.gen())),
    };
    Ok(Scenario {
        width_m: cfg.width_m,
        height_m: cfg.height_m,
        side_m: 1.0,
        obstacles: obstacles.to_vec(),
        nodes,
        depots,
        wind,
        wind_cap: cfg.wind.speed(),
        craft: CraftParams::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ExperimentConfig::default();
        assert_eq!(generate_scenario(&cfg, 7).unwrap(), generate_scenario(&cfg, 7).unwrap());
        assert_ne!(generate_scenario(&cfg, 7).unwrap(), generate_scenario(&cfg, 8).unwrap());
    }

    #[test]
    fn fifty_nodes_land_on_distinct_hexes() {
        let cfg = ExperimentConfig { n_nodes: 50, ..Default::default() };
        for seed in 0..50 {
            let s = generate_scenario(&cfg, seed).unwrap();
            let hexes: BTreeSet<_> = s.nodes.values().collect();
            assert_eq!(hexes.len(), 54);
            assert!(s.obstacles.is_empty());
            let grid = s.build_grid().unwrap();
            assert_eq!(grid.depots().len(), 4);
        }
    }

    #[test]
    fn overfull_grid_is_rejected() {
        let cfg = ExperimentConfig { width_m: 4.0, height_m: 4.0, n_nodes: 50, ..Default::default() };
        assert!(matches!(generate_scenario(&cfg, 1), Err(ScenarioError::Capacity { .. })));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig { obstacles: 10, ..Default::default() };
        let s = generate_scenario(&cfg, 3).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        assert_eq!(s.obstacles.len(), 10);
        s.build_grid().unwrap();
    }
}
