//! Hexagonal tessellation of the rectangular flight area.
//!
//! Hexes are flat-top and addressed with axial coordinates `(q, r)`. The
//! center of `(q, r)` sits at `x = 1.5 * side * q`,
//! `y = sqrt(3) * side * (r + q / 2)`, so hex `(0, 0)` is centered on the
//! rectangle origin. The grid keeps every hex whose center lies inside the
//! `[0, width] x [0, height]` rectangle (edges inclusive); partial hexes whose
//! centers fall outside are clipped away.
//!
//! `y` grows toward north and `x` toward east.

use crate::geometry::{Position2D, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
/// Relative slack used for boundary and tie tests, scaled by the side length.
const GEOM_EPS: f64 = 1e-9;

/// Axial offsets in neighbor order: east-north-east (30 degrees), then
/// counter-clockwise in 60 degree steps.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HexCoord {
    pub q: i32,
    pub r: i32,
}

impl HexCoord {
    pub const fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }

    /// Hex-step distance between two coordinates, ignoring bounds and obstacles.
    pub fn hex_distance(self, other: HexCoord) -> u32 {
        let dq = self.q - other.q;
        let dr = self.r - other.r;
        ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
    }

    fn offset(self, (dq, dr): (i32, i32)) -> HexCoord {
        HexCoord::new(self.q + dq, self.r + dr)
    }
}

impl fmt::Display for HexCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.q, self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UavId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UavId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid dimensions {width} x {height} with side {side}")]
    InvalidDimensions { width: f64, height: f64, side: f64 },
    #[error("hex {0} is outside the grid")]
    OutOfBounds(HexCoord),
    #[error("position ({x:.3}, {y:.3}) is outside the flight area")]
    PositionOutside { x: f64, y: f64 },
    #[error("node {node} would sit on obstacle hex {hex}")]
    NodeOnObstacle { node: NodeId, hex: HexCoord },
    #[error("hex {hex} already hosts node {existing}")]
    HexOccupied { hex: HexCoord, existing: NodeId },
    #[error("node id {0} is already in use")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("depot node {node} is already assigned to uav {owner}")]
    DepotTaken { node: NodeId, owner: UavId },
    #[error("uav {0} already has a depot")]
    UavHasDepot(UavId),
}

#[derive(Debug, Clone, Copy)]
struct Column {
    r_min: i32,
    r_max: i32,
    offset: usize,
}

/// Hexagon grid with obstacles, node placement and depot assignment.
///
/// Immutable once built; share it by reference between agents.
#[derive(Debug, Clone)]
pub struct HexGrid {
    width_m: f64,
    height_m: f64,
    side_m: f64,
    columns: Vec<Column>,
    hex_count: usize,
    obstacles: BTreeSet<HexCoord>,
    nodes: BTreeMap<NodeId, HexCoord>,
    node_by_hex: HashMap<HexCoord, NodeId>,
    depots: BTreeMap<UavId, NodeId>,
}

impl HexGrid {
    pub fn new(width_m: f64, height_m: f64, side_m: f64) -> Result<Self, GridError> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(width_m) || !valid(height_m) || !valid(side_m) {
            return Err(GridError::InvalidDimensions { width: width_m, height: height_m, side: side_m });
        }
        let eps = GEOM_EPS;
        let q_max = (width_m / (1.5 * side_m) + eps).floor() as i32;
        let row_span = height_m / (SQRT_3 * side_m);
        let mut columns = Vec::with_capacity(q_max as usize + 1);
        let mut offset = 0usize;
        for q in 0..=q_max {
            let half_q = q as f64 / 2.0;
            let r_min = (-half_q - eps).ceil() as i32;
            let r_max = (row_span - half_q + eps).floor() as i32;
            columns.push(Column { r_min, r_max, offset });
            if r_max >= r_min {
                offset += (r_max - r_min + 1) as usize;
            }
        }
        Ok(Self {
            width_m,
            height_m,
            side_m,
            columns,
            hex_count: offset,
            obstacles: BTreeSet::new(),
            nodes: BTreeMap::new(),
            node_by_hex: HashMap::new(),
            depots: BTreeMap::new(),
        })
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn side_m(&self) -> f64 {
        self.side_m
    }

    /// Center-to-center distance of adjacent hexes.
    pub fn hop_length(&self) -> f64 {
        self.side_m * SQRT_3
    }

    pub fn hex_count(&self) -> usize {
        self.hex_count
    }

    pub fn contains(&self, h: HexCoord) -> bool {
        self.index_of(h).is_some()
    }

    /// Dense index in `0..hex_count()`, ordered lexicographically by `(q, r)`.
    pub fn index_of(&self, h: HexCoord) -> Option<usize> {
        if h.q < 0 {
            return None;
        }
        let col = self.columns.get(h.q as usize)?;
        if h.r < col.r_min || h.r > col.r_max {
            return None;
        }
        Some(col.offset + (h.r - col.r_min) as usize)
    }

    /// All grid hexes in lexicographic `(q, r)` order.
    pub fn hexes(&self) -> impl Iterator<Item = HexCoord> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(q, c)| (c.r_min..=c.r_max).map(move |r| HexCoord::new(q as i32, r)))
    }

    /// Center of `h` without a bounds check.
    #[inline]
    pub fn center_unchecked(&self, h: HexCoord) -> Position2D {
        let s = self.side_m;
        Vec2::new(1.5 * s * h.q as f64, SQRT_3 * s * (h.r as f64 + h.q as f64 / 2.0))
    }

    pub fn center_position(&self, h: HexCoord) -> Result<Position2D, GridError> {
        if !self.contains(h) {
            return Err(GridError::OutOfBounds(h));
        }
        Ok(self.center_unchecked(h))
    }

    /// In-grid neighbors of `h` (obstacles included), east-north-east first
    /// and then counter-clockwise.
    pub fn neighbors(&self, h: HexCoord) -> Result<Vec<HexCoord>, GridError> {
        if !self.contains(h) {
            return Err(GridError::OutOfBounds(h));
        }
        Ok(self.neighbors_unchecked(h).collect())
    }

    pub(crate) fn neighbors_unchecked(&self, h: HexCoord) -> impl Iterator<Item = HexCoord> + '_ {
        NEIGHBOR_OFFSETS.iter().map(move |&o| h.offset(o)).filter(move |n| self.contains(*n))
    }

    pub fn contains_position(&self, p: Position2D) -> bool {
        let tol = GEOM_EPS * self.side_m;
        p.x.is_finite()
            && p.y.is_finite()
            && p.x >= -tol
            && p.y >= -tol
            && p.x <= self.width_m + tol
            && p.y <= self.height_m + tol
    }

    /// The grid hex whose region contains `p`.
    ///
    /// Hex regions are the cells of the nearest-center partition. A point on
    /// a shared edge or vertex goes to the lexicographically smallest `(q, r)`
    /// among the tied hexes. Near the rectangle boundary, where the true
    /// nearest center was clipped away, the nearest in-grid hex is used.
    pub fn containing_hex(&self, p: Position2D) -> Result<HexCoord, GridError> {
        if !self.contains_position(p) {
            return Err(GridError::PositionOutside { x: p.x, y: p.y });
        }
        let s = self.side_m;
        let qf = p.x / (1.5 * s);
        let rf = p.y / (SQRT_3 * s) - qf / 2.0;
        let guess = cube_round(qf, rf);

        let mut best: Option<(f64, HexCoord)> = None;
        let mut candidates = Vec::with_capacity(19);
        for dq in -2..=2i32 {
            for dr in -2..=2i32 {
                let c = HexCoord::new(guess.q + dq, guess.r + dr);
                if c.hex_distance(guess) <= 2 && self.contains(c) {
                    let d = self.center_unchecked(c).distance(p);
                    candidates.push((d, c));
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
        }
        let (best_d, _) = best.ok_or(GridError::PositionOutside { x: p.x, y: p.y })?;
        let tol = GEOM_EPS * s;
        let winner = candidates
            .into_iter()
            .filter(|(d, _)| *d <= best_d + tol)
            .map(|(_, c)| c)
            .min()
            .expect("best candidate is within tolerance of itself");
        Ok(winner)
    }

    /// Like [`containing_hex`](Self::containing_hex) but tolerates points up
    /// to one side length outside the rectangle, as a craft overshooting a
    /// boundary node produces. Such points are clamped onto the boundary first.
    pub fn nearest_hex(&self, p: Position2D) -> Result<HexCoord, GridError> {
        let s = self.side_m;
        let inside_margin = p.x >= -s && p.y >= -s && p.x <= self.width_m + s && p.y <= self.height_m + s;
        if !inside_margin || !p.x.is_finite() || !p.y.is_finite() {
            return Err(GridError::PositionOutside { x: p.x, y: p.y });
        }
        self.containing_hex(Position2D::new(p.x.clamp(0.0, self.width_m), p.y.clamp(0.0, self.height_m)))
    }

    pub fn is_obstacle(&self, h: HexCoord) -> bool {
        self.obstacles.contains(&h)
    }

    pub fn obstacles(&self) -> &BTreeSet<HexCoord> {
        &self.obstacles
    }

    pub fn add_obstacle(&mut self, h: HexCoord) -> Result<(), GridError> {
        if !self.contains(h) {
            return Err(GridError::OutOfBounds(h));
        }
        if let Some(&node) = self.node_by_hex.get(&h) {
            return Err(GridError::NodeOnObstacle { node, hex: h });
        }
        self.obstacles.insert(h);
        Ok(())
    }

    pub fn add_node(&mut self, id: NodeId, h: HexCoord) -> Result<(), GridError> {
        if !self.contains(h) {
            return Err(GridError::OutOfBounds(h));
        }
        if self.nodes.contains_key(&id) {
            return Err(GridError::DuplicateNode(id));
        }
        if self.is_obstacle(h) {
            return Err(GridError::NodeOnObstacle { node: id, hex: h });
        }
        if let Some(&existing) = self.node_by_hex.get(&h) {
            return Err(GridError::HexOccupied { hex: h, existing });
        }
        self.nodes.insert(id, h);
        self.node_by_hex.insert(h, id);
        Ok(())
    }

    /// Places `uav` on depot `node`. Each depot hosts at most one UAV and
    /// each UAV has exactly one depot.
    pub fn assign_depot(&mut self, uav: UavId, node: NodeId) -> Result<(), GridError> {
        if !self.nodes.contains_key(&node) {
            return Err(GridError::UnknownNode(node));
        }
        if self.depots.contains_key(&uav) {
            return Err(GridError::UavHasDepot(uav));
        }
        if let Some((&owner, _)) = self.depots.iter().find(|(_, &n)| n == node) {
            return Err(GridError::DepotTaken { node, owner });
        }
        self.depots.insert(uav, node);
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, HexCoord> {
        &self.nodes
    }

    pub fn node_hex(&self, id: NodeId) -> Result<HexCoord, GridError> {
        self.nodes.get(&id).copied().ok_or(GridError::UnknownNode(id))
    }

    pub fn node_position(&self, id: NodeId) -> Result<Position2D, GridError> {
        Ok(self.center_unchecked(self.node_hex(id)?))
    }

    pub fn node_at(&self, h: HexCoord) -> Option<NodeId> {
        self.node_by_hex.get(&h).copied()
    }

    pub fn depots(&self) -> &BTreeMap<UavId, NodeId> {
        &self.depots
    }

    pub fn uavs(&self) -> impl Iterator<Item = UavId> + '_ {
        self.depots.keys().copied()
    }

    /// Non-obstacle hexes in lexicographic order.
    pub fn free_hexes(&self) -> impl Iterator<Item = HexCoord> + '_ {
        self.hexes().filter(move |h| !self.is_obstacle(*h))
    }
}

fn cube_round(qf: f64, rf: f64) -> HexCoord {
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    HexCoord::new(q as i32, r as i32)
}

#[cfg(test)]
mod tests {
    #[test]
    fn nearest_hex_tolerates_small_overshoot() {
        let g = HexGrid::new(10.0, 10.0, 1.0).unwrap();
        assert_eq!(g.nearest_hex(Position2D::new(-0.03, 0.01)).unwrap(), HexCoord::new(0, 0));
        assert!(g.containing_hex(Position2D::new(-0.03, 0.01)).is_err());
        assert!(g.nearest_hex(Position2D::new(-1.5, 0.0)).is_err());
    }

    use super::*;

    fn grid(w: f64, h: f64) -> HexGrid {
        HexGrid::new(w, h, 1.0).unwrap()
    }

    /// Point-in-hexagon test against the explicit flat-top polygon.
    fn polygon_contains(center: Vec2, side: f64, p: Vec2) -> bool {
        let verts: Vec<Vec2> = (0..6)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_3 * k as f64;
                center + Vec2::new(side * a.cos(), side * a.sin())
            })
            .collect();
        (0..6).all(|k| {
            let a = verts[k];
            let b = verts[(k + 1) % 6];
            (b - a).cross(p - a) >= -1e-12
        })
    }

    #[test]
    fn origin_anchor() {
        let g = grid(10.0, 10.0);
        assert_eq!(g.center_position(HexCoord::new(0, 0)).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn adjacent_centers_are_sqrt3_apart() {
        let g = grid(20.0, 20.0);
        let h = HexCoord::new(4, 2);
        let c = g.center_position(h).unwrap();
        let ns = g.neighbors(h).unwrap();
        assert_eq!(ns.len(), 6);
        for n in ns {
            let d = g.center_position(n).unwrap().distance(c);
            assert!((d - 3f64.sqrt()).abs() < 1e-12, "{n}: {d}");
        }
    }

    #[test]
    fn neighbor_order_is_counter_clockwise_from_30_degrees() {
        let g = grid(20.0, 20.0);
        let h = HexCoord::new(4, 2);
        let c = g.center_unchecked(h);
        let angles: Vec<f64> = g
            .neighbors(h)
            .unwrap()
            .into_iter()
            .map(|n| {
                let d = g.center_unchecked(n) - c;
                d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU).to_degrees()
            })
            .collect();
        let expected = [30.0, 90.0, 150.0, 210.0, 270.0, 330.0];
        for (a, e) in angles.iter().zip(expected) {
            assert!((a - e).abs() < 1e-9, "{angles:?}");
        }
    }

    #[test]
    fn corner_hex_has_few_neighbors() {
        let g = grid(10.0, 10.0);
        assert!(g.neighbors(HexCoord::new(0, 0)).unwrap().len() <= 3);
    }

    #[test]
    fn neighbor_relation_is_symmetric_on_10x10() {
        let g = grid(10.0, 10.0);
        let all: Vec<_> = g.hexes().collect();
        for &a in &all {
            for b in g.neighbors(a).unwrap() {
                assert!(g.neighbors(b).unwrap().contains(&a), "{a} -> {b}");
            }
        }
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let g = grid(10.0, 10.0);
        assert!(matches!(g.center_position(HexCoord::new(-1, 0)), Err(GridError::OutOfBounds(_))));
        assert!(g.neighbors(HexCoord::new(100, 0)).is_err());
        assert!(g.containing_hex(Vec2::new(-0.5, 1.0)).is_err());
        assert!(g.containing_hex(Vec2::new(1.0, 10.5)).is_err());
    }

    #[test]
    fn index_is_dense_and_ordered() {
        let g = grid(52.0, 30.0);
        for (i, h) in g.hexes().enumerate() {
            assert_eq!(g.index_of(h), Some(i));
        }
        assert_eq!(g.hexes().count(), g.hex_count());
        let centers_inside = g.hexes().all(|h| g.contains_position(g.center_unchecked(h)));
        assert!(centers_inside);
    }

    #[test]
    fn containing_hex_round_trips_centers() {
        let g = grid(30.0, 20.0);
        for h in g.hexes() {
            assert_eq!(g.containing_hex(g.center_unchecked(h)).unwrap(), h);
        }
    }

    #[test]
    fn points_near_edges_agree_with_polygon_oracle() {
        let g = grid(30.0, 20.0);
        let h = HexCoord::new(6, 3);
        let c = g.center_unchecked(h);
        for n in g.neighbors(h).unwrap() {
            let m = (c + g.center_unchecked(n)) * 0.5;
            let inward = (c - m).normalized().unwrap();
            let along = Vec2::new(-inward.y, inward.x);
            for t in [-0.4, -0.1, 0.0, 0.25, 0.45] {
                for eps in [1e-6, 1e-3] {
                    let inside = m + along * t + inward * eps;
                    assert!(polygon_contains(c, 1.0, inside));
                    assert!(!polygon_contains(g.center_unchecked(n), 1.0, inside));
                    assert_eq!(g.containing_hex(inside).unwrap(), h);
                    let outside = m + along * t - inward * eps;
                    assert!(polygon_contains(g.center_unchecked(n), 1.0, outside));
                    assert_eq!(g.containing_hex(outside).unwrap(), n);
                }
            }
        }
    }

    #[test]
    fn edge_midpoint_goes_to_smaller_coordinate() {
        let g = grid(30.0, 20.0);
        let h = HexCoord::new(6, 3);
        for n in g.neighbors(h).unwrap() {
            let m = (g.center_unchecked(h) + g.center_unchecked(n)) * 0.5;
            // both polygons contain the midpoint, the tie rule decides
            assert!(polygon_contains(g.center_unchecked(h), 1.0, m));
            assert!(polygon_contains(g.center_unchecked(n), 1.0, m));
            assert_eq!(g.containing_hex(m).unwrap(), h.min(n));
        }
    }

    #[test]
    fn node_placement_invariants() {
        let mut g = grid(10.0, 10.0);
        let h = HexCoord::new(2, 1);
        g.add_obstacle(HexCoord::new(3, 1)).unwrap();
        g.add_node(NodeId(0), h).unwrap();
        assert!(matches!(g.add_node(NodeId(1), h), Err(GridError::HexOccupied { .. })));
        assert!(matches!(
            g.add_node(NodeId(1), HexCoord::new(3, 1)),
            Err(GridError::NodeOnObstacle { .. })
        ));
        assert!(matches!(g.add_obstacle(h), Err(GridError::NodeOnObstacle { .. })));
        g.add_node(NodeId(1), HexCoord::new(1, 1)).unwrap();
        g.assign_depot(UavId(0), NodeId(0)).unwrap();
        assert!(matches!(g.assign_depot(UavId(1), NodeId(0)), Err(GridError::DepotTaken { .. })));
        assert!(matches!(g.assign_depot(UavId(0), NodeId(1)), Err(GridError::UavHasDepot(_))));
        assert_eq!(g.node_at(h), Some(NodeId(0)));
    }
}
