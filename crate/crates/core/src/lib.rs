//! Decentralized, wind-aware routing for a fleet of quadrotors visiting nodes
//! on a hexagonal grid.

pub mod disturbance;
pub mod geometry;
pub mod hexgrid;
pub mod quadrotor;
pub mod astar;
pub mod pid;
pub mod division;
pub mod msgbus;
pub mod exec;
pub mod mission;
pub mod harness;
