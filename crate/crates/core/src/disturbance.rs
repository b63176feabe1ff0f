//! Wind model: the duty-cycled experiment pattern, recorded traces, and the
//! worst/best-case winds used to bound energy.

use crate::geometry::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Planar wind velocity `[dx, dy]` in m/s. Spatially uniform over the area.
pub type WindVector = Vec2;

pub const LOW_WIND_MPS: f64 = 2.0;
pub const HIGH_WIND_MPS: f64 = 8.0;

#[derive(Debug, Error)]
pub enum DisturbanceError {
    #[error("travel direction has zero length")]
    DegenerateDirection,
    #[error("wind trace line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error("wind trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compass direction the wind blows *toward*. A wind "from north to south"
/// is [`Heading::South`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    North,
    South,
    East,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::East, Heading::West];

    pub fn unit(self) -> Vec2 {
        match self {
            Heading::North => Vec2::new(0.0, 1.0),
            Heading::South => Vec2::new(0.0, -1.0),
            Heading::East => Vec2::new(1.0, 0.0),
            Heading::West => Vec2::new(-1.0, 0.0),
        }
    }
}

/// Wind that blows for `blow_s` out of every `cycle_s`, in a direction drawn
/// uniformly from the four compass headings once per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindPattern {
    pub speed: f64,
    pub blow_s: f64,
    pub cycle_s: f64,
    pub seed: u64,
}

impl WindPattern {
    pub fn new(speed: f64, seed: u64) -> Self {
        Self { speed, blow_s: 30.0, cycle_s: 40.0, seed }
    }

    pub fn low(seed: u64) -> Self {
        Self::new(LOW_WIND_MPS, seed)
    }

    pub fn high(seed: u64) -> Self {
        Self::new(HIGH_WIND_MPS, seed)
    }

    /// Heading used throughout cycle `cycle`. Pure function of `(seed, cycle)`.
    pub fn heading(&self, cycle: u64) -> Heading {
        let mixed = self.seed ^ cycle.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(mixed);
        Heading::ALL[rng.gen_range(0..4)]
    }

    /// Wind at time index `k` for sampling period `t_s`.
    ///
    /// Works in whole steps so duty-cycle boundaries land exactly on step
    /// edges: with the defaults and `t_s = 0.005`, steps `[0, 6000)` of every
    /// 8000 are windy.
    pub fn wind_at(&self, k: u64, t_s: f64) -> WindVector {
        let cycle_steps = ((self.cycle_s / t_s).round() as u64).max(1);
        let blow_steps = (self.blow_s / t_s).round() as u64;
        let cycle = k / cycle_steps;
        if k % cycle_steps < blow_steps {
            self.heading(cycle).unit() * self.speed
        } else {
            WindVector::ZERO
        }
    }

    /// Wind at continuous time `t` seconds.
    pub fn wind_at_time(&self, t: f64) -> WindVector {
        let t = t.max(0.0);
        let cycle = (t / self.cycle_s).floor();
        let phase = t - cycle * self.cycle_s;
        if phase < self.blow_s {
            self.heading(cycle as u64).unit() * self.speed
        } else {
            WindVector::ZERO
        }
    }
}

/// Piecewise-constant wind read from `(time_s, dx, dy)` rows. Each row holds
/// until the next one; times before the first row use the first row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindTrace {
    samples: Vec<(f64, WindVector)>,
}

impl WindTrace {
    pub fn new(mut samples: Vec<(f64, WindVector)>) -> Result<Self, DisturbanceError> {
        if samples.is_empty() {
            return Err(DisturbanceError::EmptyTrace);
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { samples })
    }

    /// Parses CSV text with columns `time_s,dx,dy`. A header line is allowed.
    pub fn parse_csv(text: &str) -> Result<Self, DisturbanceError> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(DisturbanceError::TraceParse { line: i + 1, msg: format!("expected 3 columns, got {}", fields.len()) });
            }
            let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) => samples.push((v[0], Vec2::new(v[1], v[2]))),
                Err(_) if samples.is_empty() && i == 0 => continue, // header
                Err(e) => return Err(DisturbanceError::TraceParse { line: i + 1, msg: e.to_string() }),
            }
        }
        Self::new(samples)
    }

    pub fn load_csv(path: &Path) -> Result<Self, DisturbanceError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn wind_at_time(&self, t: f64) -> WindVector {
        let idx = self.samples.partition_point(|(ts, _)| *ts <= t);
        self.samples[idx.saturating_sub(1)].1
    }
}

/// Source of the actual wind seen during a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindField {
    Calm,
    Constant { wind: WindVector },
    Pattern(WindPattern),
    Trace(WindTrace),
}

impl WindField {
    pub fn at_step(&self, k: u64, t_s: f64) -> WindVector {
        match self {
            WindField::Calm => WindVector::ZERO,
            WindField::Constant { wind } => *wind,
            WindField::Pattern(p) => p.wind_at(k, t_s),
            WindField::Trace(tr) => tr.wind_at_time(k as f64 * t_s),
        }
    }
}

/// Pure headwind at magnitude `cap` against `travel_dir`.
pub fn worst_case_wind(cap: f64, travel_dir: Vec2) -> Result<WindVector, DisturbanceError> {
    let unit = travel_dir.normalized().ok_or(DisturbanceError::DegenerateDirection)?;
    Ok(unit * -cap)
}

/// Pure tailwind at magnitude `cap` along `travel_dir`.
pub fn best_case_wind(cap: f64, travel_dir: Vec2) -> Result<WindVector, DisturbanceError> {
    let unit = travel_dir.normalized().ok_or(DisturbanceError::DegenerateDirection)?;
    Ok(unit * cap)
}
