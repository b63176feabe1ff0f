use super::{generate_scenario, mean_ci95, ExperimentConfig, Scenario, Summary};
use crate::mission::{simulate, MissionConfig, MissionError, MissionOutcome, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write;

/// Runs `scenario` with the greedy baseline.
pub fn run_greedy(scenario: &Scenario, cfg: &MissionConfig) -> Result<MissionOutcome, MissionError> {
    let cfg = MissionConfig { policy: Policy::Greedy, ..cfg.clone() };
    run_scenario(scenario, &cfg)
}

fn run_scenario(scenario: &Scenario, cfg: &MissionConfig) -> Result<MissionOutcome, MissionError> {
    let grid = scenario.build_grid().map_err(|e| MissionError::Config(e.to_string()))?;
    simulate(&grid, &scenario.wind, &scenario.craft, cfg)
}

/// Per-run seeds derived from the master seed.
pub fn run_seeds(master: u64, runs: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..runs).map(|_| rng.gen()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub policy: Policy,
    pub energy_j: Option<f64>,
    pub idle_j: Option<f64>,
    pub duration_s: Option<f64>,
    pub completed: bool,
    /// The plan record passed every check.
    pub valid: bool,
    pub error: Option<String>,
}

impl RunRow {
    pub fn ok(&self) -> bool {
        self.completed && self.valid && self.error.is_none()
    }
}

/// One scenario, one policy.
pub fn run_one(cfg: &ExperimentConfig, policy: Policy, run: usize, seed: u64) -> RunRow {
    let mcfg = cfg.mission_config(policy);
    let result = generate_scenario(cfg, seed).map_err(|e| e.to_string()).and_then(|s| run_scenario(&s, &mcfg).map_err(|e| e.to_string()));
    match result {
        Ok(out) => {
            let check = out.record.check();
            if let Err(v) = &check {
                log::warn!("run {run} (seed {seed}, {policy:?}): plan record violation: {v}");
            }
            RunRow {
                run,
                seed,
                policy,
                energy_j: Some(out.total_energy().value()),
                idle_j: Some(out.record.total_idle_energy().value()),
                duration_s: Some(out.record.termination_tick as f64 * mcfg.planner.t_s),
                completed: out.completed,
                valid: check.is_ok(),
                error: check.err().map(|v| v.to_string()),
            }
        }
        Err(e) => {
            log::warn!("run {run} (seed {seed}, {policy:?}) failed: {e}");
            RunRow { run, seed, policy, energy_j: None, idle_j: None, duration_s: None, completed: false, valid: false, error: Some(e) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    pub config: ExperimentConfig,
    pub policy: Policy,
    pub rows: Vec<RunRow>,
    pub summary: Summary,
}

fn summarize(rows: &[RunRow]) -> Summary {
    let energies: Vec<f64> = rows.iter().filter(|r| r.ok()).filter_map(|r| r.energy_j).collect();
    let (mean, ci95_half_width) = mean_ci95(&energies);
    Summary { n: energies.len(), mean, ci95_half_width, failures: rows.len() - energies.len() }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into())
}

const CSV_HEADER: &str = "run,seed,policy,energy_J,idle_J,duration_s,completed,valid,error\n";

fn csv_row(out: &mut String, r: &RunRow) {
    let policy = match r.policy {
        Policy::Divided => "divided",
        Policy::Greedy => "greedy",
    };
    let err = r.error.as_deref().unwrap_or("").replace(['"', ','], ";");
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        r.run,
        r.seed,
        policy,
        fmt_opt(r.energy_j),
        fmt_opt(r.idle_j),
        fmt_opt(r.duration_s),
        r.completed,
        r.valid,
        err
    )
    .expect("write to string");
}

impl BatchResult {
    /// Per-run CSV, one row per run in run order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        for r in &self.rows {
            csv_row(&mut out, r);
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let ci = self.summary.ci95_half_width.map(|h| format!("{h:.1}")).unwrap_or_else(|| "NA".into());
        format!(
            "{:?}: mean {:.1} J +/- {} (95% CI, n={}), failures {}",
            self.policy, self.summary.mean, ci, self.summary.n, self.summary.failures
        )
    }

    /// A run finished but its plan record failed a check.
    pub fn has_violation(&self) -> bool {
        self.rows.iter().any(|r| r.energy_j.is_some() && !r.valid)
    }
}

/// Runs `cfg.runs` random scenarios with `policy`.
pub fn run_batch(cfg: &ExperimentConfig, policy: Policy) -> BatchResult {
    let seeds: Vec<(usize, u64)> = run_seeds(cfg.seed, cfg.runs).into_iter().enumerate().collect();
    let rows = cfg.execution.map(&seeds, |&(i, s)| run_one(cfg, policy, i, s));
    let summary = summarize(&rows);
    BatchResult { config: cfg.clone(), policy, rows, summary }
}

/// Greedy baseline against the divided algorithm on the same scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub greedy: BatchResult,
    pub divided: BatchResult,
    /// `1 - mean(divided) / mean(greedy)` over runs where both succeeded.
    pub savings: f64,
    /// Mean of the per-run savings over the same runs.
    pub mean_paired_savings: f64,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        for (g, d) in self.greedy.rows.iter().zip(&self.divided.rows) {
            csv_row(&mut out, g);
            csv_row(&mut out, d);
        }
        out
    }
}

pub fn compare(cfg: &ExperimentConfig) -> Comparison {
    let seeds: Vec<(usize, u64)> = run_seeds(cfg.seed, cfg.runs).into_iter().enumerate().collect();
    let pairs = cfg.execution.map(&seeds, |&(i, s)| (run_one(cfg, Policy::Greedy, i, s), run_one(cfg, Policy::Divided, i, s)));
    let (g_rows, d_rows): (Vec<RunRow>, Vec<RunRow>) = pairs.into_iter().unzip();
    let both: Vec<(f64, f64)> = g_rows
        .iter()
        .zip(&d_rows)
        .filter(|(g, d)| g.ok() && d.ok())
        .map(|(g, d)| (g.energy_j.unwrap_or(f64::NAN), d.energy_j.unwrap_or(f64::NAN)))
        .collect();
    let n = both.len() as f64;
    let g_mean = both.iter().map(|p| p.0).sum::<f64>() / n;
    let d_mean = both.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_paired_savings = both.iter().map(|(g, d)| 1.0 - d / g).sum::<f64>() / n;
    let greedy = BatchResult { config: cfg.clone(), policy: Policy::Greedy, summary: summarize(&g_rows), rows: g_rows };
    let divided = BatchResult { config: cfg.clone(), policy: Policy::Divided, summary: summarize(&d_rows), rows: d_rows };
    Comparison { greedy, divided, savings: 1.0 - d_mean / g_mean, mean_paired_savings }
}
