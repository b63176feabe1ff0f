//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown.
//! Criteria listed in `KNOWN_RED` are reported but do not fail the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use windroute::astar::{plan_path, search, PlannerConfig};
use windroute::disturbance::{WindField, WindPattern, HIGH_WIND_MPS, LOW_WIND_MPS};
use windroute::division::{check_partition, divide_sequential, DivisionAgent, DivisionParams, DivisionWorld};
use windroute::geometry::Vec2;
use windroute::harness::{case_study_config, compare, replanning_case_study, run_batch, BatchResult, ExperimentConfig, RunRow, Scenario, STANDARD_AREAS};
use windroute::hexgrid::{HexCoord, HexGrid, NodeId, UavId};
use windroute::mission::{simulate, MissionOutcome, Policy};
use windroute::msgbus::RoundBus;
use windroute::pid::{predict_energy_triple, predict_energy_triple_raw, predict_inputs, PidController};
use windroute::quadrotor::{max_relative_speed, travel_energy, travel_energy_with, CraftParams, EnergyJ};

/// Criteria that fail for reasons recorded in the decisions ledger.
const KNOWN_RED: &[u32] = &[3];

const SAVINGS_BAND: (f64, f64) = (0.10, 0.40);
const MIN_ND_IMPROVEMENT: f64 = 0.05;
const SEEDS: usize = 20;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn in_band(s: f64) -> bool {
    s >= SAVINGS_BAND.0 && s <= SAVINGS_BAND.1
}

fn rows_valid(rows: &[RunRow]) -> (usize, usize) {
    let completed: Vec<&RunRow> = rows.iter().filter(|r| r.completed).collect();
    (completed.iter().filter(|r| r.valid).count(), completed.len())
}

fn greedy_comparison(all_rows: &mut Vec<RunRow>) -> Verdict {
    let c = compare(&ExperimentConfig { runs: SEEDS, ..Default::default() });
    all_rows.extend(c.greedy.rows.iter().cloned().chain(c.divided.rows.iter().cloned()));
    let failures = c.greedy.summary.failures + c.divided.summary.failures;
    Verdict {
        id: 1,
        name: "greedy comparison, 4 uavs, 30 nodes, 52x30, low wind, ND 10 s",
        pass: failures == 0 && c.divided.summary.mean <= c.greedy.summary.mean && in_band(c.savings),
        detail: format!(
            "greedy {:.0} J, divided {:.0} J, savings {:.1}% (paired {:.1}%), failed runs {failures}",
            c.greedy.summary.mean,
            c.divided.summary.mean,
            100.0 * c.savings,
            100.0 * c.mean_paired_savings
        ),
    }
}

fn area_sweep(all_rows: &mut Vec<RunRow>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (w, h) in STANDARD_AREAS {
        let c = compare(&ExperimentConfig { width_m: w, height_m: h, runs: SEEDS, ..Default::default() });
        all_rows.extend(c.greedy.rows.iter().cloned().chain(c.divided.rows.iter().cloned()));
        let failures = c.greedy.summary.failures + c.divided.summary.failures;
        pass &= failures == 0 && in_band(c.savings);
        parts.push(format!("{w}x{h}: {:.1}%", 100.0 * c.savings));
    }
    Verdict { id: 2, name: "area sweep, 30 nodes", pass, detail: parts.join(", ") }
}

fn nd_period(all_rows: &mut Vec<RunRow>) -> Verdict {
    let batch = |nd: f64| run_batch(&ExperimentConfig { nd_period_s: Some(nd), runs: SEEDS, ..Default::default() }, Policy::Divided);
    let (fast, slow): (BatchResult, BatchResult) = (batch(10.0), batch(80.0));
    all_rows.extend(fast.rows.iter().cloned().chain(slow.rows.iter().cloned()));
    let improvement = 1.0 - fast.summary.mean / slow.summary.mean;
    let with_idle = |b: &BatchResult| b.rows.iter().map(|r| r.energy_j.unwrap_or(f64::NAN) + r.idle_j.unwrap_or(f64::NAN)).sum::<f64>();
    let improvement_idle = 1.0 - with_idle(&fast) / with_idle(&slow);
    let failures = fast.summary.failures + slow.summary.failures;
    Verdict {
        id: 3,
        name: "redivision period 10 s vs 80 s",
        pass: failures == 0 && improvement >= MIN_ND_IMPROVEMENT,
        detail: format!(
            "ND 10 {:.0} J, ND 80 {:.0} J, improvement {:.2}% (need >= {:.0}%); travel+idle {:.1}%",
            fast.summary.mean,
            slow.summary.mean,
            100.0 * improvement,
            100.0 * MIN_ND_IMPROVEMENT,
            100.0 * improvement_idle
        ),
    }
}

fn case_study(outcomes: &mut Vec<MissionOutcome>) -> Verdict {
    let s = replanning_case_study();
    let grid = s.build_grid().expect("case study grid");
    let run = |op| simulate(&grid, &s.wind, &s.craft, &case_study_config(op)).expect("case study run");
    let (off, on) = (run(false), run(true));
    let pass = on.completed && off.completed && on.total_energy() < off.total_energy();
    let detail = format!("OP off {:.0} J, OP on {:.0} J", off.total_energy().value(), on.total_energy().value());
    outcomes.push(off);
    outcomes.push(on);
    Verdict { id: 4, name: "online replanning case study, 8 m/s wind event", pass, detail }
}

/// O(V^2) Dijkstra over the same edge energies.
fn dijkstra(grid: &HexGrid, start: HexCoord, goal: HexCoord, d: Vec2, params: &CraftParams) -> f64 {
    let vr = max_relative_speed(params).unwrap();
    let power = params.max_power();
    let hexes: Vec<HexCoord> = grid.hexes().collect();
    let mut dist = vec![f64::INFINITY; hexes.len()];
    let mut done = vec![false; hexes.len()];
    dist[grid.index_of(start).unwrap()] = 0.0;
    while let Some(u) = (0..hexes.len()).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) {
        done[u] = true;
        for nb in grid.neighbors(hexes[u]).unwrap() {
            if grid.is_obstacle(nb) {
                continue;
            }
            let e = travel_energy_with(grid.center_unchecked(hexes[u]), grid.center_unchecked(nb), d, vr, power).value();
            let v = grid.index_of(nb).unwrap();
            dist[v] = dist[v].min(dist[u] + e);
        }
    }
    dist[grid.index_of(goal).unwrap()]
}

fn astar_oracle() -> Verdict {
    let params = CraftParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA57A);
    let (mut agree, mut reached) = (0, 0);
    let trials = 200;
    for _ in 0..trials {
        let mut grid = HexGrid::new(rng.gen_range(3.0..=12.0), rng.gen_range(3.0..=12.0), 1.0).unwrap();
        let hexes: Vec<HexCoord> = grid.hexes().collect();
        for _ in 0..rng.gen_range(0..=hexes.len() / 4) {
            let _ = grid.add_obstacle(hexes[rng.gen_range(0..hexes.len())]);
        }
        let free: Vec<HexCoord> = grid.free_hexes().collect();
        if free.is_empty() {
            agree += 1;
            continue;
        }
        let (s, g) = (free[rng.gen_range(0..free.len())], free[rng.gen_range(0..free.len())]);
        let ang = rng.gen_range(0.0..TAU);
        let d = Vec2::new(ang.cos(), ang.sin()) * rng.gen_range(0.0..=HIGH_WIND_MPS);
        let rec = search(&grid, s, g, d, &params).unwrap();
        let got = rec.build_path().map(|p| {
            p.windows(2).map(|w| travel_energy(grid.center_unchecked(w[0]), grid.center_unchecked(w[1]), d, &params).unwrap().value()).sum::<f64>()
        });
        let want = dijkstra(&grid, s, g, d, &params);
        let ok = match got {
            Some(c) => {
                reached += 1;
                (c - want).abs() <= 1e-9 * want.max(1.0)
            }
            None => want.is_infinite(),
        };
        agree += ok as usize;
    }
    Verdict {
        id: 5,
        name: "A* cost equals Dijkstra oracle",
        pass: agree == trials,
        detail: format!("{agree}/{trials} agree ({reached} reachable)"),
    }
}

fn partitions() -> Verdict {
    let craft = CraftParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1);
    let trials = 500;
    let mut good = 0;
    for _ in 0..trials {
        let n_uavs = rng.gen_range(1..=8u32);
        let n_nodes = rng.gen_range(1..=50u32);
        let mut pt = || Vec2::new(rng.gen_range(0.0..104.0), rng.gen_range(0.0..60.0));
        let nodes: BTreeMap<NodeId, Vec2> = (1..=n_nodes).map(|i| (NodeId(i), pt())).collect();
        let positions: BTreeMap<UavId, Vec2> = (1..=n_uavs).map(|i| (UavId(i), pt())).collect();
        let visited: BTreeSet<NodeId> = nodes.keys().copied().filter(|_| rng.gen_bool(0.3)).collect();
        let params = DivisionParams::new(if rng.gen_bool(0.5) { LOW_WIND_MPS } else { HIGH_WIND_MPS });
        let world = DivisionWorld { nodes: &nodes, positions: &positions, craft: &craft, params: &params };
        let agents: Vec<DivisionAgent> = (1..=n_uavs).map(|i| DivisionAgent::new(UavId(i), 0, visited.clone(), BTreeSet::new())).collect();
        let mut bus = RoundBus::new((1..=n_uavs).map(UavId)).unwrap();
        let Ok(out) = divide_sequential(&world, agents, &mut bus) else { continue };
        let v_g: BTreeSet<NodeId> = nodes.keys().copied().filter(|n| !visited.contains(n)).collect();
        let union: BTreeSet<NodeId> = out.values().flat_map(|o| o.goal_set.nodes.iter().copied()).collect();
        let sizes: usize = out.values().map(|o| o.goal_set.nodes.len()).sum();
        if check_partition(&out).is_ok() && union == v_g && sizes == v_g.len() {
            good += 1;
        }
    }
    Verdict { id: 6, name: "node division partitions the unvisited set", pass: good == trials, detail: format!("{good}/{trials} disjoint and covering") }
}

fn plan_validity(rows: &[RunRow], outcomes: &[MissionOutcome]) -> Verdict {
    let (mut valid, mut completed) = rows_valid(rows);
    for o in outcomes.iter().filter(|o| o.completed) {
        completed += 1;
        valid += o.record.check().is_ok() as usize;
    }
    Verdict { id: 7, name: "plan records of completed runs are valid", pass: valid == completed && completed > 0, detail: format!("{valid}/{completed} valid") }
}

fn energy_model() -> Verdict {
    let params = CraftParams::default();
    let ctl = PidController::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE16);
    let (mut ordered, mut raw_ordered, trials) = (0, 0, 100);
    for _ in 0..trials {
        let cap = if rng.gen_bool(0.5) { LOW_WIND_MPS } else { HIGH_WIND_MPS };
        let cfg = PlannerConfig::for_wind_cap(cap);
        let mut grid = HexGrid::new(16.0, 12.0, 1.0).unwrap();
        let hexes: Vec<HexCoord> = grid.hexes().collect();
        let s = hexes[rng.gen_range(0..hexes.len())];
        let g = loop {
            let g = hexes[rng.gen_range(0..hexes.len())];
            if g != s {
                break g;
            }
        };
        grid.add_node(NodeId(1), g).unwrap();
        let ang = rng.gen_range(0.0..TAU);
        let d = Vec2::new(ang.cos(), ang.sin()) * rng.gen_range(0.0..=cap);
        let path = plan_path(&grid, grid.center_unchecked(s), NodeId(1), d, &params, &cfg).unwrap().expect("open grid");
        let x0 = path.states()[0];
        ordered += predict_energy_triple(&path, &x0, cap, &ctl, &params, &cfg).unwrap().is_ordered() as usize;
        raw_ordered += predict_energy_triple_raw(&path, &x0, cap, &ctl, &params, &cfg).unwrap().is_ordered() as usize;
    }

    // straight-line energy over a heading sweep at several wind speeds
    let cap = HIGH_WIND_MPS;
    let (a, b) = (Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0));
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..360 {
        let theta = i as f64 * TAU / 360.0;
        for mag in [0.0, 0.25 * cap, 0.5 * cap, 0.75 * cap, cap] {
            let e = travel_energy(a, b, Vec2::new(theta.cos(), theta.sin()) * mag, &params).unwrap().value();
            if e > best.0 {
                best = (e, theta, mag);
            }
        }
    }
    let peak_ok = (best.1 - PI).abs() < 1e-12 && best.2 == cap;

    let mut worst_rot = 0.0f64;
    for _ in 0..200 {
        let p = Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let q = Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let ang = rng.gen_range(0.0..TAU);
        let d = Vec2::new(ang.cos(), ang.sin()) * rng.gen_range(0.0..=cap);
        let phi = rng.gen_range(0.0..TAU);
        let rot = |v: Vec2| Vec2::new(v.x * phi.cos() - v.y * phi.sin(), v.x * phi.sin() + v.y * phi.cos());
        let e0 = travel_energy(p, q, d, &params).unwrap();
        let e1 = travel_energy(rot(p), rot(q), rot(d), &params).unwrap();
        if e0 != EnergyJ::ZERO {
            worst_rot = worst_rot.max((e0.value() - e1.value()).abs() / e0.value());
        }
    }
    Verdict {
        id: 8,
        name: "energy model properties",
        pass: ordered == trials && peak_ok && worst_rot <= 1e-9,
        detail: format!(
            "triple ordered {ordered}/{trials} (raw rollouts {raw_ordered}/{trials}); peak at theta {:.4} rad, |d| {} m/s; rotation rel. error {worst_rot:.1e}",
            best.1, best.2
        ),
    }
}

fn pid_tracking() -> Verdict {
    let cfg = PlannerConfig::default();
    let mut grid = HexGrid::new(10.0, 20.0, 1.0).unwrap();
    grid.add_node(NodeId(1), HexCoord::new(1, 7)).unwrap();
    let start = grid.center_unchecked(HexCoord::new(1, 2));
    let path = plan_path(&grid, start, NodeId(1), Vec2::ZERO, &CraftParams::default(), &cfg).unwrap().expect("open grid");
    let p = predict_inputs(&path.trajectory, &path.states()[0], |_| Vec2::ZERO, &PidController::default(), &CraftParams::default(), cfg.t_s).unwrap();
    let err = (p.states.last().unwrap().position_2d() - *path.waypoints.last().unwrap()).norm();
    Verdict {
        id: 9,
        name: "PID tracks a 5-hop straight path",
        pass: path.hexes.len() == 6 && err < 0.1 && !p.any_saturated(),
        detail: format!("terminal error {err:.4} m, saturated steps {}", p.saturated.iter().filter(|&&s| s).count()),
    }
}

fn wind_pattern() -> Verdict {
    let t_s = 0.005;
    let mut bad = 0;
    let mut checked = 0;
    for (speed, seed) in [(LOW_WIND_MPS, 1), (LOW_WIND_MPS, 99), (HIGH_WIND_MPS, 7), (HIGH_WIND_MPS, 12345)] {
        let field = WindField::Pattern(WindPattern::new(speed, seed));
        for k in 0..(200.0 / t_s) as u64 {
            let phase_steps = k % (40.0 / t_s) as u64;
            let blowing = phase_steps < (30.0 / t_s) as u64;
            let d = field.at_step(k, t_s);
            let ok = if blowing { d.norm() == speed } else { d == Vec2::ZERO };
            bad += !ok as usize;
            checked += 1;
        }
    }
    Verdict { id: 10, name: "wind blows exactly 30 s of every 40 s", pass: bad == 0, detail: format!("{} of {checked} steps off pattern", bad) }
}

fn determinism() -> Verdict {
    let cfg = ExperimentConfig { runs: SEEDS, ..Default::default() };
    let a = run_batch(&cfg, Policy::Divided).to_csv();
    let b = run_batch(&cfg, Policy::Divided).to_csv();
    Verdict { id: 11, name: "fixed seed gives byte-identical batch CSV", pass: a == b, detail: format!("{} bytes, identical: {}", a.len(), a == b) }
}

fn golden_obstacles(outcomes: &mut Vec<MissionOutcome>) {
    let s = Scenario::from_json(include_str!("data/obstacle_scenario.json")).expect("golden scenario");
    let grid = s.build_grid().expect("golden grid");
    let cfg = ExperimentConfig::default();
    for policy in [Policy::Greedy, Policy::Divided] {
        outcomes.push(simulate(&grid, &s.wind, &s.craft, &cfg.mission_config(policy)).expect("golden run"));
    }
}

fn main() -> ExitCode {
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    let mut verdicts = vec![greedy_comparison(&mut rows), area_sweep(&mut rows), nd_period(&mut rows), case_study(&mut outcomes)];
    verdicts.extend([astar_oracle(), partitions()]);
    golden_obstacles(&mut outcomes);
    verdicts.push(plan_validity(&rows, &outcomes));
    verdicts.extend([energy_model(), pid_tracking(), wind_pattern(), determinism()]);
    verdicts.sort_by_key(|v| v.id);

    let mut unexpected = 0;
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && KNOWN_RED.contains(&v.id) { " [known]" } else { "" };
        println!("{tag} {:>2} {}: {}{note}", v.id, v.name, v.detail);
        if !v.pass && !KNOWN_RED.contains(&v.id) {
            unexpected += 1;
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", verdicts.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
