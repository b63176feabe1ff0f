use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use windroute::exec::Execution;
use windroute::harness::{compare, generate_scenario, replanning_case_study, run_batch, ExperimentConfig, Scenario, WindLevel};
use windroute::mission::{simulate, MissionConfig, Policy};

#[derive(Parser)]
#[command(name = "windroute", version, about = "Wind-aware multi-UAV routing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and event log.
    Simulate(SimulateArgs),
    /// Run one policy over many random scenarios.
    Batch(BatchArgs),
    /// Greedy baseline against the divided algorithm on paired scenarios.
    Compare(ExperimentArgs),
    /// Scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Generate a random scenario as JSON.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Divided,
    Greedy,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Divided => Policy::Divided,
            PolicyArg::Greedy => Policy::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WindArg {
    Calm,
    Low,
    High,
}

/// Redivision period in seconds, or `off`.
#[derive(Clone, Copy)]
struct NdPeriod(Option<f64>);

fn parse_nd(s: &str) -> Result<NdPeriod, String> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(NdPeriod(None));
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(NdPeriod(Some(v))),
        _ => Err(format!("expected a positive number of seconds or 'off', got '{s}'")),
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 52.0)]
    width: f64,
    #[arg(long, default_value_t = 30.0)]
    height: f64,
    /// Nodes to visit, depots excluded.
    #[arg(long, default_value_t = 30)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    uavs: usize,
    #[arg(long, value_enum, default_value = "low")]
    wind: WindArg,
    /// Redivision period in seconds, or `off` for a single division.
    #[arg(long, default_value = "10", value_parser = parse_nd)]
    nd: NdPeriod,
    /// Enable risk-timed online replanning.
    #[arg(long)]
    op: bool,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    obstacles: usize,
    /// Run scenarios one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    /// Write the per-run CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            width_m: self.width,
            height_m: self.height,
            n_nodes: self.nodes,
            n_uavs: self.uavs,
            wind: match self.wind {
                WindArg::Calm => WindLevel::Calm,
                WindArg::Low => WindLevel::Low,
                WindArg::High => WindLevel::High,
            },
            nd_period_s: self.nd.0,
            op: self.op,
            runs: self.runs,
            seed: self.seed,
            obstacles: self.obstacles,
            execution: if self.sequential { Execution::Sequential } else { Execution::default() },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "divided")]
    policy: PolicyArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON; without it one is generated from the experiment flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_enum, default_value = "divided")]
    policy: PolicyArg,
    /// Minimum replanning interval, s.
    #[arg(long)]
    alpha: Option<f64>,
    /// Trace row every this many control steps.
    #[arg(long, default_value_t = 20)]
    trace_every: u64,
    /// Trace CSV destination.
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    /// Event log (JSON lines) destination.
    #[arg(long, default_value = "events.jsonl")]
    events: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Emit the built-in two-uav replanning case study instead.
    #[arg(long)]
    case_study: bool,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let exp = args.exp.config()?;
    let policy = Policy::from(args.policy);
    let (scenario, mut cfg) = match &args.scenario {
        Some(path) => {
            let s = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
            let cfg = MissionConfig::new(policy, s.wind_cap).with_nd(exp.nd_period_s).with_op(exp.op);
            (s, cfg)
        }
        None => (generate_scenario(&exp, exp.seed)?, exp.mission_config(policy)),
    };
    cfg.trace_every = Some(args.trace_every.max(1));
    if let Some(alpha) = args.alpha {
        cfg.replan.alpha = alpha;
    }
    let grid = scenario.build_grid()?;
    let out = simulate(&grid, &scenario.wind, &scenario.craft, &cfg)?;
    write_or_print(Some(&args.trace), &out.trace_csv())?;
    write_or_print(Some(&args.events), &out.events_jsonl())?;
    let check = out.record.check();
    eprintln!(
        "{policy:?}: travel {:.1} J, idle {:.1} J, {:.2} s, completed {}, divisions {}, plans {}",
        out.total_energy().value(),
        out.record.total_idle_energy().value(),
        out.record.termination_tick as f64 * cfg.planner.t_s,
        out.completed,
        out.divisions,
        out.plans
    );
    if let Err(v) = &check {
        eprintln!("plan record violation: {v}");
    }
    Ok(check.is_ok())
}

fn cmd_batch(args: &BatchArgs) -> Result<bool> {
    let cfg = args.exp.config()?;
    let b = run_batch(&cfg, args.policy.into());
    write_or_print(args.exp.out.as_deref(), &b.to_csv())?;
    eprintln!("{}", b.summary_line());
    Ok(!b.has_violation())
}

fn cmd_compare(args: &ExperimentArgs) -> Result<bool> {
    let cfg = args.config()?;
    let c = compare(&cfg);
    write_or_print(args.out.as_deref(), &c.to_csv())?;
    eprintln!("{}", c.greedy.summary_line());
    eprintln!("{}", c.divided.summary_line());
    eprintln!("savings {:.1}% (mean of paired runs {:.1}%)", 100.0 * c.savings, 100.0 * c.mean_paired_savings);
    Ok(!c.greedy.has_violation() && !c.divided.has_violation())
}

fn cmd_gen(args: &GenArgs) -> Result<bool> {
    let s = if args.case_study {
        replanning_case_study()
    } else {
        let cfg = args.exp.config()?;
        generate_scenario(&cfg, cfg.seed)?
    };
    write_or_print(args.exp.out.as_deref(), &(s.to_json() + "\n"))?;
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Scenario(ScenarioCommand::Gen(a)) => cmd_gen(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
