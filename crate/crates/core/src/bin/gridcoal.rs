use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridcoal::scenario::{Scenario, ScenarioConfig};
use gridcoal::{sim, Result};

#[derive(Parser)]
#[command(name = "gridcoal", about = "Coalitional electricity market simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts
    #[arg(long, global = true, env = "GRIDCOAL_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Override the integrator step, seconds
    #[arg(long, global = true)]
    step_s: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run market rounds only and write the round-by-round trace
    RunMarket {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
    },
    /// Run the market coupled to grid physics and persist a full artifact
    RunCoupled { config: PathBuf },
    /// Produce a consolidated game/stability/risk report
    Analyze {
        /// scenario config, or a run artifact directory containing config.json
        path: PathBuf,
    },
    /// Export every retailer's cost network as CSV
    ExportCostnet { config: PathBuf },
}

fn load(path: &Path, seed: Option<u64>, step_s: Option<f64>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut config: ScenarioConfig = serde_json::from_str(&text)?;
    if let Some(s) = seed {
        config.risk.seed = s;
    }
    if let Some(h) = step_s {
        config.timing.step_s = h;
    }
    Scenario::from_config(config)
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = &cli.out_dir;
    match cli.cmd {
        Cmd::RunMarket { config, rounds } => {
            let scn = load(&config, cli.seed, cli.step_s)?;
            let trace = sim::run_market(&scn, rounds)?;
            std::fs::create_dir_all(out_dir)?;
            let path = out_dir.join("market_trace.csv");
            std::fs::write(&path, sim::market_trace_csv(&scn, &trace))?;
            println!(
                "{} rounds, settled: {}, trace: {}",
                trace.states.len() - 1,
                trace.settled,
                path.display()
            );
        }
        Cmd::RunCoupled { config } => {
            let scn = load(&config, cli.seed, cli.step_s)?;
            let artifact = sim::run_coupled(&scn, out_dir)?;
            println!("artifact written to {}", artifact.out_dir.display());
        }
        Cmd::Analyze { path } => {
            let config = if path.is_dir() { path.join("config.json") } else { path };
            let scn = load(&config, cli.seed, cli.step_s)?;
            let report = sim::analyze(&scn, 50)?;
            std::fs::create_dir_all(out_dir)?;
            let out = out_dir.join("analysis.json");
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::ExportCostnet { config } => {
            let scn = load(&config, cli.seed, cli.step_s)?;
            std::fs::create_dir_all(out_dir)?;
            let path = out_dir.join("costnet.csv");
            std::fs::write(&path, sim::costnet_csv(&scn))?;
            println!("cost networks written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
