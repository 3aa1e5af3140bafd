use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use uavrelay::harness::config::{ExperimentConfig, Preset};
use uavrelay::harness::output::{self, CsvWriter, RESULTS_FILE};
use uavrelay::harness::{fig3_surface, run_sweep, run_validation};
use uavrelay::Error;

#[derive(Parser)]
#[command(name = "uavrelay", version, about = "Multi-UAV relay hybrid beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over schemes, UAV counts and transmit powers.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write per-realization and per-iteration traces.
        #[arg(long)]
        trace: bool,
    },
    /// Second-hop rate over a lattice of UAV positions.
    Surface {
        #[command(flatten)]
        common: Common,
        /// UAV counts to map (default: 1 and 2).
        #[arg(long = "m-uavs", value_delimiter = ',')]
        m_uavs: Vec<usize>,
    },
    /// Run the invariant and oracle checks at toy scale.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate the plot script next to an existing results.csv.
    Plot {
        /// Directory holding results.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file overriding preset keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// paper, desk or desk-fig5.
    #[arg(long, default_value = "paper")]
    preset: String,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let preset: Preset = self.preset.parse()?;
        let mut cfg = ExperimentConfig::load(preset, self.config.as_deref(), self.seed)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Validation(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, trace } => {
            let cfg = common.load()?;
            let dir = cfg.output_dir.clone();
            output::write_snapshot(&cfg, &dir)?;
            let mut writer = CsvWriter::create(&dir)?;
            let sweep = run_sweep(&cfg, |row| writer.append(row))?;
            drop(writer);
            let files = output::emit_outputs(&sweep.rows, &cfg, &dir)?;
            if trace {
                output::write_traces(&sweep.realizations, &sweep.swarm_trace, &dir)?;
            }
            for f in files {
                info!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Surface { common, m_uavs } => {
            let cfg = common.load()?;
            let ms = if m_uavs.is_empty() { vec![1, 2] } else { m_uavs };
            output::write_snapshot(&cfg, &cfg.output_dir)?;
            for m in ms {
                let s = fig3_surface(&cfg, m)?;
                let path = s.write(&cfg.output_dir)?;
                let best = s.argmax();
                println!(
                    "M={m}: lattice max {:.4} bps/Hz at ({}, {}); optimized {:.4} bps/Hz -> {}",
                    best.r2,
                    best.x,
                    best.y,
                    s.optimized_r2,
                    path.display()
                );
                for (d, c) in s.optimized.iter().enumerate() {
                    println!("  drop {d}: UAVs at {:?}", c.uav_ground);
                }
            }
            output::write_plot_script(&cfg.output_dir)?;
            Ok(())
        }
        Command::Validate { common } => {
            let cfg = common.load()?;
            let results = run_validation(&cfg);
            for r in &results {
                println!("{r}");
            }
            match results.iter().filter(|r| !r.passed).count() {
                0 => Ok(()),
                n => Err(Failure::Validation(n)),
            }
        }
        Command::Plot { out } => {
            let csv = out.join(RESULTS_FILE);
            let text = std::fs::read_to_string(&csv).map_err(|e| Error::Io { path: csv.clone(), source: e })?;
            let rows = output::parse_results_csv(&text)?;
            if rows.is_empty() {
                return Err(Error::InvalidInput(format!("{} has no rows", csv.display())).into());
            }
            let path = output::write_plot_script(&out)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(n)) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(3)
        }
    }
}
