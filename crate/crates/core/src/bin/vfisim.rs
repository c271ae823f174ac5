use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vfikit::sim::{self, load_scenario, RunMode, RunOptions};

/// Closed-loop simulation of vector-field-inequality controllers.
#[derive(Parser)]
#[command(name = "vfisim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the step log.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// {qp,cqp}-{velocity,acceleration,torque}
        #[arg(long)]
        mode: RunMode,
        /// Step log (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Constraints to leave unenforced, comma separated.
        #[arg(long, value_delimiter = ',')]
        disable: Vec<String>,
        /// Overrides the scenario's step count.
        #[arg(long)]
        steps: Option<usize>,
        /// Adds a solve-time column (makes the log non-deterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Validate a scenario and list its constraint rows.
    Check {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &PathBuf) -> Result<sim::Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn execute(command: Command) -> Result<u8, String> {
    match command {
        Command::Check { scenario } => {
            let s = load(&scenario)?;
            let sim = sim::Simulator::new(&s, RunMode::new(true, sim::ControlMode::Velocity), &[])
                .map_err(|e| e.to_string())?;
            let log = sim.empty_log();
            println!("scenario: {}", s.name());
            println!("joints: {}", s.chain.dof());
            println!("constraint rows: {}", log.constraint_tags.len());
            for tag in &log.constraint_tags {
                println!("  {tag}");
            }
            println!("collision pairs: {}", s.collision_pairs.len());
            Ok(0)
        }
        Command::Run {
            scenario,
            mode,
            out,
            disable,
            steps,
            timing,
        } => {
            let s = load(&scenario)?;
            let options = RunOptions { steps, disable };
            let result = sim::run_with(&s, mode, &options).map_err(|e| e.to_string())?;
            let file = File::create(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let mut w = BufWriter::new(file);
            result
                .log
                .write_csv(&mut w, timing)
                .and_then(|_| w.flush())
                .map_err(|e| format!("{}: {e}", out.display()))?;

            let log = &result.log;
            eprintln!("{mode}: {} steps", log.len());
            if let Some(e) = log.final_task_error() {
                eprintln!("final task error: {e:.3e}");
            }
            for cone in &log.cone_names {
                if let Some(phi) = log.max_phi(cone) {
                    eprintln!("max angle {cone}: {phi:.4} rad");
                }
            }
            let failed = log.non_optimal_steps();
            if failed > 0 {
                eprintln!("non-optimal steps: {failed}");
            }
            if result.collisions.is_empty() {
                Ok(0)
            } else {
                for c in result.collisions.iter().take(10) {
                    eprintln!("violation at step {}: {} distance {:.4}", c.step, c.pair, c.distance);
                }
                eprintln!("violations: {}", result.collisions.len());
                Ok(2)
            }
        }
    }
}
