use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use entdist::entanglement::{ree, Cut, LogBase, ReeOptions};
use entdist::linalg::Qubit;
use entdist::runner::{
    execute, load_config, read_csv, run_validation, write_svg, ValidationOptions,
};
use entdist::states::{Family, StateSpec};
use entdist::Error;

#[derive(Parser)]
#[command(version, about = "Entanglement distribution of three-qubit states under dephasing")]
struct Cli {
    /// Solver seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Duality-gap tolerance in bits (overrides the config file).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Report entanglement in nats instead of bits.
    #[arg(long, global = true)]
    nats: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write its CSV/SVG.
    Sweep { config: PathBuf },
    /// Relative entropy of entanglement of one initial state across one cut.
    Ree {
        #[arg(long)]
        state: Family,
        /// Mixing parameter for the mixed families.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value = "A_BC")]
        cut: Cut,
    },
    /// Run the self-check suite and print a JSON report.
    Validate {
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Perturb the propagator exponent by this relative amount.
        #[arg(long)]
        mutate_propagator: Option<f64>,
    },
    /// Plot a sweep CSV as SVG.
    Render {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn solver_overrides(cli: &Cli, mut opts: ReeOptions) -> ReeOptions {
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    if let Some(tol) = cli.tol {
        opts.gap_tol = tol;
    }
    if cli.nats {
        opts.units = LogBase::Nats;
    }
    opts
}

fn ree_report(cli: &Cli, state: Family, p: f64, cut: Cut) -> Result<serde_json::Value, Error> {
    let spec = if state.is_mixed() {
        StateSpec::mixed(state, p)
    } else {
        StateSpec::pure(state)
    };
    let opts = solver_overrides(cli, ReeOptions::default());
    let rho = entdist::runner::initial_state(&spec, Qubit::C)?;
    let r = ree(&rho, cut, &opts)?;
    Ok(json!({
        "state": state.name(),
        "p": state.is_mixed().then_some(p),
        "cut": cut.label(),
        "units": if cli.nats { "nats" } else { "bits" },
        "value": r.value,
        "gap": r.gap,
        "iterations": r.iterations,
        "converged": r.converged,
        "method": format!("{:?}", r.method),
    }))
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Sweep { config } => {
            let parsed = load_config(config)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            let mut cfg = parsed.config;
            cfg.solver.ree = solver_overrides(cli, cfg.solver.ree);
            let out = execute(&cfg)?;
            let unconverged = out.rows.iter().filter(|r| !r.converged).count();
            eprintln!(
                "wrote {} rows to {}{}",
                out.rows.len(),
                out.csv.display(),
                out.svg
                    .as_ref()
                    .map(|s| format!(" and {}", s.display()))
                    .unwrap_or_default()
            );
            if unconverged > 0 {
                eprintln!("note: {unconverged} rows did not reach the gap tolerance");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ree { state, p, cut } => {
            let report = ree_report(cli, *state, *p, *cut)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            report,
            mutate_propagator,
        } => {
            let mut opts = ValidationOptions {
                propagator_mutation: *mutate_propagator,
                ..ValidationOptions::default()
            };
            opts.ree = solver_overrides(cli, opts.ree);
            if let Some(seed) = cli.seed {
                opts.seeds = (0..5).map(|k| seed + k).collect();
            }
            let result = run_validation(&opts)?;
            let text = result.to_json();
            println!("{text}");
            if let Some(path) = report {
                std::fs::write(path, &text)?;
            }
            Ok(if result.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Render { csv, out } => {
            let rows = read_csv(csv)?;
            write_svg(out, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_status(result: &Result<ExitCode, Error>) -> u8 {
    match result {
        Ok(_) => 0,
        Err(Error::Config { .. }) => 2,
        Err(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(code) => *code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&result))
        }
    }
}
