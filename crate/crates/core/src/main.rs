use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use passive_align::conditions::ConditionInputs;
use passive_align::harness::{
    guideline_command, report_from_trace, run_scenario, run_sweep, Scenario,
};
use passive_align::Result;

/// Exit status of a run that tipped over or went non-finite.
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "passive-align",
    version,
    about = "Passive-alignment contact simulator and design calculator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate both alignment conditions and the design minimums.
    Guideline {
        #[arg(long, default_value_t = 6.0)]
        beta_max_deg: f64,
        #[arg(long, default_value_t = 0.6)]
        mu_s: f64,
        #[arg(long, default_value_t = 0.4)]
        eta: f64,
        /// Driving force |f^B| (N).
        #[arg(long, default_value_t = 20.0)]
        f_b: f64,
        #[arg(long, default_value_t = 0.0525)]
        d_r: f64,
        #[arg(long, default_value_t = 0.5)]
        tau_d_max: f64,
        #[arg(long, default_value_t = 3.0)]
        mass: f64,
        #[arg(long, default_value_t = 0.3)]
        l_c_p: f64,
    },
    /// Run one scenario and write trace.csv, report.json and scenario.json.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// One of f_ref, mu_s, beta0, tau_d, d_r.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Recompute the report of a recorded trace.
    Report {
        trace: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Steady-state window length (s).
        #[arg(long)]
        window: Option<f64>,
    },
}

fn load(path: &Path, seed: Option<u64>, dt: Option<f64>) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(d) = dt {
        sc.dt_s = d;
    }
    sc.validate()?;
    Ok(sc)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Guideline {
            beta_max_deg,
            mu_s,
            eta,
            f_b,
            d_r,
            tau_d_max,
            mass,
            l_c_p,
        } => {
            let inputs = ConditionInputs {
                beta_max_rad: beta_max_deg.to_radians(),
                mu_s,
                eta,
                f_b_n: f_b,
                d_r_m: d_r,
                tau_d_max_nm: tau_d_max,
                mass_kg: mass,
                l_c_p_m: l_c_p,
            };
            let (_, text) = guideline_command(&inputs)?;
            println!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            scenario,
            seed,
            out_dir,
            dt,
        } => {
            let sc = load(&scenario, seed, dt)?;
            let art = run_scenario(&sc, &out_dir)?;
            println!("{}", serde_json::to_string_pretty(&art.report)?);
            Ok(if art.report.metrics.diverged {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            parallel,
            seed,
            out_dir,
            dt,
        } => {
            let sc = load(&scenario, seed, dt)?;
            let out = run_sweep(&sc, &axis, &values, parallel, &out_dir)?;
            print!("{}", std::fs::read_to_string(&out.aggregate_path)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            trace,
            scenario,
            window,
        } => {
            let sc = scenario.map(|p| Scenario::load(&p)).transpose()?;
            let report = report_from_trace(&trace, sc.as_ref(), window)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
