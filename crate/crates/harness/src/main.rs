use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lfcs_core::pong::{calibrate, CalibrationGrid};
use lfcs_harness::aggregate::report;
use lfcs_harness::config::ExperimentConfig;
use lfcs_harness::oracle::oracle_suite;
use lfcs_harness::run::run;
use lfcs_harness::sweep::{default_values, sweep, Axis};

#[derive(Parser)]
#[command(
    name = "lfcs",
    version,
    about = "Train spiking agents with clipped-ratio plasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of one configuration.
    Train(ExperimentArgs),
    /// Run one configuration per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values; defaults to the standard grid of the axis.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Search Pong parameters for which the scripted extremes hit the score targets.
    Calibrate {
        /// Physics not on the grid are taken from this configuration.
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Episode seeds each candidate must satisfy.
        #[arg(long, default_value_t = 64)]
        trials: u64,
        /// Stop after printing this many matches.
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Run the numerical oracle battery; exits nonzero on any failure.
    Oracle,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// key=value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run name; output goes to <out>/<name>/.
    #[arg(long)]
    name: Option<String>,
    /// pong-100 or pong-200.
    #[arg(long)]
    env: Option<String>,
    /// lfcs or eprop.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    /// Seed list such as 1-5,9.
    #[arg(long)]
    seeds: Option<String>,
    /// Stiffness of the ratio clip and the transfer guard.
    #[arg(long)]
    epsilon: Option<String>,
    /// Passes over each stored episode.
    #[arg(long)]
    replays: Option<String>,
    /// Adam learning rate.
    #[arg(long)]
    eta: Option<String>,
    /// Value-path weight; 0 disables the critic.
    #[arg(long = "lambda-c")]
    lambda_c: Option<String>,
    /// Reject transfers that move the policy by epsilon or more.
    #[arg(long, value_parser = ["on", "off"])]
    guard: Option<String>,
    /// Freeze recurrent weights at zero.
    #[arg(long = "no-recurrent")]
    no_recurrent: bool,
    /// Scale of the initial recurrent weights.
    #[arg(long = "sigma-rec")]
    sigma_rec: Option<String>,
    #[arg(long)]
    neurons: Option<String>,
    /// Keep Adam state across episodes instead of resetting it.
    #[arg(long = "persistent-optimizer", value_parser = ["on", "off"])]
    persistent_optimizer: Option<String>,
    /// Output root directory.
    #[arg(long)]
    out: Option<String>,
    /// Pong physics overrides; see the calibrate subcommand.
    #[arg(long = "ball-speed-x")]
    ball_speed_x: Option<String>,
    #[arg(long = "ball-speed-y-max")]
    ball_speed_y_max: Option<String>,
    #[arg(long = "serve-vy-min")]
    serve_vy_min: Option<String>,
    #[arg(long = "paddle-speed")]
    paddle_speed: Option<String>,
    #[arg(long = "paddle-half-height")]
    paddle_half_height: Option<String>,
    #[arg(long = "opponent-speed")]
    opponent_speed: Option<String>,
    #[arg(long = "contact-gain")]
    contact_gain: Option<String>,
    #[arg(long = "serve-delay")]
    serve_delay: Option<String>,
}

impl ExperimentArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("name", &self.name),
            ("env", &self.env),
            ("algo", &self.algo),
            ("episodes", &self.episodes),
            ("seeds", &self.seeds),
            ("epsilon", &self.epsilon),
            ("replays", &self.replays),
            ("eta", &self.eta),
            ("lambda-c", &self.lambda_c),
            ("guard", &self.guard),
            ("sigma-rec", &self.sigma_rec),
            ("neurons", &self.neurons),
            ("persistent-optimizer", &self.persistent_optimizer),
            ("out", &self.out),
            ("ball-speed-x", &self.ball_speed_x),
            ("ball-speed-y-max", &self.ball_speed_y_max),
            ("serve-vy-min", &self.serve_vy_min),
            ("paddle-speed", &self.paddle_speed),
            ("paddle-half-height", &self.paddle_half_height),
            ("opponent-speed", &self.opponent_speed),
            ("contact-gain", &self.contact_gain),
            ("serve-delay", &self.serve_delay),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        if self.no_recurrent {
            cfg.recurrent = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let out = run(&cfg)?;
            print!("{}", report(&cfg.name, &out.rows)?);
            println!("wrote {}", out.merged.display());
        }
        Command::Sweep { exp, axis, values } => {
            let base = exp.resolve()?;
            let values = if values.is_empty() {
                default_values(axis)
            } else {
                values
            };
            for (value, out) in sweep(&base, axis, &values)? {
                print!("{}", report(&format!("{axis}={value}"), &out.rows)?);
                println!("wrote {}", out.merged.display());
            }
        }
        Command::Calibrate { exp, trials, limit } => {
            let grid = CalibrationGrid {
                seeds: trials,
                ..CalibrationGrid::default()
            };
            let found = calibrate(&exp.resolve()?.pong()?, &grid)?;
            if found.is_empty() {
                bail!("no parameter set on the grid meets the targets");
            }
            println!("ball_speed_x,serve_delay,opponent_speed");
            for c in found.iter().take(limit) {
                println!("{},{},{}", c.ball_speed_x, c.serve_delay, c.opponent_speed);
            }
            println!("{} matches", found.len());
        }
        Command::Oracle => {
            let rep = oracle_suite();
            print!("{}", rep.render());
            if !rep.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
