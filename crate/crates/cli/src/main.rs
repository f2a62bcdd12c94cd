//! `prob-integrate`: quadrature and Kepler-orbit experiments comparing
//! polynomial and Gaussian-process extrapolation to zero step size.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod functions;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::{ModeArg, PriorMean};
use functions::Builtin;
use output::{Format, Report};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "prob-integrate", version, about = "Richardson-style extrapolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Directory for result tables; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Adaptive GP extrapolation of trapezoid values to h = 0.
    GpRichardson {
        /// test, runge, exp or poly:<c0,c1,...>
        #[arg(long, default_value = "test")]
        function: Builtin,
        /// Tolerance on the posterior standard deviation at h = 0.
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma_hat: f64,
        #[arg(long, value_enum, default_value_t = PriorMean::Last)]
        prior_mean: PriorMean,
        /// Initial step sizes as fractions of the domain width.
        #[arg(long, default_value = "1,1/2,1/3,1/4", value_parser = commands::parse_steps)]
        steps: std::vec::Vec<f64>,
        #[arg(long, default_value_t = 50)]
        max_new_points: usize,
        #[arg(long, default_value_t = 1000)]
        grid_points: usize,
        /// Points in the emitted posterior curve.
        #[arg(long, default_value_t = 201)]
        curve_points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Richardson tableau over geometrically shrinking trapezoid steps.
    Richardson {
        #[arg(long, default_value = "test")]
        function: Builtin,
        #[arg(long, default_value_t = 1e-8)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 2)]
        order: u32,
        /// First step as a fraction of the domain width.
        #[arg(long, default_value_t = 1.0)]
        h0: f64,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Romberg integration.
    Romberg {
        #[arg(long, default_value = "test")]
        function: Builtin,
        #[arg(long, default_value_t = 1e-10)]
        tau: f64,
        #[arg(long, default_value_t = 20)]
        max_levels: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Polynomial versus GP interpolation of 1/(1+25x²) on equispaced nodes.
    Runge {
        #[arg(long, default_value_t = 11)]
        nodes: usize,
        #[arg(long, default_value_t = 401)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bulirsch-Stoer integration of an eccentric Kepler orbit.
    Kepler {
        #[arg(long, default_value_t = 0.99)]
        eccentricity: f64,
        #[arg(long, default_value_t = 3.0)]
        periods: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-8)]
        tau: f64,
        #[arg(long, default_value_t = 0.1)]
        initial_segment: f64,
        #[arg(long, default_value_t = 20)]
        max_halvings: usize,
        #[arg(long, default_value_t = 16)]
        max_gp_points: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma_hat: f64,
        #[arg(long, default_value_t = 1000)]
        reference_points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn dispatch(command: Command) -> (anyhow::Result<(Report, commands::Outcome)>, OutputArgs) {
    match command {
        Command::GpRichardson {
            function,
            tau,
            gamma_hat,
            prior_mean,
            steps,
            max_new_points,
            grid_points,
            curve_points,
            output,
        } => {
            let args = commands::GpRichardsonArgs {
                function,
                tau,
                gamma_hat,
                prior_mean,
                steps,
                max_new_points,
                grid_points,
                curve_points,
            };
            (commands::gp_richardson_cmd(&args), output)
        }
        Command::Richardson { function, tau, gamma, order, h0, max_iter, output } => {
            let args = commands::RichardsonArgs { function, tau, gamma, order, h0, max_iter };
            (commands::richardson_cmd(&args), output)
        }
        Command::Romberg { function, tau, max_levels, output } => {
            (commands::romberg_cmd(&commands::RombergArgs { function, tau, max_levels }), output)
        }
        Command::Runge { nodes, grid, output } => (commands::runge_cmd(&commands::RungeArgs { nodes, grid }), output),
        Command::Kepler {
            eccentricity,
            periods,
            mode,
            tau,
            initial_segment,
            max_halvings,
            max_gp_points,
            gamma_hat,
            reference_points,
            output,
        } => {
            let args = commands::KeplerArgs {
                eccentricity,
                periods,
                mode,
                tau,
                initial_segment,
                max_halvings,
                max_gp_points,
                gamma_hat,
                reference_points,
            };
            (commands::kepler_cmd(&args), output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROB_INTEGRATE_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    let (result, output) = dispatch(cli.command);
    let (report, outcome) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(commands::error_code(&e));
        }
    };
    if let Some(dir) = &output.out {
        if let Err(e) = report.write(dir, output.format) {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    print!("{}", report.summary.to_lines());
    ExitCode::from(outcome.code())
}
