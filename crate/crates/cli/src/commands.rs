//! Subcommand implementations. Each builds a [`Report`] and an [`Outcome`].

use crate::functions::Builtin;
use crate::output::{Cell, Record, Report, Table};
use anyhow::{bail, Result};
use prob_integrate::bsa::{bsa_integrate, BsaConfig, BsaRun, ExtrapolationMode};
use prob_integrate::extrapolate::{neville_interpolate_curve, richardson_sequence, romberg, ExtrapolationResult, RichardsonConfig};
use prob_integrate::gpr::{fit_gp_with_mean, FitConfig, PriorMeanStrategy};
use prob_integrate::ode::{specific_energy, Kepler, KeplerOrbit, PhaseState};
use prob_integrate::prob_richardson::{gp_richardson, AdaptiveConfig};
use prob_integrate::quad::{runge_function, StepSample};
use prob_integrate::Error;

/// Band half-width in standard deviations reported next to `σ₀`.
const BAND: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
    TotalFailure,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
            Outcome::TotalFailure => 3,
        }
    }
}

/// Invalid user input detected by the CLI itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code for an error that aborted a command.
pub fn error_code(e: &anyhow::Error) -> u8 {
    if e.is::<UsageError>() {
        return 1;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::InvalidStep { .. }
            | Error::StepNotDivisor { .. }
            | Error::InvalidDomain { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidParams(_)
            | Error::DuplicateAbscissa(_),
        ) => 1,
        _ => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PriorMean {
    Zero,
    Average,
    Last,
}

impl From<PriorMean> for PriorMeanStrategy {
    fn from(p: PriorMean) -> Self {
        match p {
            PriorMean::Zero => PriorMeanStrategy::Zero,
            PriorMean::Average => PriorMeanStrategy::AverageOfObservations,
            PriorMean::Last => PriorMeanStrategy::LastObservation,
        }
    }
}

impl PriorMean {
    fn name(self) -> &'static str {
        match self {
            PriorMean::Zero => "zero",
            PriorMean::Average => "average",
            PriorMean::Last => "last",
        }
    }
}

/// Parses a comma-separated list of step fractions such as `1,1/2,1/3`.
pub fn parse_steps(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            let value = match part.split_once('/') {
                Some((n, d)) => {
                    let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in {part:?}"))?;
                    let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in {part:?}"))?;
                    n / d
                }
                None => part.parse().map_err(|_| format!("bad step {part:?}"))?,
            };
            if value.is_finite() && value > 0.0 {
                Ok(value)
            } else {
                Err(format!("step {part:?} must be positive"))
            }
        })
        .collect()
}

pub struct GpRichardsonArgs {
    pub function: Builtin,
    pub tau: f64,
    pub gamma_hat: f64,
    pub prior_mean: PriorMean,
    pub steps: Vec<f64>,
    pub max_new_points: usize,
    pub grid_points: usize,
    pub curve_points: usize,
}

pub fn gp_richardson_cmd(args: &GpRichardsonArgs) -> Result<(Report, Outcome)> {
    let cfg = AdaptiveConfig {
        tau: args.tau,
        gamma_hat: args.gamma_hat,
        initial_steps: args.steps.clone(),
        max_new_points: args.max_new_points,
        grid_points: args.grid_points,
        fit: FitConfig::default(),
    };
    cfg.validate()?;
    if args.curve_points < 2 {
        bail!(usage("--curve-points must be at least 2"));
    }

    let mut config = Record::default();
    config.set("function", args.function.to_string());
    config.set("tau", args.tau);
    config.set("gamma_hat", args.gamma_hat);
    config.set("prior_mean", args.prior_mean.name());
    config.set("steps", steps_text(&args.steps));
    config.set("max_new_points", args.max_new_points);
    config.set("grid_points", args.grid_points);
    config.set("curve_points", args.curve_points);

    let f = args.function.integrand();
    let result = gp_richardson(&f, &cfg, args.prior_mean.into())?;

    let mut history = Table::new(
        "history",
        &["iteration", "dataset_size", "estimate", "sigma0", "band_low", "band_high", "h", "value"],
    );
    for e in &result.history {
        history.push(vec![
            e.iteration.into(),
            e.dataset_size.into(),
            e.estimate.into(),
            e.sigma0.into(),
            (e.estimate - BAND * e.sigma0).into(),
            (e.estimate + BAND * e.sigma0).into(),
            e.added.map(|s| s.h).into(),
            e.added.map(|s| s.value).into(),
        ]);
    }

    let mut samples = Table::new("samples", &["index", "h", "value"]);
    for (i, s) in result.samples.iter().enumerate() {
        samples.push(vec![i.into(), s.h.into(), s.value.into()]);
    }

    let h_max = result.samples.iter().map(|s| s.h).fold(0.0, f64::max);
    let mut posterior = Table::new("posterior", &["h", "mean", "sd", "band_low", "band_high"]);
    for k in 0..args.curve_points {
        let h = h_max * k as f64 / (args.curve_points - 1) as f64;
        let p = result.model.posterior_at(h);
        posterior.push(vec![h.into(), p.mean.into(), p.sd.into(), (p.mean - BAND * p.sd).into(), (p.mean + BAND * p.sd).into()]);
    }

    let exact = args.function.exact_integral();
    let mut report = Report::new("gp-richardson", config);
    report.tables = vec![history, samples, posterior];
    report.summary.set("estimate", result.estimate);
    report.summary.set("sigma0", result.sigma0);
    report.summary.set("band_low", result.estimate - BAND * result.sigma0);
    report.summary.set("band_high", result.estimate + BAND * result.sigma0);
    report.summary.set("new_points", result.new_points());
    report.summary.set("exact", exact);
    report.summary.set("abs_error", (result.estimate - exact).abs());
    report.summary.set("converged", result.converged);
    let outcome = if result.converged { Outcome::Success } else { Outcome::NotConverged };
    Ok((report, outcome))
}

fn steps_text(steps: &[f64]) -> String {
    let parts: Vec<String> = steps.iter().map(|s| s.to_string()).collect();
    parts.join(",")
}

fn extrapolation_report(command: &'static str, config: Record, function: &Builtin, r: &ExtrapolationResult) -> (Report, Outcome) {
    let mut levels = Table::new("levels", &["level", "h", "raw", "extrapolated", "delta"]);
    let diagonal: Vec<f64> = r.diagonal().collect();
    for (k, row) in r.tableau.iter().enumerate() {
        let delta = (k > 0).then(|| (diagonal[k] - diagonal[k - 1]).abs());
        levels.push(vec![k.into(), r.steps[k].into(), row[0].into(), diagonal[k].into(), delta.into()]);
    }
    let mut tableau = Table::new("tableau", &["level", "column", "value"]);
    for (k, row) in r.tableau.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            tableau.push(vec![k.into(), j.into(), (*v).into()]);
        }
    }
    let exact = function.exact_integral();
    let mut report = Report::new(command, config);
    report.tables = vec![levels, tableau];
    report.summary.set("estimate", r.estimate);
    report.summary.set("error_estimate", r.error_estimate);
    report.summary.set("iterations", r.iterations);
    report.summary.set("exact", exact);
    report.summary.set("abs_error", (r.estimate - exact).abs());
    report.summary.set("converged", r.converged);
    let outcome = if r.converged { Outcome::Success } else { Outcome::NotConverged };
    (report, outcome)
}

pub struct RichardsonArgs {
    pub function: Builtin,
    pub tau: f64,
    pub gamma: f64,
    pub order: u32,
    pub h0: f64,
    pub max_iter: usize,
}

pub fn richardson_cmd(args: &RichardsonArgs) -> Result<(Report, Outcome)> {
    let cfg = RichardsonConfig { gamma: args.gamma, order: args.order, tau: args.tau, max_iter: args.max_iter };
    cfg.validate()?;
    let f = args.function.integrand();
    let mut config = Record::default();
    config.set("function", args.function.to_string());
    config.set("tau", args.tau);
    config.set("gamma", args.gamma);
    config.set("order", args.order as usize);
    config.set("h0", args.h0);
    config.set("max_iter", args.max_iter);
    let r = richardson_sequence(&f, &cfg, args.h0 * f.width())?;
    Ok(extrapolation_report("richardson", config, &args.function, &r))
}

pub struct RombergArgs {
    pub function: Builtin,
    pub tau: f64,
    pub max_levels: usize,
}

pub fn romberg_cmd(args: &RombergArgs) -> Result<(Report, Outcome)> {
    let f = args.function.integrand();
    let mut config = Record::default();
    config.set("function", args.function.to_string());
    config.set("tau", args.tau);
    config.set("max_levels", args.max_levels);
    let r = romberg(&f, args.tau, args.max_levels)?;
    Ok(extrapolation_report("romberg", config, &args.function, &r))
}

pub struct RungeArgs {
    pub nodes: usize,
    pub grid: usize,
}

pub fn runge_cmd(args: &RungeArgs) -> Result<(Report, Outcome)> {
    if args.nodes < 2 {
        bail!(usage("--nodes must be at least 2"));
    }
    if args.grid < 2 {
        bail!(usage("--grid must be at least 2"));
    }
    let mut config = Record::default();
    config.set("nodes", args.nodes);
    config.set("grid", args.grid);

    let spaced = |n: usize| (0..n).map(move |k| -1.0 + 2.0 * k as f64 / (n - 1) as f64);
    let data: Vec<StepSample> = spaced(args.nodes).map(|x| StepSample::new(x, runge_function(x))).collect();
    let xs: Vec<f64> = spaced(args.grid).collect();

    let poly = neville_interpolate_curve(&data, &xs)?;
    let model = fit_gp_with_mean(&data, 0.0, &FitConfig::default())?;

    let mut curve = Table::new("curve", &["x", "exact", "polynomial", "gp_mean", "gp_sd"]);
    let (mut poly_err, mut gp_err) = (0.0f64, 0.0f64);
    for (&x, &p) in xs.iter().zip(&poly) {
        let exact = runge_function(x);
        let g = model.posterior_at(x);
        poly_err = poly_err.max((p - exact).abs());
        gp_err = gp_err.max((g.mean - exact).abs());
        curve.push(vec![x.into(), exact.into(), p.into(), g.mean.into(), g.sd.into()]);
    }
    let mut nodes = Table::new("nodes", &["x", "y"]);
    for s in &data {
        nodes.push(vec![s.h.into(), s.value.into()]);
    }

    let mut report = Report::new("runge", config);
    report.tables = vec![curve, nodes];
    report.summary.set("polynomial_max_error", poly_err);
    report.summary.set("gp_max_error", gp_err);
    report.summary.set("length_scale", model.params().length_scale);
    report.summary.set("signal_variance", model.params().signal_variance);
    Ok((report, Outcome::Success))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Poly,
    Gp,
    Both,
}

pub struct KeplerArgs {
    pub eccentricity: f64,
    pub periods: f64,
    pub mode: ModeArg,
    pub tau: f64,
    pub initial_segment: f64,
    pub max_halvings: usize,
    pub max_gp_points: usize,
    pub gamma_hat: f64,
    pub reference_points: usize,
}

/// Result of one mode, complete or cut short by a segment failure.
struct ModeRun {
    name: &'static str,
    trajectory: Vec<PhaseState>,
    segments: usize,
    rejected: usize,
    evaluations: usize,
    max_depth: usize,
    failure_time: Option<f64>,
}

impl ModeRun {
    fn from_run(name: &'static str, run: BsaRun) -> Self {
        Self {
            name,
            max_depth: run.segments.iter().map(|s| s.depth).max().unwrap_or(0),
            segments: run.segments.len(),
            trajectory: run.trajectory,
            rejected: run.rejected,
            evaluations: run.evaluations,
            failure_time: None,
        }
    }
}

fn energy(s: &PhaseState) -> f64 {
    specific_energy(s).unwrap_or(f64::NAN)
}

fn state_row(s: &PhaseState) -> Vec<Cell> {
    vec![s.time.into(), s.position[0].into(), s.position[1].into(), s.velocity[0].into(), s.velocity[1].into(), energy(s).into()]
}

const STATE_COLUMNS: [&str; 6] = ["t", "x", "y", "vx", "vy", "energy"];

pub fn kepler_cmd(args: &KeplerArgs) -> Result<(Report, Outcome)> {
    let orbit = KeplerOrbit::new(args.eccentricity)?;
    if !(args.periods > 0.0 && args.periods.is_finite()) {
        bail!(usage(format!("--periods must be positive, got {}", args.periods)));
    }
    if args.reference_points < 2 {
        bail!(usage("--reference-points must be at least 2"));
    }
    let base = BsaConfig {
        tau: args.tau,
        initial_segment: args.initial_segment,
        max_halvings: args.max_halvings,
        max_gp_points: args.max_gp_points,
        gamma_hat: args.gamma_hat,
        ..BsaConfig::default()
    };
    base.validate()?;

    let mut config = Record::default();
    config.set("eccentricity", args.eccentricity);
    config.set("periods", args.periods);
    config.set("mode", format!("{:?}", args.mode).to_lowercase());
    config.set("tau", args.tau);
    config.set("initial_segment", args.initial_segment);
    config.set("max_halvings", args.max_halvings);
    config.set("max_gp_points", args.max_gp_points);
    config.set("gamma_hat", args.gamma_hat);
    config.set("reference_points", args.reference_points);

    let start = orbit.initial_state();
    let t_end = args.periods * orbit.period();
    let modes: &[(&'static str, ExtrapolationMode)] = match args.mode {
        ModeArg::Poly => &[("poly", ExtrapolationMode::Polynomial)],
        ModeArg::Gp => &[("gp", ExtrapolationMode::GaussianProcess)],
        ModeArg::Both => &[("poly", ExtrapolationMode::Polynomial), ("gp", ExtrapolationMode::GaussianProcess)],
    };

    let mut runs = Vec::new();
    for &(name, mode) in modes {
        let cfg = BsaConfig { mode, ..base.clone() };
        let run = match bsa_integrate(&Kepler, &start, t_end, &cfg) {
            Ok(run) => ModeRun::from_run(name, run),
            Err(Error::SegmentFailure(f)) => {
                log::warn!("{name} mode failed at t = {}", f.time);
                ModeRun {
                    name,
                    max_depth: f.segments.iter().map(|s| s.depth).max().unwrap_or(0),
                    segments: f.segments.len(),
                    trajectory: f.trajectory,
                    rejected: f.rejected,
                    evaluations: f.evaluations,
                    failure_time: Some(f.time),
                }
            }
            Err(e) => return Err(e.into()),
        };
        runs.push(run);
    }

    let mut report = Report::new("kepler", config);
    let mut stats = Table::new(
        "stats",
        &[
            "mode",
            "completed",
            "end_time",
            "failure_time",
            "segments",
            "rejected",
            "evaluations",
            "max_depth",
            "max_position_error",
        ],
    );
    for run in &runs {
        let mut table = Table::new(format!("trajectory_{}", run.name), &STATE_COLUMNS);
        let mut worst = 0.0f64;
        for s in &run.trajectory {
            table.push(state_row(s));
            if s.radius() > 0.05 {
                let truth = orbit.state_at(s.time);
                for k in 0..2 {
                    worst = worst.max((s.position[k] - truth.position[k]).abs());
                }
            }
        }
        report.tables.push(table);
        let end = run.trajectory.last().map_or(start.time, |s| s.time);
        stats.push(vec![
            run.name.into(),
            run.failure_time.is_none().into(),
            end.into(),
            run.failure_time.into(),
            run.segments.into(),
            run.rejected.into(),
            run.evaluations.into(),
            run.max_depth.into(),
            worst.into(),
        ]);
        report.summary.set(&format!("{}_completed", run.name), run.failure_time.is_none());
        report.summary.set(&format!("{}_end_time", run.name), end);
        report.summary.set(&format!("{}_max_position_error", run.name), worst);
    }

    let mut reference = Table::new("reference", &STATE_COLUMNS);
    for k in 0..args.reference_points {
        let t = t_end * k as f64 / (args.reference_points - 1) as f64;
        reference.push(state_row(&orbit.state_at(t)));
    }
    report.tables.push(reference);
    report.tables.push(stats);
    report.summary.set("period", orbit.period());
    report.summary.set("t_end", t_end);

    let early = start.time + 0.1 * t_end;
    let all_failed_early = runs.iter().all(|r| r.failure_time.is_some_and(|t| t < early));
    let any_failed = runs.iter().any(|r| r.failure_time.is_some());
    let any_completed = runs.iter().any(|r| r.failure_time.is_none());
    let outcome = if all_failed_early {
        Outcome::TotalFailure
    } else if !any_failed || (args.mode == ModeArg::Both && any_completed) {
        Outcome::Success
    } else {
        Outcome::NotConverged
    };
    Ok((report, outcome))
}
