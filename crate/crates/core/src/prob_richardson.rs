//! Adaptive GP extrapolation of quadrature values to zero step size.
//!
//! The loop fits a GP to the current `(h, I(f, h))` data, reads off the
//! posterior mean and standard deviation `σ₀` at `h = 0`, and stops once
//! `σ₀ <= tau`. Otherwise it picks the step size whose posterior standard
//! deviation is closest to `gamma_hat * σ₀`, evaluates the quadrature there and
//! refits.
//!
//! `tau` bounds the posterior standard deviation itself, not a 95% half-width.

use crate::error::{Error, Result};
use crate::gpr::{fit_gp, FitConfig, GpModel, PriorMeanStrategy};
use crate::quad::{trapezoid_composite, Integrand, StepSample};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Tolerance on the posterior standard deviation at `h = 0`.
    pub tau: f64,
    /// Target fraction of `σ₀` for the next step size.
    pub gamma_hat: f64,
    /// Initial step sizes as fractions of the domain width.
    pub initial_steps: Vec<f64>,
    pub max_new_points: usize,
    pub grid_points: usize,
    pub fit: FitConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            gamma_hat: 0.5,
            initial_steps: vec![1.0, 0.5, 1.0 / 3.0, 0.25],
            max_new_points: 50,
            grid_points: 1000,
            fit: FitConfig::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.gamma_hat > 0.0 && self.gamma_hat < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma_hat must lie in (0, 1), got {}", self.gamma_hat)));
        }
        if self.initial_steps.len() < 2 {
            return Err(Error::InvalidConfig("at least two initial steps are needed to fit a GP".into()));
        }
        if self.initial_steps.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidConfig("initial steps must be positive".into()));
        }
        if self.initial_steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("initial steps must be strictly decreasing".into()));
        }
        if self.max_new_points == 0 {
            return Err(Error::InvalidConfig("max_new_points must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig("grid_points must be at least 2".into()));
        }
        Ok(())
    }
}

/// One pass of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Number of samples the GP was fitted to.
    pub dataset_size: usize,
    pub estimate: f64,
    pub sigma0: f64,
    /// Sample added after this pass; `None` on the final pass.
    pub added: Option<StepSample>,
}

#[derive(Debug, Clone)]
pub struct ProbEstimate {
    pub estimate: f64,
    pub sigma0: f64,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
    /// Final dataset in evaluation order.
    pub samples: Vec<StepSample>,
    pub model: GpModel,
}

impl ProbEstimate {
    pub fn new_points(&self) -> usize {
        self.history.iter().filter(|e| e.added.is_some()).count()
    }
}

/// Evaluates the trapezoid rule at each step size, in order.
pub fn initial_dataset<F: Fn(f64) -> f64>(f: &Integrand<F>, steps: &[f64]) -> Result<Vec<StepSample>> {
    steps
        .iter()
        .map(|&h| Ok(StepSample::new(h, trapezoid_composite(f, h)?)))
        .collect()
}

/// Grid search on `(0, h_min)` for the step whose posterior standard deviation
/// is closest to `gamma_hat * σ₀`.
///
/// The grid is `k * h_min / grid_points` for `k = 1 .. grid_points - 1`; ties go
/// to the smaller step.
pub fn select_next_h(model: &GpModel, gamma_hat: f64, h_min: f64, grid_points: usize) -> Result<f64> {
    if !(gamma_hat > 0.0 && gamma_hat < 1.0) {
        return Err(Error::InvalidConfig(format!("gamma_hat must lie in (0, 1), got {gamma_hat}")));
    }
    if !(h_min > 0.0) || grid_points < 2 {
        return Err(Error::InvalidConfig(format!(
            "need h_min > 0 and at least 2 grid points, got {h_min} and {grid_points}"
        )));
    }
    let sigma0 = model.posterior_at(0.0).sd;
    if sigma0 == 0.0 {
        return Err(Error::DegenerateUncertainty);
    }
    let target = gamma_hat * sigma0;
    let grid: Vec<f64> = (1..grid_points).map(|k| k as f64 * h_min / grid_points as f64).collect();
    let sds = model.posterior_sd_many(&grid);
    let mut best = (f64::INFINITY, grid[0]);
    for (&h, &sd) in grid.iter().zip(&sds) {
        let gap = (sd - target).abs();
        if gap < best.0 {
            best = (gap, h);
        }
    }
    Ok(best.1)
}

/// Adaptive GP-Richardson extrapolation of `∫ f` using the trapezoid rule.
///
/// A step chosen by [`select_next_h`] is snapped to the nearest `width / M`
/// with `M` larger than every panel count used so far, so each new step is an
/// exact divisor of the domain and smaller than all previous ones.
pub fn gp_richardson<F: Fn(f64) -> f64>(
    f: &Integrand<F>,
    config: &AdaptiveConfig,
    prior_mean: PriorMeanStrategy,
) -> Result<ProbEstimate> {
    config.validate()?;
    let width = f.width();
    let steps: Vec<f64> = config.initial_steps.iter().map(|s| s * width).collect();
    let mut samples = initial_dataset(f, &steps)?;
    let mut history = Vec::new();

    for iteration in 0..=config.max_new_points {
        let model = fit_gp(&samples, prior_mean, &config.fit)?;
        let post = model.posterior_at(0.0);
        log::debug!(
            "iteration {iteration}: n = {}, estimate = {}, sigma0 = {:e}",
            samples.len(),
            post.mean,
            post.sd
        );
        let done = post.sd <= config.tau;
        if done || iteration == config.max_new_points {
            history.push(HistoryEntry {
                iteration,
                dataset_size: samples.len(),
                estimate: post.mean,
                sigma0: post.sd,
                added: None,
            });
            return Ok(ProbEstimate {
                estimate: post.mean,
                sigma0: post.sd,
                converged: done,
                history,
                samples,
                model,
            });
        }

        let h_min = model.h_min();
        let proposed = select_next_h(&model, config.gamma_hat, h_min, config.grid_points)?;
        let max_panels = f.panels(h_min)?;
        let panels = ((width / proposed).round() as usize).max(max_panels + 1);
        let h = width / panels as f64;
        let sample = StepSample::new(h, trapezoid_composite(f, h)?);
        history.push(HistoryEntry {
            iteration,
            dataset_size: samples.len(),
            estimate: post.mean,
            sigma0: post.sd,
            added: Some(sample),
        });
        samples.push(sample);
    }
    unreachable!("loop returns on its final iteration")
}
