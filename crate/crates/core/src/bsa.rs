//! Bulirsch-Stoer integration of `r'' = a(r)` with leapfrog substeps.
//!
//! Each segment of width `H` is integrated with several substep counts `n`
//! and the results are extrapolated to zero step size, either with Neville
//! polynomials in `(H/n)²` or with a Gaussian process in `H/n`. Segments that
//! fail to converge are halved; after two consecutive successes the width is
//! doubled again, up to the initial width.

use crate::error::{Error, Result};
use crate::extrapolate::neville_extrapolate;
use crate::gpr::{fit_gp_multi, FitConfig, PriorMeanStrategy};
use crate::ode::{integrate_fixed, AccelerationField, PhaseState};
use crate::prob_richardson::select_next_h;
use crate::quad::StepSample;

/// Substep counts used by polynomial extrapolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSequence(Vec<usize>);

impl StepSequence {
    /// `n_j = 2j` for `j = 1..=depth`.
    pub fn deuflhard(depth: usize) -> Self {
        Self((1..=depth).map(|j| 2 * j).collect())
    }

    pub fn new(substeps: Vec<usize>) -> Result<Self> {
        if substeps.is_empty() {
            return Err(Error::InvalidConfig("step sequence is empty".into()));
        }
        if substeps.iter().any(|n| n % 2 != 0 || *n == 0) {
            return Err(Error::InvalidConfig("substep counts must be positive and even".into()));
        }
        if substeps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("substep counts must be strictly increasing".into()));
        }
        Ok(Self(substeps))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl Default for StepSequence {
    fn default() -> Self {
        Self::deuflhard(8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationMode {
    Polynomial,
    GaussianProcess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsaConfig {
    pub tau: f64,
    pub initial_segment: f64,
    pub sequence: StepSequence,
    pub mode: ExtrapolationMode,
    /// Consecutive halvings allowed for one segment in polynomial mode.
    pub max_halvings: usize,
    pub gamma_hat: f64,
    /// Samples allowed per GP segment before it counts as unconverged.
    pub max_gp_points: usize,
    /// Smallest segment width in GP mode; `None` means `1e-12` of the span.
    pub min_segment: Option<f64>,
    /// Upper bound on leapfrog substeps in a single GP sample.
    pub max_gp_substeps: usize,
    pub grid_points: usize,
    pub prior_mean: PriorMeanStrategy,
    pub fit: FitConfig,
}

impl Default for BsaConfig {
    fn default() -> Self {
        Self {
            tau: 1e-8,
            initial_segment: 0.1,
            sequence: StepSequence::default(),
            mode: ExtrapolationMode::Polynomial,
            max_halvings: 20,
            gamma_hat: 0.5,
            max_gp_points: 16,
            min_segment: None,
            max_gp_substeps: 1 << 20,
            grid_points: 1000,
            prior_mean: PriorMeanStrategy::LastObservation,
            fit: FitConfig::default(),
        }
    }
}

impl BsaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.initial_segment > 0.0 && self.initial_segment.is_finite()) {
            return bad(format!("initial segment must be positive, got {}", self.initial_segment));
        }
        if self.max_halvings == 0 {
            return bad("max_halvings must be positive".into());
        }
        if !(self.gamma_hat > 0.0 && self.gamma_hat < 1.0) {
            return bad(format!("gamma_hat must lie in (0, 1), got {}", self.gamma_hat));
        }
        if self.max_gp_points < 3 {
            return bad("max_gp_points must be at least 3".into());
        }
        if let Some(m) = self.min_segment {
            if !(m > 0.0) {
                return bad(format!("min_segment must be positive, got {m}"));
            }
        }
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2".into());
        }
        StepSequence::new(self.sequence.0.clone()).map(|_| ())
    }
}

/// Outcome of one segment attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    /// Extrapolated state at the end of the segment.
    pub state: PhaseState,
    pub converged: bool,
    /// Leapfrog steps consumed.
    pub evaluations: usize,
    /// Number of halvings of the initial segment width in effect.
    pub depth: usize,
    /// GP mode: largest posterior sd at `h = 0`; polynomial mode: largest
    /// Neville correction.
    pub uncertainty: f64,
    /// Number of substep counts tried.
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct BsaRun {
    /// Initial state followed by every accepted segment endpoint.
    pub trajectory: Vec<PhaseState>,
    pub segments: Vec<SegmentResult>,
    pub rejected: usize,
    /// Leapfrog steps over accepted and rejected attempts.
    pub evaluations: usize,
}

/// Where and how a run stopped early.
#[derive(Debug, Clone)]
pub struct SegmentFailure {
    pub time: f64,
    pub state: PhaseState,
    pub trajectory: Vec<PhaseState>,
    pub segments: Vec<SegmentResult>,
    pub rejected: usize,
    pub evaluations: usize,
}

fn is_recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFiniteState { .. }
            | Error::SingularPosition
            | Error::FactorizationFailure { .. }
            | Error::DegenerateUncertainty
    )
}

fn unconverged(state: PhaseState, evaluations: usize, uncertainty: f64, samples: usize) -> SegmentResult {
    SegmentResult { state, converged: false, evaluations, depth: 0, uncertainty, samples }
}

fn segment_poly_to(
    field: &impl AccelerationField,
    state: &PhaseState,
    t_end: f64,
    config: &BsaConfig,
) -> Result<SegmentResult> {
    let width = t_end - state.time;
    let mut xs: Vec<f64> = Vec::new();
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut evaluations = 0;
    let mut best = *state;
    let mut delta = f64::INFINITY;

    for (i, &n) in config.sequence.as_slice().iter().enumerate() {
        let raw = match integrate_fixed(field, state, t_end, n) {
            Ok(s) => s,
            Err(e) if is_recoverable(&e) => return Ok(unconverged(best, evaluations + n, delta, i)),
            Err(e) => return Err(e),
        };
        evaluations += n;
        let h = width / n as f64;
        xs.push(h * h);
        rows.push(raw.components());

        let mut extrapolated = [0.0; 4];
        delta = 0.0;
        for c in 0..4 {
            let column: Vec<StepSample> =
                xs.iter().zip(&rows).map(|(&x, row)| StepSample::new(x, row[c])).collect();
            let e = neville_extrapolate(&column, 0.0)?;
            extrapolated[c] = e.value;
            delta = delta.max(e.delta);
        }
        best = PhaseState::from_components(extrapolated, t_end);
        if i >= 1 && delta <= config.tau && best.is_finite() {
            return Ok(SegmentResult {
                state: best,
                converged: true,
                evaluations,
                depth: 0,
                uncertainty: delta,
                samples: i + 1,
            });
        }
    }
    Ok(unconverged(best, evaluations, delta, rows.len()))
}

fn segment_gp_to(
    field: &impl AccelerationField,
    state: &PhaseState,
    t_end: f64,
    config: &BsaConfig,
) -> Result<SegmentResult> {
    let width = t_end - state.time;
    let mut hs: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut evaluations = 0;
    let mut n_max = 0;
    let mut best = *state;
    let mut sigma = f64::INFINITY;

    let mut pending = vec![2usize, 4];
    loop {
        for n in pending.drain(..) {
            let raw = match integrate_fixed(field, state, t_end, n) {
                Ok(s) => s,
                Err(e) if is_recoverable(&e) => {
                    return Ok(unconverged(best, evaluations + n, sigma, hs.len()))
                }
                Err(e) => return Err(e),
            };
            evaluations += n;
            n_max = n_max.max(n);
            hs.push(width / n as f64);
            for (col, v) in columns.iter_mut().zip(raw.components()) {
                col.push(v);
            }
        }

        let models = match fit_gp_multi(&hs, &columns, config.prior_mean, &config.fit) {
            Ok(m) => m,
            Err(e) if is_recoverable(&e) => return Ok(unconverged(best, evaluations, sigma, hs.len())),
            Err(e) => return Err(e),
        };
        let posts: Vec<_> = models.iter().map(|m| m.posterior_at(0.0)).collect();
        sigma = posts.iter().map(|p| p.sd).fold(0.0, f64::max);
        best = PhaseState::from_components([posts[0].mean, posts[1].mean, posts[2].mean, posts[3].mean], t_end);

        if sigma <= config.tau && best.is_finite() {
            return Ok(SegmentResult {
                state: best,
                converged: true,
                evaluations,
                depth: 0,
                uncertainty: sigma,
                samples: hs.len(),
            });
        }
        if hs.len() >= config.max_gp_points {
            return Ok(unconverged(best, evaluations, sigma, hs.len()));
        }

        // Refine the component with the widest posterior at h = 0.
        let worst = posts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.sd.total_cmp(&b.1.sd))
            .map_or(0, |(i, _)| i);
        let h_min = width / n_max as f64;
        let proposed = match select_next_h(&models[worst], config.gamma_hat, h_min, config.grid_points) {
            Ok(h) => h,
            Err(e) if is_recoverable(&e) => return Ok(unconverged(best, evaluations, sigma, hs.len())),
            Err(e) => return Err(e),
        };
        // Nearest even substep count beyond everything used so far.
        let even = 2 * ((width / proposed / 2.0).round() as usize);
        let n = even.max(n_max + 2);
        if n > config.max_gp_substeps {
            return Ok(unconverged(best, evaluations, sigma, hs.len()));
        }
        pending.push(n);
    }
}

/// One polynomial-extrapolation segment of width `h` from `state`.
pub fn bsa_segment_poly(
    field: &impl AccelerationField,
    state: &PhaseState,
    h: f64,
    config: &BsaConfig,
) -> Result<SegmentResult> {
    check_segment(h)?;
    segment_poly_to(field, state, state.time + h, config)
}

/// One GP-extrapolation segment of width `h` from `state`.
pub fn bsa_segment_gp(
    field: &impl AccelerationField,
    state: &PhaseState,
    h: f64,
    config: &BsaConfig,
) -> Result<SegmentResult> {
    check_segment(h)?;
    segment_gp_to(field, state, state.time + h, config)
}

fn check_segment(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("segment width must be positive, got {h}")));
    }
    Ok(())
}

/// Integrates from `state0` to `t_end`, returning every accepted segment
/// endpoint. The last segment is shortened to land exactly on `t_end`.
pub fn bsa_integrate(
    field: &impl AccelerationField,
    state0: &PhaseState,
    t_end: f64,
    config: &BsaConfig,
) -> Result<BsaRun> {
    config.validate()?;
    if !(t_end > state0.time) {
        return Err(Error::InvalidConfig(format!("t_end {t_end} must exceed the start time {}", state0.time)));
    }
    let span = t_end - state0.time;
    let min_segment = config.min_segment.unwrap_or(1e-12 * span);
    let h0 = config.initial_segment;

    let mut state = *state0;
    let mut trajectory = vec![state];
    let mut segments = Vec::new();
    let mut rejected = 0;
    let mut evaluations = 0;
    let mut level = 0usize;
    let mut successes = 0;
    let mut halvings = 0;

    while state.time < t_end {
        let nominal = h0 * 0.5f64.powi(level as i32);
        let remaining = t_end - state.time;
        let (target, width) = if nominal >= remaining * (1.0 - 1e-12) {
            (t_end, remaining)
        } else {
            (state.time + nominal, nominal)
        };
        let mut result = match config.mode {
            ExtrapolationMode::Polynomial => segment_poly_to(field, &state, target, config)?,
            ExtrapolationMode::GaussianProcess => segment_gp_to(field, &state, target, config)?,
        };
        evaluations += result.evaluations;

        if result.converged {
            result.depth = level;
            state = result.state;
            trajectory.push(state);
            segments.push(result);
            halvings = 0;
            successes += 1;
            if level > 0 && successes >= 2 {
                level -= 1;
                successes = 0;
            }
            continue;
        }

        rejected += 1;
        successes = 0;
        halvings += 1;
        level += 1;
        while h0 * 0.5f64.powi(level as i32) > 0.5 * width * (1.0 + 1e-12) {
            level += 1;
        }
        log::debug!("t = {}: segment of width {width:e} rejected (uncertainty {:e})", state.time, result.uncertainty);
        let exhausted = match config.mode {
            ExtrapolationMode::Polynomial => halvings > config.max_halvings,
            ExtrapolationMode::GaussianProcess => h0 * 0.5f64.powi(level as i32) < min_segment,
        };
        if exhausted {
            return Err(Error::SegmentFailure(Box::new(SegmentFailure {
                time: state.time,
                state,
                trajectory,
                segments,
                rejected,
                evaluations,
            })));
        }
    }
    Ok(BsaRun { trajectory, segments, rejected, evaluations })
}
