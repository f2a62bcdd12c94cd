//! Gaussian process regression over step-size space.
//!
//! Models `I(f, h)` as a GP in the scalar input `h` with a Matérn ν = 3/2
//! kernel and a constant prior mean. Hyperparameters are chosen by maximising
//! the log marginal likelihood over a fixed log-spaced lattice, which keeps
//! fitting deterministic and derivative-free.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::quad::StepSample;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub length_scale: f64,
    /// Only ν = 1.5 is supported.
    pub nu: f64,
    pub signal_variance: f64,
    /// Added to the diagonal of the training covariance.
    pub noise_jitter: f64,
}

impl KernelParams {
    pub fn new(length_scale: f64, signal_variance: f64, noise_jitter: f64) -> Self {
        Self { length_scale, nu: 1.5, signal_variance, noise_jitter }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidParams(format!("length scale {} must be positive", self.length_scale)));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "signal variance {} must be positive",
                self.signal_variance
            )));
        }
        if !(self.noise_jitter >= 0.0) {
            return Err(Error::InvalidParams(format!("jitter {} must be non-negative", self.noise_jitter)));
        }
        if self.nu != 1.5 {
            return Err(Error::InvalidParams(format!("only nu = 1.5 is supported, got {}", self.nu)));
        }
        Ok(())
    }

    /// Unit-variance Matérn 3/2 correlation; assumes validated parameters.
    #[inline]
    fn correlation(&self, r: f64) -> f64 {
        let s = SQRT_3 * r / self.length_scale;
        (1.0 + s) * (-s).exp()
    }

    #[inline]
    fn cov(&self, a: f64, b: f64) -> f64 {
        self.signal_variance * self.correlation((a - b).abs())
    }
}

/// Matérn ν = 3/2 covariance at lag `r`:
/// `σ² (1 + √3 r / l) exp(-√3 r / l)`.
pub fn matern_kernel(r: f64, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    if !(r >= 0.0) {
        return Err(Error::InvalidParams(format!("lag {r} must be non-negative")));
    }
    Ok(params.signal_variance * params.correlation(r))
}

/// How the constant prior mean is set from the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMeanStrategy {
    Zero,
    AverageOfObservations,
    /// Value at the smallest step size present.
    #[default]
    LastObservation,
}

impl PriorMeanStrategy {
    pub fn resolve(self, samples: &[StepSample]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::AverageOfObservations => {
                samples.iter().map(|s| s.value).sum::<f64>() / samples.len().max(1) as f64
            }
            Self::LastObservation => samples
                .iter()
                .min_by(|a, b| a.h.total_cmp(&b.h))
                .map_or(0.0, |s| s.value),
        }
    }
}

/// Search lattice and jitter schedule for [`fit_gp`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub length_scale_points: usize,
    /// Length scales span `[lo, hi] * range(h)`.
    pub length_scale_span: (f64, f64),
    pub variance_points: usize,
    /// Signal variances span `[lo, hi] * max(var(y), variance_floor)`.
    pub variance_span: (f64, f64),
    pub variance_floor: f64,
    /// Initial jitter relative to the signal variance; escalated ×10 on failure.
    pub base_jitter: f64,
    pub max_jitter: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            length_scale_points: 40,
            length_scale_span: (1e-3, 10.0),
            variance_points: 20,
            variance_span: (1e-6, 1e3),
            variance_floor: 1e-12,
            base_jitter: 1e-10,
            max_jitter: 1e-4,
        }
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn covariance_matrix(h: &[f64], params: &KernelParams) -> DMatrix<f64> {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| {
        params.cov(h[i], h[j]) + if i == j { params.noise_jitter } else { 0.0 }
    })
}

/// A GP conditioned on step-size samples. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    training: Vec<StepSample>,
    params: KernelParams,
    strategy: Option<PriorMeanStrategy>,
    prior_mean: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Posterior mean and standard deviation at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub sd: f64,
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters and a constant prior mean.
    pub fn with_params(samples: &[StepSample], params: KernelParams, prior_mean: f64) -> Result<Self> {
        params.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let h: Vec<f64> = samples.iter().map(|s| s.h).collect();
        let chol = covariance_matrix(&h, &params)
            .cholesky()
            .ok_or(Error::FactorizationFailure { jitter: params.noise_jitter })?;
        let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.value - prior_mean));
        let alpha = chol.solve(&y);
        Ok(Self {
            training: samples.to_vec(),
            params,
            strategy: None,
            prior_mean,
            chol,
            alpha,
        })
    }

    pub fn training(&self) -> &[StepSample] {
        &self.training
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn strategy(&self) -> Option<PriorMeanStrategy> {
        self.strategy
    }

    /// Lower-triangular factor of `K + jitter I`.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Smallest step size in the training set.
    pub fn h_min(&self) -> f64 {
        self.training.iter().map(|s| s.h).fold(f64::INFINITY, f64::min)
    }

    fn cross_cov(&self, h: f64) -> DVector<f64> {
        DVector::from_iterator(self.training.len(), self.training.iter().map(|s| self.params.cov(h, s.h)))
    }

    /// Posterior variance before clamping; may be slightly negative from
    /// cancellation.
    pub fn posterior_variance_raw(&self, h: f64) -> f64 {
        let k = self.cross_cov(h);
        let v = self.chol.l().solve_lower_triangular(&k).expect("factor has a positive diagonal");
        self.params.signal_variance - v.dot(&v)
    }

    pub fn posterior_at(&self, h: f64) -> Posterior {
        let k = self.cross_cov(h);
        let mean = self.prior_mean + k.dot(&self.alpha);
        let l = self.chol.l();
        let v = l.solve_lower_triangular(&k).expect("factor has a positive diagonal");
        let var = self.params.signal_variance - v.dot(&v);
        debug_assert!(
            var >= -1e-10 * self.params.signal_variance.max(1.0),
            "posterior variance {var} far below zero"
        );
        Posterior { mean, sd: var.max(0.0).sqrt() }
    }

    /// Posterior standard deviation at each query, sharing one factor.
    pub fn posterior_sd_many(&self, queries: &[f64]) -> Vec<f64> {
        let n = self.training.len();
        let k = DMatrix::from_fn(n, queries.len(), |i, j| self.params.cov(queries[j], self.training[i].h));
        let v = self.chol.l().solve_lower_triangular(&k).expect("factor has a positive diagonal");
        v.column_iter()
            .map(|c| (self.params.signal_variance - c.dot(&c)).max(0.0).sqrt())
            .collect()
    }
}

/// Convenience wrapper for [`GpModel::posterior_at`].
pub fn posterior_at(model: &GpModel, h_query: f64) -> Posterior {
    model.posterior_at(h_query)
}

/// `log p(y | h, θ)` for the mean-subtracted values, via a Cholesky factor of
/// `K + jitter I`.
pub fn log_marginal_likelihood(samples: &[StepSample], params: &KernelParams, prior_mean: f64) -> Result<f64> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let h: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let chol = covariance_matrix(&h, params)
        .cholesky()
        .ok_or(Error::FactorizationFailure { jitter: params.noise_jitter })?;
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.value - prior_mean));
    let alpha = chol.solve(&y);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * samples.len() as f64 * LN_2PI)
}

/// Unit-variance correlation matrix at one lattice length scale, factored with
/// the smallest jitter that succeeds.
struct LatticeFactor {
    length_scale: f64,
    rel_jitter: f64,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

fn factor_lattice(h: &[f64], config: &FitConfig) -> Result<Vec<LatticeFactor>> {
    let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let range = h_max - h_min;
    if !(range > 0.0) {
        return Err(Error::DegenerateData("all step sizes coincide".into()));
    }
    let (lo, hi) = config.length_scale_span;
    let mut factors = Vec::with_capacity(config.length_scale_points);
    for l in log_space(lo * range, hi * range, config.length_scale_points) {
        let unit = KernelParams::new(l, 1.0, 0.0);
        let base = covariance_matrix(h, &unit);
        let mut jitter = config.base_jitter;
        while jitter <= config.max_jitter * (1.0 + 1e-9) {
            let mut c = base.clone();
            for i in 0..h.len() {
                c[(i, i)] += jitter;
            }
            if let Some(chol) = c.cholesky() {
                let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                factors.push(LatticeFactor { length_scale: l, rel_jitter: jitter, chol, log_det });
                break;
            }
            jitter *= 10.0;
        }
    }
    if factors.is_empty() {
        return Err(Error::FactorizationFailure { jitter: config.max_jitter });
    }
    Ok(factors)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Lattice argmax of the log marginal likelihood for one output.
///
/// With `K = σ² (C + ε I)` the quadratic form and log-determinant separate,
/// so every variance on the lattice reuses the factor of `C + ε I`.
fn select_params(factors: &[LatticeFactor], y: &DVector<f64>, config: &FitConfig) -> KernelParams {
    let n = y.len() as f64;
    let values: Vec<f64> = y.iter().copied().collect();
    let scale = population_variance(&values).max(config.variance_floor);
    let (lo, hi) = config.variance_span;
    let variances = log_space(lo * scale, hi * scale, config.variance_points);

    let mut best: Option<(f64, KernelParams)> = None;
    for factor in factors {
        let quad = y.dot(&factor.chol.solve(y));
        for &s2 in &variances {
            let lml = -0.5 * quad / s2 - 0.5 * (n * s2.ln() + factor.log_det) - 0.5 * n * LN_2PI;
            // Ties go to the larger length scale.
            let better = match &best {
                None => true,
                Some((b, p)) => lml > *b || (lml == *b && factor.length_scale > p.length_scale),
            };
            if better {
                best = Some((lml, KernelParams::new(factor.length_scale, s2, factor.rel_jitter * s2)));
            }
        }
    }
    best.expect("lattice is non-empty").1
}

fn check_fit_inputs(samples: &[StepSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.h.is_finite() && s.value.is_finite())) {
        return Err(Error::DegenerateData("non-finite sample".into()));
    }
    Ok(())
}

/// Fits hyperparameters by lattice search and conditions on `samples`, with
/// an explicit constant prior mean.
pub fn fit_gp_with_mean(samples: &[StepSample], prior_mean: f64, config: &FitConfig) -> Result<GpModel> {
    check_fit_inputs(samples)?;
    let h: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let factors = factor_lattice(&h, config)?;
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.value - prior_mean));
    let params = select_params(&factors, &y, config);
    GpModel::with_params(samples, params, prior_mean)
}

/// Fits a GP to `samples` with the prior mean taken from `strategy`.
pub fn fit_gp(samples: &[StepSample], strategy: PriorMeanStrategy, config: &FitConfig) -> Result<GpModel> {
    let mut model = fit_gp_with_mean(samples, strategy.resolve(samples), config)?;
    model.strategy = Some(strategy);
    Ok(model)
}

/// Fits one GP per output column over shared step sizes. The lattice
/// factorisations are computed once and reused for every output.
pub fn fit_gp_multi(
    h: &[f64],
    outputs: &[Vec<f64>],
    strategy: PriorMeanStrategy,
    config: &FitConfig,
) -> Result<Vec<GpModel>> {
    let first: Vec<StepSample> = h.iter().map(|&h| StepSample::new(h, 0.0)).collect();
    check_fit_inputs(&first)?;
    let factors = factor_lattice(h, config)?;
    outputs
        .iter()
        .map(|values| {
            let samples: Vec<StepSample> =
                h.iter().zip(values).map(|(&h, &v)| StepSample::new(h, v)).collect();
            check_fit_inputs(&samples)?;
            let m = strategy.resolve(&samples);
            let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.value - m));
            let params = select_params(&factors, &y, config);
            let mut model = GpModel::with_params(&samples, params, m)?;
            model.strategy = Some(strategy);
            Ok(model)
        })
        .collect()
}
