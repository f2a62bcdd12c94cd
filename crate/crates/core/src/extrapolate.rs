//! Deterministic extrapolation to zero step size: the Richardson tableau,
//! Romberg integration and Neville polynomial interpolation.

use crate::error::{Error, Result};
use crate::quad::{trapezoid_composite, Integrand, StepSample};

/// Relative separation below which two abscissae count as the same point.
const DUPLICATE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonConfig {
    /// Step contraction `h_j = gamma * h_{j-1}`.
    pub gamma: f64,
    /// Leading error order of the base scheme.
    pub order: u32,
    pub tau: f64,
    pub max_iter: usize,
}

impl Default for RichardsonConfig {
    fn default() -> Self {
        Self { gamma: 0.5, order: 2, tau: 1e-8, max_iter: 20 }
    }
}

impl RichardsonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.order == 0 {
            return Err(Error::InvalidConfig("order must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a Richardson or Romberg run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationResult {
    pub estimate: f64,
    /// `|R_j - R_{j-1}|` for the last two diagonal entries.
    pub error_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step size used at each level.
    pub steps: Vec<f64>,
    /// Row `k` holds `T[k][0..=k]`; `T[k][0]` is the raw quadrature value and
    /// `T[k][k]` is the extrapolant `R_k`.
    pub tableau: Vec<Vec<f64>>,
}

impl ExtrapolationResult {
    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.tableau.iter().enumerate().map(|(k, row)| row[k])
    }
}

/// Appends level `k` to the tableau using the per-column factors `factor(j)`.
fn extend_tableau(tableau: &mut Vec<Vec<f64>>, raw: f64, factor: impl Fn(usize) -> f64) {
    let mut row = Vec::with_capacity(tableau.len() + 1);
    row.push(raw);
    if let Some(prev) = tableau.last() {
        for j in 1..=prev.len() {
            let c = factor(j);
            row.push((c * row[j - 1] - prev[j - 1]) / (c - 1.0));
        }
    }
    tableau.push(row);
}

/// Richardson extrapolation of trapezoid values with step contraction `gamma`.
///
/// Column `j` removes the error term of order `n + j - 1` with the factor
/// `gamma^(1 - n - j)`, so the diagonal entry `R_j` combines `R_{j-1}` with the
/// level-`j` value refined by the previous columns. Iteration stops when
/// `|R_j - R_{j-1}| <= tau` or after `max_iter` contractions.
pub fn richardson_sequence<F: Fn(f64) -> f64>(
    f: &Integrand<F>,
    config: &RichardsonConfig,
    h0: f64,
) -> Result<ExtrapolationResult> {
    config.validate()?;
    let n = config.order as i32;
    let gamma = config.gamma;
    let factor = |j: usize| gamma.powi(1 - n - j as i32);

    let mut steps = vec![h0];
    let mut tableau = Vec::new();
    extend_tableau(&mut tableau, trapezoid_composite(f, h0)?, factor);

    let mut h = h0;
    let mut diff = f64::INFINITY;
    for j in 1..=config.max_iter {
        h *= gamma;
        // Snap to the nearest exact divisor of the domain.
        let m = f.panels(h)?;
        h = f.width() / m as f64;
        steps.push(h);
        extend_tableau(&mut tableau, trapezoid_composite(f, h)?, factor);
        diff = (tableau[j][j] - tableau[j - 1][j - 1]).abs();
        if diff <= config.tau {
            return Ok(ExtrapolationResult {
                estimate: tableau[j][j],
                error_estimate: diff,
                iterations: j,
                converged: true,
                steps,
                tableau,
            });
        }
    }
    let last = tableau.len() - 1;
    Ok(ExtrapolationResult {
        estimate: tableau[last][last],
        error_estimate: diff,
        iterations: config.max_iter,
        converged: false,
        steps,
        tableau,
    })
}

/// Classic Romberg integration: trapezoid values at `h = (b - a) / 2^k`
/// extrapolated with the even-power factors `4^j`.
pub fn romberg<F: Fn(f64) -> f64>(
    f: &Integrand<F>,
    tau: f64,
    max_levels: usize,
) -> Result<ExtrapolationResult> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    if max_levels == 0 {
        return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
    }
    let factor = |j: usize| 4f64.powi(j as i32);
    let (a, b) = (f.lower(), f.upper());
    let width = f.width();

    let mut trap = 0.5 * width * (f.eval(a) + f.eval(b));
    let mut steps = vec![width];
    let mut tableau = Vec::new();
    extend_tableau(&mut tableau, trap, factor);

    let mut diff = f64::INFINITY;
    for k in 1..max_levels {
        let panels = 1usize << k;
        let h = width / panels as f64;
        // New nodes are the odd multiples of h.
        let mids: f64 = (0..panels / 2).map(|i| f.eval(a + (2 * i + 1) as f64 * h)).sum();
        trap = 0.5 * trap + h * mids;
        steps.push(h);
        extend_tableau(&mut tableau, trap, factor);
        diff = (tableau[k][k] - tableau[k - 1][k - 1]).abs();
        if diff <= tau {
            return Ok(ExtrapolationResult {
                estimate: tableau[k][k],
                error_estimate: diff,
                iterations: k,
                converged: true,
                steps,
                tableau,
            });
        }
    }
    let last = tableau.len() - 1;
    Ok(ExtrapolationResult {
        estimate: tableau[last][last],
        error_estimate: diff,
        iterations: last,
        converged: false,
        steps,
        tableau,
    })
}

/// Value of the interpolating polynomial at the target, with the magnitude
/// of the last Neville correction as an error proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NevilleEstimate {
    pub value: f64,
    /// Infinite for a single sample.
    pub delta: f64,
}

fn ordered_nodes(samples: &[StepSample], target: f64) -> Result<Vec<StepSample>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut nodes = samples.to_vec();
    // Farthest from the target first; distance ties are ordered by abscissa.
    nodes.sort_by(|p, q| {
        let (dp, dq) = ((p.h - target).abs(), (q.h - target).abs());
        dq.total_cmp(&dp).then(p.h.total_cmp(&q.h))
    });
    for (i, p) in nodes.iter().enumerate() {
        for q in &nodes[i + 1..] {
            if (p.h - q.h).abs() <= DUPLICATE_TOLERANCE * p.h.abs().max(q.h.abs()) {
                return Err(Error::DuplicateAbscissa(p.h));
            }
        }
    }
    Ok(nodes)
}

fn neville_ordered(nodes: &[StepSample], target: f64) -> NevilleEstimate {
    let n = nodes.len();
    let mut p: Vec<f64> = nodes.iter().map(|s| s.value).collect();
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xm) = (nodes[i].h, nodes[i + m].h);
            p[i] = ((target - xm) * p[i] - (target - xi) * p[i + 1]) / (xi - xm);
        }
    }
    // p[1] still holds the interpolant through every node except the farthest.
    let delta = if n > 1 { (p[0] - p[1]).abs() } else { f64::INFINITY };
    NevilleEstimate { value: p[0], delta }
}

/// Evaluates the degree `len - 1` interpolant through `samples` at `target`
/// using Neville's tableau.
pub fn neville_extrapolate(samples: &[StepSample], target: f64) -> Result<NevilleEstimate> {
    let nodes = ordered_nodes(samples, target)?;
    Ok(neville_ordered(&nodes, target))
}

/// Evaluates the interpolating polynomial at each query point.
pub fn neville_interpolate_curve(samples: &[StepSample], queries: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    queries
        .iter()
        .map(|&x| neville_extrapolate(samples, x).map(|e| e.value))
        .collect()
}
