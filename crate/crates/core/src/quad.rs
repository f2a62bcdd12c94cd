//! Composite trapezoidal quadrature and the built-in test integrands.
//!
//! Every evaluation `I(f, h)` that the extrapolation schemes consume comes
//! from [`trapezoid_composite`]. Step sizes must split the domain into a whole
//! number of panels.

use crate::error::{Error, Result};

/// Relative tolerance used when checking that `h` evenly divides the domain.
pub const DIVISOR_TOLERANCE: f64 = 1e-9;

/// A scalar integrand together with its domain of integration.
#[derive(Clone)]
pub struct Integrand<F> {
    eval: F,
    lower: f64,
    upper: f64,
}

impl<F: Fn(f64) -> f64> Integrand<F> {
    pub fn new(eval: F, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidDomain { lower, upper });
        }
        Ok(Self { eval, lower, upper })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Number of panels of width `h`, or an error if `h` is not admissible.
    pub fn panels(&self, h: f64) -> Result<usize> {
        let width = self.width();
        if !(h > 0.0 && h.is_finite()) || h > width * (1.0 + DIVISOR_TOLERANCE) {
            return Err(Error::InvalidStep { h, width });
        }
        let ratio = width / h;
        let m = ratio.round();
        if (ratio - m).abs() > DIVISOR_TOLERANCE * ratio.max(1.0) {
            return Err(Error::StepNotDivisor { h, width });
        }
        Ok(m as usize)
    }
}

/// A step size and the quadrature value computed with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub h: f64,
    pub value: f64,
}

impl StepSample {
    pub fn new(h: f64, value: f64) -> Self {
        Self { h, value }
    }
}

/// Composite trapezoidal rule with `(upper - lower) / h` equal panels.
///
/// Nodes are placed at `lower + k * width / M` rather than by accumulating `h`,
/// so the last node is exactly `upper`.
pub fn trapezoid_composite<F: Fn(f64) -> f64>(f: &Integrand<F>, h: f64) -> Result<f64> {
    let m = f.panels(h)?;
    let (a, b) = (f.lower(), f.upper());
    let step = (b - a) / m as f64;
    let interior: f64 = (1..m).map(|k| f.eval(a + k as f64 * step)).sum();
    Ok(step * (0.5 * f.eval(a) + interior + 0.5 * f.eval(b)))
}

/// Gaussian bump at 0.35 minus a sinusoid; the standard demonstration
/// integrand on `[0, 1]`.
pub fn test_function(x: f64) -> f64 {
    let z = x - 0.35;
    (-(z * z) / (2.0 * 0.1 * 0.1)).exp() - (10.0 * x).sin() / 3.0
}

/// The classic Runge function `1 / (1 + 25 x^2)`.
pub fn runge_function(x: f64) -> f64 {
    1.0 / (1.0 + 25.0 * x * x)
}
