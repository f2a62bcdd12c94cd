//! Builtin integrands selectable with `--function`.

use anyhow::{bail, Context, Result};
use prob_integrate::quad::{runge_function, test_function, Integrand};
use std::fmt;
use std::str::FromStr;

/// Closed form of the integral of the test function over `[0, 1]`.
pub const TEST_INTEGRAL: f64 = 0.189_302_131_687_783_83;

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Test,
    Runge,
    Exp,
    /// Polynomial with coefficients in increasing degree.
    Poly(Vec<f64>),
}

impl FromStr for Builtin {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(Builtin::Test),
            "runge" => Ok(Builtin::Runge),
            "exp" => Ok(Builtin::Exp),
            _ => {
                let Some(list) = s.strip_prefix("poly:") else {
                    bail!("unknown function {s:?}; expected test, runge, exp or poly:<c0,c1,...>");
                };
                let coeffs = list
                    .split(',')
                    .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coefficient {c:?}")))
                    .collect::<Result<Vec<_>>>()?;
                if coeffs.iter().any(|c| !c.is_finite()) {
                    bail!("polynomial coefficients must be finite");
                }
                Ok(Builtin::Poly(coeffs))
            }
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Test => f.write_str("test"),
            Builtin::Runge => f.write_str("runge"),
            Builtin::Exp => f.write_str("exp"),
            Builtin::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl Builtin {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Builtin::Test => test_function(x),
            Builtin::Runge => runge_function(x),
            Builtin::Exp => x.exp(),
            Builtin::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Builtin::Runge => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn exact_integral(&self) -> f64 {
        match self {
            Builtin::Test => TEST_INTEGRAL,
            Builtin::Runge => 0.4 * 5.0f64.atan(),
            Builtin::Exp => std::f64::consts::E - 1.0,
            Builtin::Poly(c) => c.iter().enumerate().map(|(k, a)| a / (k + 1) as f64).sum(),
        }
    }

    pub fn integrand(&self) -> Integrand<impl Fn(f64) -> f64 + '_> {
        let (a, b) = self.domain();
        Integrand::new(move |x| self.eval(x), a, b).expect("builtin domains are valid")
    }
}
