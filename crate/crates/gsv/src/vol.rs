//! Volatility functions: positive parametric families with evaluable
//! derivatives and local Lipschitz constants.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volatility function sigma as a parametric family.
///
/// Every family is strictly positive on the real line. `Custom` carries
/// user-supplied closures and is rejected by operations that need declared
/// structure (growth classification, config parsing).
#[derive(Clone)]
pub enum VolFunction {
    /// sigma(x) = sigma0
    Constant { sigma0: f64 },
    /// sigma(x) = c0 + c1 |x|
    Affine { c0: f64, c1: f64 },
    /// sigma(x) = c e^{lambda x}
    Exp { c: f64, lambda: f64 },
    /// sigma(x) = c (1 + x^k), k >= 2 even
    PolyPlus { c: f64, k: u32 },
    /// sigma(x) = c0 (1 + c1 tanh x), |c1| < 1
    BoundedSmooth { c0: f64, c1: f64 },
    /// User-supplied sigma with optional derivative and local Lipschitz
    /// constant schedule L(delta).
    Custom {
        label: String,
        sigma: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        deriv: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        lipschitz: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    },
}

impl fmt::Debug for VolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolFunction::Constant { sigma0 } => write!(f, "Constant({sigma0})"),
            VolFunction::Affine { c0, c1 } => write!(f, "Affine({c0}, {c1})"),
            VolFunction::Exp { c, lambda } => write!(f, "Exp({c}, {lambda})"),
            VolFunction::PolyPlus { c, k } => write!(f, "PolyPlus({c}, {k})"),
            VolFunction::BoundedSmooth { c0, c1 } => write!(f, "BoundedSmooth({c0}, {c1})"),
            VolFunction::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl VolFunction {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        match *self {
            VolFunction::Constant { sigma0 } => {
                if !(sigma0.is_finite() && sigma0 > 0.0) {
                    return bad("Constant needs sigma0 > 0");
                }
            }
            VolFunction::Affine { c0, c1 } => {
                if !(c0.is_finite() && c0 > 0.0 && c1.is_finite() && c1 >= 0.0) {
                    return bad("Affine needs c0 > 0 and c1 >= 0");
                }
            }
            VolFunction::Exp { c, lambda } => {
                if !(c.is_finite() && c > 0.0 && lambda.is_finite()) {
                    return bad("Exp needs c > 0 and finite lambda");
                }
            }
            VolFunction::PolyPlus { c, k } => {
                if !(c.is_finite() && c > 0.0) || k < 2 || k % 2 != 0 {
                    return bad("PolyPlus needs c > 0 and even k >= 2");
                }
            }
            VolFunction::BoundedSmooth { c0, c1 } => {
                if !(c0.is_finite() && c0 > 0.0 && c1.is_finite() && c1.abs() < 1.0) {
                    return bad("BoundedSmooth needs c0 > 0 and |c1| < 1");
                }
            }
            VolFunction::Custom { .. } => {}
        }
        Ok(())
    }

    /// sigma(x)
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            VolFunction::Constant { sigma0 } => *sigma0,
            VolFunction::Affine { c0, c1 } => c0 + c1 * x.abs(),
            VolFunction::Exp { c, lambda } => c * (lambda * x).exp(),
            VolFunction::PolyPlus { c, k } => c * (1.0 + x.powi(*k as i32)),
            VolFunction::BoundedSmooth { c0, c1 } => c0 * (1.0 + c1 * x.tanh()),
            VolFunction::Custom { sigma, .. } => sigma(x),
        }
    }

    /// d sigma / dx. The Affine family uses the sign subgradient at x = 0.
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            VolFunction::Constant { .. } => 0.0,
            VolFunction::Affine { c1, .. } => c1 * x.signum() * if x == 0.0 { 0.0 } else { 1.0 },
            VolFunction::Exp { c, lambda } => c * lambda * (lambda * x).exp(),
            VolFunction::PolyPlus { c, k } => c * *k as f64 * x.powi(*k as i32 - 1),
            VolFunction::BoundedSmooth { c0, c1 } => {
                let t = x.tanh();
                c0 * c1 * (1.0 - t * t)
            }
            VolFunction::Custom { sigma, deriv, .. } => match deriv {
                Some(d) => d(x),
                None => {
                    let h = 1e-6 * (1.0 + x.abs());
                    (sigma(x + h) - sigma(x - h)) / (2.0 * h)
                }
            },
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Local Lipschitz constant L(delta) valid on [-delta, delta], i.e.
    /// |sigma(x) - sigma(y)| <= L(delta) |x - y| there.
    pub fn lipschitz(&self, delta: f64) -> f64 {
        match self {
            VolFunction::Constant { .. } => 0.0,
            VolFunction::Affine { c1, .. } => *c1,
            VolFunction::Exp { c, lambda } => (c * lambda).abs() * (lambda.abs() * delta).exp(),
            VolFunction::PolyPlus { c, k } => c * *k as f64 * delta.powi(*k as i32 - 1),
            VolFunction::BoundedSmooth { c0, c1 } => (c0 * c1).abs(),
            VolFunction::Custom { lipschitz, .. } => match lipschitz {
                Some(l) => l(delta),
                None => f64::INFINITY,
            },
        }
    }

    /// True when sigma(x)^2 stays under c1 + c2 x^2 for the family's
    /// declared constants; see the explosion module for the witnesses.
    pub fn is_linear_growth(&self) -> bool {
        matches!(
            self,
            VolFunction::Constant { .. }
                | VolFunction::Affine { .. }
                | VolFunction::BoundedSmooth { .. }
        ) || matches!(self, VolFunction::Exp { lambda, .. } if *lambda <= 0.0)
    }
}

/// Serializable mirror of the parametric families for configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VolSpec {
    Constant { sigma0: f64 },
    Affine { c0: f64, c1: f64 },
    Exp { c: f64, lambda: f64 },
    PolyPlus { c: f64, k: u32 },
    BoundedSmooth { c0: f64, c1: f64 },
}

impl VolSpec {
    pub fn build(&self) -> Result<VolFunction> {
        let v = match *self {
            VolSpec::Constant { sigma0 } => VolFunction::Constant { sigma0 },
            VolSpec::Affine { c0, c1 } => VolFunction::Affine { c0, c1 },
            VolSpec::Exp { c, lambda } => VolFunction::Exp { c, lambda },
            VolSpec::PolyPlus { c, k } => VolFunction::PolyPlus { c, k },
            VolSpec::BoundedSmooth { c0, c1 } => VolFunction::BoundedSmooth { c0, c1 },
        };
        v.validate()?;
        Ok(v)
    }
}
