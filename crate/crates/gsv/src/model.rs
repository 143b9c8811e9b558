//! Model and scaling parameter bundles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::vol::VolFunction;

/// One Gaussian stochastic volatility model: volatility process kernel,
/// volatility function, correlation, horizon, and spot.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kernel: KernelSpec,
    pub sigma: VolFunction,
    pub rho: f64,
    pub horizon: f64,
    pub spot: f64,
}

impl ModelSpec {
    pub fn new(kernel: KernelSpec, sigma: VolFunction, rho: f64, horizon: f64) -> Result<Self> {
        let m = Self {
            kernel,
            sigma,
            rho,
            horizon,
            spot: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.sigma.validate()?;
        if !self.rho.is_finite() || self.rho.abs() > 1.0 {
            return Err(Error::InvalidInput("rho must lie in [-1, 1]".into()));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidInput("horizon must be finite and > 0".into()));
        }
        if (self.kernel.horizon - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
            return Err(Error::InvalidInput(
                "kernel horizon and model horizon must agree".into(),
            ));
        }
        if !self.spot.is_finite() || self.spot <= 0.0 {
            return Err(Error::InvalidInput("spot must be finite and > 0".into()));
        }
        Ok(())
    }

    /// rho_bar = sqrt(1 - rho^2)
    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

/// Scaling regime tag derived from (H, beta, alpha).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Ldp,
    Mdp,
    Cl,
    Exceptional,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Ldp => "LDP",
            Regime::Mdp => "MDP",
            Regime::Cl => "CL",
            Regime::Exceptional => "EXCEPTIONAL",
        };
        write!(f, "{s}")
    }
}

/// Small-noise scaling parameters (eps, H, beta, alpha) with the regime tag
/// implied by alpha + beta relative to H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub eps: f64,
    pub h: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl ScalingParams {
    pub fn new(eps: f64, h: f64, beta: f64, alpha: f64) -> Result<Self> {
        let s = Self {
            eps,
            h,
            beta,
            alpha,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps <= 0.0 || self.eps > 1.0 {
            return Err(Error::InvalidInput("eps must lie in (0, 1]".into()));
        }
        if !self.h.is_finite() || self.h <= 0.0 {
            return Err(Error::InvalidInput("scaling exponent H must be > 0".into()));
        }
        if !self.beta.is_finite() || self.beta < 0.0 || self.beta > self.h {
            return Err(Error::InvalidInput("beta must lie in [0, H]".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidInput("alpha must be >= 0".into()));
        }
        if self.alpha + self.beta > self.h + 1e-12 {
            return Err(Error::InvalidInput("alpha + beta must not exceed H".into()));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        let s = self.alpha + self.beta;
        if s == 0.0 {
            Regime::Ldp
        } else if self.beta == self.h && self.alpha == 0.0 {
            Regime::Cl
        } else if (s - self.h).abs() < 1e-14 {
            Regime::Exceptional
        } else {
            Regime::Mdp
        }
    }

    /// Exponent of the deviation speed: scaled_log multiplies log-probability
    /// by eps^{2H - 2 alpha - 2 beta}.
    pub fn speed_exponent(&self) -> f64 {
        2.0 * self.h - 2.0 * self.alpha - 2.0 * self.beta
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(eps, self.h, self.beta, self.alpha)
    }
}
