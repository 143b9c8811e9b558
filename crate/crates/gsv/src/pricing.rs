//! Normalized Black-Scholes call, implied-volatility inversion, and the
//! leading-order call-price / implied-volatility asymptotics per regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{adaptive_simpson, norm_ccdf};
use crate::model::{Regime, ScalingParams};
use crate::vol::VolFunction;

/// One leading-order asymptotic term: value(eps) = coefficient *
/// eps^{eps_exponent}, divided by sqrt(log(1/eps)) when `log_correction`
/// is set. `description` records which limit produced it and what quantity
/// it approximates.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticTerm {
    pub coefficient: f64,
    pub eps_exponent: f64,
    pub log_correction: bool,
    pub regime: Regime,
    pub description: String,
}

impl AsymptoticTerm {
    /// coefficient * eps^exponent (with the log factor when present).
    pub fn evaluate(&self, eps: f64) -> f64 {
        let mut v = self.coefficient * eps.powf(self.eps_exponent);
        if self.log_correction {
            v /= (1.0 / eps).ln().sqrt();
        }
        v
    }
}

/// Dimensionless Black-Scholes call C_-(k, nu) at unit spot, log-strike
/// k >= 0 and total volatility nu: N(-k/nu + nu/2) - e^k N(-k/nu - nu/2).
pub fn bs_dimensionless_call(k: f64, nu: f64) -> Result<f64> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidInput("log-strike k must be >= 0".into()));
    }
    if !nu.is_finite() || nu < 0.0 {
        return Err(Error::InvalidInput("volatility nu must be >= 0".into()));
    }
    if nu == 0.0 {
        return Ok(0.0); // zero-volatility limit for k >= 0
    }
    // complementary form keeps both terms positive
    Ok(norm_ccdf(k / nu - 0.5 * nu) - k.exp() * norm_ccdf(k / nu + 0.5 * nu))
}

/// The integral representation int_x^infty e^y Nbar(y/nu + nu/2) dy, equal
/// to C_-(x, nu); kept as an independent quadrature route for verification.
pub fn bs_call_integral_form(x: f64, nu: f64) -> f64 {
    // integrand <= exp(y/2 - y^2/(2 nu^2) - nu^2/8): truncate where the
    // exponent is below -60 relative to the peak
    let upper = x.max(nu * nu) + 14.0 * nu + 4.0 * nu * nu + 1.0;
    adaptive_simpson(
        &|y: f64| y.exp() * norm_ccdf(y / nu + 0.5 * nu),
        x,
        upper,
        1e-12,
    )
}

/// Unique nu with C_-(k, nu) = price, by bisection on the strictly
/// increasing map; residual below 1e-12.
pub fn implied_vol(k: f64, price: f64) -> Result<f64> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidInput("log-strike k must be >= 0".into()));
    }
    if !(price > 0.0 && price < 1.0) {
        return Err(Error::PriceOutOfRange { price });
    }
    let mut lo = 1e-8;
    let mut hi = 1e3;
    if bs_dimensionless_call(k, lo)? > price {
        return Err(Error::PriceOutOfRange { price });
    }
    if bs_dimensionless_call(k, hi)? < price {
        return Err(Error::PriceOutOfRange { price });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * mid.max(1e-8) {
            break;
        }
        let v = bs_dimensionless_call(k, mid)?;
        if v < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Leading decay term of the small-noise call price in the large- and
/// moderate-deviation regimes: eps^{2H-2a-2b} log C -> -J with J the
/// supplied rate value (I_T(x) for LDP, x^2/(2T sigma0^2) for MDP).
pub fn call_asymptote(
    sigma: &VolFunction,
    rate_value: f64,
    scaling: &ScalingParams,
    x: f64,
) -> Result<AsymptoticTerm> {
    let regime = scaling.regime();
    if !matches!(regime, Regime::Ldp | Regime::Mdp) {
        return Err(Error::WrongRegime {
            expected: "LDP or MDP",
            found: regime.to_string(),
        });
    }
    if !sigma.is_linear_growth() {
        return Err(Error::GrowthViolation);
    }
    if !(rate_value.is_finite() && rate_value >= 0.0) {
        return Err(Error::InvalidInput(
            "rate value must be finite and >= 0".into(),
        ));
    }
    if x <= 0.0 {
        return Err(Error::InvalidInput("x must be > 0".into()));
    }
    Ok(AsymptoticTerm {
        coefficient: rate_value,
        eps_exponent: -scaling.speed_exponent(),
        log_correction: false,
        regime,
        description: format!("log C(eps, x eps^alpha) ~ -coefficient * eps^exponent at x = {x}"),
    })
}

/// Central-limit-regime call limit C_-(x, sqrt(T) sigma0).
pub fn call_limit_cl(sigma0: f64, horizon: f64, x: f64) -> Result<f64> {
    bs_dimensionless_call(x, horizon.sqrt() * sigma0)
}

/// Exceptional regime (alpha + beta = H, beta != H):
/// C = eps^alpha int_x^infty Nbar(y / (sqrt(T) sigma0)) dy + o(eps^alpha);
/// the coefficient is computed by quadrature.
pub fn call_exceptional(sigma0: f64, horizon: f64, x: f64, alpha: f64) -> Result<AsymptoticTerm> {
    if sigma0 <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidInput("sigma0 and horizon must be > 0".into()));
    }
    if x < 0.0 || alpha <= 0.0 {
        return Err(Error::InvalidInput("need x >= 0 and alpha > 0".into()));
    }
    let c = horizon.sqrt() * sigma0;
    let upper = x + 14.0 * c;
    let coefficient = adaptive_simpson(&|y: f64| norm_ccdf(y / c), x, upper, 1e-12);
    Ok(AsymptoticTerm {
        coefficient,
        eps_exponent: alpha,
        log_correction: false,
        regime: Regime::Exceptional,
        description: format!("C(eps, x eps^alpha) ~ coefficient * eps^alpha at x = {x}"),
    })
}

/// Leading implied-volatility term per regime. `rate_value` feeds the LDP
/// branch; `sigma0` feeds the MDP/CL branches; the exceptional branch needs
/// only (x, alpha).
pub fn iv_asymptote(
    scaling: &ScalingParams,
    x: f64,
    rate_value: Option<f64>,
    sigma0: Option<f64>,
    horizon: f64,
) -> Result<AsymptoticTerm> {
    let regime = scaling.regime();
    let term = match regime {
        Regime::Ldp => {
            let rate = rate_value.ok_or_else(|| {
                Error::InvalidInput("LDP implied-vol asymptote needs a rate value".into())
            })?;
            if rate <= 0.0 {
                return Err(Error::ZeroRate);
            }
            AsymptoticTerm {
                coefficient: x / (2.0 * rate).sqrt(),
                eps_exponent: scaling.h - scaling.beta - 0.5,
                log_correction: false,
                regime,
                description: "implied vol ~ x / sqrt(2 I_T(x)) * eps^{H - beta - 1/2}".into(),
            }
        }
        Regime::Mdp | Regime::Cl => {
            let s0 = sigma0.ok_or_else(|| {
                Error::InvalidInput("MDP/CL implied-vol asymptote needs sigma(0)".into())
            })?;
            if s0 <= 0.0 {
                return Err(Error::InvalidInput("sigma(0) must be > 0".into()));
            }
            let exponent = if regime == Regime::Cl {
                -0.5
            } else {
                scaling.h - scaling.beta - 0.5
            };
            AsymptoticTerm {
                coefficient: horizon.sqrt() * s0,
                eps_exponent: exponent,
                log_correction: false,
                regime,
                description: "implied vol ~ sqrt(T) sigma(0) * eps^exponent".into(),
            }
        }
        Regime::Exceptional => {
            if x <= 0.0 {
                return Err(Error::InvalidInput("x must be > 0".into()));
            }
            AsymptoticTerm {
                coefficient: x / (2.0 * scaling.alpha).sqrt(),
                eps_exponent: scaling.alpha - 0.5,
                log_correction: true,
                regime,
                description: "implied vol ~ x eps^{alpha - 1/2} / sqrt(2 alpha log(1/eps))".into(),
            }
        }
    };
    Ok(term)
}
