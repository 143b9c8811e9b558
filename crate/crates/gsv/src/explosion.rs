//! Growth classification of the volatility function, convex minorants, and
//! constructive divergence certificates for exponential moments of the
//! integrated variance; plus the moment-reduction and Hoelder-split algebra
//! for asset-price moment explosions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::math::SQRT_2PI;
use crate::model::ModelSpec;
use crate::vol::VolFunction;

pub use crate::simulate::{exp_variance_moment_mc, truncated_moment_mc};

/// Analytic growth witness of a volatility family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GrowthWitness {
    /// sigma(x)^2 <= c1 + c2 x^2 for x >= 0
    Linear { c1: f64, c2: f64 },
    /// sigma(x) >= x g(x) for x > threshold with g increasing to infinity
    FasterThanLinear { threshold: f64, witness: Witness },
}

/// The factor g in sigma(x) >= x g(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Witness {
    /// g(x) = c x^{k-1} / 2
    PolyFactor { c: f64, k: u32 },
    /// g(x) = c e^{lambda x} / x
    ExpFactor { c: f64, lambda: f64 },
}

impl Witness {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Witness::PolyFactor { c, k } => 0.5 * c * x.powi(k as i32 - 1),
            Witness::ExpFactor { c, lambda } => c * (lambda * x).exp() / x,
        }
    }
}

/// Analytically determined growth class with explicit constants.
pub fn growth_class(sigma: &VolFunction) -> Result<GrowthWitness> {
    sigma.validate()?;
    match *sigma {
        VolFunction::Constant { sigma0 } => Ok(GrowthWitness::Linear {
            c1: sigma0 * sigma0,
            c2: 0.0,
        }),
        VolFunction::Affine { c0, c1 } => Ok(GrowthWitness::Linear {
            c1: 2.0 * c0 * c0,
            c2: 2.0 * c1 * c1,
        }),
        VolFunction::BoundedSmooth { c0, c1 } => {
            let top = c0 * (1.0 + c1.abs());
            Ok(GrowthWitness::Linear {
                c1: top * top,
                c2: 0.0,
            })
        }
        VolFunction::Exp { c, lambda } => {
            if lambda <= 0.0 {
                Ok(GrowthWitness::Linear { c1: c * c, c2: 0.0 })
            } else {
                Ok(GrowthWitness::FasterThanLinear {
                    threshold: (1.0 / lambda).max(1.0),
                    witness: Witness::ExpFactor { c, lambda },
                })
            }
        }
        VolFunction::PolyPlus { c, k } => Ok(GrowthWitness::FasterThanLinear {
            threshold: 2.0,
            witness: Witness::PolyFactor { c, k },
        }),
        VolFunction::Custom { ref label, .. } => Err(Error::Unclassified(format!(
            "custom volatility `{label}` carries no declared growth witness"
        ))),
    }
}

/// Convex lower envelope sigma_tilde with sigma(x)^2 >= sigma_tilde(x) -
/// offset for all x: equal to x^2 h(x) beyond the threshold and frozen at
/// its threshold value below.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexMinorant {
    pub threshold: f64,
    pub offset: f64,
    kind: MinorantKind,
}

#[derive(Debug, Clone, Copy, Serialize)]
enum MinorantKind {
    Constant { value: f64 },
    Quadratic { a: f64 },
    PolySquared { c: f64, k: u32 },
    ExpSquared { c: f64, lambda: f64 },
}

impl ConvexMinorant {
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            MinorantKind::Constant { value } => value,
            MinorantKind::Quadratic { a } => a * x * x,
            MinorantKind::PolySquared { c, k } => {
                if x >= self.threshold {
                    0.25 * c * c * x.powi(2 * k as i32)
                } else {
                    self.offset
                }
            }
            MinorantKind::ExpSquared { c, lambda } => {
                if x >= self.threshold {
                    c * c * (2.0 * lambda * x).exp()
                } else {
                    self.offset
                }
            }
        }
    }

    /// True when the envelope grows without bound (the divergence engine).
    pub fn is_unbounded(&self) -> bool {
        matches!(
            self.kind,
            MinorantKind::Quadratic { .. }
                | MinorantKind::PolySquared { .. }
                | MinorantKind::ExpSquared { .. }
        )
    }

    fn linear_class(&self) -> bool {
        matches!(
            self.kind,
            MinorantKind::Constant { .. } | MinorantKind::Quadratic { .. }
        )
    }

    /// Best available convex lower envelope for any family; linear-growth
    /// families get a constant or quadratic latch instead of an error.
    pub fn lower_envelope(sigma: &VolFunction) -> Result<Self> {
        match growth_class(sigma)? {
            GrowthWitness::FasterThanLinear { .. } => convex_minorant(sigma),
            GrowthWitness::Linear { .. } => match *sigma {
                VolFunction::Affine { c1, .. } if c1 > 0.0 => Ok(Self {
                    threshold: 0.0,
                    offset: 0.0,
                    kind: MinorantKind::Quadratic { a: c1 * c1 },
                }),
                VolFunction::Affine { c0, .. } => Ok(Self::constant(c0 * c0)),
                VolFunction::Constant { sigma0 } => Ok(Self::constant(sigma0 * sigma0)),
                VolFunction::BoundedSmooth { c0, c1 } => {
                    let bottom = c0 * (1.0 - c1.abs());
                    Ok(Self::constant(bottom * bottom))
                }
                VolFunction::Exp { .. } => Ok(Self::constant(0.0)),
                _ => unreachable!("faster-than-linear families classified above"),
            },
        }
    }

    fn constant(value: f64) -> Self {
        Self {
            threshold: 0.0,
            offset: 0.0,
            kind: MinorantKind::Constant { value },
        }
    }
}

/// Builds the convex minorant sigma_tilde(x) = x^2 h(x) for a
/// faster-than-linear family, verifying monotonicity and midpoint convexity
/// on samples.
pub fn convex_minorant(sigma: &VolFunction) -> Result<ConvexMinorant> {
    let witness = match growth_class(sigma)? {
        GrowthWitness::FasterThanLinear { threshold, witness } => (threshold, witness),
        GrowthWitness::Linear { .. } => {
            return Err(Error::WitnessNotSmooth(
                "volatility does not grow faster than linearly".into(),
            ))
        }
    };
    let (threshold, w) = witness;
    let kind = match w {
        Witness::PolyFactor { c, k } => MinorantKind::PolySquared { c, k },
        Witness::ExpFactor { c, lambda } => MinorantKind::ExpSquared { c, lambda },
    };
    let offset = match kind {
        MinorantKind::PolySquared { c, k } => 0.25 * c * c * threshold.powi(2 * k as i32),
        MinorantKind::ExpSquared { c, lambda } => c * c * (2.0 * lambda * threshold).exp(),
        _ => unreachable!(),
    };
    let m = ConvexMinorant {
        threshold,
        offset,
        kind,
    };

    // sampled verification: increasing and midpoint-convex beyond the
    // threshold, minorant inequality everywhere
    let span = 10.0;
    for i in 0..1000 {
        let x = threshold + span * i as f64 / 1000.0;
        let y = threshold + span * (i as f64 + 1.0) / 1000.0;
        if m.eval(y) + 1e-12 < m.eval(x) {
            return Err(Error::WitnessNotSmooth(format!(
                "envelope not increasing near {x}"
            )));
        }
        let mid = 0.5 * (x + y);
        if m.eval(mid) > 0.5 * (m.eval(x) + m.eval(y)) + 1e-9 * m.eval(y).abs() {
            return Err(Error::WitnessNotSmooth(format!(
                "midpoint convexity fails near {x}"
            )));
        }
    }
    for i in 0..10_000 {
        let x = -5.0 + (threshold + span + 5.0) * i as f64 / 10_000.0;
        let s = sigma.eval(x);
        if s * s + 1e-9 < m.eval(x) - m.offset {
            return Err(Error::WitnessNotSmooth(format!(
                "minorant inequality fails at x = {x}"
            )));
        }
    }
    Ok(m)
}

/// Variance of int_0^t B_hat ds by tensor-product midpoint quadrature of the
/// covariance over the grid cells up to the last node <= t. Returns the
/// effective horizon actually covered together with the variance.
pub fn integrated_variance_of_volatility(
    model: &ModelSpec,
    t: f64,
    grid: &PathGrid,
) -> Result<(f64, f64)> {
    let k = grid
        .last_node_at_or_before(t)
        .ok_or_else(|| Error::InvalidInput("no grid node lies in (0, t]".into()))?;
    let tau = grid.node(k);
    let dt = grid.dt();
    let mut v = 0.0;
    for i in 0..k {
        let mi = (i as f64 + 0.5) * dt;
        for j in 0..=i {
            let mj = (j as f64 + 0.5) * dt;
            let c = model.kernel.covariance(mi, mj)?;
            v += if i == j {
                c * dt * dt
            } else {
                2.0 * c * dt * dt
            };
        }
    }
    if !(v > 0.0) {
        return Err(Error::NonpositiveVariance(v));
    }
    Ok((tau, v))
}

/// Log of the Jensen/Gaussian-tail lower bound at evaluation point u:
/// gamma t sigma_tilde(u) - t^2 u^2 / (2 v)
/// + ln( sqrt(2/pi) sqrt(v) / (t u + sqrt(t^2 u^2 + 4 v)) ).
pub fn jensen_lower_bound(
    model: &ModelSpec,
    witness: &ConvexMinorant,
    gamma: f64,
    t: f64,
    u: f64,
    grid: &PathGrid,
) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidInput("gamma must be > 0".into()));
    }
    if u < witness.threshold {
        return Err(Error::InvalidInput(format!(
            "evaluation point {u} is below the witness threshold {}",
            witness.threshold
        )));
    }
    let (tau, v) = integrated_variance_of_volatility(model, t, grid)?;
    Ok(jensen_bound_formula(witness, gamma, tau, u, v))
}

/// The bound formula itself, given the variance; shared by the certificate
/// search and by independent recomputation in tests.
pub fn jensen_bound_formula(witness: &ConvexMinorant, gamma: f64, t: f64, u: f64, v: f64) -> f64 {
    let tu = t * u;
    let tail =
        (2.0f64 / std::f64::consts::PI).sqrt() * v.sqrt() / (tu + (tu * tu + 4.0 * v).sqrt());
    gamma * t * witness.eval(u) - tu * tu / (2.0 * v) + tail.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CertificateStatus {
    /// The bound exceeds the requested level at `u_star`.
    CertifiedAbove,
    /// Search ended without certifying; the witness never outgrows the
    /// Gaussian quadratic penalty (linear-growth class).
    NotFoundLinearGrowth,
    /// Search budget exhausted (60 geometric doublings).
    NotFoundBudget,
}

/// Computable divergence certificate for E[exp(gamma int_0^t sigma^2)].
#[derive(Debug, Clone, Serialize)]
pub struct ExplosionCertificate {
    pub gamma: f64,
    pub t: f64,
    pub u_star: Option<f64>,
    /// Lower bound on ln E[exp(gamma int_0^t sigma_tilde(B_hat) ds)];
    /// subtract gamma * t * offset to bound the sigma^2 moment.
    pub log_lower_bound: Option<f64>,
    pub variance_v: f64,
    pub status: CertificateStatus,
    pub level: f64,
}

const SEARCH_DOUBLINGS: usize = 60;

/// Searches u over the geometric grid u0 * 2^k until the Jensen bound
/// exceeds `level`. For faster-than-linear witnesses a certificate exists
/// for every level.
pub fn explosion_certificate(
    model: &ModelSpec,
    witness: &ConvexMinorant,
    gamma: f64,
    t: f64,
    level: f64,
    grid: &PathGrid,
) -> Result<ExplosionCertificate> {
    if gamma <= 0.0 {
        return Err(Error::InvalidInput("gamma must be > 0".into()));
    }
    let (tau, v) = integrated_variance_of_volatility(model, t, grid)?;
    let u0 = witness.threshold.max(1.0);
    let mut u = u0;
    for _ in 0..=SEARCH_DOUBLINGS {
        let bound = jensen_bound_formula(witness, gamma, tau, u, v);
        if bound > level {
            return Ok(ExplosionCertificate {
                gamma,
                t: tau,
                u_star: Some(u),
                log_lower_bound: Some(bound),
                variance_v: v,
                status: CertificateStatus::CertifiedAbove,
                level,
            });
        }
        u *= 2.0;
        if !u.is_finite() {
            break;
        }
    }
    let status = if witness.is_unbounded() && !witness.linear_class() {
        CertificateStatus::NotFoundBudget
    } else {
        CertificateStatus::NotFoundLinearGrowth
    };
    Ok(ExplosionCertificate {
        gamma,
        t: tau,
        u_star: None,
        log_lower_bound: None,
        variance_v: v,
        status,
        level,
    })
}

/// Exponent pair of the conditional moment reduction
/// E[S_t^gamma] = E[exp(c_quad int sigma^2 + c_lin int sigma dB)]:
/// c_quad = (gamma^2 (1 - rho^2) - gamma) / 2, c_lin = gamma rho.
pub fn moment_reduction(gamma: f64, rho: f64) -> Result<(f64, f64)> {
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::InvalidInput("rho must lie in [-1, 1]".into()));
    }
    let c_quad = 0.5 * (gamma * gamma * (1.0 - rho * rho) - gamma);
    Ok((c_quad, gamma * rho))
}

/// The Hoelder-split constants of the correlated moment-explosion argument.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderSplit {
    pub p: f64,
    pub eta: f64,
    /// positive quadratic coefficient l = gamma^2(1-rho^2) - gamma
    /// - gamma^2 rho^2 / (p - 1)
    pub l: f64,
}

/// Chooses the Hoelder exponent p with twice the minimal margin so that the
/// reduced quadratic coefficient stays positive. Applicable for gamma < 0 or
/// gamma > 1 / (1 - rho^2); the closed interval in between is rejected.
pub fn holder_split(gamma: f64, rho: f64) -> Result<HolderSplit> {
    if rho == 0.0 || !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::InvalidInput(
            "holder_split needs 0 < |rho| < 1".into(),
        ));
    }
    let rb2 = 1.0 - rho * rho;
    let limit = 1.0 / rb2;
    let p = if gamma > limit {
        1.0 + 2.0 * gamma * rho * rho / (gamma * rb2 - 1.0)
    } else if gamma < 0.0 {
        1.0 + 2.0 * gamma * gamma * rho * rho / (gamma * gamma * rb2 + gamma.abs())
    } else {
        return Err(Error::InapplicableGamma { gamma, limit });
    };
    let eta = -gamma * rho / (p - 1.0);
    let l = gamma * gamma * rb2 - gamma - gamma * gamma * rho * rho / (p - 1.0);
    Ok(HolderSplit { p, eta, l })
}

/// Convenience: part (i)/(ii) explosion ranges of the moment order.
pub fn moment_explodes(gamma: f64, rho: f64, faster_than_linear: bool) -> bool {
    if !faster_than_linear {
        return false;
    }
    if gamma < 0.0 {
        return true;
    }
    if rho == 0.0 {
        gamma > 1.0
    } else {
        gamma > 1.0 / (1.0 - rho * rho)
    }
}

/// sqrt(T) sigma0 / sqrt(2 pi): handy reference constant for tests of the
/// exceptional-regime coefficient.
pub fn gaussian_halfmoment(c: f64) -> f64 {
    c / SQRT_2PI
}
