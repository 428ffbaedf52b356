//! Model parameters and the lambda-domain building blocks shared by every
//! transform: the roots of `sigma^2 beta^2 / 2 + mu beta - lambda = 0`, the
//! first-drawdown coefficients `(b_lambda, c_lambda)`, the adjustment
//! coefficient `gamma = 2 mu / sigma^2` and its associated rate
//! `kappa = gamma / (e^{gamma a} - 1)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// `|gamma a|` below which `kappa`, `E[tau_a]` and related `u / (e^u - 1)`
/// quantities switch to their Taylor expansions.
pub const SERIES_SWITCH: f64 = 1e-4;

/// Most negative real exponent accepted in `e^{beta^- a}`; beyond it `c_lambda`
/// underflows and every transform degenerates to zero.
pub const STABLE_EXPONENT_BOUND: f64 = -700.0;

/// Arithmetic Brownian motion `X_t = x0 + mu t + sigma W_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    mu: f64,
    sigma: f64,
    x0: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        Self::with_x0(mu, sigma, 0.0)
    }

    pub fn with_x0(mu: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param("mu", mu, "must be finite"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", sigma, "must be finite and > 0"));
        }
        if !x0.is_finite() {
            return Err(Error::param("x0", x0, "must be finite"));
        }
        Ok(Self { mu, sigma, x0 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Adjustment coefficient `2 mu / sigma^2`.
    pub fn gamma(&self) -> f64 {
        2.0 * self.mu / self.variance()
    }
}

/// Absolute drawdown threshold `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawdownSpec {
    a: f64,
}

impl DrawdownSpec {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::param("a", a, "drawdown threshold must be finite and > 0"));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// The lambda-dependent quantities that parameterise every transform.
///
/// `E[exp(-lambda tau_a - s M_{tau_a})] = c / (b + s)`. The threshold `a` the
/// coefficients were built for is kept alongside, since the recovery
/// transforms also need `exp(-beta_plus a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCoeffs<T = f64> {
    pub lambda: T,
    pub beta_plus: T,
    pub beta_minus: T,
    pub b: T,
    pub c: T,
    pub a: f64,
}

impl<T: Scalar> LaplaceCoeffs<T> {
    /// `E[exp(-lambda tau_a)] = c / b`.
    pub fn ratio(&self) -> T {
        self.c / self.b
    }

    /// `E[exp(-lambda T_a^+)] = exp(-beta_plus a)`: discounted recovery of `a`.
    pub fn recovery_factor(&self) -> T {
        (-self.beta_plus * self.a).exp()
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !lambda.is_finite() || lambda.re() <= 0.0 {
        return Err(Error::param(
            "lambda",
            lambda.re(),
            "transform argument must be finite with positive real part",
        ));
    }
    Ok(())
}

/// Roots `(beta_plus, beta_minus)` of `sigma^2 beta^2 / 2 + mu beta - lambda`.
///
/// Each root is formed from whichever expression avoids cancellation, so
/// `beta_plus ~ lambda / mu` stays accurate as `lambda -> 0+` when `mu > 0`.
pub fn beta_roots<T: Scalar>(params: &ModelParams, lambda: T) -> Result<(T, T)> {
    check_lambda(lambda)?;
    let mu = params.mu;
    let var = params.variance();
    let disc = (lambda * (2.0 * var) + mu * mu).sqrt();
    let (plus, minus) = if mu >= 0.0 {
        let plus = lambda * 2.0 / (disc + mu);
        (plus, -(disc + mu) / var)
    } else {
        let minus = -(lambda * 2.0) / (disc - mu);
        ((disc - mu) / var, minus)
    };
    if !(plus.is_finite() && minus.is_finite()) {
        return Err(Error::NonFinite("beta roots"));
    }
    Ok((plus, minus))
}

/// First-drawdown coefficients `(b_lambda, c_lambda)`.
///
/// Numerator and denominator are multiplied through by `exp(beta^- a)` so no
/// exponential with a positive real exponent is ever formed.
pub fn laplace_coeffs<T: Scalar>(params: &ModelParams, spec: &DrawdownSpec, lambda: T) -> Result<LaplaceCoeffs<T>> {
    let (beta_plus, beta_minus) = beta_roots(params, lambda)?;
    let a = spec.a;
    let low = beta_minus * a;
    if low.re() < STABLE_EXPONENT_BOUND {
        return Err(Error::OverflowRisk {
            context: "exp(beta_minus * a)",
            exponent: low.re(),
        });
    }
    let spread = beta_plus - beta_minus;
    // 1 - exp(-(beta+ - beta-) a), cancellation-free as the spread -> 0.
    let denom = -(-spread * a).exp_m1();
    let b = (beta_plus - beta_minus * (-spread * a).exp()) / denom;
    let c = spread * low.exp() / denom;
    if !(b.is_finite() && c.is_finite()) {
        return Err(Error::NonFinite("laplace coefficients"));
    }
    Ok(LaplaceCoeffs {
        lambda,
        beta_plus,
        beta_minus,
        b,
        c,
        a,
    })
}

/// `u / (e^u - 1)`, equal to 1 at `u = 0`.
pub(crate) fn tilt_ratio(u: f64) -> f64 {
    if u.abs() < SERIES_SWITCH {
        let u2 = u * u;
        1.0 - u / 2.0 + u2 / 12.0 - u2 * u2 / 720.0
    } else {
        u / u.exp_m1()
    }
}

/// `(e^u - 1 - u) / u^2`, equal to 1/2 at `u = 0`.
fn mean_ratio(u: f64) -> f64 {
    if u.abs() < SERIES_SWITCH {
        0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u / 120.0))
    } else {
        (u.exp_m1() - u) / (u * u)
    }
}

/// The adjustment coefficient and the common `lambda -> 0+` limit of
/// `b_lambda` and `c_lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustmentRate {
    pub gamma: f64,
    pub kappa: f64,
}

impl AdjustmentRate {
    pub fn new(params: &ModelParams, spec: &DrawdownSpec) -> Self {
        let gamma = params.gamma();
        let kappa = tilt_ratio(gamma * spec.a) / spec.a;
        Self { gamma, kappa }
    }
}

/// `gamma / (e^{gamma a} - 1)`, with the `mu -> 0` limit `1 / a`.
pub fn kappa(params: &ModelParams, spec: &DrawdownSpec) -> f64 {
    AdjustmentRate::new(params, spec).kappa
}

/// `E[tau_a] = (sigma^2 e^{2 mu a / sigma^2} - sigma^2 - 2 mu a) / (2 mu^2)`,
/// with the driftless limit `a^2 / sigma^2`.
pub fn expected_tau(params: &ModelParams, spec: &DrawdownSpec) -> Result<f64> {
    let a = spec.a;
    let value = 2.0 * a * a / params.variance() * mean_ratio(params.gamma() * a);
    if !value.is_finite() {
        return Err(Error::NonFinite("E[tau_a]"));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

/// Probability that `X`, started from `x0`, ever reaches `level`.
pub fn one_sided_passage_prob(params: &ModelParams, level: f64, direction: Direction) -> Result<f64> {
    let mu = params.mu;
    let gap = params.x0 - level;
    let exponent = match direction {
        Direction::Up => {
            if !(level > params.x0) {
                return Err(Error::param("level", level, "upward passage level must exceed x0"));
            }
            (-mu + mu.abs()) * gap / params.variance()
        }
        Direction::Down => {
            if !(level < params.x0) {
                return Err(Error::param("level", level, "downward passage level must be below x0"));
            }
            (-mu - mu.abs()) * gap / params.variance()
        }
    };
    Ok(exponent.exp())
}

/// Clamp a raw probability into `[0, 1]` after checking it lies within
/// `tolerance` of that interval.
pub fn checked_probability(raw: f64, tolerance: f64) -> Result<f64> {
    if !raw.is_finite() || raw < -tolerance || raw > 1.0 + tolerance {
        return Err(Error::ProbabilityOutOfRange { value: raw, tolerance });
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Tolerance for probabilities produced by closed forms.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;
