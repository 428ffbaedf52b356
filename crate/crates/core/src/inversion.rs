//! Abate–Whitt Euler inversion of Laplace transforms.
//!
//! With `A = precision_decimals * ln 10` the trapezoidal rule on the Bromwich
//! line `Re(lambda) = A / 2t` gives the alternating series
//!
//! ```text
//! f(t) ~ e^{A/2} / t * [ Re F(A/2t) / 2 + sum_{k>=1} (-1)^k Re F((A + 2 pi i k) / 2t) ]
//! ```
//!
//! whose discretization error is about `e^{-A}` for bounded `f`. The series is
//! accelerated by binomially averaging `euler_terms + 1` consecutive partial
//! sums starting at `series_terms`.

use crate::analytics::{lt_tau_n, lt_tau_tilde_n};
use crate::error::{Error, Result};
use crate::model::{checked_probability, laplace_coeffs, DrawdownSpec, ModelParams};
use crate::DrawdownKind;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_10, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub euler_terms: usize,
    pub series_terms: usize,
    pub precision_decimals: u32,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            euler_terms: 15,
            series_terms: 15,
            precision_decimals: 8,
        }
    }
}

impl InversionConfig {
    pub fn new(euler_terms: usize, series_terms: usize, precision_decimals: u32) -> Result<Self> {
        let config = Self {
            euler_terms,
            series_terms,
            precision_decimals,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.euler_terms == 0 {
            return Err(Error::param("euler_terms", 0.0, "must be >= 1"));
        }
        if self.series_terms == 0 {
            return Err(Error::param("series_terms", 0.0, "must be >= 1"));
        }
        if !(1..=15).contains(&self.precision_decimals) {
            return Err(Error::param(
                "precision_decimals",
                self.precision_decimals as f64,
                "must lie in 1..=15",
            ));
        }
        Ok(())
    }

    /// Nominal discretization error `10^{-precision_decimals}`.
    pub fn discretization_bound(&self) -> f64 {
        10f64.powi(-(self.precision_decimals as i32))
    }

    fn contour_shift(&self) -> f64 {
        self.precision_decimals as f64 * LN_10
    }
}

/// An inverted value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inverted {
    pub value: f64,
    /// Difference of the last two Euler averages.
    pub error_estimate: f64,
    pub discretization_bound: f64,
}

impl Inverted {
    /// Combined error budget.
    pub fn error_budget(&self) -> f64 {
        self.error_estimate + self.discretization_bound
    }
}

/// Invert `transform` at `t > 0`.
pub fn invert_at<F>(transform: F, t: f64, config: &InversionConfig) -> Result<Inverted>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    config.validate()?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", t, "inversion time must be finite and > 0"));
    }
    let shift = config.contour_shift();
    let (n, m) = (config.series_terms, config.euler_terms);
    let total = n + m + 1;

    let mut partial = Vec::with_capacity(total + 1);
    let mut sum = 0.0;
    for k in 0..=total {
        let lambda = Complex64::new(shift, 2.0 * PI * k as f64) / (2.0 * t);
        let value = transform(lambda)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("transform on the Bromwich contour"));
        }
        let term = match k {
            0 => value.re / 2.0,
            k if k % 2 == 1 => -value.re,
            _ => value.re,
        };
        sum += term;
        partial.push(sum);
    }

    let scale = (shift / 2.0).exp() / t;
    let binomial = binomial_weights(m);
    let euler = |start: usize| -> f64 {
        binomial
            .iter()
            .enumerate()
            .map(|(k, w)| w * partial[start + k])
            .sum::<f64>()
            * scale
    };
    let value = euler(n);
    let error_estimate = (euler(n + 1) - value).abs();
    let target = config.discretization_bound() * value.abs().max(1.0);
    if !value.is_finite() {
        return Err(Error::NonFinite("Euler average"));
    }
    if error_estimate > target {
        return Err(Error::InversionNotConverged {
            t,
            estimate: error_estimate,
            target,
        });
    }
    Ok(Inverted {
        value,
        error_estimate,
        discretization_bound: config.discretization_bound(),
    })
}

/// `C(m, k) 2^{-m}` for `k = 0..=m`.
fn binomial_weights(m: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(m + 1);
    let mut w = 0.5f64.powi(m as i32);
    for k in 0..=m {
        weights.push(w);
        w = w * (m - k) as f64 / (k + 1) as f64;
    }
    weights
}

/// Invert `transform(lambda) / lambda` and check the result is a probability
/// up to the inversion error budget.
pub fn invert_cdf<F>(transform: F, t: f64, config: &InversionConfig) -> Result<Inverted>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut out = invert_at(|lambda| Ok(transform(lambda)? / lambda), t, config)?;
    let band = out.error_budget().max(1e-12);
    out.value = checked_probability(out.value, band)?;
    Ok(out)
}

/// `E[e^{-lambda T}]` for the n-th drawdown time `T` of the requested kind.
pub fn drawdown_time_transform(
    params: &ModelParams,
    spec: &DrawdownSpec,
    kind: DrawdownKind,
    n: u32,
    lambda: Complex64,
) -> Result<Complex64> {
    let coeffs = laplace_coeffs(params, spec, lambda)?;
    match kind {
        DrawdownKind::WithoutRecovery => lt_tau_n(&coeffs, n),
        DrawdownKind::WithRecovery => lt_tau_tilde_n(&coeffs, n),
    }
}

/// `P{T <= t}` for the n-th drawdown time of the requested kind.
pub fn cdf_drawdown_time(
    params: &ModelParams,
    spec: &DrawdownSpec,
    kind: DrawdownKind,
    n: u32,
    t: f64,
    config: &InversionConfig,
) -> Result<Inverted> {
    if n == 0 {
        return Err(Error::param("n", 0.0, "episode index starts at 1"));
    }
    invert_cdf(
        |lambda| drawdown_time_transform(params, spec, kind, n, lambda),
        t,
        config,
    )
}
