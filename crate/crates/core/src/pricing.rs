//! Insurance against frequent relative drawdowns of `S_t = s0 e^{X_t}`.
//!
//! Under the risk-neutral measure `X` has drift `r - sigma^2 / 2`, and a
//! relative drop of `alpha` from the running maximum of `S` is an absolute
//! drawdown of `alpha_bar = -ln(1 - alpha)` of `X`. Two contracts pay one unit
//! per drawdown episode before maturity `T`:
//!
//! * type 1 (`terminal_count`) pays everything at `T`:
//!   `V_1(T) = sum_k e^{-rT} Q{tau^k <= T}`;
//! * type 2 (`per_event`) pays at each episode:
//!   `V_2(T) = sum_k E[e^{-r tau^k}; tau^k <= T]`.
//!
//! Their Laplace transforms in `T` are geometric series in `c/b` evaluated at
//! `lambda + r`, which [`price`] inverts numerically.

use crate::analytics::{lt_tau_n, lt_tau_tilde_n};
use crate::error::{Error, Result};
use crate::inversion::{invert_at, InversionConfig, Inverted};
use crate::model::{laplace_coeffs, DrawdownSpec, ModelParams};
use crate::scalar::Scalar;
use crate::DrawdownKind;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

/// Relative threshold `alpha` mapped to the log-price drawdown `-ln(1 - alpha)`.
pub fn alpha_bar(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "must lie in (0, 1)"));
    }
    Ok(-(-alpha).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffType {
    /// Type 1: the episode count is paid at maturity.
    TerminalCount,
    /// Type 2: one unit is paid at each episode.
    PerEvent,
}

impl PayoffType {
    pub const BOTH: [PayoffType; 2] = [PayoffType::TerminalCount, PayoffType::PerEvent];

    pub fn number(self) -> u8 {
        match self {
            PayoffType::TerminalCount => 1,
            PayoffType::PerEvent => 2,
        }
    }
}

impl FromStr for PayoffType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "terminal_count" | "terminal-count" => Ok(PayoffType::TerminalCount),
            "2" | "per_event" | "per-event" => Ok(PayoffType::PerEvent),
            other => Err(Error::InvalidArgument(format!("unknown payoff type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub alpha: f64,
    pub r: f64,
    pub maturity: f64,
    pub payoff_type: PayoffType,
    pub recovery: DrawdownKind,
}

impl ContractSpec {
    pub fn new(alpha: f64, r: f64, maturity: f64, payoff_type: PayoffType, recovery: DrawdownKind) -> Result<Self> {
        let spec = Self {
            alpha,
            r,
            maturity,
            payoff_type,
            recovery,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        alpha_bar(self.alpha)?;
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::param("r", self.r, "must be finite and > 0"));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(Error::param("maturity", self.maturity, "must be finite and > 0"));
        }
        Ok(())
    }

    /// The drawdown threshold of the log-price.
    pub fn threshold(&self) -> Result<DrawdownSpec> {
        DrawdownSpec::new(alpha_bar(self.alpha)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskNeutralModel {
    pub r: f64,
    pub sigma: f64,
    pub s0: f64,
}

impl RiskNeutralModel {
    pub fn new(r: f64, sigma: f64, s0: f64) -> Result<Self> {
        let model = Self { r, sigma, s0 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::param("s0", self.s0, "must be finite and > 0"));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::param("r", self.r, "must be finite and > 0"));
        }
        self.params().map(|_| ())
    }

    pub fn mu(&self) -> f64 {
        self.r - self.sigma * self.sigma / 2.0
    }

    /// Log-price dynamics, started at `ln s0`.
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::with_x0(self.mu(), self.sigma, self.s0.ln())
    }
}

fn check_pair(contract: &ContractSpec, model: &RiskNeutralModel) -> Result<()> {
    contract.validate()?;
    model.validate()?;
    if contract.r != model.r {
        return Err(Error::InvalidArgument(format!(
            "contract rate {} differs from model rate {}",
            contract.r, model.r
        )));
    }
    Ok(())
}

/// `int_0^inf e^{-lambda T} V(T) dT` at any `lambda` with `Re(lambda) > 0`.
pub fn price_transform_at<T: Scalar>(contract: &ContractSpec, model: &RiskNeutralModel, lambda: T) -> Result<T> {
    check_pair(contract, model)?;
    let params = model.params()?;
    let spec = contract.threshold()?;
    let shifted = lambda + contract.r;
    let coeffs = laplace_coeffs(&params, &spec, shifted)?;
    let q = coeffs.ratio();
    let denom = match contract.recovery {
        DrawdownKind::WithoutRecovery => T::one() - q,
        DrawdownKind::WithRecovery => T::one() - coeffs.recovery_factor() * q,
    };
    if denom.norm() == 0.0 || !denom.is_finite() {
        return Err(Error::DivergentSeries(denom.re()));
    }
    let series = q / denom;
    Ok(match contract.payoff_type {
        PayoffType::TerminalCount => series / shifted,
        PayoffType::PerEvent => series / lambda,
    })
}

/// Randomized-maturity price at real `lambda > 0`.
pub fn price_transform(contract: &ContractSpec, model: &RiskNeutralModel, lambda: f64) -> Result<f64> {
    check_pair(contract, model)?;
    let params = model.params()?;
    let spec = contract.threshold()?;
    let coeffs = laplace_coeffs(&params, &spec, lambda + contract.r)?;
    let q = coeffs.ratio();
    let denom = match contract.recovery {
        DrawdownKind::WithoutRecovery => 1.0 - q,
        DrawdownKind::WithRecovery => 1.0 - coeffs.recovery_factor() * q,
    };
    if !(denom > 0.0) {
        return Err(Error::DivergentSeries(denom));
    }
    price_transform_at(contract, model, lambda)
}

/// Fixed-maturity price by inverting [`price_transform_at`] at `T`.
pub fn price(contract: &ContractSpec, model: &RiskNeutralModel, config: &InversionConfig) -> Result<Inverted> {
    check_pair(contract, model)?;
    let mut out = invert_at(
        |lambda: Complex64| price_transform_at(contract, model, lambda),
        contract.maturity,
        config,
    )?;
    out.value = nonnegative(out.value, out.error_budget())?;
    Ok(out)
}

fn nonnegative(value: f64, budget: f64) -> Result<f64> {
    if value < -budget.max(1e-12) {
        return Err(Error::ProbabilityOutOfRange {
            value,
            tolerance: budget,
        });
    }
    Ok(value.max(0.0))
}

/// Price accumulated term by term over the episode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPrice {
    pub price: f64,
    pub terms: u32,
    /// Sum of the per-term inversion error budgets.
    pub error_estimate: f64,
}

/// Hard cap on the number of episode terms in [`price_series_sum`].
pub const MAX_SERIES_TERMS: u32 = 10_000;

/// `sum_k` of the per-episode payments, each inverted separately, stopping at
/// the first term below `tolerance`.
pub fn price_series_sum(
    contract: &ContractSpec,
    model: &RiskNeutralModel,
    config: &InversionConfig,
    tolerance: f64,
) -> Result<SeriesPrice> {
    check_pair(contract, model)?;
    if !(tolerance > 0.0) {
        return Err(Error::param("tolerance", tolerance, "must be > 0"));
    }
    let params = model.params()?;
    let spec = contract.threshold()?;
    let mut total = SeriesPrice {
        price: 0.0,
        terms: 0,
        error_estimate: 0.0,
    };
    for k in 1..=MAX_SERIES_TERMS {
        let term = invert_at(
            |lambda: Complex64| {
                let shifted = lambda + contract.r;
                let coeffs = laplace_coeffs(&params, &spec, shifted)?;
                let lt = match contract.recovery {
                    DrawdownKind::WithoutRecovery => lt_tau_n(&coeffs, k)?,
                    DrawdownKind::WithRecovery => lt_tau_tilde_n(&coeffs, k)?,
                };
                Ok(match contract.payoff_type {
                    PayoffType::TerminalCount => lt / shifted,
                    PayoffType::PerEvent => lt / lambda,
                })
            },
            contract.maturity,
            config,
        )?;
        let value = nonnegative(term.value, term.error_budget())?;
        total.price += value;
        total.terms = k;
        total.error_estimate += term.error_budget();
        if value < tolerance {
            return Ok(total);
        }
    }
    Err(Error::SeriesNotConverged(MAX_SERIES_TERMS as usize))
}

/// One row of a price report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    #[serde(rename = "type")]
    pub payoff: u8,
    pub recovery: bool,
    pub alpha: f64,
    pub r: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub price: f64,
    pub err_estimate: f64,
}

impl PriceRow {
    pub fn new(contract: &ContractSpec, model: &RiskNeutralModel, result: &Inverted) -> Self {
        Self {
            payoff: contract.payoff_type.number(),
            recovery: contract.recovery == DrawdownKind::WithRecovery,
            alpha: contract.alpha,
            r: contract.r,
            sigma: model.sigma,
            maturity: contract.maturity,
            price: result.value,
            err_estimate: result.error_estimate,
        }
    }
}

/// CSV with header `type,recovery,alpha,r,sigma,T,price,err_estimate`.
pub fn write_price_report<W: Write>(writer: W, rows: &[PriceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn contract(payoff: PayoffType, recovery: DrawdownKind, maturity: f64) -> ContractSpec {
        ContractSpec::new(0.15, 0.05, maturity, payoff, recovery).unwrap()
    }

    fn model(sigma: f64) -> RiskNeutralModel {
        RiskNeutralModel::new(0.05, sigma, 1.0).unwrap()
    }

    #[test]
    fn alpha_bar_values() {
        assert_relative_eq!(alpha_bar(0.15).unwrap(), 0.162_518_929_497_774_9, max_relative = 1e-15);
        assert_relative_eq!(alpha_bar(1.0 - (-1.0f64).exp()).unwrap(), 1.0, max_relative = 1e-15);
        assert!(alpha_bar(1e-300).unwrap() > 0.0);
        assert!(alpha_bar(0.0).is_err() && alpha_bar(1.0).is_err());
        let mut prev = 0.0;
        for i in 1..100 {
            let v = alpha_bar(i as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn validation() {
        assert!(ContractSpec::new(0.15, 0.0, 1.0, PayoffType::PerEvent, DrawdownKind::WithRecovery).is_err());
        assert!(ContractSpec::new(0.15, 0.05, 0.0, PayoffType::PerEvent, DrawdownKind::WithRecovery).is_err());
        assert!(RiskNeutralModel::new(0.05, 0.1, 0.0).is_err());
        let m = model(0.2);
        assert_relative_eq!(m.params().unwrap().mu(), 0.05 - 0.02, max_relative = 1e-15);
        let other = RiskNeutralModel::new(0.04, 0.1, 1.0).unwrap();
        let c = contract(PayoffType::PerEvent, DrawdownKind::WithRecovery, 1.0);
        assert!(price_transform(&c, &other, 1.0).is_err());
        assert_eq!("2".parse::<PayoffType>().unwrap(), PayoffType::PerEvent);
        assert!("3".parse::<PayoffType>().is_err());
    }

    #[test]
    fn transform_values() {
        let m = model(0.1);
        let v1 = price_transform(
            &contract(PayoffType::TerminalCount, DrawdownKind::WithoutRecovery, 1.0),
            &m,
            1.0,
        );
        assert_relative_eq!(v1.unwrap(), 0.123_356_963_223_422_8, max_relative = 1e-12);
        let w1 = price_transform(
            &contract(PayoffType::TerminalCount, DrawdownKind::WithRecovery, 1.0),
            &m,
            1.0,
        );
        assert_relative_eq!(w1.unwrap(), 0.111_466_765_680_829_2, max_relative = 1e-12);
    }

    #[test]
    fn payoff_types_differ_by_factor() {
        let m = model(0.2);
        for kind in DrawdownKind::BOTH {
            for lambda in [0.1, 1.0, 7.0] {
                let t1 = price_transform(&contract(PayoffType::TerminalCount, kind, 1.0), &m, lambda).unwrap();
                let t2 = price_transform(&contract(PayoffType::PerEvent, kind, 1.0), &m, lambda).unwrap();
                assert_relative_eq!(t2, t1 * (lambda + 0.05) / lambda, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn recovery_gap_closes_as_threshold_vanishes() {
        // Both transforms blow up as alpha -> 0, but their series denominators
        // 1 - q and 1 - e^{-beta+ alpha_bar} q approach each other.
        let m = model(0.2);
        let mut prev = f64::INFINITY;
        for alpha in [1e-2, 1e-3, 1e-4, 1e-5] {
            let spec = DrawdownSpec::new(alpha_bar(alpha).unwrap()).unwrap();
            let k = laplace_coeffs(&m.params().unwrap(), &spec, 1.05).unwrap();
            let q = k.ratio();
            let gap = ((1.0 - q) - (1.0 - k.recovery_factor() * q)).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn table_examples() {
        let cfg = InversionConfig::default();
        let v = price(
            &contract(PayoffType::TerminalCount, DrawdownKind::WithoutRecovery, 1.0),
            &model(0.1),
            &cfg,
        );
        assert!((v.unwrap().value - 0.1102).abs() < 5e-5);
        let v = price(
            &contract(PayoffType::PerEvent, DrawdownKind::WithRecovery, 3.0),
            &model(0.2),
            &cfg,
        );
        assert!((v.unwrap().value - 1.5890).abs() < 5e-5);
        let v = price(
            &contract(PayoffType::PerEvent, DrawdownKind::WithoutRecovery, 2.0),
            &model(0.2),
            &cfg,
        );
        assert!((v.unwrap().value - 2.4977).abs() < 5e-5);
    }

    #[test]
    fn series_route() {
        let cfg = InversionConfig::default();
        let m = model(0.1);
        for payoff in PayoffType::BOTH {
            for kind in DrawdownKind::BOTH {
                let c = contract(payoff, kind, 2.0);
                let closed = price(&c, &m, &cfg).unwrap().value;
                let series = price_series_sum(&c, &m, &cfg, 1e-6).unwrap();
                assert!((closed - series.price).abs() < 1e-4, "{payoff:?} {kind:?}");
                let first = price_series_sum(&c, &m, &cfg, f64::INFINITY).unwrap();
                assert_eq!(first.terms, 1);
                assert!(first.price <= closed);
            }
        }
        let short = contract(PayoffType::TerminalCount, DrawdownKind::WithoutRecovery, 1e-3);
        assert!(price(&short, &m, &cfg).unwrap().value < 1e-6);
    }

    #[test]
    fn report_csv() {
        let c = contract(PayoffType::TerminalCount, DrawdownKind::WithRecovery, 1.0);
        let m = model(0.1);
        let r = Inverted {
            value: 0.25,
            error_estimate: 1e-10,
            discretization_bound: 1e-8,
        };
        let mut out = Vec::new();
        write_price_report(&mut out, &[PriceRow::new(&c, &m, &r)]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "type,recovery,alpha,r,sigma,T,price,err_estimate\n1,true,0.15,0.05,0.1,1.0,0.25,1e-10\n"
        );
    }
}
