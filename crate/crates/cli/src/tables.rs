//! The published distribution and price tables, recomputed.

use drawdown_core::inversion::{cdf_drawdown_time, InversionConfig};
use drawdown_core::pricing::{price, ContractSpec, PayoffType, RiskNeutralModel};
use drawdown_core::{DrawdownKind, DrawdownSpec, ModelParams, Result};
use std::str::FromStr;

/// Absolute tolerance for a recomputed cell against its 4-decimal published value.
pub const CELL_TOLERANCE: f64 = 5e-4;

pub const DRIFTS: [f64; 3] = [0.1, 0.0, -0.1];
pub const TABLE_A: f64 = 0.1;
pub const TABLE_T: f64 = 1.0;

/// Published `F_n(1)` and `tilde F_n(1)` for `n = 1..6`, one block per drift
/// in [`DRIFTS`] order, at `sigma = 0.2`.
pub const PUBLISHED_4_1: [[[f64; 2]; 6]; 3] = [
    [
        [0.9779, 0.9779],
        [0.8759, 0.4865],
        [0.6651, 0.1024],
        [0.4060, 0.0082],
        [0.1942, 0.0002],
        [0.0721, 0.0000],
    ],
    [
        [0.9908, 0.9908],
        [0.9366, 0.4406],
        [0.7926, 0.0885],
        [0.5652, 0.0070],
        [0.3262, 0.0002],
        [0.1492, 0.0000],
    ],
    [
        [0.9967, 0.9967],
        [0.9719, 0.3636],
        [0.8874, 0.0663],
        [0.7166, 0.0050],
        [0.4871, 0.0001],
        [0.2696, 0.0000],
    ],
];

/// As [`PUBLISHED_4_1`] at `sigma = 0.12`.
pub const PUBLISHED_4_2: [[[f64; 2]; 6]; 3] = [
    [
        [0.5663, 0.5663],
        [0.1592, 0.0339],
        [0.0225, 0.0002],
        [0.0016, 0.0000],
        [0.0001, 0.0000],
        [0.0000, 0.0000],
    ],
    [
        [0.7845, 0.7845],
        [0.3755, 0.0494],
        [0.0986, 0.0002],
        [0.0137, 0.0000],
        [0.0010, 0.0000],
        [0.0000, 0.0000],
    ],
    [
        [0.9257, 0.9257],
        [0.6509, 0.0463],
        [0.2891, 0.0002],
        [0.0730, 0.0000],
        [0.0099, 0.0000],
        [0.0007, 0.0000],
    ],
];

pub const PRICE_ALPHA: f64 = 0.15;
pub const PRICE_R: f64 = 0.05;

/// Published prices by `(sigma, T)` row: `V_1, tilde V_1, V_2, tilde V_2`.
pub const PUBLISHED_5_1: [(f64, f64, [f64; 4]); 6] = [
    (0.1, 1.0, [0.1102, 0.1091, 0.1120, 0.1108]),
    (0.1, 2.0, [0.3011, 0.2769, 0.3131, 0.2885]),
    (0.1, 3.0, [0.4743, 0.4031, 0.5058, 0.4318]),
    (0.2, 1.0, [1.1777, 0.7873, 1.2043, 0.8081]),
    (0.2, 2.0, [2.3815, 1.1842, 2.4977, 1.2550]),
    (0.2, 3.0, [3.4651, 1.4519, 3.7279, 1.5890]),
];

/// Column order of [`PUBLISHED_5_1`].
pub const PRICE_COLUMNS: [(PayoffType, DrawdownKind); 4] = [
    (PayoffType::TerminalCount, DrawdownKind::WithoutRecovery),
    (PayoffType::TerminalCount, DrawdownKind::WithRecovery),
    (PayoffType::PerEvent, DrawdownKind::WithoutRecovery),
    (PayoffType::PerEvent, DrawdownKind::WithRecovery),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Distribution41,
    Distribution42,
    Prices51,
}

impl Which {
    pub const ALL: [Which; 3] = [Which::Distribution41, Which::Distribution42, Which::Prices51];

    pub fn name(self) -> &'static str {
        match self {
            Which::Distribution41 => "4.1",
            Which::Distribution42 => "4.2",
            Which::Prices51 => "5.1",
        }
    }
}

impl FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Which::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| format!("unknown table `{s}` (expected 4.1, 4.2 or 5.1)"))
    }
}

/// One recomputed distribution cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfCell {
    pub sigma: f64,
    pub mu: f64,
    pub n: u32,
    pub kind: DrawdownKind,
    pub value: f64,
    pub error_estimate: f64,
    pub published: f64,
}

/// One recomputed price cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceCell {
    pub contract: ContractSpec,
    pub sigma: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub published: f64,
}

pub trait Checked {
    fn value(&self) -> f64;
    fn published(&self) -> f64;

    fn deviation(&self) -> f64 {
        (self.value() - self.published()).abs()
    }

    fn within_tolerance(&self) -> bool {
        self.deviation() <= CELL_TOLERANCE
    }
}

impl Checked for CdfCell {
    fn value(&self) -> f64 {
        self.value
    }
    fn published(&self) -> f64 {
        self.published
    }
}

impl Checked for PriceCell {
    fn value(&self) -> f64 {
        self.value
    }
    fn published(&self) -> f64 {
        self.published
    }
}

/// A failed cell computation, naming the cell.
#[derive(Debug)]
pub struct CellError {
    pub cell: String,
    pub source: drawdown_core::Error,
}

impl std::fmt::Display for CellError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cell {}: {}", self.cell, self.source)
    }
}

impl std::error::Error for CellError {}

fn at<T>(cell: impl FnOnce() -> String, r: Result<T>) -> std::result::Result<T, CellError> {
    r.map_err(|source| CellError { cell: cell(), source })
}

/// All 36 cells of a distribution table at `sigma`, ordered by drift, `n`, kind.
pub fn distribution_table(
    sigma: f64,
    published: &[[[f64; 2]; 6]; 3],
    config: &InversionConfig,
) -> std::result::Result<Vec<CdfCell>, CellError> {
    let spec = at(|| format!("a={TABLE_A}"), DrawdownSpec::new(TABLE_A))?;
    let mut cells = Vec::with_capacity(36);
    for (block, &mu) in published.iter().zip(&DRIFTS) {
        let params = at(|| format!("mu={mu} sigma={sigma}"), ModelParams::new(mu, sigma))?;
        for (row, n) in block.iter().zip(1u32..) {
            for (&published, kind) in row.iter().zip(DrawdownKind::BOTH) {
                let name = || format!("sigma={sigma} mu={mu} n={n} kind={kind}");
                let inv = at(name, cdf_drawdown_time(&params, &spec, kind, n, TABLE_T, config))?;
                cells.push(CdfCell {
                    sigma,
                    mu,
                    n,
                    kind,
                    value: inv.value,
                    error_estimate: inv.error_estimate,
                    published,
                });
            }
        }
    }
    Ok(cells)
}

/// All 24 cells of the price table, ordered by row then column.
pub fn price_table(config: &InversionConfig) -> std::result::Result<Vec<PriceCell>, CellError> {
    let mut cells = Vec::with_capacity(24);
    for &(sigma, maturity, row) in &PUBLISHED_5_1 {
        for (&published, (payoff, recovery)) in row.iter().zip(PRICE_COLUMNS) {
            let name = || {
                format!(
                    "sigma={sigma} T={maturity} type={} recovery={recovery}",
                    payoff.number()
                )
            };
            let contract = at(
                name,
                ContractSpec::new(PRICE_ALPHA, PRICE_R, maturity, payoff, recovery),
            )?;
            let model = at(name, RiskNeutralModel::new(PRICE_R, sigma, 1.0))?;
            let inv = at(name, price(&contract, &model, config))?;
            cells.push(PriceCell {
                contract,
                sigma,
                value: inv.value,
                error_estimate: inv.error_estimate,
                published,
            });
        }
    }
    Ok(cells)
}
