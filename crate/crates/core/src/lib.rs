//! Exact distributional quantities for the two sequences of drawdown times
//! (with and without recovery of the running maximum) of a drifted Brownian
//! motion `X_t = x0 + mu t + sigma W_t`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: parameters, the lambda-domain root/coefficient quartet and
//!   the one-sided passage formulas everything else is built from.
//! * [`analytics`]: closed-form transforms and distributions of the n-th
//!   drawdown time, the running maximum and the value process.
//! * [`inversion`]: Abate–Whitt Euler inversion of those transforms.
//! * [`montecarlo`]: path simulation and episode detection, used as an
//!   independent oracle and for ingesting observed price series.
//! * [`pricing`]: insurance contracts paying on frequent relative drawdowns.
//!
//! All drawdown-time laws are independent of `x0`; the analytic formulas are
//! stated for levels measured relative to the starting point.

pub mod analytics;
pub mod error;
pub mod inversion;
pub mod model;
pub mod montecarlo;
pub mod pricing;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{DrawdownSpec, LaplaceCoeffs, ModelParams};
pub use scalar::Scalar;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which of the two drawdown-time sequences a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawdownKind {
    /// The running maximum must be strictly exceeded before the next episode.
    WithRecovery,
    /// The reference maximum restarts at the value observed at each episode.
    WithoutRecovery,
}

impl DrawdownKind {
    pub const BOTH: [DrawdownKind; 2] = [DrawdownKind::WithoutRecovery, DrawdownKind::WithRecovery];

    pub fn as_str(self) -> &'static str {
        match self {
            DrawdownKind::WithRecovery => "with_recovery",
            DrawdownKind::WithoutRecovery => "without_recovery",
        }
    }
}

impl std::fmt::Display for DrawdownKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DrawdownKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with_recovery" | "with-recovery" | "recovery" | "true" => Ok(DrawdownKind::WithRecovery),
            "without_recovery" | "without-recovery" | "no-recovery" | "false" => Ok(DrawdownKind::WithoutRecovery),
            other => Err(Error::InvalidArgument(format!("unknown drawdown kind `{other}`"))),
        }
    }
}
