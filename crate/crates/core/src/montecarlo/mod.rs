//! Grid simulation of drifted Brownian motion and episode detection.
//!
//! Paths use exact Gaussian increments on a uniform grid and are monitored at
//! grid points only, so detected episodes are slightly late and recorded
//! maxima slightly low, by `O(sigma sqrt(dt))`. Path `i` draws from the
//! ChaCha8 stream `i` of the configured seed, and results are gathered in
//! path order, so output does not depend on the number of worker threads.
//!
//! Levels are simulated relative to `x0` and shifted only when stored.

mod detector;
mod estimate;
mod series;

pub use detector::{detect_episodes, Detection, EpisodeDetector, EpisodeRecord, PathEpisodes};
pub use estimate::{
    estimate_cdf, estimate_cdf_extrapolated, estimate_cdf_strided, estimate_constrained, estimate_rates,
    estimate_rates_extrapolated, CdfStudy, CdfTarget, Estimate, Functional, RateStudy,
};
pub use series::{
    ingest_csv_series, ingest_series, read_series_csv, write_episodes_csv, write_episodes_json, SeriesMode,
    INGEST_RELATIVE_SLACK,
};

use crate::error::{Error, Result};
use crate::model::{DrawdownSpec, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let config = Self {
            dt,
            horizon,
            n_paths,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", self.dt, "must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::param("horizon", self.horizon, "must be finite and >= dt"));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", 0.0, "must be >= 1"));
        }
        if self.steps() > u32::MAX as usize * 16 {
            return Err(Error::param("dt", self.dt, "too many grid steps for the horizon"));
        }
        Ok(())
    }

    /// Number of increments up to the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// The same paths observed up to `horizon`.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.dt, horizon, self.n_paths, self.seed)
    }
}

/// Grid time of step `i`.
pub(crate) fn grid_time(i: usize, dt: f64) -> f64 {
    i as f64 * dt
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Walk path `path` of `config`, calling `visit(step, level - x0)` at every
/// grid point from step 0; the walk stops early once `visit` returns false.
pub(crate) fn walk_path(
    params: &ModelParams,
    config: &PathConfig,
    path: usize,
    mut visit: impl FnMut(usize, f64) -> bool,
) {
    let drift = params.mu() * config.dt;
    let vol = params.sigma() * config.dt.sqrt();
    let mut rng = path_rng(config.seed, path);
    let mut x = 0.0;
    if !visit(0, x) {
        return;
    }
    for i in 1..=config.steps() {
        let z: f64 = rng.sample(StandardNormal);
        x += drift + vol * z;
        if !visit(i, x) {
            return;
        }
    }
}

/// Run `per_path` on every path in parallel, returning results in path order.
pub(crate) fn map_paths<R, F>(config: &PathConfig, per_path: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..config.n_paths).into_par_iter().map(per_path).collect()
}

/// Both episode sequences on every simulated path up to the horizon.
pub fn simulate_episodes(params: &ModelParams, spec: &DrawdownSpec, config: &PathConfig) -> Result<Vec<PathEpisodes>> {
    config.validate()?;
    Ok(map_paths(config, |path| {
        let mut det = EpisodeDetector::new(spec.a(), params.x0());
        walk_path(params, config, path, |i, x| {
            det.push(grid_time(i, config.dt), x);
            true
        });
        det.into_episodes(path)
    }))
}

/// Episodes detected on sub-grids of the same paths, monitoring every
/// `stride`-th point. Outer index follows `strides`.
pub fn simulate_episodes_strided(
    params: &ModelParams,
    spec: &DrawdownSpec,
    config: &PathConfig,
    strides: &[usize],
) -> Result<Vec<Vec<PathEpisodes>>> {
    config.validate()?;
    check_strides(strides)?;
    let per_path = map_paths(config, |path| {
        let mut dets: Vec<_> = strides
            .iter()
            .map(|_| EpisodeDetector::new(spec.a(), params.x0()))
            .collect();
        walk_path(params, config, path, |i, x| {
            for (det, &s) in dets.iter_mut().zip(strides) {
                if i % s == 0 {
                    det.push(grid_time(i, config.dt), x);
                }
            }
            true
        });
        dets.into_iter().map(|d| d.into_episodes(path)).collect::<Vec<_>>()
    });
    let mut out: Vec<Vec<PathEpisodes>> = strides.iter().map(|_| Vec::with_capacity(config.n_paths)).collect();
    for row in per_path {
        for (slot, ep) in out.iter_mut().zip(row) {
            slot.push(ep);
        }
    }
    Ok(out)
}

pub(crate) fn check_strides(strides: &[usize]) -> Result<()> {
    if strides.is_empty() || strides.contains(&0) {
        return Err(Error::InvalidArgument("strides must be nonempty and positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DrawdownKind;

    fn setup() -> (ModelParams, DrawdownSpec, PathConfig) {
        (
            ModelParams::new(0.1, 0.2).unwrap(),
            DrawdownSpec::new(0.1).unwrap(),
            PathConfig::new(1e-3, 2.0, 40, 11).unwrap(),
        )
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::new(0.0, 1.0, 1, 0).is_err());
        assert!(PathConfig::new(0.1, 0.05, 1, 0).is_err());
        assert!(PathConfig::new(0.1, 1.0, 0, 0).is_err());
        assert_eq!(PathConfig::new(1e-4, 1.0, 1, 0).unwrap().steps(), 10_000);
    }

    #[test]
    fn deterministic_and_order_independent() {
        let (p, s, c) = setup();
        let a = simulate_episodes(&p, &s, &c).unwrap();
        let b = simulate_episodes(&p, &s, &c).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c3 = pool.install(|| simulate_episodes(&p, &s, &c).unwrap());
        assert_eq!(a, c3);
        // A path does not depend on how many paths are requested.
        let fewer = PathConfig { n_paths: 5, ..c };
        assert_eq!(&a[..5], &simulate_episodes(&p, &s, &fewer).unwrap()[..]);
    }

    #[test]
    fn first_episodes_coincide_and_recovery_is_subset() {
        let (p, s, c) = setup();
        for ep in simulate_episodes(&p, &s, &c).unwrap() {
            if let (Some(w), Some(r)) = (ep.without_recovery.first(), ep.with_recovery.first()) {
                assert_eq!(
                    w,
                    &EpisodeRecord {
                        kind: DrawdownKind::WithoutRecovery,
                        ..*r
                    }
                );
            }
            for r in &ep.with_recovery {
                assert!(ep.without_recovery.iter().any(|w| w.time == r.time));
            }
        }
    }

    #[test]
    fn stride_one_matches_plain_run() {
        let (p, s, c) = setup();
        let plain = simulate_episodes(&p, &s, &c).unwrap();
        let strided = simulate_episodes_strided(&p, &s, &c, &[1, 2]).unwrap();
        assert_eq!(plain, strided[0]);
        assert!(simulate_episodes_strided(&p, &s, &c, &[0]).is_err());
    }
}
