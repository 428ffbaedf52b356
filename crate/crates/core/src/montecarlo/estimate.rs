use super::{check_strides, grid_time, map_paths, walk_path, EpisodeDetector, PathConfig};
use crate::error::{Error, Result};
use crate::model::{DrawdownSpec, ModelParams};
use crate::DrawdownKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::NAN
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Sample fraction `hits / n` with binomial standard error.
    pub fn binomial(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }
}

/// `P{at least n episodes of kind by t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdfTarget {
    pub kind: DrawdownKind,
    pub n: u32,
}

/// Fraction of paths with at least `n` episodes of `kind` by time `t`.
pub fn estimate_cdf(
    params: &ModelParams,
    spec: &DrawdownSpec,
    kind: DrawdownKind,
    n: u32,
    t: f64,
    config: &PathConfig,
) -> Result<Estimate> {
    let grid = estimate_cdf_strided(params, spec, &[CdfTarget { kind, n }], t, config, &[1])?;
    Ok(grid[0][0])
}

/// CDF estimates for several targets on sub-grids of the same paths.
/// Result is indexed `[stride][target]`.
pub fn estimate_cdf_strided(
    params: &ModelParams,
    spec: &DrawdownSpec,
    targets: &[CdfTarget],
    t: f64,
    config: &PathConfig,
    strides: &[usize],
) -> Result<Vec<Vec<Estimate>>> {
    let hits = cdf_hits(params, spec, targets, t, config, strides)?;
    Ok(strided_estimates(&hits, strides.len(), targets.len()))
}

/// CDF estimates per stride plus a `sqrt(dt)` extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfStudy {
    pub strides: Vec<usize>,
    /// Indexed `[stride][target]`.
    pub raw: Vec<Vec<Estimate>>,
    /// `(sqrt(s) F_first - F_last) / (sqrt(s) - 1)` with `s` the ratio of the
    /// last stride to the first, per target. Standard errors come from the
    /// combined per-path indicators.
    pub extrapolated: Vec<Estimate>,
}

pub fn estimate_cdf_extrapolated(
    params: &ModelParams,
    spec: &DrawdownSpec,
    targets: &[CdfTarget],
    t: f64,
    config: &PathConfig,
    strides: &[usize],
) -> Result<CdfStudy> {
    let (first, last) = match strides {
        [first, .., last] if last > first => (*first, *last),
        _ => {
            return Err(Error::param(
                "strides",
                strides.len() as f64,
                "need at least two strides, the last larger than the first",
            ))
        }
    };
    let hits = cdf_hits(params, spec, targets, t, config, strides)?;
    let root = (last as f64 / first as f64).sqrt();
    let extrapolated = (0..targets.len())
        .map(|g| {
            let samples: Vec<f64> = hits
                .iter()
                .map(|h| {
                    let (f, c) = (h[0][g] as u8 as f64, h[strides.len() - 1][g] as u8 as f64);
                    (root * f - c) / (root - 1.0)
                })
                .collect();
            Estimate::from_samples(&samples)
        })
        .collect();
    Ok(CdfStudy {
        strides: strides.to_vec(),
        raw: strided_estimates(&hits, strides.len(), targets.len()),
        extrapolated,
    })
}

fn strided_estimates(hits: &[Vec<Vec<bool>>], strides: usize, targets: usize) -> Vec<Vec<Estimate>> {
    (0..strides)
        .map(|s| {
            (0..targets)
                .map(|g| Estimate::binomial(hits.iter().filter(|h| h[s][g]).count(), hits.len()))
                .collect()
        })
        .collect()
}

/// Per-path indicators, indexed `[path][stride][target]`.
fn cdf_hits(
    params: &ModelParams,
    spec: &DrawdownSpec,
    targets: &[CdfTarget],
    t: f64,
    config: &PathConfig,
    strides: &[usize],
) -> Result<Vec<Vec<Vec<bool>>>> {
    config.validate()?;
    check_strides(strides)?;
    if !(t <= config.horizon) {
        return Err(Error::param("t", t, "must not exceed the simulation horizon"));
    }
    if targets.iter().any(|g| g.n == 0) {
        return Err(Error::param("n", 0.0, "episode index starts at 1"));
    }
    let window = config.with_horizon(t)?;
    let need = |kind| {
        targets
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.n)
            .max()
            .unwrap_or(0)
    };
    let need = [need(DrawdownKind::WithoutRecovery), need(DrawdownKind::WithRecovery)];
    let done = |d: &EpisodeDetector| {
        d.count(DrawdownKind::WithoutRecovery) >= need[0] && d.count(DrawdownKind::WithRecovery) >= need[1]
    };

    Ok(map_paths(&window, |path| {
        let mut dets: Vec<_> = strides
            .iter()
            .map(|_| EpisodeDetector::new(spec.a(), 0.0).counting_only())
            .collect();
        walk_path(params, &window, path, |i, x| {
            for (det, &s) in dets.iter_mut().zip(strides) {
                if i % s == 0 {
                    det.push(grid_time(i, window.dt), x);
                }
            }
            !dets.iter().all(done)
        });
        dets.iter()
            .map(|d| targets.iter().map(|g| d.count(g.kind) >= g.n).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    }))
}

/// Path functionals with a closed-form counterpart. Levels are relative to `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "kebab-case")]
pub enum Functional {
    /// `E[e^{-lambda tau^n}; M_{tau^n} > x]`.
    MaxTail { lambda: f64, n: u32, x: f64 },
    /// `E[e^{-lambda T_x^+}; T_x^+ < tau^n]`.
    ConstrainedPassage { lambda: f64, n: u32, x: f64 },
    /// `E[e^{-lambda tau^n}; M_{tau^n} - X_{tau^n} <= x]`.
    MagnitudeCdf { lambda: f64, n: u32, x: f64 },
    /// `P{tilde-tau^k = tau^{k+m}}`.
    RecoveryLink { k: u32, m: u32 },
    /// Episodes per unit time.
    EpisodeRate { kind: DrawdownKind },
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::MaxTail { lambda, n, x } => write!(f, "max-tail:lambda={lambda},n={n},x={x}"),
            Functional::ConstrainedPassage { lambda, n, x } => {
                write!(f, "constrained-passage:lambda={lambda},n={n},x={x}")
            }
            Functional::MagnitudeCdf { lambda, n, x } => write!(f, "magnitude-cdf:lambda={lambda},n={n},x={x}"),
            Functional::RecoveryLink { k, m } => write!(f, "recovery-link:k={k},m={m}"),
            Functional::EpisodeRate { kind } => write!(f, "episode-rate:kind={kind}"),
        }
    }
}

impl FromStr for Functional {
    type Err = Error;

    /// Parses `name:key=value,...`, e.g. `max-tail:lambda=1,n=2,x=0.15`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = std::collections::HashMap::new();
        for pair in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("malformed field `{pair}` in `{s}`")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |key: &str| -> Result<&str> {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("functional `{name}` needs `{key}=`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{key}` must be a number")))
        };
        let int = |key: &str| -> Result<u32> {
            get(key)?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{key}` must be a nonnegative integer")))
        };
        match name {
            "max-tail" => Ok(Functional::MaxTail {
                lambda: num("lambda")?,
                n: int("n")?,
                x: num("x")?,
            }),
            "constrained-passage" => Ok(Functional::ConstrainedPassage {
                lambda: num("lambda")?,
                n: int("n")?,
                x: num("x")?,
            }),
            "magnitude-cdf" => Ok(Functional::MagnitudeCdf {
                lambda: num("lambda")?,
                n: int("n")?,
                x: num("x")?,
            }),
            "recovery-link" => Ok(Functional::RecoveryLink {
                k: int("k")?,
                m: int("m")?,
            }),
            "episode-rate" => Ok(Functional::EpisodeRate {
                kind: get("kind")?.parse()?,
            }),
            other => Err(Error::InvalidArgument(format!("unknown functional `{other}`"))),
        }
    }
}

impl Functional {
    fn validate(&self) -> Result<()> {
        let index = |n: u32| {
            if n == 0 {
                Err(Error::param("n", 0.0, "episode index starts at 1"))
            } else {
                Ok(())
            }
        };
        let rate = |l: f64| {
            if l.is_finite() && l >= 0.0 {
                Ok(())
            } else {
                Err(Error::param("lambda", l, "discount rate must be finite and >= 0"))
            }
        };
        match *self {
            Functional::MaxTail { lambda, n, .. }
            | Functional::ConstrainedPassage { lambda, n, .. }
            | Functional::MagnitudeCdf { lambda, n, .. } => {
                rate(lambda)?;
                index(n)
            }
            Functional::RecoveryLink { k, .. } => index(k),
            Functional::EpisodeRate { .. } => Ok(()),
        }
    }
}

/// Batches per path used for the standard error of rate estimates.
const RATE_BATCHES: usize = 20;

/// Monte Carlo estimate of `functional`. Paths on which the defining event
/// has not happened by the horizon contribute zero.
pub fn estimate_constrained(
    params: &ModelParams,
    spec: &DrawdownSpec,
    functional: &Functional,
    config: &PathConfig,
) -> Result<Estimate> {
    config.validate()?;
    functional.validate()?;
    let a = spec.a();
    let dt = config.dt;
    if let Functional::EpisodeRate { kind } = *functional {
        return episode_rate(params, spec, kind, config);
    }

    let samples = map_paths(config, |path| {
        let mut det = EpisodeDetector::new(a, 0.0).counting_only();
        let mut sample = 0.0;
        walk_path(params, config, path, |i, x| {
            let t = grid_time(i, dt);
            let hit = det.push(t, x);
            match *functional {
                Functional::MaxTail { lambda, n, x: level } => {
                    if hit.without_recovery && det.count(DrawdownKind::WithoutRecovery) == n {
                        if det.running_max() > level {
                            sample = (-lambda * t).exp();
                        }
                        return false;
                    }
                    true
                }
                Functional::ConstrainedPassage { lambda, n, x: level } => {
                    if x > level {
                        sample = (-lambda * t).exp();
                        return false;
                    }
                    !(hit.without_recovery && det.count(DrawdownKind::WithoutRecovery) == n)
                }
                Functional::MagnitudeCdf { lambda, n, x: level } => {
                    if hit.without_recovery && det.count(DrawdownKind::WithoutRecovery) == n {
                        if det.running_max() - x <= level {
                            sample = (-lambda * t).exp();
                        }
                        return false;
                    }
                    true
                }
                Functional::RecoveryLink { k, m } => {
                    if hit.without_recovery && det.count(DrawdownKind::WithoutRecovery) == k + m {
                        if hit.with_recovery && det.count(DrawdownKind::WithRecovery) == k {
                            sample = 1.0;
                        }
                        return false;
                    }
                    true
                }
                Functional::EpisodeRate { .. } => unreachable!(),
            }
        });
        sample
    });
    Ok(Estimate::from_samples(&samples))
}

/// Long-run episode rates of both kinds from one pass over the paths, indexed
/// like [`DrawdownKind::BOTH`]. Each rate is total episodes over total
/// simulated time; its standard error comes from per-batch rates, treating
/// batches as independent.
pub fn estimate_rates(params: &ModelParams, spec: &DrawdownSpec, config: &PathConfig) -> Result<[Estimate; 2]> {
    let batches = rate_batches(params, spec, config, None)?;
    Ok([0, 1].map(|kind| batch_estimate(&batches[0][kind], config.n_paths)))
}

/// Rates on the native grid and on the sub-grid of every `coarse_stride`-th
/// point of the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStudy {
    pub fine: [Estimate; 2],
    pub coarse: [Estimate; 2],
    /// `(sqrt(s) r_fine - r_coarse) / (sqrt(s) - 1)` for stride `s`, which
    /// removes the leading `sqrt(dt)` monitoring bias; standard errors are
    /// computed batch by batch on the combined rates.
    pub extrapolated: [Estimate; 2],
}

pub fn estimate_rates_extrapolated(
    params: &ModelParams,
    spec: &DrawdownSpec,
    config: &PathConfig,
    coarse_stride: usize,
) -> Result<RateStudy> {
    if coarse_stride < 2 {
        return Err(Error::param("coarse_stride", coarse_stride as f64, "must be >= 2"));
    }
    let batches = rate_batches(params, spec, config, Some(coarse_stride))?;
    let root = (coarse_stride as f64).sqrt();
    let n = config.n_paths;
    let combined = |kind: usize| -> Vec<f64> {
        batches[0][kind]
            .iter()
            .zip(&batches[1][kind])
            .map(|(f, c)| (root * f - c) / (root - 1.0))
            .collect()
    };
    Ok(RateStudy {
        fine: [0, 1].map(|k| batch_estimate(&batches[0][k], n)),
        coarse: [0, 1].map(|k| batch_estimate(&batches[1][k], n)),
        extrapolated: [0, 1].map(|k| batch_estimate(&combined(k), n)),
    })
}

fn batch_estimate(rates: &[f64], n_paths: usize) -> Estimate {
    // Batches have equal length, so the mean of batch rates is the overall rate.
    Estimate {
        samples: n_paths,
        ..Estimate::from_samples(rates)
    }
}

/// Per-batch episode rates on the native grid and, if `coarse` is given, on
/// the sub-grid of every `coarse`-th point. Indexed `[grid][kind][path * RATE_BATCHES + batch]`.
fn rate_batches(
    params: &ModelParams,
    spec: &DrawdownSpec,
    config: &PathConfig,
    coarse: Option<usize>,
) -> Result<Vec<[Vec<f64>; 2]>> {
    config.validate()?;
    let stride = coarse.unwrap_or(1);
    let steps = config.steps();
    if steps < RATE_BATCHES * stride {
        return Err(Error::param(
            "horizon",
            config.horizon,
            "too short for batched rate estimation",
        ));
    }
    // Equal batches on both grids; a remainder of fewer than
    // RATE_BATCHES * stride steps at the end is not used.
    let per_batch = steps / (RATE_BATCHES * stride) * stride;
    let window = PathConfig {
        horizon: (per_batch * RATE_BATCHES) as f64 * config.dt,
        ..*config
    };
    let grids = if coarse.is_some() { 2 } else { 1 };
    let counts = map_paths(&window, |path| {
        let mut fine = EpisodeDetector::new(spec.a(), 0.0).counting_only();
        let mut sub = EpisodeDetector::new(spec.a(), 0.0).counting_only();
        let mut counts = [[[0u32; RATE_BATCHES]; 2]; 2];
        // Countdowns instead of `%` and `/` on the step index.
        let (mut batch, mut batch_left, mut until_sub) = (0, per_batch + 1, 0);
        walk_path(params, &window, path, |i, x| {
            if batch_left == 0 {
                batch += 1;
                batch_left = per_batch;
            }
            batch_left -= 1;
            let t = grid_time(i, window.dt);
            let hit = fine.push(t, x);
            if hit.without_recovery || hit.with_recovery {
                counts[0][0][batch] += hit.without_recovery as u32;
                counts[0][1][batch] += hit.with_recovery as u32;
            }
            if grids == 2 {
                if until_sub == 0 {
                    until_sub = stride;
                    let hit = sub.push(t, x);
                    counts[1][0][batch] += hit.without_recovery as u32;
                    counts[1][1][batch] += hit.with_recovery as u32;
                }
                until_sub -= 1;
            }
            true
        });
        counts
    });
    let batch_len = per_batch as f64 * config.dt;
    Ok((0..grids)
        .map(|g| {
            [0, 1].map(|kind| {
                counts
                    .iter()
                    .flat_map(|path| path[g][kind].iter().map(|&c| c as f64 / batch_len))
                    .collect()
            })
        })
        .collect())
}

fn episode_rate(
    params: &ModelParams,
    spec: &DrawdownSpec,
    kind: DrawdownKind,
    config: &PathConfig,
) -> Result<Estimate> {
    let [without, with] = estimate_rates(params, spec, config)?;
    Ok(match kind {
        DrawdownKind::WithoutRecovery => without,
        DrawdownKind::WithRecovery => with,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functional_round_trip() {
        let all = [
            Functional::MaxTail {
                lambda: 1.0,
                n: 2,
                x: 0.15,
            },
            Functional::ConstrainedPassage {
                lambda: 0.5,
                n: 3,
                x: 0.2,
            },
            Functional::MagnitudeCdf {
                lambda: 1.0,
                n: 2,
                x: 0.15,
            },
            Functional::RecoveryLink { k: 2, m: 0 },
            Functional::EpisodeRate {
                kind: DrawdownKind::WithRecovery,
            },
        ];
        for f in all {
            assert_eq!(f.to_string().parse::<Functional>().unwrap(), f);
        }
        assert!("nope:x=1".parse::<Functional>().is_err());
        assert!("max-tail:lambda=1,n=2".parse::<Functional>().is_err());
        assert!("max-tail:lambda=1;n=2".parse::<Functional>().is_err());
    }

    #[test]
    fn estimates() {
        let e = Estimate::binomial(25, 100);
        assert_eq!(e.mean, 0.25);
        assert!((e.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        let s = Estimate::from_samples(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_episode_cdfs_agree_across_kinds() {
        let p = ModelParams::new(0.0, 0.2).unwrap();
        let s = DrawdownSpec::new(0.1).unwrap();
        let c = PathConfig::new(1e-3, 1.0, 200, 3).unwrap();
        let targets = [
            CdfTarget {
                kind: DrawdownKind::WithoutRecovery,
                n: 1,
            },
            CdfTarget {
                kind: DrawdownKind::WithRecovery,
                n: 1,
            },
        ];
        let g = estimate_cdf_strided(&p, &s, &targets, 0.7, &c, &[1, 3]).unwrap();
        for row in &g {
            assert_eq!(row[0], row[1]);
        }
        assert!(estimate_cdf(&p, &s, DrawdownKind::WithRecovery, 1, 2.0, &c).is_err());
    }
}
