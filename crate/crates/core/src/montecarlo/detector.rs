use crate::DrawdownKind;
use serde::{Deserialize, Serialize};

/// One detected drawdown episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub kind: DrawdownKind,
    /// Episode number, starting at 1.
    pub index: u32,
    pub time: f64,
    /// Global running maximum `M` at detection.
    pub running_max: f64,
    pub value: f64,
}

/// Both episode sequences of a single path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathEpisodes {
    pub path: usize,
    pub without_recovery: Vec<EpisodeRecord>,
    pub with_recovery: Vec<EpisodeRecord>,
}

impl PathEpisodes {
    pub fn episodes(&self, kind: DrawdownKind) -> &[EpisodeRecord] {
        match kind {
            DrawdownKind::WithoutRecovery => &self.without_recovery,
            DrawdownKind::WithRecovery => &self.with_recovery,
        }
    }

    /// Number of episodes of `kind` at or before `t`.
    pub fn count_by(&self, kind: DrawdownKind, t: f64) -> usize {
        self.episodes(kind).partition_point(|e| e.time <= t)
    }
}

/// What a single observation triggered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Detection {
    pub without_recovery: bool,
    pub with_recovery: bool,
}

/// Streaming detector for both episode sequences on a monitored path.
///
/// Without recovery, the reference maximum restarts at the detection value.
/// With recovery, a new episode needs the global maximum to strictly exceed
/// the maximum recorded at the previous episode.
#[derive(Debug, Clone)]
pub struct EpisodeDetector {
    threshold: f64,
    offset: f64,
    started: bool,
    global_max: f64,
    reference_max: f64,
    recovery_max: Option<f64>,
    keep_records: bool,
    counts: [u32; 2],
    without: Vec<EpisodeRecord>,
    with: Vec<EpisodeRecord>,
}

impl EpisodeDetector {
    /// `offset` is added to the levels stored in records; detection only
    /// looks at the levels passed to [`EpisodeDetector::push`].
    pub fn new(threshold: f64, offset: f64) -> Self {
        Self {
            threshold,
            offset,
            started: false,
            global_max: f64::NEG_INFINITY,
            reference_max: f64::NEG_INFINITY,
            recovery_max: None,
            keep_records: true,
            counts: [0, 0],
            without: Vec::new(),
            with: Vec::new(),
        }
    }

    /// Count episodes without storing records.
    pub fn counting_only(mut self) -> Self {
        self.keep_records = false;
        self
    }

    #[inline]
    pub fn push(&mut self, time: f64, x: f64) -> Detection {
        if !self.started {
            self.started = true;
            self.global_max = x;
            self.reference_max = x;
            return Detection::default();
        }
        let mut hit = Detection::default();
        self.global_max = self.global_max.max(x);
        self.reference_max = self.reference_max.max(x);
        if self.reference_max - x >= self.threshold {
            self.counts[0] += 1;
            hit.without_recovery = true;
            if self.keep_records {
                self.without
                    .push(self.record(DrawdownKind::WithoutRecovery, self.counts[0], time, x));
            }
            self.reference_max = x;
        }
        if self.global_max - x >= self.threshold && self.recovery_max.is_none_or(|p| self.global_max > p) {
            self.counts[1] += 1;
            hit.with_recovery = true;
            if self.keep_records {
                self.with
                    .push(self.record(DrawdownKind::WithRecovery, self.counts[1], time, x));
            }
            self.recovery_max = Some(self.global_max);
        }
        hit
    }

    fn record(&self, kind: DrawdownKind, index: u32, time: f64, x: f64) -> EpisodeRecord {
        EpisodeRecord {
            kind,
            index,
            time,
            running_max: self.global_max + self.offset,
            value: x + self.offset,
        }
    }

    pub fn count(&self, kind: DrawdownKind) -> u32 {
        match kind {
            DrawdownKind::WithoutRecovery => self.counts[0],
            DrawdownKind::WithRecovery => self.counts[1],
        }
    }

    /// Global running maximum so far, relative to the pushed levels.
    pub fn running_max(&self) -> f64 {
        self.global_max
    }

    pub fn into_episodes(self, path: usize) -> PathEpisodes {
        PathEpisodes {
            path,
            without_recovery: self.without,
            with_recovery: self.with,
        }
    }
}

/// Run the detector over a fixed sequence of `(time, level)` points.
pub fn detect_episodes(points: &[(f64, f64)], threshold: f64) -> PathEpisodes {
    let mut det = EpisodeDetector::new(threshold, 0.0);
    for &(t, x) in points {
        det.push(t, x);
    }
    det.into_episodes(0)
}
