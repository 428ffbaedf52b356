use super::{EpisodeDetector, EpisodeRecord, PathEpisodes};
use crate::error::{Error, Result};
use crate::model::DrawdownSpec;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::str::FromStr;

/// Relative slack on the threshold for observed series, so a drop that equals
/// the threshold up to decimal round-off in the input still counts.
pub const INGEST_RELATIVE_SLACK: f64 = 1e-12;

/// How prices map to the monitored level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// Level is the price itself; the threshold is an absolute drop.
    Arithmetic,
    /// Level is `ln(price)`; a threshold `-ln(1 - alpha)` detects relative drops of `alpha`.
    Log,
}

impl FromStr for SeriesMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arithmetic" => Ok(SeriesMode::Arithmetic),
            "log" => Ok(SeriesMode::Log),
            other => Err(Error::InvalidArgument(format!("unknown series mode `{other}`"))),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    time: String,
    price: String,
}

/// Read `time,price` rows. Line numbers in errors count the header as line 1.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "price" {
        return Err(Error::Input {
            line: 1,
            message: format!(
                "expected header `time,price`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Input {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::Input {
            line,
            message: e.to_string(),
        })?;
        let parse = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field.parse().map_err(|_| Error::Input {
                line,
                message: format!("{name} `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Input {
                    line,
                    message: format!("{name} `{field}` is not finite"),
                });
            }
            Ok(v)
        };
        rows.push((parse(&row.time, "time")?, parse(&row.price, "price")?));
    }
    Ok(rows)
}

/// Episodes of an observed series. Row `i` is reported as line `i + 2`.
pub fn ingest_series(rows: &[(f64, f64)], spec: &DrawdownSpec, mode: SeriesMode) -> Result<PathEpisodes> {
    let threshold = spec.a() * (1.0 - INGEST_RELATIVE_SLACK);
    let mut det = EpisodeDetector::new(threshold, 0.0);
    let mut prev_time = f64::NEG_INFINITY;
    for (i, &(time, price)) in rows.iter().enumerate() {
        let line = i as u64 + 2;
        if !(time > prev_time) {
            return Err(Error::Input {
                line,
                message: format!("time {time} does not increase strictly (previous {prev_time})"),
            });
        }
        prev_time = time;
        let level = match mode {
            SeriesMode::Arithmetic => price,
            SeriesMode::Log => {
                if !(price > 0.0) {
                    return Err(Error::Input {
                        line,
                        message: format!("price {price} must be > 0 in log mode"),
                    });
                }
                price.ln()
            }
        };
        det.push(time, level);
    }
    let mut episodes = det.into_episodes(0);
    if mode == SeriesMode::Log {
        // Report levels as prices.
        for e in episodes
            .without_recovery
            .iter_mut()
            .chain(episodes.with_recovery.iter_mut())
        {
            e.running_max = e.running_max.exp();
            e.value = e.value.exp();
        }
    }
    Ok(episodes)
}

/// [`read_series_csv`] followed by [`ingest_series`].
pub fn ingest_csv_series<R: Read>(reader: R, spec: &DrawdownSpec, mode: SeriesMode) -> Result<PathEpisodes> {
    ingest_series(&read_series_csv(reader)?, spec, mode)
}

#[derive(Serialize)]
struct CsvEpisode<'a> {
    path: usize,
    kind: &'a str,
    index: u32,
    time: f64,
    running_max: f64,
    value: f64,
}

fn ordered(paths: &[PathEpisodes]) -> impl Iterator<Item = (usize, &EpisodeRecord)> {
    paths.iter().flat_map(|p| {
        p.without_recovery
            .iter()
            .chain(p.with_recovery.iter())
            .map(move |e| (p.path, e))
    })
}

/// CSV with header `path,kind,index,time,running_max,value`.
pub fn write_episodes_csv<W: Write>(writer: W, paths: &[PathEpisodes]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (path, e) in ordered(paths) {
        w.serialize(CsvEpisode {
            path,
            kind: e.kind.as_str(),
            index: e.index,
            time: e.time,
            running_max: e.running_max,
            value: e.value,
        })?;
    }
    if paths
        .iter()
        .all(|p| p.without_recovery.is_empty() && p.with_recovery.is_empty())
    {
        w.write_record(["path", "kind", "index", "time", "running_max", "value"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonEpisode<'a> {
    path: usize,
    #[serde(flatten)]
    record: &'a EpisodeRecord,
}

/// JSON array of episode records, each tagged with its path.
pub fn write_episodes_json<W: Write>(writer: W, paths: &[PathEpisodes]) -> Result<()> {
    let records: Vec<_> = ordered(paths)
        .map(|(path, record)| JsonEpisode { path, record })
        .collect();
    serde_json::to_writer_pretty(writer, &records)?;
    Ok(())
}
