//! Loading, resampling, aligning and splitting exogenous traces.
//!
//! Input CSV formats (comma separated, one header row, `timestamp` in
//! `YYYY-MM-DDTHH:MM[:SS]` or `YYYY-MM-DD HH:MM[:SS]`, local time):
//!
//! | file      | header                                   | value                    |
//! |-----------|------------------------------------------|--------------------------|
//! | occupancy | `timestamp,resident_1,...,resident_N`    | `1` = away, `0` = home   |
//! | weather   | `timestamp,temp_c`                       | degC                     |
//! | price     | `timestamp,price_per_mwh`                | $/MWh, may be negative   |
//!
//! Prices are converted to $/kWh on load.

mod dataset;
mod synth;

use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::ExogenousTraces;
use crate::error::{Error, Result};

pub use dataset::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use synth::{synth_traces, SynthProfile};

pub const RESAMPLE_MINUTES: i64 = 15;

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Occupancy,
    Temperature,
    Price,
}

impl SeriesKind {
    fn value_header(self) -> &'static str {
        match self {
            SeriesKind::Occupancy => "occupied",
            SeriesKind::Temperature => "temp_c",
            SeriesKind::Price => "price_per_mwh",
        }
    }
}

/// Irregular or raw-cadence samples of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

/// A series on a regular 15-minute grid starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub start: NaiveDateTime,
    pub step_minutes: i64,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl GridSeries {
    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::minutes(self.step_minutes * i as i64)
    }

    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.values.len().saturating_sub(1))
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(format!("opening {}", path.display()), io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        })
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn validation_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_headers(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    Ok(headers.iter().map(|h| h.to_string()).collect())
}

/// Load a per-resident away-status file and reduce it to house occupancy:
/// unoccupied only when every resident is away.
///
/// Sub-15-minute data is first reduced per resident by majority vote within
/// each 15-minute bucket (away only when strictly more than half of the
/// samples say away).
pub fn load_occupancy_csv(path: &Path, residents: usize) -> Result<RawSeries> {
    if residents == 0 {
        return Err(Error::InvalidConfig("residents must be at least 1".into()));
    }
    let mut rdr = open_csv(path)?;
    let headers = read_headers(&mut rdr, path)?;
    let expected: Vec<String> = std::iter::once("timestamp".to_string())
        .chain((1..=residents).map(|i| format!("resident_{i}")))
        .collect();
    if headers != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), headers.join(",")),
        ));
    }

    let mut timestamps = Vec::new();
    let mut away: Vec<Vec<bool>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != residents + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", residents + 1, record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(path, line, format!("bad timestamp {:?}", &record[0])))?;
        let mut row = Vec::with_capacity(residents);
        for cell in record.iter().skip(1) {
            row.push(match cell {
                "1" => true,
                "0" => false,
                other => {
                    return Err(validation_err(
                        path,
                        line,
                        format!("away status must be 0 or 1, found {other:?}"),
                    ))
                }
            });
        }
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(validation_err(path, line, "timestamps must be strictly increasing"));
            }
        }
        timestamps.push(ts);
        away.push(row);
    }
    if timestamps.is_empty() {
        return Err(Error::EmptySeries);
    }

    let (timestamps, away) = if min_cadence(&timestamps) < Duration::minutes(RESAMPLE_MINUTES) {
        majority_vote_buckets(&timestamps, &away, residents)
    } else {
        (timestamps, away)
    };

    let values = away
        .iter()
        .map(|row| if row.iter().all(|&a| a) { 0.0 } else { 1.0 })
        .collect();
    Ok(RawSeries {
        timestamps,
        values,
        kind: SeriesKind::Occupancy,
    })
}

fn min_cadence(ts: &[NaiveDateTime]) -> Duration {
    ts.windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or(Duration::minutes(RESAMPLE_MINUTES))
}

fn floor_to_grid(t: NaiveDateTime) -> NaiveDateTime {
    let minute = t.minute() as i64;
    let floored = minute - minute % RESAMPLE_MINUTES;
    t.with_minute(floored as u32)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("valid floored time")
}

fn ceil_to_grid(t: NaiveDateTime) -> NaiveDateTime {
    let f = floor_to_grid(t);
    if f == t {
        f
    } else {
        f + Duration::minutes(RESAMPLE_MINUTES)
    }
}

fn majority_vote_buckets(
    timestamps: &[NaiveDateTime],
    away: &[Vec<bool>],
    residents: usize,
) -> (Vec<NaiveDateTime>, Vec<Vec<bool>>) {
    let mut out_ts: Vec<NaiveDateTime> = Vec::new();
    let mut out_rows: Vec<Vec<bool>> = Vec::new();
    let mut counts = vec![0usize; residents];
    let mut total = 0usize;
    let mut current: Option<NaiveDateTime> = None;

    let mut flush = |bucket: NaiveDateTime, counts: &mut Vec<usize>, total: &mut usize| {
        out_ts.push(bucket);
        out_rows.push(counts.iter().map(|&c| 2 * c > *total).collect());
        counts.iter_mut().for_each(|c| *c = 0);
        *total = 0;
    };

    for (ts, row) in timestamps.iter().zip(away) {
        let bucket = floor_to_grid(*ts);
        if current.is_some_and(|c| c != bucket) {
            flush(current.unwrap(), &mut counts, &mut total);
        }
        current = Some(bucket);
        for (c, &a) in counts.iter_mut().zip(row) {
            *c += a as usize;
        }
        total += 1;
    }
    if let Some(bucket) = current {
        flush(bucket, &mut counts, &mut total);
    }
    (out_ts, out_rows)
}

/// Load a `timestamp,<value>` file at hourly or finer cadence.
pub fn load_hourly_csv(path: &Path, kind: SeriesKind) -> Result<RawSeries> {
    if kind == SeriesKind::Occupancy {
        return Err(Error::InvalidConfig(
            "occupancy files use load_occupancy_csv".into(),
        ));
    }
    let mut rdr = open_csv(path)?;
    let headers = read_headers(&mut rdr, path)?;
    let expected = ["timestamp", kind.value_header()];
    if headers != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), headers.join(",")),
        ));
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(path, line, format!("bad timestamp {:?}", &record[0])))?;
        let v: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad number {:?}", &record[1])))?;
        if !v.is_finite() {
            return Err(validation_err(path, line, "value must be finite"));
        }
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(validation_err(path, line, "timestamps must be strictly increasing"));
            }
        }
        timestamps.push(ts);
        values.push(match kind {
            SeriesKind::Price => v / 1000.0,
            _ => v,
        });
    }
    if timestamps.is_empty() {
        return Err(Error::EmptySeries);
    }
    let cadence = min_cadence(&timestamps);
    if cadence > Duration::hours(1) {
        return Err(Error::Format(format!(
            "{}: cadence {} minutes is coarser than hourly",
            path.display(),
            cadence.num_minutes()
        )));
    }
    let spans = find_gaps(&timestamps, cadence);
    if !spans.is_empty() {
        return Err(Error::Gap { spans });
    }
    Ok(RawSeries {
        timestamps,
        values,
        kind,
    })
}

/// Spans where consecutive samples are further apart than `cadence`.
pub fn find_gaps(timestamps: &[NaiveDateTime], cadence: Duration) -> Vec<String> {
    timestamps
        .windows(2)
        .filter(|w| w[1] - w[0] > cadence)
        .map(|w| {
            format!(
                "{}..{} ({} missing)",
                format_timestamp(w[0] + cadence),
                format_timestamp(w[1] - cadence),
                (w[1] - w[0]).num_seconds() / cadence.num_seconds() - 1
            )
        })
        .collect()
}

/// Resample onto the 15-minute grid spanning the series. Temperature and
/// price interpolate linearly; occupancy holds the previous sample.
pub fn resample_15min(series: &RawSeries) -> Result<GridSeries> {
    if series.timestamps.is_empty() || series.values.len() != series.timestamps.len() {
        return Err(Error::EmptySeries);
    }
    let first = series.timestamps[0];
    let last = *series.timestamps.last().unwrap();
    let start = ceil_to_grid(first);
    let end = floor_to_grid(last);
    if end < start {
        return Err(Error::EmptySeries);
    }
    let step = Duration::minutes(RESAMPLE_MINUTES);
    let n = ((end - start).num_minutes() / RESAMPLE_MINUTES) as usize + 1;

    let mut values = Vec::with_capacity(n);
    let mut j = 0usize;
    for i in 0..n {
        let t = start + step * i as i32;
        while j + 1 < series.timestamps.len() && series.timestamps[j + 1] <= t {
            j += 1;
        }
        let v = match series.kind {
            SeriesKind::Occupancy => {
                if series.values[j] >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                let t0 = series.timestamps[j];
                if t0 == t || j + 1 == series.timestamps.len() {
                    series.values[j]
                } else {
                    let t1 = series.timestamps[j + 1];
                    let frac = (t - t0).num_milliseconds() as f64
                        / (t1 - t0).num_milliseconds() as f64;
                    let (v0, v1) = (series.values[j], series.values[j + 1]);
                    v0 + (v1 - v0) * frac
                }
            }
        };
        values.push(v);
    }
    Ok(GridSeries {
        start,
        step_minutes: RESAMPLE_MINUTES,
        values,
        kind: series.kind,
    })
}

/// Intersect three grid series into aligned traces.
pub fn align(
    occupancy: &GridSeries,
    temperature: &GridSeries,
    price: &GridSeries,
    cycle_steps: usize,
) -> Result<ExogenousTraces> {
    let series = [occupancy, temperature, price];
    for s in series {
        if s.step_minutes != RESAMPLE_MINUTES {
            return Err(Error::Format(format!(
                "{:?} series is not on the {RESAMPLE_MINUTES}-minute grid",
                s.kind
            )));
        }
    }
    let start = series.iter().map(|s| s.start).max().unwrap();
    let end = series.iter().map(|s| s.end()).min().unwrap();
    if end < start {
        return Err(Error::InsufficientData {
            required: 1,
            available: 0,
        });
    }
    let n = ((end - start).num_minutes() / RESAMPLE_MINUTES) as usize + 1;
    let offset_of = |s: &GridSeries| ((start - s.start).num_minutes() / RESAMPLE_MINUTES) as usize;
    let take = |s: &GridSeries| s.values[offset_of(s)..offset_of(s) + n].to_vec();

    let minutes_since_midnight = start.hour() as i64 * 60 + start.minute() as i64;
    let clock_offset = (minutes_since_midnight / RESAMPLE_MINUTES) as usize % cycle_steps.max(1);
    ExogenousTraces::new(
        take(temperature),
        take(price),
        take(occupancy).into_iter().map(|v| v >= 0.5).collect(),
        RESAMPLE_MINUTES as f64 / 60.0,
        cycle_steps,
        clock_offset,
    )
}

/// Chronological contiguous split: the first `train_days` then the next `test_days`.
pub fn split_train_test(
    traces: &ExogenousTraces,
    train_days: usize,
    test_days: usize,
) -> Result<(ExogenousTraces, ExogenousTraces)> {
    let per_day = traces.steps_per_day();
    let train_len = train_days * per_day;
    let test_len = test_days * per_day;
    if train_len + test_len > traces.len() {
        return Err(Error::InsufficientData {
            required: train_len + test_len,
            available: traces.len(),
        });
    }
    Ok((traces.slice(0, train_len)?, traces.slice(train_len, test_len)?))
}

/// Write aligned traces as `step,temp_c,price_per_kwh,occupied`. Values use
/// shortest round-trip formatting so reloading is bit-exact.
pub fn write_traces_csv(traces: &ExogenousTraces, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(["step", "temp_c", "price_per_kwh", "occupied"])
        .map_err(io)?;
    for i in 0..traces.len() {
        w.write_record([
            traces.clock_index(i).to_string(),
            traces.t_out_degc[i].to_string(),
            traces.rho_per_kwh[i].to_string(),
            (traces.occupancy[i] as u8).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_traces_csv(path: &Path, dt_hours: f64, cycle_steps: usize) -> Result<ExogenousTraces> {
    let mut rdr = open_csv(path)?;
    let headers = read_headers(&mut rdr, path)?;
    if headers != ["step", "temp_c", "price_per_kwh", "occupied"] {
        return Err(parse_err(path, 1, format!("unexpected header {:?}", headers.join(","))));
    }
    let (mut t_out, mut rho, mut occ) = (Vec::new(), Vec::new(), Vec::new());
    let mut first_step = None;
    for record in rdr.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(parse_err(path, line, "expected 4 fields"));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad number {:?}", &record[i])))
        };
        if first_step.is_none() {
            first_step = Some(
                record[0]
                    .parse::<usize>()
                    .map_err(|_| parse_err(path, line, "bad step"))?,
            );
        }
        t_out.push(num(1)?);
        rho.push(num(2)?);
        occ.push(match &record[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(validation_err(path, line, format!("occupied must be 0 or 1, found {other:?}")))
            }
        });
    }
    ExogenousTraces::new(
        t_out,
        rho,
        occ,
        dt_hours,
        cycle_steps,
        first_step.unwrap_or(0) % cycle_steps.max(1),
    )
}

/// Write a raw series in its input-file format (occupancy as a single resident).
pub fn write_series_csv(series: &RawSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let header = match series.kind {
        SeriesKind::Occupancy => "resident_1",
        k => k.value_header(),
    };
    w.write_record(["timestamp", header]).map_err(io)?;
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        let cell = match series.kind {
            // away status: 1 when the house is unoccupied
            SeriesKind::Occupancy => if *v >= 0.5 { "0" } else { "1" }.to_string(),
            SeriesKind::Price => (v * 1000.0).to_string(),
            SeriesKind::Temperature => v.to_string(),
        };
        w.write_record([format_timestamp(*t), cell]).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
