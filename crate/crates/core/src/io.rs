//! CSV and JSON formats for sweeps, delay histograms, counts and plot
//! tables. Floats are written in shortest round-trip form so every file
//! reads back bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{SweepPoint, UncertaintyBudget};
use crate::coincidence::{CoincCounts, DelayHistogram};
use crate::error::{Error, Result};
use crate::tags::csv_error;

pub const SWEEP_HEADER: [&str; 8] = ["pump_dac", "duration_s", "c1", "c2", "c12_raw", "c12_acc", "c21_raw", "c21_acc"];
pub const HISTOGRAM_HEADER: [&str; 2] = ["lag_cycles", "count"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], source: &Path) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: source.to_path_buf(),
            message: format!("expected header {}, found {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn write_records<W: Write, T: Serialize>(writer: W, rows: &[T], source: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(source, e))?;
    }
    w.flush().map_err(|source_err| Error::Io {
        path: source.to_path_buf(),
        source: source_err,
    })
}

fn read_records<R: Read, T: DeserializeOwned>(reader: R, header: &[&str], source: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, header, source)?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(source, e))).collect()
}

pub fn write_sweep_csv<W: Write>(writer: W, points: &[SweepPoint]) -> Result<()> {
    if points.is_empty() {
        // serde-driven writers emit the header with the first row only
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SWEEP_HEADER).map_err(|e| csv_error(Path::new("sweep"), e))?;
        return w.flush().map_err(|source| Error::Io {
            path: "sweep".into(),
            source,
        });
    }
    write_records(writer, points, Path::new("sweep"))
}

pub fn read_sweep_csv<R: Read>(reader: R, source: &Path) -> Result<Vec<SweepPoint>> {
    read_records(reader, &SWEEP_HEADER, source)
}

pub fn write_sweep_file(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_sweep_csv(create(path)?, points)
}

pub fn read_sweep_file(path: &Path) -> Result<Vec<SweepPoint>> {
    read_sweep_csv(open(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct HistRow {
    lag_cycles: i64,
    count: u64,
}

pub fn write_histogram_csv<W: Write>(writer: W, hist: &DelayHistogram) -> Result<()> {
    let rows: Vec<HistRow> = hist
        .lags()
        .zip(&hist.counts)
        .map(|(lag_cycles, &count)| HistRow { lag_cycles, count })
        .collect();
    write_records(writer, &rows, Path::new("histogram"))
}

/// Reads a histogram written by [`write_histogram_csv`]; lags must be a
/// contiguous symmetric range.
pub fn read_histogram_csv<R: Read>(reader: R, source: &Path) -> Result<DelayHistogram> {
    let rows: Vec<HistRow> = read_records(reader, &HISTOGRAM_HEADER, source)?;
    let bad = || Error::Parse {
        path: source.to_path_buf(),
        message: "lags must run contiguously from -max_lag to +max_lag".into(),
    };
    let first = rows.first().ok_or_else(bad)?.lag_cycles;
    let max_lag = -first;
    if max_lag < 0 || rows.len() as i64 != 2 * max_lag + 1 {
        return Err(bad());
    }
    if rows.iter().enumerate().any(|(i, r)| r.lag_cycles != first + i as i64) {
        return Err(bad());
    }
    Ok(DelayHistogram {
        max_lag,
        counts: rows.into_iter().map(|r| r.count).collect(),
    })
}

pub fn write_histogram_file(path: &Path, hist: &DelayHistogram) -> Result<()> {
    write_histogram_csv(create(path)?, hist)
}

/// Flat counts record for one conditioning direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsRecord {
    pub singles_1: u64,
    pub singles_2: u64,
    pub raw: u64,
    pub accidentals: u64,
    pub effective: f64,
    /// Coincidence window, seconds.
    pub cw: f64,
    /// Gate delay, seconds.
    pub delay: f64,
}

impl From<&CoincCounts> for CountsRecord {
    fn from(c: &CoincCounts) -> Self {
        Self {
            singles_1: c.singles_1,
            singles_2: c.singles_2,
            raw: c.raw_coinc,
            accidentals: c.accidentals,
            effective: c.effective_coinc,
            cw: c.window_used.window_cw,
            delay: c.window_used.rel_delay,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Plot-ready numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let src = Path::new("table");
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns).map_err(|e| csv_error(src, e))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(src, e))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: src.to_path_buf(),
            source,
        })
    }

    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(source, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut table = Table {
            columns,
            rows: Vec::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(source, e))?;
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    path: source.to_path_buf(),
                    message: format!("row {}: {e}", i + 2),
                })?;
            table.push(row).map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                message: e.to_string(),
            })?;
        }
        Ok(table)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write_csv(create(path)?)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(open(path)?, path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BudgetRow {
    name: String,
    value: f64,
    sigma: f64,
    relative: f64,
}

/// Budget table `name,value,sigma,relative` with a final `combined` row
/// holding the combined relative sigma.
pub fn write_budget_csv<W: Write>(writer: W, budget: &UncertaintyBudget) -> Result<()> {
    let mut rows: Vec<BudgetRow> = budget
        .components
        .iter()
        .zip(&budget.relative_contributions)
        .map(|(c, &relative)| BudgetRow {
            name: c.name.clone(),
            value: c.value,
            sigma: c.sigma,
            relative,
        })
        .collect();
    rows.push(BudgetRow {
        name: "combined".into(),
        value: f64::NAN,
        sigma: f64::NAN,
        relative: budget.combined_relative,
    });
    write_records(writer, &rows, Path::new("budget"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_round_trip() {
        let pts = vec![SweepPoint {
            pump_dac: 1234.5,
            duration_s: 0.1 + 0.2,
            c1: 10,
            c2: 9,
            c12_raw: 3,
            c12_acc: 1,
            c21_raw: 4,
            c21_acc: 0,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("pump_dac,duration_s,c1,c2,c12_raw,c12_acc,c21_raw,c21_acc\n"));
        assert_eq!(read_sweep_csv(buf.as_slice(), Path::new("mem")).unwrap(), pts);
        let mut empty = Vec::new();
        write_sweep_csv(&mut empty, &[]).unwrap();
        assert!(read_sweep_csv(empty.as_slice(), Path::new("mem")).unwrap().is_empty());
    }

    #[test]
    fn histogram_round_trip() {
        let h = DelayHistogram {
            max_lag: 2,
            counts: vec![1, 2, 30, 4, 5],
        };
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("lag_cycles,count\n-2,1\n"));
        assert_eq!(read_histogram_csv(buf.as_slice(), Path::new("mem")).unwrap(), h);
        assert!(read_histogram_csv("lag_cycles,count\n-1,1\n1,1\n".as_bytes(), Path::new("mem")).is_err());
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![0.1 + 0.2, 1e-300]).unwrap();
        t.push(vec![-2.5e17, f64::MIN_POSITIVE]).unwrap();
        t.push(vec![f64::NAN, f64::INFINITY]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.columns, t.columns);
        for (x, y) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_sweep_csv("pump,x\n1,2\n".as_bytes(), Path::new("mem")).is_err());
    }
}
