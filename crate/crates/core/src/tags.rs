//! Time-tag streams and the portable `channel,timestamp_ps` CSV format.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Converts seconds to integer picoseconds, rounding to nearest.
pub fn seconds_to_ps(seconds: f64) -> i64 {
    (seconds * PS_PER_S).round() as i64
}

/// Detector events of one channel, strictly increasing, in integer
/// picoseconds within `[0, duration_ps]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagStream {
    channel_id: u8,
    tags: Vec<u64>,
    duration_ps: u64,
}

impl TimeTagStream {
    pub fn new(channel_id: u8, tags: Vec<u64>, duration_ps: u64) -> Result<Self> {
        if let Some(i) = tags.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Unsorted {
                channel: channel_id,
                index: i + 1,
            });
        }
        if let Some(&last) = tags.last() {
            if last > duration_ps {
                return Err(Error::InvalidInput(format!(
                    "tag {last} ps on channel {channel_id} exceeds duration {duration_ps} ps"
                )));
            }
        }
        Ok(Self {
            channel_id,
            tags,
            duration_ps,
        })
    }

    /// Sorts, removes duplicates and drops tags outside `[0, duration]`.
    pub fn from_unsorted(channel_id: u8, mut tags: Vec<u64>, duration_ps: u64) -> Self {
        tags.sort_unstable();
        tags.dedup();
        let keep = tags.partition_point(|&t| t <= duration_ps);
        tags.truncate(keep);
        Self {
            channel_id,
            tags,
            duration_ps,
        }
    }

    pub fn empty(channel_id: u8, duration_ps: u64) -> Self {
        Self {
            channel_id,
            tags: Vec::new(),
            duration_ps,
        }
    }

    pub fn channel_id(&self) -> u8 {
        self.channel_id
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    /// Mean event rate in counts per second.
    pub fn rate(&self) -> f64 {
        if self.duration_ps == 0 {
            0.0
        } else {
            self.tags.len() as f64 / self.duration_s()
        }
    }

    /// Copy shifted by `offset_ps`, keeping the same relative duration.
    pub fn shifted(&self, offset_ps: u64) -> Self {
        Self {
            channel_id: self.channel_id,
            tags: self.tags.iter().map(|t| t + offset_ps).collect(),
            duration_ps: self.duration_ps + offset_ps,
        }
    }

    /// Removes events closer than `dead_time_ps` to the previous kept event.
    pub fn apply_dead_time(&mut self, dead_time_ps: u64) {
        if dead_time_ps == 0 || self.tags.is_empty() {
            return;
        }
        let mut last: Option<u64> = None;
        self.tags.retain(|&t| match last {
            Some(l) if t - l < dead_time_ps => false,
            _ => {
                last = Some(t);
                true
            }
        });
    }
}

/// Writes streams as `channel,timestamp_ps`, ordered by timestamp then
/// channel.
pub fn write_tags_csv<W: Write>(writer: W, streams: &[&TimeTagStream]) -> csv::Result<()> {
    let mut rows: Vec<(u64, u8)> = streams
        .iter()
        .flat_map(|s| s.tags.iter().map(move |&t| (t, s.channel_id)))
        .collect();
    rows.sort_unstable();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["channel", "timestamp_ps"])?;
    for (t, ch) in rows {
        w.write_record([ch.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tags_file(path: &Path, streams: &[&TimeTagStream]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_tags_csv(std::io::BufWriter::new(file), streams).map_err(|e| csv_error(path, e))
}

/// Reads a tag CSV. Each channel's duration is `duration_ps` if given,
/// otherwise the largest timestamp in the file.
pub fn read_tags_csv<R: Read>(
    reader: R,
    duration_ps: Option<u64>,
    source: &Path,
) -> Result<BTreeMap<u8, TimeTagStream>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["channel", "timestamp_ps"] {
        return Err(Error::Parse {
            path: source.to_path_buf(),
            message: format!("expected header channel,timestamp_ps, found {headers:?}"),
        });
    }
    let mut per_channel: BTreeMap<u8, Vec<u64>> = BTreeMap::new();
    let mut max_t = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let parse_err = |what: &str| Error::Parse {
            path: source.to_path_buf(),
            message: format!("row {}: bad {what}", line + 2),
        };
        let ch: u8 = rec[0].trim().parse().map_err(|_| parse_err("channel"))?;
        let t: u64 = rec[1].trim().parse().map_err(|_| parse_err("timestamp_ps"))?;
        max_t = max_t.max(t);
        per_channel.entry(ch).or_default().push(t);
    }
    let duration = duration_ps.unwrap_or(max_t);
    per_channel
        .into_iter()
        .map(|(ch, tags)| Ok((ch, TimeTagStream::new(ch, tags, duration)?)))
        .collect()
}

pub fn read_tags_file(path: &Path, duration_ps: Option<u64>) -> Result<BTreeMap<u8, TimeTagStream>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_tags_csv(std::io::BufReader::new(file), duration_ps, path)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}
