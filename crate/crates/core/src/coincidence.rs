//! Clocked coincidence counting over time-tag streams.
//!
//! Counting follows a synchronous-logic model. A heralding event at `t1`
//! opens a gate that is high on every clock edge `k*T` with
//! `t1 + delay <= k*T < t1 + delay + CW`. A partner event at `t2` produces a
//! digital pulse of width `W2`; it registers on edge `k*T` when
//! `t2 + setup <= k*T < t2 + W2`: the pulse must already be stable for the
//! sampling setup time. A coincidence is scored when gate and registered
//! pulse share at least one edge. For uncorrelated inputs this yields an
//! effective window `CW + W2 - (T + setup)`.
//!
//! Each gate scores at most one coincidence and each partner pulse is used
//! by at most one gate. Because gates and pulses have fixed widths, greedy
//! earliest-pulse matching is a maximum matching, so the count never
//! decreases when the window widens.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::tags::{seconds_to_ps, TimeTagStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincConfig {
    /// FPGA clock period, seconds.
    pub clock_period: f64,
    /// Gate opening delay after the heralding event, seconds. Negative
    /// values are used when the heralding channel is the later one.
    pub rel_delay: f64,
    /// Coincidence window, seconds.
    pub window_cw: f64,
    /// Digital pulse width of the gated channel, seconds.
    pub pulse_width_w2: f64,
    /// Extra delay at which accidentals are measured, seconds.
    pub far_delay: f64,
    /// Time a partner pulse must be stable before a clock edge samples it.
    pub sample_setup: f64,
}

impl Default for CoincConfig {
    fn default() -> Self {
        Self {
            clock_period: 10e-9,
            rel_delay: 10e-9,
            window_cw: 30e-9,
            pulse_width_w2: 20e-9,
            far_delay: 300e-9,
            sample_setup: 2e-9,
        }
    }
}

impl CoincConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("clock_period", self.clock_period)?;
        check_positive("window_cw", self.window_cw)?;
        check_positive("pulse_width_w2", self.pulse_width_w2)?;
        check_positive("far_delay", self.far_delay)?;
        if !self.rel_delay.is_finite() {
            return Err(Error::Domain {
                name: "rel_delay",
                value: self.rel_delay,
                expected: "finite",
            });
        }
        if !(self.sample_setup.is_finite() && self.sample_setup >= 0.0 && self.sample_setup < self.pulse_width_w2) {
            return Err(Error::Domain {
                name: "sample_setup",
                value: self.sample_setup,
                expected: "[0, pulse_width_w2)",
            });
        }
        if self.window_cw < self.clock_period {
            return Err(Error::Domain {
                name: "window_cw",
                value: self.window_cw,
                expected: ">= clock_period",
            });
        }
        Ok(())
    }

    /// Configuration for the opposite conditioning direction: the gate
    /// opens on the other channel, so the delay changes sign.
    pub fn reversed(&self) -> Self {
        Self {
            rel_delay: -self.rel_delay,
            ..*self
        }
    }

    pub fn with_window(&self, window_cw: f64) -> Self {
        Self { window_cw, ..*self }
    }

    /// Window seen by uncorrelated events, `CW + W2 - (T + setup)`.
    pub fn effective_window(&self) -> f64 {
        self.window_cw + self.pulse_width_w2 - self.clock_period - self.sample_setup
    }

    fn grid(&self) -> Result<Grid> {
        self.validate()?;
        Ok(Grid {
            period: seconds_to_ps(self.clock_period),
            rel_delay: seconds_to_ps(self.rel_delay),
            window: seconds_to_ps(self.window_cw),
            pulse: seconds_to_ps(self.pulse_width_w2),
            far: seconds_to_ps(self.far_delay),
            setup: seconds_to_ps(self.sample_setup),
        })
    }
}

/// Configuration in integer picoseconds.
#[derive(Debug, Clone, Copy)]
struct Grid {
    period: i64,
    rel_delay: i64,
    window: i64,
    pulse: i64,
    far: i64,
    setup: i64,
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

impl Grid {
    /// Clock edges `[first, end)` on which a gate is high.
    fn gate(&self, t: u64, delay: i64, window: i64) -> (i64, i64) {
        let open = t as i64 + delay;
        (ceil_div(open, self.period), ceil_div(open + window, self.period))
    }

    /// Clock edges `[first, end)` on which a partner pulse registers.
    fn pulse(&self, t: u64) -> (i64, i64) {
        let t = t as i64;
        (ceil_div(t + self.setup, self.period), ceil_div(t + self.pulse, self.period))
    }
}

fn ensure_sorted(s: &TimeTagStream) -> Result<()> {
    match s.tags().windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::Unsorted {
            channel: s.channel_id(),
            index: i + 1,
        }),
        None => Ok(()),
    }
}

/// Greedy one-to-one matching of gates against partner pulses.
fn matched_count(herald: &[u64], partner: &[u64], g: &Grid, delay: i64, window: i64) -> u64 {
    let mut j = 0;
    let mut count = 0;
    for &t1 in herald {
        let (gs, ge) = g.gate(t1, delay, window);
        if gs >= ge {
            continue;
        }
        while j < partner.len() && g.pulse(partner[j]).1 <= gs {
            j += 1;
        }
        if j < partner.len() {
            let (ps, pe) = g.pulse(partner[j]);
            if ps < pe && ps < ge {
                count += 1;
                j += 1;
            }
        }
    }
    count
}

/// For every gate, whether any partner pulse shares an edge with it.
fn gate_hits(herald: &[u64], partner: &[u64], g: &Grid, delay: i64, window: i64) -> Vec<bool> {
    let mut j = 0;
    herald
        .iter()
        .map(|&t1| {
            let (gs, ge) = g.gate(t1, delay, window);
            while j < partner.len() && g.pulse(partner[j]).1 <= gs {
                j += 1;
            }
            // Pulses all have the same width, so the first unexpired one
            // starts earliest.
            gs < ge && j < partner.len() && {
                let (ps, pe) = g.pulse(partner[j]);
                ps < pe && ps < ge
            }
        })
        .collect()
}

/// Singles, raw and accidental coincidences for one conditioning direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincCounts {
    pub singles_1: u64,
    pub singles_2: u64,
    pub raw_coinc: u64,
    pub accidentals: u64,
    pub effective_coinc: f64,
    pub window_used: CoincConfig,
}

/// Counts coincidences of `s2` pulses inside gates opened by `s1`, and
/// accidentals with the gate pushed out by `far_delay`.
pub fn count_coincidences(s1: &TimeTagStream, s2: &TimeTagStream, cfg: &CoincConfig) -> Result<CoincCounts> {
    ensure_sorted(s1)?;
    ensure_sorted(s2)?;
    let g = cfg.grid()?;
    let raw = matched_count(s1.tags(), s2.tags(), &g, g.rel_delay, g.window);
    let acc = matched_count(s1.tags(), s2.tags(), &g, g.rel_delay + g.far, g.window);
    let effective = raw as f64 - acc as f64;
    if effective < -3.0 * (acc as f64).sqrt() {
        return Err(Error::NegativeCoincidences {
            effective,
            accidentals: acc,
        });
    }
    Ok(CoincCounts {
        singles_1: s1.len() as u64,
        singles_2: s2.len() as u64,
        raw_coinc: raw,
        accidentals: acc,
        effective_coinc: effective,
        window_used: *cfg,
    })
}

/// Raw matched coincidences with the gate opened at an arbitrary `delay`
/// (seconds) and the configured window.
pub fn count_at_delay(s1: &TimeTagStream, s2: &TimeTagStream, cfg: &CoincConfig, delay: f64) -> Result<u64> {
    ensure_sorted(s1)?;
    ensure_sorted(s2)?;
    let g = cfg.grid()?;
    Ok(matched_count(s1.tags(), s2.tags(), &g, seconds_to_ps(delay), g.window))
}

/// Floor division of sorted tags by the clock period, collapsing events
/// that fall into the same cycle.
pub fn quantize(tags: &TimeTagStream, clock_period: f64) -> Result<Vec<i64>> {
    check_positive("clock_period", clock_period)?;
    let period = seconds_to_ps(clock_period);
    if period <= 0 {
        return Err(Error::InvalidInput("clock period below 1 ps".into()));
    }
    let mut cycles: Vec<i64> = tags.tags().iter().map(|&t| (t as i64).div_euclid(period)).collect();
    cycles.dedup();
    Ok(cycles)
}

/// Counts of tag pairs per quantized lag `cycle(s2) - cycle(s1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayHistogram {
    pub max_lag: i64,
    /// `counts[i]` holds lag `i - max_lag`.
    pub counts: Vec<u64>,
}

impl DelayHistogram {
    pub fn lags(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.counts.len() as i64).map(move |i| i - self.max_lag)
    }

    pub fn count_at(&self, lag: i64) -> Option<u64> {
        let i = lag + self.max_lag;
        (i >= 0).then(|| self.counts.get(i as usize).copied()).flatten()
    }

    /// Lag with the most counts (first on ties).
    pub fn peak_lag(&self) -> i64 {
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best });
        i as i64 - self.max_lag
    }
}

pub fn delay_histogram(s1: &TimeTagStream, s2: &TimeTagStream, clock_period: f64, max_lag: i64) -> Result<DelayHistogram> {
    ensure_sorted(s1)?;
    ensure_sorted(s2)?;
    if max_lag < 0 {
        return Err(Error::InvalidInput("max_lag must be >= 0".into()));
    }
    let c1 = quantize(s1, clock_period)?;
    let c2 = quantize(s2, clock_period)?;
    let mut counts = vec![0u64; (2 * max_lag + 1) as usize];
    let mut lo = 0;
    for &a in &c1 {
        while lo < c2.len() && c2[lo] < a - max_lag {
            lo += 1;
        }
        let mut k = lo;
        while k < c2.len() && c2[k] <= a + max_lag {
            counts[(c2[k] - a + max_lag) as usize] += 1;
            k += 1;
        }
    }
    Ok(DelayHistogram { max_lag, counts })
}

/// Heralded counts of a split measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleCounts {
    pub n1: u64,
    pub n12: u64,
    pub n13: u64,
    pub n123: u64,
}

impl TripleCounts {
    /// `g2 = N1 N123 / (N12 N13)` with a multinomial delta-method sigma.
    /// With no triples the sigma is the one-count level `N1 / (N12 N13)`.
    pub fn g2(&self) -> Result<(f64, f64)> {
        if self.n12 == 0 || self.n13 == 0 {
            return Err(Error::Degenerate("g2 needs at least one heralded count on each split detector".into()));
        }
        let (n, a) = (self.n1 as f64, self.n123 as f64);
        let (ab, ac) = (self.n12 as f64, self.n13 as f64);
        let g2 = n * a / (ab * ac);
        if self.n123 == 0 {
            return Ok((0.0, n / (ab * ac)));
        }
        let (b, c) = (ab - a, ac - a);
        let da = 1.0 / a - 1.0 / ab - 1.0 / ac;
        let var_ln = a * da * da + b / (ab * ab) + c / (ac * ac) - 1.0 / n;
        Ok((g2, g2 * var_ln.max(0.0).sqrt()))
    }
}

/// Heralded pairwise and triple counts; gates are opened by `s1` with the
/// same semantics as [`count_coincidences`].
pub fn triple_counts(s1: &TimeTagStream, s2: &TimeTagStream, s3: &TimeTagStream, cfg: &CoincConfig) -> Result<TripleCounts> {
    ensure_sorted(s1)?;
    ensure_sorted(s2)?;
    ensure_sorted(s3)?;
    let g = cfg.grid()?;
    let h2 = gate_hits(s1.tags(), s2.tags(), &g, g.rel_delay, g.window);
    let h3 = gate_hits(s1.tags(), s3.tags(), &g, g.rel_delay, g.window);
    let mut out = TripleCounts {
        n1: s1.len() as u64,
        n12: 0,
        n13: 0,
        n123: 0,
    };
    for (a, b) in h2.into_iter().zip(h3) {
        out.n12 += a as u64;
        out.n13 += b as u64;
        out.n123 += (a && b) as u64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccidentalRow {
    pub cw: f64,
    pub counts: u64,
}

/// Accidental coincidences at `rel_delay + far_delay` for each window.
pub fn accidental_scan(s1: &TimeTagStream, s2: &TimeTagStream, cfg: &CoincConfig, cw_values: &[f64]) -> Result<Vec<AccidentalRow>> {
    ensure_sorted(s1)?;
    ensure_sorted(s2)?;
    if cw_values.is_empty() {
        return Err(Error::InvalidInput("empty window list".into()));
    }
    if cw_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("window list must be sorted".into()));
    }
    cw_values
        .iter()
        .map(|&cw| {
            let g = cfg.with_window(cw).grid()?;
            Ok(AccidentalRow {
                cw,
                counts: matched_count(s1.tags(), s2.tags(), &g, g.rel_delay + g.far, g.window),
            })
        })
        .collect()
}
