//! Seeded Monte-Carlo generation of time-tagged detections from a photon-pair
//! source.
//!
//! Temporal modes arrive as a Poisson process at `mode_rate`. Each mode
//! carries the same photon number `n` in both arms, drawn from the thermal
//! law `(1 - zeta) zeta^n`. Vacuum modes produce nothing, so only the
//! non-vacuum modes are generated: they form a thinned Poisson process of
//! rate `mode_rate * zeta` with `n - 1` geometric. Each arm's photons are
//! thinned binomially, a click detector emits at most one tag per mode, and
//! Gaussian jitter, a fixed cable delay, and Poisson dark/background events
//! are added per channel.
//!
//! The run is cut into fixed time chunks; every `(role, chunk)` pair owns an
//! independent RNG substream, so output is bit-identical for any thread
//! count.

mod rng;

pub use rng::{SimSeed, StreamRole};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, check_probability, Error, Result};
use crate::fock::SqueezeParam;
use crate::tags::{seconds_to_ps, TimeTagStream, PS_PER_S};

/// Channel ids used in simulated output.
pub const HERALD_CHANNEL: u8 = 1;
pub const PARTNER_CHANNEL: u8 = 2;
pub const SPLIT_CHANNEL: u8 = 3;

const MIN_CHUNK_PS: u64 = 1_000_000_000; // 1 ms
const MAX_CHUNKS: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    /// Squeezing strength per temporal mode.
    pub r: f64,
    /// Temporal modes per second.
    #[serde(default = "default_mode_rate")]
    pub mode_rate: f64,
    /// Uncorrelated background counts per second added to each arm.
    #[serde(default)]
    pub background_rate_per_arm: f64,
    /// Run length in seconds.
    pub duration: f64,
}

/// Default temporal-mode rate, per second.
pub const DEFAULT_MODE_RATE: f64 = 1e7;

fn default_mode_rate() -> f64 {
    DEFAULT_MODE_RATE
}

impl SourceParams {
    /// Noise-free source at the default mode rate.
    pub fn new(r: f64, duration: f64) -> Self {
        Self {
            r,
            mode_rate: DEFAULT_MODE_RATE,
            background_rate_per_arm: 0.0,
            duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_nonnegative("r", self.r)?;
        check_positive("mode_rate", self.mode_rate)?;
        check_nonnegative("background_rate_per_arm", self.background_rate_per_arm)?;
        check_positive("duration", self.duration)?;
        Ok(())
    }

    /// Number of temporal modes spanned by the run.
    pub fn expected_modes(&self) -> f64 {
        self.mode_rate * self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorChannel {
    /// Channel and source transmittivity.
    pub t_chan: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Gaussian timing jitter, seconds.
    pub jitter_sigma: f64,
    /// Width of the digital pulse generated for this channel, seconds.
    pub pulse_width: f64,
    /// Non-paralyzable dead time, seconds. Zero disables the filter.
    pub dead_time: f64,
    /// Fixed propagation delay added to every source photon, seconds.
    pub delay: f64,
}

impl Default for DetectorChannel {
    fn default() -> Self {
        Self {
            t_chan: 1.0,
            eta_d: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 300e-12,
            pulse_width: 20e-9,
            dead_time: 0.0,
            delay: 0.0,
        }
    }
}

impl DetectorChannel {
    pub fn ideal() -> Self {
        Self {
            jitter_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_efficiency(t_chan: f64, eta_d: f64) -> Self {
        Self {
            t_chan,
            eta_d,
            ..Self::default()
        }
    }

    pub fn eta_tot(&self) -> f64 {
        self.t_chan * self.eta_d
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("t_chan", self.t_chan)?;
        check_probability("eta_d", self.eta_d)?;
        check_nonnegative("dark_rate", self.dark_rate)?;
        check_nonnegative("jitter_sigma", self.jitter_sigma)?;
        check_nonnegative("pulse_width", self.pulse_width)?;
        check_nonnegative("dead_time", self.dead_time)?;
        if !self.delay.is_finite() {
            return Err(Error::Domain {
                name: "delay",
                value: self.delay,
                expected: "finite",
            });
        }
        Ok(())
    }
}

/// How channel loss and detector efficiency are applied to each photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    /// One Bernoulli trial per photon with `eta_tot = t_chan * eta_d`.
    #[default]
    Merged,
    /// Transmit with `t_chan`, then detect with `eta_d`.
    Staged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub loss_model: LossModel,
}

impl SimOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads: Some(threads),
            ..Self::default()
        }
    }
}

/// Mode-level ground truth of a two-arm run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairTruth {
    pub nonvacuum_modes: u64,
    pub clicks_1: u64,
    pub clicks_2: u64,
    pub clicks_12: u64,
}

impl PairTruth {
    fn merge(mut self, o: Self) -> Self {
        self.nonvacuum_modes += o.nonvacuum_modes;
        self.clicks_1 += o.clicks_1;
        self.clicks_2 += o.clicks_2;
        self.clicks_12 += o.clicks_12;
        self
    }
}

/// Mode-level ground truth of a heralded split run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HbtTruth {
    pub nonvacuum_modes: u64,
    pub heralds: u64,
    pub heralded_2: u64,
    pub heralded_3: u64,
    pub heralded_23: u64,
}

impl HbtTruth {
    fn merge(mut self, o: Self) -> Self {
        self.nonvacuum_modes += o.nonvacuum_modes;
        self.heralds += o.heralds;
        self.heralded_2 += o.heralded_2;
        self.heralded_3 += o.heralded_3;
        self.heralded_23 += o.heralded_23;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSimulation {
    pub herald: TimeTagStream,
    pub partner: TimeTagStream,
    pub truth: PairTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtSimulation {
    pub herald: TimeTagStream,
    pub split_2: TimeTagStream,
    pub split_3: TimeTagStream,
    pub truth: HbtTruth,
}

/// Chunk length in picoseconds for a run of `duration_ps`.
fn chunk_len_ps(duration_ps: u64) -> u64 {
    MIN_CHUNK_PS.max(duration_ps.div_ceil(MAX_CHUNKS))
}

struct Chunk {
    index: u64,
    start: u64,
    len: u64,
}

fn chunks(duration_ps: u64) -> Vec<Chunk> {
    let len = chunk_len_ps(duration_ps);
    let n = duration_ps.div_ceil(len).max(1);
    (0..n)
        .map(|index| {
            let start = index * len;
            Chunk {
                index,
                start,
                len: len.min(duration_ps - start),
            }
        })
        .collect()
}

/// Per-channel timing and noise, converted to picoseconds.
struct ChannelTiming {
    delay_ps: i64,
    jitter: Option<Normal<f64>>,
    noise_rate_per_ps: f64,
    dead_time_ps: u64,
}

impl ChannelTiming {
    fn new(ch: &DetectorChannel, background: f64) -> Result<Self> {
        let jitter_ps = ch.jitter_sigma * PS_PER_S;
        Ok(Self {
            delay_ps: seconds_to_ps(ch.delay),
            jitter: if jitter_ps > 0.0 {
                Some(Normal::new(0.0, jitter_ps).map_err(|e| Error::InvalidInput(e.to_string()))?)
            } else {
                None
            },
            noise_rate_per_ps: (ch.dark_rate + background) / PS_PER_S,
            dead_time_ps: seconds_to_ps(ch.dead_time) as u64,
        })
    }

    fn stamp(&self, emission_ps: i64, rng: &mut ChaCha8Rng) -> i64 {
        let jitter = self.jitter.map_or(0.0, |n| n.sample(rng));
        emission_ps + self.delay_ps + jitter.round() as i64
    }
}

/// Photon thinning for one detector.
#[derive(Clone, Copy)]
struct Thinning {
    t_chan: f64,
    eta_d: f64,
    model: LossModel,
}

impl Thinning {
    fn new(ch: &DetectorChannel, model: LossModel) -> Self {
        Self {
            t_chan: ch.t_chan,
            eta_d: ch.eta_d,
            model,
        }
    }

    /// Whether a click detector fires on `n` incident photons.
    fn clicks(&self, n: u64, rng: &mut ChaCha8Rng) -> bool {
        if n == 0 {
            return false;
        }
        match self.model {
            LossModel::Merged => bernoulli_any(n, self.t_chan * self.eta_d, rng),
            LossModel::Staged => {
                let transmitted = binomial(n, self.t_chan, rng);
                bernoulli_any(transmitted, self.eta_d, rng)
            }
        }
    }
}

/// True with probability `1 - (1 - p)^n`.
fn bernoulli_any(n: u64, p: f64, rng: &mut ChaCha8Rng) -> bool {
    if n == 0 || p <= 0.0 {
        return false;
    }
    if p >= 1.0 {
        return true;
    }
    let miss = ((n as f64) * (-p).ln_1p()).exp();
    rng.random::<f64>() >= miss
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p in (0,1)").sample(rng)
    }
}

/// Pair emission process restricted to non-vacuum modes.
struct ModeSource {
    gap: Option<Exp<f64>>,
    /// `ln(zeta)`, the log of the per-photon continuation probability.
    ln_zeta: f64,
}

impl ModeSource {
    fn new(src: &SourceParams) -> Result<Self> {
        let sq = SqueezeParam::new(src.r)?;
        let rate_per_ps = src.mode_rate * sq.zeta() / PS_PER_S;
        if rate_per_ps <= 0.0 {
            return Ok(Self {
                gap: None,
                ln_zeta: f64::NEG_INFINITY,
            });
        }
        let gap = Exp::new(rate_per_ps).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Self {
            gap: Some(gap),
            ln_zeta: (-sq.one_minus_zeta()).ln_1p(),
        })
    }

    /// `n - 1 ~ Geometric(1 - zeta)` by inversion, which stays exact when
    /// `1 - zeta` is far below machine epsilon.
    fn extra_photons(&self, rng: &mut ChaCha8Rng) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        (u.ln() / self.ln_zeta).floor() as u64
    }

    /// Calls `emit(time_ps, n)` for every non-vacuum mode in the chunk.
    fn for_each_mode(&self, chunk: &Chunk, rng: &mut ChaCha8Rng, mut emit: impl FnMut(i64, u64, &mut ChaCha8Rng)) {
        let Some(gap) = &self.gap else {
            return;
        };
        let end = chunk.len as f64;
        let mut t = gap.sample(rng);
        while t < end {
            let n = self.extra_photons(rng).saturating_add(1);
            emit(chunk.start as i64 + t as i64, n, rng);
            t += gap.sample(rng);
        }
    }
}

fn push_tag(out: &mut Vec<u64>, t: i64) {
    if t >= 0 {
        out.push(t as u64);
    }
}

fn noise_tags(rate_per_ps: f64, chunk: &Chunk, rng: &mut ChaCha8Rng, out: &mut Vec<u64>) {
    if rate_per_ps <= 0.0 {
        return;
    }
    let gap = Exp::new(rate_per_ps).expect("positive rate");
    let end = chunk.len as f64;
    let mut t = gap.sample(rng);
    while t < end {
        out.push(chunk.start + t as u64);
        t += gap.sample(rng);
    }
}

fn run_parallel<T: Send>(threads: Option<usize>, job: impl Fn() -> T + Send + Sync) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn finish_stream(channel: u8, chunks: Vec<Vec<u64>>, duration_ps: u64, dead_time_ps: u64) -> TimeTagStream {
    let tags: Vec<u64> = chunks.into_iter().flatten().collect();
    let mut stream = TimeTagStream::from_unsorted(channel, tags, duration_ps);
    stream.apply_dead_time(dead_time_ps);
    stream
}

/// Simulates heralding (`ch1`) and partner (`ch2`) streams of a pair source.
pub fn simulate_pair_streams(
    src: &SourceParams,
    ch1: &DetectorChannel,
    ch2: &DetectorChannel,
    seed: SimSeed,
    opts: SimOptions,
) -> Result<PairSimulation> {
    src.validate()?;
    ch1.validate()?;
    ch2.validate()?;
    let duration_ps = seconds_to_ps(src.duration) as u64;
    let source = ModeSource::new(src)?;
    let timing = [
        ChannelTiming::new(ch1, src.background_rate_per_arm)?,
        ChannelTiming::new(ch2, src.background_rate_per_arm)?,
    ];
    let thin = [Thinning::new(ch1, opts.loss_model), Thinning::new(ch2, opts.loss_model)];
    let chunk_list = chunks(duration_ps);

    let per_chunk = run_parallel(opts.threads, || {
        chunk_list
            .par_iter()
            .map(|chunk| {
                let mut rng = seed.substream(StreamRole::Source, chunk.index);
                let mut out = [Vec::new(), Vec::new()];
                let mut truth = PairTruth::default();
                source.for_each_mode(chunk, &mut rng, |t, n, rng| {
                    truth.nonvacuum_modes += 1;
                    let c1 = thin[0].clicks(n, rng);
                    let c2 = thin[1].clicks(n, rng);
                    if c1 {
                        truth.clicks_1 += 1;
                        push_tag(&mut out[0], timing[0].stamp(t, rng));
                    }
                    if c2 {
                        truth.clicks_2 += 1;
                        push_tag(&mut out[1], timing[1].stamp(t, rng));
                    }
                    if c1 && c2 {
                        truth.clicks_12 += 1;
                    }
                });
                for (i, ch) in [HERALD_CHANNEL, PARTNER_CHANNEL].into_iter().enumerate() {
                    let mut noise_rng = seed.substream(StreamRole::Noise(ch), chunk.index);
                    noise_tags(timing[i].noise_rate_per_ps, chunk, &mut noise_rng, &mut out[i]);
                }
                (out, truth)
            })
            .collect::<Vec<_>>()
    })?;

    let mut truth = PairTruth::default();
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for ([a, b], t) in per_chunk {
        truth = truth.merge(t);
        s1.push(a);
        s2.push(b);
    }
    Ok(PairSimulation {
        herald: finish_stream(HERALD_CHANNEL, s1, duration_ps, timing[0].dead_time_ps),
        partner: finish_stream(PARTNER_CHANNEL, s2, duration_ps, timing[1].dead_time_ps),
        truth,
    })
}

/// Simulates a heralded split measurement: `herald` watches arm A; arm B is
/// routed photon-by-photon to `ch2` with probability `split_ratio`, else to
/// `ch3`. Background of arm B is divided between the split detectors in the
/// same ratio.
pub fn simulate_hbt_streams(
    src: &SourceParams,
    herald: &DetectorChannel,
    split_ratio: f64,
    ch2: &DetectorChannel,
    ch3: &DetectorChannel,
    seed: SimSeed,
    opts: SimOptions,
) -> Result<HbtSimulation> {
    src.validate()?;
    herald.validate()?;
    ch2.validate()?;
    ch3.validate()?;
    if !(split_ratio.is_finite() && split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::Domain {
            name: "split_ratio",
            value: split_ratio,
            expected: "(0, 1)",
        });
    }
    let duration_ps = seconds_to_ps(src.duration) as u64;
    let source = ModeSource::new(src)?;
    let bg = src.background_rate_per_arm;
    let timing = [
        ChannelTiming::new(herald, bg)?,
        ChannelTiming::new(ch2, bg * split_ratio)?,
        ChannelTiming::new(ch3, bg * (1.0 - split_ratio))?,
    ];
    let thin = [
        Thinning::new(herald, opts.loss_model),
        Thinning::new(ch2, opts.loss_model),
        Thinning::new(ch3, opts.loss_model),
    ];
    let chunk_list = chunks(duration_ps);
    let ids = [HERALD_CHANNEL, PARTNER_CHANNEL, SPLIT_CHANNEL];

    let per_chunk = run_parallel(opts.threads, || {
        chunk_list
            .par_iter()
            .map(|chunk| {
                let mut rng = seed.substream(StreamRole::Source, chunk.index);
                let mut out = [Vec::new(), Vec::new(), Vec::new()];
                let mut truth = HbtTruth::default();
                source.for_each_mode(chunk, &mut rng, |t, n, rng| {
                    truth.nonvacuum_modes += 1;
                    let c1 = thin[0].clicks(n, rng);
                    let to_2 = binomial(n, split_ratio, rng);
                    let c2 = thin[1].clicks(to_2, rng);
                    let c3 = thin[2].clicks(n - to_2, rng);
                    for (i, fired) in [c1, c2, c3].into_iter().enumerate() {
                        if fired {
                            push_tag(&mut out[i], timing[i].stamp(t, rng));
                        }
                    }
                    if c1 {
                        truth.heralds += 1;
                        truth.heralded_2 += c2 as u64;
                        truth.heralded_3 += c3 as u64;
                        truth.heralded_23 += (c2 && c3) as u64;
                    }
                });
                for (i, &ch) in ids.iter().enumerate() {
                    let mut noise_rng = seed.substream(StreamRole::Noise(ch), chunk.index);
                    noise_tags(timing[i].noise_rate_per_ps, chunk, &mut noise_rng, &mut out[i]);
                }
                (out, truth)
            })
            .collect::<Vec<_>>()
    })?;

    let mut truth = HbtTruth::default();
    let mut parts: [Vec<Vec<u64>>; 3] = Default::default();
    for (out, t) in per_chunk {
        truth = truth.merge(t);
        for (dst, v) in parts.iter_mut().zip(out) {
            dst.push(v);
        }
    }
    let [p1, p2, p3] = parts;
    Ok(HbtSimulation {
        herald: finish_stream(ids[0], p1, duration_ps, timing[0].dead_time_ps),
        split_2: finish_stream(ids[1], p2, duration_ps, timing[1].dead_time_ps),
        split_3: finish_stream(ids[2], p3, duration_ps, timing[2].dead_time_ps),
        truth,
    })
}
