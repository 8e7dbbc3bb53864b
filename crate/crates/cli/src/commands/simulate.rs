use std::path::PathBuf;

use clap::Args;
use klyshko_core::calibration::{klyshko_efficiency, Measurement};
use klyshko_core::coincidence::{count_coincidences, delay_histogram};
use klyshko_core::fock::conditional_click_prob;
use klyshko_core::io::{write_histogram_file, write_json, CountsRecord};
use klyshko_core::sim::{simulate_pair_streams, PairTruth};
use klyshko_core::tags::{read_tags_file, write_tags_file};
use klyshko_core::{Error, TimeTagStream};
use serde::Serialize;

use super::Context;
use crate::error::Result;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Count an existing tag CSV (channels 1 and 2) instead of simulating.
    #[arg(long, value_name = "CSV")]
    pub tags: Option<PathBuf>,
    /// Half-range of the delay histogram, in clock cycles.
    #[arg(long, default_value_t = 40)]
    pub max_lag: i64,
}

#[derive(Serialize)]
struct SimulateResults {
    duration_s: f64,
    truth: Option<PairTruth>,
    d2_given_d1: CountsRecord,
    d1_given_d2: CountsRecord,
    eta2_heralded: Measurement,
    eta1_heralded: Measurement,
    /// Model `P(D2|D1)` and `P(D1|D2)` for the configured source.
    analytic: Option<[f64; 2]>,
    histogram_peak_lag: i64,
}

fn channel(
    streams: &mut std::collections::BTreeMap<u8, TimeTagStream>,
    id: u8,
    path: &std::path::Path,
) -> Result<TimeTagStream> {
    streams.remove(&id).ok_or_else(|| {
        Error::Parse {
            path: path.to_path_buf(),
            message: format!("no tags on channel {id}"),
        }
        .into()
    })
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut out = ctx.outputs();
    let (herald, partner, truth, analytic) = match &args.tags {
        Some(path) => {
            let mut streams = read_tags_file(path, None)?;
            let herald = channel(&mut streams, 1, path)?;
            let partner = channel(&mut streams, 2, path)?;
            (herald, partner, None, None)
        }
        None => {
            let src = cfg.source.params(cfg.source.r, cfg.source.duration);
            let (d1, d2) = (&cfg.channels.d1, &cfg.channels.d2);
            let sim = simulate_pair_streams(&src, d1, d2, ctx.seed(0), ctx.sim_options())?;
            write_tags_file(&out.file("tags.csv"), &[&sim.herald, &sim.partner])?;
            let analytic = [
                conditional_click_prob(d1.eta_tot(), d2.eta_tot(), src.r)?,
                conditional_click_prob(d2.eta_tot(), d1.eta_tot(), src.r)?,
            ];
            (sim.herald, sim.partner, Some(sim.truth), Some(analytic))
        }
    };

    let fwd = count_coincidences(&herald, &partner, &cfg.coincidence)?;
    let rev = count_coincidences(&partner, &herald, &cfg.coincidence.reversed())?;
    let hist = delay_histogram(&herald, &partner, cfg.coincidence.clock_period, args.max_lag)?;
    let (fwd_rec, rev_rec) = (CountsRecord::from(&fwd), CountsRecord::from(&rev));
    write_json(&out.file("counts.json"), &fwd_rec)?;
    write_json(&out.file("counts_reversed.json"), &rev_rec)?;
    write_histogram_file(&out.file("fig4c_hist.csv"), &hist)?;

    let results = SimulateResults {
        duration_s: herald.duration_s(),
        truth,
        d2_given_d1: fwd_rec,
        d1_given_d2: rev_rec,
        eta2_heralded: klyshko_efficiency(fwd.effective_coinc, fwd.singles_1)?,
        eta1_heralded: klyshko_efficiency(rev.effective_coinc, rev.singles_1)?,
        analytic,
        histogram_peak_lag: hist.peak_lag(),
    };
    out.finish("simulate", cfg, &results)
}
