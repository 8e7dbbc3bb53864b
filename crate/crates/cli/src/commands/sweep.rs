use klyshko_core::calibration::{model_probabilities, SweepPoint};
use klyshko_core::coincidence::count_coincidences;
use klyshko_core::io::write_sweep_file;
use klyshko_core::sim::{simulate_pair_streams, PairTruth};
use serde::Serialize;

use super::Context;
use crate::error::Result;

#[derive(Serialize)]
struct SweepRow {
    pump_dac: f64,
    r: f64,
    p21_model: f64,
    p12_model: f64,
    truth: PairTruth,
}

#[derive(Serialize)]
struct SweepResults {
    eta_tot_1: f64,
    eta_tot_2: f64,
    k_factor: f64,
    mu: f64,
    duration_s: f64,
    rows: Vec<SweepRow>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let (d1, d2) = (&cfg.channels.d1, &cfg.channels.d2);
    let mut points = Vec::with_capacity(cfg.sweep.pump_dac.len());
    let mut rows = Vec::with_capacity(points.capacity());
    for (i, &dac) in cfg.sweep.pump_dac.iter().enumerate() {
        let r = cfg.squeezing(dac);
        let src = cfg.source.params(r, cfg.sweep.duration);
        let sim = simulate_pair_streams(&src, d1, d2, ctx.seed(i as u64), ctx.sim_options())?;
        let fwd = count_coincidences(&sim.herald, &sim.partner, &cfg.coincidence)?;
        let rev = count_coincidences(&sim.partner, &sim.herald, &cfg.coincidence.reversed())?;
        points.push(SweepPoint::from_counts(dac, cfg.sweep.duration, &fwd, &rev));
        let (p21_model, p12_model) =
            model_probabilities(d1.eta_tot(), d2.eta_tot(), cfg.source.k_factor, cfg.source.mu, dac)?;
        rows.push(SweepRow {
            pump_dac: dac,
            r,
            p21_model,
            p12_model,
            truth: sim.truth,
        });
    }
    let mut out = ctx.outputs();
    write_sweep_file(&out.file("sweep.csv"), &points)?;
    let results = SweepResults {
        eta_tot_1: d1.eta_tot(),
        eta_tot_2: d2.eta_tot(),
        k_factor: cfg.source.k_factor,
        mu: cfg.source.mu,
        duration_s: cfg.sweep.duration,
        rows,
    };
    out.finish("sweep", cfg, &results)
}
