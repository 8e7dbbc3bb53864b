use klyshko_core::calibration::{accidental_line_fit, AccidentalLineFit};
use klyshko_core::coincidence::{accidental_scan, AccidentalRow};
use klyshko_core::io::Table;
use klyshko_core::sim::simulate_pair_streams;
use serde::Serialize;

use super::Context;
use crate::error::Result;

#[derive(Serialize)]
struct AccidentalResults {
    rate_1: f64,
    rate_2: f64,
    line: AccidentalLineFit,
    scan: Vec<AccidentalRow>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let src = cfg.source.params(cfg.source.r, cfg.accidentals.duration);
    let sim = simulate_pair_streams(&src, &cfg.channels.d1, &cfg.channels.d2, ctx.seed(0), ctx.sim_options())?;
    let scan = accidental_scan(&sim.herald, &sim.partner, &cfg.coincidence, &cfg.accidentals.cw)?;
    let w2 = cfg.coincidence.pulse_width_w2;
    let line = accidental_line_fit(&scan, w2)?;

    let mut table = Table::new(["cw", "counts", "line"]);
    for row in &scan {
        let predicted = line.intercept + line.rate * row.cw;
        table.push(vec![row.cw, row.counts as f64, predicted])?;
    }
    let mut out = ctx.outputs();
    table.write_file(&out.file("fig7_accidentals.csv"))?;
    let results = AccidentalResults {
        rate_1: sim.herald.rate(),
        rate_2: sim.partner.rate(),
        line,
        scan,
    };
    out.finish("accidentals", cfg, &results)
}
