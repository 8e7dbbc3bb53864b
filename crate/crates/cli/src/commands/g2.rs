use klyshko_core::coincidence::triple_counts;
use klyshko_core::fock::{heralded_fidelity_from_g2, heralded_g2_analytic, squeeze_to_zeta, truncation_nmax};
use klyshko_core::io::Table;
use klyshko_core::sim::{simulate_hbt_streams, HbtTruth};
use klyshko_core::TripleCounts;
use serde::Serialize;

use super::Context;
use crate::error::Result;

#[derive(Serialize)]
struct G2Row {
    pump_dac: f64,
    r: f64,
    /// `None` when a split channel saw no heralded clicks.
    g2: Option<f64>,
    sigma: Option<f64>,
    analytic: f64,
    fidelity: Option<f64>,
    counts: TripleCounts,
    truth: HbtTruth,
}

#[derive(Serialize)]
struct G2Results {
    split_ratio: f64,
    duration_s: f64,
    rows: Vec<G2Row>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let ch = &cfg.channels;
    let split = cfg.g2.split_ratio;
    let mut table = Table::new([
        "pump_dac", "r", "g2", "sigma", "analytic", "fidelity", "n1", "n12", "n13", "n123",
    ]);
    let mut rows = Vec::new();
    for (i, &dac) in cfg.g2.pump_dac.iter().enumerate() {
        let r = cfg.squeezing(dac);
        let src = cfg.source.params(r, cfg.g2.duration);
        let sim = simulate_hbt_streams(&src, &ch.d1, split, &ch.d2, &ch.d3, ctx.seed(i as u64), ctx.sim_options())?;
        let counts = triple_counts(&sim.herald, &sim.split_2, &sim.split_3, &cfg.coincidence)?;
        let measured = counts.g2().ok();
        let fidelity = measured.map(|(g, _)| heralded_fidelity_from_g2(g)).transpose()?;
        let zeta = squeeze_to_zeta(r)?;
        let analytic = heralded_g2_analytic(
            zeta,
            ch.d1.eta_tot(),
            split,
            ch.d2.eta_tot(),
            ch.d3.eta_tot(),
            truncation_nmax(zeta)?,
        )?;
        let (g2, sigma) = measured.map_or((f64::NAN, f64::NAN), |m| m);
        table.push(vec![
            dac,
            r,
            g2,
            sigma,
            analytic,
            fidelity.unwrap_or(f64::NAN),
            counts.n1 as f64,
            counts.n12 as f64,
            counts.n13 as f64,
            counts.n123 as f64,
        ])?;
        rows.push(G2Row {
            pump_dac: dac,
            r,
            g2: measured.map(|m| m.0),
            sigma: measured.map(|m| m.1),
            analytic,
            fidelity,
            counts,
            truth: sim.truth,
        });
    }
    let mut out = ctx.outputs();
    table.write_file(&out.file("fig6_g2.csv"))?;
    let results = G2Results {
        split_ratio: split,
        duration_s: cfg.g2.duration,
        rows,
    };
    out.finish("g2", cfg, &results)
}
