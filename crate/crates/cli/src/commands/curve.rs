use klyshko_core::fock::{click_curve, ClickCurvePoint};
use klyshko_core::io::Table;
use serde::Serialize;

use super::Context;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct CurveResults {
    eta_tot_1: f64,
    eta_tot_2: f64,
    points: usize,
    first: Option<ClickCurvePoint>,
    last: Option<ClickCurvePoint>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let ch = &ctx.cfg.channels;
    let (e1, e2) = (ch.d1.eta_tot(), ch.d2.eta_tot());
    let grid = ctx.cfg.curve.grid();
    let curve = click_curve(e1, e2, &grid).map_err(CliError::config)?;

    let mut table = Table::new(["r", "zeta", "p_d2_given_d1", "p_d1_given_d2"]);
    for p in &curve {
        table.push(vec![p.r, p.zeta, p.p_d2_given_d1, p.p_d1_given_d2])?;
    }
    let mut out = ctx.outputs();
    table.write_file(&out.file("fig3_curve.csv"))?;
    out.finish(
        "curve",
        &ctx.cfg,
        &CurveResults {
            eta_tot_1: e1,
            eta_tot_2: e2,
            points: curve.len(),
            first: curve.first().copied(),
            last: curve.last().copied(),
        },
    )
}
