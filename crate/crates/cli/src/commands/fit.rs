use std::path::PathBuf;

use clap::Args;
use klyshko_core::calibration::{
    combine_budget, fit_sweep, klyshko_efficiency, model_probabilities, squeeze_from_dac, CalibrationFit,
    FitOptions, Measurement, UncertaintyBudget,
};
use klyshko_core::io::{read_json, read_sweep_file, write_budget_csv, CountsRecord, Table};
use serde::Serialize;

use super::Context;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV to fit. Defaults to `sweep.csv` in the output directory.
    pub sweep: Option<PathBuf>,
    /// Counts JSON from `simulate`; adds its heralded estimate to the report.
    #[arg(long, value_name = "JSON")]
    pub counts: Option<PathBuf>,
    /// Points in the fitted-curve table.
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,
}

#[derive(Serialize)]
struct FitResults {
    source: PathBuf,
    fit: CalibrationFit,
    sigma: [f64; 3],
    median_point_sigma: [f64; 2],
    budget: UncertaintyBudget,
    heralded_estimate: Option<Measurement>,
}

pub fn run(ctx: &Context, args: &FitArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let path = args.sweep.clone().unwrap_or_else(|| ctx.out_dir.join("sweep.csv"));
    let points = read_sweep_file(&path)?;
    let opts = FitOptions {
        mu: cfg.source.mu,
        ..FitOptions::default()
    };
    let fit = fit_sweep(&points, &opts)?;
    let (e1, e2, k, mu) = (fit.eta_tot_1, fit.eta_tot_2, fit.k_factor, fit.mu);
    let mut out = ctx.outputs();

    let mut data = Table::new([
        "pump_dac", "r", "p21", "sigma21", "p12", "sigma12", "model21", "model12", "sigma_eta1", "sigma_eta2",
    ]);
    let mut sigma = Table::new(["pump_dac", "r", "sigma_eta1", "sigma_eta2"]);
    for (p, ps) in points.iter().zip(&fit.per_point_sigma) {
        let o = p.observation()?;
        let (m21, m12) = model_probabilities(e1, e2, k, mu, o.pump_dac)?;
        data.push(vec![
            o.pump_dac, ps.r, o.p21, o.sigma21, o.p12, o.sigma12, m21, m12, ps.sigma_eta1, ps.sigma_eta2,
        ])?;
        sigma.push(vec![ps.pump_dac, ps.r, ps.sigma_eta1, ps.sigma_eta2])?;
    }
    data.write_file(&out.file("fig5_sweep.csv"))?;
    sigma.write_file(&out.file("fig8_sigma.csv"))?;

    let max_dac = points.iter().map(|p| p.pump_dac).fold(0.0, f64::max);
    let mut model = Table::new(["pump_dac", "r", "model21", "model12"]);
    for i in 0..args.curve_points {
        let dac = 1.1 * max_dac * (i + 1) as f64 / args.curve_points as f64;
        let (m21, m12) = model_probabilities(e1, e2, k, mu, dac)?;
        model.push(vec![dac, squeeze_from_dac(mu, k, dac), m21, m12])?;
    }
    model.write_file(&out.file("fig5_model.csv"))?;

    let budget = combine_budget(&cfg.budget.components).map_err(CliError::config)?;
    let budget_path = out.file("budget.csv");
    let file = std::fs::File::create(&budget_path).map_err(|source| klyshko_core::Error::Io {
        path: budget_path.clone(),
        source,
    })?;
    write_budget_csv(std::io::BufWriter::new(file), &budget)?;

    let heralded_estimate = match &args.counts {
        Some(p) => {
            let c: CountsRecord = read_json(p)?;
            Some(klyshko_efficiency(c.effective, c.singles_1)?)
        }
        None => None,
    };

    if fit.ill_conditioned {
        eprintln!(
            "warning: sweep is close to linear in squeezing; condition numbers {:.2e} / {:?}",
            fit.condition_joint, fit.condition_per_direction
        );
    }
    let results = FitResults {
        source: path,
        sigma: fit.sigma(),
        median_point_sigma: fit.median_point_sigma(),
        fit,
        budget,
        heralded_estimate,
    };
    out.finish("fit", cfg, &results)
}
