use serde::{Deserialize, Serialize};

use crate::coincidence::AccidentalRow;
use crate::error::{check_positive, Error, Result};

/// Line `counts = rate * (CW + W2 - dW)` fitted by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccidentalLineFit {
    /// Slope, accidental counts per second of window.
    pub rate: f64,
    pub rate_sigma: f64,
    pub intercept: f64,
    /// Window shortfall of the electronics, seconds.
    pub delta_w: f64,
    pub delta_w_sigma: f64,
    pub r_squared: f64,
}

pub fn accidental_line_fit(scan: &[AccidentalRow], pulse_width_w2: f64) -> Result<AccidentalLineFit> {
    check_positive("pulse_width_w2", pulse_width_w2)?;
    let mut distinct: Vec<f64> = scan.iter().map(|r| r.cw).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Degenerate("accidental fit needs at least 3 distinct windows".into()));
    }
    let n = scan.len() as f64;
    let mx = scan.iter().map(|r| r.cw).sum::<f64>() / n;
    let my = scan.iter().map(|r| r.counts as f64).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for r in scan {
        let (dx, dy) = (r.cw - mx, r.counts as f64 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope > 0.0) {
        return Err(Error::Degenerate(format!("accidental slope {slope} is not positive")));
    }
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    // Wider windows contain the narrower ones, so the counts are nested
    // Poisson sums with Cov(N_i, N_j) = mean at min(cw_i, cw_j). Sandwich
    // covariance of the OLS coefficients under that model.
    let mean_at = |cw: f64| (intercept + slope * cw).max(0.0);
    let (mut b_aa, mut b_ab, mut b_bb) = (0.0, 0.0, 0.0);
    for ri in scan {
        for rj in scan {
            let c = mean_at(ri.cw.min(rj.cw));
            let (ui, uj) = ((ri.cw - mx) / sxx, (rj.cw - mx) / sxx);
            // OLS weights: slope = sum u_i y_i, intercept = sum (1/n - mx u_i) y_i.
            let (vi, vj) = (1.0 / n - mx * ui, 1.0 / n - mx * uj);
            b_aa += ui * uj * c;
            b_ab += ui * vj * c;
            b_bb += vi * vj * c;
        }
    }
    let (var_slope, var_icpt, cov) = (b_aa, b_bb, b_ab);
    // dW = W2 - b/a
    let (ga, gb) = (intercept / (slope * slope), -1.0 / slope);
    let var_dw = ga * ga * var_slope + gb * gb * var_icpt + 2.0 * ga * gb * cov;
    Ok(AccidentalLineFit {
        rate: slope,
        rate_sigma: var_slope.sqrt(),
        intercept,
        delta_w: pulse_width_w2 - intercept / slope,
        delta_w_sigma: var_dw.max(0.0).sqrt(),
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(f: impl Fn(f64) -> u64, cws: &[f64]) -> Vec<AccidentalRow> {
        cws.iter().map(|&cw| AccidentalRow { cw, counts: f(cw) }).collect()
    }

    #[test]
    fn recovers_exact_line() {
        // 1e11 counts per second of window so counts stay integral.
        let rate = 1e11;
        let cws = [10e-9, 20e-9, 30e-9, 40e-9, 50e-9];
        let scan = rows(|cw| (rate * (cw + 20e-9 - 12e-9)).round() as u64, &cws);
        let fit = accidental_line_fit(&scan, 20e-9).unwrap();
        assert!((fit.rate / rate - 1.0).abs() < 1e-12);
        assert!((fit.delta_w - 12e-9).abs() < 1e-18);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.delta_w_sigma > 0.0);
    }

    #[test]
    fn sigma_scales_as_inverse_sqrt_counts() {
        let cws = [10e-9, 20e-9, 30e-9, 40e-9, 50e-9];
        let line = |rate: f64| rows(move |cw| (rate * (cw + 8e-9)).round() as u64, &cws);
        let lo = accidental_line_fit(&line(1e10), 20e-9).unwrap();
        let hi = accidental_line_fit(&line(1e12), 20e-9).unwrap();
        assert!((lo.delta_w_sigma / hi.delta_w_sigma / 10.0 - 1.0).abs() < 1e-3);
        assert!((hi.rate_sigma / hi.rate - lo.rate_sigma / lo.rate / 10.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        let flat = rows(|_| 0, &[10e-9, 20e-9, 30e-9]);
        assert!(accidental_line_fit(&flat, 20e-9).is_err());
        let two = rows(|cw| (cw * 1e10) as u64, &[10e-9, 10e-9, 20e-9]);
        assert!(accidental_line_fit(&two, 20e-9).is_err());
    }
}
