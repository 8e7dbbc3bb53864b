//! Joint weighted least-squares fit of both conditional click
//! probabilities over a pump-power sweep.
//!
//! The model is `P(D2|D1) = P(eta1, eta2, r)` and `P(D1|D2) = P(eta2, eta1, r)`
//! with `r = mu * sqrt(K * dac)`. Parameters are `(eta1, eta2, K)`. The
//! minimizer is Levenberg-Marquardt with Marquardt diagonal scaling.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::propagation::propagate_sigma_eta;
use crate::coincidence::CoincCounts;
use crate::error::{check_positive, Error, Result};
use crate::fock::{conditional_unchecked, SqueezeParam};

/// Crystal constant relating pump power to squeezing strength.
pub const DEFAULT_MU: f64 = 0.115;

/// Condition number of a correlation matrix above which a fit is reported
/// as ill-conditioned.
pub const ILL_CONDITIONED_THRESHOLD: f64 = 1e6;

/// Counts of one pump setting in both conditioning directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pump_dac: f64,
    pub duration_s: f64,
    pub c1: u64,
    pub c2: u64,
    pub c12_raw: u64,
    pub c12_acc: u64,
    pub c21_raw: u64,
    pub c21_acc: u64,
}

impl SweepPoint {
    /// `d2_given_d1` gates on channel 1, `d1_given_d2` on channel 2.
    pub fn from_counts(pump_dac: f64, duration_s: f64, d2_given_d1: &CoincCounts, d1_given_d2: &CoincCounts) -> Self {
        Self {
            pump_dac,
            duration_s,
            c1: d2_given_d1.singles_1,
            c2: d1_given_d2.singles_1,
            c12_raw: d2_given_d1.raw_coinc,
            c12_acc: d2_given_d1.accidentals,
            c21_raw: d1_given_d2.raw_coinc,
            c21_acc: d1_given_d2.accidentals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("duration_s", self.duration_s)?;
        check_positive("pump_dac", self.pump_dac)?;
        if self.c1 == 0 || self.c2 == 0 {
            return Err(Error::Degenerate(format!("no heralds at pump {}", self.pump_dac)));
        }
        if self.c12_raw > self.c1.min(self.c2) || self.c21_raw > self.c1.min(self.c2) {
            return Err(Error::InvalidInput(format!(
                "coincidences exceed singles at pump {}",
                self.pump_dac
            )));
        }
        for (raw, acc) in [(self.c12_raw, self.c12_acc), (self.c21_raw, self.c21_acc)] {
            let eff = raw as f64 - acc as f64;
            if eff < -3.0 * (acc as f64).sqrt() {
                return Err(Error::NegativeCoincidences {
                    effective: eff,
                    accidentals: acc,
                });
            }
        }
        Ok(())
    }

    /// Accidental-corrected conditional probabilities with binomial sigmas.
    pub fn observation(&self) -> Result<SweepObservation> {
        self.validate()?;
        let ratio = |raw: u64, acc: u64, herald: u64| {
            let n = herald as f64;
            let p = (raw as f64 - acc as f64) / n;
            let q = p.clamp(0.0, 1.0);
            (p, ((q * (1.0 - q)).max(1.0 / n) / n).sqrt())
        };
        let (p21, sigma21) = ratio(self.c12_raw, self.c12_acc, self.c1);
        let (p12, sigma12) = ratio(self.c21_raw, self.c21_acc, self.c2);
        Ok(SweepObservation {
            pump_dac: self.pump_dac,
            p21,
            sigma21,
            p12,
            sigma12,
        })
    }

    /// The same point seen with the channel labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            c1: self.c2,
            c2: self.c1,
            c12_raw: self.c21_raw,
            c12_acc: self.c21_acc,
            c21_raw: self.c12_raw,
            c21_acc: self.c12_acc,
            ..*self
        }
    }
}

/// Measured conditional probabilities at one pump setting.
/// `p21` is `P(D2|D1)`, `p12` is `P(D1|D2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepObservation {
    pub pump_dac: f64,
    pub p21: f64,
    pub sigma21: f64,
    pub p12: f64,
    pub sigma12: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mu: f64,
    /// Starting `(eta1, eta2, K)`; derived from the data when absent.
    pub init: Option<[f64; 3]>,
    pub max_iterations: usize,
    /// Relative parameter step that counts as converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            init: None,
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSigma {
    pub pump_dac: f64,
    pub r: f64,
    pub sigma_eta1: f64,
    pub sigma_eta2: f64,
}

/// Moments of the normalized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Asymptotically chi-square with 2 degrees of freedom under normality.
    pub jarque_bera: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub eta_tot_1: f64,
    pub eta_tot_2: f64,
    pub k_factor: f64,
    pub mu: f64,
    /// Covariance of `(eta1, eta2, K)` from the inverse weighted normal matrix.
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub iterations: usize,
    /// Condition number of the joint parameter correlation matrix.
    pub condition_joint: f64,
    /// Same quantity when each conditioning direction is fitted alone.
    pub condition_per_direction: [f64; 2],
    /// True when any condition number exceeds [`ILL_CONDITIONED_THRESHOLD`].
    pub ill_conditioned: bool,
    pub per_point_sigma: Vec<PointSigma>,
    /// `(observed - model) / sigma` per point, `[D2|D1, D1|D2]`.
    pub residuals: Vec<[f64; 2]>,
    pub diagnostics: ResidualDiagnostics,
}

impl CalibrationFit {
    pub fn sigma(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn median_point_sigma(&self) -> [f64; 2] {
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        [
            med(self.per_point_sigma.iter().map(|p| p.sigma_eta1).collect()),
            med(self.per_point_sigma.iter().map(|p| p.sigma_eta2).collect()),
        ]
    }

    pub fn squeezing_at(&self, pump_dac: f64) -> f64 {
        squeeze_from_dac(self.mu, self.k_factor, pump_dac)
    }
}

/// `r = mu * sqrt(K * dac)`.
pub fn squeeze_from_dac(mu: f64, k: f64, pump_dac: f64) -> f64 {
    mu * (k * pump_dac).sqrt()
}

/// Model `(P(D2|D1), P(D1|D2))` at one pump setting.
pub fn model_probabilities(eta1: f64, eta2: f64, k: f64, mu: f64, pump_dac: f64) -> Result<(f64, f64)> {
    let sq = SqueezeParam::new(squeeze_from_dac(mu, k, pump_dac))?;
    Ok(model_unchecked(eta1, eta2, sq.zeta(), sq.one_minus_zeta()))
}

fn model_unchecked(eta1: f64, eta2: f64, zeta: f64, s: f64) -> (f64, f64) {
    (
        conditional_unchecked(eta1, eta2, zeta, s),
        conditional_unchecked(eta2, eta1, zeta, s),
    )
}

pub fn fit_sweep(points: &[SweepPoint], opts: &FitOptions) -> Result<CalibrationFit> {
    let obs = points.iter().map(SweepPoint::observation).collect::<Result<Vec<_>>>()?;
    fit_observations(&obs, opts)
}

struct Problem<'a> {
    obs: &'a [SweepObservation],
    mu: f64,
}

const LOWER: [f64; 3] = [1e-12, 1e-12, 1e-300];

fn project(p: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(p[0].clamp(LOWER[0], 1.0), p[1].clamp(LOWER[1], 1.0), p[2].max(LOWER[2]))
}

impl Problem<'_> {
    fn model(&self, p: &Vector3<f64>, dac: f64) -> (f64, f64) {
        let r = squeeze_from_dac(self.mu, p[2], dac);
        let (zeta, s) = zeta_s(r);
        model_unchecked(p[0], p[1], zeta, s)
    }

    /// Weighted residuals, two per point.
    fn residuals(&self, p: &Vector3<f64>) -> Vec<f64> {
        self.obs
            .iter()
            .flat_map(|o| {
                let (m21, m12) = self.model(p, o.pump_dac);
                [(o.p21 - m21) / o.sigma21, (o.p12 - m12) / o.sigma12]
            })
            .collect()
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum()
    }

    /// Jacobian of the weighted residuals by central differences, one row
    /// per residual.
    fn jacobian(&self, p: &Vector3<f64>) -> Vec<[f64; 3]> {
        let mut jac = vec![[0.0; 3]; 2 * self.obs.len()];
        for k in 0..3 {
            let h = 1e-6 * p[k].abs().max(LOWER[k]);
            let (mut lo, mut hi) = (*p, *p);
            hi[k] += h;
            lo[k] = (lo[k] - h).max(0.0);
            if k < 2 && hi[k] > 1.0 {
                hi[k] = 1.0;
            }
            let (rh, rl) = (self.residuals(&hi), self.residuals(&lo));
            let span = hi[k] - lo[k];
            for (row, (a, b)) in jac.iter_mut().zip(rh.iter().zip(&rl)) {
                row[k] = (a - b) / span;
            }
        }
        jac
    }
}

fn zeta_s(r: f64) -> (f64, f64) {
    let t = r.tanh();
    (t * t, 1.0 / r.cosh().powi(2))
}

fn normal_matrix(rows: &[[f64; 3]]) -> Matrix3<f64> {
    let mut a = Matrix3::zeros();
    for row in rows {
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] += row[i] * row[j];
            }
        }
    }
    a
}

/// Condition number of the correlation matrix derived from `a^-1`.
fn correlation_condition(a: &Matrix3<f64>) -> f64 {
    let Some(cov) = a.try_inverse() else {
        return f64::INFINITY;
    };
    let d = Vector3::from_fn(|i, _| cov[(i, i)]);
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return f64::INFINITY;
    }
    let corr = Matrix3::from_fn(|i, j| cov[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(corr).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn check_observations(obs: &[SweepObservation]) -> Result<()> {
    if obs.len() < 4 {
        return Err(Error::Degenerate(format!("fit needs at least 4 sweep points, got {}", obs.len())));
    }
    for o in obs {
        check_positive("pump_dac", o.pump_dac)?;
        check_positive("sigma21", o.sigma21)?;
        check_positive("sigma12", o.sigma12)?;
        if !(o.p21.is_finite() && o.p12.is_finite()) {
            return Err(Error::InvalidInput("non-finite conditional probability".into()));
        }
    }
    let lo = obs.iter().map(|o| o.pump_dac).fold(f64::INFINITY, f64::min);
    let hi = obs.iter().map(|o| o.pump_dac).fold(0.0, f64::max);
    if hi <= lo * (1.0 + 1e-9) {
        return Err(Error::Degenerate("all sweep points share one pump setting".into()));
    }
    Ok(())
}

/// Squeezing strength reproducing `p` in `P(eta_h, eta_p, r)`, if any.
fn invert_r(eta_h: f64, eta_p: f64, p: f64) -> Option<f64> {
    let f = |r: f64| {
        let (z, s) = zeta_s(r);
        conditional_unchecked(eta_h, eta_p, z, s) - p
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn initial_guess(obs: &[SweepObservation], mu: f64) -> Vector3<f64> {
    let low = obs.iter().min_by(|a, b| a.pump_dac.total_cmp(&b.pump_dac)).expect("nonempty");
    let eta1 = low.p12.clamp(1e-6, 1.0);
    let eta2 = low.p21.clamp(1e-6, 1.0);
    let mut ks: Vec<f64> = obs
        .iter()
        .flat_map(|o| {
            [invert_r(eta1, eta2, o.p21), invert_r(eta2, eta1, o.p12)]
                .into_iter()
                .flatten()
                .filter(|&r| r > 0.0)
                .map(move |r| r * r / (mu * mu * o.pump_dac))
        })
        .collect();
    let k = if ks.is_empty() {
        let top = obs.iter().map(|o| o.pump_dac).fold(0.0, f64::max);
        0.01 / (mu * mu * top)
    } else {
        ks.sort_by(f64::total_cmp);
        let n = ks.len();
        if n % 2 == 1 {
            ks[n / 2]
        } else {
            0.5 * (ks[n / 2 - 1] + ks[n / 2])
        }
    };
    Vector3::new(eta1, eta2, k)
}

/// Fits `(eta1, eta2, K)` to precomputed conditional probabilities.
pub fn fit_observations(obs: &[SweepObservation], opts: &FitOptions) -> Result<CalibrationFit> {
    check_observations(obs)?;
    check_positive("mu", opts.mu)?;
    let prob = Problem { obs, mu: opts.mu };
    let mut p = match opts.init {
        Some(init) => {
            for (i, v) in init.iter().enumerate() {
                if !(v.is_finite() && *v >= LOWER[i]) || (i < 2 && *v > 1.0) {
                    return Err(Error::InvalidInput(format!("initial guess {init:?} is out of range")));
                }
            }
            Vector3::from(init)
        }
        None => initial_guess(obs, opts.mu),
    };

    let mut cost = prob.cost(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let res = prob.residuals(&p);
        let jac = prob.jacobian(&p);
        let a = normal_matrix(&jac);
        let mut g = Vector3::zeros();
        for (row, r) in jac.iter().zip(&res) {
            for k in 0..3 {
                g[k] += row[k] * r;
            }
        }
        let mut accepted = false;
        while lambda <= 1e16 {
            let mut damped = a;
            for k in 0..3 {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-300);
            }
            let step = damped.cholesky().map(|c| -c.solve(&g));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let trial = project(p + step);
                let trial_cost = prob.cost(&trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let moved = trial - p;
                    let rel = (0..3).map(|k| moved[k].abs() / p[k].abs().max(LOWER[k])).fold(0.0, f64::max);
                    let improved = trial_cost < cost;
                    p = trial;
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel < opts.tolerance || !improved {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            cost,
            best: [p[0], p[1], p[2]],
        });
    }
    summarize(&prob, p, cost, iterations)
}

fn summarize(prob: &Problem, p: Vector3<f64>, cost: f64, iterations: usize) -> Result<CalibrationFit> {
    let jac = prob.jacobian(&p);
    let a = normal_matrix(&jac);
    let cov = a
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular normal matrix at the optimum".into()))?;
    let cov = 0.5 * (cov + cov.transpose());
    let per_dir = [0, 1].map(|d| {
        let rows: Vec<[f64; 3]> = jac.iter().skip(d).step_by(2).copied().collect();
        correlation_condition(&normal_matrix(&rows))
    });
    let condition_joint = correlation_condition(&a);
    let ill_conditioned = condition_joint > ILL_CONDITIONED_THRESHOLD
        || per_dir.iter().any(|&k| k > ILL_CONDITIONED_THRESHOLD);

    let res = prob.residuals(&p);
    let residuals: Vec<[f64; 2]> = res.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let n_res = res.len();
    let dof = n_res.saturating_sub(3);
    let per_point_sigma = prob
        .obs
        .iter()
        .map(|o| {
            let r = squeeze_from_dac(prob.mu, p[2], o.pump_dac);
            Ok(PointSigma {
                pump_dac: o.pump_dac,
                r,
                sigma_eta1: propagate_sigma_eta(p[1], p[0], r, o.sigma12)?,
                sigma_eta2: propagate_sigma_eta(p[0], p[1], r, o.sigma21)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationFit {
        eta_tot_1: p[0],
        eta_tot_2: p[1],
        k_factor: p[2],
        mu: prob.mu,
        covariance: [0, 1, 2].map(|i| [0, 1, 2].map(|j| cov[(i, j)])),
        chi2: cost,
        dof,
        reduced_chi2: if dof > 0 { cost / dof as f64 } else { f64::NAN },
        iterations,
        condition_joint,
        condition_per_direction: per_dir,
        ill_conditioned,
        per_point_sigma,
        residuals,
        diagnostics: residual_diagnostics(&res),
    })
}

fn residual_diagnostics(res: &[f64]) -> ResidualDiagnostics {
    let n = res.len() as f64;
    let mean = res.iter().sum::<f64>() / n;
    let m = |k: i32| res.iter().map(|r| (r - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    ResidualDiagnostics {
        mean,
        std_dev: m2.sqrt(),
        skewness,
        excess_kurtosis,
        jarque_bera: n / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0),
    }
}
