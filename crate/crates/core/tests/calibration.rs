use klyshko_core::calibration::{
    combine_budget, conditional_eta2_derivative, conventional_efficiency, klyshko_efficiency, BudgetComponent,
    Measurement, fit_observations, fit_sweep, invert_eta2, model_probabilities, propagate_sigma_eta,
    FitOptions, SweepObservation, SweepPoint, DEFAULT_MU,
};
use klyshko_core::fock::conditional_click_prob;

const HERALDS: f64 = 2e5;

/// Noiseless observations with binomial weights for a fixed herald count.
fn synthetic(eta1: f64, eta2: f64, k: f64, r_values: &[f64]) -> Vec<SweepObservation> {
    r_values
        .iter()
        .map(|&r| {
            let dac = (r / DEFAULT_MU).powi(2) / k;
            let (p21, p12) = model_probabilities(eta1, eta2, k, DEFAULT_MU, dac).unwrap();
            SweepObservation {
                pump_dac: dac,
                p21,
                sigma21: (p21 * (1.0 - p21) / HERALDS).sqrt(),
                p12,
                sigma12: (p12 * (1.0 - p12) / HERALDS).sqrt(),
            }
        })
        .collect()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn noiseless_sweep_is_recovered_exactly() {
    for &(e1, e2, k) in &[(0.114, 0.099, 1.0), (0.63, 0.57, 2.5e-3), (0.9, 0.2, 40.0)] {
        let obs = synthetic(e1, e2, k, &grid(0.05, 0.8, 10));
        let fit = fit_observations(&obs, &FitOptions::default()).unwrap();
        assert!((fit.eta_tot_1 - e1).abs() < 1e-8, "{fit:?}");
        assert!((fit.eta_tot_2 - e2).abs() < 1e-8);
        assert!((fit.k_factor / k - 1.0).abs() < 1e-7);
        assert!(!fit.ill_conditioned, "{:?}", fit.condition_per_direction);
    }
}

#[test]
fn near_linear_sweep_is_flagged() {
    let wide = fit_observations(&synthetic(0.114, 0.099, 1.0, &grid(0.05, 0.8, 8)), &FitOptions::default()).unwrap();
    let narrow = fit_observations(&synthetic(0.114, 0.099, 1.0, &grid(0.2, 0.3, 8)), &FitOptions::default()).unwrap();
    println!(
        "wide: joint {:.3e} per-direction {:?}; narrow: joint {:.3e} per-direction {:?}",
        wide.condition_joint, wide.condition_per_direction, narrow.condition_joint, narrow.condition_per_direction
    );
    assert!(!wide.ill_conditioned);
    assert!(narrow.ill_conditioned);
}

#[test]
fn covariance_is_symmetric_positive() {
    let fit = fit_observations(&synthetic(0.3, 0.4, 0.01, &grid(0.1, 0.7, 6)), &FitOptions::default()).unwrap();
    let c = fit.covariance;
    for i in 0..3 {
        assert!(c[i][i] > 0.0);
        for j in 0..3 {
            assert_eq!(c[i][j], c[j][i]);
            assert!(c[i][j].abs() <= (c[i][i] * c[j][j]).sqrt() * (1.0 + 1e-12));
        }
    }
    assert_eq!(fit.per_point_sigma.len(), 6);
    assert_eq!(fit.residuals.len(), 6);
}

#[test]
fn exchanging_labels_swaps_efficiencies() {
    let points: Vec<SweepPoint> = (1..=6)
        .map(|i| {
            let dac = 1000.0 * i as f64;
            let (p21, p12) = model_probabilities(0.114, 0.099, 1.6e-3, DEFAULT_MU, dac).unwrap();
            let (c1, c2) = (400_000 + 1000 * i as u64, 350_000 + 900 * i as u64);
            SweepPoint {
                pump_dac: dac,
                duration_s: 6.0,
                c1,
                c2,
                c12_raw: (p21 * c1 as f64).round() as u64 + 40 + i as u64,
                c12_acc: 40,
                c21_raw: (p12 * c2 as f64).round() as u64 + 30,
                c21_acc: 31,
            }
        })
        .collect();
    let swapped: Vec<SweepPoint> = points.iter().map(SweepPoint::swapped).collect();
    let a = fit_sweep(&points, &FitOptions::default()).unwrap();
    let b = fit_sweep(&swapped, &FitOptions::default()).unwrap();
    assert!((a.eta_tot_1 - b.eta_tot_2).abs() < 1e-10 * a.eta_tot_1);
    assert!((a.eta_tot_2 - b.eta_tot_1).abs() < 1e-10 * a.eta_tot_2);
    assert!((a.k_factor / b.k_factor - 1.0).abs() < 1e-9);
    assert!((a.chi2 - b.chi2).abs() < 1e-8 * a.chi2.max(1e-12));
}

#[test]
fn analytic_sigma_matches_finite_difference_inversion() {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let e1 = 0.05 + 0.9 * i as f64 / 9.0;
            let e2 = 0.05 + 0.9 * j as f64 / 9.0;
            let r = 0.05 + 0.1 * ((i + j) % 10) as f64;
            let sigma_p = 1e-3;
            let analytic = propagate_sigma_eta(e1, e2, r, sigma_p).unwrap();
            let p = conditional_click_prob(e1, e2, r).unwrap();
            let h = 1e-6;
            let d_eta_dp = (invert_eta2(e1, p + h, r).unwrap() - invert_eta2(e1, p - h, r).unwrap()) / (2.0 * h);
            let fd = d_eta_dp.abs() * sigma_p;
            worst = worst.max((analytic / fd - 1.0).abs());
        }
    }
    assert!(worst < 1e-6, "worst relative mismatch {worst:e}");
}

#[test]
fn operating_point_derivative_matches_finite_difference() {
    let d = conditional_eta2_derivative(0.114, 0.099, 0.25).unwrap();
    let h = 1e-7;
    let fd = (conditional_click_prob(0.114, 0.099 + h, 0.25).unwrap()
        - conditional_click_prob(0.114, 0.099 - h, 0.25).unwrap())
        / (2.0 * h);
    assert!((d / fd - 1.0).abs() < 1e-6);
    assert_eq!(propagate_sigma_eta(0.114, 0.099, 0.25, 0.0).unwrap(), 0.0);
}

#[test]
fn conventional_budget_for_reference_detector() {
    // Detected rate 6.37e4/s against 1e5/s incident gives 0.637.
    let components = [
        BudgetComponent::new("attenuation", 3.51e-6, 1.98e-9),
        BudgetComponent::new("trap detector (V)", -4.51, 9.24e-4),
        BudgetComponent::new("incident rate", 1e5, 1.8e-2),
        BudgetComponent::new("detected rate", 6.37e4, 3.06e2),
    ];
    let budget = combine_budget(&components).unwrap();
    let eta = conventional_efficiency(
        Measurement::new(6.37e4, 0.0).unwrap(),
        Measurement::new(1e5, 0.0).unwrap(),
    )
    .unwrap();
    assert!((eta.value - 0.637).abs() < 1e-15);
    let sigma = budget.combined_sigma(eta.value);
    assert!((sigma / 3.06e-3 - 1.0).abs() < 0.15, "sigma {sigma:e}");
    let sum_sq: f64 = budget.relative_contributions.iter().map(|r| r * r).sum();
    assert!((budget.combined_relative.powi(2) - sum_sq).abs() <= 1e-18);
}

#[test]
fn klyshko_estimator_sigma_is_binomial() {
    let m = klyshko_efficiency(57_000.0, 100_000).unwrap();
    assert_eq!(m.value, 0.57);
    assert!((m.sigma - (0.57f64 * 0.43 / 1e5).sqrt()).abs() < 1e-15);
}
