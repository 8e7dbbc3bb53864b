use crate::error::{check_nonnegative, check_positive, check_probability, Error, Result};
use crate::fock::{conditional_unchecked, squeeze_to_zeta};

/// `dP(D2|D1) / d eta2` at fixed `eta1` and `r`.
pub fn conditional_eta2_derivative(eta1_tot: f64, eta2_tot: f64, r: f64) -> Result<f64> {
    let eta1 = check_probability("eta1_tot", eta1_tot)?;
    let eta2 = check_probability("eta2_tot", eta2_tot)?;
    check_nonnegative("r", r)?;
    if eta1 == 0.0 {
        return Err(Error::Domain {
            name: "eta1_tot",
            value: eta1,
            expected: "(0, 1]",
        });
    }
    let zeta = squeeze_to_zeta(r)?;
    let s = 1.0 / r.cosh().powi(2);
    let (a1, a2) = (1.0 - eta1, 1.0 - eta2);
    let bracket = 1.0 / (s + zeta * eta2).powi(2) - a1 / (s + zeta * (1.0 - a1 * a2)).powi(2);
    Ok(s * (s + zeta * eta1) / eta1 * bracket)
}

/// Statistical sigma of `eta2` inferred from a conditional click
/// probability measured with sigma `sigma_p`.
pub fn propagate_sigma_eta(eta1_tot: f64, eta2_tot: f64, r: f64, sigma_p: f64) -> Result<f64> {
    check_positive("r", r)?;
    check_nonnegative("sigma_p", sigma_p)?;
    let d = conditional_eta2_derivative(eta1_tot, eta2_tot, r)?;
    if !(d.abs() >= 1e-300) {
        return Err(Error::Numerical(format!("dP/d eta2 = {d:e} is not invertible")));
    }
    Ok(sigma_p / d.abs())
}

/// Efficiency of the heralded detector that reproduces conditional click
/// probability `p` at the given `eta1` and `r`.
pub fn invert_eta2(eta1_tot: f64, p: f64, r: f64) -> Result<f64> {
    let eta1 = check_probability("eta1_tot", eta1_tot)?;
    let p = check_probability("p", p)?;
    check_nonnegative("r", r)?;
    if eta1 == 0.0 {
        return Err(Error::Domain {
            name: "eta1_tot",
            value: eta1,
            expected: "(0, 1]",
        });
    }
    let zeta = squeeze_to_zeta(r)?;
    let s = 1.0 / r.cosh().powi(2);
    let f = |e2: f64| conditional_unchecked(eta1, e2, zeta, s) - p;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::Domain {
            name: "p",
            value: p,
            expected: "within the range reachable by eta2 in [0, 1]",
        });
    }
    // Newton with a bisection safeguard.
    let mut x = p.clamp(0.0, 1.0);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = conditional_eta2_derivative(eta1, x, r)?;
        let mut next = x - fx / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::conditional_click_prob;

    #[test]
    fn derivative_matches_finite_difference() {
        let (e1, e2, r) = (0.114, 0.099, 0.25);
        let h = 1e-6;
        let fd = (conditional_click_prob(e1, e2 + h, r).unwrap() - conditional_click_prob(e1, e2 - h, r).unwrap())
            / (2.0 * h);
        let d = conditional_eta2_derivative(e1, e2, r).unwrap();
        assert!((d / fd - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_sigma_and_weak_pump() {
        assert_eq!(propagate_sigma_eta(0.3, 0.4, 0.2, 0.0).unwrap(), 0.0);
        // Weak squeezing: P tracks eta2 one-to-one.
        let s = propagate_sigma_eta(0.3, 0.4, 1e-6, 1e-3).unwrap();
        assert!((s - 1e-3).abs() < 1e-8);
        assert!(propagate_sigma_eta(0.3, 0.4, 0.0, 1e-3).is_err());
    }

    #[test]
    fn inversion_round_trips() {
        for &(e1, e2, r) in &[(0.114, 0.099, 0.25), (0.63, 0.57, 0.8), (0.9, 0.01, 0.1)] {
            let p = conditional_click_prob(e1, e2, r).unwrap();
            let back = invert_eta2(e1, p, r).unwrap();
            assert!((back - e2).abs() < 1e-13, "{back} vs {e2}");
        }
        assert!(invert_eta2(0.0, 0.5, 0.1).is_err());
        assert!(invert_eta2(0.3, 1.5, 0.1).is_err());
    }
}
