use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, check_probability, Error, Result};

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub sigma: f64,
}

impl Measurement {
    pub fn new(value: f64, sigma: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain {
                name: "value",
                value,
                expected: "finite",
            });
        }
        check_nonnegative("sigma", sigma)?;
        Ok(Self { value, sigma })
    }

    /// Poisson-counted rate: `n / t` with sigma `sqrt(n) / t`.
    pub fn counted_rate(counts: u64, duration: f64) -> Result<Self> {
        check_positive("duration", duration)?;
        let n = counts as f64;
        Ok(Self {
            value: n / duration,
            sigma: n.sqrt() / duration,
        })
    }

    pub fn relative(&self) -> f64 {
        self.sigma / self.value.abs()
    }
}

/// Ideal heralded estimate `C12 / C1` with binomial sigma.
pub fn klyshko_efficiency(c12: f64, c_herald: u64) -> Result<Measurement> {
    if c_herald == 0 {
        return Err(Error::Degenerate("no heralding events".into()));
    }
    let n = c_herald as f64;
    if !c12.is_finite() || c12 > n {
        return Err(Error::Domain {
            name: "c12",
            value: c12,
            expected: "<= heralding singles",
        });
    }
    let eta = c12 / n;
    let clamped = eta.clamp(0.0, 1.0);
    Ok(Measurement {
        value: eta,
        sigma: (clamped * (1.0 - clamped) / n).sqrt(),
    })
}

/// Substitution estimate `R_obs / R_exp` with both rate uncertainties
/// propagated.
pub fn conventional_efficiency(r_obs: Measurement, r_exp: Measurement) -> Result<Measurement> {
    check_nonnegative("r_obs", r_obs.value)?;
    check_positive("r_exp", r_exp.value)?;
    let eta = r_obs.value / r_exp.value;
    let a = r_obs.sigma / r_exp.value;
    let b = eta * r_exp.sigma / r_exp.value;
    Ok(Measurement {
        value: eta,
        sigma: a.hypot(b),
    })
}

/// Transmission of the source optics given the total heralded efficiency,
/// the detector efficiency from a conventional calibration and the
/// free-space loss between them.
pub fn infer_source_transmission(eta_tot: f64, eta_conv: f64, free_space_loss: f64) -> Result<f64> {
    let eta_tot = check_probability("eta_tot", eta_tot)?;
    let eta_conv = check_probability("eta_conv", eta_conv)?;
    if eta_conv == 0.0 {
        return Err(Error::Domain {
            name: "eta_conv",
            value: eta_conv,
            expected: "(0, 1]",
        });
    }
    let loss = check_probability("free_space_loss", free_space_loss)?;
    if loss >= 1.0 {
        return Err(Error::Domain {
            name: "free_space_loss",
            value: loss,
            expected: "[0, 1)",
        });
    }
    if eta_tot > eta_conv {
        return Err(Error::Domain {
            name: "eta_tot",
            value: eta_tot,
            expected: "<= eta_conv",
        });
    }
    Ok(eta_tot / (eta_conv * (1.0 - loss)))
}

/// Fractional loss of an optical channel from trap-detector readings with
/// and without the channel in the beam.
pub fn channel_loss_from_trap(through_channel: f64, incident: f64) -> Result<f64> {
    if !(incident.is_finite() && incident != 0.0) {
        return Err(Error::Domain {
            name: "incident",
            value: incident,
            expected: "finite and nonzero",
        });
    }
    let ratio = through_channel / incident;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Domain {
            name: "through_channel",
            value: through_channel,
            expected: "same sign as incident, not larger in magnitude",
        });
    }
    Ok(1.0 - ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn klyshko_ratio() {
        let m = klyshko_efficiency(57.0, 100).unwrap();
        assert_eq!(m.value, 0.57);
        assert!((m.sigma - (0.57f64 * 0.43 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(klyshko_efficiency(0.0, 10).unwrap().value, 0.0);
        assert!(klyshko_efficiency(3.0, 0).is_err());
        assert!(klyshko_efficiency(11.0, 10).is_err());
    }

    #[test]
    fn conventional_ratio() {
        let exact = |v| Measurement::new(v, 0.0).unwrap();
        assert_eq!(conventional_efficiency(exact(6.37e5), exact(1e6)).unwrap().value, 0.637);
        assert_eq!(conventional_efficiency(exact(5.75e5), exact(1e6)).unwrap().value, 0.575);
        assert_eq!(conventional_efficiency(exact(3.0), exact(3.0)).unwrap().value, 1.0);
        assert!(conventional_efficiency(exact(1.0), exact(0.0)).is_err());
        let m = conventional_efficiency(Measurement::new(50.0, 3.0).unwrap(), Measurement::new(100.0, 4.0).unwrap())
            .unwrap();
        assert!((m.sigma - 0.5 * (0.06f64.powi(2) + 0.04f64.powi(2)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn transmission() {
        assert_eq!(infer_source_transmission(0.5, 0.5, 0.0).unwrap(), 1.0);
        assert!(infer_source_transmission(0.7, 0.6, 0.0).is_err());
        assert!(infer_source_transmission(0.1, 0.0, 0.0).is_err());
        assert!(infer_source_transmission(0.1, 0.5, 1.0).is_err());
    }

    #[test]
    fn trap_loss() {
        let l = channel_loss_from_trap(-3.112, -3.136).unwrap();
        assert!((l - 0.0077).abs() < 5e-5);
        assert!(channel_loss_from_trap(3.2, 3.1).is_err());
        assert!(channel_loss_from_trap(1.0, 0.0).is_err());
    }
}
