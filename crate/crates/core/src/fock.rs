//! Exact click statistics of the two-mode squeezed vacuum in a truncated
//! Fock basis.
//!
//! Every state handled here is diagonal in photon number: the marginal of
//! each mode is thermal with parameter `zeta = tanh^2(r)`, and heralding on
//! a click detector keeps the heralded mode diagonal. A non-number-resolving
//! detector of efficiency `eta` has no-click weight `(1 - eta)^n` on `|n>`.
//!
//! Closed forms are written in terms of `1 - zeta = sech^2(r)` computed
//! directly from `r`, so they stay accurate when `tanh^2(r)` rounds to 1.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_probability, Error, Result};
use crate::summation::{compensated_sum, NeumaierSum};

/// Truncation tolerance on the geometric tail `zeta^(nmax + 1)`.
pub const TRUNCATION_TOLERANCE: f64 = 1e-14;
/// Hard cap on the truncation bound.
pub const MAX_NMAX: usize = 4096;
/// Below this `zeta` the conditional probability returns its analytic limit.
pub const ZETA_LIMIT: f64 = 1e-12;

/// Squeezing strength with its derived thermal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParam {
    r: f64,
    zeta: f64,
    one_minus_zeta: f64,
}

impl SqueezeParam {
    pub fn new(r: f64) -> Result<Self> {
        check_nonnegative("r", r)?;
        let t = r.tanh();
        let c = r.cosh();
        Ok(Self {
            r,
            zeta: t * t,
            one_minus_zeta: 1.0 / (c * c),
        })
    }

    /// Builds the parameter from `zeta` in `[0, 1)`.
    pub fn from_zeta(zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        Ok(Self {
            r: zeta.sqrt().atanh(),
            zeta,
            one_minus_zeta: 1.0 - zeta,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `1 - zeta`, accurate even when `zeta` rounds to one.
    pub fn one_minus_zeta(&self) -> f64 {
        self.one_minus_zeta
    }
}

/// Overall efficiency of one arm: channel transmittivity times detector
/// efficiency. Only the product is visible in click statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveEfficiency {
    eta_d: f64,
    t_chan: f64,
    eta_tot: f64,
}

impl EffectiveEfficiency {
    pub fn new(eta_d: f64, t_chan: f64) -> Result<Self> {
        check_probability("eta_d", eta_d)?;
        check_probability("t_chan", t_chan)?;
        Ok(Self {
            eta_d,
            t_chan,
            eta_tot: eta_d * t_chan,
        })
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    pub fn t_chan(&self) -> f64 {
        self.t_chan
    }

    pub fn eta_tot(&self) -> f64 {
        self.eta_tot
    }
}

/// Probability vector over photon number `0..=nmax` of a single mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalFockDist {
    probs: Vec<f64>,
}

impl DiagonalFockDist {
    /// Wraps a probability vector, rejecting negative or non-finite entries
    /// and totals above one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty photon-number distribution".into()));
        }
        if let Some(&p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain {
                name: "probability",
                value: p,
                expected: "finite and >= 0",
            });
        }
        let total = compensated_sum(probs.iter().copied());
        if total > 1.0 + 1e-12 {
            return Err(Error::Domain {
                name: "total probability",
                value: total,
                expected: "<= 1",
            });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn nmax(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(n, p)| n as f64 * p))
    }

    /// Second factorial moment `<n(n-1)>`.
    pub fn factorial_moment2(&self) -> f64 {
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(n, p)| n as f64 * (n as f64 - 1.0) * p),
        )
    }

    /// Probability that a click detector of efficiency `eta` fires.
    pub fn click_probability(&self, eta: f64) -> Result<f64> {
        let weights = povm_off_weights(eta, self.nmax())?;
        let off: f64 = compensated_sum(self.probs.iter().zip(&weights).map(|(p, w)| p * w));
        Ok(self.total() - off)
    }
}

fn check_zeta(zeta: f64) -> Result<f64> {
    if zeta.is_finite() && (0.0..1.0).contains(&zeta) {
        Ok(zeta)
    } else {
        Err(Error::Domain {
            name: "zeta",
            value: zeta,
            expected: "[0, 1)",
        })
    }
}

/// `zeta = tanh^2(r)`.
pub fn squeeze_to_zeta(r: f64) -> Result<f64> {
    Ok(SqueezeParam::new(r)?.zeta())
}

/// Smallest `nmax` with `zeta^(nmax + 1) < TRUNCATION_TOLERANCE`, capped at
/// [`MAX_NMAX`].
pub fn truncation_nmax(zeta: f64) -> Result<usize> {
    check_zeta(zeta)?;
    if zeta == 0.0 {
        return Ok(1);
    }
    // zeta^m <= tol for m = needed, so nmax = needed leaves a strictly smaller tail.
    let needed = (TRUNCATION_TOLERANCE.ln() / zeta.ln()).ceil();
    Ok((needed as usize).clamp(1, MAX_NMAX))
}

/// Thermal distribution `(1 - zeta) zeta^n` truncated at `nmax`.
pub fn thermal_pmf(zeta: f64, nmax: usize) -> Result<DiagonalFockDist> {
    check_zeta(zeta)?;
    let mut probs = Vec::with_capacity(nmax + 1);
    let mut p = 1.0 - zeta;
    for _ in 0..=nmax {
        probs.push(p);
        p *= zeta;
    }
    Ok(DiagonalFockDist { probs })
}

/// No-click weights `(1 - eta)^n` for `n = 0..=nmax`.
pub fn povm_off_weights(eta: f64, nmax: usize) -> Result<Vec<f64>> {
    check_probability("eta", eta)?;
    let a = 1.0 - eta;
    let mut w = Vec::with_capacity(nmax + 1);
    let mut x = 1.0;
    for _ in 0..=nmax {
        w.push(x);
        x *= a;
    }
    Ok(w)
}

/// Click probability of one arm of the squeezed vacuum,
/// `1 - (1 - zeta) / (1 - zeta (1 - eta_tot))`.
pub fn marginal_click_prob(zeta: f64, eta_tot: f64) -> Result<f64> {
    check_zeta(zeta)?;
    check_probability("eta_tot", eta_tot)?;
    Ok(marginal_click(1.0 - zeta, zeta, eta_tot))
}

/// Same as [`marginal_click_prob`] from a squeezing parameter.
pub fn marginal_click_prob_sq(sq: SqueezeParam, eta_tot: f64) -> Result<f64> {
    check_probability("eta_tot", eta_tot)?;
    Ok(marginal_click(sq.one_minus_zeta, sq.zeta, eta_tot))
}

fn marginal_click(s: f64, zeta: f64, eta: f64) -> f64 {
    let num = zeta * eta;
    if num == 0.0 {
        0.0
    } else {
        num / (s + num)
    }
}

/// Probability that both arms click,
/// `sum_n (1 - zeta) zeta^n (1 - a1^n)(1 - a2^n)` in closed form.
pub fn joint_click_prob(sq: SqueezeParam, eta1_tot: f64, eta2_tot: f64) -> Result<f64> {
    check_probability("eta1_tot", eta1_tot)?;
    check_probability("eta2_tot", eta2_tot)?;
    let (s, z) = (sq.one_minus_zeta, sq.zeta);
    if z == 0.0 || eta1_tot == 0.0 || eta2_tot == 0.0 {
        return Ok(0.0);
    }
    let both = eta1_tot + eta2_tot - eta1_tot * eta2_tot;
    // P1 + P2 - P(1 or 2), each a geometric sum.
    let p1 = marginal_click(s, z, eta1_tot);
    let p2 = marginal_click(s, z, eta2_tot);
    let p_any = marginal_click(s, z, both);
    Ok((p1 + p2 - p_any).clamp(0.0, 1.0))
}

/// Heralded photon-number distribution of mode B after a click of
/// efficiency `eta1_tot` on mode A, normalized over `0..=nmax`.
pub fn heralded_pmf(zeta: f64, eta1_tot: f64, nmax: usize) -> Result<DiagonalFockDist> {
    check_zeta(zeta)?;
    check_probability("eta1_tot", eta1_tot)?;
    if eta1_tot == 0.0 {
        return Err(Error::Domain {
            name: "eta1_tot",
            value: eta1_tot,
            expected: "(0, 1]: a blind herald never fires",
        });
    }
    if zeta == 0.0 {
        let mut probs = vec![0.0; nmax.max(1) + 1];
        probs[1] = 1.0;
        return Ok(DiagonalFockDist { probs });
    }
    let a = 1.0 - eta1_tot;
    let mut weights = Vec::with_capacity(nmax + 1);
    let (mut zn, mut an) = (1.0 - zeta, 1.0);
    for _ in 0..=nmax {
        weights.push(zn * (1.0 - an));
        zn *= zeta;
        an *= a;
    }
    let total = compensated_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::Numerical("heralded state has zero trace".into()));
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(DiagonalFockDist { probs: weights })
}

/// Probability that detector 2 clicks given that detector 1 clicked, for a
/// squeezed vacuum of strength `r` seen through overall efficiencies
/// `eta1_tot` (herald) and `eta2_tot`.
///
/// Returns exactly `eta2_tot` when `zeta < ZETA_LIMIT`, the removable
/// `0/0` limit of the closed form.
pub fn conditional_click_prob(eta1_tot: f64, eta2_tot: f64, r: f64) -> Result<f64> {
    conditional_click_prob_sq(eta1_tot, eta2_tot, SqueezeParam::new(r)?)
}

pub fn conditional_click_prob_sq(eta1_tot: f64, eta2_tot: f64, sq: SqueezeParam) -> Result<f64> {
    check_probability("eta1_tot", eta1_tot)?;
    check_probability("eta2_tot", eta2_tot)?;
    if eta1_tot == 0.0 {
        return Err(Error::Domain {
            name: "eta1_tot",
            value: eta1_tot,
            expected: "(0, 1]: cannot condition on a blind herald",
        });
    }
    Ok(conditional_unchecked(eta1_tot, eta2_tot, sq.zeta, sq.one_minus_zeta))
}

/// Closed form without domain checks. Algebraically reduced so that the
/// `1 / (zeta eta1)` prefactor cancels:
/// `P_off = (s + zeta eta1) s a2 / ((s + zeta eta2)(s + zeta (1 - a1 a2)))`.
pub(crate) fn conditional_unchecked(eta1: f64, eta2: f64, zeta: f64, s: f64) -> f64 {
    if zeta < ZETA_LIMIT {
        return eta2;
    }
    if eta2 == 0.0 {
        return 0.0;
    }
    let a1 = 1.0 - eta1;
    let a2 = 1.0 - eta2;
    let num = (s + zeta * eta1) * s * a2;
    let den = (s + zeta * eta2) * (s + zeta * (1.0 - a1 * a2));
    (1.0 - num / den).clamp(0.0, 1.0)
}

/// Click probabilities behind a heralded `g2` measurement: the heralded
/// field is split with probability `split` toward detector 2 and
/// `1 - split` toward detector 3. `noise2`/`noise3` are independent,
/// uncorrelated click probabilities per gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitClickProbs {
    pub p2: f64,
    pub p3: f64,
    pub p23: f64,
}

impl SplitClickProbs {
    pub fn g2(&self) -> Result<f64> {
        let den = self.p2 * self.p3;
        if den <= 0.0 || !den.is_finite() {
            return Err(Error::Numerical(
                "g2 undefined: a split detector never clicks".into(),
            ));
        }
        Ok(self.p23 / den)
    }
}

pub fn split_click_probs(
    dist: &DiagonalFockDist,
    split: f64,
    eta2_tot: f64,
    eta3_tot: f64,
    noise2: f64,
    noise3: f64,
) -> Result<SplitClickProbs> {
    if !(split.is_finite() && split > 0.0 && split < 1.0) {
        return Err(Error::Domain {
            name: "split",
            value: split,
            expected: "(0, 1)",
        });
    }
    check_probability("eta2_tot", eta2_tot)?;
    check_probability("eta3_tot", eta3_tot)?;
    check_probability("noise2", noise2)?;
    check_probability("noise3", noise3)?;
    let x2 = split * eta2_tot;
    let x3 = (1.0 - split) * eta3_tot;
    let (ln_b2, ln_b3) = ((-x2).ln_1p(), (-x3).ln_1p());
    let (ln_q2, ln_q3) = ((-noise2).ln_1p(), (-noise3).ln_1p());
    let b23 = 1.0 - x2 - x3;
    let q23 = (1.0 - noise2) * (1.0 - noise3);
    // b2^n b3^n - b23^n = b23^n expm1(n ln(1 + x2 x3 / b23)); direct when b23 is small.
    let ln_ratio = if b23 > 0.5 { (x2 * x3 / b23).ln_1p() } else { f64::NAN };

    let mut on2 = NeumaierSum::new();
    let mut on3 = NeumaierSum::new();
    let mut on23 = NeumaierSum::new();
    for (n, &p) in dist.probs().iter().enumerate() {
        let nf = n as f64;
        let c2 = -(ln_q2 + nf * ln_b2).exp_m1();
        let c3 = -(ln_q3 + nf * ln_b3).exp_m1();
        let excess = if b23 > 0.5 {
            b23.powi(n as i32) * (nf * ln_ratio).exp_m1()
        } else {
            (nf * (ln_b2 + ln_b3)).exp() - if n == 0 { 1.0 } else { b23.max(0.0).powi(n as i32) }
        };
        on2.add(p * c2);
        on3.add(p * c3);
        on23.add(p * (c2 * c3 - q23 * excess));
    }
    Ok(SplitClickProbs {
        p2: on2.value(),
        p3: on3.value(),
        p23: on23.value().max(0.0),
    })
}

/// Heralded zero-delay `g2` with click detectors after a beamsplitter:
/// `P(ON2 and ON3 | herald) / (P(ON2 | herald) P(ON3 | herald))`.
pub fn heralded_g2_analytic(
    zeta: f64,
    eta1_tot: f64,
    split: f64,
    eta2_tot: f64,
    eta3_tot: f64,
    nmax: usize,
) -> Result<f64> {
    let dist = heralded_pmf(zeta, eta1_tot, nmax)?;
    split_click_probs(&dist, split, eta2_tot, eta3_tot, 0.0, 0.0)?.g2()
}

/// Photon-number `g2 = <n(n-1)> / <n>^2`, the weak-detection limit of the
/// click-detector ratio.
pub fn g2_photon_number(dist: &DiagonalFockDist) -> Result<f64> {
    let mean = dist.mean();
    if mean <= 0.0 {
        return Err(Error::Numerical("g2 undefined for the vacuum".into()));
    }
    Ok(dist.factorial_moment2() / (mean * mean))
}

/// Heralded single-photon fidelity `1 - g2/2`, clamped to `[0, 1]`.
pub fn heralded_fidelity_from_g2(g2: f64) -> Result<f64> {
    check_nonnegative("g2", g2)?;
    Ok((1.0 - 0.5 * g2).clamp(0.0, 1.0))
}

/// One row of the conditional-probability curve versus squeezing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickCurvePoint {
    pub r: f64,
    pub zeta: f64,
    pub p_d2_given_d1: f64,
    pub p_d1_given_d2: f64,
}

/// Evaluates both conditioning directions over a grid of `r`.
pub fn click_curve(eta1_tot: f64, eta2_tot: f64, r_values: &[f64]) -> Result<Vec<ClickCurvePoint>> {
    r_values
        .iter()
        .map(|&r| {
            let sq = SqueezeParam::new(r)?;
            Ok(ClickCurvePoint {
                r,
                zeta: sq.zeta(),
                p_d2_given_d1: conditional_click_prob_sq(eta1_tot, eta2_tot, sq)?,
                p_d1_given_d2: if eta2_tot > 0.0 {
                    conditional_click_prob_sq(eta2_tot, eta1_tot, sq)?
                } else {
                    f64::NAN
                },
            })
        })
        .collect()
}
