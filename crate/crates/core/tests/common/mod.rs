#![allow(dead_code)]

//! Reference computations kept independent of the library: plain loops
//! over a truncated photon-number basis.

/// `tanh(r)^2` and `1 / cosh(r)^2`.
pub fn zeta_pair(r: f64) -> (f64, f64) {
    let t = r.tanh();
    (t * t, 1.0 / (r.cosh() * r.cosh()))
}

/// Terms needed for `zeta^n < 1e-18`.
fn terms(zeta: f64) -> usize {
    if zeta <= 0.0 {
        2
    } else {
        ((1e-18f64).ln() / zeta.ln()).ceil() as usize + 2
    }
}

/// `P(click 2 | click 1)` by summing the photon-number-correlated state
/// term by term, `sum p_n (1-a1^n)(1-a2^n) / sum p_n (1-a1^n)`, with
/// Kahan-summed numerator and denominator.
pub fn brute_conditional(eta1: f64, eta2: f64, r: f64) -> f64 {
    let (zeta, s) = zeta_pair(r);
    let (a1, a2) = (1.0 - eta1, 1.0 - eta2);
    let mut num = Kahan::default();
    let mut den = Kahan::default();
    let (mut pn, mut x1, mut x2) = (s, 1.0, 1.0);
    for _ in 0..terms(zeta) {
        num.add(pn * (1.0 - x1) * (1.0 - x2));
        den.add(pn * (1.0 - x1));
        pn *= zeta;
        x1 *= a1;
        x2 *= a2;
    }
    num.sum / den.sum
}

/// `P(click 2 | click 1)` with each arm first thinned photon by photon by
/// a loss channel of transmission `t_i`, then detected with efficiency
/// `e_i`. The thinning uses explicit binomial weights from Pascal rows.
pub fn brute_lossy_conditional(t1: f64, e1: f64, t2: f64, e2: f64, r: f64) -> f64 {
    let (zeta, s) = zeta_pair(r);
    let n_max = terms(zeta);
    // off_i[n] = sum_k C(n,k) t^k (1-t)^(n-k) (1-e)^k
    let off = |t: f64, e: f64| -> Vec<f64> {
        let mut out = Vec::with_capacity(n_max);
        let mut row = vec![1.0f64];
        for n in 0..n_max {
            let mut acc = Kahan::default();
            for (k, c) in row.iter().enumerate() {
                acc.add(c * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32) * (1.0 - e).powi(k as i32));
            }
            out.push(acc.sum);
            let mut next = vec![1.0; n + 2];
            for k in 1..=n {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
        }
        out
    };
    let (o1, o2) = (off(t1, e1), off(t2, e2));
    let mut num = Kahan::default();
    let mut den = Kahan::default();
    let mut pn = s;
    for n in 0..n_max {
        num.add(pn * (1.0 - o1[n]) * (1.0 - o2[n]));
        den.add(pn * (1.0 - o1[n]));
        pn *= zeta;
    }
    num.sum / den.sum
}

/// Heralded click probabilities behind a split, `(P2, P3, P23)`, summed
/// over the heralded photon-number distribution with multinomial routing
/// written out explicitly for each `(n, k)` split.
pub fn brute_split(zeta: f64, eta1: f64, split: f64, eta2: f64, eta3: f64) -> (f64, f64, f64) {
    let s = 1.0 - zeta;
    let n_max = terms(zeta).min(400);
    let (mut p2, mut p3, mut p23, mut norm) = (0.0, 0.0, 0.0, 0.0);
    let mut pn = s;
    let mut row = vec![1.0f64];
    for n in 0..n_max {
        let w = pn * (1.0 - (1.0 - eta1).powi(n as i32));
        norm += w;
        for (k, c) in row.iter().enumerate() {
            // k photons toward detector 2.
            let route = c * split.powi(k as i32) * (1.0 - split).powi((n - k) as i32);
            let c2 = 1.0 - (1.0 - eta2).powi(k as i32);
            let c3 = 1.0 - (1.0 - eta3).powi((n - k) as i32);
            p2 += w * route * c2;
            p3 += w * route * c3;
            p23 += w * route * c2 * c3;
        }
        let mut next = vec![1.0; n + 2];
        for k in 1..=n {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
        pn *= zeta;
    }
    (p2 / norm, p3 / norm, p23 / norm)
}

#[derive(Default)]
pub struct Kahan {
    pub sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Binomial standard error of a proportion.
pub fn binomial_sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

/// Two-proportion z statistic.
pub fn two_sample_z(k1: f64, n1: f64, k2: f64, n2: f64) -> f64 {
    let pooled = (k1 + k2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    (k1 / n1 - k2 / n2) / se
}
