//! Physical-layer objective stack: SINR, rates, power, energy efficiency.
//!
//! Rates use base-2 logarithms throughout so that energy efficiency comes out
//! in bits per joule. The statistical-CSI rate is the interference-averaged
//! upper bound on the ergodic rate; [`rate_ergodic_mc`] estimates the true
//! ergodic rate by Monte-Carlo over fast-fading draws and is used to verify
//! the bound's tightness.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_fast_fading, ChannelSet};
use crate::linalg::{CMatrix, CVector};
use crate::rng::child_seed;

/// Transmitter power consumption model.
///
/// `xi` is the inverse amplifier efficiency multiplying radiated power; the
/// static part is `n_t * p_rfc + p_lo + p_bb`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub xi: f64,
    pub p_rfc: f64,
    pub p_lo: f64,
    pub p_bb: f64,
    pub n_t: usize,
}

impl PowerModel {
    /// Default wattages; amplifier efficiency 1/xi = 0.5.
    pub fn with_defaults(n_t: usize) -> Self {
        Self {
            xi: 2.0,
            p_rfc: 0.3,
            p_lo: 0.1,
            p_bb: 0.2,
            n_t,
        }
    }

    /// Static transmitter power `P_t`.
    pub fn static_power(&self) -> f64 {
        self.n_t as f64 * self.p_rfc + self.p_lo + self.p_bb
    }
}

/// `N_t x K` precoding matrix; column `k` is user `k`'s precoding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub b: CMatrix,
}

impl PrecodingMatrix {
    pub fn new(b: CMatrix) -> Self {
        Self { b }
    }

    pub fn zeros(n_antennas: usize, n_users: usize) -> Self {
        Self {
            b: CMatrix::zeros(n_antennas, n_users),
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.b.rows()
    }

    pub fn n_users(&self) -> usize {
        self.b.cols()
    }

    pub fn column(&self, k: usize) -> CVector {
        self.b.column(k)
    }

    /// Radiated power `sum_k ||b_k||^2`.
    pub fn total_tx_power(&self) -> f64 {
        let f = self.b.frobenius_norm();
        f * f
    }

    pub fn is_feasible(&self, p_max: f64, rel_slack: f64) -> bool {
        self.total_tx_power() <= p_max * (1.0 + rel_slack)
    }
}

/// Energy-efficiency evaluation with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEBreakdown {
    /// Delivered sum rate in bits/s (`B_w * sum_k rate_k`).
    pub sum_rate: f64,
    /// Total consumed power in watts.
    pub total_power: f64,
    /// `sum_rate / total_power`, bits per joule.
    pub ee: f64,
    /// Per-user spectral rates in bits/s/Hz.
    pub per_user_rate: Vec<f64>,
}

/// Per-user Monte-Carlo rate estimate.
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Statistical-CSI SINR of user `k`:
/// `gamma_k |v_k^H b_k|^2 / (sum_{l != k} gamma_k |v_k^H b_l|^2 + N_0)`.
pub fn sinr_upper(cs: &ChannelSet, b: &PrecodingMatrix, k: usize) -> f64 {
    let user = &cs.users[k];
    let mut signal = 0.0;
    let mut interference = 0.0;
    for l in 0..b.n_users() {
        let s = dot_h_col(&user.v, &b.b, l).norm_sqr() * user.gamma;
        if l == k {
            signal = s;
        } else {
            interference += s;
        }
    }
    signal / (interference + cs.n0)
}

/// Per-user statistical-CSI rates `log2(1 + SINR_k)` in bits/s/Hz.
pub fn rate_upper(cs: &ChannelSet, b: &PrecodingMatrix) -> Vec<f64> {
    (0..cs.n_users())
        .map(|k| (1.0 + sinr_upper(cs, b, k)).log2())
        .collect()
}

/// Monte-Carlo ergodic rate over fast-fading draws, with standard errors.
///
/// Instantaneous SINR uses `h_k = g_k v_k`, so only the scalar gains need to
/// be redrawn per sample. Per-sample seeds follow the crate splitting rule,
/// making the result independent of evaluation order.
pub fn rate_ergodic_mc(
    cs: &ChannelSet,
    b: &PrecodingMatrix,
    paths_per_user: usize,
    n_samples: usize,
    seed: u64,
) -> Vec<RateEstimate> {
    assert!(n_samples >= 1);
    let k_users = cs.n_users();
    // cross gains v_k^H b_l are fading-invariant
    let mut cross = vec![0.0f64; k_users * k_users];
    for k in 0..k_users {
        for l in 0..k_users {
            cross[k * k_users + l] = dot_h_col(&cs.users[k].v, &b.b, l).norm_sqr();
        }
    }
    // Welford accumulation: stable, and exactly zero spread for constant samples
    let mut mean = vec![0.0f64; k_users];
    let mut m2 = vec![0.0f64; k_users];
    for i in 0..n_samples {
        let draw = draw_fast_fading(cs, paths_per_user, child_seed(seed, i as u64));
        for k in 0..k_users {
            let g2 = draw.gains[k].norm_sqr();
            let signal = g2 * cross[k * k_users + k];
            let interference: f64 = (0..k_users)
                .filter(|&l| l != k)
                .map(|l| g2 * cross[k * k_users + l])
                .sum();
            let rate = (1.0 + signal / (interference + cs.n0)).log2();
            let delta = rate - mean[k];
            mean[k] += delta / (i + 1) as f64;
            m2[k] += delta * (rate - mean[k]);
        }
    }
    let n = n_samples as f64;
    (0..k_users)
        .map(|k| {
            let stderr = if n_samples > 1 {
                (m2[k] / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            RateEstimate {
                mean: mean[k],
                stderr,
            }
        })
        .collect()
}

/// Total consumed power `xi * sum_k ||b_k||^2 + P_t`.
pub fn total_power(pm: &PowerModel, b: &PrecodingMatrix) -> f64 {
    pm.xi * b.total_tx_power() + pm.static_power()
}

/// Full energy-efficiency breakdown at bandwidth `bw` (Hz).
pub fn energy_efficiency(
    cs: &ChannelSet,
    b: &PrecodingMatrix,
    pm: &PowerModel,
    bw: f64,
) -> EEBreakdown {
    let per_user_rate = rate_upper(cs, b);
    let sum_rate = bw * per_user_rate.iter().sum::<f64>();
    let total = total_power(pm, b);
    EEBreakdown {
        sum_rate,
        total_power: total,
        ee: sum_rate / total,
        per_user_rate,
    }
}

/// Projects onto the power budget: unchanged when feasible, otherwise a
/// Frobenius rescale so the radiated power equals `p_max`.
///
/// The rescale loop guarantees the output is feasible in exact float
/// comparison, which makes the projection exactly idempotent.
pub fn project_power(b: &PrecodingMatrix, p_max: f64) -> PrecodingMatrix {
    assert!(p_max > 0.0);
    let total = b.total_tx_power();
    if total <= p_max {
        return b.clone();
    }
    let mut out = b.clone();
    for _ in 0..4 {
        let t = out.total_tx_power();
        if t <= p_max {
            break;
        }
        let s = (p_max / t).sqrt();
        out.b = out.b.scale(Complex64::new(s, 0.0));
    }
    out
}

/// `v^H (column l of m)` without materializing the column.
fn dot_h_col(v: &CVector, m: &CMatrix, l: usize) -> Complex64 {
    debug_assert_eq!(v.len(), m.rows());
    (0..m.rows()).map(|i| v[i].conj() * m[(i, l)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, ArrayGeometry, ChannelDistributionSpec};
    use crate::rng::{rng_from_seed, standard_complex};

    fn test_set(nx: usize, ny: usize, k: usize, seed: u64) -> ChannelSet {
        let dist = ChannelDistributionSpec::default();
        draw_channel_set(&ArrayGeometry::new(nx, ny), k, seed, &dist, 2.5)
    }

    fn random_precoder(n: usize, k: usize, seed: u64) -> PrecodingMatrix {
        let mut rng = rng_from_seed(seed);
        PrecodingMatrix::new(CMatrix::from_fn(n, k, |_, _| standard_complex(&mut rng)))
    }

    #[test]
    fn power_model_static_split() {
        let pm = PowerModel::with_defaults(64);
        assert!((pm.static_power() - (64.0 * 0.3 + 0.1 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn sinr_single_user_mrt() {
        // K=1, b = sqrt(P) v, gamma=1: SINR = P / N0.
        let cs = test_set(4, 4, 1, 1);
        let p = 10.0f64;
        let mut b = PrecodingMatrix::zeros(16, 1);
        b.b.set_column(0, &cs.users[0].v.scale(Complex64::new(p.sqrt(), 0.0)));
        let sinr = sinr_upper(&cs, &b, 0);
        assert!((sinr - p / cs.n0).abs() < 1e-10);
    }

    #[test]
    fn sinr_orthogonal_precoder_is_zero() {
        let cs = test_set(2, 1, 1, 2);
        // pick b orthogonal to v
        let v = &cs.users[0].v;
        let b_col = CVector::new(vec![v[1].conj(), -v[0].conj()]).unwrap();
        assert!(v.dot_h(&b_col).norm() < 1e-12);
        let mut b = PrecodingMatrix::zeros(2, 1);
        b.b.set_column(0, &b_col);
        assert_eq!(sinr_upper(&cs, &b, 0), 0.0);
    }

    #[test]
    fn sinr_matches_term_by_term_oracle() {
        let cs = test_set(2, 2, 2, 3);
        let b = random_precoder(4, 2, 4);
        for k in 0..2 {
            // scalar-arithmetic oracle
            let user = &cs.users[k];
            let mut num = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                num += user.v[i].conj() * b.b[(i, k)];
            }
            let num = user.gamma * num.norm_sqr();
            let mut den = cs.n0;
            for l in 0..2 {
                if l == k {
                    continue;
                }
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..4 {
                    s += user.v[i].conj() * b.b[(i, l)];
                }
                den += user.gamma * s.norm_sqr();
            }
            assert!((sinr_upper(&cs, &b, k) - num / den).abs() <= 1e-12);
        }
    }

    #[test]
    fn rate_upper_log2_points() {
        // SINR 1 -> 1 bit/s/Hz; SINR 0 -> 0.
        assert!(((1.0f64 + 1.0).log2() - 1.0).abs() < 1e-15);
        let cs = test_set(2, 2, 3, 5);
        let b = random_precoder(4, 3, 6);
        let rates = rate_upper(&cs, &b);
        for (k, r) in rates.iter().enumerate() {
            let expected = (1.0 + sinr_upper(&cs, &b, k)).log2();
            assert_eq!(*r, expected);
            assert!(*r >= 0.0);
        }
    }

    #[test]
    fn degenerate_fading_matches_upper_bound_exactly() {
        // L=1: |g| = sqrt(gamma) deterministically, so every Monte-Carlo
        // sample equals the statistical rate and the spread is zero.
        let cs = test_set(4, 4, 3, 7);
        let b = random_precoder(16, 3, 8);
        let upper = rate_upper(&cs, &b);
        let mc = rate_ergodic_mc(&cs, &b, 1, 64, 9);
        for (est, up) in mc.iter().zip(&upper) {
            assert!((est.mean - up).abs() < 1e-12);
            assert!(est.stderr < 1e-12);
        }
    }

    #[test]
    fn mc_standard_error_shrinks() {
        let cs = test_set(4, 4, 2, 10);
        let b = random_precoder(16, 2, 11);
        let small = rate_ergodic_mc(&cs, &b, 3, 100, 12);
        let large = rate_ergodic_mc(&cs, &b, 3, 10_000, 12);
        for (s, l) in small.iter().zip(&large) {
            // ~1/sqrt(n): two decades of samples, one decade of error
            assert!(l.stderr < s.stderr * 0.2, "stderr {} vs {}", l.stderr, s.stderr);
        }
    }

    #[test]
    fn mc_mean_below_upper_bound() {
        let cs = test_set(4, 4, 4, 13);
        for trial in 0..5 {
            let b = random_precoder(16, 4, 100 + trial);
            let upper = rate_upper(&cs, &b);
            let mc = rate_ergodic_mc(&cs, &b, 3, 5_000, 14 + trial);
            for (est, up) in mc.iter().zip(&upper) {
                assert!(
                    est.mean <= up + 3.0 * est.stderr,
                    "mc {} exceeds bound {} + 3*{}",
                    est.mean,
                    up,
                    est.stderr
                );
            }
        }
    }

    #[test]
    fn total_power_zero_precoder_is_static() {
        let pm = PowerModel::with_defaults(16);
        let b = PrecodingMatrix::zeros(16, 4);
        assert_eq!(total_power(&pm, &b), pm.static_power());
    }

    #[test]
    fn total_power_arithmetic() {
        // xi=2, sum ||b||^2 = 10, P_t = 5 -> 25
        let pm = PowerModel {
            xi: 2.0,
            p_rfc: 0.0,
            p_lo: 5.0,
            p_bb: 0.0,
            n_t: 4,
        };
        let mut b = PrecodingMatrix::zeros(4, 1);
        b.b[(0, 0)] = Complex64::new(10f64.sqrt(), 0.0);
        assert!((total_power(&pm, &b) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn ee_zero_precoder_is_zero() {
        let cs = test_set(4, 4, 2, 15);
        let pm = PowerModel::with_defaults(16);
        let ee = energy_efficiency(&cs, &PrecodingMatrix::zeros(16, 2), &pm, 2e7);
        assert_eq!(ee.ee, 0.0);
        assert_eq!(ee.total_power, pm.static_power());
    }

    #[test]
    fn ee_linear_in_bandwidth() {
        let cs = test_set(4, 4, 2, 16);
        let b = random_precoder(16, 2, 17);
        let pm = PowerModel::with_defaults(16);
        let e1 = energy_efficiency(&cs, &b, &pm, 1e7);
        let e2 = energy_efficiency(&cs, &b, &pm, 2e7);
        assert!((e2.ee - 2.0 * e1.ee).abs() <= 1e-12 * e2.ee.abs());
    }

    #[test]
    fn ee_breakdown_internally_consistent() {
        let cs = test_set(4, 4, 3, 18);
        let b = random_precoder(16, 3, 19);
        let pm = PowerModel::with_defaults(16);
        let bw = 2e7;
        let e = energy_efficiency(&cs, &b, &pm, bw);
        let recomputed = bw * e.per_user_rate.iter().sum::<f64>() / e.total_power;
        assert!((e.ee - recomputed).abs() <= 1e-12 * e.ee.abs());
    }

    #[test]
    fn ee_single_user_closed_form() {
        // N_t = K = 1: EE(p) = bw*log2(1+p/N0) / (xi*p + P_t), swept on a grid.
        let cs = test_set(1, 1, 1, 20);
        let pm = PowerModel {
            xi: 2.0,
            p_rfc: 0.3,
            p_lo: 0.1,
            p_bb: 0.2,
            n_t: 1,
        };
        let bw = 2e7;
        for i in 1..=40 {
            let p = 0.25 * i as f64;
            let mut b = PrecodingMatrix::zeros(1, 1);
            b.b[(0, 0)] = Complex64::new(p.sqrt(), 0.0);
            let got = energy_efficiency(&cs, &b, &pm, bw).ee;
            let expected = bw * (1.0 + p / cs.n0).log2() / (pm.xi * p + pm.static_power());
            assert!((got - expected).abs() <= 1e-9 * expected);
        }
    }

    #[test]
    fn sinr_invariant_to_common_phase() {
        let cs = test_set(4, 4, 3, 21);
        let b = random_precoder(16, 3, 22);
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = PrecodingMatrix::new(b.b.scale(phase));
        for k in 0..3 {
            let a = sinr_upper(&cs, &b, k);
            let r = sinr_upper(&cs, &rotated, k);
            assert!((a - r).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn project_feasible_unchanged() {
        let b = random_precoder(4, 2, 23);
        let p_max = b.total_tx_power() * 2.0;
        let out = project_power(&b, p_max);
        assert_eq!(out, b);
    }

    #[test]
    fn project_scaling_law() {
        let b = random_precoder(4, 2, 24);
        let p_max = b.total_tx_power() / 4.0;
        let out = project_power(&b, p_max);
        let expected = b.b.scale(Complex64::new(0.5, 0.0));
        assert!(out.b.sub(&expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn project_hits_budget_and_is_idempotent() {
        for seed in 0..20 {
            let b = random_precoder(8, 3, 300 + seed);
            let p_max = 0.3 * b.total_tx_power();
            let once = project_power(&b, p_max);
            assert!((once.total_tx_power() - p_max).abs() <= 1e-12 * p_max);
            let twice = project_power(&once, p_max);
            assert_eq!(once, twice, "projection must be exactly idempotent");
        }
    }
}
