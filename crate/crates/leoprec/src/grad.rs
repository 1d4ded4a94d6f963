//! Gradients of the energy-efficiency objective with respect to a precoding
//! matrix, and the backward pass of the power projection.
//!
//! Convention used throughout the crate for gradients of a real scalar with
//! respect to complex entries `z = x + i y`: the packed gradient stores
//! `dL/dx + i dL/dy`. With this packing, `dL = sum Re(conj(G) dZ)` and the
//! adjoint of `C = A B` is `A_bar = C_bar B^H`, `B_bar = A^H C_bar`.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::linalg::CMatrix;
use crate::system::{PowerModel, PrecodingMatrix};

/// `sum(Re a * Re b + Im a * Im b)`; equals `Re<a, b>` entry-wise.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Energy efficiency (bits/joule) and its packed gradient with respect to
/// every precoder entry.
pub fn ee_and_gradient(
    cs: &ChannelSet,
    b: &PrecodingMatrix,
    pm: &PowerModel,
    bw: f64,
) -> (f64, CMatrix) {
    let n = b.n_antennas();
    let k = b.n_users();
    let ln2 = std::f64::consts::LN_2;

    // cross terms s[k][l] = v_k^H b_l
    let mut s = vec![Complex64::new(0.0, 0.0); k * k];
    for ku in 0..k {
        for l in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..n {
                acc += cs.users[ku].v[r].conj() * b.b[(r, l)];
            }
            s[ku * k + l] = acc;
        }
    }
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    let mut sum_rate = 0.0;
    for ku in 0..k {
        let gamma = cs.users[ku].gamma;
        num[ku] = gamma * s[ku * k + ku].norm_sqr();
        den[ku] = cs.n0
            + (0..k)
                .filter(|&l| l != ku)
                .map(|l| gamma * s[ku * k + l].norm_sqr())
                .sum::<f64>();
        sum_rate += (1.0 + num[ku] / den[ku]).log2();
    }
    let power = pm.xi * b.total_tx_power() + pm.static_power();
    let ee = bw * sum_rate / power;

    // dEE/db_l = (bw/P) dR/db_l - (bw R / P^2) dP/db_l
    let mut grad = CMatrix::zeros(n, k);
    for l in 0..k {
        for ku in 0..k {
            let gamma = cs.users[ku].gamma;
            let coeff = if ku == l {
                // through the numerator of user l
                (1.0 / ln2) / (num[ku] + den[ku])
            } else {
                // through the interference seen by user ku
                -(1.0 / ln2) * num[ku] / (den[ku] * (den[ku] + num[ku]))
            };
            let factor = (bw / power) * coeff * 2.0 * gamma;
            let skl = s[ku * k + l];
            for r in 0..n {
                grad[(r, l)] += cs.users[ku].v[r] * skl * factor;
            }
        }
        let p_factor = -(bw * sum_rate / (power * power)) * pm.xi * 2.0;
        for r in 0..n {
            grad[(r, l)] += b.b[(r, l)] * p_factor;
        }
    }
    (ee, grad)
}

/// Backward pass of [`crate::system::project_power`]: maps the gradient at
/// the projected output to the gradient at the input.
pub fn project_power_backward(
    pre: &PrecodingMatrix,
    p_max: f64,
    post_grad: &CMatrix,
) -> CMatrix {
    let total = pre.total_tx_power();
    if total <= p_max {
        return post_grad.clone();
    }
    let norm = total.sqrt();
    let s = p_max.sqrt() / norm;
    // d(s B)/dB with s = sqrt(p_max)/||B||_F
    let inner = real_inner(post_grad, &pre.b);
    let correction = -p_max.sqrt() * inner / (norm * norm * norm);
    post_grad
        .scale(Complex64::new(s, 0.0))
        .add(&pre.b.scale(Complex64::new(correction, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, ArrayGeometry, ChannelDistributionSpec};
    use crate::rng::{rng_from_seed, standard_complex};
    use crate::system::{energy_efficiency, project_power};

    fn fd_check(
        value_at: impl Fn(&CMatrix) -> f64,
        at: &CMatrix,
        analytic: &CMatrix,
        tol: f64,
    ) {
        let step = 1e-6;
        for r in 0..at.rows() {
            for c in 0..at.cols() {
                for (dr, di) in [(step, 0.0), (0.0, step)] {
                    let mut plus = at.clone();
                    let mut minus = at.clone();
                    plus[(r, c)] += Complex64::new(dr, di);
                    minus[(r, c)] -= Complex64::new(dr, di);
                    let fd = (value_at(&plus) - value_at(&minus)) / (2.0 * step);
                    let ad = if di == 0.0 {
                        analytic[(r, c)].re
                    } else {
                        analytic[(r, c)].im
                    };
                    let denom = ad.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (ad - fd).abs() / denom <= tol,
                        "entry ({}, {}) {}: ad {} vs fd {}",
                        r,
                        c,
                        if di == 0.0 { "re" } else { "im" },
                        ad,
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn ee_gradient_matches_finite_differences() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&ArrayGeometry::new(2, 2), 3, 71, &dist, 2.5);
        let pm = PowerModel::with_defaults(4);
        let mut rng = rng_from_seed(72);
        let b = CMatrix::from_fn(4, 3, |_, _| standard_complex(&mut rng));
        let (ee, grad) = ee_and_gradient(&cs, &PrecodingMatrix::new(b.clone()), &pm, 2e7);
        let reference = energy_efficiency(&cs, &PrecodingMatrix::new(b.clone()), &pm, 2e7).ee;
        assert!((ee - reference).abs() <= 1e-9 * reference);
        fd_check(
            |m| energy_efficiency(&cs, &PrecodingMatrix::new(m.clone()), &pm, 2e7).ee,
            &b,
            &grad,
            1e-4,
        );
    }

    #[test]
    fn projection_backward_matches_fd_in_both_branches() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&ArrayGeometry::new(2, 2), 2, 73, &dist, 2.5);
        let pm = PowerModel::with_defaults(4);
        let mut rng = rng_from_seed(74);
        let b = CMatrix::from_fn(4, 2, |_, _| standard_complex(&mut rng));
        let total = PrecodingMatrix::new(b.clone()).total_tx_power();
        // feasible branch (budget above the norm) and scaling branch (below)
        for p_max in [2.0 * total, 0.3 * total] {
            let loss = |m: &CMatrix| -> f64 {
                let projected = project_power(&PrecodingMatrix::new(m.clone()), p_max);
                energy_efficiency(&cs, &projected, &pm, 2e7).ee
            };
            let pre = PrecodingMatrix::new(b.clone());
            let projected = project_power(&pre, p_max);
            let (_, ee_grad) = ee_and_gradient(&cs, &projected, &pm, 2e7);
            let grad = project_power_backward(&pre, p_max, &ee_grad);
            fd_check(loss, &b, &grad, 1e-4);
        }
    }
}
