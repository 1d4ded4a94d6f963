//! Exact energy-efficiency maximization: Dinkelbach outer loop, WMMSE inner
//! loop.
//!
//! The fractional objective `EE = B_w * sum_k rate_k / P_total` is maximized
//! by solving a sequence of parametric subproblems
//! `max_b  B_w * sum_k rate_k - rho_n * P_total` and updating `rho` to the
//! achieved ratio. Each subproblem is handled by the weighted-MMSE
//! reformulation: closed-form receiver `u_k` and weight `w_k` updates, and a
//! ridge-system precoder update whose power-constraint multiplier is found by
//! bisection (complementary slackness holds at the returned point).
//!
//! Internally the objective is normalized by the bandwidth, so the subproblem
//! values `F` reported in traces are in bits/s/Hz times watts-normalized
//! units and the `1e-5` stopping thresholds are scale-meaningful. Reported
//! `rho` values are always in bits per joule.
//!
//! Because rates are base-2 logarithms, the exact precoder update carries a
//! `1/ln 2` weight on the MSE term; dropping it would break the monotone
//! ascent of the subproblem objective that the tests assert.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::system::{rate_upper, total_power, PowerModel, PrecodingMatrix};

/// Inner-loop sweep cap.
pub const MAX_INNER_SWEEPS: usize = 500;
/// Outer-loop iteration cap.
pub const MAX_OUTER_ITERATIONS: usize = 100;
/// Default stopping threshold for both loops.
pub const DEFAULT_EPS: f64 = 1e-5;

const BISECTION_CAP: usize = 200;
const POWER_TOL_REL: f64 = 1e-10;
const LOG2_WEIGHT: f64 = std::f64::consts::LOG2_E; // 1/ln 2

/// One outer-loop record.
#[derive(Debug, Clone, Serialize)]
pub struct DinkelbachState {
    pub iteration: usize,
    /// Achieved ratio entering this subproblem, bits per joule.
    pub rho: f64,
    /// Subproblem value at the returned precoder, bandwidth-normalized.
    pub f_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DinkelbachTrace {
    pub states: Vec<DinkelbachState>,
    pub converged: bool,
}

impl DinkelbachTrace {
    /// One JSON object per outer iteration, for convergence plots.
    pub fn to_jsonl(&self) -> String {
        self.states
            .iter()
            .map(|s| serde_json::to_string(s).expect("trace serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One inner-loop sweep record.
#[derive(Debug, Clone, Serialize)]
pub struct WmmseSweep {
    pub sweep: usize,
    /// `sum_k ln w_k` after the weight update (the stopping statistic).
    pub sum_log_w: f64,
    /// Subproblem objective at the swept precoder, bandwidth-normalized.
    pub objective: f64,
    /// Power-constraint multiplier chosen by the precoder update.
    pub multiplier: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WmmseTrace {
    pub sweeps: Vec<WmmseSweep>,
    pub converged: bool,
}

/// Auxiliary variables of the WMMSE reformulation.
#[derive(Debug, Clone)]
pub struct WmmseState {
    pub u: Vec<Complex64>,
    pub w: Vec<f64>,
    pub b: PrecodingMatrix,
    pub lambda: f64,
}

/// Receiver update:
/// `u_k = (sqrt(gamma_k) v_k^H b_k)^* / (sum_i gamma_k |v_k^H b_i|^2 + N_0)`.
///
/// This is the minimizer of the MSE `e_k` used by [`update_w`]; written with
/// an unconjugated numerator the receiver would not minimize that MSE and the
/// block-coordinate sweeps would lose their monotone ascent.
pub fn update_u(cs: &ChannelSet, b: &PrecodingMatrix) -> Vec<Complex64> {
    (0..cs.n_users())
        .map(|k| {
            let user = &cs.users[k];
            let mut denom = cs.n0;
            let mut signal = Complex64::new(0.0, 0.0);
            for i in 0..b.n_users() {
                let cross: Complex64 = (0..b.n_antennas())
                    .map(|r| user.v[r].conj() * b.b[(r, i)])
                    .sum();
                denom += user.gamma * cross.norm_sqr();
                if i == k {
                    signal = cross;
                }
            }
            signal.conj() * user.gamma.sqrt() / denom
        })
        .collect()
}

/// Weight update: `w_k = 1 / e_k` with the MSE
/// `e_k = |u_k sqrt(gamma_k) v_k^H b_k - 1|^2
///        + sum_{i != k} gamma_k |u_k v_k^H b_i|^2 + N_0 |u_k|^2`.
pub fn update_w(cs: &ChannelSet, b: &PrecodingMatrix, u: &[Complex64]) -> Vec<f64> {
    (0..cs.n_users())
        .map(|k| {
            let user = &cs.users[k];
            let mut e = cs.n0 * u[k].norm_sqr();
            for i in 0..b.n_users() {
                let cross: Complex64 = (0..b.n_antennas())
                    .map(|r| user.v[r].conj() * b.b[(r, i)])
                    .sum();
                if i == k {
                    e += (u[k] * user.gamma.sqrt() * cross - 1.0).norm_sqr();
                } else {
                    e += user.gamma * (u[k] * cross).norm_sqr();
                }
            }
            1.0 / e
        })
        .collect()
}

/// Precoder update: solves the common ridge system per user and picks the
/// power multiplier by bisection so that complementary slackness holds
/// (`a = 0` with the budget slack, or `a > 0` with the budget met to 1e-8
/// relative). Returns the precoder and the multiplier.
///
/// `rho` is in bits per joule; the system matrix is
/// `M = (1/ln2) sum_i w_i |u_i|^2 gamma_i v_i v_i^H + (rho xi / B_w + a) I`
/// and `b_k = (1/ln2) w_k sqrt(gamma_k) u_k^* M^{-1} v_k`.
pub fn update_b(
    cs: &ChannelSet,
    u: &[Complex64],
    w: &[f64],
    rho: f64,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<(PrecodingMatrix, f64)> {
    debug_assert!(rho >= 0.0);
    let n = cs.n_antennas();
    let k = cs.n_users();
    let rho_norm = rho / bw;

    let mut gram = CMatrix::zeros(n, n);
    let mut rhs_scales = Vec::with_capacity(k);
    for i in 0..k {
        let user = &cs.users[i];
        gram.add_outer_scaled(&user.v, LOG2_WEIGHT * w[i] * u[i].norm_sqr() * user.gamma);
        rhs_scales.push(LOG2_WEIGHT * w[i] * user.gamma.sqrt() * u[i].conj());
    }

    if rhs_scales.iter().all(|s| s.norm_sqr() == 0.0) {
        return Ok((PrecodingMatrix::zeros(n, k), 0.0));
    }

    let solve_at = |a: f64| -> Result<PrecodingMatrix> {
        let mut m = gram.clone();
        m.add_ridge(rho_norm * pm.xi + a);
        let chol = m.cholesky()?;
        let mut b = CMatrix::zeros(n, k);
        for (i, scale) in rhs_scales.iter().enumerate() {
            let x = chol.solve_cholesky(&cs.users[i].v);
            b.set_column(i, &x.scale(*scale));
        }
        Ok(PrecodingMatrix::new(b))
    };

    // a = 0: feasible means slack multiplier
    if let Ok(b0) = solve_at(0.0) {
        if b0.total_tx_power() <= p_max {
            return Ok((b0, 0.0));
        }
    }

    // bracket: power(a) is strictly decreasing in a
    let mut hi = (rho_norm * pm.xi).max(1e-8);
    let mut b_hi = solve_at(hi)?;
    let mut doublings = 0;
    while b_hi.total_tx_power() > p_max {
        hi *= 2.0;
        doublings += 1;
        if doublings > BISECTION_CAP {
            return Err(Error::BisectionFailure {
                iterations: doublings,
            });
        }
        b_hi = solve_at(hi)?;
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        let b_mid = solve_at(mid)?;
        let p = b_mid.total_tx_power();
        if (p - p_max).abs() <= POWER_TOL_REL * p_max {
            return Ok((b_mid, mid));
        }
        if p > p_max {
            lo = mid;
        } else {
            hi = mid;
            b_hi = b_mid;
        }
    }
    // interval exhausted at float resolution: the feasible end is within
    // tolerance for any continuous power curve
    let p = b_hi.total_tx_power();
    if (p - p_max).abs() <= 1e-8 * p_max {
        Ok((b_hi, hi))
    } else {
        Err(Error::BisectionFailure {
            iterations: BISECTION_CAP,
        })
    }
}

/// Subproblem objective `sum_k rate_k - (rho / B_w) * P_total` (bandwidth
/// normalized; `rho` in bits per joule).
pub fn subproblem_objective(
    cs: &ChannelSet,
    b: &PrecodingMatrix,
    pm: &PowerModel,
    bw: f64,
    rho: f64,
) -> f64 {
    let sum_rate: f64 = rate_upper(cs, b).iter().sum();
    sum_rate - (rho / bw) * total_power(pm, b)
}

/// Block-coordinate descent on one Dinkelbach subproblem.
///
/// Sweeps `u -> w -> b` from `init_b` until the change in `sum_k ln w_k`
/// between consecutive sweeps drops below `eps2`, or [`MAX_INNER_SWEEPS`] is
/// hit (the trace is then flagged non-converged; the last iterate is best
/// because the objective ascends monotonically).
pub fn wmmse_solve(
    cs: &ChannelSet,
    rho: f64,
    init_b: &PrecodingMatrix,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
    eps2: f64,
) -> Result<(PrecodingMatrix, WmmseTrace)> {
    assert!(eps2 > 0.0);
    debug_assert!(init_b.is_feasible(p_max, 1e-9));
    let mut b = init_b.clone();
    let mut sweeps = Vec::new();
    let mut prev_sum_log_w = f64::NAN;
    let mut converged = false;
    for sweep in 0..MAX_INNER_SWEEPS {
        let u = update_u(cs, &b);
        let w = update_w(cs, &b, &u);
        let sum_log_w: f64 = w.iter().map(|x| x.ln()).sum();
        let (new_b, a) = update_b(cs, &u, &w, rho, pm, bw, p_max)?;
        b = new_b;
        sweeps.push(WmmseSweep {
            sweep,
            sum_log_w,
            objective: subproblem_objective(cs, &b, pm, bw, rho),
            multiplier: a,
        });
        if (sum_log_w - prev_sum_log_w).abs() < eps2 {
            converged = true;
            break;
        }
        prev_sum_log_w = sum_log_w;
    }
    Ok((b, WmmseTrace { sweeps, converged }))
}

/// Full solver for the energy-efficiency problem.
///
/// Starts from the uniform-power matched-filter precoder
/// (`b_k = sqrt(P_max / K) v_k`), carries the precoder across subproblems
/// (receivers and weights are recomputed from it at each subproblem entry),
/// and stops once the subproblem value falls to `eps1`.
pub fn dinkelbach_solve(
    cs: &ChannelSet,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
    eps1: f64,
    eps2: f64,
) -> Result<(PrecodingMatrix, DinkelbachTrace)> {
    assert!(eps1 > 0.0);
    let mut b = uniform_power_init(cs, p_max);
    let mut rho = 0.0; // bits per joule
    let mut states = Vec::new();
    let mut converged = false;
    for iteration in 0..MAX_OUTER_ITERATIONS {
        let (new_b, _inner) = wmmse_solve(cs, rho, &b, pm, bw, p_max, eps2)?;
        b = new_b;
        let sum_rate: f64 = rate_upper(cs, &b).iter().sum();
        let power = total_power(pm, &b);
        let f_value = sum_rate - (rho / bw) * power;
        states.push(DinkelbachState {
            iteration,
            rho,
            f_value,
        });
        if f_value <= eps1 {
            converged = true;
            break;
        }
        rho = bw * sum_rate / power;
    }
    Ok((b, DinkelbachTrace { states, converged }))
}

/// `b_k = sqrt(p_max / K) v_k`: every user at equal power along its own
/// direction.
pub fn uniform_power_init(cs: &ChannelSet, p_max: f64) -> PrecodingMatrix {
    let k = cs.n_users();
    let scale = Complex64::new((p_max / k as f64).sqrt(), 0.0);
    let mut b = CMatrix::zeros(cs.n_antennas(), k);
    for (i, user) in cs.users.iter().enumerate() {
        b.set_column(i, &user.v.scale(scale));
    }
    PrecodingMatrix::new(b)
}
