//! Taylor-expansion deep-unfolded edge network for approximate matrix
//! inversion, and the precoder built on it.
//!
//! The network views an `N_t x N_t` Hermitian system matrix as a fully
//! connected antenna graph with one hidden complex scalar per edge. Layer
//! `l` updates edge `(i, j)` from six real trainable scalars
//! `(c0, c1, s0, s1, d0, d1)`:
//!
//! ```text
//! h      = f . t                                  (t-weighted mix)
//! z[i,j] = c0 f[i,j] + c1 h[i,j]
//!        + s0 sum_{i' != i} f[i',j] + s1 sum_{i' != i} h[i',j]
//!        + d0 sum_{j' != j} f[i,j'] + d1 sum_{j' != j} h[i,j']
//! f'     = sigma(z)
//! ```
//!
//! started from `f0 = diag(m)^-1`. Each trainable multiplies one structural
//! aggregate (self edge, same-column neighbors, same-row neighbors), so the
//! map is shared across edges and permutation equivariant, and the `s`/`d`
//! parameters are structurally inert when the graph has a single vertex.
//!
//! The mixing coefficients `t` come in two flavors ([`TMode`]):
//!
//! * [`TMode::NewtonSchulz`]: `t = m . f` recomputed each layer. With
//!   `c = [2, -1]`, `s = d = 0` and identity activation the update is exactly
//!   the quadratically convergent first-order Taylor (Newton-Schulz) inverse
//!   iteration `f <- 2f - f m f`; this mode anchors the validation suite.
//! * [`TMode::DiagNormalized`]: `t = m . diag(m)^-1`, fixed across layers.
//!   One layer at the Taylor embedding reproduces the single first-order
//!   Taylor step around `diag(m)`; deeper nets learn a polynomial filter in
//!   `t`. Because `t` is constant and the WMMSE system matrix is a rank-`K`
//!   Gram plus a ridge, every layer costs `O(K N_t^2)` instead of the
//!   `O(N_t^3)` of a factorization, which is where the runtime separation of
//!   the unfolded precoder comes from. This is the trainable/deployed mode.
//!
//! [`precode_unfolded`] drops the network into the Dinkelbach+WMMSE control
//! flow of [`crate::wmmse`]: identical outer/inner loops and stopping rules,
//! with the exact ridge solve and its multiplier bisection replaced by
//! `F(M) v_k` and a final power projection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::system::{project_power, rate_upper, total_power, PowerModel, PrecodingMatrix};
use crate::wmmse::{update_u, update_w, DinkelbachState, DinkelbachTrace};

const LOG2_WEIGHT: f64 = std::f64::consts::LOG2_E;
/// Inner sweeps tolerated without efficiency improvement before cutting a
/// subproblem short.
pub const STALL_WINDOW: usize = 25;
const LEAKY_SLOPE: f64 = 0.01;

/// Edge activation, applied to real and imaginary parts independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// No nonlinearity; preserves the Taylor embedding.
    Identity,
    /// Leaky ReLU with slope 0.01 on each real component.
    SplitLeakyRelu,
}

impl Activation {
    fn apply(&self, z: Complex64) -> Complex64 {
        match self {
            Activation::Identity => z,
            Activation::SplitLeakyRelu => Complex64::new(leaky(z.re), leaky(z.im)),
        }
    }

    fn derivative(&self, z: Complex64) -> (f64, f64) {
        match self {
            Activation::Identity => (1.0, 1.0),
            Activation::SplitLeakyRelu => (leaky_d(z.re), leaky_d(z.im)),
        }
    }
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_d(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Definition of the mixing coefficients `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TMode {
    /// `t = m . diag(m)^-1`, constant across layers (trainable mode).
    DiagNormalized,
    /// `t = m . f` recomputed per layer (exact Taylor/Newton-Schulz mode).
    NewtonSchulz,
}

/// Six trainable scalars of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub c0: f64,
    pub c1: f64,
    pub s0: f64,
    pub s1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl LayerParams {
    pub fn zeros() -> Self {
        Self { c0: 0.0, c1: 0.0, s0: 0.0, s1: 0.0, d0: 0.0, d1: 0.0 }
    }

    /// The exact first-order Taylor step: `f <- 2f - f t`.
    pub fn taylor() -> Self {
        Self { c0: 2.0, c1: -1.0, s0: 0.0, s1: 0.0, d0: 0.0, d1: 0.0 }
    }

    /// Pass-through layer.
    pub fn identity() -> Self {
        Self { c0: 1.0, c1: 0.0, s0: 0.0, s1: 0.0, d0: 0.0, d1: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.c0, self.c1, self.s0, self.s1, self.d0, self.d1]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { c0: a[0], c1: a[1], s0: a[2], s1: a[3], d0: a[4], d1: a[5] }
    }
}

/// Full parameter set of the unfolded network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedParams {
    pub layers: Vec<LayerParams>,
    pub activation: Activation,
    pub t_mode: TMode,
}

impl UnfoldedParams {
    /// All-zero parameters (the training protocol's default initialization).
    pub fn zeros(n_layers: usize) -> Self {
        assert!(n_layers >= 1);
        Self {
            layers: vec![LayerParams::zeros(); n_layers],
            activation: Activation::Identity,
            t_mode: TMode::DiagNormalized,
        }
    }

    /// Exact-Taylor embedding: every layer performs one Newton-Schulz step.
    pub fn taylor_embedding(n_layers: usize) -> Self {
        assert!(n_layers >= 1);
        Self {
            layers: vec![LayerParams::taylor(); n_layers],
            activation: Activation::Identity,
            t_mode: TMode::NewtonSchulz,
        }
    }

    /// Warm start for the trainable mode: one Taylor step around the
    /// diagonal, then pass-through layers for training to reshape.
    pub fn warm_start(n_layers: usize) -> Self {
        assert!(n_layers >= 1);
        let mut layers = vec![LayerParams::identity(); n_layers];
        layers[0] = LayerParams::taylor();
        Self {
            layers,
            activation: Activation::Identity,
            t_mode: TMode::DiagNormalized,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_parameters(&self) -> usize {
        6 * self.layers.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.as_array()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_parameters());
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let mut a = [0.0; 6];
            a.copy_from_slice(&flat[6 * i..6 * i + 6]);
            *layer = LayerParams::from_array(a);
        }
    }
}

/// Hidden state of the edge graph entering one layer.
#[derive(Debug, Clone)]
pub struct EdgeState {
    /// Per-edge hidden representation.
    pub f: CMatrix,
    /// Mixing coefficients in effect for the layer.
    pub t: CMatrix,
}

/// Cached intermediates of one forward pass, enough to replay it exactly.
#[derive(Debug, Clone)]
pub struct UnfoldTape {
    n: usize,
    params: UnfoldedParams,
    /// Per layer: state entering the layer and the pre-activation output.
    layers: Vec<(EdgeState, CMatrix)>,
}

/// System matrices the network can consume: either a dense matrix or the
/// Gram-plus-ridge structure of the WMMSE update, which multiplies in
/// `O(K N_t^2)`.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Dense(CMatrix),
    /// `m = V diag(weights) V^H + ridge I` with `V` of shape `N_t x K`.
    GramRidge {
        v: CMatrix,
        weights: Vec<f64>,
        ridge: f64,
    },
}

impl SystemMatrix {
    pub fn n(&self) -> usize {
        match self {
            SystemMatrix::Dense(m) => m.rows(),
            SystemMatrix::GramRidge { v, .. } => v.rows(),
        }
    }

    /// Diagonal of `m`.
    pub fn diag(&self) -> Vec<Complex64> {
        match self {
            SystemMatrix::Dense(m) => (0..m.rows()).map(|i| m[(i, i)]).collect(),
            SystemMatrix::GramRidge { v, weights, ridge } => (0..v.rows())
                .map(|i| {
                    let s: f64 = weights
                        .iter()
                        .enumerate()
                        .map(|(k, w)| w * v[(i, k)].norm_sqr())
                        .sum();
                    Complex64::new(s + ridge, 0.0)
                })
                .collect(),
        }
    }

    /// `x . m`.
    pub fn right_mul(&self, x: &CMatrix) -> CMatrix {
        match self {
            SystemMatrix::Dense(m) => x.matmul(m).expect("square"),
            SystemMatrix::GramRidge { v, weights, ridge } => {
                let mut xv = x.matmul(v).expect("shape");
                for j in 0..weights.len() {
                    for i in 0..x.rows() {
                        xv[(i, j)] *= weights[j];
                    }
                }
                let lr = xv.matmul(&v.hermitian()).expect("shape");
                lr.add(&x.scale(Complex64::new(*ridge, 0.0)))
            }
        }
    }

    /// `m . x`.
    pub fn left_mul(&self, x: &CMatrix) -> CMatrix {
        match self {
            SystemMatrix::Dense(m) => m.matmul(x).expect("square"),
            SystemMatrix::GramRidge { v, weights, ridge } => {
                let mut vhx = v.hermitian().matmul(x).expect("shape");
                for i in 0..weights.len() {
                    for j in 0..x.cols() {
                        vhx[(i, j)] *= weights[i];
                    }
                }
                let lr = v.matmul(&vhx).expect("shape");
                lr.add(&x.scale(Complex64::new(*ridge, 0.0)))
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            SystemMatrix::Dense(m) => m.clone(),
            SystemMatrix::GramRidge { v, weights, ridge } => {
                let n = v.rows();
                let mut m = CMatrix::zeros(n, n);
                for (k, w) in weights.iter().enumerate() {
                    m.add_outer_scaled(&v.column(k), *w);
                }
                m.add_ridge(*ridge);
                m
            }
        }
    }
}

/// Element-wise reciprocal of the diagonal, off-diagonal zero (the network's
/// initial edge state).
pub fn diag_inverse_init(m: &CMatrix) -> Result<CMatrix> {
    diag_inverse_from(&(0..m.rows()).map(|i| m[(i, i)]).collect::<Vec<_>>())
}

fn diag_inverse_from(diag: &[Complex64]) -> Result<CMatrix> {
    let n = diag.len();
    let mut out = CMatrix::zeros(n, n);
    for (i, d) in diag.iter().enumerate() {
        let mag = d.norm();
        if mag < 1e-300 {
            return Err(Error::TinyDiagonal {
                index: i,
                magnitude: mag,
            });
        }
        out[(i, i)] = 1.0 / d;
    }
    Ok(out)
}

/// One exact first-order Taylor (Newton-Schulz) step:
/// `2 f_prev - f_prev p f_prev`.
pub fn taylor_step_exact(f_prev: &CMatrix, p: &CMatrix) -> Result<CMatrix> {
    let fp = f_prev.matmul(p)?;
    let fpf = fp.matmul(f_prev)?;
    Ok(f_prev.scale(Complex64::new(2.0, 0.0)).sub(&fpf))
}

/// Column sums excluding the own row: `out[i,j] = sum_{i' != i} x[i',j]`.
fn column_neighbor_sum(x: &CMatrix) -> CMatrix {
    let (n, c) = x.shape();
    let mut col = vec![Complex64::new(0.0, 0.0); c];
    for i in 0..n {
        for j in 0..c {
            col[j] += x[(i, j)];
        }
    }
    CMatrix::from_fn(n, c, |i, j| col[j] - x[(i, j)])
}

/// Row sums excluding the own column: `out[i,j] = sum_{j' != j} x[i,j']`.
fn row_neighbor_sum(x: &CMatrix) -> CMatrix {
    let (n, c) = x.shape();
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..c {
            row[i] += x[(i, j)];
        }
    }
    CMatrix::from_fn(n, c, |i, j| row[i] - x[(i, j)])
}

/// Runs the unfolded network on a dense system matrix, producing the
/// approximate inverse `F(m)` and the tape for a later backward pass.
pub fn unfold_forward(m: &CMatrix, params: &UnfoldedParams) -> Result<(CMatrix, UnfoldTape)> {
    if m.rows() != m.cols() {
        return Err(Error::Shape {
            op: "unfold_forward",
            left: format!("{}x{}", m.rows(), m.cols()),
            right: "square".into(),
        });
    }
    unfold_forward_sys(&SystemMatrix::Dense(m.clone()), params, true)
        .map(|(f, tape)| (f, tape.expect("tape requested")))
}

/// Forward pass over any [`SystemMatrix`]; the tape is optional so inference
/// inside solver loops can skip the caching.
pub fn unfold_forward_sys(
    m: &SystemMatrix,
    params: &UnfoldedParams,
    want_tape: bool,
) -> Result<(CMatrix, Option<UnfoldTape>)> {
    assert!(params.n_layers() >= 1);
    let n = m.n();
    let d = m.diag();
    let mut f = diag_inverse_from(&d)?;
    let inv_d: Vec<Complex64> = d.iter().map(|x| 1.0 / x).collect();
    // constant t for the trainable mode, built once
    let t_const = match params.t_mode {
        TMode::DiagNormalized => {
            let mut t = m.right_mul(&CMatrix::identity(n));
            for j in 0..n {
                for i in 0..n {
                    t[(i, j)] *= inv_d[j];
                }
            }
            Some(t)
        }
        TMode::NewtonSchulz => None,
    };
    let mut tape_layers = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        let (t, h) = match params.t_mode {
            TMode::DiagNormalized => {
                // h = f . t = (f . m) . diag(m)^-1 through the structure
                let mut h = m.right_mul(&f);
                for j in 0..n {
                    for i in 0..n {
                        h[(i, j)] *= inv_d[j];
                    }
                }
                (t_const.clone().expect("constant t built"), h)
            }
            TMode::NewtonSchulz => {
                let t = m.left_mul(&f);
                let h = f.matmul(&t)?;
                (t, h)
            }
        };
        let z = assemble_layer(layer, &f, &h);
        let mut next = CMatrix::zeros(n, n);
        for (o, zi) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *o = params.activation.apply(*zi);
        }
        if !next.is_finite() {
            return Err(Error::NonFinite {
                context: "unfold_forward",
                layer: li,
            });
        }
        if want_tape {
            tape_layers.push((EdgeState { f: f.clone(), t }, z));
        }
        f = next;
    }
    let tape = if want_tape {
        Some(UnfoldTape {
            n,
            params: params.clone(),
            layers: tape_layers,
        })
    } else {
        None
    };
    Ok((f, tape))
}

fn assemble_layer(p: &LayerParams, f: &CMatrix, h: &CMatrix) -> CMatrix {
    let fc = column_neighbor_sum(f);
    let hc = column_neighbor_sum(h);
    let fr = row_neighbor_sum(f);
    let hr = row_neighbor_sum(h);
    let (n, c) = f.shape();
    CMatrix::from_fn(n, c, |i, j| {
        f[(i, j)] * p.c0
            + h[(i, j)] * p.c1
            + fc[(i, j)] * p.s0
            + hc[(i, j)] * p.s1
            + fr[(i, j)] * p.d0
            + hr[(i, j)] * p.d1
    })
}

/// Per-layer parameter gradients of a real scalar loss, given the gradient
/// of that loss w.r.t. the network output (packed as
/// `dL/dRe + i dL/dIm` per entry). Ordering matches [`UnfoldedParams::flat`].
pub fn unfold_backward(tape: &UnfoldTape, output_grad: &CMatrix) -> Result<Vec<f64>> {
    if output_grad.shape() != (tape.n, tape.n) {
        return Err(Error::TapeMismatch(format!(
            "output gradient is {:?}, tape is for {}x{}",
            output_grad.shape(),
            tape.n,
            tape.n
        )));
    }
    if tape.layers.len() != tape.params.n_layers() {
        return Err(Error::TapeMismatch("tape layer count mismatch".into()));
    }
    let m = match tape.params.t_mode {
        TMode::NewtonSchulz => Some(tape.reconstruct_m()?),
        TMode::DiagNormalized => None,
    };
    let mut grads = vec![0.0; tape.params.n_parameters()];
    let mut f_bar = output_grad.clone();
    for (li, (state, z)) in tape.layers.iter().enumerate().rev() {
        let layer = &tape.params.layers[li];
        let (n, c) = z.shape();
        // through the activation
        let z_bar = CMatrix::from_fn(n, c, |i, j| {
            let (dr, di) = tape.params.activation.derivative(z[(i, j)]);
            Complex64::new(f_bar[(i, j)].re * dr, f_bar[(i, j)].im * di)
        });
        let f = &state.f;
        let t = &state.t;
        let h = f.matmul(t)?;
        let fc = column_neighbor_sum(f);
        let hc = column_neighbor_sum(&h);
        let fr = row_neighbor_sum(f);
        let hr = row_neighbor_sum(&h);
        let g = &mut grads[6 * li..6 * li + 6];
        g[0] = real_inner(&z_bar, f);
        g[1] = real_inner(&z_bar, &h);
        g[2] = real_inner(&z_bar, &fc);
        g[3] = real_inner(&z_bar, &hc);
        g[4] = real_inner(&z_bar, &fr);
        g[5] = real_inner(&z_bar, &hr);

        // the adjoint of a neighbor sum is the same neighbor sum
        let zc = column_neighbor_sum(&z_bar);
        let zr = row_neighbor_sum(&z_bar);
        let h_bar = CMatrix::from_fn(n, c, |i, j| {
            z_bar[(i, j)] * layer.c1 + zc[(i, j)] * layer.s1 + zr[(i, j)] * layer.d1
        });
        let mut f_in_bar = CMatrix::from_fn(n, c, |i, j| {
            z_bar[(i, j)] * layer.c0 + zc[(i, j)] * layer.s0 + zr[(i, j)] * layer.d0
        });
        // h = f t contributes through f; in Newton-Schulz mode t = m f adds
        // the second path through t
        f_in_bar = f_in_bar.add(&h_bar.matmul(&t.hermitian())?);
        if let Some(m) = &m {
            let t_bar = f.hermitian().matmul(&h_bar)?;
            f_in_bar = f_in_bar.add(&m.hermitian().matmul(&t_bar)?);
        }
        f_bar = f_in_bar;
    }
    Ok(grads)
}

impl UnfoldTape {
    /// In Newton-Schulz mode the first layer records `t = m f0` with a
    /// diagonal invertible `f0`, so `m` is recoverable exactly.
    fn reconstruct_m(&self) -> Result<CMatrix> {
        let (state0, _) = &self.layers[0];
        let f0 = &state0.f;
        let n = self.n;
        let mut inv = CMatrix::zeros(n, n);
        for i in 0..n {
            if f0[(i, i)].norm() < 1e-300 {
                return Err(Error::TapeMismatch("first-layer state is singular".into()));
            }
            inv[(i, i)] = 1.0 / f0[(i, i)];
        }
        state0
            .t
            .matmul(&inv)
            .map_err(|_| Error::TapeMismatch("tape shapes inconsistent".into()))
    }
}

fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// The WMMSE system matrix for the unfolded precoder update, in structured
/// form: `M = (1/ln2) sum_i w_i |u_i|^2 gamma_i v_i v_i^H + (rho xi / B_w) I`.
pub fn wmmse_system_matrix(
    cs: &ChannelSet,
    u: &[Complex64],
    w: &[f64],
    rho: f64,
    pm: &PowerModel,
    bw: f64,
) -> SystemMatrix {
    let k = cs.n_users();
    let n = cs.n_antennas();
    let mut v = CMatrix::zeros(n, k);
    let mut weights = Vec::with_capacity(k);
    for i in 0..k {
        v.set_column(i, &cs.users[i].v);
        weights.push(LOG2_WEIGHT * w[i] * u[i].norm_sqr() * cs.users[i].gamma);
    }
    SystemMatrix::GramRidge {
        v,
        weights,
        ridge: (rho / bw) * pm.xi,
    }
}

/// Precoder update used inside the unfolded loop: `b_k = (1/ln2) w_k
/// sqrt(gamma_k) u_k^* F(M) v_k`, projected onto the power budget.
pub fn unfolded_b_update(
    cs: &ChannelSet,
    u: &[Complex64],
    w: &[f64],
    rho: f64,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
    params: &UnfoldedParams,
) -> Result<PrecodingMatrix> {
    let m = wmmse_system_matrix(cs, u, w, rho, pm, bw);
    let f = unfold_forward_sys(&m, params, false)?.0;
    let b = apply_inverse_map(cs, u, w, &f)?;
    Ok(project_power(&b, p_max))
}

/// `b_k = (1/ln2) w_k sqrt(gamma_k) u_k^* F v_k` for a given inverse
/// approximation `F` (pre-projection).
pub fn apply_inverse_map(
    cs: &ChannelSet,
    u: &[Complex64],
    w: &[f64],
    f: &CMatrix,
) -> Result<PrecodingMatrix> {
    let n = cs.n_antennas();
    let k = cs.n_users();
    let mut b = CMatrix::zeros(n, k);
    for i in 0..k {
        let scale = LOG2_WEIGHT * w[i] * cs.users[i].gamma.sqrt() * u[i].conj();
        let x = f.matvec(&cs.users[i].v)?;
        b.set_column(i, &x.scale(scale));
    }
    Ok(PrecodingMatrix::new(b))
}

/// Snapshot of the final subproblem, enough to rebuild the differentiable
/// part of the precoder map for truncated backpropagation.
#[derive(Debug, Clone)]
pub struct UnfoldedSolveDetail {
    pub rho: f64,
    pub u: Vec<Complex64>,
    pub w: Vec<f64>,
}

/// Full unfolded precoder: Dinkelbach + WMMSE control flow with the exact
/// ridge solve replaced by the unfolded inverse approximation and a power
/// projection. Returns the precoder, the outer trace, and the final
/// subproblem snapshot.
///
/// Three guards make the loop safe under an approximate inverse:
///
/// * the ratio is seeded with the initializer's achieved efficiency rather
///   than zero — at `rho = 0` the system matrix has no ridge and is
///   singular (rank `K < N_t`), and any seed below the optimal ratio keeps
///   the Dinkelbach recursion valid;
/// * the best iterate by achieved efficiency is remembered across all
///   sweeps and is what the call returns, so the precoder can never come
///   back worse than its initializer even when the inverse approximation is
///   poor for the instance at hand;
/// * a sweep whose layer stack blows up to non-finite values ends the solve
///   with the best iterate so far instead of failing it;
/// * an inner loop that stops improving the achieved efficiency for
///   [`STALL_WINDOW`] consecutive sweeps is cut short — a non-contracting
///   approximate update would otherwise oscillate until the sweep cap
///   without ever changing the result.
pub fn precode_unfolded(
    cs: &ChannelSet,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
    params: &UnfoldedParams,
    eps1: f64,
    eps2: f64,
) -> Result<(PrecodingMatrix, DinkelbachTrace, UnfoldedSolveDetail)> {
    assert!(eps1 > 0.0 && eps2 > 0.0);
    let ee_of = |b: &PrecodingMatrix| -> f64 {
        let sum_rate: f64 = rate_upper(cs, b).iter().sum();
        bw * sum_rate / total_power(pm, b)
    };
    let mut b = crate::wmmse::uniform_power_init(cs, p_max);
    let mut rho = ee_of(&b);
    let mut best_b = b.clone();
    let mut best_ee = ee_of(&b);
    let mut best_detail = UnfoldedSolveDetail {
        rho,
        u: update_u(cs, &b),
        w: vec![1.0; cs.n_users()],
    };
    let mut states = Vec::new();
    let mut converged = false;
    let mut blew_up = false;
    'outer: for iteration in 0..crate::wmmse::MAX_OUTER_ITERATIONS {
        let mut prev_sum_log_w = f64::NAN;
        let mut stalled_sweeps = 0;
        for _sweep in 0..crate::wmmse::MAX_INNER_SWEEPS {
            let u = update_u(cs, &b);
            let w = update_w(cs, &b, &u);
            let sum_log_w: f64 = w.iter().map(|x| x.ln()).sum();
            b = match unfolded_b_update(cs, &u, &w, rho, pm, bw, p_max, params) {
                Ok(next) => next,
                Err(Error::NonFinite { .. }) => {
                    blew_up = true;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let ee = ee_of(&b);
            if ee > best_ee {
                best_ee = ee;
                best_b = b.clone();
                best_detail = UnfoldedSolveDetail { rho, u, w };
                stalled_sweeps = 0;
            } else {
                stalled_sweeps += 1;
                if stalled_sweeps >= STALL_WINDOW {
                    break;
                }
            }
            if (sum_log_w - prev_sum_log_w).abs() < eps2 {
                break;
            }
            prev_sum_log_w = sum_log_w;
        }
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
    if blew_up {
        converged = false;
    }
    Ok((best_b, DinkelbachTrace { states, converged }, best_detail))
}
