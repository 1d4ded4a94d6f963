//! End-to-end bipartite edge-GNN precoder.
//!
//! The system is a fully connected bipartite graph: antenna nodes on one
//! side, user nodes on the other, one edge per (antenna, user) pair. Edge
//! `(n, k)` carries a two-dimensional real feature, initialized with the real
//! and imaginary parts of the effective statistical channel
//! `sqrt(gamma_k) v_k[n]`.
//!
//! Each of the `L` rounds updates every edge from three shared two-layer
//! perceptrons: `mlp1` transforms the features of edges at the same user
//! (other antennas), `mlp2` those at the same antenna (other users), the
//! transformed features are sum-aggregated, and `mlp3` combines the previous
//! edge feature with the aggregate. ReLU is applied between rounds; the last
//! round is linear so the output can take either sign. The final edge
//! features are read as Re/Im of the precoder entry and projected onto the
//! power budget.
//!
//! Weight sharing across edges makes the map equivariant to antenna and user
//! permutations, and the cost of one pass is linear in the edge count per
//! round.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::grad::{project_power_backward, real_inner};
use crate::linalg::CMatrix;
use crate::rng::rng_from_seed;
use crate::system::{project_power, PrecodingMatrix};
use num_complex::Complex64;

/// Feature dimension on input and output edges (real/imaginary split).
pub const EDGE_DIM: usize = 2;
/// Hidden width of every perceptron.
pub const HIDDEN_DIM: usize = 64;

/// Dense edge features of the bipartite antenna-user graph, stored as
/// `(n_antennas, n_users, EDGE_DIM)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteEdgeGraph {
    pub n_antennas: usize,
    pub n_users: usize,
    pub features: Vec<f64>,
}

impl BipartiteEdgeGraph {
    /// Edge features from statistical CSI: `[Re, Im]` of `sqrt(gamma_k) v_k[n]`.
    pub fn from_channel(cs: &ChannelSet) -> Self {
        let n = cs.n_antennas();
        let k = cs.n_users();
        let mut features = vec![0.0; n * k * EDGE_DIM];
        for (ku, user) in cs.users.iter().enumerate() {
            let scale = user.gamma.sqrt();
            for r in 0..n {
                let z = user.v[r] * scale;
                features[(r * k + ku) * EDGE_DIM] = z.re;
                features[(r * k + ku) * EDGE_DIM + 1] = z.im;
            }
        }
        Self {
            n_antennas: n,
            n_users: k,
            features,
        }
    }
}

/// One two-layer perceptron: `in -> HIDDEN_DIM -> out`, ReLU inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `HIDDEN_DIM x in_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `out_dim x HIDDEN_DIM`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound1 = (6.0 / in_dim as f64).sqrt();
        let bound2 = (6.0 / HIDDEN_DIM as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            w1: (0..HIDDEN_DIM * in_dim)
                .map(|_| rng.gen_range(-bound1..bound1))
                .collect(),
            // small positive bias keeps hidden units off the ReLU kink when
            // an upstream activation zeroes the input
            b1: vec![0.01; HIDDEN_DIM],
            w2: (0..out_dim * HIDDEN_DIM)
                .map(|_| rng.gen_range(-bound2..bound2))
                .collect(),
            b2: vec![0.0; out_dim],
        }
    }

    fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Forward pass; returns the output and the hidden pre-activation.
    fn forward(&self, x: &[f64], out: &mut [f64], hidden_pre: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for h in 0..HIDDEN_DIM {
            let mut acc = self.b1[h];
            let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            hidden_pre[h] = acc;
        }
        for o in 0..self.out_dim {
            let mut acc = self.b2[o];
            let row = &self.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            for (w, hp) in row.iter().zip(hidden_pre.iter()) {
                acc += w * hp.max(0.0);
            }
            out[o] = acc;
        }
    }

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(
        &self,
        x: &[f64],
        hidden_pre: &[f64],
        out_grad: &[f64],
        grads: &mut MlpGrads,
        x_grad: &mut [f64],
    ) {
        let mut hidden_grad = [0.0f64; HIDDEN_DIM];
        for o in 0..self.out_dim {
            let g = out_grad[o];
            if g == 0.0 {
                continue;
            }
            grads.b2[o] += g;
            let row = &self.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            let grow = &mut grads.w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
            for h in 0..HIDDEN_DIM {
                grow[h] += g * hidden_pre[h].max(0.0);
                hidden_grad[h] += g * row[h];
            }
        }
        for h in 0..HIDDEN_DIM {
            if hidden_pre[h] <= 0.0 {
                hidden_grad[h] = 0.0;
            }
        }
        for h in 0..HIDDEN_DIM {
            let g = hidden_grad[h];
            if g == 0.0 {
                continue;
            }
            grads.b1[h] += g;
            let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
            let grow = &mut grads.w1[h * self.in_dim..(h + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                x_grad[i] += g * row[i];
            }
        }
    }
}

#[derive(Debug, Clone)]
struct MlpGrads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl MlpGrads {
    fn zeros_like(m: &Mlp) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }
}

/// The three perceptrons of one message-passing round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMlps {
    pub mlp1: Mlp,
    pub mlp2: Mlp,
    pub mlp3: Mlp,
}

/// All trainable state of the end-to-end model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eParams {
    pub layers: Vec<LayerMlps>,
}

impl E2eParams {
    /// Kaiming-style uniform initialization, deterministic in the seed.
    pub fn init(n_layers: usize, seed: u64) -> Self {
        assert!(n_layers >= 1);
        let mut rng = rng_from_seed(seed);
        let layers = (0..n_layers)
            .map(|_| LayerMlps {
                mlp1: Mlp::init(EDGE_DIM, EDGE_DIM, &mut rng),
                mlp2: Mlp::init(EDGE_DIM, EDGE_DIM, &mut rng),
                mlp3: Mlp::init(2 * EDGE_DIM, EDGE_DIM, &mut rng),
            })
            .collect();
        Self { layers }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.mlp1.n_parameters() + l.mlp2.n_parameters() + l.mlp3.n_parameters())
            .sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            for m in [&l.mlp1, &l.mlp2, &l.mlp3] {
                out.extend_from_slice(&m.w1);
                out.extend_from_slice(&m.b1);
                out.extend_from_slice(&m.w2);
                out.extend_from_slice(&m.b2);
            }
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_parameters());
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for l in self.layers.iter_mut() {
            for m in [&mut l.mlp1, &mut l.mlp2, &mut l.mlp3] {
                take(&mut m.w1);
                take(&mut m.b1);
                take(&mut m.w2);
                take(&mut m.b2);
            }
        }
    }
}

/// Per-edge cached state of one round.
#[derive(Debug, Clone)]
struct LayerTape {
    a_in: Vec<f64>,
    m1_hidden: Vec<f64>,
    m2_hidden: Vec<f64>,
    m3_in: Vec<f64>,
    m3_hidden: Vec<f64>,
    /// Pre-activation output of the round.
    z: Vec<f64>,
}

/// Cached forward pass of the full model.
#[derive(Debug)]
pub struct E2eTape {
    n_antennas: usize,
    n_users: usize,
    layers: Vec<LayerTape>,
    /// Network output before the power projection.
    pub pre_projection: PrecodingMatrix,
    /// Perceptron evaluations performed (3 per edge per round).
    pub mlp_evaluations: usize,
    p_max: f64,
}

/// Runs the model on edge features and returns the feasible precoder with
/// the tape for backpropagation.
pub fn e2e_forward(
    graph: &BipartiteEdgeGraph,
    params: &E2eParams,
    p_max: f64,
) -> Result<(PrecodingMatrix, E2eTape)> {
    let n = graph.n_antennas;
    let k = graph.n_users;
    let e = n * k;
    let mut a = graph.features.clone();
    let mut tapes = Vec::with_capacity(params.n_layers());
    let mut evals = 0usize;
    let last = params.n_layers() - 1;
    for (li, layer) in params.layers.iter().enumerate() {
        let mut m1_hidden = vec![0.0; e * HIDDEN_DIM];
        let mut m1_out = vec![0.0; e * EDGE_DIM];
        let mut m2_hidden = vec![0.0; e * HIDDEN_DIM];
        let mut m2_out = vec![0.0; e * EDGE_DIM];
        for idx in 0..e {
            let x = &a[idx * EDGE_DIM..(idx + 1) * EDGE_DIM];
            layer.mlp1.forward(
                x,
                &mut m1_out[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                &mut m1_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
            );
            layer.mlp2.forward(
                x,
                &mut m2_out[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                &mut m2_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
            );
            evals += 2;
        }
        // sum over same-user edges (other antennas) and same-antenna edges
        // (other users), excluding the edge itself
        let mut user_sums = vec![0.0; k * EDGE_DIM];
        let mut antenna_sums = vec![0.0; n * EDGE_DIM];
        for r in 0..n {
            for ku in 0..k {
                let idx = r * k + ku;
                for d in 0..EDGE_DIM {
                    user_sums[ku * EDGE_DIM + d] += m1_out[idx * EDGE_DIM + d];
                    antenna_sums[r * EDGE_DIM + d] += m2_out[idx * EDGE_DIM + d];
                }
            }
        }
        let mut m3_in = vec![0.0; e * 2 * EDGE_DIM];
        let mut m3_hidden = vec![0.0; e * HIDDEN_DIM];
        let mut z = vec![0.0; e * EDGE_DIM];
        for r in 0..n {
            for ku in 0..k {
                let idx = r * k + ku;
                let input = &mut m3_in[idx * 2 * EDGE_DIM..(idx + 1) * 2 * EDGE_DIM];
                for d in 0..EDGE_DIM {
                    input[d] = a[idx * EDGE_DIM + d];
                    input[EDGE_DIM + d] = user_sums[ku * EDGE_DIM + d]
                        - m1_out[idx * EDGE_DIM + d]
                        + antenna_sums[r * EDGE_DIM + d]
                        - m2_out[idx * EDGE_DIM + d];
                }
                let input = &m3_in[idx * 2 * EDGE_DIM..(idx + 1) * 2 * EDGE_DIM];
                layer.mlp3.forward(
                    input,
                    &mut z[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                    &mut m3_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
                );
                evals += 1;
            }
        }
        let a_next: Vec<f64> = if li == last {
            z.clone()
        } else {
            z.iter().map(|&x| x.max(0.0)).collect()
        };
        if a_next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "e2e_forward",
                layer: li,
            });
        }
        tapes.push(LayerTape {
            a_in: a,
            m1_hidden,
            m2_hidden,
            m3_in,
            m3_hidden,
            z,
        });
        a = a_next;
    }
    let mut pre = CMatrix::zeros(n, k);
    for r in 0..n {
        for ku in 0..k {
            let idx = r * k + ku;
            pre[(r, ku)] = Complex64::new(a[idx * EDGE_DIM], a[idx * EDGE_DIM + 1]);
        }
    }
    let pre = PrecodingMatrix::new(pre);
    let projected = project_power(&pre, p_max);
    Ok((
        projected,
        E2eTape {
            n_antennas: n,
            n_users: k,
            layers: tapes,
            pre_projection: pre,
            mlp_evaluations: evals,
            p_max,
        },
    ))
}

/// Backpropagates a packed gradient at the projected precoder output to
/// gradients for every perceptron weight (ordering matches
/// [`E2eParams::flat`]).
pub fn e2e_backward(
    tape: &E2eTape,
    params: &E2eParams,
    output_grad: &CMatrix,
) -> Result<Vec<f64>> {
    let n = tape.n_antennas;
    let k = tape.n_users;
    let e = n * k;
    if output_grad.shape() != (n, k) {
        return Err(Error::TapeMismatch(format!(
            "output gradient is {:?}, tape is for {}x{}",
            output_grad.shape(),
            n,
            k
        )));
    }
    if tape.layers.len() != params.n_layers() {
        return Err(Error::TapeMismatch("layer count mismatch".into()));
    }
    // through the projection
    let pre_grad = project_power_backward(&tape.pre_projection, tape.p_max, output_grad);
    let mut a_grad = vec![0.0; e * EDGE_DIM];
    for r in 0..n {
        for ku in 0..k {
            let idx = r * k + ku;
            a_grad[idx * EDGE_DIM] = pre_grad[(r, ku)].re;
            a_grad[idx * EDGE_DIM + 1] = pre_grad[(r, ku)].im;
        }
    }
    let last = params.n_layers() - 1;
    let mut layer_grads: Vec<[MlpGrads; 3]> = params
        .layers
        .iter()
        .map(|l| {
            [
                MlpGrads::zeros_like(&l.mlp1),
                MlpGrads::zeros_like(&l.mlp2),
                MlpGrads::zeros_like(&l.mlp3),
            ]
        })
        .collect();
    for li in (0..params.n_layers()).rev() {
        let layer = &params.layers[li];
        let lt = &tape.layers[li];
        // through the inter-round ReLU
        let mut z_grad = a_grad.clone();
        if li != last {
            for (g, &z) in z_grad.iter_mut().zip(&lt.z) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let mut next_a_grad = vec![0.0; e * EDGE_DIM];
        let mut m1_out_grad = vec![0.0; e * EDGE_DIM];
        let mut m2_out_grad = vec![0.0; e * EDGE_DIM];
        // through mlp3 at each edge; collect gradients for the aggregate
        let mut agg_user = vec![0.0; k * EDGE_DIM];
        let mut agg_antenna = vec![0.0; n * EDGE_DIM];
        for r in 0..n {
            for ku in 0..k {
                let idx = r * k + ku;
                let mut x_grad = [0.0f64; 2 * EDGE_DIM];
                layer.mlp3.backward(
                    &lt.m3_in[idx * 2 * EDGE_DIM..(idx + 1) * 2 * EDGE_DIM],
                    &lt.m3_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
                    &z_grad[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                    &mut layer_grads[li][2],
                    &mut x_grad,
                );
                for d in 0..EDGE_DIM {
                    next_a_grad[idx * EDGE_DIM + d] += x_grad[d];
                    // aggregate slot: contributes to every same-user edge
                    // except this one and every same-antenna edge except
                    // this one
                    agg_user[ku * EDGE_DIM + d] += x_grad[EDGE_DIM + d];
                    agg_antenna[r * EDGE_DIM + d] += x_grad[EDGE_DIM + d];
                    m1_out_grad[idx * EDGE_DIM + d] -= x_grad[EDGE_DIM + d];
                    m2_out_grad[idx * EDGE_DIM + d] -= x_grad[EDGE_DIM + d];
                }
            }
        }
        for r in 0..n {
            for ku in 0..k {
                let idx = r * k + ku;
                for d in 0..EDGE_DIM {
                    m1_out_grad[idx * EDGE_DIM + d] += agg_user[ku * EDGE_DIM + d];
                    m2_out_grad[idx * EDGE_DIM + d] += agg_antenna[r * EDGE_DIM + d];
                }
            }
        }
        // through mlp1/mlp2 at each edge
        for idx in 0..e {
            let x = &lt.a_in[idx * EDGE_DIM..(idx + 1) * EDGE_DIM];
            let mut x_grad = [0.0f64; EDGE_DIM];
            layer.mlp1.backward(
                x,
                &lt.m1_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
                &m1_out_grad[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                &mut layer_grads[li][0],
                &mut x_grad,
            );
            for d in 0..EDGE_DIM {
                next_a_grad[idx * EDGE_DIM + d] += x_grad[d];
            }
            let mut x_grad = [0.0f64; EDGE_DIM];
            layer.mlp2.backward(
                x,
                &lt.m2_hidden[idx * HIDDEN_DIM..(idx + 1) * HIDDEN_DIM],
                &m2_out_grad[idx * EDGE_DIM..(idx + 1) * EDGE_DIM],
                &mut layer_grads[li][1],
                &mut x_grad,
            );
            for d in 0..EDGE_DIM {
                next_a_grad[idx * EDGE_DIM + d] += x_grad[d];
            }
        }
        a_grad = next_a_grad;
    }
    // flatten in the same order as E2eParams::flat
    let mut out = Vec::new();
    for lg in &layer_grads {
        for g in lg {
            out.extend_from_slice(&g.w1);
            out.extend_from_slice(&g.b1);
            out.extend_from_slice(&g.w2);
            out.extend_from_slice(&g.b2);
        }
    }
    Ok(out)
}

/// Convenience wrapper: full precoder from a channel set.
pub fn precode_e2e(
    cs: &ChannelSet,
    params: &E2eParams,
    p_max: f64,
) -> Result<PrecodingMatrix> {
    let graph = BipartiteEdgeGraph::from_channel(cs);
    Ok(e2e_forward(&graph, params, p_max)?.0)
}

/// Loss `-EE` and its parameter gradients for a single instance; the shared
/// entry point for training and gradient checks.
pub fn e2e_loss_and_grads(
    cs: &ChannelSet,
    params: &E2eParams,
    pm: &crate::system::PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<(f64, Vec<f64>)> {
    let graph = BipartiteEdgeGraph::from_channel(cs);
    let (b, tape) = e2e_forward(&graph, params, p_max)?;
    let (ee, ee_grad) = crate::grad::ee_and_gradient(cs, &b, pm, bw);
    let neg = ee_grad.scale(Complex64::new(-1.0, 0.0));
    let grads = e2e_backward(&tape, params, &neg)?;
    Ok((-ee, grads))
}

/// Scalar probe loss used by tests: `Re<G, b_projected>`.
pub fn probe_loss(b: &PrecodingMatrix, probe: &CMatrix) -> f64 {
    real_inner(probe, &b.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel_set, ArrayGeometry, ChannelDistributionSpec};
    use crate::rng::{rng_from_seed, standard_complex};
    use crate::system::PowerModel;

    fn test_set(nx: usize, ny: usize, k: usize, seed: u64) -> ChannelSet {
        let dist = ChannelDistributionSpec::default();
        draw_channel_set(&ArrayGeometry::new(nx, ny), k, seed, &dist, 2.5)
    }

    /// Central difference at two step sizes; `None` when they disagree, which
    /// flags a ReLU kink inside the stencil (finite differences are invalid
    /// there, not the analytic gradient).
    fn fd_at(
        loss: &impl Fn(&E2eParams) -> f64,
        params: &E2eParams,
        flat: &[f64],
        idx: usize,
    ) -> Option<f64> {
        let fd = |step: f64| -> f64 {
            let mut fp = flat.to_vec();
            fp[idx] += step;
            let mut fm = flat.to_vec();
            fm[idx] -= step;
            let mut plus = params.clone();
            plus.set_flat(&fp);
            let mut minus = params.clone();
            minus.set_flat(&fm);
            (loss(&plus) - loss(&minus)) / (2.0 * step)
        };
        let coarse = fd(1e-5);
        let fine = fd(1e-6);
        let denom = coarse.abs().max(fine.abs()).max(1e-9);
        if (coarse - fine).abs() / denom > 1e-3 {
            return None;
        }
        Some(fine)
    }

    #[test]
    fn zero_features_zero_biases_give_zero_output() {
        let graph = BipartiteEdgeGraph {
            n_antennas: 3,
            n_users: 2,
            features: vec![0.0; 12],
        };
        let mut params = E2eParams::init(2, 1);
        for l in params.layers.iter_mut() {
            for m in [&mut l.mlp1, &mut l.mlp2, &mut l.mlp3] {
                m.b1.iter_mut().for_each(|b| *b = 0.0);
                m.b2.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        let (_, tape) = e2e_forward(&graph, &params, 10.0).unwrap();
        assert_eq!(tape.pre_projection.b.frobenius_norm(), 0.0);
    }

    #[test]
    fn output_always_feasible() {
        let params = E2eParams::init(2, 2);
        for seed in 0..10 {
            let cs = test_set(2, 2, 3, 100 + seed);
            let b = precode_e2e(&cs, &params, 10.0).unwrap();
            assert!(b.is_feasible(10.0, 1e-9));
        }
    }

    #[test]
    fn antenna_and_user_permutations_permute_output() {
        let params = E2eParams::init(2, 3);
        let cs = test_set(2, 2, 3, 5);
        let b = precode_e2e(&cs, &params, 10.0).unwrap();
        let n = cs.n_antennas();

        // antenna permutation
        let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut pa = cs.clone();
        for user in pa.users.iter_mut() {
            user.v = crate::linalg::CVector::from_fn(n, |i| user.v[perm[i]]);
        }
        let ba = precode_e2e(&pa, &params, 10.0).unwrap();
        for ku in 0..cs.n_users() {
            for i in 0..n {
                assert!((ba.b[(i, ku)] - b.b[(perm[i], ku)]).norm() <= 1e-6);
            }
        }

        // user permutation
        let uperm = [2usize, 0, 1];
        let mut pu = cs.clone();
        pu.users = uperm.iter().map(|&j| cs.users[j].clone()).collect();
        let bu = precode_e2e(&pu, &params, 10.0).unwrap();
        for (to, &from) in uperm.iter().enumerate() {
            for i in 0..n {
                assert!((bu.b[(i, to)] - b.b[(i, from)]).norm() <= 1e-6);
            }
        }
    }

    #[test]
    fn cost_is_linear_in_edge_count() {
        let params = E2eParams::init(2, 4);
        let small = test_set(2, 2, 2, 6); // 8 edges
        let large = test_set(4, 2, 4, 7); // 32 edges
        let gs = BipartiteEdgeGraph::from_channel(&small);
        let gl = BipartiteEdgeGraph::from_channel(&large);
        let (_, ts) = e2e_forward(&gs, &params, 10.0).unwrap();
        let (_, tl) = e2e_forward(&gl, &params, 10.0).unwrap();
        // 3 MLP evaluations per edge per round
        assert_eq!(ts.mlp_evaluations, 2 * 3 * 8);
        assert_eq!(tl.mlp_evaluations, 2 * 3 * 32);
        assert_eq!(
            tl.mlp_evaluations / ts.mlp_evaluations,
            32 / 8,
            "evaluation count must scale with the edge count"
        );
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let params = E2eParams::init(1, 8);
        let cs = test_set(2, 1, 2, 9);
        let graph = BipartiteEdgeGraph::from_channel(&cs);
        let (_, tape) = e2e_forward(&graph, &params, 10.0).unwrap();
        let grads = e2e_backward(&tape, &params, &CMatrix::zeros(2, 2)).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_shapes() {
        let params = E2eParams::init(1, 10);
        let cs = test_set(2, 1, 2, 11);
        let graph = BipartiteEdgeGraph::from_channel(&cs);
        let (_, tape) = e2e_forward(&graph, &params, 10.0).unwrap();
        assert!(matches!(
            e2e_backward(&tape, &params, &CMatrix::zeros(3, 3)),
            Err(Error::TapeMismatch(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences_through_projection() {
        // small instance; the initializer's output lands in the rescaling
        // branch of the projection, which is the delicate path
        let cs = test_set(2, 2, 2, 12);
        let pm = PowerModel::with_defaults(4);
        let params = E2eParams::init(1, 13);
        let (b, tape) = e2e_forward(&BipartiteEdgeGraph::from_channel(&cs), &params, 1.0).unwrap();
        assert!(
            tape.pre_projection.total_tx_power() > 1.0,
            "instance must exercise the scaling branch"
        );
        let (_, ee_grad) = crate::grad::ee_and_gradient(&cs, &b, &pm, 2e7);
        let neg = ee_grad.scale(Complex64::new(-1.0, 0.0));
        let grads = e2e_backward(&tape, &params, &neg).unwrap();

        let loss = |p: &E2eParams| -> f64 {
            let b = precode_e2e(&cs, p, 1.0).unwrap();
            -crate::grad::ee_and_gradient(&cs, &b, &pm, 2e7).0
        };
        // check a deterministic sample of parameters across all MLPs
        let flat = params.flat();
        let mut rng = rng_from_seed(14);
        let mut checked = 0;
        let mut skipped = 0;
        while checked < 60 {
            let idx = rng.gen_range(0..flat.len());
            match fd_at(&loss, &params, &flat, idx) {
                Some(fd) => {
                    let ad = grads[idx];
                    if ad.abs() < 1e-12 && fd.abs() < 1e-9 {
                        checked += 1;
                        continue; // inert parameter (dead ReLU path)
                    }
                    let denom = ad.abs().max(fd.abs());
                    assert!(
                        (ad - fd).abs() / denom <= 1e-4,
                        "param {}: ad {} vs fd {}",
                        idx,
                        ad,
                        fd
                    );
                    checked += 1;
                }
                None => skipped += 1,
            }
            assert!(skipped < 60, "too many kink-adjacent samples");
        }
    }

    #[test]
    fn probe_gradient_matches_fd_without_projection_branch() {
        // feasible-branch configuration: large budget, projection inactive
        let cs = test_set(2, 1, 2, 15);
        let params = E2eParams::init(2, 16);
        let graph = BipartiteEdgeGraph::from_channel(&cs);
        let (b, tape) = e2e_forward(&graph, &params, 1e6).unwrap();
        assert!(tape.pre_projection.total_tx_power() < 1e6);
        let mut rng = rng_from_seed(17);
        let probe = CMatrix::from_fn(2, 2, |_, _| standard_complex(&mut rng));
        let _ = probe_loss(&b, &probe);
        let grads = e2e_backward(&tape, &params, &probe).unwrap();
        let loss = |p: &E2eParams| -> f64 {
            let b = precode_e2e(&cs, p, 1e6).unwrap();
            probe_loss(&b, &probe)
        };
        let flat = params.flat();
        let mut checked = 0;
        let mut skipped = 0;
        while checked < 40 {
            let idx = rng.gen_range(0..flat.len());
            match fd_at(&loss, &params, &flat, idx) {
                Some(fd) => {
                    let ad = grads[idx];
                    if ad.abs() < 1e-12 && fd.abs() < 1e-9 {
                        checked += 1;
                        continue;
                    }
                    let denom = ad.abs().max(fd.abs());
                    assert!(
                        (ad - fd).abs() / denom <= 1e-4,
                        "param {}: ad {} vs fd {}",
                        idx,
                        ad,
                        fd
                    );
                    checked += 1;
                }
                None => skipped += 1,
            }
            assert!(skipped < 40, "too many kink-adjacent samples");
        }
    }

    #[test]
    fn params_flat_round_trip() {
        let params = E2eParams::init(2, 18);
        let flat = params.flat();
        let mut other = E2eParams::init(2, 19);
        assert_ne!(other, params);
        other.set_flat(&flat);
        assert_eq!(other, params);
    }
}
