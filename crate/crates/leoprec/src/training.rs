//! Unsupervised training of both learned precoders.
//!
//! The loss is the negative mean energy efficiency over a batch, computed
//! with the same statistical rate bound and power model used everywhere else,
//! so the training objective and the evaluation metric cannot drift apart.
//! Updates are plain Adam.
//!
//! For the end-to-end model the loss is differentiated through the whole
//! forward pass including the power projection. For the unfolded model the
//! solver loops run gradient-free first; gradients then flow through a replay
//! of the final subproblem's precoder update only (receivers, weights and the
//! ratio are treated as stop-gradient constants). This truncation bounds
//! memory and matches how the unfolded layers are actually deployed.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDistributionSpec, ChannelSet};
use crate::e2e::{e2e_loss_and_grads, precode_e2e, E2eParams};
use crate::error::{Error, Result};
use crate::grad::{ee_and_gradient, project_power_backward};
use crate::linalg::CMatrix;
use crate::rng::{child_seed, rng_from_seed};
use crate::system::{energy_efficiency, project_power, EEBreakdown, PowerModel, PrecodingMatrix};
use crate::unfolded::{
    apply_inverse_map, precode_unfolded, unfold_backward, unfold_forward_sys,
    wmmse_system_matrix, UnfoldedParams,
};
use crate::wmmse::DEFAULT_EPS;

/// Seed namespaces keeping train and test draws structurally disjoint.
const TRAIN_NAMESPACE: u64 = 0x7452_4149;
const TEST_NAMESPACE: u64 = 0x7445_5354;

pub fn train_base_seed(seed: u64) -> u64 {
    child_seed(seed, TRAIN_NAMESPACE)
}

pub fn test_base_seed(seed: u64) -> u64 {
    child_seed(seed, TEST_NAMESPACE)
}

/// Training hyperparameters. Defaults: learning rate 0.01, batch size 64,
/// 10000 train / 1000 test draws, Adam(0.9, 0.999, 1e-8).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub train_draws: usize,
    pub test_draws: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop after this many epochs without test-EE improvement.
    pub early_stop_patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            train_draws: 10_000,
            test_draws: 1_000,
            epochs: 20,
            seed: 0,
            early_stop_patience: 5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl AdamState {
    pub fn new(n_parameters: usize) -> Self {
        Self {
            m: vec![0.0; n_parameters],
            v: vec![0.0; n_parameters],
            step: 0,
        }
    }

    pub fn update(&mut self, cfg: &TrainConfig, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grads[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Either learned precoder, behind one training interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Precoder {
    Unfolded(UnfoldedParams),
    EndToEnd(E2eParams),
}

impl Precoder {
    pub fn architecture_id(&self) -> &'static str {
        match self {
            Precoder::Unfolded(_) => "taylor_unfolded",
            Precoder::EndToEnd(_) => "end_to_end",
        }
    }

    pub fn n_parameters(&self) -> usize {
        match self {
            Precoder::Unfolded(p) => p.n_parameters(),
            Precoder::EndToEnd(p) => p.n_parameters(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self {
            Precoder::Unfolded(p) => p.flat(),
            Precoder::EndToEnd(p) => p.flat(),
        }
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        match self {
            Precoder::Unfolded(p) => p.set_flat(flat),
            Precoder::EndToEnd(p) => p.set_flat(flat),
        }
    }

    /// Runs the precoder on one channel set.
    pub fn precode(
        &self,
        cs: &ChannelSet,
        pm: &PowerModel,
        bw: f64,
        p_max: f64,
    ) -> Result<PrecodingMatrix> {
        match self {
            Precoder::Unfolded(p) => {
                precode_unfolded(cs, pm, bw, p_max, p, DEFAULT_EPS, DEFAULT_EPS).map(|r| r.0)
            }
            Precoder::EndToEnd(p) => precode_e2e(cs, p, p_max),
        }
    }

    /// Loss `-EE` for one instance, without gradients.
    pub fn loss(&self, cs: &ChannelSet, pm: &PowerModel, bw: f64, p_max: f64) -> Result<f64> {
        let b = self.precode(cs, pm, bw, p_max)?;
        Ok(-energy_efficiency(cs, &b, pm, bw).ee)
    }

    /// Loss and parameter gradients for one instance.
    pub fn loss_and_grads(
        &self,
        cs: &ChannelSet,
        pm: &PowerModel,
        bw: f64,
        p_max: f64,
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            Precoder::Unfolded(p) => unfolded_loss_and_grads(cs, p, pm, bw, p_max),
            Precoder::EndToEnd(p) => e2e_loss_and_grads(cs, p, pm, bw, p_max),
        }
    }
}

/// Truncated-backprop loss for the unfolded model: solve gradient-free, then
/// differentiate one replay of the final precoder update.
pub fn unfolded_loss_and_grads(
    cs: &ChannelSet,
    params: &UnfoldedParams,
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<(f64, Vec<f64>)> {
    let (_b, _trace, detail) =
        precode_unfolded(cs, pm, bw, p_max, params, DEFAULT_EPS, DEFAULT_EPS)?;
    let sys = wmmse_system_matrix(cs, &detail.u, &detail.w, detail.rho, pm, bw);
    let (f, tape) = unfold_forward_sys(&sys, params, true)?;
    let tape = tape.expect("tape requested");
    let b_pre = apply_inverse_map(cs, &detail.u, &detail.w, &f)?;
    let b = project_power(&b_pre, p_max);
    let (ee, ee_grad) = ee_and_gradient(cs, &b, pm, bw);
    let loss_grad = ee_grad.scale(Complex64::new(-1.0, 0.0));
    let pre_grad = project_power_backward(&b_pre, p_max, &loss_grad);
    // back through b_k = alpha_k F v_k: F_bar = sum_k conj(alpha_k) g_k v_k^H
    let n = cs.n_antennas();
    let mut f_bar = CMatrix::zeros(n, n);
    for k in 0..cs.n_users() {
        let alpha = std::f64::consts::LOG2_E
            * detail.w[k]
            * cs.users[k].gamma.sqrt()
            * detail.u[k].conj();
        let ac = alpha.conj();
        for i in 0..n {
            let gi = pre_grad[(i, k)] * ac;
            for j in 0..n {
                f_bar[(i, j)] += gi * cs.users[k].v[j].conj();
            }
        }
    }
    let grads = unfold_backward(&tape, &f_bar)?;
    Ok((-ee, grads))
}

/// Negative mean energy efficiency over a batch.
pub fn batch_loss(
    model: &Precoder,
    batch: &[ChannelSet],
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<f64> {
    assert!(!batch.is_empty());
    let mut acc = 0.0;
    for cs in batch {
        acc += model.loss(cs, pm, bw, p_max)?;
    }
    Ok(acc / batch.len() as f64)
}

fn batch_loss_and_grads(
    model: &Precoder,
    batch: &[ChannelSet],
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<(f64, Vec<f64>)> {
    assert!(!batch.is_empty());
    let mut loss = 0.0;
    let mut grads = vec![0.0; model.n_parameters()];
    // fixed accumulation order keeps runs bit-reproducible
    for cs in batch {
        let (l, g) = model.loss_and_grads(cs, pm, bw, p_max)?;
        loss += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for g in grads.iter_mut() {
        *g *= inv;
    }
    Ok((loss * inv, grads))
}

/// One recorded optimization step.
#[derive(Debug, Clone, Serialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Precoder,
    pub loss_curve: Vec<LossPoint>,
    /// Mean test EE after each epoch.
    pub test_ee_per_epoch: Vec<f64>,
    pub epochs_run: usize,
}

/// Adam training over shuffled mini-batches with early stopping on a test-EE
/// plateau. Returns the best-on-test parameters.
pub fn train(
    model: &Precoder,
    cfg: &TrainConfig,
    train_set: &[ChannelSet],
    test_set: &[ChannelSet],
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
) -> Result<TrainOutcome> {
    assert!(!train_set.is_empty() && !test_set.is_empty());
    let mut current = model.clone();
    let mut flat = current.flat();
    let mut adam = AdamState::new(flat.len());
    let mut loss_curve = Vec::new();
    let mut test_ee_per_epoch = Vec::new();
    // the starting parameters compete too: training never returns a model
    // worse on the test set than what it was given
    let mut best = current.clone();
    let mut best_ee = evaluate(&current, test_set, pm, bw, p_max, 0.1)?.mean_ee;
    let mut stale_epochs = 0;
    let mut step = 0;
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = rng_from_seed(child_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<ChannelSet> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grads) = batch_loss_and_grads(&current, &batch, pm, bw, p_max)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    seed: batch[0].seed,
                });
            }
            adam.update(cfg, &mut flat, &grads);
            current.set_flat(&flat);
            loss_curve.push(LossPoint { step, loss });
            step += 1;
        }
        epochs_run = epoch + 1;
        let mean_ee = evaluate(&current, test_set, pm, bw, p_max, 0.1)?.mean_ee;
        test_ee_per_epoch.push(mean_ee);
        if mean_ee > best_ee * (1.0 + 1e-4) {
            best_ee = mean_ee;
            best = current.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        loss_curve,
        test_ee_per_epoch,
        epochs_run,
    })
}

/// Distribution of per-draw energy efficiency on a test set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub per_draw: Vec<EEBreakdown>,
    pub mean_ee: f64,
    pub std_ee: f64,
    /// `(bin lower edge, count)`, bins of the requested relative width.
    pub histogram: Vec<(f64, usize)>,
    pub bin_width: f64,
}

/// Evaluates a model on every draw and summarizes the EE distribution.
/// `rel_bin_width` sets the histogram bin width as a fraction of the mean.
pub fn evaluate(
    model: &Precoder,
    test_set: &[ChannelSet],
    pm: &PowerModel,
    bw: f64,
    p_max: f64,
    rel_bin_width: f64,
) -> Result<EvalSummary> {
    assert!(!test_set.is_empty());
    let mut per_draw = Vec::with_capacity(test_set.len());
    for cs in test_set {
        let b = model.precode(cs, pm, bw, p_max)?;
        per_draw.push(energy_efficiency(cs, &b, pm, bw));
    }
    Ok(summarize(per_draw, rel_bin_width))
}

/// Histogram/summary over already-computed breakdowns.
pub fn summarize(per_draw: Vec<EEBreakdown>, rel_bin_width: f64) -> EvalSummary {
    let n = per_draw.len() as f64;
    let mean_ee = per_draw.iter().map(|e| e.ee).sum::<f64>() / n;
    let var = per_draw
        .iter()
        .map(|e| (e.ee - mean_ee) * (e.ee - mean_ee))
        .sum::<f64>()
        / n;
    let bin_width = (rel_bin_width * mean_ee.abs()).max(f64::MIN_POSITIVE);
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for e in &per_draw {
        let bin = (e.ee / bin_width).floor() as i64;
        *counts.entry(bin).or_default() += 1;
    }
    EvalSummary {
        histogram: counts
            .into_iter()
            .map(|(bin, c)| (bin as f64 * bin_width, c))
            .collect(),
        per_draw,
        mean_ee,
        std_ee: var.sqrt(),
        bin_width,
    }
}

/// Generates disjoint train/test channel sets for a training run.
pub fn make_datasets(
    geom: &crate::channel::ArrayGeometry,
    k: usize,
    dist: &ChannelDistributionSpec,
    n0: f64,
    cfg: &TrainConfig,
) -> (Vec<ChannelSet>, Vec<ChannelSet>) {
    let train_base = train_base_seed(cfg.seed);
    let test_base = test_base_seed(cfg.seed);
    let train = (0..cfg.train_draws)
        .map(|i| crate::channel::draw_channel_set(geom, k, child_seed(train_base, i as u64), dist, n0))
        .collect();
    let test = (0..cfg.test_draws)
        .map(|i| crate::channel::draw_channel_set(geom, k, child_seed(test_base, i as u64), dist, n0))
        .collect();
    (train, test)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &str = "LEOCKPT1";

/// On-disk parameter checkpoint, tagged by architecture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: String,
    pub unfolded: Option<UnfoldedParams>,
    pub e2e: Option<E2eParams>,
}

impl Checkpoint {
    pub fn from_precoder(model: &Precoder) -> Self {
        let (unfolded, e2e) = match model {
            Precoder::Unfolded(p) => (Some(p.clone()), None),
            Precoder::EndToEnd(p) => (None, Some(p.clone())),
        };
        Self {
            format: CHECKPOINT_MAGIC.to_string(),
            version: 1,
            architecture: model.architecture_id().to_string(),
            unfolded,
            e2e,
        }
    }

    pub fn into_precoder(self) -> Result<Precoder> {
        match (self.architecture.as_str(), self.unfolded, self.e2e) {
            ("taylor_unfolded", Some(p), _) => Ok(Precoder::Unfolded(p)),
            ("end_to_end", _, Some(p)) => Ok(Precoder::EndToEnd(p)),
            (arch, _, _) => Err(Error::Config(format!(
                "checkpoint architecture {:?} does not match its payload",
                arch
            ))),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ckpt.format != CHECKPOINT_MAGIC {
            return Err(Error::Config(format!(
                "not a checkpoint file: format is {:?}",
                ckpt.format
            )));
        }
        Ok(ckpt)
    }
}
