//! Statistical-CSI channel model for the satellite downlink.
//!
//! A uniform planar array (UPA) on the satellite serves `K` single-antenna
//! user terminals. Because the scatterers sit close to the users and far from
//! the satellite, every propagation path of a user shares one direction, so
//! the slowly varying state per user is just a direction vector `v_k` and a
//! mean gain power `gamma_k`. Fast fading enters only through a scalar
//! per-user gain whose mean power is `gamma_k`.
//!
//! Conventions fixed here:
//! * every stored `v_k` is unit-norm; `gamma_k` carries all power;
//! * the UPA response is the separable phase law over the two axes with
//!   half-wavelength spacing by default;
//! * noise power is set from a per-user transmit-SNR convention, see
//!   [`noise_power_from_snr_db`];
//! * all generators are pure functions of `(inputs, seed)` with per-draw
//!   seeds derived by [`crate::rng::child_seed`].

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{child_seed, rng_from_seed, standard_complex};

/// Sentinel for "no CSI error" in [`perturb_csi`].
pub const NO_CSI_ERROR: f64 = f64::NEG_INFINITY;

/// Uniform planar array: `nx * ny` elements, spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

impl ArrayGeometry {
    /// Half-wavelength spaced `nx * ny` grid.
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1);
        Self { nx, ny, spacing: 0.5 }
    }

    /// Total element count `N_t = nx * ny`.
    pub fn n_antennas(&self) -> usize {
        self.nx * self.ny
    }
}

/// How user statistics are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDistributionSpec {
    /// Uniform angle prior on both axes, radians.
    pub angle_lo: f64,
    pub angle_hi: f64,
    /// Mean gain power prior.
    pub gamma: GammaSpec,
    /// Number of propagation paths per user for fast-fading draws.
    pub paths_per_user: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaSpec {
    /// `gamma_k = 1` for every user.
    AllOnes,
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl Default for ChannelDistributionSpec {
    fn default() -> Self {
        Self {
            angle_lo: -std::f64::consts::FRAC_PI_3,
            angle_hi: std::f64::consts::FRAC_PI_3,
            gamma: GammaSpec::AllOnes,
            paths_per_user: 3,
        }
    }
}

impl GammaSpec {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            GammaSpec::AllOnes => 1.0,
            GammaSpec::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
        }
    }

    /// Mean of the prior, used by the SNR convention.
    pub fn mean(&self) -> f64 {
        match self {
            GammaSpec::AllOnes => 1.0,
            GammaSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

/// Slowly varying state of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannelStat {
    /// Unit-norm array response direction.
    pub v: CVector,
    /// Mean channel gain power `E{|g_k|^2}`.
    pub gamma: f64,
    /// Departure angles (theta_x, theta_y) in radians.
    pub angles: (f64, f64),
}

/// One draw of the system's slow randomness: `K` users plus the noise power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub geometry: ArrayGeometry,
    pub users: Vec<UserChannelStat>,
    /// Noise power, equal across users.
    pub n0: f64,
    pub seed: u64,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.geometry.n_antennas()
    }
}

/// Instantaneous realization on top of a [`ChannelSet`].
#[derive(Debug, Clone)]
pub struct FastFadingDraw {
    /// Scalar gain `g_k` per user.
    pub gains: Vec<Complex64>,
    /// Instantaneous channel `h_k = g_k v_k` per user.
    pub channels: Vec<CVector>,
}

impl FastFadingDraw {
    /// Stacks the per-user channels into an `N_t x K` matrix.
    pub fn channel_matrix(&self, n_antennas: usize) -> CMatrix {
        let mut h = CMatrix::zeros(n_antennas, self.channels.len());
        for (k, col) in self.channels.iter().enumerate() {
            h.set_column(k, col);
        }
        h
    }
}

/// UPA array response for departure angles `(theta_x, theta_y)`, unit-norm.
///
/// Element `(p, q)` has phase `2*pi*spacing*(p*sin(theta_x) + q*sin(theta_y))`
/// and the vector is scaled by `1/sqrt(N_t)`.
pub fn steering_vector(geom: &ArrayGeometry, theta_x: f64, theta_y: f64) -> CVector {
    debug_assert!(theta_x.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12);
    debug_assert!(theta_y.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12);
    let n = geom.n_antennas();
    let scale = 1.0 / (n as f64).sqrt();
    let sx = theta_x.sin();
    let sy = theta_y.sin();
    CVector::from_fn(n, |i| {
        let p = (i / geom.ny) as f64;
        let q = (i % geom.ny) as f64;
        let phase = 2.0 * std::f64::consts::PI * geom.spacing * (p * sx + q * sy);
        Complex64::from_polar(scale, phase)
    })
}

/// Noise power under the per-user transmit-SNR convention:
/// `N_0 = P_max * mean_gamma / (K * 10^(snr_db/10))`.
pub fn noise_power_from_snr_db(p_max: f64, mean_gamma: f64, k: usize, snr_db: f64) -> f64 {
    p_max * mean_gamma / (k as f64 * 10f64.powf(snr_db / 10.0))
}

/// Draws `k` users with i.i.d. angles and gains from `dist`.
pub fn draw_channel_set(
    geom: &ArrayGeometry,
    k: usize,
    seed: u64,
    dist: &ChannelDistributionSpec,
    n0: f64,
) -> ChannelSet {
    assert!(k >= 1);
    assert!(n0 > 0.0);
    let mut rng = rng_from_seed(seed);
    let users = (0..k)
        .map(|_| {
            let theta_x = rng.gen_range(dist.angle_lo..dist.angle_hi);
            let theta_y = rng.gen_range(dist.angle_lo..dist.angle_hi);
            let gamma = dist.gamma.sample(&mut rng);
            UserChannelStat {
                v: steering_vector(geom, theta_x, theta_y),
                gamma,
                angles: (theta_x, theta_y),
            }
        })
        .collect();
    ChannelSet {
        geometry: *geom,
        users,
        n0,
        seed,
    }
}

/// Draws instantaneous gains: `g_k` is a sum of `paths_per_user` equal-power
/// path coefficients with i.i.d. uniform phases, so `E{|g_k|^2} = gamma_k`.
/// The unit-modulus Doppler/delay factor of the channel response does not
/// affect any SINR and is set to one, giving `h_k = g_k v_k`.
pub fn draw_fast_fading(cs: &ChannelSet, paths_per_user: usize, seed: u64) -> FastFadingDraw {
    assert!(paths_per_user >= 1);
    let mut gains = Vec::with_capacity(cs.n_users());
    let mut channels = Vec::with_capacity(cs.n_users());
    for (k, user) in cs.users.iter().enumerate() {
        let mut rng = rng_from_seed(child_seed(seed, k as u64));
        let amp = (user.gamma / paths_per_user as f64).sqrt();
        let g: Complex64 = (0..paths_per_user)
            .map(|_| {
                let phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                Complex64::from_polar(amp, phase)
            })
            .sum();
        gains.push(g);
        channels.push(user.v.scale(g));
    }
    FastFadingDraw { gains, channels }
}

/// Draws one CSI error vector with total power `10^(error_db/10)` spread
/// evenly over the elements.
pub fn draw_csi_error(n_antennas: usize, error_db: f64, rng: &mut impl Rng) -> CVector {
    let sigma_sq = 10f64.powf(error_db / 10.0);
    let per_element = (sigma_sq / n_antennas as f64).sqrt();
    CVector::from_fn(n_antennas, |_| {
        standard_complex(rng) * per_element
    })
}

/// Returns a copy of `cs` whose direction vectors carry additive Gaussian
/// estimation error of relative power `10^(error_db/10)`, re-normalized to
/// unit norm. `error_db == NO_CSI_ERROR` returns the input unchanged.
pub fn perturb_csi(cs: &ChannelSet, error_db: f64, seed: u64) -> Result<ChannelSet> {
    if error_db == NO_CSI_ERROR {
        return Ok(cs.clone());
    }
    let n = cs.n_antennas();
    let mut out = cs.clone();
    for (k, user) in out.users.iter_mut().enumerate() {
        let mut rng = rng_from_seed(child_seed(seed, k as u64));
        let e = draw_csi_error(n, error_db, &mut rng);
        user.v = user.v.add(&e).normalized()?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dataset persistence (versioned, magic "LEOCH1")
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &str = "LEOCH1";

/// On-disk channel dataset: header plus per-draw records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelDataset {
    pub magic: String,
    pub version: u32,
    pub geometry: ArrayGeometry,
    pub k: usize,
    pub dist: ChannelDistributionSpec,
    pub base_seed: u64,
    pub n0: f64,
    pub draws: Vec<ChannelSet>,
}

impl ChannelDataset {
    /// Generates `n_draws` channel sets with seeds derived from `base_seed`.
    pub fn generate(
        geom: &ArrayGeometry,
        k: usize,
        dist: &ChannelDistributionSpec,
        base_seed: u64,
        n0: f64,
        n_draws: usize,
    ) -> Self {
        let draws = (0..n_draws)
            .map(|i| draw_channel_set(geom, k, child_seed(base_seed, i as u64), dist, n0))
            .collect();
        Self {
            magic: DATASET_MAGIC.to_string(),
            version: 1,
            geometry: *geom,
            k,
            dist: *dist,
            base_seed,
            n0,
            draws,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ds: ChannelDataset = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ds.magic != DATASET_MAGIC {
            return Err(Error::Config(format!(
                "not a channel dataset: magic is {:?}, expected {:?}",
                ds.magic, DATASET_MAGIC
            )));
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom44() -> ArrayGeometry {
        ArrayGeometry::new(4, 4)
    }

    #[test]
    fn steering_broadside_is_uniform() {
        let v = steering_vector(&geom44(), 0.0, 0.0);
        let expected = 1.0 / 4.0;
        for i in 0..16 {
            assert!((v[i] - Complex64::new(expected, 0.0)).norm() < 1e-15);
        }
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steering_single_element() {
        let v = steering_vector(&ArrayGeometry::new(1, 1), 0.3, -0.2);
        assert_eq!(v.len(), 1);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_two_element_quarter_turn() {
        // 2x1 array, theta_x = pi/6: phase step 2*pi*0.5*0.5 = pi/2, so the
        // second element is i times the first.
        let v = steering_vector(&ArrayGeometry::new(2, 1), std::f64::consts::FRAC_PI_6, 0.0);
        let rotated = v[0] * Complex64::new(0.0, 1.0);
        assert!((v[1] - rotated).norm() < 1e-12);
    }

    #[test]
    fn channel_set_deterministic_in_seed() {
        let dist = ChannelDistributionSpec::default();
        let a = draw_channel_set(&geom44(), 5, 99, &dist, 1.0);
        let b = draw_channel_set(&geom44(), 5, 99, &dist, 1.0);
        assert_eq!(a, b);
        let c = draw_channel_set(&geom44(), 5, 100, &dist, 1.0);
        assert_ne!(a, c);
    }

    #[test]
    fn channel_set_directions_unit_norm() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 10, 3, &dist, 1.0);
        for u in &cs.users {
            assert!((u.v.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gamma_all_ones() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 10, 4, &dist, 1.0);
        assert!(cs.users.iter().all(|u| u.gamma == 1.0));
    }

    #[test]
    fn angle_histogram_is_uniform() {
        // 10^4 draws of K=10 users, binned; each bin within 3 sigma of the
        // multinomial expectation (deterministic under the fixed seed).
        let dist = ChannelDistributionSpec::default();
        let bins = 10usize;
        let mut counts = vec![0usize; bins];
        let n_draws = 1000;
        for i in 0..n_draws {
            let cs = draw_channel_set(&geom44(), 10, child_seed(7, i), &dist, 1.0);
            for u in &cs.users {
                let t = (u.angles.0 - dist.angle_lo) / (dist.angle_hi - dist.angle_lo);
                let b = ((t * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        let total = (n_draws * 10) as f64;
        let p = 1.0 / bins as f64;
        let sigma = (total * p * (1.0 - p)).sqrt();
        for (b, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - total * p).abs();
            assert!(dev <= 3.0 * sigma, "bin {} off by {:.1} sigma", b, dev / sigma);
        }
    }

    #[test]
    fn single_path_gain_has_fixed_magnitude() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 4, 5, &dist, 1.0);
        let draw = draw_fast_fading(&cs, 1, 123);
        for (g, u) in draw.gains.iter().zip(&cs.users) {
            assert!((g.norm() - u.gamma.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn fading_power_converges_to_gamma() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 2, 6, &dist, 1.0);
        let n = 100_000u64;
        let mut acc = vec![0.0f64; cs.n_users()];
        for i in 0..n {
            let draw = draw_fast_fading(&cs, 3, child_seed(31, i));
            for (a, g) in acc.iter_mut().zip(&draw.gains) {
                *a += g.norm_sqr();
            }
        }
        for (a, u) in acc.iter().zip(&cs.users) {
            let mean = a / n as f64;
            assert!(
                (mean - u.gamma).abs() / u.gamma < 0.01,
                "sample mean {} vs gamma {}",
                mean,
                u.gamma
            );
        }
    }

    #[test]
    fn fading_channel_collinear_with_direction() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 3, 8, &dist, 1.0);
        let draw = draw_fast_fading(&cs, 3, 77);
        for ((h, g), u) in draw.channels.iter().zip(&draw.gains).zip(&cs.users) {
            let back = h.scale(1.0 / g);
            assert!(back.sub(&u.v).norm() < 1e-12);
        }
    }

    #[test]
    fn perturb_no_error_sentinel_is_identity() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 4, 9, &dist, 1.0);
        let out = perturb_csi(&cs, NO_CSI_ERROR, 1).unwrap();
        assert_eq!(out, cs);
    }

    #[test]
    fn perturb_error_power_matches_spec() {
        // -30 dB error: mean ||e||^2 within 5% of 1e-3 across draws.
        let mut rng = rng_from_seed(17);
        let n_draws = 10_000;
        let mean: f64 = (0..n_draws)
            .map(|_| draw_csi_error(16, -30.0, &mut rng).norm_sq())
            .sum::<f64>()
            / n_draws as f64;
        assert!((mean - 1e-3).abs() / 1e-3 < 0.05, "mean error power {}", mean);
    }

    #[test]
    fn perturb_outputs_unit_norm() {
        let dist = ChannelDistributionSpec::default();
        let cs = draw_channel_set(&geom44(), 6, 10, &dist, 1.0);
        let out = perturb_csi(&cs, -10.0, 2).unwrap();
        for u in &out.users {
            assert!((u.v.norm() - 1.0).abs() <= 1e-12);
        }
        assert_ne!(out, cs);
    }

    #[test]
    fn dataset_round_trip() {
        let dist = ChannelDistributionSpec::default();
        let ds = ChannelDataset::generate(&geom44(), 3, &dist, 11, 0.5, 4);
        let dir = std::env::temp_dir().join("leoprec_test_dataset.json");
        ds.save(&dir).unwrap();
        let back = ChannelDataset::load(&dir).unwrap();
        assert_eq!(back.magic, "LEOCH1");
        assert_eq!(back.draws, ds.draws);
        std::fs::remove_file(&dir).ok();
    }

    #[test]
    fn noise_power_convention() {
        // SNR 0 dB, P_max 10, gamma 1, K 4 -> N0 = 2.5
        let n0 = noise_power_from_snr_db(10.0, 1.0, 4, 0.0);
        assert!((n0 - 2.5).abs() < 1e-15);
    }
}
