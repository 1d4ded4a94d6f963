//! Instantaneous-CSI baseline precoders: matched filter, RZF and MMSE.
//!
//! These are the textbook comparison curves. They see a full channel matrix
//! `H` (one fast-fading realization), unlike the statistical methods, and the
//! harness averages their energy efficiency over fading draws.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::system::PrecodingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Matched filter: `b_k` along `h_k`.
    Mf,
    /// Regularized zero forcing: `B` along `H (H^H H + alpha I)^-1`.
    Rzf,
    /// RZF with `alpha = K * N_0 / p_max`.
    Mmse,
}

/// How the power budget is split across users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerSplit {
    /// Every user gets exactly `p_max / K`.
    Equal,
    /// One common scalar on the whole matrix (no per-user reallocation).
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Ridge for RZF; ignored by MF, derived for MMSE.
    pub regularization: f64,
    pub power_split: PowerSplit,
}

impl BaselineSpec {
    pub fn mf() -> Self {
        Self {
            kind: BaselineKind::Mf,
            regularization: 0.0,
            power_split: PowerSplit::Equal,
        }
    }

    pub fn rzf(regularization: f64) -> Self {
        Self {
            kind: BaselineKind::Rzf,
            regularization,
            power_split: PowerSplit::Equal,
        }
    }

    pub fn mmse() -> Self {
        Self {
            kind: BaselineKind::Mmse,
            regularization: 0.0,
            power_split: PowerSplit::Equal,
        }
    }
}

/// Computes the baseline precoder for an instantaneous channel matrix
/// (`N_t x K`, column `k` is user `k`'s channel).
///
/// The output always radiates exactly `p_max`.
pub fn precode_baseline(
    h: &CMatrix,
    spec: &BaselineSpec,
    p_max: f64,
    n0: f64,
) -> Result<PrecodingMatrix> {
    assert!(p_max > 0.0);
    if !h.is_finite() {
        return Err(Error::Config("channel matrix contains non-finite entries".into()));
    }
    let k = h.cols();
    let directions = match spec.kind {
        BaselineKind::Mf => h.clone(),
        BaselineKind::Rzf | BaselineKind::Mmse => {
            let alpha = match spec.kind {
                BaselineKind::Rzf => spec.regularization,
                _ => k as f64 * n0 / p_max,
            };
            if alpha <= 0.0 {
                return Err(Error::Config(
                    "RZF/MMSE regularization must be positive".into(),
                ));
            }
            let mut gram = h.hermitian().matmul(h)?;
            gram.add_ridge(alpha);
            let inv = gram.solve_hpd_multi(&CMatrix::identity(k))?;
            h.matmul(&inv)?
        }
    };
    scale_to_budget(directions, spec.power_split, p_max)
}

fn scale_to_budget(mut b: CMatrix, split: PowerSplit, p_max: f64) -> Result<PrecodingMatrix> {
    let k = b.cols();
    match split {
        PowerSplit::Equal => {
            let per_user = (p_max / k as f64).sqrt();
            for j in 0..k {
                let norm = b.column(j).norm();
                if norm <= 0.0 {
                    return Err(Error::Config(format!(
                        "baseline direction for user {} is zero",
                        j
                    )));
                }
                let col = b.column(j).scale(Complex64::new(per_user / norm, 0.0));
                b.set_column(j, &col);
            }
        }
        PowerSplit::Matrix => {
            let norm = b.frobenius_norm();
            if norm <= 0.0 {
                return Err(Error::Config("baseline precoder is zero".into()));
            }
            b = b.scale(Complex64::new(p_max.sqrt() / norm, 0.0));
        }
    }
    Ok(PrecodingMatrix::new(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;
    use crate::rng::{rng_from_seed, standard_complex};

    fn random_channel(n: usize, k: usize, seed: u64) -> CMatrix {
        let mut rng = rng_from_seed(seed);
        CMatrix::from_fn(n, k, |_, _| standard_complex(&mut rng))
    }

    #[test]
    fn single_user_all_kinds_collapse_to_mf() {
        let h = random_channel(4, 1, 1);
        let p_max = 10.0f64;
        let expected = h
            .column(0)
            .scale(Complex64::new(p_max.sqrt() / h.column(0).norm(), 0.0));
        for spec in [BaselineSpec::mf(), BaselineSpec::rzf(1.0), BaselineSpec::mmse()] {
            let b = precode_baseline(&h, &spec, p_max, 0.5).unwrap();
            // the formulas are linear in h, so directions match without any
            // spurious phase factor
            assert!(b.column(0).sub(&expected).norm() < 1e-10, "{:?}", spec.kind);
        }
    }

    #[test]
    fn orthogonal_channels_stay_orthogonal_under_rzf() {
        let mut h = CMatrix::zeros(4, 2);
        h[(0, 0)] = Complex64::new(2.0, 0.0);
        h[(1, 1)] = Complex64::new(0.0, 0.5);
        let b = precode_baseline(&h, &BaselineSpec::rzf(1.0), 10.0, 1.0).unwrap();
        let cross = b.column(0).dot_h(&b.column(1));
        assert!(cross.norm() < 1e-12);
    }

    #[test]
    fn rzf_matches_direct_formula_oracle() {
        let h = random_channel(4, 2, 2);
        let alpha = 1.0;
        let p_max = 7.0;
        let b = precode_baseline(&h, &BaselineSpec::rzf(alpha), p_max, 1.0).unwrap();
        // oracle: per-column solve of (H^H H + alpha I) x = e_k, then H x
        let mut gram = h.hermitian().matmul(&h).unwrap();
        gram.add_ridge(alpha);
        for k in 0..2 {
            let x = gram.solve_hpd(&CVector::basis(2, k)).unwrap();
            let mut dir = CVector::zeros(4);
            for i in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..2 {
                    s += h[(i, j)] * x[j];
                }
                dir[i] = s;
            }
            let scaled = dir.scale(Complex64::new((p_max / 2.0).sqrt() / dir.norm(), 0.0));
            assert!(b.column(k).sub(&scaled).norm() <= 1e-10);
        }
    }

    #[test]
    fn output_exactly_feasible() {
        for seed in 0..10 {
            let h = random_channel(8, 3, 50 + seed);
            for spec in [BaselineSpec::mf(), BaselineSpec::rzf(0.3), BaselineSpec::mmse()] {
                let b = precode_baseline(&h, &spec, 5.0, 0.7).unwrap();
                assert!((b.total_tx_power() - 5.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rzf_approaches_mf_for_large_ridge() {
        let h = random_channel(6, 3, 3);
        let mf = precode_baseline(&h, &BaselineSpec::mf(), 1.0, 1.0).unwrap();
        let rzf = precode_baseline(&h, &BaselineSpec::rzf(1e8), 1.0, 1.0).unwrap();
        for k in 0..3 {
            let a = mf.column(k);
            let b = rzf.column(k);
            let cos = a.dot_h(&b).norm() / (a.norm() * b.norm());
            assert!(cos > 1.0 - 1e-6, "cosine similarity {}", cos);
        }
    }

    #[test]
    fn user_permutation_permutes_columns() {
        let h = random_channel(5, 3, 4);
        let perm = [2usize, 0, 1];
        let mut hp = CMatrix::zeros(5, 3);
        for (to, &from) in perm.iter().enumerate() {
            hp.set_column(to, &h.column(from));
        }
        for spec in [BaselineSpec::mf(), BaselineSpec::rzf(0.5), BaselineSpec::mmse()] {
            let b = precode_baseline(&h, &spec, 3.0, 0.4).unwrap();
            let bp = precode_baseline(&hp, &spec, 3.0, 0.4).unwrap();
            for (to, &from) in perm.iter().enumerate() {
                assert!(bp.column(to).sub(&b.column(from)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rzf_rejects_zero_ridge() {
        let h = random_channel(4, 2, 5);
        assert!(precode_baseline(&h, &BaselineSpec::rzf(0.0), 1.0, 1.0).is_err());
    }
}
