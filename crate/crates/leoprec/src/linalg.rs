//! Minimal dense complex linear algebra.
//!
//! Everything downstream (channel draws, SINR stack, WMMSE, the unfolded
//! network) is built on the two types here. Complex scalars are `Complex64`
//! (a pair of `f64`), matrices are row-major `Vec` storage, and the only
//! factorization is a Cholesky for Hermitian positive definite systems —
//! every linear system in this crate is of Gram-plus-ridge form.
//!
//! All operations are pure functions of their inputs, so results are
//! reproducible bit-for-bit given the same inputs.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex column vector of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector {
    data: Vec<Complex64>,
}

impl CVector {
    /// Builds a vector, rejecting NaN/Inf entries.
    pub fn new(data: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                context: "CVector::new",
                layer: i,
            });
        }
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// k-th standard basis vector.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> Complex64) -> Self {
        Self {
            data: (0..n).map(|i| f(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Inner product `self^H other` (conjugate-linear in `self`).
    pub fn dot_h(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Rescales to unit Euclidean norm. Returns an error on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Config("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }
}

impl serde::Serialize for CVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<(f64, f64)> = self.data.iter().map(|z| (z.re, z.im)).collect();
        pairs.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for CVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(f64, f64)>::deserialize(d)?;
        CVector::new(pairs.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

impl std::ops::Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.data[i]
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Builds a matrix from row-major data, rejecting NaN/Inf entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "CMatrix::new",
                left: format!("{}x{}", rows, cols),
                right: format!("{} elements", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                context: "CMatrix::new",
                layer: i,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector::from_fn(self.rows, |i| self[(i, j)])
    }

    pub fn set_column(&mut self, j: usize, v: &CVector) {
        debug_assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Standard complex matrix product.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &CVector) -> Result<CVector> {
        if self.cols != v.len() {
            return Err(Error::Shape {
                op: "matvec",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}", v.len()),
            });
        }
        Ok(CVector::from_fn(self.rows, |i| {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum()
        }))
    }

    /// Frobenius norm: square root of the sum of squared magnitudes.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.shape(), other.shape());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.shape(), other.shape());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Adds `s * v v^H` in place (rank-one Hermitian update).
    pub fn add_outer_scaled(&mut self, v: &CVector, s: f64) {
        debug_assert_eq!(self.rows, v.len());
        debug_assert_eq!(self.cols, v.len());
        let n = v.len();
        for i in 0..n {
            let vi = v[i];
            for j in 0..n {
                self[(i, j)] += vi * v[j].conj() * s;
            }
        }
    }

    /// Adds `s * I` in place.
    pub fn add_ridge(&mut self, s: f64) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self[(i, i)] += Complex64::new(s, 0.0);
        }
    }

    /// Cholesky factor `L` with `L L^H = self`, for HPD matrices.
    ///
    /// Fails with the pivot index when a non-positive pivot is met.
    pub fn cholesky(&self) -> Result<CMatrix> {
        debug_assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j, value: d });
            }
            let dj = d.sqrt();
            l[(j, j)] = Complex64::new(dj, 0.0);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(l)
    }

    /// Solves `self * x = rhs` for HPD `self` via Cholesky.
    pub fn solve_hpd(&self, rhs: &CVector) -> Result<CVector> {
        let l = self.cholesky()?;
        Ok(l.solve_cholesky(rhs))
    }

    /// Solves `self * X = rhs` column-by-column for HPD `self`, factoring once.
    pub fn solve_hpd_multi(&self, rhs: &CMatrix) -> Result<CMatrix> {
        let l = self.cholesky()?;
        let mut out = CMatrix::zeros(rhs.rows, rhs.cols);
        for j in 0..rhs.cols {
            out.set_column(j, &l.solve_cholesky(&rhs.column(j)));
        }
        Ok(out)
    }

    /// Forward/backward substitution given a Cholesky factor `self = L`.
    pub fn solve_cholesky(&self, rhs: &CVector) -> CVector {
        let n = self.rows;
        debug_assert_eq!(rhs.len(), n);
        // L y = rhs
        let mut y = CVector::zeros(n);
        for i in 0..n {
            let mut s = rhs[i];
            for k in 0..i {
                s -= self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)].re;
        }
        // L^H x = y
        let mut x = CVector::zeros(n);
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self[(k, i)].conj() * x[k];
            }
            x[i] = s / self[(i, i)].re;
        }
        x
    }

    /// Largest singular value, estimated by power iteration on `A^H A`.
    pub fn spectral_norm(&self, iterations: usize) -> f64 {
        let n = self.cols;
        if n == 0 || self.rows == 0 {
            return 0.0;
        }
        let mut v = CVector::from_fn(n, |i| Complex64::new(1.0 + (i as f64) * 1e-3, 0.0));
        let mut v = v.normalized().unwrap_or_else(|_| {
            v[0] = Complex64::new(1.0, 0.0);
            v
        });
        let mut sigma = 0.0;
        for _ in 0..iterations {
            let av = self.matvec(&v).expect("shape checked");
            let ahav = self.hermitian().matvec(&av).expect("shape checked");
            let norm = ahav.norm();
            if norm == 0.0 {
                return 0.0;
            }
            sigma = av.norm();
            v = ahav.scale(Complex64::new(1.0 / norm, 0.0));
        }
        sigma
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_complex};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| standard_complex(rng))
    }

    #[test]
    fn hermitian_of_scalar_conjugates() {
        let m = CMatrix::new(1, 1, vec![Complex64::new(2.0, 3.0)]).unwrap();
        let h = m.hermitian();
        assert_eq!(h[(0, 0)], Complex64::new(2.0, -3.0));
    }

    #[test]
    fn hermitian_fixes_identity() {
        let i2 = CMatrix::identity(2);
        assert_eq!(i2.hermitian(), i2);
    }

    #[test]
    fn hermitian_matches_definition_and_involution() {
        let mut rng = rng_from_seed(7);
        let m = random_matrix(&mut rng, 3, 2);
        let h = m.hermitian();
        assert_eq!(h.shape(), (2, 3));
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], h[(j, i)].conj());
            }
        }
        assert_eq!(h.hermitian(), m);
    }

    #[test]
    fn matmul_identity_is_neutral() {
        let mut rng = rng_from_seed(8);
        let m = random_matrix(&mut rng, 3, 4);
        let out = CMatrix::identity(3).matmul(&m).unwrap();
        for (a, b) in out.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn matmul_i_squared_is_minus_one() {
        let i = CMatrix::new(1, 1, vec![Complex64::new(0.0, 1.0)]).unwrap();
        let out = i.matmul(&i).unwrap();
        assert!((out[(0, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = rng_from_seed(9);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        let fast = a.matmul(&b).unwrap();
        // independent oracle: naive triple loop
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((fast[(i, j)] - s).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_shape_mismatch() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape { .. })));
    }

    #[test]
    fn matmul_associativity_near_exact() {
        let mut rng = rng_from_seed(10);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 3, 3);
        let c = random_matrix(&mut rng, 3, 3);
        let lhs = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let rhs = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        let scale = lhs.frobenius_norm().max(1.0);
        assert!(lhs.sub(&rhs).frobenius_norm() / scale < 1e-12);
    }

    #[test]
    fn solve_hpd_diagonal_system() {
        let m = CMatrix::identity(3).scale(Complex64::new(2.0, 0.0));
        let x = m.solve_hpd(&CVector::basis(3, 0)).unwrap();
        assert!((x[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(x[1].norm() < 1e-15 && x[2].norm() < 1e-15);
    }

    #[test]
    fn solve_hpd_sherman_morrison_case() {
        // (I + u u^H) x = u  with ||u||^2 = 3  =>  x = u / 4
        let u = CVector::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        assert!((u.norm_sq() - 3.0).abs() < 1e-15);
        let mut m = CMatrix::identity(3);
        m.add_outer_scaled(&u, 1.0);
        let x = m.solve_hpd(&u).unwrap();
        let expected = u.scale(Complex64::new(0.25, 0.0));
        assert!(x.sub(&expected).norm() < 1e-12);
    }

    #[test]
    fn solve_hpd_residual_bounded() {
        let mut rng = rng_from_seed(11);
        for n in [8usize, 32, 64] {
            let a = random_matrix(&mut rng, n, n);
            let mut g = a.matmul(&a.hermitian()).unwrap();
            g.add_ridge(1.0);
            let rhs = CVector::from_fn(n, |_| standard_complex(&mut rng));
            let x = g.solve_hpd(&rhs).unwrap();
            let residual = g.matvec(&x).unwrap().sub(&rhs).norm();
            assert!(
                residual <= 1e-9 * rhs.norm(),
                "residual {} too large at n={}",
                residual,
                n
            );
        }
    }

    #[test]
    fn solve_hpd_rejects_indefinite() {
        let m = CMatrix::new(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        match m.solve_hpd(&CVector::basis(2, 0)) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected pivot failure, got {:?}", other),
        }
    }

    #[test]
    fn hpd_quadratic_form_positive() {
        let mut rng = rng_from_seed(12);
        let a = random_matrix(&mut rng, 6, 6);
        let mut g = a.matmul(&a.hermitian()).unwrap();
        g.add_ridge(0.5);
        for _ in 0..10 {
            let x = CVector::from_fn(6, |_| standard_complex(&mut rng));
            let q = x.dot_h(&g.matvec(&x).unwrap());
            assert!(q.re > 0.0);
            assert!(q.im.abs() < 1e-10 * q.re.abs().max(1.0));
        }
    }

    #[test]
    fn frobenius_norm_zero_matrix() {
        assert_eq!(CMatrix::zeros(2, 2).frobenius_norm(), 0.0);
    }

    #[test]
    fn frobenius_norm_three_four_five() {
        let m = CMatrix::new(1, 2, vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)])
            .unwrap();
        assert!((m.frobenius_norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn frobenius_norm_matches_element_loop() {
        let mut rng = rng_from_seed(13);
        let m = random_matrix(&mut rng, 5, 5);
        let mut acc = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                acc += m[(i, j)].re * m[(i, j)].re + m[(i, j)].im * m[(i, j)].im;
            }
        }
        assert!((m.frobenius_norm() - acc.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn rejects_non_finite_input() {
        let bad = vec![Complex64::new(f64::NAN, 0.0)];
        assert!(CVector::new(bad.clone()).is_err());
        assert!(CMatrix::new(1, 1, bad).is_err());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut m = CMatrix::identity(3);
        m[(1, 1)] = Complex64::new(-4.0, 0.0);
        let s = m.spectral_norm(200);
        assert!((s - 4.0).abs() < 1e-6);
    }
}
