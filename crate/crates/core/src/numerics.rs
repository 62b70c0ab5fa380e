//! Dense complex matrices, Hermitian determinants and seeded sampling.
//!
//! Everything downstream works with small matrices (at most a few dozen rows),
//! so the kernel is a plain row-major `Vec` with a Cholesky factorization on
//! top. There is deliberately no general solver here.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Error, Result};

pub type C64 = Complex64;

/// Largest dimension accepted by [`hermitian_det`].
pub const MAX_DET_DIM: usize = 64;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equally long vectors as columns.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Dimension(format!(
                "column of length {} among columns of length {rows}",
                bad.len()
            )));
        }
        Ok(Self::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} to a vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * x[c]).sum())
            .collect())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_diagonal(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += s;
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|r| (r..self.cols).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Lower-triangular factor `L` with `A = L L^H` and a real positive diagonal.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle, strictly upper part is zero
    l: Vec<C64>,
}

impl Cholesky {
    /// Factors a Hermitian positive definite matrix. Only the lower triangle is read.
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Natural log of the determinant.
    pub fn ln_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.l[i * self.n + i].re.ln())
            .sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i * self.n + i].re.powi(2))
            .product()
    }

    /// `y^H A^{-1} y`, via one forward substitution.
    pub fn quad_form(&self, y: &[C64]) -> f64 {
        assert_eq!(y.len(), self.n, "vector length must match factor dimension");
        let n = self.n;
        let mut z = [C64::new(0.0, 0.0); MAX_DET_DIM];
        let z = if n <= MAX_DET_DIM {
            &mut z[..n]
        } else {
            return self.quad_form_heap(y);
        };
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = y[i];
            for (lik, zk) in row.iter().zip(z.iter()) {
                s -= lik * zk;
            }
            z[i] = s / self.l[i * n + i].re;
            acc += z[i].norm_sqr();
        }
        acc
    }

    fn quad_form_heap(&self, y: &[C64]) -> f64 {
        let n = self.n;
        let mut z = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = y[i];
            for (lik, zk) in self.l[i * n..i * n + i].iter().zip(&z) {
                s -= lik * zk;
            }
            z[i] = s / self.l[i * n + i].re;
        }
        z.iter().map(C64::norm_sqr).sum()
    }

    /// `L x`, which maps a white `CN(0, I)` vector to `CN(0, A)`.
    pub fn color(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..=i).map(|k| self.l[i * n + k] * x[k]).sum())
            .collect()
    }
}

/// Determinant of a Hermitian positive definite matrix.
pub fn hermitian_det(m: &ComplexMatrix) -> Result<f64> {
    Ok(checked_cholesky(m)?.det())
}

/// Natural log of the determinant of a Hermitian positive definite matrix.
pub fn ln_hermitian_det(m: &ComplexMatrix) -> Result<f64> {
    Ok(checked_cholesky(m)?.ln_det())
}

fn checked_cholesky(m: &ComplexMatrix) -> Result<Cholesky> {
    if m.rows() > MAX_DET_DIM {
        return Err(Error::Dimension(format!(
            "determinant dimension {} exceeds {MAX_DET_DIM}",
            m.rows()
        )));
    }
    Cholesky::new(m)
}

/// Seeded generator. A `(seed, stream)` pair always yields the same sequence,
/// and distinct streams of one seed are independent, so parallel work units
/// can each take their own stream.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.inner.random_range(lo..hi)
    }

    /// One draw from `CN(0, 1)`.
    pub fn complex_normal(&mut self) -> C64 {
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Mixes a base seed with work-unit coordinates into an independent seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 finalizer applied per component
    let mut h = seed;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Vector of i.i.d. `CN(0, variance)` entries.
pub fn sample_complex_gaussian(rng: &mut Rng, dim: usize, variance: f64) -> Result<Vec<C64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(param(format!(
            "variance must be finite and >= 0, got {variance}"
        )));
    }
    let s = variance.sqrt();
    Ok((0..dim).map(|_| rng.complex_normal() * s).collect())
}

#[cfg(test)]
mod tests {
    use super::Rng;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // Laplace expansion along the first row; exponential, fine for n <= 4.
    fn cofactor_det(m: &ComplexMatrix) -> C64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut total = c(0.0, 0.0);
        for j in 0..n {
            let minor = ComplexMatrix::from_fn(n - 1, n - 1, |r, cc| {
                m[(r + 1, if cc < j { cc } else { cc + 1 })]
            });
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += m[(0, j)] * cofactor_det(&minor) * sign;
        }
        total
    }

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
    }

    #[test]
    fn det_identity_and_diagonal() {
        assert_eq!(hermitian_det(&ComplexMatrix::identity(3)).unwrap(), 1.0);
        let mut d = ComplexMatrix::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        d[(1, 1)] = c(3.0, 0.0);
        assert!((hermitian_det(&d).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn det_rank_one_update() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [c(s, 0.0), c(0.0, s)];
        let m = ComplexMatrix::from_fn(2, 2, |r, cc| v[r] * v[cc].conj()).add_diagonal(1.0);
        // matrix determinant lemma: 1 + |v|^2
        let det = hermitian_det(&m).unwrap();
        assert!((det - 2.0).abs() < 1e-14);
        assert!((cofactor_det(&m).re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn det_errors() {
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_det(&rect), Err(Error::Dimension(_))));
        let mut indef = ComplexMatrix::identity(2);
        indef[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(
            hermitian_det(&indef),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
        assert!(matches!(
            hermitian_det(&ComplexMatrix::identity(65)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn quad_form_matches_explicit_solve() {
        let mut rng = Rng::new(3, 0);
        // 70 exercises the heap path past MAX_DET_DIM
        for n in [3, 70] {
            let r = random_matrix(&mut rng, n, n);
            let a = r.matmul(&r.adjoint()).unwrap().add_diagonal(0.5);
            let chol = Cholesky::new(&a).unwrap();
            let y = sample_complex_gaussian(&mut rng, n, 1.0).unwrap();
            // z = L y  =>  z^H A^{-1} z = |y|^2
            let z = chol.color(&y);
            let expect: f64 = y.iter().map(C64::norm_sqr).sum();
            assert!((chol.quad_form(&z) - expect).abs() < 1e-8 * expect);
        }
    }

    #[test]
    fn gaussian_zero_variance_and_determinism() {
        let mut rng = Rng::new(1, 0);
        assert!(sample_complex_gaussian(&mut rng, 4, 0.0)
            .unwrap()
            .iter()
            .all(|z| *z == c(0.0, 0.0)));
        let a = sample_complex_gaussian(&mut Rng::new(42, 7), 16, 1.0).unwrap();
        let b = sample_complex_gaussian(&mut Rng::new(42, 7), 16, 1.0).unwrap();
        assert_eq!(a, b);
        let other = sample_complex_gaussian(&mut Rng::new(42, 8), 16, 1.0).unwrap();
        assert_ne!(a, other);
        assert!(sample_complex_gaussian(&mut rng, 4, -1.0).is_err());
    }

    #[test]
    fn gaussian_empirical_variance() {
        let v = sample_complex_gaussian(&mut Rng::new(9, 0), 100_000, 1.0).unwrap();
        let n = v.len() as f64;
        let var = v.iter().map(C64::norm_sqr).sum::<f64>() / n;
        let re = v.iter().map(|z| z.re * z.re).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        assert!((re - 0.5).abs() < 0.01, "real-part variance {re}");
    }

    proptest! {
        #[test]
        fn det_matches_cofactor_oracle(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=4, n0 in 0.01f64..2.0) {
            let mut rng = Rng::new(seed, 0);
            let r = random_matrix(&mut rng, n, k);
            let a = r.matmul(&r.adjoint()).unwrap().add_diagonal(n0);
            prop_assert!(a.is_hermitian(1e-12));
            let chol = hermitian_det(&a).unwrap();
            let oracle = cofactor_det(&a);
            prop_assert!(oracle.im.abs() <= 1e-9 * oracle.re.abs());
            prop_assert!((chol - oracle.re).abs() <= 1e-10 * oracle.re.abs());
        }

        #[test]
        fn sylvester_determinant_identity(seed in any::<u64>(), n in 1usize..=8, k_frac in 0.0f64..1.0) {
            let k = 1 + ((n as f64 - 1.0) * k_frac).round() as usize;
            let mut rng = Rng::new(seed, 1);
            let a = random_matrix(&mut rng, n, k).scale(0.5);
            let b = a.adjoint();
            // |I + A B| with B = A^H keeps both sides Hermitian PD
            let lhs = hermitian_det(&a.matmul(&b).unwrap().add_diagonal(1.0)).unwrap();
            let rhs = hermitian_det(&b.matmul(&a).unwrap().add_diagonal(1.0)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        }
    }
}
