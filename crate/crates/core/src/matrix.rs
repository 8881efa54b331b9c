//! Dense complex square matrices and the three spectral primitives the rest
//! of the crate consumes: singular values, spectral norm and numerical rank.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scan::sort_desc;

/// Absolute floor applied to `tol * sigma_1` in [`numerical_rank`].
pub const RANK_ABSOLUTE_FLOOR: f64 = 1e-300;

/// A square complex matrix of order `n >= 1` with finite entries.
///
/// Diagonal matrices keep a compact representation; everything else is stored
/// dense in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    storage: Storage,
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<Complex64>),
    Diagonal(Vec<Complex64>),
}

fn check_finite(entries: &[Complex64]) -> Result<()> {
    match entries.iter().position(|z| !z.is_finite()) {
        Some(k) => Err(Error::invalid(format!(
            "non-finite entry at flat index {k}"
        ))),
        None => Ok(()),
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("matrix order must be positive"));
    }
    Ok(())
}

impl Matrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_order(n)?;
        Ok(Self {
            n,
            storage: Storage::Diagonal(vec![Complex64::new(0.0, 0.0); n]),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_order(n)?;
        Ok(Self {
            n,
            storage: Storage::Diagonal(vec![Complex64::new(1.0, 0.0); n]),
        })
    }

    pub fn from_diagonal(diagonal: Vec<Complex64>) -> Result<Self> {
        check_order(diagonal.len())?;
        check_finite(&diagonal)?;
        Ok(Self {
            n: diagonal.len(),
            storage: Storage::Diagonal(diagonal),
        })
    }

    /// Real non-negative diagonal, e.g. a list of symbol samples.
    pub fn from_real_diagonal(values: &[f64]) -> Result<Self> {
        Self::from_diagonal(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_row_major(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        check_order(n)?;
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a square matrix of order {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        check_finite(&entries)?;
        Ok(Self {
            n,
            storage: Storage::Dense(entries),
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "row {bad} has length {} in a matrix with {n} rows",
                rows[bad].len()
            )));
        }
        Self::from_row_major(n, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        check_order(n)?;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self::from_row_major(n, entries)
    }

    /// Order of the matrix.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_diagonal_storage(&self) -> bool {
        matches!(self.storage, Storage::Diagonal(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range");
        match &self.storage {
            Storage::Dense(e) => e[i * self.n + j],
            Storage::Diagonal(d) if i == j => d[i],
            Storage::Diagonal(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_row_major(&self) -> Vec<Complex64> {
        match &self.storage {
            Storage::Dense(e) => e.clone(),
            Storage::Diagonal(d) => {
                let mut e = vec![Complex64::new(0.0, 0.0); self.n * self.n];
                for (i, &v) in d.iter().enumerate() {
                    e[i * self.n + i] = v;
                }
                e
            }
        }
    }

    fn entries(&self) -> &[Complex64] {
        match &self.storage {
            Storage::Dense(e) | Storage::Diagonal(e) => e,
        }
    }

    /// True when every stored entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.entries().iter().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.is_finite())
    }

    fn same_order(&self, other: &Matrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::invalid(format!(
                "order mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &Matrix,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Matrix> {
        self.same_order(other)?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Diagonal(a), Storage::Diagonal(b)) => {
                Storage::Diagonal(a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect())
            }
            _ => {
                let a = self.to_row_major();
                let b = other.to_row_major();
                Storage::Dense(a.iter().zip(&b).map(|(&x, &y)| op(x, y)).collect())
            }
        };
        Ok(Matrix { n: self.n, storage })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, lambda: Complex64) -> Matrix {
        let map = |e: &[Complex64]| e.iter().map(|&z| lambda * z).collect::<Vec<_>>();
        let storage = match &self.storage {
            Storage::Dense(e) => Storage::Dense(map(e)),
            Storage::Diagonal(d) => Storage::Diagonal(map(d)),
        };
        Matrix { n: self.n, storage }
    }

    pub fn neg(&self) -> Matrix {
        let map = |e: &[Complex64]| e.iter().map(|&z| -z).collect::<Vec<_>>();
        let storage = match &self.storage {
            Storage::Dense(e) => Storage::Dense(map(e)),
            Storage::Diagonal(d) => Storage::Diagonal(map(d)),
        };
        Matrix { n: self.n, storage }
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        self.same_order(other)?;
        let n = self.n;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Diagonal(a), Storage::Diagonal(b)) => {
                Storage::Diagonal(a.iter().zip(b).map(|(&x, &y)| x * y).collect())
            }
            (Storage::Diagonal(d), Storage::Dense(e)) => {
                let mut out = e.clone();
                for (i, row) in out.chunks_exact_mut(n).enumerate() {
                    row.iter_mut().for_each(|z| *z = d[i] * *z);
                }
                Storage::Dense(out)
            }
            (Storage::Dense(e), Storage::Diagonal(d)) => {
                let mut out = e.clone();
                for row in out.chunks_exact_mut(n) {
                    row.iter_mut().zip(d).for_each(|(z, &s)| *z *= s);
                }
                Storage::Dense(out)
            }
            (Storage::Dense(a), Storage::Dense(b)) => {
                let lhs = MatRef::from_row_major_slice(a, n, n);
                let rhs = MatRef::from_row_major_slice(b, n, n);
                let mut dst = Mat::<Complex64>::zeros(n, n);
                faer::linalg::matmul::matmul(
                    dst.as_mut(),
                    Accum::Replace,
                    lhs,
                    rhs,
                    Complex64::new(1.0, 0.0),
                    Par::Seq,
                );
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        out.push(dst[(i, j)]);
                    }
                }
                Storage::Dense(out)
            }
        };
        Ok(Matrix { n, storage })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.entries().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        match &self.storage {
            Storage::Diagonal(d) => Matrix {
                n: self.n,
                storage: Storage::Diagonal(d.iter().map(|z| z.conj()).collect()),
            },
            Storage::Dense(e) => {
                let n = self.n;
                let mut out = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[j * n + i] = e[i * n + j].conj();
                    }
                }
                Matrix {
                    n,
                    storage: Storage::Dense(out),
                }
            }
        }
    }
}

/// Singular values `sigma_1 >= ... >= sigma_n >= 0` of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes all singular values, sorted non-increasing.
///
/// Diagonal matrices are answered exactly by sorting the moduli of the
/// diagonal. Dense matrices go through a bidiagonalization SVD; when every
/// entry is real the real-arithmetic kernel is used. The dense input is first
/// negated if its first nonzero entry is "negative", so `A` and `-A` always
/// produce bit-identical spectra.
pub fn singular_values(a: &Matrix) -> Result<SingularSpectrum> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut values = match &a.storage {
        Storage::Diagonal(d) => d.iter().map(|z| z.norm()).collect::<Vec<_>>(),
        Storage::Dense(e) => match monomial_moduli(a.n, e) {
            Some(m) => m,
            None => dense_singular_values(a.n, e)?,
        },
    };
    // the SVD already sorts; sorting again also clamps any -0.0 ordering quirks
    values.iter_mut().for_each(|v| *v = v.abs());
    sort_desc(&mut values);
    Ok(SingularSpectrum { values })
}

/// Singular values of a matrix with at most one nonzero per row and column
/// (a scaled partial permutation) are the moduli of its entries, padded with zeros.
fn monomial_moduli(n: usize, entries: &[Complex64]) -> Option<Vec<f64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut column_used = vec![false; n];
    let mut moduli = vec![0.0; n];
    for (i, row) in entries.chunks_exact(n).enumerate() {
        let mut seen = false;
        for (j, z) in row.iter().enumerate() {
            if *z != zero {
                if seen || column_used[j] {
                    return None;
                }
                seen = true;
                column_used[j] = true;
                moduli[i] = z.norm();
            }
        }
    }
    Some(moduli)
}

fn sign_canonical(entries: &[Complex64]) -> f64 {
    match entries.iter().find(|z| z.re != 0.0 || z.im != 0.0) {
        Some(z) if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) => -1.0,
        _ => 1.0,
    }
}

fn dense_singular_values(n: usize, entries: &[Complex64]) -> Result<Vec<f64>> {
    let sign = sign_canonical(entries);
    if entries.iter().all(|z| z.im == 0.0) {
        let m = Mat::<f64>::from_fn(n, n, |i, j| sign * entries[i * n + j].re);
        let s = svd_diag(m.as_ref())?;
        Ok(s.column_vector().iter().copied().collect())
    } else {
        let m = Mat::<Complex64>::from_fn(n, n, |i, j| entries[i * n + j] * sign);
        let s = svd_diag(m.as_ref())?;
        Ok(s.column_vector().iter().map(|z| z.re).collect())
    }
}

fn svd_diag<T: faer::traits::ComplexField>(m: MatRef<'_, T>) -> Result<Diag<T>> {
    let n = m.nrows();
    let mut s = Diag::<T>::zeros(n);
    let req = svd::svd_scratch::<T>(
        n,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        Par::Seq,
        Default::default(),
    );
    let mut buf = MemBuffer::new(req);
    svd::svd(
        m,
        s.as_mut(),
        None,
        None,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::NoConvergence)?;
    Ok(s)
}

/// Spectral norm `sigma_1(A)`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.largest())
}

/// Number of singular values strictly above `max(tol * sigma_1, 1e-300)`.
pub fn numerical_rank(a: &Matrix, tol: f64) -> Result<usize> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!(
            "rank tolerance must be >= 0, got {tol}"
        )));
    }
    let spectrum = singular_values(a)?;
    let cutoff = (tol * spectrum.largest()).max(RANK_ABSOLUTE_FLOOR);
    Ok(spectrum
        .values()
        .iter()
        .take_while(|&&s| s > cutoff)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_spectrum_is_sorted_moduli() {
        let a = Matrix::from_real_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(singular_values(&a).unwrap().values(), &[4.0, 3.0]);
        let d = Matrix::from_diagonal(vec![c(3.0), c(-4.0)]).unwrap();
        assert_eq!(singular_values(&d).unwrap().values(), &[4.0, 3.0]);
    }

    #[test]
    fn nilpotent_shift() {
        let a = Matrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let s = singular_values(&a).unwrap();
        assert!((s.values()[0] - 1.0).abs() < 1e-15);
        assert!(s.values()[1].abs() < 1e-15);
    }

    #[test]
    fn norms() {
        assert_eq!(spectral_norm(&Matrix::zeros(5).unwrap()).unwrap(), 0.0);
        assert_eq!(spectral_norm(&Matrix::identity(7).unwrap()).unwrap(), 1.0);
        let a = Matrix::from_real_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let s = singular_values(&a).unwrap();
        assert_eq!(spectral_norm(&a).unwrap(), s.largest());
        assert!((spectral_norm(&a).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ranks() {
        assert_eq!(
            numerical_rank(&Matrix::zeros(4).unwrap(), 1e-12).unwrap(),
            0
        );
        assert_eq!(
            numerical_rank(&Matrix::identity(4).unwrap(), 1e-12).unwrap(),
            4
        );
        let u: Vec<Complex64> = (0..8)
            .map(|k| Complex64::new(1.0 + k as f64, 0.5))
            .collect();
        let v: Vec<Complex64> = (0..8).map(|k| Complex64::new(0.3, -(k as f64))).collect();
        let outer = Matrix::from_fn(8, |i, j| u[i] * v[j].conj()).unwrap();
        assert_eq!(numerical_rank(&outer, 1e-10).unwrap(), 1);
        let d = Matrix::from_diagonal(vec![c(2.0), c(0.0), c(-1.0), c(0.0), c(5.0)]).unwrap();
        assert_eq!(numerical_rank(&d, 0.0).unwrap(), 3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            numerical_rank(&Matrix::identity(2).unwrap(), -1.0),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            numerical_rank(&Matrix::identity(2).unwrap(), f64::NAN),
            Err(Error::InvalidInput(_))
        ));
        assert!(Matrix::from_real_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(Matrix::from_real_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(Matrix::from_real_rows(&[vec![1.0, f64::INFINITY], vec![0.0, 1.0]]).is_err());
        assert!(Matrix::zeros(0).is_err());
        let overflow = Matrix::identity(2).unwrap().scale(c(1e308)).scale(c(1e308));
        assert!(singular_values(&overflow).is_err());
    }

    #[test]
    fn negation_gives_identical_bits() {
        let a = Matrix::from_fn(9, |i, j| {
            Complex64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + j) as f64 * 0.1)
        })
        .unwrap();
        let s1 = singular_values(&a).unwrap();
        let s2 = singular_values(&a.neg()).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn products_respect_storage() {
        let d = Matrix::from_diagonal(vec![c(1.0), c(2.0), c(3.0)]).unwrap();
        let a = Matrix::from_fn(3, |i, j| c((i * 3 + j) as f64)).unwrap();
        let dense_d = Matrix::from_row_major(3, d.to_row_major()).unwrap();
        let via_diag = d.matmul(&a).unwrap();
        let via_dense = dense_d.matmul(&a).unwrap();
        assert!(via_diag.max_abs_diff(&via_dense).unwrap() < 1e-14);
        let right = a.matmul(&d).unwrap();
        let right_dense = a.matmul(&dense_d).unwrap();
        assert!(right.max_abs_diff(&right_dense).unwrap() < 1e-14);
        assert_eq!(right.get(2, 2), c(24.0));
    }

    #[test]
    fn scaled_permutations_are_exact() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let z = c(0.0, 0.0);
        let m = Matrix::from_rows(&[
            vec![z, c(3.0, 4.0), z],
            vec![z, z, z],
            vec![c(-2.0, 0.0), z, z],
        ])
        .unwrap();
        assert_eq!(singular_values(&m).unwrap().values(), &[5.0, 2.0, 0.0]);
        let two_in_row = Matrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let s = singular_values(&two_in_row).unwrap();
        assert!((s.values()[0] - 2f64.sqrt()).abs() < 1e-15 && s.values()[1].abs() < 1e-15);
        let shared_column = Matrix::from_real_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!((spectral_norm(&shared_column).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
