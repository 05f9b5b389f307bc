use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, Real};

/// Symmetric positive-definite matrix with its Cholesky factor.
///
/// Entries are stored row-major. The lower-triangular factor `L` with
/// `L Lᵀ = S` is computed once at construction; every inverse application
/// goes through triangular solves against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SpdMatrix<T> {
    dim: usize,
    entries: Vec<T>,
    factor: Vec<T>,
}

/// Validates `raw` and caches its factorization.
pub fn spd_validate<T: Real>(raw: &[Vec<T>]) -> Result<SpdMatrix<T>> {
    SpdMatrix::from_rows(raw)
}

impl<T: Real> SpdMatrix<T> {
    pub fn from_rows(raw: &[Vec<T>]) -> Result<Self> {
        let dim = raw.len();
        if dim == 0 {
            return Err(Error::invalid("matrix", "dimension must be at least 1"));
        }
        for (row, r) in raw.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::NotSquare { rows: dim, row, len: r.len() });
            }
        }
        let entries: Vec<T> = raw.iter().flatten().copied().collect();
        Self::from_row_major(dim, entries)
    }

    pub fn from_row_major(dim: usize, mut entries: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix", "dimension must be at least 1"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix", "entries must be finite"));
        }
        let scale = entries.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let tol = T::symmetry_tolerance() * scale;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                let dev = (a - b).abs();
                if dev > tol {
                    return Err(Error::NotSymmetric { i, j, deviation: dev.to_f64().unwrap_or(f64::NAN) });
                }
                let avg = (a + b) / T::lit(2.0);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        let factor = cholesky(dim, &entries)?;
        Ok(Self { dim, entries, factor })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    /// `c·I`. Panics unless `c > 0` and `dim ≥ 1`.
    pub fn scaled_identity(dim: usize, c: T) -> Self {
        let diag = vec![c; dim];
        Self::diagonal(&diag).expect("scaled identity requires c > 0 and dim >= 1")
    }

    pub fn diagonal(diag: &[T]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![T::zero(); dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self::from_row_major(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }

    pub fn row_major(&self) -> &[T] {
        &self.entries
    }

    /// Lower Cholesky factor, row-major.
    pub fn factor(&self) -> &[T] {
        &self.factor
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `Tr(S·O)` for symmetric `O`.
    pub fn trace_product(&self, other: &SpdMatrix<T>) -> Result<T> {
        check_dim(self.dim, other.dim)?;
        Ok(dot(&self.entries, &other.entries))
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, v.len())?;
        Ok(self.entries.chunks(self.dim).map(|row| dot(row, v)).collect())
    }

    /// `L·v` with the cached lower factor.
    pub fn factor_mul_vec(&self, v: &[T], out: &mut [T]) {
        let n = self.dim;
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            out[i] = dot(row, &v[..=i]);
        }
    }

    /// Solves `L y = b` in place.
    fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim;
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i];
            let s = b[i] - dot(row, &b[..i]);
            b[i] = s / self.factor[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.factor[k * n + i] * b[k];
            }
            b[i] = s / self.factor[i * n + i];
        }
    }

    /// `S⁻¹ v` via two triangular solves.
    pub fn solve(&self, v: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, v.len())?;
        let mut x = v.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [T]) {
        self.solve_lower_in_place(x);
        self.solve_upper_in_place(x);
    }

    /// `S⁻¹ M` for a row-major square `M` of the same dimension.
    pub fn solve_matrix(&self, m: &[T]) -> Result<Vec<T>> {
        let n = self.dim;
        check_dim(n * n, m.len())?;
        let mut out = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = m[i * n + j];
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        Ok(out)
    }

    /// Dense `S⁻¹`, row-major. Only for diagnostics; hot paths use [`solve`](Self::solve).
    pub fn inverse(&self) -> Vec<T> {
        let n = self.dim;
        let mut id = vec![T::zero(); n * n];
        for i in 0..n {
            id[i * n + i] = T::one();
        }
        self.solve_matrix(&id).expect("identity has matching dimension")
    }

    pub fn try_add(&self, other: &SpdMatrix<T>) -> Result<SpdMatrix<T>> {
        check_dim(self.dim, other.dim)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| a + b).collect();
        Self::from_row_major(self.dim, entries)
    }

    pub fn scale(&self, c: T) -> Result<SpdMatrix<T>> {
        if !(c > T::zero()) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        let entries = self.entries.iter().map(|&a| a * c).collect();
        Self::from_row_major(self.dim, entries)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &SpdMatrix<T>) -> T {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

fn cholesky<T: Real>(n: usize, a: &[T]) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d.to_f64().unwrap_or(f64::NAN) });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// `vᵀ S⁻² v`, evaluated as `‖S⁻¹ v‖²` with two factored solves.
pub fn quad_form_inv2<T: Real>(v: &[T], cov: &SpdMatrix<T>) -> Result<T> {
    let w = cov.solve(v)?;
    Ok(dot(&w, &w))
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for SpdMatrix<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl<T: Real> From<SpdMatrix<T>> for Vec<Vec<T>> {
    fn from(m: SpdMatrix<T>) -> Self {
        m.to_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_validates() {
        let raw: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let s = spd_validate(&raw).unwrap();
        assert_eq!(s.dim(), 4);
        assert_eq!(s.trace(), 4.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let err = spd_validate(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { i: 0, j: 1, .. }));
    }

    #[test]
    fn indefinite_rejected() {
        // eigenvalues 3 and -1
        let err = spd_validate(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
    }

    #[test]
    fn ragged_and_empty_rejected() {
        assert!(matches!(spd_validate(&[vec![1.0, 0.0], vec![0.0]]), Err(Error::NotSquare { .. })));
        assert!(spd_validate::<f64>(&[]).is_err());
    }

    #[test]
    fn roundoff_asymmetry_is_symmetrized() {
        let s = spd_validate(&[vec![2.0, 1.0 + 1e-14], vec![1.0, 2.0]]).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }

    #[test]
    fn quad_form_examples() {
        let two = SpdMatrix::<f64>::scaled_identity(2, 2.0);
        assert!((quad_form_inv2(&[1.0, 1.0], &two).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(quad_form_inv2(&[0.0, 0.0], &two).unwrap(), 0.0);
        let id = SpdMatrix::<f64>::identity(3);
        assert!((quad_form_inv2(&[3.0, 0.0, 0.0], &id).unwrap() - 9.0).abs() < 1e-15);
        assert!(matches!(quad_form_inv2(&[1.0], &id), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quad_form_matches_dense_inverse() {
        let s = spd_validate(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]).unwrap();
        let inv = s.inverse();
        let v = [0.3, -1.2, 2.0];
        let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i * 3 + j] * v[j]).sum()).collect();
        let expected: f64 = w.iter().map(|x| x * x).sum();
        assert!((quad_form_inv2(&v, &s).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let s = SpdMatrix::<f32>::scaled_identity(3, 2.0);
        let q = quad_form_inv2(&[2.0f32, 0.0, 0.0], &s).unwrap();
        assert!((q - 1.0).abs() < 1e-6);
    }

    #[test]
    fn serde_round_trip_validates() {
        let s: SpdMatrix<f64> = serde_json::from_str("[[2.0, 0.5], [0.5, 1.0]]").unwrap();
        assert_eq!(s.dim(), 2);
        assert!(serde_json::from_str::<SpdMatrix<f64>>("[[1.0, 2.0], [2.0, 1.0]]").is_err());
    }
}
