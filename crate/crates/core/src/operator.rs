//! Matrix-free linear operators: dense and sparse matrices and lazy
//! scalar-weighted sums.

use crate::kernels::C64;
use nalgebra::DMatrix;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: operator is {rows}×{cols}, vector has length {len}")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
    #[error("composed operator terms have inconsistent shapes")]
    InconsistentTerms,
    #[error("composed operator needs at least one term")]
    Empty,
}

pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `y ← A x`; lengths are the caller's responsibility.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, OperatorError> {
        if x.len() != self.ncols() {
            return Err(OperatorError::DimensionMismatch {
                rows: self.nrows(),
                cols: self.ncols(),
                len: x.len(),
            });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.nrows()];
        self.apply_into(x, &mut y);
        Ok(y)
    }
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        Self { matrix }
    }
}

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        // column-major storage: axpy over columns
        for (j, col) in self.matrix.column_iter().enumerate() {
            let xj = x[j];
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(col.iter()) {
                *yi += a * xj;
            }
        }
    }
}

/// Compressed sparse rows with a fixed pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sorted, deduplicated column lists.
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in &rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        Self {
            nrows: rows.len(),
            ncols,
            row_ptr,
            cols,
            vals: vec![C64::new(0.0, 0.0); nnz],
        }
    }

    /// Adds to an entry of the pattern; panics if it is not in the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: C64) {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        let k = self.cols[lo..hi]
            .binary_search(&col)
            .unwrap_or_else(|_| panic!("entry ({row}, {col}) outside sparsity pattern"));
        self.vals[lo + k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<C64> {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        self.cols[lo..hi].binary_search(&col).ok().map(|k| self.vals[lo + k])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }
}

/// `Σ cᵢ Aᵢ`, applied term by term without forming the sum.
#[derive(Clone)]
pub struct ComposedOperator {
    terms: Vec<(C64, Arc<dyn LinearOperator>)>,
}

impl std::fmt::Debug for ComposedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComposedOperator")
            .field("terms", &self.terms.len())
            .field("shape", &(self.nrows(), self.ncols()))
            .finish()
    }
}

impl ComposedOperator {
    pub fn new(terms: Vec<(C64, Arc<dyn LinearOperator>)>) -> Result<Self, OperatorError> {
        let first = terms.first().ok_or(OperatorError::Empty)?;
        let shape = (first.1.nrows(), first.1.ncols());
        if terms.iter().any(|(_, a)| (a.nrows(), a.ncols()) != shape) {
            return Err(OperatorError::InconsistentTerms);
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(C64, Arc<dyn LinearOperator>)] {
        &self.terms
    }
}

impl LinearOperator for ComposedOperator {
    fn nrows(&self) -> usize {
        self.terms[0].1.nrows()
    }

    fn ncols(&self) -> usize {
        self.terms[0].1.ncols()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut tmp = vec![C64::new(0.0, 0.0); y.len()];
        for (c, a) in &self.terms {
            a.apply_into(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += c * ti;
            }
        }
    }
}

/// `A⁻¹` for a Hermitian positive definite sparse `A` (a mass matrix),
/// applied by Jacobi-preconditioned conjugate gradients. Mass matrices are
/// well conditioned, so a few dozen steps reach rounding level.
#[derive(Debug, Clone)]
pub struct SpdInverse {
    matrix: CsrMatrix,
    inv_diag: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl SpdInverse {
    pub fn new(matrix: CsrMatrix) -> Self {
        let inv_diag = (0..matrix.nrows)
            .map(|r| 1.0 / matrix.get(r, r).map_or(1.0, |d| d.re))
            .collect();
        Self {
            matrix,
            inv_diag,
            tol: 1e-15,
            max_iter: 500,
        }
    }
}

impl LinearOperator for SpdInverse {
    fn nrows(&self) -> usize {
        self.matrix.nrows
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols
    }

    fn apply_into(&self, b: &[C64], x: &mut [C64]) {
        let zero = C64::new(0.0, 0.0);
        let dot = |a: &[C64], c: &[C64]| a.iter().zip(c).map(|(u, v)| u.conj() * v).sum::<C64>();
        x.iter_mut().for_each(|v| *v = zero);
        let mut r = b.to_vec();
        let bnorm = dot(b, b).re.sqrt();
        if bnorm == 0.0 {
            return;
        }
        let mut z: Vec<C64> = r.iter().zip(&self.inv_diag).map(|(v, d)| v * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![zero; b.len()];
        for _ in 0..self.max_iter {
            self.matrix.apply_into(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
            if dot(&r, &r).re.sqrt() <= self.tol * bnorm {
                break;
            }
            z.iter_mut().zip(r.iter().zip(&self.inv_diag)).for_each(|(zi, (ri, d))| *zi = ri * d);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
    }
}

/// The identity, mostly for tests.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn nrows(&self) -> usize {
        self.0
    }

    fn ncols(&self) -> usize {
        self.0
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn composed_matches_materialized_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 12;
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let b = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
        let (ca, cb) = (C64::new(0.5, 0.0), C64::new(0.0, -2.0));
        let sum = &a * ca + &b * cb;
        let op = ComposedOperator::new(vec![
            (ca, Arc::new(DenseOperator::new(a)) as Arc<dyn LinearOperator>),
            (cb, Arc::new(DenseOperator::new(b))),
        ])
        .unwrap();
        assert!(op.apply(&vec![C64::new(0.0, 0.0); n]).unwrap().iter().all(|v| v.norm() == 0.0));
        for _ in 0..10 {
            let x = random_vec(&mut rng, n);
            let y = op.apply(&x).unwrap();
            let z = &sum * nalgebra::DVector::from_vec(x);
            let err: f64 = y.iter().zip(z.iter()).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-14 * z.norm());
        }
        assert!(op.apply(&[C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn csr_roundtrip() {
        let mut m = CsrMatrix::from_pattern(3, vec![vec![0, 2], vec![], vec![1]]);
        m.add(0, 2, C64::new(1.0, 1.0));
        m.add(0, 2, C64::new(1.0, 0.0));
        m.add(2, 1, C64::new(-3.0, 0.0));
        assert_eq!(m.get(0, 2), Some(C64::new(2.0, 1.0)));
        assert_eq!(m.get(1, 1), None);
        let d = m.to_dense();
        let x = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let y = m.apply(&x).unwrap();
        let z = &d * nalgebra::DVector::from_vec(x);
        assert_eq!(y, z.as_slice());
    }
}
