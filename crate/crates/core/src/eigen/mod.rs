//! Power iteration and symmetric Lanczos over an abstract matvec backend.
//!
//! The driver makes exactly one backend call per iteration; everything else
//! is `O(n)` vector work plus a small tridiagonal eigenproblem at the end.

mod lanczos;
mod power;
mod tridiag;

pub use lanczos::{lanczos_run, ritz_vectors, LanczosState};
pub use power::{power_iteration, PowerResult};
pub use tridiag::tridiag_eigen;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Convergence threshold for plaintext backends.
pub const PLAIN_TOL: f64 = 1e-8;
/// Convergence threshold for the fixed-point secure backend at six decimals.
pub const SECURE_TOL: f64 = 1e-6;

/// `x -> A x` for a fixed real `n x n` matrix `A`.
pub trait MatVecBackend {
    fn dim(&self) -> usize;
    fn apply(&mut self, x: &[f64]) -> Result<Vec<f64>>;
}

impl<B: MatVecBackend + ?Sized> MatVecBackend for &mut B {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
}

/// Plaintext reference backend.
#[derive(Clone, Debug)]
pub struct DenseBackend {
    matrix: DenseMatrix,
    pub calls: usize,
}

impl DenseBackend {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::domain("backend matrix must be square"));
        }
        Ok(DenseBackend { matrix, calls: 0 })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl MatVecBackend for DenseBackend {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    fn apply(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::domain(format!(
                "vector of length {} for dimension {}",
                x.len(),
                self.dim()
            )));
        }
        self.calls += 1;
        Ok(self.matrix.matvec(x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    /// Descending by magnitude.
    pub values: Vec<f64>,
    /// Unit-norm, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v − λ v‖₂`, measured with one backend call per pair.
    pub residuals: Vec<f64>,
    /// Backend calls made by the iteration itself.
    pub iterations: usize,
    pub converged: bool,
    /// Subspace dimension at which Lanczos found an invariant subspace.
    pub breakdown: Option<usize>,
}

/// Top-`k` eigenpairs: power iteration for `k = 1`, Lanczos with full
/// reorthogonalization otherwise. `iters` caps the iteration's backend calls.
pub fn topk<B: MatVecBackend + ?Sized>(
    backend: &mut B,
    start: &[f64],
    k: usize,
    iters: usize,
    tol: f64,
) -> Result<EigenResult> {
    if k == 0 || k > backend.dim() {
        return Err(Error::domain(format!(
            "k = {k} outside 1..={}",
            backend.dim()
        )));
    }
    if k == 1 {
        let p = power_iteration(backend, start, iters, tol)?;
        return Ok(EigenResult {
            values: vec![p.value],
            vectors: vec![p.vector],
            residuals: vec![p.residual],
            iterations: p.iterations,
            converged: p.converged,
            breakdown: None,
        });
    }
    if iters < k {
        return Err(Error::domain(format!("{iters} Lanczos steps cannot yield {k} pairs")));
    }
    let state = lanczos_run(backend, start, k, iters, true)?;
    ritz_vectors(&state, k, backend)
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Flips `v` so its largest-magnitude component is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dot;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    pub(crate) fn dense_oracle(m: &DenseMatrix) -> Vec<f64> {
        let n = m.n_rows();
        let a = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap());
        ev
    }

    #[test]
    fn topk_matches_dense_oracle_with_residual_bound() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let m = DenseMatrix::random_symmetric(40, 1.0, 6, &mut rng);
        let fro = m.rows().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let oracle = dense_oracle(&m);
        let mut b = DenseBackend::new(m.clone()).unwrap();
        let start = vec![1.0; 40];
        let r = topk(&mut b, &start, 3, 40, PLAIN_TOL).unwrap();
        for i in 0..3 {
            assert!((r.values[i] - oracle[i]).abs() <= 1e-10 * oracle[0].abs());
            let av = m.matvec(&r.vectors[i]);
            let res: f64 = av
                .iter()
                .zip(&r.vectors[i])
                .map(|(a, v)| (a - r.values[i] * v).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= (1e-6 * fro).max(r.residuals[i]) + 1e-15);
            assert!((dot(&r.vectors[i], &r.vectors[i]) - 1.0).abs() < 1e-12);
        }
        assert_eq!(b.calls, r.iterations + 3);
    }

    #[test]
    fn topk_validates_k() {
        let mut b = DenseBackend::new(DenseMatrix::from_fn(3, 3, |i, j| (i == j) as u8 as f64)).unwrap();
        assert!(topk(&mut b, &[1.0; 3], 0, 5, PLAIN_TOL).is_err());
        assert!(topk(&mut b, &[1.0; 3], 4, 5, PLAIN_TOL).is_err());
        assert!(topk(&mut b, &[1.0; 3], 3, 2, PLAIN_TOL).is_err());
        assert!(DenseBackend::new(DenseMatrix::from_fn(2, 3, |_, _| 1.0)).is_err());
    }
}
