use super::{canonical_sign, MatVecBackend};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, normalized};

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    /// Rayleigh quotient `vᵀ A v`.
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    /// Iteration matvecs, excluding the final Rayleigh/residual call.
    pub iterations: usize,
    pub converged: bool,
}

/// `b <- A b / ‖A b‖` until successive iterates agree up to sign within `tol`.
pub fn power_iteration<B: MatVecBackend + ?Sized>(
    backend: &mut B,
    start: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<PowerResult> {
    if start.len() != backend.dim() || start.is_empty() {
        return Err(Error::domain("start vector does not match backend dimension"));
    }
    let mut b = normalized(start).ok_or_else(|| Error::domain("start vector is zero"))?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let w = backend.apply(&b)?;
        iterations += 1;
        let next = normalized(&w).ok_or(Error::Breakdown { dimension: iterations })?;
        let same: f64 = next.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let flipped: f64 = next.iter().zip(&b).map(|(x, y)| (x + y).powi(2)).sum();
        b = next;
        if same.min(flipped).sqrt() < tol {
            converged = true;
            break;
        }
    }
    canonical_sign(&mut b);
    let ab = backend.apply(&b)?;
    let value = dot(&b, &ab);
    let r: Vec<f64> = ab.iter().zip(&b).map(|(a, v)| a - value * v).collect();
    Ok(PowerResult {
        value,
        residual: norm(&r),
        vector: b,
        iterations,
        converged,
    })
}
