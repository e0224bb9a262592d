use super::{axpy, canonical_sign, tridiag_eigen, EigenResult, MatVecBackend};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, normalized};

/// `β` below this fraction of `‖A v_j‖` counts as an invariant subspace.
const BREAKDOWN_REL: f64 = 1e-10;

/// Lanczos basis and tridiagonal after `alpha.len()` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LanczosState {
    pub basis: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Set when `β_j` vanished: `basis` spans an invariant subspace of this dimension.
    pub breakdown: Option<usize>,
}

impl LanczosState {
    pub fn steps(&self) -> usize {
        self.alpha.len()
    }
}

/// Symmetric Lanczos from `start`, one backend call per step. The matrix is
/// assumed symmetric. With `reorthogonalize`, each new vector is projected
/// out of the whole basis twice (classical Gram-Schmidt).
pub fn lanczos_run<B: MatVecBackend + ?Sized>(
    backend: &mut B,
    start: &[f64],
    k: usize,
    max_iters: usize,
    reorthogonalize: bool,
) -> Result<LanczosState> {
    let n = backend.dim();
    if k == 0 || n < k {
        return Err(Error::domain(format!("dimension {n} below k = {k}")));
    }
    if start.len() != n {
        return Err(Error::domain("start vector does not match backend dimension"));
    }
    if max_iters == 0 {
        return Err(Error::domain("at least one Lanczos step is required"));
    }
    let v1 = normalized(start).ok_or_else(|| Error::domain("start vector is zero"))?;
    let mut st = LanczosState {
        basis: vec![v1],
        alpha: Vec::new(),
        beta: Vec::new(),
        breakdown: None,
    };
    for j in 0..max_iters {
        let mut w = backend.apply(&st.basis[j])?;
        let scale = norm(&w);
        let a = dot(&w, &st.basis[j]);
        axpy(&mut w, -a, &st.basis[j]);
        if j > 0 {
            axpy(&mut w, -st.beta[j - 1], &st.basis[j - 1]);
        }
        if reorthogonalize {
            for _ in 0..2 {
                for v in &st.basis {
                    let c = dot(&w, v);
                    axpy(&mut w, -c, v);
                }
            }
        }
        st.alpha.push(a);
        if j + 1 == max_iters {
            break;
        }
        let b = norm(&w);
        if b <= BREAKDOWN_REL * scale || b == 0.0 || st.basis.len() == n {
            st.breakdown = Some(j + 1);
            log::debug!("Lanczos breakdown at dimension {}", j + 1);
            break;
        }
        st.beta.push(b);
        st.basis.push(w.iter().map(|x| x / b).collect());
    }
    st.basis.truncate(st.alpha.len());
    Ok(st)
}

/// Ritz pairs for the `k` largest-magnitude Ritz values. Each residual costs
/// one backend call.
pub fn ritz_vectors<B: MatVecBackend + ?Sized>(
    state: &LanczosState,
    k: usize,
    backend: &mut B,
) -> Result<EigenResult> {
    let (theta, y) = tridiag_eigen(&state.alpha, &state.beta)?;
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    order.truncate(k);

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for i in order {
        let mut x = vec![0.0; backend.dim()];
        for (v, c) in state.basis.iter().zip(&y[i]) {
            axpy(&mut x, *c, v);
        }
        let mut x = normalized(&x).ok_or_else(|| Error::Numerical("zero Ritz vector".into()))?;
        canonical_sign(&mut x);
        let ax = backend.apply(&x)?;
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a - theta[i] * v).collect();
        values.push(theta[i]);
        residuals.push(norm(&r));
        vectors.push(x);
    }
    Ok(EigenResult {
        values,
        vectors,
        converged: state.breakdown.is_some() || residuals_small(&residuals),
        residuals,
        iterations: state.steps(),
        breakdown: state.breakdown,
    })
}

fn residuals_small(r: &[f64]) -> bool {
    r.iter().all(|x| *x < 1e-6)
}
