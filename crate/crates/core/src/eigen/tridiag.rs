use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 50;
const REL_TOL: f64 = 1e-12;

/// All eigenpairs of the symmetric tridiagonal matrix with diagonal `alpha`
/// and off-diagonal `beta`, by implicit-shift QL with Wilkinson shifts.
/// Eigenvalues are sorted descending; `vectors[i]` pairs with `values[i]`.
pub fn tridiag_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = alpha.len();
    if n == 0 || beta.len() + 1 != n {
        return Err(Error::domain(format!(
            "tridiagonal with {} diagonal and {} off-diagonal entries",
            n,
            beta.len()
        )));
    }
    let mut d = alpha.to_vec();
    // e[i] couples i and i + 1; e[n - 1] is scratch.
    let mut e = beta.to_vec();
    e.push(0.0);
    // z[k] is row k of the accumulated rotation; eigenvectors are its columns.
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= REL_TOL * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::Numerical(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} after {MAX_SWEEPS} sweeps"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| z.iter().map(|row| row[i]).collect())
        .collect();
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
        let mut count = 0;
        let mut q = alpha[0] - x;
        for i in 0..alpha.len() {
            if i > 0 {
                let denom = if q == 0.0 { f64::EPSILON } else { q };
                q = alpha[i] - x - beta[i - 1] * beta[i - 1] / denom;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bisection_oracle(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let n = alpha.len();
        let radius = (0..n)
            .map(|i| {
                alpha[i].abs()
                    + if i > 0 { beta[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { beta[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max);
        let mut out: Vec<f64> = (0..n)
            .map(|k| {
                let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(alpha, beta, mid) > k {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        out.reverse();
        out
    }

    #[test]
    fn one_by_one() {
        let (v, z) = tridiag_eigen(&[2.5], &[]).unwrap();
        assert_eq!(v, vec![2.5]);
        assert_eq!(z, vec![vec![1.0]]);
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let (a, b, c) = (2.0, -1.5, 0.5);
        let (v, z) = tridiag_eigen(&[a, c], &[b]).unwrap();
        let disc = ((a - c) * (a - c) / 4.0 + b * b).sqrt();
        let mid = (a + c) / 2.0;
        assert!((v[0] - (mid + disc)).abs() < 1e-14);
        assert!((v[1] - (mid - disc)).abs() < 1e-14);
        for (lam, x) in v.iter().zip(&z) {
            assert!((a * x[0] + b * x[1] - lam * x[0]).abs() < 1e-13);
            assert!((b * x[0] + c * x[1] - lam * x[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn random_matches_sturm_bisection() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for _ in 0..20 {
            let alpha: Vec<f64> = (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let beta: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (v, z) = tridiag_eigen(&alpha, &beta).unwrap();
            let oracle = bisection_oracle(&alpha, &beta);
            for (x, y) in v.iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
            }
            for i in 0..10 {
                for j in 0..10 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&z[i], &z[j]) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn already_diagonal_and_degenerate_inputs() {
        let (v, _) = tridiag_eigen(&[1.0, 3.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![3.0, 2.0, 1.0]);
        let (v, _) = tridiag_eigen(&[0.0, 0.0], &[1.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
        assert!(tridiag_eigen(&[], &[]).is_err());
        assert!(tridiag_eigen(&[1.0, 2.0], &[]).is_err());
    }
}
