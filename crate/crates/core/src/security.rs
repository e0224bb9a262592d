//! Desk-scale experiments on what the cloud's view reveals: the averaging
//! attack on a shared first iterate, and chi-square uniformity of transcripts.

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::protocol::{perturb, perturb_with, random_residues, PerturbationPool, ScaleTag};

pub const MIN_AUDIT_SAMPLES: usize = 500;
/// Fraction of components that must look uniform for an audit to pass.
pub const AUDIT_PASS_FRACTION: f64 = 0.95;
pub const AUDIT_P_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct AttackConfig {
    pub n: usize,
    pub q: u64,
    /// Perturbed samples the attacker averages per estimate.
    pub samples: usize,
    pub trials: usize,
    /// Seeds per simulated user pool.
    pub m: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct AttackReport {
    pub config: AttackConfig,
    /// Variance of `b̂_1` across trials, averaged over components.
    pub empirical_variance: f64,
    /// `q² / (12 N)`.
    pub predicted_variance: f64,
    /// Mean of `b̂_1 − b_1`, averaged over components.
    pub bias: f64,
    pub empirical_mean_r: f64,
    pub exact_mean_r: f64,
}

impl AttackReport {
    pub fn relative_error(&self) -> f64 {
        (self.empirical_variance - self.predicted_variance).abs() / self.predicted_variance
    }
}

fn to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Every run is a fresh user with its own seeds and coefficients, but all
/// share `b0` and the first iterate `b_1`. The attacker averages the `N`
/// perturbed `b̄_1` it sees and subtracts `E[r] = (q − 1) / 2`.
pub fn simulate_attack(cfg: &AttackConfig) -> Result<AttackReport> {
    if cfg.q < 2 || cfg.q > 1 << 32 || cfg.n == 0 || cfg.samples == 0 || cfg.trials < 2 || cfg.m == 0 {
        return Err(Error::domain("attack needs n, N, m >= 1, trials >= 2 and 2 <= q <= 2^32"));
    }
    let q = BigUint::from(cfg.q);
    let mut shared = ChaCha20Rng::seed_from_u64(cfg.seed);
    let b0 = random_residues(cfg.n, &q, &mut shared);
    let b1 = random_residues(cfg.n, &q, &mut shared);
    let zeros = vec![BigUint::from(0u8); cfg.n];

    let per_trial: Vec<(Vec<f64>, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64 + 1);
            let mut sums = vec![0.0f64; cfg.n];
            let mut r_sum = 0.0f64;
            for _ in 0..cfg.samples {
                let mut pool = PerturbationPool::new(q.clone(), cfg.n, 0);
                for _ in 0..cfg.m {
                    pool.add_seed(random_residues(cfg.n, &q, &mut rng), zeros.clone())?;
                }
                pool.push_history(b0.clone(), zeros.clone(), ScaleTag::Raw)?;
                let p = perturb(&b1, &pool, &mut rng)?;
                for i in 0..cfg.n {
                    let bar = to_f64(&p.perturbed()[i]);
                    sums[i] += bar;
                    let r = (bar - to_f64(&b1[i])).rem_euclid(cfg.q as f64);
                    r_sum += r;
                }
            }
            let exact_mean_r = (cfg.q as f64 - 1.0) / 2.0;
            let est = sums
                .iter()
                .map(|s| s / cfg.samples as f64 - exact_mean_r)
                .collect();
            Ok((est, r_sum))
        })
        .collect::<Result<_>>()?;

    let trials = cfg.trials as f64;
    let mut var_sum = 0.0;
    let mut bias_sum = 0.0;
    for i in 0..cfg.n {
        let mean = per_trial.iter().map(|(e, _)| e[i]).sum::<f64>() / trials;
        let var = per_trial.iter().map(|(e, _)| (e[i] - mean).powi(2)).sum::<f64>() / (trials - 1.0);
        var_sum += var;
        bias_sum += mean - to_f64(&b1[i]);
    }
    let total_r: f64 = per_trial.iter().map(|(_, r)| r).sum();
    let qf = cfg.q as f64;
    Ok(AttackReport {
        config: cfg.clone(),
        empirical_variance: var_sum / cfg.n as f64,
        predicted_variance: qf * qf / (12.0 * cfg.samples as f64),
        bias: bias_sum / cfg.n as f64,
        empirical_mean_r: total_r / (trials * cfg.samples as f64 * cfg.n as f64),
        exact_mean_r: (qf - 1.0) / 2.0,
    })
}

/// `log2` of the sample count that drives the estimator variance `q²/(12N)`
/// down to one, for a `q_bits`-bit modulus.
pub fn log2_samples_for_unit_variance(q_bits: u32) -> f64 {
    2.0 * q_bits as f64 - 12f64.log2()
}

#[derive(Clone, Debug)]
pub struct ComponentFit {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub bins: usize,
    pub samples: usize,
    pub components: Vec<ComponentFit>,
}

impl AuditReport {
    pub fn uniform_fraction(&self) -> f64 {
        let ok = self
            .components
            .iter()
            .filter(|c| c.p_value > AUDIT_P_THRESHOLD)
            .count();
        ok as f64 / self.components.len() as f64
    }

    pub fn passed(&self) -> bool {
        self.uniform_fraction() >= AUDIT_PASS_FRACTION
    }
}

/// Chi-square goodness of fit to uniform on `[0, q)`, per component, over
/// `bins` equal-width bins.
pub fn uniformity_audit(vectors: &[Vec<BigUint>], q: u64, bins: usize) -> Result<AuditReport> {
    if vectors.len() < MIN_AUDIT_SAMPLES {
        return Err(Error::domain(format!(
            "{} samples per component, at least {MIN_AUDIT_SAMPLES} needed",
            vectors.len()
        )));
    }
    let n = vectors[0].len();
    if n == 0 || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::domain("transcript vectors must share a nonzero length"));
    }
    let bins = bins.clamp(2, q as usize);
    let edges: Vec<u64> = (0..=bins).map(|b| (b as u128 * q as u128 / bins as u128) as u64).collect();
    let samples = vectors.len() as f64;
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let mut counts = vec![0u64; bins];
        for v in vectors {
            let x = v[i]
                .to_u64()
                .filter(|x| *x < q)
                .ok_or_else(|| Error::domain("transcript value outside [0, q)"))?;
            counts[edges.partition_point(|&e| e <= x) - 1] += 1;
        }
        let statistic: f64 = counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let expected = samples * (edges[b + 1] - edges[b]) as f64 / q as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        components.push(ComponentFit {
            statistic,
            p_value: dist.sf(statistic),
        });
    }
    Ok(AuditReport {
        bins,
        samples: vectors.len(),
        components,
    })
}

/// Cloud-visible vectors from `sessions` independent users, each running
/// `iters` perturbed iterations against the integer matrix `rows` mod `q`.
/// With `perturbed = false` the iterates go out in the clear.
pub fn protocol_transcripts(
    rows: &[Vec<i64>],
    q: u64,
    m: usize,
    sessions: usize,
    iters: usize,
    perturbed: bool,
    seed: u64,
) -> Result<Vec<Vec<BigUint>>> {
    let n = rows.len();
    let qb = BigUint::from(q);
    let qi = BigInt::from(q);
    let image = |x: &[BigUint]| -> Vec<BigUint> {
        rows.iter()
            .map(|r| {
                let s: BigInt = r.iter().zip(x).map(|(a, b)| BigInt::from(*a) * BigInt::from(b.clone())).sum();
                (((s % &qi) + &qi) % &qi).magnitude().clone()
            })
            .collect()
    };
    let mut shared = ChaCha20Rng::seed_from_u64(seed);
    let b0 = random_residues(n, &qb, &mut shared);
    let b0_image = image(&b0);
    let per_session: Vec<Vec<Vec<BigUint>>> = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let mut pool = PerturbationPool::new(qb.clone(), n, 0);
            for _ in 0..m {
                let v = random_residues(n, &qb, &mut rng);
                let img = image(&v);
                pool.add_seed(v, img)?;
            }
            pool.push_history(b0.clone(), b0_image.clone(), ScaleTag::Raw)?;
            let mut out = Vec::with_capacity(iters);
            // A fixed, far-from-uniform iterate makes any leak obvious.
            let b: Vec<BigUint> = (0..n).map(|i| BigUint::from((i as u64 + 1) % q)).collect();
            for _ in 0..iters {
                let p = if perturbed {
                    perturb(&b, &pool, &mut rng)?
                } else {
                    let zeros_a = vec![BigUint::from(0u8); pool.seeds().len()];
                    let zeros_b = vec![BigUint::from(0u8); pool.history().len()];
                    perturb_with(&b, &pool, zeros_a, zeros_b)?
                };
                out.push(p.perturbed().to_vec());
                pool.push_history(b.clone(), image(&b), ScaleTag::Fixed(0))?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_session.into_iter().flatten().collect())
}

/// Uniform random vectors, the null case for the audit.
pub fn uniform_vectors<R: RngCore + ?Sized>(count: usize, n: usize, q: u64, rng: &mut R) -> Vec<Vec<BigUint>> {
    let qb = BigUint::from(q);
    (0..count).map(|_| random_residues(n, &qb, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(samples: usize, trials: usize) -> AttackConfig {
        AttackConfig {
            n: 4,
            q: 1 << 16,
            samples,
            trials,
            m: 3,
            seed: 17,
        }
    }

    #[test]
    fn single_sample_variance_is_that_of_a_uniform_residue() {
        let r = simulate_attack(&cfg(1, 2000)).unwrap();
        assert!(r.relative_error() < 0.15, "{r:?}");
        assert!((r.empirical_mean_r - r.exact_mean_r).abs() / r.exact_mean_r < 0.05);
    }

    #[test]
    fn averaging_follows_the_variance_law() {
        let r = simulate_attack(&cfg(200, 300)).unwrap();
        assert!(r.relative_error() < 0.15, "{r:?}");
    }

    #[test]
    fn audit_separates_uniform_from_constant() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let uniform = uniform_vectors(1000, 20, 1 << 13, &mut rng);
        assert!(uniformity_audit(&uniform, 1 << 13, 16).unwrap().passed());
        let constant = vec![vec![BigUint::from(5u8); 20]; 1000];
        let rep = uniformity_audit(&constant, 1 << 13, 16).unwrap();
        assert_eq!(rep.uniform_fraction(), 0.0);
        assert!(uniformity_audit(&constant[..499], 1 << 13, 16).is_err());
    }

    #[test]
    fn uneven_bins_have_matching_expectations() {
        // q = 10 in 3 bins: widths 3, 3, 4.
        let vectors: Vec<Vec<BigUint>> = (0..1000u32).map(|i| vec![BigUint::from(i % 10)]).collect();
        let rep = uniformity_audit(&vectors, 10, 3).unwrap();
        assert!(rep.components[0].statistic < 1e-9);
    }

    #[test]
    fn extrapolation_at_128_bits() {
        let l = log2_samples_for_unit_variance(128);
        assert!((l - (256.0 - 12f64.log2())).abs() < 1e-12);
        assert!(l > 252.0 && l < 253.0);
    }
}
