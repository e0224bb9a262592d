//! Server-side homomorphic matrix-vector product as map / partition / reduce.
//!
//! Map emits `(j, prod_k E(A_jk)^{x_k})` for every row `j` of a block, which
//! decrypts to `sum_k A_jk x_k mod N`. Partition routes row `j` to a reducer,
//! and the identity reducer writes its sorted segment back unchanged. The
//! engine only ever sees the public key and treats exponents as opaque
//! naturals; it has no notion of `q` or of signed values.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modexp::{ModPowStrategy, PowCount};
use crate::paillier::{Ciphertext, PaillierPublicKey};
use crate::store::{EncryptedMatrix, EncryptedVector, DEFAULT_BLOCK_BYTES};

pub type EncryptedResultVector = EncryptedVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Partitioner {
    /// `floor(j / nr)`
    #[default]
    Floor,
    /// `j mod nr`
    Modulo,
}

impl Partitioner {
    pub fn assign(self, j: u64, num_reduces: u64) -> u64 {
        match self {
            Partitioner::Floor => partition(j, num_reduces),
            Partitioner::Modulo => j % num_reduces,
        }
    }
}

/// Reducer index for row `j`: `floor(j / nr)`.
pub fn partition(j: u64, num_reduces: u64) -> u64 {
    j / num_reduces
}

#[derive(Clone, Debug)]
pub struct MatVecJob {
    pub job_id: u64,
    pub matrix: EncryptedMatrix,
    pub exponents: Vec<BigUint>,
    pub num_reduces: u64,
    pub partitioner: Partitioner,
    pub strategy: ModPowStrategy,
    /// Rows per map block; `None` sizes blocks to 64 MB of payload.
    pub block_rows: Option<u64>,
}

impl MatVecJob {
    pub fn new(
        job_id: u64,
        matrix: EncryptedMatrix,
        exponents: Vec<BigUint>,
        num_reduces: u64,
    ) -> Result<Self> {
        let header = matrix.header();
        if exponents.len() as u64 != header.n_cols {
            return Err(Error::domain(format!(
                "exponent vector has {} entries, matrix has {} columns",
                exponents.len(),
                header.n_cols
            )));
        }
        if exponents.iter().any(|e| e >= header.codec.q()) {
            return Err(Error::domain("exponents must lie in [0, q)"));
        }
        if num_reduces == 0 {
            return Err(Error::domain("num_reduces must be at least 1"));
        }
        Ok(MatVecJob {
            job_id,
            matrix,
            exponents,
            num_reduces,
            partitioner: Partitioner::default(),
            strategy: ModPowStrategy::default(),
            block_rows: None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RowStats {
    pub exponentiations: u32,
    pub skipped_zero: u32,
    pub mont: PowCount,
}

#[derive(Clone, Debug, Default)]
pub struct JobStats {
    pub per_row: Vec<RowStats>,
    pub blocks: usize,
    pub partitions: usize,
    pub elapsed: Duration,
}

impl JobStats {
    pub fn total_exponentiations(&self) -> u64 {
        self.per_row.iter().map(|r| r.exponentiations as u64).sum()
    }

    pub fn total_mont(&self) -> PowCount {
        let mut t = PowCount::default();
        for r in &self.per_row {
            t.add(r.mont);
        }
        t
    }
}

/// Homomorphic dot product of one serialized row with the exponent vector.
pub fn map_row(
    pk: &PaillierPublicKey,
    j: u64,
    row: &[u8],
    exponents: &[BigUint],
    strategy: ModPowStrategy,
) -> Result<(u64, Ciphertext, RowStats)> {
    let width = pk.ciphertext_width();
    if row.len() != exponents.len() * width {
        return Err(Error::domain(format!(
            "row {j} holds {} bytes, exponent vector needs {}",
            row.len(),
            exponents.len() * width
        )));
    }
    let mont = pk.mont();
    let mut acc = mont.one();
    let mut stats = RowStats::default();
    for (chunk, e) in row.chunks(width).zip(exponents) {
        let c = pk.ciphertext_from_bytes(chunk)?;
        if e.is_zero() {
            stats.skipped_zero += 1;
            continue;
        }
        let (term, count) = mont.pow_mont(&mont.to_mont(c.value()), e, strategy);
        mont.mul_assign(&mut acc, &term);
        stats.exponentiations += 1;
        stats.mont.add(count);
        stats.mont.multiplications += 1;
    }
    Ok((j, Ciphertext::from_value(mont.from_mont(&acc)), stats))
}

/// Identity reducer over one partition's pairs, which must arrive sorted by row.
pub fn reduce(pairs: Vec<(u64, Ciphertext)>) -> Result<Vec<(u64, Ciphertext)>> {
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::integrity(format!("duplicate row {} in reduce input", w[0].0)));
        }
        if w[0].0 > w[1].0 {
            return Err(Error::integrity(format!(
                "reduce input not sorted: row {} before {}",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(pairs)
}

/// Runs a job on a pool of `worker_count` threads. The decrypted result does
/// not depend on the worker count, block size or partitioner.
pub fn run_job(job: &MatVecJob, worker_count: usize) -> Result<(EncryptedResultVector, JobStats)> {
    let started = Instant::now();
    let header = job.matrix.header();
    let pk = &header.public_key;
    let n_rows = header.n_rows;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count.max(1))
        .build()
        .map_err(|e| Error::protocol(format!("cannot start worker pool: {e}")))?;

    let block_rows = job
        .block_rows
        .unwrap_or_else(|| job.matrix.block_rows_for(DEFAULT_BLOCK_BYTES));
    let mut stats = JobStats {
        per_row: vec![RowStats::default(); n_rows as usize],
        ..JobStats::default()
    };
    let mut partitions: BTreeMap<u64, Vec<(u64, Ciphertext)>> = BTreeMap::new();

    for block in job.matrix.stream_blocks(block_rows)? {
        let block = block?;
        let first = block.first_row;
        let last = first + block.n_rows() as u64;
        let rows: Vec<(u64, &[u8])> = block.rows().collect();
        let mapped: Vec<(u64, Ciphertext, RowStats)> = pool
            .install(|| {
                rows.par_iter()
                    .map(|(j, bytes)| map_row(pk, *j, bytes, &job.exponents, job.strategy))
                    .collect::<Result<Vec<_>>>()
            })
            .map_err(|e| Error::protocol(format!("map over rows {first}..{last} failed: {e}")))?;
        stats.blocks += 1;
        for (j, c, s) in mapped {
            stats.per_row[j as usize] = s;
            partitions
                .entry(job.partitioner.assign(j, job.num_reduces))
                .or_default()
                .push((j, c));
        }
    }
    stats.partitions = partitions.len();

    let mut slots: Vec<Option<Ciphertext>> = vec![None; n_rows as usize];
    for (_, mut pairs) in partitions {
        pairs.sort_by_key(|(j, _)| *j);
        for (j, c) in reduce(pairs)? {
            let slot = &mut slots[j as usize];
            if slot.is_some() {
                return Err(Error::integrity(format!("row {j} emitted by two partitions")));
            }
            *slot = Some(c);
        }
    }
    let values = slots
        .into_iter()
        .enumerate()
        .map(|(j, c)| c.ok_or_else(|| Error::integrity(format!("row {j} missing from result"))))
        .collect::<Result<Vec<_>>>()?;
    stats.elapsed = started.elapsed();
    Ok((EncryptedVector::new(pk, values), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{to_residue, CodecParams};
    use crate::paillier::PaillierKeypair;
    use crate::store::{EncryptedMatrixWriter, MatrixHeader};
    use num_bigint::{BigInt, RandBigInt};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        kp: PaillierKeypair,
        matrix: EncryptedMatrix,
        plain: Vec<Vec<BigInt>>,
        _dir: tempfile::TempDir,
    }

    fn fixture(rows: usize, cols: usize, seed: u64, plain: Option<Vec<Vec<BigInt>>>) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kp = PaillierKeypair::generate(256, &mut rng).unwrap();
        let n = kp.public.n().clone();
        let codec = CodecParams::new(2, BigUint::from(1_000_003u32), n.clone()).unwrap();
        let plain = plain.unwrap_or_else(|| {
            (0..rows)
                .map(|_| (0..cols).map(|_| BigInt::from(rng.gen_range(-5000i64..=5000))).collect())
                .collect()
        });
        let dir = tempfile::tempdir().unwrap();
        let header = MatrixHeader::new(rows as u64, cols as u64, codec, kp.public.clone()).unwrap();
        let mut w = EncryptedMatrixWriter::create(dir.path().join("m.seig"), header).unwrap();
        for (j, row) in plain.iter().enumerate() {
            let residues: Vec<BigUint> = row.iter().map(|a| to_residue(a, &n).unwrap()).collect();
            w.append_row(j as u64, &kp.public.encrypt_vector(&residues, &mut rng).unwrap())
                .unwrap();
        }
        Fixture {
            kp,
            matrix: w.finalize().unwrap(),
            plain,
            _dir: dir,
        }
    }

    /// Big-integer oracle: `sum_k A_jk x_k mod N` per row.
    fn oracle(plain: &[Vec<BigInt>], x: &[BigUint], n: &BigUint) -> Vec<BigUint> {
        let n_signed = BigInt::from(n.clone());
        plain
            .iter()
            .map(|row| {
                let s: BigInt = row.iter().zip(x).map(|(a, b)| a * BigInt::from(b.clone())).sum();
                (((s % &n_signed) + &n_signed) % &n_signed).to_biguint().unwrap()
            })
            .collect()
    }

    fn decrypt_all(kp: &PaillierKeypair, v: &EncryptedVector) -> Vec<BigUint> {
        kp.private.decrypt_vector(&v.values).unwrap()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition(5, 2), 2);
        assert_eq!(partition(0, 7), 0);
        assert_eq!(partition(13, 1), 13);
        assert_eq!(Partitioner::Modulo.assign(5, 2), 1);
    }

    #[test]
    fn identity_matrix_selects_exponents() {
        let plain = vec![
            vec![BigInt::from(100), BigInt::from(0)],
            vec![BigInt::from(0), BigInt::from(100)],
        ];
        let f = fixture(2, 2, 1, Some(plain));
        let x = vec![BigUint::from(300u32), BigUint::from(400u32)];
        let job = MatVecJob::new(1, f.matrix.clone(), x, 1).unwrap();
        let (out, stats) = run_job(&job, 2).unwrap();
        let dec = decrypt_all(&f.kp, &out);
        assert_eq!(dec, vec![BigUint::from(30000u32), BigUint::from(40000u32)]);
        assert_eq!(stats.total_exponentiations(), 4);
    }

    #[test]
    fn zero_exponents_annihilate_and_are_skipped() {
        let f = fixture(3, 4, 2, None);
        let job = MatVecJob::new(1, f.matrix.clone(), vec![BigUint::zero(); 4], 2).unwrap();
        let (out, stats) = run_job(&job, 1).unwrap();
        assert!(decrypt_all(&f.kp, &out).iter().all(|v| v.is_zero()));
        assert_eq!(stats.total_exponentiations(), 0);
        assert!(stats.per_row.iter().all(|r| r.skipped_zero == 4));
    }

    #[test]
    fn random_matrix_matches_bigint_oracle() {
        let f = fixture(5, 5, 3, None);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let q = f.matrix.header().codec.q().clone();
        let x: Vec<BigUint> = (0..5).map(|_| rng.gen_biguint_below(&q)).collect();
        let job = MatVecJob::new(1, f.matrix.clone(), x.clone(), 3).unwrap();
        let (out, _) = run_job(&job, 3).unwrap();
        assert_eq!(decrypt_all(&f.kp, &out), oracle(&f.plain, &x, f.kp.public.n()));
    }

    #[test]
    fn result_is_independent_of_scheduling() {
        let f = fixture(23, 6, 4, None);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let q = f.matrix.header().codec.q().clone();
        let x: Vec<BigUint> = (0..6).map(|_| rng.gen_biguint_below(&q)).collect();
        let want = oracle(&f.plain, &x, f.kp.public.n());
        for (workers, block_rows, nr, part) in [
            (1, None, 1, Partitioner::Floor),
            (4, Some(5), 3, Partitioner::Floor),
            (8, Some(1), 4, Partitioner::Modulo),
            (2, Some(100), 23, Partitioner::Modulo),
        ] {
            let mut job = MatVecJob::new(1, f.matrix.clone(), x.clone(), nr).unwrap();
            job.block_rows = block_rows;
            job.partitioner = part;
            let (out, _) = run_job(&job, workers).unwrap();
            assert_eq!(decrypt_all(&f.kp, &out), want);
        }
    }

    #[test]
    fn strategies_agree() {
        let f = fixture(4, 4, 5, None);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let q = f.matrix.header().codec.q().clone();
        let x: Vec<BigUint> = (0..4).map(|_| rng.gen_biguint_below(&q)).collect();
        let mut job = MatVecJob::new(1, f.matrix.clone(), x, 1).unwrap();
        let (a, sa) = run_job(&job, 1).unwrap();
        job.strategy = ModPowStrategy::SquareAndMultiply;
        let (b, sb) = run_job(&job, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(sa.total_mont(), sb.total_mont());
    }

    #[test]
    fn job_preconditions() {
        let f = fixture(2, 3, 6, None);
        assert!(MatVecJob::new(1, f.matrix.clone(), vec![], 1).is_err());
        assert!(MatVecJob::new(1, f.matrix.clone(), vec![BigUint::zero(); 3], 0).is_err());
        let q = f.matrix.header().codec.q().clone();
        assert!(MatVecJob::new(1, f.matrix.clone(), vec![q, BigUint::zero(), BigUint::zero()], 1).is_err());
    }

    #[test]
    fn reducer_passes_through_and_rejects_duplicates() {
        let c = |v: u32| Ciphertext::from_value(BigUint::from(v));
        let pairs = vec![(0, c(5)), (1, c(6)), (4, c(7))];
        assert_eq!(reduce(pairs.clone()).unwrap(), pairs);
        assert!(matches!(reduce(vec![(2, c(1)), (2, c(1))]), Err(Error::Integrity(_))));
        assert!(reduce(vec![(3, c(1)), (2, c(1))]).is_err());
    }

    #[test]
    fn map_row_rejects_malformed_rows() {
        let f = fixture(1, 2, 7, None);
        let pk = &f.kp.public;
        let x = vec![BigUint::from(1u32); 2];
        let row = f.matrix.row_bytes(0).unwrap();
        assert!(map_row(pk, 0, &row[1..], &x, ModPowStrategy::default()).is_err());
        let garbage = vec![0xffu8; row.len()];
        assert!(map_row(pk, 0, &garbage, &x, ModPowStrategy::default()).is_err());
    }
}
