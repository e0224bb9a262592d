//! Client-side roles: the data owner, the row collectors and the authorized
//! user who blinds each iteration vector before it reaches the cloud.
//!
//! All blinding arithmetic is modulo the prime `q`. The cloud computes
//! `Ã x` with `Ã` the `d`-digit encoding of `A`; the user knows `Ã s` for
//! every vector `s` already in the pool and so can strip
//! `r = Σ α_l s_l + Σ β_j b_j` from `Ã (b + r)`.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{Signed, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::codec::{self, centered_lift, decode, dot_bound, encode_vector, CodecParams};
use crate::eigen::{self, EigenResult, MatVecBackend};
use crate::error::{Error, Result};
use crate::matrix::{normalized, DenseMatrix};
use crate::paillier::{Ciphertext, PaillierKeypair, PaillierPrivateKey, PaillierPublicKey};
use crate::service::{ServiceClient, Transport};
use crate::store::{EncryptedVector, MatrixHeader};

#[derive(Clone, Debug)]
pub struct SetupParams {
    pub n: usize,
    pub key_bits: u32,
    pub decimal_digits: u8,
    pub q_bits: u32,
    /// Bound on `|A_ij|` used for the capacity check.
    pub value_bound: f64,
}

impl SetupParams {
    pub fn new(n: usize, key_bits: u32) -> Self {
        SetupParams {
            n,
            key_bits,
            decimal_digits: codec::DEFAULT_DECIMAL_DIGITS,
            q_bits: codec::DEFAULT_Q_BITS,
            value_bound: 1.0,
        }
    }
}

/// What the owner hands to collectors.
#[derive(Clone, Debug)]
pub struct PublicArtifacts {
    pub public_key: PaillierPublicKey,
    pub codec: CodecParams,
    pub encrypted_b0: EncryptedVector,
}

pub struct OwnerState {
    keypair: PaillierKeypair,
    codec: CodecParams,
    value_bound: f64,
    b0: Vec<BigUint>,
    encrypted_b0: Vec<Ciphertext>,
    ab0: Option<Vec<BigInt>>,
}

/// Generates the keypair, selects `q` and draws `b0` uniformly from `Z_q^n`.
pub fn owner_setup<R: RngCore + ?Sized>(params: &SetupParams, rng: &mut R) -> Result<OwnerState> {
    if params.n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let keypair = PaillierKeypair::generate(params.key_bits, rng)?;
    let codec = CodecParams::select(
        params.n,
        params.decimal_digits,
        params.q_bits,
        params.value_bound,
        1.0,
        keypair.public.n(),
    )?;
    OwnerState::with_keypair(keypair, codec, params.n, params.value_bound, rng)
}

impl OwnerState {
    pub fn with_keypair<R: RngCore + ?Sized>(
        keypair: PaillierKeypair,
        codec: CodecParams,
        n: usize,
        value_bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        codec.check_capacity(n, value_bound, 1.0)?;
        let b0: Vec<BigUint> = (0..n).map(|_| rng.gen_biguint_below(codec.q())).collect();
        let encrypted_b0 = keypair.public.encrypt_vector(&b0, rng)?;
        Ok(OwnerState {
            keypair,
            codec,
            value_bound,
            b0,
            encrypted_b0,
            ab0: None,
        })
    }

    pub fn keypair(&self) -> &PaillierKeypair {
        &self.keypair
    }

    pub fn codec(&self) -> &CodecParams {
        &self.codec
    }

    pub fn b0(&self) -> &[BigUint] {
        &self.b0
    }

    pub fn n(&self) -> usize {
        self.b0.len()
    }

    pub fn artifacts(&self) -> PublicArtifacts {
        PublicArtifacts {
            public_key: self.keypair.public.clone(),
            codec: self.codec.clone(),
            encrypted_b0: EncryptedVector::new(&self.keypair.public, self.encrypted_b0.clone()),
        }
    }

    pub fn matrix_header(&self) -> Result<MatrixHeader> {
        let n = self.n() as u64;
        MatrixHeader::new(n, n, self.codec.clone(), self.keypair.public.clone())
    }

    /// Decrypts the collectors' `E(A_i b0)` into the signed integers `Ã b0`.
    pub fn owner_collect(&mut self, pieces: &[Option<Ciphertext>]) -> Result<&[BigInt]> {
        if pieces.len() != self.n() {
            return Err(Error::domain(format!(
                "{} pieces for {} rows",
                pieces.len(),
                self.n()
            )));
        }
        let missing: Vec<String> = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .map(|(i, _)| i.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::integrity(format!(
                "missing collector results for rows {{{}}}",
                missing.join(", ")
            )));
        }
        let cts: Vec<Ciphertext> = pieces.iter().flatten().cloned().collect();
        let n_mod = self.keypair.public.n().clone();
        let plain = self.keypair.private.decrypt_vector(&cts)?;
        self.ab0 = Some(plain.iter().map(|m| centered_lift(m, &n_mod)).collect());
        Ok(self.ab0.as_deref().unwrap_or_default())
    }

    pub fn ab0(&self) -> Option<&[BigInt]> {
        self.ab0.as_deref()
    }

    /// Everything the authorized user needs, including the secret key.
    pub fn grant(&self) -> Result<UserGrant> {
        let ab0 = self
            .ab0
            .clone()
            .ok_or_else(|| Error::protocol("A b0 has not been collected yet"))?;
        Ok(UserGrant {
            private_key: self.keypair.private.clone(),
            codec: self.codec.clone(),
            value_bound: self.value_bound,
            b0: self.b0.clone(),
            ab0,
        })
    }
}

/// Secret material passed from the owner to the user out of band.
#[derive(Clone, Debug)]
pub struct UserGrant {
    pub private_key: PaillierPrivateKey,
    pub codec: CodecParams,
    pub value_bound: f64,
    pub b0: Vec<BigUint>,
    /// `Ã b0` as exact integers.
    pub ab0: Vec<BigInt>,
}

impl UserGrant {
    pub fn n(&self) -> usize {
        self.b0.len()
    }

    /// `b1 = A b0 / ‖A b0‖`, the common start vector.
    pub fn start_vector(&self) -> Result<Vec<f64>> {
        let d = self.codec.decimal_digits() as u32;
        let reals: Vec<f64> = self.ab0.iter().map(|v| decode(v, d)).collect();
        normalized(&reals).ok_or(Error::Breakdown { dimension: 0 })
    }
}

pub struct CollectorSubmission {
    pub encrypted_row: Vec<Ciphertext>,
    /// `E(a · b0)`.
    pub encrypted_dot: Ciphertext,
}

/// Encodes a row at `d` digits and maps it into `Z_N`.
pub fn encode_row(row: &[f64], codec: &CodecParams) -> Result<Vec<BigUint>> {
    let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        codec.check_capacity(row.len(), max, 1.0)?;
    }
    encode_vector(row, codec.decimal_digits(), codec.plaintext_n())
}

pub fn encrypt_row<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    codec: &CodecParams,
    row: &[f64],
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    pk.encrypt_vector(&encode_row(row, codec)?, rng)
}

/// One collector's contribution: its encrypted row and `E(a · b0)`, the
/// latter folded homomorphically from `E(b0)` without seeing `b0`.
pub fn collector_submit<R: RngCore + ?Sized>(
    pk: &PaillierPublicKey,
    codec: &CodecParams,
    encrypted_b0: &[Ciphertext],
    row: &[f64],
    rng: &mut R,
) -> Result<CollectorSubmission> {
    if row.len() != encrypted_b0.len() {
        return Err(Error::domain(format!(
            "row of length {} against E(b0) of length {}",
            row.len(),
            encrypted_b0.len()
        )));
    }
    let encoded = encode_row(row, codec)?;
    let terms = encrypted_b0
        .par_iter()
        .zip(encoded.par_iter())
        .filter(|(_, a)| !a.is_zero())
        .map(|(c, a)| pk.scalar_mul(c, a))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = pk.zero_ciphertext();
    for t in &terms {
        acc = pk.hom_add(&acc, t)?;
    }
    Ok(CollectorSubmission {
        encrypted_row: pk.encrypt_vector(&encoded, rng)?,
        encrypted_dot: acc,
    })
}

/// The fixed-point scale a pool vector was encoded at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleTag {
    /// A raw element of `Z_q^n` (seeds and `b0`).
    Raw,
    Fixed(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub vector: Vec<BigUint>,
    /// `Ã · vector mod q`.
    pub image: Vec<BigUint>,
    pub tag: ScaleTag,
}

/// Seeds and iteration history with their images, all modulo `q`.
#[derive(Clone, Debug)]
pub struct PerturbationPool {
    q: BigUint,
    n: usize,
    scale: u8,
    seeds: Vec<PoolEntry>,
    history: Vec<PoolEntry>,
}

impl PerturbationPool {
    /// A pool whose iteration vectors are encoded at `scale` digits.
    pub fn new(q: BigUint, n: usize, scale: u8) -> Self {
        PerturbationPool {
            q,
            n,
            scale,
            seeds: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seeds(&self) -> &[PoolEntry] {
        &self.seeds
    }

    pub fn history(&self) -> &[PoolEntry] {
        &self.history
    }

    fn check_entry(&self, vector: &[BigUint], image: &[BigUint]) -> Result<()> {
        if vector.len() != self.n || image.len() != self.n {
            return Err(Error::domain(format!(
                "pool entry lengths {}/{} for n = {}",
                vector.len(),
                image.len(),
                self.n
            )));
        }
        if vector.iter().chain(image).any(|v| v >= &self.q) {
            return Err(Error::domain("pool entries must be reduced mod q"));
        }
        Ok(())
    }

    pub fn add_seed(&mut self, vector: Vec<BigUint>, image: Vec<BigUint>) -> Result<()> {
        self.check_entry(&vector, &image)?;
        self.seeds.push(PoolEntry {
            vector,
            image,
            tag: ScaleTag::Raw,
        });
        Ok(())
    }

    /// Appends `(b_j, Ã b_j mod q)`. Only the first entry may be raw; later
    /// ones must carry the pool's iteration scale.
    pub fn push_history(&mut self, vector: Vec<BigUint>, image: Vec<BigUint>, tag: ScaleTag) -> Result<()> {
        self.check_entry(&vector, &image)?;
        let expected = if self.history.is_empty() {
            ScaleTag::Raw
        } else {
            ScaleTag::Fixed(self.scale)
        };
        if tag != expected {
            return Err(Error::domain(format!(
                "history entry {} tagged {tag:?}, expected {expected:?}",
                self.history.len()
            )));
        }
        self.history.push(PoolEntry { vector, image, tag });
        Ok(())
    }

    /// `(Σ α_l s_l + Σ β_j b_j, Σ α_l Ã s_l + Σ β_j Ã b_j)`, both mod `q`.
    pub fn combination(&self, alphas: &[BigUint], betas: &[BigUint]) -> Result<(Vec<BigUint>, Vec<BigUint>)> {
        if alphas.len() != self.seeds.len() || betas.len() != self.history.len() {
            return Err(Error::domain(format!(
                "{} alphas and {} betas for {} seeds and {} history entries",
                alphas.len(),
                betas.len(),
                self.seeds.len(),
                self.history.len()
            )));
        }
        let mut r = vec![BigUint::zero(); self.n];
        let mut ar = vec![BigUint::zero(); self.n];
        let pairs = self.seeds.iter().zip(alphas).chain(self.history.iter().zip(betas));
        for (entry, c) in pairs {
            if c.is_zero() {
                continue;
            }
            for i in 0..self.n {
                r[i] += c * &entry.vector[i];
                ar[i] += c * &entry.image[i];
            }
        }
        for v in r.iter_mut().chain(ar.iter_mut()) {
            *v %= &self.q;
        }
        Ok((r, ar))
    }
}

/// `x -> Ã x mod q` as seen from the user, whatever carries it out.
pub trait BlindMatVec {
    fn dim(&self) -> usize;
    fn blind_matvec(&mut self, x: &[BigUint]) -> Result<Vec<BigUint>>;
}

/// Seeds `m` random vectors and installs `(b0, Ã b0)` as history entry 0.
pub fn user_prepare_pool<C: BlindMatVec + ?Sized, R: RngCore + ?Sized>(
    m: usize,
    cloud: &mut C,
    grant: &UserGrant,
    rng: &mut R,
) -> Result<PerturbationPool> {
    if m == 0 {
        return Err(Error::domain("the pool needs at least one seed"));
    }
    let n = grant.n();
    if cloud.dim() != n {
        return Err(Error::domain(format!(
            "cloud matrix has dimension {}, grant has {n}",
            cloud.dim()
        )));
    }
    let q = grant.codec.q().clone();
    let mut pool = PerturbationPool::new(q.clone(), n, grant.codec.decimal_digits());
    for _ in 0..m {
        let s: Vec<BigUint> = (0..n).map(|_| rng.gen_biguint_below(&q)).collect();
        let image = cloud.blind_matvec(&s)?;
        pool.add_seed(s, image)?;
    }
    let ab0 = grant.ab0.iter().map(|v| mod_q(v, &q)).collect();
    pool.push_history(grant.b0.clone(), ab0, ScaleTag::Raw)?;
    Ok(pool)
}

fn mod_q(v: &BigInt, q: &BigUint) -> BigUint {
    let qi = BigInt::from(q.clone());
    let r = ((v % &qi) + &qi) % &qi;
    r.magnitude().clone()
}

/// A blinded vector and the coefficients that produced it. The
/// coefficients stay on the client.
#[derive(Clone, Debug)]
pub struct Perturbation {
    original: Vec<BigUint>,
    perturbed: Vec<BigUint>,
    alphas: Vec<BigUint>,
    betas: Vec<BigUint>,
}

impl Perturbation {
    pub fn original(&self) -> &[BigUint] {
        &self.original
    }

    /// `b̄ = b + r mod q`, the only part sent to the cloud.
    pub fn perturbed(&self) -> &[BigUint] {
        &self.perturbed
    }

    pub fn alphas(&self) -> &[BigUint] {
        &self.alphas
    }

    pub fn betas(&self) -> &[BigUint] {
        &self.betas
    }
}

/// Blinds `b` with coefficients drawn uniformly from `Z_q`.
pub fn perturb<R: RngCore + ?Sized>(b: &[BigUint], pool: &PerturbationPool, rng: &mut R) -> Result<Perturbation> {
    let q = pool.q();
    let alphas = (0..pool.seeds().len()).map(|_| rng.gen_biguint_below(q)).collect();
    let betas = (0..pool.history().len()).map(|_| rng.gen_biguint_below(q)).collect();
    perturb_with(b, pool, alphas, betas)
}

/// Blinds `b` with caller-chosen coefficients.
pub fn perturb_with(
    b: &[BigUint],
    pool: &PerturbationPool,
    alphas: Vec<BigUint>,
    betas: Vec<BigUint>,
) -> Result<Perturbation> {
    if pool.seeds().is_empty() {
        return Err(Error::domain("perturbation pool has no seeds"));
    }
    if b.len() != pool.n() || b.iter().any(|v| v >= pool.q()) {
        return Err(Error::domain("vector must have n residues below q"));
    }
    let (r, _) = pool.combination(&alphas, &betas)?;
    let perturbed = b
        .iter()
        .zip(&r)
        .map(|(x, y)| (x + y) % pool.q())
        .collect();
    Ok(Perturbation {
        original: b.to_vec(),
        perturbed,
        alphas,
        betas,
    })
}

/// Lifts decrypted values modulo `N` to integers, then reduces them mod `q`.
pub fn reduce_decrypted(values: &[BigUint], n_mod: &BigUint, q: &BigUint) -> Vec<BigUint> {
    values.iter().map(|v| mod_q(&centered_lift(v, n_mod), q)).collect()
}

/// Strips the blinding from `Ã b̄ mod q` and records `(b, Ã b)` in the pool.
/// Any lifted value above `bound` means `q` was too small and is an error.
pub fn recover(
    ab_bar: &[BigUint],
    pert: &Perturbation,
    pool: &mut PerturbationPool,
    bound: &BigUint,
) -> Result<Vec<BigInt>> {
    let q = pool.q().clone();
    if ab_bar.len() != pool.n() {
        return Err(Error::domain(format!(
            "cloud returned {} values for n = {}",
            ab_bar.len(),
            pool.n()
        )));
    }
    if bound * 2u32 >= q {
        return Err(Error::Capacity {
            required_q_bits: codec::required_q_bits(bound),
            detail: format!("q ({} bits) cannot hold values up to {bound}", q.bits()),
        });
    }
    let (_, ar) = pool.combination(&pert.alphas, &pert.betas)?;
    let mut out = Vec::with_capacity(ab_bar.len());
    let mut image = Vec::with_capacity(ab_bar.len());
    for (i, (x, y)) in ab_bar.iter().zip(&ar).enumerate() {
        let t = ((x % &q) + &q - y) % &q;
        let v = centered_lift(&t, &q);
        if v.magnitude() > bound {
            return Err(Error::Capacity {
                required_q_bits: codec::required_q_bits(v.magnitude()),
                detail: format!("component {i} lifted to {v}, beyond the bound {bound}"),
            });
        }
        out.push(v);
        image.push(t);
    }
    pool.push_history(pert.original.clone(), image, ScaleTag::Fixed(pool.scale))?;
    Ok(out)
}

/// Decodes `A b` at `scale` digits, normalizes it and re-encodes at `d`.
pub fn next_vector(ab: &[BigInt], scale: u32, d: u8, q: &BigUint) -> Result<(Vec<f64>, Vec<BigUint>)> {
    let reals: Vec<f64> = ab.iter().map(|v| decode(v, scale)).collect();
    let unit = normalized(&reals).ok_or(Error::Breakdown { dimension: 0 })?;
    let enc = encode_vector(&unit, d, q)?;
    Ok((unit, enc))
}

/// The cloud reached over the service protocol; decrypts with the user's key.
pub struct RemoteCloud<T> {
    client: ServiceClient<T>,
    matrix_id: u64,
    private_key: PaillierPrivateKey,
    codec: CodecParams,
    n: usize,
    pub num_reduces: u32,
}

impl<T: Transport> RemoteCloud<T> {
    pub fn new(
        client: ServiceClient<T>,
        matrix_id: u64,
        private_key: PaillierPrivateKey,
        codec: CodecParams,
        n: usize,
    ) -> Self {
        RemoteCloud {
            client,
            matrix_id,
            private_key,
            codec,
            n,
            num_reduces: 1,
        }
    }

    pub fn client(&self) -> &ServiceClient<T> {
        &self.client
    }

    pub fn into_client(self) -> ServiceClient<T> {
        self.client
    }
}

impl<T: Transport> BlindMatVec for RemoteCloud<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn blind_matvec(&mut self, x: &[BigUint]) -> Result<Vec<BigUint>> {
        let width = self.codec.q_width();
        let result = self.client.matvec(self.matrix_id, x, width, self.num_reduces)?;
        let pk = self.private_key.public_key();
        result.validate(pk)?;
        if result.len() != self.n {
            return Err(Error::protocol(format!(
                "result has {} entries, expected {}",
                result.len(),
                self.n
            )));
        }
        let plain = self.private_key.decrypt_vector(&result.values)?;
        Ok(reduce_decrypted(&plain, pk.n(), self.codec.q()))
    }
}

/// `Ã x mod q` computed in the clear; keeps every vector it was sent.
#[derive(Clone, Debug)]
pub struct PlainModCloud {
    rows: Vec<Vec<BigInt>>,
    q: BigUint,
    pub received: Vec<Vec<BigUint>>,
}

impl PlainModCloud {
    pub fn new(matrix: &DenseMatrix, d: u8, q: BigUint) -> Result<Self> {
        let rows = matrix
            .rows()
            .map(|r| r.iter().map(|&x| codec::encode(x, d)).collect())
            .collect::<Result<Vec<_>>>()?;
        Ok(PlainModCloud {
            rows,
            q,
            received: Vec::new(),
        })
    }

    pub fn encoded_rows(&self) -> &[Vec<BigInt>] {
        &self.rows
    }

    /// The exact integer product `Ã x`.
    pub fn exact(&self, x: &[BigInt]) -> Vec<BigInt> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl BlindMatVec for PlainModCloud {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn blind_matvec(&mut self, x: &[BigUint]) -> Result<Vec<BigUint>> {
        if x.len() != self.rows.len() {
            return Err(Error::domain("vector length does not match matrix"));
        }
        self.received.push(x.to_vec());
        let xi: Vec<BigInt> = x.iter().map(|v| BigInt::from(v.clone())).collect();
        Ok(self.exact(&xi).iter().map(|v| mod_q(v, &self.q)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CallKind {
    Seed,
    Iteration,
    Residual,
}

/// One vector the cloud received.
#[derive(Clone, Debug)]
pub struct TranscriptEntry {
    pub kind: CallKind,
    pub sent: Vec<BigUint>,
}

/// A [`MatVecBackend`] that routes every product through perturb, the
/// cloud, and recover.
pub struct SecureSession<C, R> {
    cloud: C,
    pool: PerturbationPool,
    codec: CodecParams,
    value_bound: f64,
    start: Vec<f64>,
    rng: R,
    transcript: Vec<TranscriptEntry>,
}

impl<C: BlindMatVec, R: RngCore> SecureSession<C, R> {
    pub fn new(mut cloud: C, grant: &UserGrant, m: usize, mut rng: R) -> Result<Self> {
        let pool = user_prepare_pool(m, &mut cloud, grant, &mut rng)?;
        let transcript = pool
            .seeds()
            .iter()
            .map(|s| TranscriptEntry {
                kind: CallKind::Seed,
                sent: s.vector.clone(),
            })
            .collect();
        Ok(SecureSession {
            cloud,
            pool,
            codec: grant.codec.clone(),
            value_bound: grant.value_bound,
            start: grant.start_vector()?,
            rng,
            transcript,
        })
    }

    pub fn start_vector(&self) -> &[f64] {
        &self.start
    }

    pub fn pool(&self) -> &PerturbationPool {
        &self.pool
    }

    pub fn cloud(&self) -> &C {
        &self.cloud
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn into_cloud(self) -> C {
        self.cloud
    }

    /// `Ã b` for an encoded `b`, as exact integers.
    pub fn secure_matvec(&mut self, b: &[BigUint], bound: &BigUint) -> Result<Vec<BigInt>> {
        let pert = perturb(b, &self.pool, &mut self.rng)?;
        let y = self.cloud.blind_matvec(pert.perturbed())?;
        self.transcript.push(TranscriptEntry {
            kind: CallKind::Iteration,
            sent: pert.perturbed().to_vec(),
        });
        recover(&y, &pert, &mut self.pool, bound)
    }
}

impl<C: BlindMatVec, R: RngCore> MatVecBackend for SecureSession<C, R> {
    fn dim(&self) -> usize {
        self.pool.n()
    }

    fn apply(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let call = self.transcript.len();
        let d = self.codec.decimal_digits();
        let max_b = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = dot_bound(x.len(), d, self.value_bound, max_b.max(f64::MIN_POSITIVE));
        let b = encode_vector(x, d, self.codec.q())?;
        let ab = self.secure_matvec(&b, &bound).map_err(|e| match e {
            Error::Protocol(msg) => Error::Protocol(format!("cloud call {call}: {msg}")),
            Error::Io(io) => Error::Protocol(format!("cloud call {call}: {io}")),
            other => other,
        })?;
        Ok(ab.iter().map(|v| decode(v, 2 * d as u32)).collect())
    }
}

#[derive(Clone, Debug)]
pub struct SecureOutcome {
    pub result: EigenResult,
    pub seed_calls: usize,
    pub iteration_calls: usize,
    pub residual_calls: usize,
}

/// Runs the plaintext driver with the secure session as backend, starting
/// from the shared `b1`.
pub fn secure_topk<C: BlindMatVec, R: RngCore>(
    session: &mut SecureSession<C, R>,
    k: usize,
    iters: usize,
    tol: f64,
) -> Result<SecureOutcome> {
    let before = session.transcript.len();
    let start = session.start.clone();
    let result = eigen::topk(session, &start, k, iters, tol)?;
    let seed_calls = session.pool.seeds().len();
    for (i, e) in session.transcript[before..].iter_mut().enumerate() {
        e.kind = if i < result.iterations {
            CallKind::Iteration
        } else {
            CallKind::Residual
        };
    }
    let total = session.transcript.len() - before;
    Ok(SecureOutcome {
        seed_calls,
        iteration_calls: result.iterations,
        residual_calls: total - result.iterations,
        result,
    })
}

/// Uploads a complete encrypted matrix, one frame per row.
pub fn upload_matrix<T: Transport>(
    client: &mut ServiceClient<T>,
    matrix_id: u64,
    header: &MatrixHeader,
    rows: impl IntoIterator<Item = Result<Vec<Ciphertext>>>,
) -> Result<()> {
    client.put_matrix_meta(matrix_id, header)?;
    let width = header.ciphertext_width();
    for (j, row) in rows.into_iter().enumerate() {
        client.put_row(matrix_id, j as u64, &row?, width)?;
    }
    Ok(())
}

/// Draws a fresh seed for components in `[0, q)`; used by harnesses that
/// need a pool without a cloud.
pub fn random_residues<R: Rng + ?Sized>(n: usize, q: &BigUint, rng: &mut R) -> Vec<BigUint> {
    (0..n).map(|_| rng.gen_biguint_below(q)).collect()
}
