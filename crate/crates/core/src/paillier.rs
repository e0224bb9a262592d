//! Paillier cryptosystem with `g = N + 1`.
//!
//! Ciphertexts live in `Z_{N^2}`; multiplying two ciphertexts adds their
//! plaintexts and raising a ciphertext to `k` multiplies its plaintext by `k`.
//! A ciphertext always serializes to exactly `ceil(2 * key_bits / 8)` bytes,
//! which is 256 bytes for a 1024-bit key.

use std::fmt;
use std::sync::Arc;

use log::warn;
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modexp::{ModPowStrategy, Montgomery};
use crate::primes::random_prime;
use crate::wire::{self, Reader};

/// Keys below this length only serve tests and desk-scale experiments.
pub const MIN_SECURE_KEY_BITS: u32 = 1024;
pub const MIN_KEY_BITS: u32 = 16;

const PRIME_ATTEMPTS: usize = 100_000;
const KEYGEN_RETRIES: usize = 64;
const KEY_FILE_VERSION: u16 = 1;

#[derive(Clone)]
pub struct PaillierPublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
    key_bits: u32,
    ctx: Arc<Montgomery>,
}

impl PartialEq for PaillierPublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Eq for PaillierPublicKey {}

impl fmt::Debug for PaillierPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaillierPublicKey")
            .field("key_bits", &self.key_bits)
            .field("n", &self.n)
            .finish()
    }
}

impl PaillierPublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n < BigUint::from(15u32) || n.is_even() {
            return Err(Error::domain("Paillier modulus must be an odd composite"));
        }
        let n_squared = &n * &n;
        let ctx = Montgomery::new(&n_squared)
            .ok_or_else(|| Error::domain("modulus squared is not odd"))?;
        Ok(PaillierPublicKey {
            g: &n + 1u32,
            key_bits: n.bits() as u32,
            n,
            n_squared,
            ctx: Arc::new(ctx),
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    /// Montgomery context modulo `N^2`.
    pub fn mont(&self) -> &Montgomery {
        &self.ctx
    }

    /// Serialized ciphertext width in bytes.
    pub fn ciphertext_width(&self) -> usize {
        ciphertext_width(self.key_bits)
    }

    pub fn is_weak(&self) -> bool {
        self.key_bits < MIN_SECURE_KEY_BITS
    }

    /// Uniform blinding factor in `[1, N)` coprime to `N`.
    pub fn random_blinding<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.random_blinding(rng);
        self.encrypt_with_blinding(m, &r)
    }

    /// `(1 + m N) * r^N mod N^2`, equal to `g^m r^N` for `g = N + 1`.
    pub fn encrypt_with_blinding(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if m >= &self.n {
            return Err(Error::domain("plaintext must lie in [0, N)"));
        }
        if r.is_zero() || r >= &self.n {
            return Err(Error::domain("blinding factor must lie in [1, N)"));
        }
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = self.ctx.pow(r, &self.n, ModPowStrategy::default());
        Ok(Ciphertext((gm * rn) % &self.n_squared))
    }

    /// Encrypts element-wise. Blinding factors are drawn sequentially from
    /// `rng`, so the output is reproducible for a seeded generator, and the
    /// exponentiations then run in parallel.
    pub fn encrypt_vector<R: RngCore + ?Sized>(
        &self,
        ms: &[BigUint],
        rng: &mut R,
    ) -> Result<Vec<Ciphertext>> {
        let blindings: Vec<BigUint> = ms.iter().map(|_| self.random_blinding(rng)).collect();
        ms.par_iter()
            .zip(blindings.par_iter())
            .map(|(m, r)| self.encrypt_with_blinding(m, r))
            .collect()
    }

    /// Homomorphic addition: the product of the ciphertexts modulo `N^2`.
    pub fn hom_add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext> {
        self.check(c1)?;
        self.check(c2)?;
        Ok(Ciphertext((&c1.0 * &c2.0) % &self.n_squared))
    }

    /// Homomorphic plaintext-scalar multiplication: `c^k mod N^2`.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        self.check(c)?;
        Ok(Ciphertext(self.ctx.pow(&c.0, k, ModPowStrategy::default())))
    }

    /// Encryption of zero with blinding factor one; the identity for [`hom_add`](Self::hom_add).
    pub fn zero_ciphertext(&self) -> Ciphertext {
        Ciphertext(BigUint::one())
    }

    fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.0 >= self.n_squared {
            return Err(Error::domain("ciphertext must lie in [0, N^2)"));
        }
        Ok(())
    }

    pub fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<Ciphertext> {
        if bytes.len() != self.ciphertext_width() {
            return Err(Error::format(format!(
                "ciphertext is {} bytes, expected {}",
                bytes.len(),
                self.ciphertext_width()
            )));
        }
        let c = Ciphertext(BigUint::from_bytes_be(bytes));
        self.check(&c).map_err(|_| Error::format("ciphertext value exceeds N^2"))?;
        Ok(c)
    }

    /// `PKEY` file: magic, u16 version, u32 key_bits, u32-prefixed N.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"PKEY");
        out.extend_from_slice(&KEY_FILE_VERSION.to_be_bytes());
        out.extend_from_slice(&self.key_bits.to_be_bytes());
        wire::put_prefixed(&mut out, &self.n);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let pk = Self::read(&mut r)?;
        r.finish()?;
        Ok(pk)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        r.magic(b"PKEY")?;
        let version = r.u16()?;
        if version != KEY_FILE_VERSION {
            return Err(Error::format(format!("unsupported PKEY version {version}")));
        }
        let key_bits = r.u32()?;
        let n = r.prefixed_biguint()?;
        let pk = Self::from_modulus(n)?;
        if pk.key_bits != key_bits {
            return Err(Error::format("PKEY key_bits does not match modulus length"));
        }
        Ok(pk)
    }
}

pub fn ciphertext_width(key_bits: u32) -> usize {
    (2 * key_bits as usize).div_ceil(8)
}

/// Per-prime constants for CRT decryption and key-holder encryption.
#[derive(Clone)]
struct PrimeHalf {
    prime: BigUint,
    square: BigUint,
    ctx: Arc<Montgomery>,
    /// `L_p(g^(p-1) mod p^2)^{-1} mod p`
    h: BigUint,
    /// `N mod p(p-1)`, the blinding exponent reduced by `φ(p^2)`.
    blind_exp: BigUint,
}

impl PrimeHalf {
    fn new(prime: &BigUint, n: &BigUint) -> Result<Self> {
        let square = prime * prime;
        let ctx = Montgomery::new(&square)
            .ok_or_else(|| Error::KeyGeneration("primes must be odd".into()))?;
        let pm1 = prime - 1u32;
        let g = n + 1u32;
        let u = ctx.pow(&g, &pm1, ModPowStrategy::default());
        let h = ((u - 1u32) / prime)
            .modinv(prime)
            .ok_or_else(|| Error::KeyGeneration("L_p(g^(p-1)) is not invertible".into()))?;
        Ok(PrimeHalf {
            blind_exp: n % (prime * &pm1),
            prime: prime.clone(),
            square,
            ctx: Arc::new(ctx),
            h,
        })
    }

    fn decrypt(&self, c: &BigUint) -> BigUint {
        let u = self.ctx.pow(c, &(&self.prime - 1u32), ModPowStrategy::default());
        ((u - 1u32) / &self.prime * &self.h) % &self.prime
    }
}

#[derive(Clone)]
pub struct PaillierPrivateKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
    public: PaillierPublicKey,
    hp: PrimeHalf,
    hq: PrimeHalf,
    /// `p^{-1} mod q`
    p_inv: BigUint,
    /// `(p^2)^{-1} mod q^2`
    p_sq_inv: BigUint,
}

impl fmt::Debug for PaillierPrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaillierPrivateKey")
            .field("key_bits", &self.public.key_bits)
            .finish_non_exhaustive()
    }
}

impl PaillierPrivateKey {
    fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::KeyGeneration("p and q must differ".into()));
        }
        let n = &p * &q;
        let public = PaillierPublicKey::from_modulus(n)?;
        let lambda = (&p - 1u32).lcm(&(&q - 1u32));
        // mu = L(g^lambda mod N^2)^{-1} mod N
        let u = public.ctx.pow(&public.g, &lambda, ModPowStrategy::default());
        let l = (u - 1u32) / &public.n;
        let mu = l
            .modinv(&public.n)
            .ok_or_else(|| Error::KeyGeneration("L(g^lambda) is not invertible mod N".into()))?;
        let hp = PrimeHalf::new(&p, &public.n)?;
        let hq = PrimeHalf::new(&q, &public.n)?;
        let p_inv = (&p % &q)
            .modinv(&q)
            .ok_or_else(|| Error::KeyGeneration("p is not invertible mod q".into()))?;
        let p_sq_inv = (&hp.square % &hq.square)
            .modinv(&hq.square)
            .ok_or_else(|| Error::KeyGeneration("p^2 is not invertible mod q^2".into()))?;
        Ok(PaillierPrivateKey {
            p,
            q,
            lambda,
            mu,
            public,
            hp,
            hq,
            p_inv,
            p_sq_inv,
        })
    }

    pub fn public_key(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        let pk = &self.public;
        if c.0 >= pk.n_squared {
            return Err(Error::Decryption("ciphertext exceeds N^2".into()));
        }
        if !c.0.gcd(&pk.n).is_one() {
            return Err(Error::Decryption("ciphertext is not a unit modulo N^2".into()));
        }
        let mp = self.hp.decrypt(&c.0);
        let mq = self.hq.decrypt(&c.0);
        Ok(crt(&mp, &mq, &self.p, &self.q, &self.p_inv))
    }

    /// Encryption by the key holder: `r^N` is computed modulo `p^2` and
    /// `q^2` separately. Produces the same ciphertext as
    /// [`PaillierPublicKey::encrypt_with_blinding`] for the same `r`.
    pub fn encrypt_with_blinding(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        let pk = &self.public;
        if m >= &pk.n {
            return Err(Error::domain("plaintext must lie in [0, N)"));
        }
        if r.is_zero() || r >= &pk.n {
            return Err(Error::domain("blinding factor must lie in [1, N)"));
        }
        let xp = self.hp.ctx.pow(r, &self.hp.blind_exp, ModPowStrategy::default());
        let xq = self.hq.ctx.pow(r, &self.hq.blind_exp, ModPowStrategy::default());
        let rn = crt(&xp, &xq, &self.hp.square, &self.hq.square, &self.p_sq_inv);
        let gm = (BigUint::one() + m * &pk.n) % &pk.n_squared;
        Ok(Ciphertext((gm * rn) % &pk.n_squared))
    }

    /// Same blinding-draw order as [`PaillierPublicKey::encrypt_vector`].
    pub fn encrypt_vector<R: RngCore + ?Sized>(&self, ms: &[BigUint], rng: &mut R) -> Result<Vec<Ciphertext>> {
        let blindings: Vec<BigUint> = ms.iter().map(|_| self.public.random_blinding(rng)).collect();
        ms.par_iter()
            .zip(blindings.par_iter())
            .map(|(m, r)| self.encrypt_with_blinding(m, r))
            .collect()
    }

    pub fn decrypt_vector(&self, cs: &[Ciphertext]) -> Result<Vec<BigUint>> {
        cs.par_iter().map(|c| self.decrypt(c)).collect()
    }

    /// `SKEY` file: magic, u16 version, u32 key_bits, then u32-prefixed p, q, lambda, mu.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"SKEY");
        out.extend_from_slice(&KEY_FILE_VERSION.to_be_bytes());
        out.extend_from_slice(&self.public.key_bits.to_be_bytes());
        for x in [&self.p, &self.q, &self.lambda, &self.mu] {
            wire::put_prefixed(&mut out, x);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(b"SKEY")?;
        let version = r.u16()?;
        if version != KEY_FILE_VERSION {
            return Err(Error::format(format!("unsupported SKEY version {version}")));
        }
        let key_bits = r.u32()?;
        let p = r.prefixed_biguint()?;
        let q = r.prefixed_biguint()?;
        let lambda = r.prefixed_biguint()?;
        let mu = r.prefixed_biguint()?;
        r.finish()?;
        let sk = Self::from_primes(p, q).map_err(|e| Error::format(e.to_string()))?;
        if sk.public.key_bits != key_bits || sk.lambda != lambda || sk.mu != mu {
            return Err(Error::format("SKEY fields are inconsistent"));
        }
        Ok(sk)
    }
}

/// The `x mod a*b` with `x = xa mod a`, `x = xb mod b`, given `a^{-1} mod b`.
fn crt(xa: &BigUint, xb: &BigUint, a: &BigUint, b: &BigUint, a_inv: &BigUint) -> BigUint {
    let diff = (xb + b - (xa % b)) % b;
    xa + a * ((diff * a_inv) % b)
}

#[derive(Clone, Debug)]
pub struct PaillierKeypair {
    pub public: PaillierPublicKey,
    pub private: PaillierPrivateKey,
}

impl PaillierKeypair {
    /// Generates two random `key_bits / 2`-bit primes. Keys under 1024 bits
    /// are accepted but flagged with [`is_weak`](Self::is_weak) and a log warning.
    pub fn generate<R: RngCore + ?Sized>(key_bits: u32, rng: &mut R) -> Result<Self> {
        if key_bits < MIN_KEY_BITS {
            return Err(Error::domain(format!("key_bits must be at least {MIN_KEY_BITS}")));
        }
        let p_bits = (key_bits / 2) as u64;
        let q_bits = key_bits as u64 - p_bits;
        for _ in 0..KEYGEN_RETRIES {
            let p = random_prime(p_bits, rng, PRIME_ATTEMPTS)
                .ok_or_else(|| Error::KeyGeneration("no prime found for p".into()))?;
            let q = random_prime(q_bits, rng, PRIME_ATTEMPTS)
                .ok_or_else(|| Error::KeyGeneration("no prime found for q".into()))?;
            if p == q {
                continue;
            }
            let n = &p * &q;
            if n.bits() != key_bits as u64 || !n.gcd(&((&p - 1u32) * (&q - 1u32))).is_one() {
                continue;
            }
            if let Ok(kp) = Self::from_primes(p, q) {
                if kp.is_weak() {
                    warn!(
                        "{key_bits}-bit Paillier key is below {MIN_SECURE_KEY_BITS} bits and not considered secure"
                    );
                }
                return Ok(kp);
            }
        }
        Err(Error::KeyGeneration(format!(
            "no valid {key_bits}-bit modulus after {KEYGEN_RETRIES} attempts"
        )))
    }

    /// Builds a keypair from caller-chosen primes. Intended for known-answer
    /// tests with toy moduli; [`generate`](Self::generate) is the production path.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        let private = PaillierPrivateKey::from_primes(p, q)?;
        Ok(PaillierKeypair {
            public: private.public.clone(),
            private,
        })
    }

    pub fn is_weak(&self) -> bool {
        self.public.is_weak()
    }
}

/// A residue modulo `N^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext(pub(crate) BigUint);

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn from_value(value: BigUint) -> Self {
        Ciphertext(value)
    }

    /// Big-endian bytes, zero-padded to the key's ciphertext width.
    pub fn to_bytes(&self, pk: &PaillierPublicKey) -> Vec<u8> {
        wire::to_fixed(&self.0, pk.ciphertext_width())
            .expect("ciphertext below N^2 always fits its width")
    }
}
