//! Fixed-point encoding of reals and centered residues modulo `q` or `N`.
//!
//! A real `x` becomes the integer `round(x * 10^d)`. Signed integers are
//! stored as residues: non-negative values as themselves, negative values as
//! `modulus + v`. Because the mapping is a ring homomorphism on the window
//! `(-modulus/2, modulus/2)`, signed dot products computed on residues lift
//! back to the exact signed result as long as they stay inside the window.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::primes::{is_probable_prime, next_prime};
use crate::wire::{self, Reader};

pub const DEFAULT_DECIMAL_DIGITS: u8 = 6;
pub const DEFAULT_Q_BITS: u32 = 128;
/// Keeps `10^(2d)` well inside `f64`'s exact-integer range for decoding.
pub const MAX_DECIMAL_DIGITS: u8 = 18;

const PARAMS_VERSION: u16 = 1;

pub fn pow10(p: u32) -> BigUint {
    BigUint::from(10u32).pow(p)
}

/// `round(x * 10^d)`, ties away from zero.
pub fn encode(x: f64, d: u8) -> Result<BigInt> {
    if !x.is_finite() {
        return Err(Error::domain(format!("cannot encode non-finite value {x}")));
    }
    let scaled = (x * 10f64.powi(d as i32)).round();
    if !scaled.is_finite() {
        return Err(Error::domain(format!("{x} * 10^{d} overflows")));
    }
    BigInt::from_f64(scaled).ok_or_else(|| Error::domain(format!("cannot represent {scaled}")))
}

/// Maps `v` with `|v| < modulus / 2` into `[0, modulus)`.
pub fn to_residue(v: &BigInt, modulus: &BigUint) -> Result<BigUint> {
    let magnitude = v.magnitude();
    if magnitude * 2u32 >= *modulus {
        return Err(Error::Capacity {
            required_q_bits: required_q_bits(magnitude),
            detail: format!("|{v}| is not below half the modulus"),
        });
    }
    Ok(match v.sign() {
        Sign::Minus => modulus - magnitude,
        _ => magnitude.clone(),
    })
}

/// Inverse of [`to_residue`]: residues above `modulus / 2` are negative.
pub fn centered_lift(t: &BigUint, modulus: &BigUint) -> BigInt {
    let t = if t >= modulus { t % modulus } else { t.clone() };
    if &t * 2u32 > *modulus {
        BigInt::from_biguint(Sign::Minus, modulus - &t)
    } else {
        BigInt::from_biguint(Sign::Plus, t)
    }
}

/// `v / 10^scale_power` as a real.
pub fn decode(v: &BigInt, scale_power: u32) -> f64 {
    let scale = 10f64.powi(scale_power as i32);
    match v.to_f64() {
        Some(f) if f.is_finite() && f.abs() < 9.0e15 => f / scale,
        _ => {
            // split to keep the quotient's integer part exact
            let denom = BigInt::from_biguint(Sign::Plus, pow10(scale_power));
            let (q, r) = (v / &denom, v % &denom);
            q.to_f64().unwrap_or(f64::NAN) + r.to_f64().unwrap_or(0.0) / scale
        }
    }
}

/// Largest encoded magnitude of a value bounded by `bound` at `d` digits.
pub fn encoded_bound(bound: f64, d: u8) -> BigUint {
    let scaled = (bound.abs() * 10f64.powi(d as i32)).ceil();
    BigUint::from_f64(scaled).unwrap_or_else(BigUint::zero)
}

/// Largest possible `|sum_k a_k b_k|` for `n` terms with encoded bounds.
pub fn dot_bound(n: usize, d: u8, max_a: f64, max_b: f64) -> BigUint {
    BigUint::from(n) * encoded_bound(max_a, d) * encoded_bound(max_b, d)
}

/// Smallest bit-length `L` with `2^L > 2 * bound`.
pub fn required_q_bits(bound: &BigUint) -> u64 {
    (bound * 2u32).bits()
}

/// Checks that an `n`-term dot product of `d`-digit values bounded by
/// `max_a` and `max_b` stays below `q / 2`, and that the unreduced
/// server-side sum (matrix entries times exponents below `q`) stays below `N / 2`.
pub fn check_capacity(
    n: usize,
    d: u8,
    max_a: f64,
    max_b: f64,
    q: &BigUint,
    plaintext_n: &BigUint,
) -> Result<()> {
    if !(max_a > 0.0 && max_b > 0.0) || n == 0 {
        return Err(Error::domain("capacity bounds and dimension must be positive"));
    }
    let bound = dot_bound(n, d, max_a, max_b);
    if &bound * 2u32 >= *q {
        return Err(Error::Capacity {
            required_q_bits: required_q_bits(&bound),
            detail: format!("n={n}, d={d}: products reach {bound}, q/2 is smaller"),
        });
    }
    let server_bound = BigUint::from(n) * encoded_bound(max_a, d) * (q - 1u32);
    if server_bound * 2u32 >= *plaintext_n || q >= plaintext_n {
        return Err(Error::Capacity {
            required_q_bits: required_q_bits(&bound),
            detail: format!(
                "Paillier modulus ({} bits) too small for q ({} bits) at n={n}",
                plaintext_n.bits(),
                q.bits()
            ),
        });
    }
    Ok(())
}

/// Fixed-point scale, perturbation modulus and Paillier plaintext modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodecParams {
    decimal_digits: u8,
    q: BigUint,
    plaintext_n: BigUint,
}

impl CodecParams {
    pub fn new(decimal_digits: u8, q: BigUint, plaintext_n: BigUint) -> Result<Self> {
        if decimal_digits > MAX_DECIMAL_DIGITS {
            return Err(Error::domain(format!("d must be at most {MAX_DECIMAL_DIGITS}")));
        }
        if q < BigUint::from(3u32) || q >= plaintext_n {
            return Err(Error::domain("q must satisfy 3 <= q < N"));
        }
        if !is_probable_prime(&q, &mut ChaCha8Rng::seed_from_u64(0x9e37)) {
            return Err(Error::domain("q must be prime"));
        }
        Ok(CodecParams {
            decimal_digits,
            q,
            plaintext_n,
        })
    }

    /// Picks the smallest prime above both `2^(q_bits - 1)` and twice the dot-product
    /// bound, then validates the full capacity condition.
    pub fn select(
        n: usize,
        decimal_digits: u8,
        q_bits: u32,
        max_a: f64,
        max_b: f64,
        plaintext_n: &BigUint,
    ) -> Result<Self> {
        if q_bits < 2 {
            return Err(Error::domain("q_bits must be at least 2"));
        }
        let bound = dot_bound(n, decimal_digits, max_a, max_b);
        let floor = BigUint::one() << (q_bits - 1);
        let start = std::cmp::max(floor, &bound * 2u32);
        let q = next_prime(&start, &mut ChaCha8Rng::seed_from_u64(0x9e37));
        if q.bits() > q_bits as u64 {
            return Err(Error::Capacity {
                required_q_bits: required_q_bits(&bound),
                detail: format!(
                    "no {q_bits}-bit q holds n={n} products at d={decimal_digits}"
                ),
            });
        }
        check_capacity(n, decimal_digits, max_a, max_b, &q, plaintext_n)?;
        Self::new(decimal_digits, q, plaintext_n.clone())
    }

    pub fn decimal_digits(&self) -> u8 {
        self.decimal_digits
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn plaintext_n(&self) -> &BigUint {
        &self.plaintext_n
    }

    /// Bytes needed for a residue modulo `q`.
    pub fn q_width(&self) -> usize {
        (self.q.bits() as usize).div_ceil(8)
    }

    pub fn encode_residue(&self, x: f64, modulus: &BigUint) -> Result<EncodedScalar> {
        let v = encode(x, self.decimal_digits)?;
        Ok(EncodedScalar {
            residue: to_residue(&v, modulus)?,
            scale_power: self.decimal_digits as u32,
        })
    }

    pub fn check_capacity(&self, n: usize, max_a: f64, max_b: f64) -> Result<()> {
        check_capacity(n, self.decimal_digits, max_a, max_b, &self.q, &self.plaintext_n)
    }

    /// `d` as u8, then u16-prefixed q. This is the codec block of the matrix header.
    pub fn write_header_fields(&self, out: &mut Vec<u8>) {
        out.push(self.decimal_digits);
        let qb = self.q.to_bytes_be();
        out.extend_from_slice(&(qb.len() as u16).to_be_bytes());
        out.extend_from_slice(&qb);
    }

    pub(crate) fn read_header_fields(r: &mut Reader<'_>) -> Result<(u8, BigUint)> {
        let d = r.u8()?;
        let len = r.u16()? as usize;
        let q = BigUint::from_bytes_be(r.bytes(len)?);
        Ok((d, q))
    }

    /// Standalone `CPRM` file: magic, u16 version, the header fields, u32-prefixed N.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"CPRM");
        out.extend_from_slice(&PARAMS_VERSION.to_be_bytes());
        self.write_header_fields(&mut out);
        wire::put_prefixed(&mut out, &self.plaintext_n);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(b"CPRM")?;
        let version = r.u16()?;
        if version != PARAMS_VERSION {
            return Err(Error::format(format!("unsupported CPRM version {version}")));
        }
        let (d, q) = Self::read_header_fields(&mut r)?;
        let n = r.prefixed_biguint()?;
        r.finish()?;
        Self::new(d, q, n).map_err(|e| Error::format(e.to_string()))
    }
}

/// A residue together with the power of ten it is scaled by.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedScalar {
    pub residue: BigUint,
    pub scale_power: u32,
}

impl EncodedScalar {
    pub fn decode(&self, modulus: &BigUint) -> f64 {
        decode(&centered_lift(&self.residue, modulus), self.scale_power)
    }
}

/// Encodes a real vector at `d` digits into residues modulo `modulus`.
pub fn encode_vector(xs: &[f64], d: u8, modulus: &BigUint) -> Result<Vec<BigUint>> {
    xs.iter()
        .map(|&x| to_residue(&encode(x, d)?, modulus))
        .collect()
}
