//! Montgomery arithmetic over `u64` limbs with two exponentiation strategies.
//!
//! Every ciphertext operation in the crate (encryption, decryption, and the
//! homomorphic scalar multiplication that dominates the server-side matvec)
//! is a modular exponentiation modulo `N^2`. The modulus is fixed per key,
//! so a [`Montgomery`] context is built once and shared across threads.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// How [`Montgomery::pow`] walks the exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModPowStrategy {
    /// Left-to-right binary method: one squaring per bit, one multiply per set bit.
    SquareAndMultiply,
    /// Fixed `w`-bit windows over a table of `2^w` precomputed powers.
    FixedWindow(u32),
}

impl Default for ModPowStrategy {
    fn default() -> Self {
        ModPowStrategy::FixedWindow(4)
    }
}

/// Montgomery multiplications performed by one or more exponentiations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PowCount {
    pub squarings: u64,
    pub multiplications: u64,
}

impl PowCount {
    pub fn total(&self) -> u64 {
        self.squarings + self.multiplications
    }

    pub fn add(&mut self, other: PowCount) {
        self.squarings += other.squarings;
        self.multiplications += other.multiplications;
    }
}

/// An element in Montgomery form, `x * R mod m` with `R = 2^(64 * limbs)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MontElem(Vec<u64>);

#[derive(Clone, Debug)]
pub struct Montgomery {
    modulus: BigUint,
    limbs: Vec<u64>,
    /// `-m^{-1} mod 2^64`
    m_inv: u64,
    r2: Vec<u64>,
    one: Vec<u64>,
}

fn to_limbs(x: &BigUint, n: usize) -> Vec<u64> {
    let mut digits = x.to_u64_digits();
    digits.resize(n, 0);
    digits
}

fn from_limbs(limbs: &[u64]) -> BigUint {
    let mut halves = Vec::with_capacity(limbs.len() * 2);
    for &l in limbs {
        halves.push(l as u32);
        halves.push((l >> 32) as u32);
    }
    BigUint::new(halves)
}

impl Montgomery {
    /// Builds a context for an odd modulus greater than one.
    pub fn new(modulus: &BigUint) -> Option<Self> {
        if modulus <= &BigUint::one() || !modulus.bit(0) {
            return None;
        }
        let limbs = modulus.to_u64_digits();
        let n = limbs.len();

        // Newton iteration doubles the number of correct low bits each step.
        let m0 = limbs[0];
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let m_inv = inv.wrapping_neg();

        let r = BigUint::one() << (64 * n);
        let one = to_limbs(&(&r % modulus), n);
        let r2 = to_limbs(&((&r * &r) % modulus), n);

        Some(Montgomery {
            modulus: modulus.clone(),
            limbs,
            m_inv,
            r2,
            one,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    fn n(&self) -> usize {
        self.limbs.len()
    }

    /// CIOS Montgomery product `a * b * R^{-1} mod m`. `t` is scratch of length `n + 2`.
    fn mul_into(&self, a: &[u64], b: &[u64], out: &mut [u64], t: &mut [u64]) {
        let n = self.n();
        let m = &self.limbs[..n];
        let (a, b) = (&a[..n], &b[..n]);
        let t = &mut t[..n + 2];
        t.fill(0);
        for &ai in a {
            let mut carry = 0u64;
            for (tj, &bj) in t[..n].iter_mut().zip(b) {
                let uv = *tj as u128 + (ai as u128) * (bj as u128) + carry as u128;
                *tj = uv as u64;
                carry = (uv >> 64) as u64;
            }
            let uv = t[n] as u128 + carry as u128;
            t[n] = uv as u64;
            t[n + 1] = (uv >> 64) as u64;

            let k = t[0].wrapping_mul(self.m_inv);
            let uv = t[0] as u128 + (k as u128) * (m[0] as u128);
            let mut carry = (uv >> 64) as u64;
            for j in 1..n {
                let uv = t[j] as u128 + (k as u128) * (m[j] as u128) + carry as u128;
                t[j - 1] = uv as u64;
                carry = (uv >> 64) as u64;
            }
            let uv = t[n] as u128 + carry as u128;
            t[n - 1] = uv as u64;
            t[n] = t[n + 1] + (uv >> 64) as u64;
        }

        if t[n] != 0 || !less_than(&t[..n], m) {
            let mut borrow = 0u64;
            for j in 0..n {
                let (d1, b1) = t[j].overflowing_sub(m[j]);
                let (d2, b2) = d1.overflowing_sub(borrow);
                out[j] = d2;
                borrow = (b1 | b2) as u64;
            }
        } else {
            out.copy_from_slice(&t[..n]);
        }
    }

    fn scratch(&self) -> Vec<u64> {
        vec![0u64; self.n() + 2]
    }

    pub fn to_mont(&self, x: &BigUint) -> MontElem {
        let reduced = if x >= &self.modulus {
            x % &self.modulus
        } else {
            x.clone()
        };
        let a = to_limbs(&reduced, self.n());
        let mut out = vec![0u64; self.n()];
        self.mul_into(&a, &self.r2, &mut out, &mut self.scratch());
        MontElem(out)
    }

    pub fn from_mont(&self, x: &MontElem) -> BigUint {
        let mut unit = vec![0u64; self.n()];
        unit[0] = 1;
        let mut out = vec![0u64; self.n()];
        self.mul_into(&x.0, &unit, &mut out, &mut self.scratch());
        from_limbs(&out)
    }

    pub fn one(&self) -> MontElem {
        MontElem(self.one.clone())
    }

    pub fn mul(&self, a: &MontElem, b: &MontElem) -> MontElem {
        let mut out = vec![0u64; self.n()];
        self.mul_into(&a.0, &b.0, &mut out, &mut self.scratch());
        MontElem(out)
    }

    /// In-place `acc = acc * b`.
    pub fn mul_assign(&self, acc: &mut MontElem, b: &MontElem) {
        let mut out = vec![0u64; self.n()];
        self.mul_into(&acc.0, &b.0, &mut out, &mut self.scratch());
        acc.0 = out;
    }

    /// `base^exp` with both operands and result in Montgomery form.
    pub fn pow_mont(
        &self,
        base: &MontElem,
        exp: &BigUint,
        strategy: ModPowStrategy,
    ) -> (MontElem, PowCount) {
        if exp.is_zero() {
            return (self.one(), PowCount::default());
        }
        match strategy {
            ModPowStrategy::SquareAndMultiply => self.pow_binary(base, exp),
            ModPowStrategy::FixedWindow(w) => self.pow_window(base, exp, w.clamp(1, 8)),
        }
    }

    /// `base^exp mod m` on ordinary integers.
    pub fn pow(&self, base: &BigUint, exp: &BigUint, strategy: ModPowStrategy) -> BigUint {
        let b = self.to_mont(base);
        let (r, _) = self.pow_mont(&b, exp, strategy);
        self.from_mont(&r)
    }

    fn pow_binary(&self, base: &MontElem, exp: &BigUint) -> (MontElem, PowCount) {
        let n = self.n();
        let mut count = PowCount::default();
        let mut t = self.scratch();
        let mut acc = base.0.clone();
        let mut tmp = vec![0u64; n];
        let bits = exp.bits();
        for i in (0..bits - 1).rev() {
            self.mul_into(&acc, &acc, &mut tmp, &mut t);
            std::mem::swap(&mut acc, &mut tmp);
            count.squarings += 1;
            if exp.bit(i) {
                self.mul_into(&acc, &base.0, &mut tmp, &mut t);
                std::mem::swap(&mut acc, &mut tmp);
                count.multiplications += 1;
            }
        }
        (MontElem(acc), count)
    }

    fn pow_window(&self, base: &MontElem, exp: &BigUint, w: u32) -> (MontElem, PowCount) {
        let n = self.n();
        let mut count = PowCount::default();
        let mut t = self.scratch();

        let size = 1usize << w;
        let mut table: Vec<Vec<u64>> = Vec::with_capacity(size);
        table.push(self.one.clone());
        table.push(base.0.clone());
        for i in 2..size {
            let mut next = vec![0u64; n];
            self.mul_into(&table[i - 1], &base.0, &mut next, &mut t);
            count.multiplications += 1;
            table.push(next);
        }

        let digits = exp.to_u64_digits();
        let window_at = |pos: u64| -> usize {
            // bits [pos, pos + w) of the exponent
            let mut v = 0usize;
            for b in 0..w as u64 {
                let bit = pos + b;
                let limb = (bit / 64) as usize;
                if limb < digits.len() && (digits[limb] >> (bit % 64)) & 1 == 1 {
                    v |= 1 << b;
                }
            }
            v
        };

        let bits = exp.bits();
        let windows = bits.div_ceil(w as u64);
        let mut acc = table[window_at((windows - 1) * w as u64)].clone();
        let mut tmp = vec![0u64; n];
        for win in (0..windows - 1).rev() {
            for _ in 0..w {
                self.mul_into(&acc, &acc, &mut tmp, &mut t);
                std::mem::swap(&mut acc, &mut tmp);
                count.squarings += 1;
            }
            let v = window_at(win * w as u64);
            if v != 0 {
                self.mul_into(&acc, &table[v], &mut tmp, &mut t);
                std::mem::swap(&mut acc, &mut tmp);
                count.multiplications += 1;
            }
        }
        (MontElem(acc), count)
    }
}

fn less_than(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}
