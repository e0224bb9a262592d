//! Big-endian byte helpers shared by the key, matrix, vector and frame formats.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Writes `x` as exactly `width` big-endian bytes, zero-padded on the left.
pub fn put_fixed(out: &mut Vec<u8>, x: &BigUint, width: usize) -> Result<()> {
    if x.is_zero() {
        out.resize(out.len() + width, 0);
        return Ok(());
    }
    let bytes = x.to_bytes_be();
    if bytes.len() > width {
        return Err(Error::format(format!(
            "value needs {} bytes, field is {width}",
            bytes.len()
        )));
    }
    out.resize(out.len() + width - bytes.len(), 0);
    out.extend_from_slice(&bytes);
    Ok(())
}

pub fn to_fixed(x: &BigUint, width: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(width);
    put_fixed(&mut out, x, width)?;
    Ok(out)
}

/// `u32` length prefix followed by the minimal big-endian magnitude.
pub fn put_prefixed(out: &mut Vec<u8>, x: &BigUint) {
    let bytes = if x.is_zero() { Vec::new() } else { x.to_bytes_be() };
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(format!(
                "truncated input: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.bytes(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.array::<4>()?;
        if &got != expected {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn prefixed_biguint(&mut self) -> Result<BigUint> {
        let len = self.u32()? as usize;
        Ok(BigUint::from_bytes_be(self.bytes(len)?))
    }

    pub fn fixed_biguint(&mut self, width: usize) -> Result<BigUint> {
        Ok(BigUint::from_bytes_be(self.bytes(width)?))
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_width_pads_and_rejects_overflow() {
        assert_eq!(to_fixed(&BigUint::from(0x0102u32), 4).unwrap(), vec![0, 0, 1, 2]);
        assert_eq!(to_fixed(&BigUint::zero(), 3).unwrap(), vec![0, 0, 0]);
        assert!(to_fixed(&BigUint::from(0x010203u32), 2).is_err());
    }

    #[test]
    fn reader_reports_truncation() {
        let mut r = Reader::new(&[0, 1, 2]);
        assert_eq!(r.u16().unwrap(), 1);
        assert!(r.u32().is_err());
    }
}
