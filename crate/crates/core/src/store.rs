//! On-disk formats for encrypted data.
//!
//! `SEIG` matrix file (all integers big-endian):
//!
//! ```text
//! "SEIG" | version u16 | key_bits u32 | n_rows u64 | n_cols u64 | d u8
//!        | q_len u16 | q bytes | pk_len u32 | pk bytes (PKEY encoding)
//! then n_rows * n_cols ciphertexts, row-major, each exactly 2*key_bits/8 bytes
//! ```
//!
//! `SEVR` vector file: `"SEVR" | version u16 | n_rows u64 | width u32` followed
//! by the ciphertexts in row order.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use crate::codec::CodecParams;
use crate::error::{Error, Result};
use crate::paillier::{ciphertext_width, Ciphertext, PaillierPublicKey};
use crate::wire::{self, Reader};

pub const MATRIX_VERSION: u16 = 1;
pub const VECTOR_VERSION: u16 = 1;
/// Ciphertext payload per block, the size of one HDFS block.
pub const DEFAULT_BLOCK_BYTES: u64 = 64 * 1024 * 1024;

/// Payload bytes of an `n_rows x n_cols` matrix under a `key_bits` key.
pub fn matrix_payload_bytes(n_rows: u64, n_cols: u64, key_bits: u32) -> u128 {
    n_rows as u128 * n_cols as u128 * ciphertext_width(key_bits) as u128
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixHeader {
    pub n_rows: u64,
    pub n_cols: u64,
    pub codec: CodecParams,
    pub public_key: PaillierPublicKey,
}

impl MatrixHeader {
    pub fn new(
        n_rows: u64,
        n_cols: u64,
        codec: CodecParams,
        public_key: PaillierPublicKey,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::domain("matrix dimensions must be positive"));
        }
        if codec.plaintext_n() != public_key.n() {
            return Err(Error::domain("codec parameters belong to a different key"));
        }
        Ok(MatrixHeader {
            n_rows,
            n_cols,
            codec,
            public_key,
        })
    }

    pub fn key_bits(&self) -> u32 {
        self.public_key.key_bits()
    }

    pub fn ciphertext_width(&self) -> usize {
        self.public_key.ciphertext_width()
    }

    pub fn row_bytes(&self) -> u64 {
        self.n_cols * self.ciphertext_width() as u64
    }

    pub fn payload_bytes(&self) -> u64 {
        self.n_rows * self.row_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"SEIG");
        out.extend_from_slice(&MATRIX_VERSION.to_be_bytes());
        out.extend_from_slice(&self.key_bits().to_be_bytes());
        out.extend_from_slice(&self.n_rows.to_be_bytes());
        out.extend_from_slice(&self.n_cols.to_be_bytes());
        self.codec.write_header_fields(&mut out);
        let pk = self.public_key.to_bytes();
        out.extend_from_slice(&(pk.len() as u32).to_be_bytes());
        out.extend_from_slice(&pk);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = Self::read(&mut r)?;
        r.finish()?;
        Ok(h)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        r.magic(b"SEIG")?;
        let version = r.u16()?;
        if version != MATRIX_VERSION {
            return Err(Error::format(format!("unsupported SEIG version {version}")));
        }
        let key_bits = r.u32()?;
        let n_rows = r.u64()?;
        let n_cols = r.u64()?;
        let (d, q) = CodecParams::read_header_fields(r)?;
        let pk_len = r.u32()? as usize;
        let public_key = PaillierPublicKey::from_bytes(r.bytes(pk_len)?)?;
        if public_key.key_bits() != key_bits {
            return Err(Error::format("header key_bits disagrees with embedded key"));
        }
        let codec = CodecParams::new(d, q, public_key.n().clone())
            .map_err(|e| Error::format(e.to_string()))?;
        Self::new(n_rows, n_cols, codec, public_key).map_err(|e| Error::format(e.to_string()))
    }

    /// Reads just the header from the start of a matrix file.
    fn read_from_file(file: &mut File) -> Result<(Self, u64)> {
        // fixed prefix: magic..d (4+2+4+8+8+1) then q_len
        let mut prefix = vec![0u8; 29];
        file.read_exact(&mut prefix)?;
        let q_len = u16::from_be_bytes([prefix[27], prefix[28]]) as usize;
        let mut rest = vec![0u8; q_len + 4];
        file.read_exact(&mut rest)?;
        let pk_len = u32::from_be_bytes(rest[q_len..].try_into().unwrap()) as usize;
        let mut pk = vec![0u8; pk_len];
        file.read_exact(&mut pk)?;
        prefix.extend_from_slice(&rest);
        prefix.extend_from_slice(&pk);
        let header = Self::from_bytes(&prefix)?;
        Ok((header, prefix.len() as u64))
    }
}

/// Single-writer ingestion into `<path>.partial`; renamed to `path` on finalize.
pub struct EncryptedMatrixWriter {
    path: PathBuf,
    partial: PathBuf,
    file: File,
    header: MatrixHeader,
    header_len: u64,
    written: Vec<bool>,
    remaining: u64,
}

impl EncryptedMatrixWriter {
    pub fn create(path: impl AsRef<Path>, header: MatrixHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut partial = path.clone().into_os_string();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(true)
            .read(true)
            .write(true)
            .open(&partial)?;
        let hb = header.to_bytes();
        file.write_all(&hb)?;
        file.set_len(hb.len() as u64 + header.payload_bytes())?;
        let n_rows = usize::try_from(header.n_rows)
            .map_err(|_| Error::domain("row count exceeds address space"))?;
        Ok(EncryptedMatrixWriter {
            path,
            partial,
            file,
            header_len: hb.len() as u64,
            remaining: header.n_rows,
            written: vec![false; n_rows],
            header,
        })
    }

    pub fn header(&self) -> &MatrixHeader {
        &self.header
    }

    pub fn is_complete(&self) -> bool {
        self.remaining == 0
    }

    pub fn missing_rows(&self) -> Vec<u64> {
        self.written
            .iter()
            .enumerate()
            .filter(|(_, w)| !**w)
            .map(|(i, _)| i as u64)
            .collect()
    }

    pub fn append_row(&mut self, row_index: u64, row: &[Ciphertext]) -> Result<()> {
        if row.len() as u64 != self.header.n_cols {
            return Err(Error::format(format!(
                "row {row_index} has {} entries, expected {}",
                row.len(),
                self.header.n_cols
            )));
        }
        let width = self.header.ciphertext_width();
        let mut bytes = Vec::with_capacity(row.len() * width);
        for c in row {
            wire::put_fixed(&mut bytes, c.value(), width)?;
        }
        self.append_row_bytes(row_index, &bytes)
    }

    /// Writes an already serialized row after validating its width and values.
    pub fn append_row_bytes(&mut self, row_index: u64, bytes: &[u8]) -> Result<()> {
        if row_index >= self.header.n_rows {
            return Err(Error::domain(format!(
                "row {row_index} out of range for {} rows",
                self.header.n_rows
            )));
        }
        if self.written[row_index as usize] {
            return Err(Error::integrity(format!("row {row_index} already written")));
        }
        if bytes.len() as u64 != self.header.row_bytes() {
            return Err(Error::format(format!(
                "row {row_index} is {} bytes, expected {}",
                bytes.len(),
                self.header.row_bytes()
            )));
        }
        let pk = &self.header.public_key;
        for chunk in bytes.chunks(self.header.ciphertext_width()) {
            pk.ciphertext_from_bytes(chunk)?;
        }
        let offset = self.header_len + row_index * self.header.row_bytes();
        self.file.seek(SeekFrom::Start(offset))?;
        self.file.write_all(bytes)?;
        self.written[row_index as usize] = true;
        self.remaining -= 1;
        Ok(())
    }

    /// Errors with the missing row indices unless every row has been written.
    pub fn check_complete(&self) -> Result<()> {
        if self.is_complete() {
            return Ok(());
        }
        let missing = self.missing_rows();
        let shown: Vec<String> = missing.iter().take(16).map(|r| r.to_string()).collect();
        Err(Error::integrity(format!(
            "{} missing rows: {{{}}}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 16 { ", ..." } else { "" }
        )))
    }

    pub fn stream_blocks(&mut self, block_rows: u64) -> Result<BlockStream> {
        self.check_complete()?;
        self.file.flush()?;
        BlockStream::new(&self.partial, self.header.clone(), self.header_len, block_rows)
    }

    pub fn finalize(mut self) -> Result<EncryptedMatrix> {
        self.check_complete()?;
        self.file.flush()?;
        self.file.sync_all()?;
        drop(self.file);
        fs::rename(&self.partial, &self.path)?;
        EncryptedMatrix::open(&self.path)
    }
}

/// A complete, read-only encrypted matrix file.
#[derive(Clone, Debug)]
pub struct EncryptedMatrix {
    path: PathBuf,
    header: MatrixHeader,
    header_len: u64,
}

impl EncryptedMatrix {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path)?;
        let (header, header_len) = MatrixHeader::read_from_file(&mut file)?;
        let actual = file.metadata()?.len();
        let expected = header_len + header.payload_bytes();
        if actual != expected {
            return Err(Error::integrity(format!(
                "matrix file is {actual} bytes, header implies {expected}"
            )));
        }
        Ok(EncryptedMatrix {
            path,
            header,
            header_len,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &MatrixHeader {
        &self.header
    }

    pub fn header_len(&self) -> u64 {
        self.header_len
    }

    pub fn file_len(&self) -> u64 {
        self.header_len + self.header.payload_bytes()
    }

    pub fn row_bytes(&self, row_index: u64) -> Result<Vec<u8>> {
        if row_index >= self.header.n_rows {
            return Err(Error::domain(format!("row {row_index} out of range")));
        }
        let mut file = File::open(&self.path)?;
        file.seek(SeekFrom::Start(
            self.header_len + row_index * self.header.row_bytes(),
        ))?;
        let mut buf = vec![0u8; self.header.row_bytes() as usize];
        file.read_exact(&mut buf)?;
        Ok(buf)
    }

    pub fn row(&self, row_index: u64) -> Result<Vec<Ciphertext>> {
        let bytes = self.row_bytes(row_index)?;
        let pk = &self.header.public_key;
        bytes
            .chunks(self.header.ciphertext_width())
            .map(|c| pk.ciphertext_from_bytes(c))
            .collect()
    }

    /// Rows per block when blocks hold about `block_bytes` of payload.
    pub fn block_rows_for(&self, block_bytes: u64) -> u64 {
        (block_bytes / self.header.row_bytes()).max(1)
    }

    pub fn stream_blocks(&self, block_rows: u64) -> Result<BlockStream> {
        BlockStream::new(&self.path, self.header.clone(), self.header_len, block_rows)
    }
}

/// Consecutive rows `first_row .. first_row + n_rows()` as raw bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowBlock {
    pub first_row: u64,
    row_bytes: usize,
    data: Vec<u8>,
}

impl RowBlock {
    pub fn n_rows(&self) -> usize {
        self.data.len() / self.row_bytes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[u8])> + '_ {
        self.data
            .chunks(self.row_bytes)
            .enumerate()
            .map(move |(i, r)| (self.first_row + i as u64, r))
    }
}

pub struct BlockStream {
    reader: BufReader<File>,
    header: MatrixHeader,
    block_rows: u64,
    next_row: u64,
}

impl BlockStream {
    fn new(path: &Path, header: MatrixHeader, header_len: u64, block_rows: u64) -> Result<Self> {
        if block_rows == 0 {
            return Err(Error::domain("block size must be at least one row"));
        }
        let mut file = File::open(path)?;
        file.seek(SeekFrom::Start(header_len))?;
        Ok(BlockStream {
            reader: BufReader::with_capacity(1 << 20, file),
            header,
            block_rows,
            next_row: 0,
        })
    }
}

impl Iterator for BlockStream {
    type Item = Result<RowBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_row >= self.header.n_rows {
            return None;
        }
        let rows = self.block_rows.min(self.header.n_rows - self.next_row);
        let row_bytes = self.header.row_bytes() as usize;
        let mut data = vec![0u8; rows as usize * row_bytes];
        if let Err(e) = self.reader.read_exact(&mut data) {
            self.next_row = self.header.n_rows;
            return Some(Err(Error::integrity(format!("matrix truncated: {e}"))));
        }
        let block = RowBlock {
            first_row: self.next_row,
            row_bytes,
            data,
        };
        self.next_row += rows;
        Some(Ok(block))
    }
}

/// Ciphertexts in row order, as carried by `SEVR` files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedVector {
    pub width: usize,
    pub values: Vec<Ciphertext>,
}

impl EncryptedVector {
    pub fn new(pk: &PaillierPublicKey, values: Vec<Ciphertext>) -> Self {
        EncryptedVector {
            width: pk.ciphertext_width(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(18 + self.values.len() * self.width);
        out.extend_from_slice(b"SEVR");
        out.extend_from_slice(&VECTOR_VERSION.to_be_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_be_bytes());
        out.extend_from_slice(&(self.width as u32).to_be_bytes());
        for c in &self.values {
            wire::put_fixed(&mut out, c.value(), self.width)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(b"SEVR")?;
        let version = r.u16()?;
        if version != VECTOR_VERSION {
            return Err(Error::format(format!("unsupported SEVR version {version}")));
        }
        let n = r.u64()?;
        let width = r.u32()? as usize;
        if width == 0 {
            return Err(Error::format("SEVR width is zero"));
        }
        let expected = (n as u128) * width as u128;
        if expected != r.remaining() as u128 {
            return Err(Error::format(format!(
                "SEVR body is {} bytes, header implies {expected}",
                r.remaining()
            )));
        }
        let values = (0..n)
            .map(|_| {
                r.bytes(width)
                    .map(|b| Ciphertext::from_value(BigUint::from_bytes_be(b)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncryptedVector { width, values })
    }

    /// Checks that the vector was produced under `pk`.
    pub fn validate(&self, pk: &PaillierPublicKey) -> Result<()> {
        if self.width != pk.ciphertext_width() {
            return Err(Error::format(format!(
                "vector width {} does not match key width {}",
                self.width,
                pk.ciphertext_width()
            )));
        }
        if self.values.iter().any(|c| c.value() >= pk.n_squared()) {
            return Err(Error::format("vector entry exceeds N^2"));
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
