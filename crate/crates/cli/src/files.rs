//! Data-directory layout for the owner and user side, plus the small text
//! and binary formats that only the CLI needs.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use seceig_core::codec::CodecParams;
use seceig_core::{EncryptedVector, PaillierPrivateKey, PaillierPublicKey};

use crate::error::{CliError, CliResult, Context};

pub const RITZ_MAGIC: &[u8; 4] = b"RVEC";
pub const RITZ_VERSION: u16 = 1;

pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self) -> CliResult<()> {
        fs::create_dir_all(&self.root).context(format!("creating {}", self.root.display()))
    }

    pub fn public_key_path(&self) -> PathBuf {
        self.root.join("pk.key")
    }

    pub fn private_key_path(&self) -> PathBuf {
        self.root.join("sk.key")
    }

    pub fn codec_path(&self) -> PathBuf {
        self.root.join("codec.cprm")
    }

    pub fn encrypted_b0_path(&self) -> PathBuf {
        self.root.join("b0.sevr")
    }

    pub fn owner_path(&self) -> PathBuf {
        self.root.join("owner.txt")
    }

    pub fn matrix_path(&self, matrix_id: u64) -> PathBuf {
        self.root.join(format!("matrix-{matrix_id}.seig"))
    }

    fn read(&self, path: &Path, hint: &str) -> CliResult<Vec<u8>> {
        fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}; {hint}", path.display())))
    }

    pub fn public_key(&self) -> CliResult<PaillierPublicKey> {
        let path = self.public_key_path();
        let bytes = self.read(&path, "run `seceig keygen` first")?;
        PaillierPublicKey::from_bytes(&bytes).context(path.display())
    }

    pub fn private_key(&self) -> CliResult<PaillierPrivateKey> {
        let path = self.private_key_path();
        let bytes = self.read(&path, "run `seceig keygen` first")?;
        PaillierPrivateKey::from_bytes(&bytes).context(path.display())
    }

    pub fn codec(&self) -> CliResult<CodecParams> {
        let path = self.codec_path();
        let bytes = self.read(&path, "run `seceig keygen --n N` first")?;
        CodecParams::from_bytes(&bytes).context(path.display())
    }

    pub fn encrypted_b0(&self) -> CliResult<EncryptedVector> {
        let path = self.encrypted_b0_path();
        self.read(&path, "run `seceig keygen --n N` first")?;
        EncryptedVector::read(&path).context(path.display())
    }

    pub fn owner(&self) -> CliResult<OwnerFile> {
        let path = self.owner_path();
        let bytes = self.read(&path, "run `seceig keygen --n N` first")?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::config(format!("{} is not UTF-8", path.display())))?;
        OwnerFile::parse(&text).context(path.display())
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        fs::write(path, bytes).context(format!("writing {}", path.display()))
    }
}

/// Owner secrets kept next to the keys: `b0` and, after `collect`, `Ã b0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnerFile {
    pub value_bound: f64,
    pub b0: Vec<BigUint>,
    pub ab0: Option<Vec<BigInt>>,
}

impl OwnerFile {
    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(" ");
        let mut out = format!(
            "n {}\nvalue_bound {}\nb0 {}\n",
            self.b0.len(),
            self.value_bound,
            join(self.b0.iter().map(|v| v.to_string()).collect())
        );
        if let Some(ab0) = &self.ab0 {
            out.push_str(&format!("ab0 {}\n", join(ab0.iter().map(|v| v.to_string()).collect())));
        }
        out
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut n = None;
        let mut value_bound = None;
        let mut b0 = None;
        let mut ab0 = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let bad = |what: &str| CliError::config(format!("bad {what} line in owner file"));
            match key {
                "n" => n = Some(rest.first().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad("n"))?),
                "value_bound" => {
                    value_bound = Some(rest.first().and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("value_bound"))?)
                }
                "b0" => b0 = Some(rest.iter().map(|s| s.parse::<BigUint>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("b0"))?),
                "ab0" => ab0 = Some(rest.iter().map(|s| s.parse::<BigInt>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("ab0"))?),
                other => return Err(CliError::config(format!("unknown owner file key {other:?}"))),
            }
        }
        let (n, value_bound, b0) = match (n, value_bound, b0) {
            (Some(n), Some(v), Some(b)) => (n, v, b),
            _ => return Err(CliError::config("owner file needs n, value_bound and b0")),
        };
        if b0.len() != n || ab0.as_ref().is_some_and(|a: &Vec<BigInt>| a.len() != n) {
            return Err(CliError::config(format!("owner file vectors do not have length {n}")));
        }
        Ok(OwnerFile { value_bound, b0, ab0 })
    }
}

/// `RVEC | u16 version | u64 n | n × f64`, all big-endian.
pub fn ritz_vector_bytes(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 8 * v.len());
    out.extend_from_slice(RITZ_MAGIC);
    out.extend_from_slice(&RITZ_VERSION.to_be_bytes());
    out.extend_from_slice(&(v.len() as u64).to_be_bytes());
    for x in v {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out
}

#[cfg(test)]
pub fn parse_ritz_vector(bytes: &[u8]) -> CliResult<Vec<f64>> {
    let bad = || CliError::config("malformed Ritz vector file");
    if bytes.len() < 14 || &bytes[..4] != RITZ_MAGIC {
        return Err(bad());
    }
    if u16::from_be_bytes([bytes[4], bytes[5]]) != RITZ_VERSION {
        return Err(bad());
    }
    let n = u64::from_be_bytes(bytes[6..14].try_into().map_err(|_| bad())?) as usize;
    let body = &bytes[14..];
    if body.len() != n * 8 {
        return Err(bad());
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_be_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
