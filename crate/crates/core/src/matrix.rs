//! Dense plaintext matrices: generation, text I/O and reference matvec.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::domain("matrix must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::domain("ragged rows"));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { n_rows, n_cols, data }
    }

    /// Symmetric with entries uniform in `[-bound, bound]`, rounded to
    /// `decimals` places so that encoding is exact.
    pub fn random_symmetric<R: Rng + ?Sized>(n: usize, bound: f64, decimals: u32, rng: &mut R) -> Self {
        let scale = 10f64.powi(decimals as i32);
        let mut m = DenseMatrix {
            n_rows: n,
            n_cols: n,
            data: vec![0.0; n * n],
        };
        for i in 0..n {
            for j in i..n {
                let v = (rng.gen_range(-bound..=bound) * scale).round() / scale;
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        self.rows().map(|r| dot(r, x)).collect()
    }

    /// Parses `n_rows n_cols` followed by row-major decimals, whitespace separated.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::format(format!("missing {what}")))?
                .parse()
                .map_err(|_| Error::format(format!("bad {what}")))
        };
        let n_rows = dim("row count")?;
        let n_cols = dim("column count")?;
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::format("matrix dimensions must be positive"));
        }
        let data = tokens
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(format!("bad entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if data.len() != n_rows * n_cols {
            return Err(Error::format(format!(
                "expected {} entries, found {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { n_rows, n_cols, data })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n_rows, self.n_cols);
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit length; `None` for a zero vector.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}
