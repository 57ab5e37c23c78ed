//! Fields sampled on the lattice `{Δ, 2Δ, ..., NΔ}^d` and their file formats.
//!
//! Values are stored row-major with the last axis varying fastest; the value at
//! multi-index `(i_1, ..., i_d)` (zero-based) sits at the point `((i_1 + 1) Δ_1, ...)`.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CARF";
const VERSION: u8 = 1;
const CSV_TAG: &str = "carf-csv";

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    delta: Vec<f64>,
    n: Vec<usize>,
    values: Vec<f64>,
    /// Free-form metadata such as seed, algorithm and truncation.
    pub provenance: BTreeMap<String, String>,
}

impl LatticeField {
    pub fn new(delta: Vec<f64>, n: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if n.is_empty() || n.len() != delta.len() {
            return Err(Error::InvalidInput(format!(
                "field needs one spacing per axis ({} spacings, {} axes)",
                delta.len(),
                n.len()
            )));
        }
        if n.contains(&0) {
            return Err(Error::InvalidInput("every axis needs at least one point".into()));
        }
        if delta.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidInput("grid spacings must be positive".into()));
        }
        let expected: usize = n.iter().product();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(pos));
        }
        Ok(Self {
            delta,
            n,
            values,
            provenance: BTreeMap::new(),
        })
    }

    /// Field with the same spacing and size on every axis.
    pub fn cubic(d: usize, delta: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![delta; d], vec![n; d], values)
    }

    pub fn d(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.d()];
        for i in (0..self.d().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.n[i + 1];
        }
        strides
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let flat = index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum::<usize>();
        self.values[flat]
    }

    /// Keeps every `factor`-th point per axis (indices `factor - 1, 2 factor - 1, ...`),
    /// so the coarse grid is again of the form `{Δ', 2Δ', ...}` with `Δ' = factor Δ`.
    pub fn thin(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidInput("thinning factor must be positive".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let n: Vec<usize> = self.n.iter().map(|&ni| ni / factor).collect();
        if n.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "thinning by {factor} leaves no points on some axis"
            )));
        }
        let strides = self.strides();
        let total: usize = n.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.d()];
        for _ in 0..total {
            let flat: usize = idx
                .iter()
                .zip(&strides)
                .map(|(&i, &s)| (factor * (i + 1) - 1) * s)
                .sum();
            values.push(self.values[flat]);
            advance(&mut idx, &n);
        }
        let mut out = Self::new(self.delta.iter().map(|d| d * factor as f64).collect(), n, values)?;
        out.provenance = self.provenance.clone();
        out.provenance.insert("thinning".into(), factor.to_string());
        Ok(out)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample variance with denominator `n`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64
    }

    /// Binary layout: `CARF`, version byte, `d` as one byte, per axis `Δ` (f64 LE) and
    /// `n` (u64 LE), then the values as f64 LE.
    pub fn write_carf<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, self.d() as u8])?;
        for (&delta, &n) in self.delta.iter().zip(&self.n) {
            w.write_all(&delta.to_le_bytes())?;
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_carf<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 6];
        read_exact_or(&mut r, &mut head, "file shorter than the fixed header")?;
        if &head[..4] != MAGIC {
            return Err(Error::MalformedHeader("missing CARF magic bytes".into()));
        }
        if head[4] != VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {}", head[4])));
        }
        let d = head[5] as usize;
        if d == 0 {
            return Err(Error::MalformedHeader("dimension must be positive".into()));
        }
        let mut delta = Vec::with_capacity(d);
        let mut n = Vec::with_capacity(d);
        for _ in 0..d {
            let mut b = [0u8; 16];
            read_exact_or(&mut r, &mut b, "axis description truncated")?;
            delta.push(f64::from_le_bytes(b[..8].try_into().unwrap()));
            let ni = u64::from_le_bytes(b[8..].try_into().unwrap());
            n.push(usize::try_from(ni).map_err(|_| Error::MalformedHeader("axis too long".into()))?);
        }
        if delta.iter().any(|&x| !(x.is_finite() && x > 0.0)) || n.contains(&0) {
            return Err(Error::MalformedHeader("invalid axis description".into()));
        }
        let expected = n
            .iter()
            .try_fold(1usize, |acc, &ni| acc.checked_mul(ni))
            .ok_or_else(|| Error::MalformedHeader("grid size overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != expected * 8 {
            return Err(Error::LengthMismatch {
                expected,
                found: bytes.len() / 8,
            });
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(delta, n, values)
    }

    /// Text layout: header `carf-csv,d,n_1,...,n_d,Δ_1,...,Δ_d`, then one value per line.
    /// Values use the shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        write!(w, "{CSV_TAG},{}", self.d())?;
        for n in &self.n {
            write!(w, ",{n}")?;
        }
        for delta in &self.delta {
            write!(w, ",{delta}")?;
        }
        writeln!(w)?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the text layout; the spacings may be omitted from the header, in which
    /// case `default_delta` is used on every axis.
    pub fn read_csv<R: BufRead>(r: R, default_delta: Option<f64>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("empty input".into()))??;
        let fields: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if fields.first() != Some(&CSV_TAG) || fields.len() < 3 {
            return Err(Error::MalformedHeader(format!("expected `{CSV_TAG},d,...` header")));
        }
        let d: usize = fields[1]
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("bad dimension `{}`", fields[1])))?;
        if d == 0 || (fields.len() != 2 + d && fields.len() != 2 + 2 * d) {
            return Err(Error::MalformedHeader(format!(
                "header has {} fields, expected {} or {}",
                fields.len(),
                2 + d,
                2 + 2 * d
            )));
        }
        let n = fields[2..2 + d]
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::MalformedHeader(format!("bad axis size `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let delta = if fields.len() == 2 + 2 * d {
            fields[2 + d..]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::MalformedHeader(format!("bad spacing `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let delta = default_delta.ok_or_else(|| {
                Error::MalformedHeader("header has no spacings and no default was given".into())
            })?;
            vec![delta; d]
        };
        if delta.iter().any(|&x| !(x.is_finite() && x > 0.0)) || n.contains(&0) {
            return Err(Error::MalformedHeader("invalid axis description".into()));
        }
        let expected: usize = n.iter().product();
        let mut values = Vec::with_capacity(expected);
        for line in lines {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            let v: f64 = s
                .parse()
                .map_err(|_| Error::InvalidInput(format!("cannot parse value `{s}`")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(values.len()));
            }
            values.push(v);
        }
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        Self::new(delta, n, values)
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], msg: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::MalformedHeader(msg.into()),
        _ => Error::Io(e),
    })
}

/// Odometer step over a row-major multi-index; returns false after the last index.
pub(crate) fn advance(idx: &mut [usize], n: &[usize]) -> bool {
    for axis in (0..idx.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < n[axis] {
            return true;
        }
        idx[axis] = 0;
    }
    false
}
