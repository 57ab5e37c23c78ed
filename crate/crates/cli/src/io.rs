//! Grid ingestion, normalization and the per-run output tracker that writes
//! the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use carma_field::{Error, LatticeField};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{CliError, Result};

const SHIFT_KEY: &str = "normalize_shift";
const SCALE_KEY: &str = "normalize_scale";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    /// Decided from the first bytes of the file.
    Auto,
    Carf,
    CarfCsv,
    /// Plain comma- or whitespace-separated matrix, one grid row per line.
    Matrix,
}

impl std::str::FromStr for GridFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "carf" => Ok(Self::Carf),
            "carf-csv" | "csv" => Ok(Self::CarfCsv),
            "matrix" => Ok(Self::Matrix),
            _ => Err(CliError::Validation(format!("unknown grid format `{s}`"))),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Reads a gridded field. A CSV without spacings takes `default_delta` on
/// every axis. Returns the field and the checksum of the file.
pub fn ingest_grid(path: &Path, format: GridFormat, default_delta: Option<f64>) -> Result<(LatticeField, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let checksum = sha256_hex(&bytes);
    let format = match format {
        GridFormat::Auto if bytes.starts_with(b"CARF") => GridFormat::Carf,
        GridFormat::Auto if bytes.starts_with(b"carf-csv") => GridFormat::CarfCsv,
        GridFormat::Auto => GridFormat::Matrix,
        f => f,
    };
    let mut field = match format {
        GridFormat::Carf => LatticeField::read_carf(bytes.as_slice())?,
        GridFormat::CarfCsv => LatticeField::read_csv(bytes.as_slice(), default_delta)?,
        GridFormat::Matrix => read_matrix(&bytes, default_delta)?,
        GridFormat::Auto => unreachable!(),
    };
    field.provenance.insert("source".into(), path.display().to_string());
    Ok((field, checksum))
}

fn read_matrix(bytes: &[u8], delta: Option<f64>) -> Result<LatticeField> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MalformedHeader("matrix file is not UTF-8 text".into()))?;
    let delta = delta.ok_or_else(|| CliError::Validation("a plain matrix needs `delta`".into()))?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = values.len();
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: cannot parse `{tok}`", rows + 1)))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(values.len()).into());
            }
            values.push(v);
        }
        let width = values.len() - before;
        if rows == 0 {
            cols = width;
        } else if width != cols {
            return Err(Error::LengthMismatch {
                expected: (rows + 1) * cols,
                found: values.len(),
            }
            .into());
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(Error::MalformedHeader("matrix file holds no values".into()).into());
    }
    Ok(LatticeField::new(vec![delta; 2], vec![rows, cols], values)?)
}

/// Affine map to sample mean zero and variance one. The map is composed
/// into the provenance so that `original = value * scale + shift`.
pub fn normalize(field: &LatticeField) -> Result<LatticeField> {
    let mean = field.mean();
    let std = field.variance().sqrt();
    if !(std > 0.0) {
        return Err(CliError::Validation("cannot normalize a field with zero sample variance".into()));
    }
    let values: Vec<f64> = field.values().iter().map(|v| (v - mean) / std).collect();
    let mut out = LatticeField::new(field.delta().to_vec(), field.n().to_vec(), values)?;
    out.provenance = field.provenance.clone();
    let (shift, scale) = transform_of(field)?;
    out.provenance.insert(SHIFT_KEY.into(), (shift + mean * scale).to_string());
    out.provenance.insert(SCALE_KEY.into(), (scale * std).to_string());
    Ok(out)
}

/// Recorded `(shift, scale)`; identity when nothing was recorded.
pub fn transform_of(field: &LatticeField) -> Result<(f64, f64)> {
    let get = |key: &str, default: f64| -> Result<f64> {
        field.provenance.get(key).map_or(Ok(default), |s| {
            s.parse()
                .map_err(|_| CliError::Validation(format!("bad `{key}` in provenance: `{s}`")))
        })
    };
    Ok((get(SHIFT_KEY, 0.0)?, get(SCALE_KEY, 1.0)?))
}

/// Undoes every recorded normalization.
pub fn restore(field: &LatticeField) -> Result<LatticeField> {
    let (shift, scale) = transform_of(field)?;
    let values = field.values().iter().map(|v| v * scale + shift).collect();
    let mut out = LatticeField::new(field.delta().to_vec(), field.n().to_vec(), values)?;
    out.provenance = field.provenance.clone();
    out.provenance.remove(SHIFT_KEY);
    out.provenance.remove(SCALE_KEY);
    Ok(out)
}

/// Reads the grid named by the `input`, `format`, `delta`, `thin` and
/// `normalize` settings and records its checksum in `run`.
pub fn load_input(settings: &Settings, run: &mut Run) -> Result<LatticeField> {
    let path = settings.path("input")?;
    let format: GridFormat = settings.parse("format")?;
    let delta = match settings.opt::<f64>("delta")? {
        Some(d) if !(d.is_finite() && d > 0.0) => {
            return Err(CliError::Validation(format!("`delta` must be positive, got {d}")))
        }
        d => d,
    };
    let (mut field, checksum) = ingest_grid(&path, format, delta)?;
    run.input(&path, checksum);
    let thin = settings.opt::<usize>("thin")?.unwrap_or(1);
    if thin > 1 {
        field = field.thin(thin)?;
    }
    if settings.flag("normalize")? {
        field = normalize(&field)?;
        let (shift, scale) = transform_of(&field)?;
        run.note("normalize_shift", shift.to_string());
        run.note("normalize_scale", scale.to_string());
    }
    Ok(field)
}

/// Collects output files of one run and writes `manifest.txt` last.
#[derive(Debug)]
pub struct Run {
    dir: PathBuf,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
    notes: BTreeMap<String, String>,
}

impl Run {
    pub fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path, checksum: String) {
        self.inputs.push((path.display().to_string(), checksum));
    }

    pub fn note(&mut self, key: &str, value: String) {
        self.notes.insert(key.to_string(), value);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> carma_field::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// Config echo, versions, notes and checksums as `key = value` lines.
    pub fn finish(self, settings: &Settings) -> Result<PathBuf> {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", settings.command);
        let _ = writeln!(out, "carma_field_version = {}", carma_field::VERSION);
        let _ = writeln!(out, "cli_version = {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in settings.entries() {
            let _ = writeln!(out, "config.{k} = {v}");
        }
        for (k, v) in &self.notes {
            let _ = writeln!(out, "note.{k} = {v}");
        }
        for (path, sum) in &self.inputs {
            let _ = writeln!(out, "input.{path} = sha256:{sum}");
        }
        for (name, sum) in &self.outputs {
            let _ = writeln!(out, "output.{name} = sha256:{sum}");
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, out).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
