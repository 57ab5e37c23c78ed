//! Flat `key = value` configuration shared by every subcommand. Each key is
//! also a command-line flag (`noise_variance` becomes `--noise-variance`);
//! flags override the file, the file overrides built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{CliError, Result};

/// One configuration key with its default and help text.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

impl Key {
    pub fn flag(&self) -> String {
        self.name.replace('_', "-")
    }
}

/// Parses the text of a configuration file. Blank lines and `#` comments
/// are skipped; a key may appear only once.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Validation(format!("config line {}: empty key", no + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::Validation(format!("config line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(out)
}

/// Resolved settings of one subcommand run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Layers defaults, the config file and flag overrides. Keys not in
    /// `keys` are rejected so that typos surface as validation errors.
    pub fn resolve(
        command: &str,
        keys: &[Key],
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in keys {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), d.to_string());
            }
        }
        for (source, map) in [("config file", file), ("flags", flags)] {
            for (k, v) in map {
                if !keys.iter().any(|key| key.name == k) {
                    return Err(CliError::Validation(format!("unknown key `{k}` in {source} for `{command}`")));
                }
                values.insert(k.clone(), v.clone());
            }
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn from_pairs(command: &str, pairs: &[(&str, &str)]) -> Self {
        Self {
            command: command.to_string(),
            values: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn has(&self, name: &str) -> bool {
        self.values.get(name).is_some_and(|v| !v.is_empty())
    }

    pub fn str(&self, name: &str) -> Result<&str> {
        self.values
            .get(name)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::Validation(format!("`{name}` is required for `{}`", self.command)))
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<T> {
        let raw = self.str(name)?;
        raw.parse()
            .map_err(|_| CliError::Validation(format!("cannot parse `{name} = {raw}`")))
    }

    pub fn opt<T: FromStr>(&self, name: &str) -> Result<Option<T>> {
        if self.has(name) {
            self.parse(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn positive(&self, name: &str) -> Result<f64> {
        let v: f64 = self.parse(name)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Validation(format!("`{name}` must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn count(&self, name: &str) -> Result<usize> {
        let v: usize = self.parse(name)?;
        if v == 0 {
            return Err(CliError::Validation(format!("`{name}` must be at least 1")));
        }
        Ok(v)
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.str(name)? {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Validation(format!("`{name}` must be true or false, got `{other}`"))),
        }
    }

    pub fn path(&self, name: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.str(name)?))
    }

    pub fn list(&self, name: &str) -> Result<Vec<String>> {
        Ok(self
            .str(name)?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect())
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        self.list(name)?
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Validation(format!("`{name}`: cannot parse `{s}`")))
            })
            .collect()
    }

    /// Eigenvalues per axis: axes separated by `;`, values by `,`, complex
    /// values written as `-0.5+1.2i`.
    pub fn eigenvalues(&self, name: &str) -> Result<Vec<Vec<Complex64>>> {
        self.str(name)?
            .split(';')
            .map(|axis| {
                axis.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_complex(s).ok_or_else(|| CliError::Validation(format!("`{name}`: cannot parse `{s}`"))))
                    .collect()
            })
            .collect()
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        let dir = self.path("output")?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // the sign that starts the imaginary part, skipping a leading sign and exponents
    let split = body
        .char_indices()
        .filter(|&(k, c)| k > 0 && (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
        .map(|(k, _)| k)
        .last();
    let (re, im) = match split {
        Some(k) => (body[..k].parse().ok()?, body[k..].parse().ok()?),
        None => (0.0, body.parse().ok()?),
    };
    Some(Complex64::new(re, im))
}

pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}
