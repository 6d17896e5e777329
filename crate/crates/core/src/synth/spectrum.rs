//! `Spectrum2D` and its CSV file format.
//!
//! ```text
//! # magnon-cavity-lab spectrum v1
//! # shape=201x801
//! # source=synthetic
//! field_mT,freq_GHz,s21_db
//! 0.0000000000000000e0,5.2999999999999998e0,-7.3213...e1
//! ...
//! ```
//!
//! Rows are field-major. Every number carries 17 significant digits. The
//! mT and GHz columns are written by shifting the decimal exponent of the
//! exact SI value, and read back by shifting it again before parsing, so no
//! binary multiplication by 1e3 or 1e-9 is involved and the round trip is
//! bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const FILE_HEADER: &str = "# magnon-cavity-lab spectrum v1";
pub const COLUMNS: [&str; 3] = ["field_mT", "freq_GHz", "s21_db"];
const SHAPE_KEY: &str = "shape";

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed spectrum: {0}")]
    Structure(String),
}

/// |S21|² in dB sampled on a rectangular (field, frequency) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    /// Applied field, T.
    pub field_axis: Vec<f64>,
    /// Probe frequency, Hz.
    pub freq_axis: Vec<f64>,
    /// Row-major `field × frequency` matrix of `10·log10|S21|²`.
    pub power_db: Vec<f64>,
    /// Provenance (`source`, `generator`, `scene`, ...).
    pub meta: BTreeMap<String, String>,
}

impl Spectrum2D {
    pub fn new(
        field_axis: Vec<f64>,
        freq_axis: Vec<f64>,
        power_db: Vec<f64>,
        meta: BTreeMap<String, String>,
    ) -> Result<Self, SpectrumError> {
        let s = Self {
            field_axis,
            freq_axis,
            power_db,
            meta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if self.field_axis.is_empty() || self.freq_axis.is_empty() {
            return Err(SpectrumError::Structure("empty axis".into()));
        }
        if self.power_db.len() != self.field_axis.len() * self.freq_axis.len() {
            return Err(SpectrumError::Structure(format!(
                "{} power values for a {}x{} grid",
                self.power_db.len(),
                self.field_axis.len(),
                self.freq_axis.len()
            )));
        }
        if let Some(i) = self.power_db.iter().position(|p| !p.is_finite()) {
            return Err(SpectrumError::Structure(format!(
                "non-finite power at flat index {i}"
            )));
        }
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(['=', '\n', '\r']) || k == SHAPE_KEY {
                return Err(SpectrumError::Structure(format!("invalid metadata key {k:?}")));
            }
            if v.contains(['\n', '\r']) {
                return Err(SpectrumError::Structure(format!(
                    "metadata value for {k:?} contains a line break"
                )));
            }
        }
        Ok(())
    }

    pub fn n_field(&self) -> usize {
        self.field_axis.len()
    }

    pub fn n_freq(&self) -> usize {
        self.freq_axis.len()
    }

    /// One constant-field slice, dB.
    pub fn row(&self, field_index: usize) -> &[f64] {
        let n = self.n_freq();
        &self.power_db[field_index * n..(field_index + 1) * n]
    }

    pub fn at(&self, field_index: usize, freq_index: usize) -> f64 {
        self.power_db[field_index * self.n_freq() + freq_index]
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), SpectrumError> {
        self.validate()?;
        let mut w = BufWriter::new(w);
        writeln!(w, "{FILE_HEADER}")?;
        writeln!(w, "# {SHAPE_KEY}={}x{}", self.n_field(), self.n_freq())?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "{}", COLUMNS.join(","))?;
        let freq_col: Vec<String> = self.freq_axis.iter().map(|&f| format_shifted(f, -9)).collect();
        let mut line = String::with_capacity(80);
        for (i, &b) in self.field_axis.iter().enumerate() {
            let field = format_shifted(b, 3);
            for (j, f) in freq_col.iter().enumerate() {
                line.clear();
                let _ = write!(line, "{field},{f},{:.16e}", self.at(i, j));
                writeln!(w, "{line}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, SpectrumError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (n, first) = lines.next().ok_or(SpectrumError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        if first?.trim_end() != FILE_HEADER {
            return Err(SpectrumError::Parse {
                line: n,
                message: format!("expected header `{FILE_HEADER}`"),
            });
        }

        let mut meta = BTreeMap::new();
        let mut shape: Option<(usize, usize)> = None;
        let mut header_seen = false;
        for (n, line) in lines.by_ref() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.strip_prefix(' ').unwrap_or(rest);
                let (k, v) = rest.split_once('=').ok_or_else(|| SpectrumError::Parse {
                    line: n,
                    message: "metadata line must be `# key=value`".into(),
                })?;
                if k == SHAPE_KEY {
                    shape = Some(parse_shape(v).ok_or_else(|| SpectrumError::Parse {
                        line: n,
                        message: format!("bad shape `{v}`"),
                    })?);
                } else {
                    meta.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            check_columns(&line, n)?;
            header_seen = true;
            break;
        }
        if !header_seen {
            return Err(SpectrumError::Parse {
                line: 0,
                message: format!("missing column header `{}`", COLUMNS.join(",")),
            });
        }

        let mut field_axis: Vec<f64> = Vec::new();
        let mut freq_axis: Vec<f64> = Vec::new();
        let mut power_db: Vec<f64> = Vec::new();
        if let Some((nf, nq)) = shape {
            field_axis.reserve(nf);
            freq_axis.reserve(nq);
            power_db.reserve(nf * nq);
        }
        let mut col = 0usize;
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str, shift: i32| -> Result<f64, SpectrumError> {
                let tok = parts.next().ok_or_else(|| SpectrumError::Parse {
                    line: n,
                    message: format!("missing value for `{name}`"),
                })?;
                parse_shifted(tok.trim(), shift).ok_or_else(|| SpectrumError::Parse {
                    line: n,
                    message: format!("bad number `{tok}` for `{name}`"),
                })
            };
            let b = field(COLUMNS[0], 3)?;
            let f = field(COLUMNS[1], -9)?;
            let p = field(COLUMNS[2], 0)?;
            if parts.next().is_some() {
                return Err(SpectrumError::Parse {
                    line: n,
                    message: "too many columns".into(),
                });
            }

            if field_axis.last() != Some(&b) {
                if !field_axis.is_empty() && col != freq_axis.len() {
                    return Err(SpectrumError::Structure(format!(
                        "line {n}: field row {} has {col} frequencies, expected {}",
                        field_axis.len() - 1,
                        freq_axis.len()
                    )));
                }
                field_axis.push(b);
                col = 0;
            }
            if field_axis.len() == 1 {
                freq_axis.push(f);
            } else if freq_axis.get(col) != Some(&f) {
                return Err(SpectrumError::Structure(format!(
                    "line {n}: frequency column differs from the first field row"
                )));
            }
            power_db.push(p);
            col += 1;
        }
        if field_axis.is_empty() {
            return Err(SpectrumError::Structure("no data rows".into()));
        }
        if col != freq_axis.len() {
            return Err(SpectrumError::Structure(format!(
                "last field row has {col} frequencies, expected {}",
                freq_axis.len()
            )));
        }
        if let Some((nf, nq)) = shape {
            if (nf, nq) != (field_axis.len(), freq_axis.len()) {
                return Err(SpectrumError::Structure(format!(
                    "header declares {nf}x{nq}, data is {}x{}",
                    field_axis.len(),
                    freq_axis.len()
                )));
            }
        }
        Self::new(field_axis, freq_axis, power_db, meta)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), SpectrumError> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, SpectrumError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn check_columns(line: &str, n: usize) -> Result<(), SpectrumError> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    for want in COLUMNS {
        if !cols.contains(&want) {
            return Err(SpectrumError::Parse {
                line: n,
                message: format!("missing column `{want}`"),
            });
        }
    }
    if cols != COLUMNS {
        return Err(SpectrumError::Parse {
            line: n,
            message: format!("columns must be exactly `{}`", COLUMNS.join(",")),
        });
    }
    Ok(())
}

fn parse_shape(v: &str) -> Option<(usize, usize)> {
    let (a, b) = v.split_once('x')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Writes `x·10^shift` with 17 significant digits by editing the exponent of
/// the decimal representation of `x`.
pub(crate) fn format_shifted(x: f64, shift: i32) -> String {
    let s = format!("{x:.16e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let e: i32 = exp.parse().expect("exponent from float formatting");
            format!("{mant}e{}", e + shift)
        }
        None => s,
    }
}

/// Inverse of [`format_shifted`]: parses `s` and returns `s·10^(−shift)`
/// with a single correctly rounded conversion.
pub(crate) fn parse_shifted(s: &str, shift: i32) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    if mant.is_empty() || !mant.bytes().all(|c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+')) {
        return None;
    }
    let v: f64 = format!("{mant}e{}", exp - shift).parse().ok()?;
    v.is_finite().then_some(v)
}
