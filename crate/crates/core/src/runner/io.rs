//! Field files, spectral checkpoints and CSV helpers.
//!
//! A field file is a 64-byte ASCII header `CLFIELD1 n=<n> c=<components> t=<time>`
//! padded with spaces and terminated by `\n`, followed by the samples as
//! little-endian f64 in row-major order, one component after the other.
//! A checkpoint uses a 256-byte header starting with `CLSPEC1` followed by
//! interleaved real/imaginary little-endian f64 coefficients.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::FitReport;
use crate::error::{Error, Result};
use crate::spectral::{GridField, SpectralField};

pub const FIELD_MAGIC: &str = "CLFIELD1";
pub const FIELD_HEADER_LEN: usize = 64;
pub const SPEC_MAGIC: &str = "CLSPEC1";
pub const SPEC_HEADER_LEN: usize = 256;

fn padded_header(text: String, len: usize) -> Result<Vec<u8>> {
    if text.len() + 1 > len {
        return Err(Error::Internal(format!(
            "header '{text}' exceeds {len} bytes"
        )));
    }
    let mut bytes = text.into_bytes();
    bytes.resize(len - 1, b' ');
    bytes.push(b'\n');
    Ok(bytes)
}

fn header_fields(header: &[u8], magic: &str) -> Result<Vec<(String, String)>> {
    let text =
        std::str::from_utf8(header).map_err(|_| Error::Parse("header is not ASCII".into()))?;
    let mut words = text.split_whitespace();
    if words.next() != Some(magic) {
        return Err(Error::Parse(format!("missing {magic} magic")));
    }
    words
        .map(|w| {
            w.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("bad header entry '{w}'")))
        })
        .collect()
}

fn lookup<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("header lacks '{key}'")))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("bad header value {key}={v}")))
}

fn read_f64s(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() != 8 * count {
        return Err(Error::Parse(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            8 * count
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Writes grid samples at time `t`.
pub fn write_field(path: &Path, field: &GridField, t: f64) -> Result<()> {
    let mut out = padded_header(
        format!("{FIELD_MAGIC} n={} c={} t={t}", field.n(), field.ncomp()),
        FIELD_HEADER_LEN,
    )?;
    out.reserve(8 * field.ncomp() * field.n() * field.n());
    for comp in field.components() {
        for v in comp {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Reads a field file; returns the samples and their time.
pub fn read_field(path: &Path) -> Result<(GridField, f64)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < FIELD_HEADER_LEN {
        return Err(Error::Parse("field file shorter than its header".into()));
    }
    let fields = header_fields(&bytes[..FIELD_HEADER_LEN], FIELD_MAGIC)?;
    let n: usize = parse_num("n", lookup(&fields, "n")?)?;
    let c: usize = parse_num("c", lookup(&fields, "c")?)?;
    let t: f64 = parse_num("t", lookup(&fields, "t")?)?;
    if !(1..=2).contains(&c) || n == 0 {
        return Err(Error::Parse(format!("unsupported shape n={n} c={c}")));
    }
    let data = read_f64s(&bytes[FIELD_HEADER_LEN..], c * n * n)?;
    let components = data.chunks_exact(n * n).map(|s| s.to_vec()).collect();
    Ok((GridField::new(n, components)?, t))
}

/// Restartable run state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub omega: SpectralField,
    pub t: f64,
    pub step: usize,
    /// Current radius fit as `(radius, alpha, beta, log_gamma)`.
    pub fit: Option<(f64, f64, f64, f64)>,
}

impl Checkpoint {
    pub fn fit_report(&self) -> Option<FitReport> {
        self.fit.map(|(radius, alpha, beta, log_gamma)| FitReport {
            alpha,
            beta,
            log_gamma,
            radius,
            window: (0, 0),
            discrepancies: Vec::new(),
            max_scaled_discrepancy: 0.0,
        })
    }
}

pub fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let fit = match cp.fit {
        Some((r, a, b, c)) => format!("{r},{a},{b},{c}"),
        None => "none".into(),
    };
    let mut out = padded_header(
        format!(
            "{SPEC_MAGIC} n={} c={} t={} step={} fit={fit}",
            cp.omega.n(),
            cp.omega.ncomp(),
            cp.t,
            cp.step
        ),
        SPEC_HEADER_LEN,
    )?;
    for comp in cp.omega.components() {
        for v in comp {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < SPEC_HEADER_LEN {
        return Err(Error::Parse("checkpoint shorter than its header".into()));
    }
    let fields = header_fields(&bytes[..SPEC_HEADER_LEN], SPEC_MAGIC)?;
    let n: usize = parse_num("n", lookup(&fields, "n")?)?;
    let c: usize = parse_num("c", lookup(&fields, "c")?)?;
    let t: f64 = parse_num("t", lookup(&fields, "t")?)?;
    let step: usize = parse_num("step", lookup(&fields, "step")?)?;
    let fit = match lookup(&fields, "fit")? {
        "none" => None,
        s => {
            let v: Vec<f64> = s
                .split(',')
                .map(|x| parse_num::<f64>("fit", x))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Parse("fit needs four values".into()));
            }
            Some((v[0], v[1], v[2], v[3]))
        }
    };
    if !(1..=2).contains(&c) || n == 0 {
        return Err(Error::Parse(format!("unsupported shape n={n} c={c}")));
    }
    let data = read_f64s(&bytes[SPEC_HEADER_LEN..], 2 * c * n * n)?;
    let components = data
        .chunks_exact(2 * n * n)
        .map(|s| {
            s.chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect()
        })
        .collect();
    Ok(Checkpoint {
        omega: SpectralField::new(n, components)?,
        t,
        step,
        fit,
    })
}

/// Minimal CSV table: a header row and numeric or text cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses CSV text; lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for l in lines {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row '{l}' has {} cells, header {}",
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column '{name}'")))
    }

    /// Numeric column; `none`/empty cells are an error.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse()
                    .map_err(|_| Error::Parse(format!("bad number '{}'", r[c])))
            })
            .collect()
    }
}

/// Round-trip text form of an f64.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}
