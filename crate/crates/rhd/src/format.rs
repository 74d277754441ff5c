//! The plain-text dataset format.
//!
//! ```text
//! rhd v1 n=<n> d=<d> p=<p|none> bound=<float|none>
//! <label> <x_1> ... <x_d>
//! ```
//!
//! Labels are `1` or `-1`. Floats use Rust's shortest round-trip formatting,
//! so a save/load cycle is bitwise lossless.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rhd_core::data::NormBound;
use rhd_core::{Dataset, Exponent, Label};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("file ends after {found} of {expected} rows")]
    Truncated { expected: usize, found: usize },
    #[error("row {row}: {message}")]
    Invalid { row: usize, message: String },
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), FormatError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_dataset(ds, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, FormatError> {
    read_dataset(fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(ds: &Dataset, out: &mut W) -> io::Result<()> {
    let (p, bound) = match ds.norm_bound() {
        Some(nb) => (nb.p.to_string(), nb.bound.to_string()),
        None => ("none".to_string(), "none".to_string()),
    };
    writeln!(out, "rhd v1 n={} d={} p={p} bound={bound}", ds.n(), ds.d())?;
    let mut line = String::new();
    for (x, y) in ds.iter() {
        line.clear();
        line.push_str(if y == Label::Positive { "1" } else { "-1" });
        for v in x {
            write!(line, " {v}").expect("writing to a String cannot fail");
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

struct Header {
    n: usize,
    d: usize,
    bound: Option<NormBound>,
}

fn parse_header(line: &str) -> Result<Header, FormatError> {
    let err = |message: String| FormatError::Parse { line: 1, message };
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some("rhd") || tokens.next() != Some("v1") {
        return Err(err("expected header starting with \"rhd v1\"".into()));
    }
    let mut field = |name: &str| -> Result<String, FormatError> {
        let token = tokens.next().ok_or_else(|| err(format!("missing {name}=")))?;
        token
            .strip_prefix(name)
            .and_then(|t| t.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| err(format!("expected {name}=..., found {token:?}")))
    };
    let n: usize = field("n")?.parse().map_err(|_| err("n is not a count".into()))?;
    let d: usize = field("d")?.parse().map_err(|_| err("d is not a count".into()))?;
    let p = field("p")?;
    let bound = field("bound")?;
    if tokens.next().is_some() {
        return Err(err("trailing tokens after bound=".into()));
    }
    let bound = match (p.as_str(), bound.as_str()) {
        ("none", "none") => None,
        ("none", _) | (_, "none") => return Err(err("p and bound must both be set or both be none".into())),
        (p, b) => Some(NormBound {
            p: p.parse::<Exponent>().map_err(|e| err(e.to_string()))?,
            bound: b.parse().map_err(|_| err(format!("bound {b:?} is not a number")))?,
        }),
    };
    Ok(Header { n, d, bound })
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset, FormatError> {
    let mut lines = BufReader::new(input).lines();
    let header = match lines.next() {
        Some(line) => parse_header(&line?)?,
        None => return Err(FormatError::Parse { line: 1, message: "empty file".into() }),
    };
    let Header { n, d, bound } = header;

    let mut features = Vec::with_capacity(n.saturating_mul(d));
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let line_no = row + 2;
        let line = match lines.next() {
            Some(line) => line?,
            None => return Err(FormatError::Truncated { expected: n, found: row }),
        };
        let mut tokens = line.split_ascii_whitespace();
        let label = tokens.next().ok_or(FormatError::Truncated { expected: n, found: row })?;
        let label = match label {
            "1" | "+1" => Label::Positive,
            "-1" => Label::Negative,
            other => {
                return Err(FormatError::Invalid { row, message: format!("label must be 1 or -1, got {other}") })
            }
        };
        let start = features.len();
        for token in tokens {
            let v: f64 = token.parse().map_err(|_| FormatError::Parse {
                line: line_no,
                message: format!("{token:?} is not a number"),
            })?;
            features.push(v);
        }
        let found = features.len() - start;
        if found != d {
            return Err(FormatError::Parse { line: line_no, message: format!("expected {d} features, found {found}") });
        }
        labels.push(label);
    }
    for (offset, line) in lines.enumerate() {
        if !line?.trim().is_empty() {
            return Err(FormatError::Parse { line: n + 2 + offset, message: "rows beyond the declared n".into() });
        }
    }

    let ds = Dataset::new(features, d, labels).map_err(|e| FormatError::Invalid { row: 0, message: e.to_string() })?;
    match bound {
        Some(b) => {
            let violating = ds.rows().position(|x| rhd_core::geometry::lp_norm(x, b.p) > b.bound + 1e-12);
            match violating {
                Some(row) => Err(FormatError::Invalid {
                    row,
                    message: format!("exceeds the declared l{} bound {}", b.p, b.bound),
                }),
                None => ds.with_norm_bound(b).map_err(|e| FormatError::Invalid { row: 0, message: e.to_string() }),
            }
        }
        None => Ok(ds),
    }
}
