//! The `.nfield` format: five ASCII header lines (magic, dimension, counts,
//! origin, spacing) followed by the node values as little-endian `f64`, row-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

pub const NFIELD_MAGIC: &str = "NFIELD 1";

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Writes a field. `f64` values in the header use the shortest round-trip
/// representation, so grids are reproduced exactly.
pub fn write_nfield<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let g = field.grid();
    let dim = g.dim();
    let mut w = BufWriter::new(out);
    writeln!(w, "{NFIELD_MAGIC}")?;
    writeln!(w, "{dim}")?;
    writeln!(w, "{}", join(&g.counts()[..dim]))?;
    writeln!(w, "{}", join(&g.origin()[..dim]))?;
    writeln!(w, "{}", g.spacing())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn header_line<R: BufRead>(r: &mut R, what: &str) -> Result<String> {
    let mut s = String::new();
    if r.read_line(&mut s)? == 0 {
        return Err(Error::Format(format!("missing {what} line")));
    }
    Ok(s.trim_end_matches(['\n', '\r']).to_string())
}

fn parse_list<T: std::str::FromStr>(line: &str, n: usize, what: &str) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("cannot parse {what}: '{line}'")))?;
    if v.len() != n {
        return Err(Error::Format(format!("{what} needs {n} entries, got {}", v.len())));
    }
    Ok(v)
}

pub fn read_nfield<R: Read>(input: R, label: &str) -> Result<ScalarField> {
    let mut r = BufReader::new(input);
    let magic = header_line(&mut r, "magic")?;
    if magic != NFIELD_MAGIC {
        return Err(Error::Format(format!("bad magic '{magic}'")));
    }
    let dim: usize = header_line(&mut r, "dimension")?
        .trim()
        .parse()
        .map_err(|_| Error::Format("cannot parse dimension".into()))?;
    if dim != 2 && dim != 3 {
        return Err(Error::Format(format!("dimension {dim} not in {{2, 3}}")));
    }
    let counts: Vec<usize> = parse_list(&header_line(&mut r, "counts")?, dim, "counts")?;
    let origin: Vec<f64> = parse_list(&header_line(&mut r, "origin")?, dim, "origin")?;
    let spacing: Vec<f64> = parse_list(&header_line(&mut r, "spacing")?, 1, "spacing")?;
    let grid = GridSpec::new(dim, &origin, spacing[0], &counts)?;
    let n = grid.node_count();
    let mut bytes = Vec::with_capacity(n * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            n * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ScalarField::new(grid, values, label)
}

impl ScalarField {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_nfield(self, File::create(path)?)
    }

    /// Reads a field file; the label is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<ScalarField> {
        let path = path.as_ref();
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        read_nfield(File::open(path)?, &label)
    }
}
