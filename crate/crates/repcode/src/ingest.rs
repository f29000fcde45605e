//! Counts-file interchange format, per-qubit statistics, ones-count
//! histograms and crossover analysis.
//!
//! Counts file grammar (UTF-8, LF line endings):
//!
//! ```text
//! #repcode v1 d=<int> E=<0|1> run=<label> source=<sim|device>
//! <bitstring> <count>
//! ...
//! ```
//!
//! Keys are written in lexicographic order, so serialization is canonical:
//! parse followed by write reproduces the input byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::circuit::outcome_string;
use crate::sampling::CountsTable;
use crate::{Error, Result};

/// Provenance tag carried in the counts-file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sim,
    Device,
}

impl Source {
    pub fn label(&self) -> &'static str {
        match self {
            Source::Sim => "sim",
            Source::Device => "device",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(Source::Sim),
            "device" => Ok(Source::Device),
            other => Err(Error::InvalidArgument(format!("unknown source '{other}'"))),
        }
    }
}

/// Parsed header of a counts file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsHeader {
    pub d: usize,
    pub encoded: bool,
    pub run_label: String,
    pub source: Source,
}

/// Serializes a counts table in the canonical file format.
pub fn serialize_counts(table: &CountsTable, source: Source) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "#repcode v1 d={} E={} run={} source={}",
        table.d,
        table.encoded as u8,
        table.run_index,
        source.label()
    )
    .unwrap();
    for (key, count) in &table.counts {
        writeln!(out, "{key} {count}").unwrap();
    }
    out
}

pub fn write_counts(table: &CountsTable, source: Source, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_counts(table, source))?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn header_field<'a>(
    fields: &'a BTreeMap<&str, &str>,
    name: &str,
    path: &Path,
) -> Result<&'a str> {
    fields
        .get(name)
        .copied()
        .ok_or_else(|| parse_error(path, 1, format!("header missing field '{name}'")))
}

fn parse_header(line: &str, path: &Path) -> Result<CountsHeader> {
    let rest = line
        .strip_prefix("#repcode v1 ")
        .ok_or_else(|| parse_error(path, 1, "expected '#repcode v1' header"))?;
    let mut fields = BTreeMap::new();
    for token in rest.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_error(path, 1, format!("malformed header token '{token}'")))?;
        fields.insert(key, value);
    }
    let d: usize = header_field(&fields, "d", path)?
        .parse()
        .map_err(|_| parse_error(path, 1, "d is not an integer"))?;
    let encoded = match header_field(&fields, "E", path)? {
        "0" => false,
        "1" => true,
        other => return Err(parse_error(path, 1, format!("E must be 0 or 1, got '{other}'"))),
    };
    let run_label = header_field(&fields, "run", path)?.to_string();
    let source: Source = header_field(&fields, "source", path)?.parse()?;
    Ok(CountsHeader {
        d,
        encoded,
        run_label,
        source,
    })
}

/// Parses a counts file. Every malformed line yields a located error; no
/// silent coercion.
pub fn parse_counts(path: &Path) -> Result<(CountsTable, CountsHeader)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let header = parse_header(first, path)?;
    let expected_len = 2 * header.d;

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, count_str) = line
            .split_once(' ')
            .ok_or_else(|| parse_error(path, line_no, "expected '<bitstring> <count>'"))?;
        if key.len() != expected_len || !key.chars().all(|c| c == '0' || c == '1') {
            return Err(parse_error(
                path,
                line_no,
                format!("key '{key}' is not a {expected_len}-bit string"),
            ));
        }
        let count: u64 = count_str
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad count '{count_str}'")))?;
        if count == 0 {
            return Err(parse_error(path, line_no, "counts must be positive"));
        }
        if counts.insert(key.to_string(), count).is_some() {
            return Err(parse_error(path, line_no, format!("duplicate key '{key}'")));
        }
    }
    if counts.is_empty() {
        return Err(parse_error(path, 1, "file contains no count records"));
    }
    let run_index = header.run_label.parse().unwrap_or(0);
    let table = CountsTable::from_counts(header.d, header.encoded, run_index, counts)?;
    Ok((table, header))
}

/// One entry of an experiment manifest: which file holds which cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub d: usize,
    pub encoded: bool,
    pub run_label: String,
    pub file: String,
}

pub fn serialize_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("#repcode-manifest v1\n");
    for e in entries {
        writeln!(
            out,
            "d={} E={} run={} file={}",
            e.d, e.encoded as u8, e.run_label, e.file
        )
        .unwrap();
    }
    out
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    std::fs::write(path, serialize_manifest(entries))?;
    Ok(())
}

pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty manifest"))?;
    if first.trim() != "#repcode-manifest v1" {
        return Err(parse_error(path, 1, "expected '#repcode-manifest v1' header"));
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = BTreeMap::new();
        for token in line.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| {
                parse_error(path, line_no, format!("malformed token '{token}'"))
            })?;
            fields.insert(key, value.to_string());
        }
        let get = |name: &str| -> Result<String> {
            fields
                .get(name)
                .cloned()
                .ok_or_else(|| parse_error(path, line_no, format!("missing field '{name}'")))
        };
        let d: usize = get("d")?
            .parse()
            .map_err(|_| parse_error(path, line_no, "d is not an integer"))?;
        let encoded = match get("E")?.as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("E must be 0 or 1, got '{other}'"),
                ))
            }
        };
        entries.push(ManifestEntry {
            d,
            encoded,
            run_label: get("run")?,
            file: get("file")?,
        });
    }
    Ok(entries)
}

/// Maps string indices of an external (device) export onto the canonical
/// layout, for registers with extra unused qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionMap {
    /// String index of code qubit i.
    pub code: Vec<usize>,
    /// String index of ancilla qubit i.
    pub ancilla: Vec<usize>,
    /// String index of the reference qubit s.
    pub s: usize,
}

impl PositionMap {
    /// The simulator's own layout: alternating line positions, s last.
    pub fn canonical(d: usize) -> Self {
        PositionMap {
            code: (0..d).map(|i| 2 * i).collect(),
            ancilla: (0..d - 1).map(|i| 2 * i + 1).collect(),
            s: 2 * d - 1,
        }
    }
}

/// Re-keys raw counts over a wider register into canonical 2d-bit strings.
pub fn remap_counts(
    raw: &BTreeMap<String, u64>,
    map: &PositionMap,
    encoded: bool,
    run_index: usize,
) -> Result<CountsTable> {
    let d = map.code.len();
    if map.ancilla.len() != d - 1 {
        return Err(Error::InvalidArgument(format!(
            "position map has {} code but {} ancilla indices",
            d,
            map.ancilla.len()
        )));
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (raw_key, &count) in raw {
        let bytes = raw_key.as_bytes();
        let pick = |idx: usize| -> Result<char> {
            bytes
                .get(idx)
                .map(|&b| b as char)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "position {idx} out of range for key '{raw_key}'"
                    ))
                })
        };
        let mut key = String::with_capacity(2 * d);
        for i in 0..2 * d - 1 {
            let idx = if i % 2 == 0 {
                map.code[i / 2]
            } else {
                map.ancilla[i / 2]
            };
            key.push(pick(idx)?);
        }
        key.push(pick(map.s)?);
        *counts.entry(key).or_insert(0) += count;
    }
    CountsTable::from_counts(d, encoded, run_index, counts)
}

/// Position-wise marginal frequency of reading 1, over all 2d positions.
pub fn per_qubit_one_probability(counts: &CountsTable) -> Vec<f64> {
    let n = 2 * counts.d;
    let mut ones = vec![0u64; n];
    for (key, &count) in &counts.counts {
        for (i, c) in key.chars().enumerate() {
            if c == '1' {
                ones[i] += count;
            }
        }
    }
    ones.iter()
        .map(|&o| o as f64 / counts.total as f64)
        .collect()
}

/// Distribution over the number of 1s among the code qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct OnesHistogram {
    pub d: usize,
    pub encoded: bool,
    /// weights[k]: probability of exactly k ones, k in 0..=d.
    pub weights: Vec<f64>,
}

pub fn ones_histogram(counts: &CountsTable) -> OnesHistogram {
    let d = counts.d;
    let mut weights = vec![0.0; d + 1];
    for (key, &count) in &counts.counts {
        let ones = key.chars().step_by(2).take(d).filter(|&c| c == '1').count();
        weights[ones] += count as f64;
    }
    for w in &mut weights {
        *w /= counts.total as f64;
    }
    OnesHistogram {
        d,
        encoded: counts.encoded,
        weights,
    }
}

/// Exact ones-count histogram from a full outcome distribution.
pub fn ones_histogram_from_distribution(d: usize, encoded: bool, dist: &[f64]) -> OnesHistogram {
    let n = 2 * d;
    let mut weights = vec![0.0; d + 1];
    for (idx, &p) in dist.iter().enumerate() {
        let key = outcome_string(idx, n);
        let ones = key.chars().step_by(2).take(d).filter(|&c| c == '1').count();
        weights[ones] += p;
    }
    OnesHistogram {
        d,
        encoded,
        weights,
    }
}

/// Smallest ones-count at which the encoded-1 histogram overtakes the
/// encoded-0 histogram: the decision boundary a count-based decoder would
/// use. Positions where neither histogram has support are skipped; if the
/// histograms never cross, returns the sentinel d + 1.
pub fn crossover_point(h0: &OnesHistogram, h1: &OnesHistogram) -> Result<usize> {
    if h0.d != h1.d {
        return Err(Error::InvalidArgument(format!(
            "histogram distances differ: {} vs {}",
            h0.d, h1.d
        )));
    }
    for k in 0..=h0.d {
        let w0 = h0.weights[k];
        let w1 = h1.weights[k];
        if w0 == 0.0 && w1 == 0.0 {
            continue;
        }
        if w1 >= w0 {
            return Ok(k);
        }
    }
    Ok(h0.d + 1)
}

/// Real-valued crossing of the two histograms, by linear interpolation of
/// ln(h1/h0) between adjacent bins where both have support. Resolves shifts
/// smaller than one bin, which the integer crossover cannot express; returns
/// None if the log-ratio never changes sign.
pub fn crossover_fraction(h0: &OnesHistogram, h1: &OnesHistogram) -> Result<Option<f64>> {
    if h0.d != h1.d {
        return Err(Error::InvalidArgument(format!(
            "histogram distances differ: {} vs {}",
            h0.d, h1.d
        )));
    }
    let ratios: Vec<(usize, f64)> = (0..=h0.d)
        .filter(|&k| h0.weights[k] > 0.0 && h1.weights[k] > 0.0)
        .map(|k| (k, (h1.weights[k] / h0.weights[k]).ln()))
        .collect();
    for pair in ratios.windows(2) {
        let (k_a, r_a) = pair[0];
        let (k_b, r_b) = pair[1];
        if r_a == 0.0 {
            return Ok(Some(k_a as f64));
        }
        if r_a < 0.0 && r_b >= 0.0 {
            let t = -r_a / (r_b - r_a);
            return Ok(Some(k_a as f64 + t * (k_b - k_a) as f64));
        }
    }
    Ok(None)
}
