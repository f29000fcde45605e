//! Lookup-table decoding and logical-error estimation.
//!
//! Lookup tables are conditional distributions pi(R|E) over outcome strings
//! R for each encoded value E. Full decoding keys on all 2d-1 line bits
//! (code and ancilla); partial decoding keys on the d code bits only. The
//! reference qubit s is never part of a key.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::sampling::CountsTable;
use crate::{Error, Result};

/// Which positions a lookup key covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// All 2d-1 line bits, code and ancilla.
    Full,
    /// Code bits only (d bits).
    Partial,
}

impl DecodeMode {
    pub fn key_len(&self, d: usize) -> usize {
        match self {
            DecodeMode::Full => 2 * d - 1,
            DecodeMode::Partial => d,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DecodeMode::Full => "full",
            DecodeMode::Partial => "partial",
        }
    }
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DecodeMode::Full),
            "partial" => Ok(DecodeMode::Partial),
            other => Err(Error::InvalidArgument(format!(
                "unknown decode mode '{other}'"
            ))),
        }
    }
}

/// Marginalizes a counts table down to the positions of `mode`, summing
/// counts over the discarded bits. The s bit is always discarded.
pub fn project(counts: &CountsTable, mode: DecodeMode) -> CountsTable {
    let d = counts.d;
    let mut projected: BTreeMap<String, u64> = BTreeMap::new();
    for (key, &count) in &counts.counts {
        let reduced: String = match mode {
            DecodeMode::Full => key.chars().take(2 * d - 1).collect(),
            DecodeMode::Partial => key.chars().step_by(2).take(d).collect(),
        };
        *projected.entry(reduced).or_insert(0) += count;
    }
    CountsTable {
        d,
        encoded: counts.encoded,
        run_index: counts.run_index,
        counts: projected,
        total: counts.total,
    }
}

/// A pair of conditional outcome distributions pi(R|E), E in {0, 1}.
/// Unobserved keys are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    pub mode: DecodeMode,
    pub d: usize,
    /// pi[0] conditions on encoded 0, pi[1] on encoded 1.
    pub pi: [BTreeMap<String, f64>; 2],
    pub source_totals: [f64; 2],
}

impl LookupTable {
    /// Relative frequency of `key` given encoded value `encoded`.
    pub fn pi(&self, key: &str, encoded: bool) -> f64 {
        self.pi[encoded as usize].get(key).copied().unwrap_or(0.0)
    }

    fn keys(&self) -> BTreeSet<&String> {
        self.pi[0].keys().chain(self.pi[1].keys()).collect()
    }
}

/// Builds a lookup table from one counts table per encoded value:
/// pi(R|E) = count_E(projected R) / total_E.
pub fn build_lookup(
    counts0: &CountsTable,
    counts1: &CountsTable,
    mode: DecodeMode,
) -> Result<LookupTable> {
    if counts0.encoded || !counts1.encoded {
        return Err(Error::InvalidArgument(
            "build_lookup expects (encoded 0, encoded 1) tables in order".into(),
        ));
    }
    if counts0.d != counts1.d {
        return Err(Error::InvalidArgument(format!(
            "mismatched distances {} and {}",
            counts0.d, counts1.d
        )));
    }
    if counts0.total == 0 || counts1.total == 0 {
        return Err(Error::InvalidArgument(
            "cannot build a lookup table from zero-total counts".into(),
        ));
    }
    let normalize = |counts: &CountsTable| -> BTreeMap<String, f64> {
        let projected = project(counts, mode);
        let total = projected.total as f64;
        projected
            .counts
            .into_iter()
            .map(|(key, count)| (key, count as f64 / total))
            .collect()
    };
    Ok(LookupTable {
        mode,
        d: counts0.d,
        pi: [normalize(counts0), normalize(counts1)],
        source_totals: [counts0.total as f64, counts1.total as f64],
    })
}

/// Builds a lookup table directly from exact outcome distributions over full
/// 2d-length strings (s bit last), for oracle use.
pub fn lookup_from_distributions(
    d: usize,
    mode: DecodeMode,
    dist0: &[f64],
    dist1: &[f64],
) -> LookupTable {
    let reduce = |dist: &[f64]| -> BTreeMap<String, f64> {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        for (idx, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let full = crate::circuit::outcome_string(idx, 2 * d);
            let key: String = match mode {
                DecodeMode::Full => full.chars().take(2 * d - 1).collect(),
                DecodeMode::Partial => full.chars().step_by(2).take(d).collect(),
            };
            *map.entry(key).or_insert(0.0) += p;
        }
        map
    };
    LookupTable {
        mode,
        d,
        pi: [reduce(dist0), reduce(dist1)],
        source_totals: [1.0, 1.0],
    }
}

/// Result of decoding one outcome string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub decoded: bool,
    /// pi(R|0) = pi(R|1), including the both-zero case.
    pub tie: bool,
    /// R observed under neither encoded value.
    pub unseen: bool,
}

/// Decodes R as the encoded value with the highest conditional frequency.
/// Ties are resolved by a fair coin from the caller's random stream.
pub fn decode<R: Rng>(table: &LookupTable, key: &str, rng: &mut R) -> Result<DecodeOutcome> {
    let expected = table.mode.key_len(table.d);
    if key.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "key '{key}' has length {}, expected {expected}",
            key.len()
        )));
    }
    let p0 = table.pi(key, false);
    let p1 = table.pi(key, true);
    let unseen = p0 == 0.0 && p1 == 0.0;
    if p0 == p1 {
        Ok(DecodeOutcome {
            decoded: rng.gen(),
            tie: true,
            unseen,
        })
    } else {
        Ok(DecodeOutcome {
            decoded: p1 > p0,
            tie: false,
            unseen,
        })
    }
}

/// Per-outcome logical-error contribution: pi(R|E) when the other value is
/// strictly more likely, half that on a tie, zero otherwise.
fn error_contribution(pi_e: f64, pi_other: f64) -> f64 {
    if pi_other > pi_e {
        pi_e
    } else if pi_other == pi_e {
        pi_e / 2.0
    } else {
        0.0
    }
}

/// In-sample logical error probability P(E), summed over all observed
/// outcomes. Evaluating on the training table makes this a lower bound.
pub fn logical_error_probability(table: &LookupTable, encoded: bool) -> f64 {
    table
        .keys()
        .iter()
        .map(|key| {
            error_contribution(table.pi(key, encoded), table.pi(key, !encoded))
        })
        .sum()
}

/// Held-out logical error: decode decisions come from `table`, outcome
/// frequencies from an independent counts table. Unseen keys and ties are
/// charged half weight.
pub fn logical_error_on(table: &LookupTable, eval: &CountsTable) -> Result<f64> {
    if eval.d != table.d {
        return Err(Error::InvalidArgument(format!(
            "table distance {} does not match counts distance {}",
            table.d, eval.d
        )));
    }
    let projected = project(eval, table.mode);
    let total = projected.total as f64;
    let mut error = 0.0;
    for (key, &count) in &projected.counts {
        let p_enc = table.pi(key, eval.encoded);
        let p_other = table.pi(key, !eval.encoded);
        let freq = count as f64 / total;
        if p_other > p_enc {
            error += freq;
        } else if p_other == p_enc {
            error += freq / 2.0;
        }
    }
    Ok(error)
}

/// Mean and spread of per-run logical error probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalErrorEstimate {
    pub d: usize,
    pub mode: DecodeMode,
    /// Index 0: encoded 0; index 1: encoded 1.
    pub mean: [f64; 2],
    pub stderr: [f64; 2],
    pub per_run: Vec<[f64; 2]>,
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    var.sqrt()
}

/// Builds one lookup table per run and reports the mean in-sample logical
/// error, with the sample standard deviation across runs as the error
/// estimate.
pub fn logical_error_per_run(
    runs: &[(CountsTable, CountsTable)],
    mode: DecodeMode,
) -> Result<LogicalErrorEstimate> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no runs supplied".into()))?;
    let d = first.0.d;
    let mut per_run = Vec::with_capacity(runs.len());
    for (counts0, counts1) in runs {
        if counts0.d != d || counts1.d != d {
            return Err(Error::InvalidArgument(
                "mismatched distances across runs".into(),
            ));
        }
        let table = build_lookup(counts0, counts1, mode)?;
        per_run.push([
            logical_error_probability(&table, false),
            logical_error_probability(&table, true),
        ]);
    }
    let collect = |e: usize| -> Vec<f64> { per_run.iter().map(|p| p[e]).collect() };
    let p0 = collect(0);
    let p1 = collect(1);
    Ok(LogicalErrorEstimate {
        d,
        mode,
        mean: [
            p0.iter().sum::<f64>() / p0.len() as f64,
            p1.iter().sum::<f64>() / p1.len() as f64,
        ],
        stderr: [sample_std(&p0), sample_std(&p1)],
        per_run,
    })
}

/// Majority vote over a string of code bits. Even splits are flagged as
/// ties.
pub fn majority_vote(code_bits: &str) -> Result<DecodeOutcome> {
    if code_bits.is_empty() {
        return Err(Error::InvalidArgument(
            "majority vote over an empty string".into(),
        ));
    }
    let ones = code_bits.chars().filter(|&c| c == '1').count();
    let zeros = code_bits.len() - ones;
    Ok(DecodeOutcome {
        decoded: ones > zeros,
        tie: ones == zeros,
        unseen: false,
    })
}

/// Logical error rate of the unencoded reference qubit s: the fraction of
/// shots whose s bit disagrees with the encoded value.
pub fn extract_s(counts: &CountsTable, encoded: bool) -> f64 {
    if counts.total == 0 {
        return 0.0;
    }
    let wrong: u64 = counts
        .counts
        .iter()
        .filter(|(key, _)| {
            let s = key.chars().last().unwrap() == '1';
            s != encoded
        })
        .map(|(_, &count)| count)
        .sum();
    wrong as f64 / counts.total as f64
}
