//! Experimental protocol: batches of shots grouped into runs, aggregated
//! into counts tables. Every (d, E, run) cell is seeded deterministically
//! from the master seed so any cell can be reproduced in isolation.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{build_circuit, simulate_exact, CodeLayout, NoiseModel, MAX_QUBITS};
use crate::{Error, Result};

/// Shot-production backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Sample outcomes from the exact distribution of the coherent-noise circuit.
    ExactSample,
    /// Independent classical bit flips after ideal encoding; ancillas record
    /// the parity of their (possibly flipped) neighbours. Used for analytic
    /// oracle tests, where the coherent model has no closed form.
    StochasticFlip {
        flip_probability: f64,
        /// When true, only code qubits are flipped; ancilla and s readout
        /// stays ideal apart from the recorded syndrome.
        code_only: bool,
    },
}

/// Protocol parameters: shots per run, number of runs, distances, seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub shots_per_run: u64,
    pub n_runs: usize,
    pub master_seed: u64,
    pub d_list: Vec<usize>,
    pub backend: Backend,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shots_per_run: 8192,
            n_runs: 10,
            master_seed: 0,
            d_list: (3..=8).collect(),
            backend: Backend::ExactSample,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots_per_run < 1 {
            return Err(Error::InvalidArgument("shots_per_run must be >= 1".into()));
        }
        if self.n_runs < 1 {
            return Err(Error::InvalidArgument("n_runs must be >= 1".into()));
        }
        for &d in &self.d_list {
            if d < 2 {
                return Err(Error::InvalidArgument(format!(
                    "distance {d} below minimum of 2"
                )));
            }
            if 2 * d > MAX_QUBITS {
                return Err(Error::ResourceGuard {
                    needed: 2 * d,
                    limit: MAX_QUBITS,
                });
            }
        }
        if let Backend::StochasticFlip {
            flip_probability, ..
        } = self.backend
        {
            if !(0.0..=1.0).contains(&flip_probability) {
                return Err(Error::InvalidArgument(
                    "flip_probability must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Tallied measurement outcomes for one (d, E, run) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    pub d: usize,
    pub encoded: bool,
    pub run_index: usize,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl CountsTable {
    pub fn from_counts(
        d: usize,
        encoded: bool,
        run_index: usize,
        counts: BTreeMap<String, u64>,
    ) -> Result<Self> {
        for key in counts.keys() {
            if key.len() != 2 * d {
                return Err(Error::InvalidArgument(format!(
                    "key '{key}' has length {}, expected {}",
                    key.len(),
                    2 * d
                )));
            }
        }
        let total = counts.values().sum();
        Ok(CountsTable {
            d,
            encoded,
            run_index,
            counts,
            total,
        })
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Stable per-cell seed from (master_seed, d, E, run).
pub fn cell_seed(master_seed: u64, d: usize, encoded: bool, run: usize) -> u64 {
    let mut s = splitmix64(master_seed);
    s = splitmix64(s ^ d as u64);
    s = splitmix64(s ^ (encoded as u64) << 32);
    splitmix64(s ^ run as u64)
}

/// Inverse-CDF sampler over a fixed discrete distribution.
struct CumulativeDist {
    cdf: Vec<f64>,
}

impl CumulativeDist {
    fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        CumulativeDist { cdf }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        match self.cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) | Err(i) => i.min(self.cdf.len() - 1),
        }
    }
}

fn exact_sample_cell(
    layout: &CodeLayout,
    dist: &CumulativeDist,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, u64> {
    let n = layout.n_total();
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let idx = dist.sample(rng);
        *counts
            .entry(crate::circuit::outcome_string(idx, n))
            .or_insert(0) += 1;
    }
    counts
}

fn stochastic_flip_shot(
    layout: &CodeLayout,
    encoded: bool,
    p: f64,
    code_only: bool,
    rng: &mut ChaCha8Rng,
) -> String {
    let d = layout.distance();
    let mut code: Vec<bool> = vec![encoded; d];
    for bit in code.iter_mut() {
        if rng.gen::<f64>() < p {
            *bit = !*bit;
        }
    }
    // Syndrome extraction on the flipped code bits.
    let mut ancilla: Vec<bool> = (0..d - 1).map(|i| code[i] != code[i + 1]).collect();
    let mut s_bit = encoded;
    if !code_only {
        for bit in ancilla.iter_mut() {
            if rng.gen::<f64>() < p {
                *bit = !*bit;
            }
        }
        if rng.gen::<f64>() < p {
            s_bit = !s_bit;
        }
    }
    let mut out = String::with_capacity(2 * d);
    for i in 0..2 * d - 1 {
        let bit = if i % 2 == 0 { code[i / 2] } else { ancilla[i / 2] };
        out.push(if bit { '1' } else { '0' });
    }
    out.push(if s_bit { '1' } else { '0' });
    out
}

/// Runs the full protocol: for every distance, encoded value and run index,
/// one counts table of exactly `shots_per_run` shots. Bit-exact reproducible
/// for a fixed master seed and backend.
pub fn run_experiment(config: &RunConfig, noise: &NoiseModel) -> Result<Vec<CountsTable>> {
    config.validate()?;
    noise.validate()?;
    let mut tables = Vec::new();
    for &d in &config.d_list {
        let layout = CodeLayout::new(d)?;
        for encoded in [false, true] {
            // The exact distribution is shared across runs of a cell.
            let dist = match config.backend {
                Backend::ExactSample => {
                    let seq = build_circuit(&layout, encoded, noise)?;
                    Some(CumulativeDist::new(&simulate_exact(&seq)?))
                }
                Backend::StochasticFlip { .. } => None,
            };
            for run in 0..config.n_runs {
                let seed = cell_seed(config.master_seed, d, encoded, run);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let counts = match (&config.backend, &dist) {
                    (Backend::ExactSample, Some(dist)) => {
                        exact_sample_cell(&layout, dist, config.shots_per_run, &mut rng)
                    }
                    (
                        Backend::StochasticFlip {
                            flip_probability,
                            code_only,
                        },
                        _,
                    ) => {
                        let mut counts = BTreeMap::new();
                        for _ in 0..config.shots_per_run {
                            let s = stochastic_flip_shot(
                                &layout,
                                encoded,
                                *flip_probability,
                                *code_only,
                                &mut rng,
                            );
                            *counts.entry(s).or_insert(0) += 1;
                        }
                        counts
                    }
                    _ => unreachable!(),
                };
                tables.push(CountsTable {
                    d,
                    encoded,
                    run_index: run,
                    counts,
                    total: config.shots_per_run,
                });
            }
        }
    }
    Ok(tables)
}

/// Pointwise sum of counts tables sharing (d, E). The merged table carries
/// run index 0.
pub fn merge_runs(tables: &[CountsTable]) -> Result<CountsTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot merge an empty list of tables".into()))?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0;
    for table in tables {
        if table.d != first.d || table.encoded != first.encoded {
            return Err(Error::InvalidArgument(format!(
                "cannot merge tables with mixed (d, E): ({}, {}) vs ({}, {})",
                first.d, first.encoded as u8, table.d, table.encoded as u8
            )));
        }
        for (key, &count) in &table.counts {
            *counts.entry(key.clone()).or_insert(0) += count;
        }
        total += table.total;
    }
    Ok(CountsTable {
        d: first.d,
        encoded: first.encoded,
        run_index: 0,
        counts,
        total,
    })
}
