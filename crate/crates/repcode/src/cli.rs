//! Command implementations behind the `repcode` binary: simulate, errors,
//! fit, qubits, histogram. Each command is deterministic given its inputs
//! and seed, emits tab-separated data tables, and renders plots from those
//! same tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::circuit::{build_circuit, simulate_exact, CodeLayout, InjectionPoint, NoiseModel};
use crate::decoder::{
    self, logical_error_on, logical_error_per_run, DecodeMode, LogicalErrorEstimate,
};
use crate::ingest::{
    self, crossover_point, ones_histogram, parse_counts, parse_manifest, per_qubit_one_probability,
    write_counts, write_manifest, ManifestEntry, Source,
};
use crate::model::{self, FitResult};
use crate::plot::{line_plot, Series};
use crate::sampling::{merge_runs, run_experiment, Backend, CountsTable, RunConfig};
use crate::{Error, Result};

/// Process exit code for an error, per the command contract:
/// 1 validation, 2 I/O, 3 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 2,
        Error::Numerical(_) => 3,
        _ => 1,
    }
}

/// Which decode modes a command should evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Full,
    Partial,
    Both,
}

impl ModeSelection {
    fn modes(&self) -> Vec<DecodeMode> {
        match self {
            ModeSelection::Full => vec![DecodeMode::Full],
            ModeSelection::Partial => vec![DecodeMode::Partial],
            ModeSelection::Both => vec![DecodeMode::Full, DecodeMode::Partial],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModeSelection::Full),
            "partial" => Ok(ModeSelection::Partial),
            "both" => Ok(ModeSelection::Both),
            other => Err(Error::InvalidArgument(format!(
                "mode must be full, partial or both, got '{other}'"
            ))),
        }
    }
}

/// Aggregated configuration for the whole pipeline. Defaults encode the
/// reference protocol: distances 3..8, 8192 shots, 10 runs, biased noise.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub distances: Vec<usize>,
    pub shots: u64,
    pub runs: usize,
    pub seed: u64,
    pub theta_zero: f64,
    pub theta_one: f64,
    pub injection: BTreeSet<InjectionPoint>,
    pub backend: Backend,
    pub out_dir: PathBuf,
    pub modes: ModeSelection,
    pub include_d3: bool,
    pub held_out: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let noise = NoiseModel::default_biased();
        ExperimentConfig {
            distances: (3..=8).collect(),
            shots: 8192,
            runs: 10,
            seed: 0,
            theta_zero: noise.theta_zero,
            theta_one: noise.theta_one,
            injection: noise.injection_points,
            backend: Backend::ExactSample,
            out_dir: PathBuf::from("."),
            modes: ModeSelection::Both,
            include_d3: false,
            held_out: false,
        }
    }
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::InvalidArgument(format!(
            "field '{key}' must be true or false, got '{other}'"
        ))),
    }
}

pub fn parse_injection_list(value: &str) -> Result<BTreeSet<InjectionPoint>> {
    match value {
        "none" => Ok(BTreeSet::new()),
        "all" => Ok(InjectionPoint::ALL.iter().copied().collect()),
        list => list.split(',').map(|p| p.trim().parse()).collect(),
    }
}

impl ExperimentConfig {
    /// Applies a flat key=value config file on top of the current values.
    /// Unknown keys are rejected so typos cannot silently no-op.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        let mut flip_probability: Option<f64> = None;
        let mut flip_code_only = true;
        let mut backend_name: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            let bad = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: msg,
            };
            match key.trim() {
                "distances" => {
                    self.distances = value
                        .split(',')
                        .map(|v| v.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(format!("bad distances list '{value}'")))?;
                }
                "shots" => {
                    self.shots = value.trim().parse().map_err(|_| bad("bad shots".into()))?
                }
                "runs" => self.runs = value.trim().parse().map_err(|_| bad("bad runs".into()))?,
                "seed" => self.seed = value.trim().parse().map_err(|_| bad("bad seed".into()))?,
                "theta_zero" => {
                    self.theta_zero = value
                        .trim()
                        .parse()
                        .map_err(|_| bad("bad theta_zero".into()))?
                }
                "theta_one" => {
                    self.theta_one = value
                        .trim()
                        .parse()
                        .map_err(|_| bad("bad theta_one".into()))?
                }
                "injection" => self.injection = parse_injection_list(value.trim())?,
                "backend" => backend_name = Some(value.trim().to_string()),
                "flip_probability" => {
                    flip_probability = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| bad("bad flip_probability".into()))?,
                    )
                }
                "flip_code_only" => flip_code_only = parse_bool(value.trim(), "flip_code_only")?,
                "out" => self.out_dir = PathBuf::from(value.trim()),
                "modes" => self.modes = value.trim().parse()?,
                "include_d3" => self.include_d3 = parse_bool(value.trim(), "include_d3")?,
                "held_out" => self.held_out = parse_bool(value.trim(), "held_out")?,
                other => return Err(bad(format!("unknown config field '{other}'"))),
            }
        }
        match backend_name.as_deref() {
            None => {}
            Some("exact") => self.backend = Backend::ExactSample,
            Some("flip") => {
                self.backend = Backend::StochasticFlip {
                    flip_probability: flip_probability.ok_or_else(|| {
                        Error::InvalidArgument(
                            "backend=flip requires flip_probability".into(),
                        )
                    })?,
                    code_only: flip_code_only,
                }
            }
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "field 'backend' must be exact or flip, got '{other}'"
                )))
            }
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            theta_zero: self.theta_zero,
            theta_one: self.theta_one,
            injection_points: self.injection.clone(),
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            shots_per_run: self.shots,
            n_runs: self.runs,
            master_seed: self.seed,
            d_list: self.distances.clone(),
            backend: self.backend,
        }
    }
}

fn counts_file_name(d: usize, encoded: bool, run: usize) -> String {
    format!("d{d}_E{}_r{run}.txt", encoded as u8)
}

/// Runs the experiment and writes one counts file per (d, E, run) plus the
/// manifest. Returns the manifest path.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<PathBuf> {
    let tables = run_experiment(&config.run_config(), &config.noise())?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut entries = Vec::with_capacity(tables.len());
    for table in &tables {
        let name = counts_file_name(table.d, table.encoded, table.run_index);
        write_counts(table, Source::Sim, &config.out_dir.join(&name))?;
        entries.push(ManifestEntry {
            d: table.d,
            encoded: table.encoded,
            run_label: table.run_index.to_string(),
            file: name,
        });
    }
    let manifest = config.out_dir.join("manifest.txt");
    write_manifest(&entries, &manifest)?;
    Ok(manifest)
}

/// All counts of one experiment, grouped as per-run (E=0, E=1) pairs keyed
/// by distance.
#[derive(Debug)]
pub struct ExperimentCounts {
    pub by_distance: BTreeMap<usize, Vec<(CountsTable, CountsTable)>>,
}

/// Loads every file named by the manifest and pairs the two encoded values
/// per (d, run). Incomplete cells are reported exhaustively.
pub fn load_experiment(manifest_path: &Path) -> Result<ExperimentCounts> {
    let entries = parse_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut missing = Vec::new();
    let mut cells: BTreeMap<(usize, String), [Option<CountsTable>; 2]> = BTreeMap::new();
    for entry in &entries {
        let path = base.join(&entry.file);
        if !path.exists() {
            missing.push(format!("(d={}, E={}, run={}): file {} not found",
                entry.d, entry.encoded as u8, entry.run_label, path.display()));
            continue;
        }
        let (table, _) = parse_counts(&path)?;
        let slot = cells
            .entry((entry.d, entry.run_label.clone()))
            .or_insert([None, None]);
        slot[entry.encoded as usize] = Some(table);
    }
    for ((d, run), slot) in &cells {
        for e in 0..2 {
            if slot[e].is_none() {
                missing.push(format!("(d={d}, E={e}, run={run}): no manifest entry"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing.join("; ")));
    }
    let mut by_distance: BTreeMap<usize, Vec<(CountsTable, CountsTable)>> = BTreeMap::new();
    for ((d, _), slot) in cells {
        let [c0, c1] = slot;
        by_distance
            .entry(d)
            .or_default()
            .push((c0.unwrap(), c1.unwrap()));
    }
    Ok(ExperimentCounts { by_distance })
}

/// One row of the logical-error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorsRow {
    pub d: usize,
    pub encoded: bool,
    /// "full", "partial" or "single" (the reference qubit baseline).
    pub mode: String,
    pub mean: f64,
    pub stderr: f64,
}

fn held_out_estimate(
    runs: &[(CountsTable, CountsTable)],
    mode: DecodeMode,
) -> Result<LogicalErrorEstimate> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "held-out evaluation needs at least 2 runs".into(),
        ));
    }
    let split = runs.len() / 2;
    let (train, eval) = runs.split_at(split.max(1));
    let train0: Vec<CountsTable> = train.iter().map(|(c0, _)| c0.clone()).collect();
    let train1: Vec<CountsTable> = train.iter().map(|(_, c1)| c1.clone()).collect();
    let table = decoder::build_lookup(&merge_runs(&train0)?, &merge_runs(&train1)?, mode)?;
    let mut per_run = Vec::new();
    for (c0, c1) in eval {
        per_run.push([logical_error_on(&table, c0)?, logical_error_on(&table, c1)?]);
    }
    let collect = |e: usize| -> Vec<f64> { per_run.iter().map(|p| p[e]).collect() };
    let std = |v: &[f64]| -> f64 {
        if v.len() < 2 {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let p0 = collect(0);
    let p1 = collect(1);
    Ok(LogicalErrorEstimate {
        d: runs[0].0.d,
        mode,
        mean: [
            p0.iter().sum::<f64>() / p0.len() as f64,
            p1.iter().sum::<f64>() / p1.len() as f64,
        ],
        stderr: [std(&p0), std(&p1)],
        per_run,
    })
}

/// Computes logical-error estimates for every distance and requested mode,
/// plus the single-qubit baseline rows.
pub fn compute_errors(
    counts: &ExperimentCounts,
    modes: ModeSelection,
    held_out: bool,
) -> Result<Vec<ErrorsRow>> {
    let mut rows = Vec::new();
    for (&d, runs) in &counts.by_distance {
        for mode in modes.modes() {
            let est = if held_out {
                held_out_estimate(runs, mode)?
            } else {
                logical_error_per_run(runs, mode)?
            };
            for encoded in [false, true] {
                rows.push(ErrorsRow {
                    d,
                    encoded,
                    mode: mode.label().to_string(),
                    mean: est.mean[encoded as usize],
                    stderr: est.stderr[encoded as usize],
                });
            }
        }
        // Reference qubit s baseline, averaged across runs.
        for encoded in [false, true] {
            let values: Vec<f64> = runs
                .iter()
                .map(|(c0, c1)| {
                    decoder::extract_s(if encoded { c1 } else { c0 }, encoded)
                })
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let std = if values.len() < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (values.len() - 1) as f64)
                    .sqrt()
            };
            rows.push(ErrorsRow {
                d,
                encoded,
                mode: "single".to_string(),
                mean,
                stderr: std,
            });
        }
    }
    Ok(rows)
}

fn serialize_errors_table(rows: &[ErrorsRow]) -> String {
    let mut out = String::from("# repcode errors v1\n");
    // Fig. 4 comparison line: the best single-qubit memory over all sizes.
    for encoded in [false, true] {
        let min = rows
            .iter()
            .filter(|r| r.mode == "single" && r.encoded == encoded)
            .map(|r| r.mean)
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            writeln!(out, "# single_qubit_min E={} {:.10}", encoded as u8, min).unwrap();
        }
    }
    out.push_str("d\tE\tmode\tmean\tstderr\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.10}\t{:.10}",
            r.d, r.encoded as u8, r.mode, r.mean, r.stderr
        )
        .unwrap();
    }
    out
}

pub fn parse_errors_table(path: &Path) -> Result<Vec<ErrorsRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() || line.starts_with("d\t") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: msg.into(),
        };
        if fields.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        rows.push(ErrorsRow {
            d: fields[0].parse().map_err(|_| bad("bad d"))?,
            encoded: fields[1] == "1",
            mode: fields[2].to_string(),
            mean: fields[3].parse().map_err(|_| bad("bad mean"))?,
            stderr: fields[4].parse().map_err(|_| bad("bad stderr"))?,
        });
    }
    Ok(rows)
}

/// `errors` command: logical-error table from a manifest, written to
/// `errors.tsv` in the output directory.
pub fn cmd_errors(
    manifest_path: &Path,
    modes: ModeSelection,
    held_out: bool,
    out_dir: &Path,
) -> Result<PathBuf> {
    let counts = load_experiment(manifest_path)?;
    let rows = compute_errors(&counts, modes, held_out)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("errors.tsv");
    std::fs::write(&path, serialize_errors_table(&rows))?;

    let mut series: Vec<Series> = Vec::new();
    for mode in ["full", "partial", "single"] {
        for encoded in [false, true] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.mode == mode && r.encoded == encoded)
                .map(|r| (r.d as f64, r.mean))
                .collect();
            if !points.is_empty() {
                series.push(Series {
                    label: format!("{mode} E={}", encoded as u8),
                    points,
                });
            }
        }
    }
    let svg = line_plot(
        "Logical error probability vs code distance",
        "code distance d",
        "logical error probability",
        &series,
        true,
    );
    std::fs::write(out_dir.join("errors.svg"), svg)?;
    Ok(path)
}

/// Fitted parameters for one (E, mode) series.
#[derive(Debug, Clone)]
pub struct FitReportRow {
    pub encoded: bool,
    pub mode: String,
    pub fit: FitResult,
}

/// `fit` command: single-round fits for partial decoding and constrained
/// two-round fits for full decoding (using the partial-mode p as the
/// constraint). Zero-valued points are dropped with a warning;
/// underdetermined series are skipped with a warning.
pub fn cmd_fit(
    errors_path: &Path,
    include_d3: bool,
    p_total_override: Option<f64>,
    out_dir: &Path,
) -> Result<Vec<FitReportRow>> {
    let rows = parse_errors_table(errors_path)?;
    std::fs::create_dir_all(out_dir)?;

    let series_data = |mode: &str, encoded: bool| -> BTreeMap<usize, f64> {
        rows.iter()
            .filter(|r| r.mode == mode && r.encoded == encoded)
            .filter(|r| include_d3 || r.d != 3)
            .filter(|r| {
                if r.mean <= 0.0 {
                    eprintln!(
                        "warning: dropping d={} E={} mode={} with nonpositive value {}",
                        r.d, r.encoded as u8, r.mode, r.mean
                    );
                    false
                } else {
                    true
                }
            })
            .map(|r| (r.d, r.mean))
            .collect()
    };

    let mut report = Vec::new();
    for encoded in [false, true] {
        let partial = series_data("partial", encoded);
        let partial_fit = if partial.len() >= 2 {
            match model::fit_single(&partial) {
                Ok(fit) => {
                    report.push(FitReportRow {
                        encoded,
                        mode: "partial".into(),
                        fit: fit.clone(),
                    });
                    Some(fit)
                }
                Err(e) => {
                    eprintln!("warning: skipping partial E={} fit: {e}", encoded as u8);
                    None
                }
            }
        } else {
            eprintln!(
                "warning: partial E={} series underdetermined ({} usable points), skipping",
                encoded as u8,
                partial.len()
            );
            None
        };

        let full = series_data("full", encoded);
        let p_total = p_total_override.or(match &partial_fit {
            Some(FitResult::Single { p, .. }) => Some(*p),
            _ => None,
        });
        match (full.len() >= 2, p_total) {
            (true, Some(p_total)) => match model::fit_two_round(&full, p_total) {
                Ok(fit) => report.push(FitReportRow {
                    encoded,
                    mode: "full".into(),
                    fit,
                }),
                Err(e) => eprintln!("warning: skipping full E={} fit: {e}", encoded as u8),
            },
            (false, _) => eprintln!(
                "warning: full E={} series underdetermined ({} usable points), skipping",
                encoded as u8,
                full.len()
            ),
            (_, None) => eprintln!(
                "warning: no constraint p available for full E={} fit, skipping",
                encoded as u8
            ),
        }
    }

    // Report table.
    let mut out = String::from("# repcode fit v1\nE\tmode\tkind\tp0\tp1\tconstraint\tresidual_log_sse\n");
    for row in &report {
        match &row.fit {
            FitResult::Single {
                p, residual_log_sse, ..
            } => writeln!(
                out,
                "{}\t{}\tsingle\t{:.10}\t\t\t{:.6e}",
                row.encoded as u8, row.mode, p, residual_log_sse
            )
            .unwrap(),
            FitResult::TwoRound {
                p0,
                p1,
                constraint_p,
                residual_log_sse,
                ..
            } => writeln!(
                out,
                "{}\t{}\ttwo_round\t{:.10}\t{:.10}\t{:.10}\t{:.6e}",
                row.encoded as u8, row.mode, p0, p1, constraint_p, residual_log_sse
            )
            .unwrap(),
        }
    }
    std::fs::write(out_dir.join("fit.tsv"), out)?;

    // Model-curve samples and the overlay plot.
    let d_values: BTreeSet<usize> = rows.iter().map(|r| r.d).collect();
    let mut curves = String::from("# repcode fit curves v1\nE\tmode\td\tmodel\n");
    let mut series = Vec::new();
    for row in &report {
        let mut points = Vec::new();
        for &d in &d_values {
            let value = match &row.fit {
                FitResult::Single { p, .. } => model::binomial_logical_error(d, *p)?,
                FitResult::TwoRound { p0, p1, .. } => {
                    model::two_round_logical_error(d, *p0, *p1)?
                }
            };
            writeln!(
                curves,
                "{}\t{}\t{}\t{:.10}",
                row.encoded as u8, row.mode, d, value
            )
            .unwrap();
            points.push((d as f64, value));
        }
        series.push(Series {
            label: format!("{} E={} fit", row.mode, row.encoded as u8),
            points,
        });
    }
    for (mode, encoded) in [("partial", false), ("partial", true), ("full", false), ("full", true)]
    {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mode == mode && r.encoded == encoded)
            .map(|r| (r.d as f64, r.mean))
            .collect();
        if !points.is_empty() {
            series.push(Series {
                label: format!("{mode} E={} data", encoded as u8),
                points,
            });
        }
    }
    std::fs::write(out_dir.join("fit_curves.tsv"), curves)?;
    std::fs::write(
        out_dir.join("fit.svg"),
        line_plot(
            "Logical error decay and model fits",
            "code distance d",
            "logical error probability",
            &series,
            true,
        ),
    )?;
    Ok(report)
}

/// `qubits` command: per-position probability of reading 1 at one distance,
/// for both encoded values, over all merged runs.
pub fn cmd_qubits(manifest_path: &Path, d: usize, out_dir: &Path) -> Result<PathBuf> {
    let counts = load_experiment(manifest_path)?;
    let runs = counts
        .by_distance
        .get(&d)
        .ok_or_else(|| Error::MissingData(format!("distance {d} absent from manifest")))?;
    let merged0 = merge_runs(&runs.iter().map(|(c0, _)| c0.clone()).collect::<Vec<_>>())?;
    let merged1 = merge_runs(&runs.iter().map(|(_, c1)| c1.clone()).collect::<Vec<_>>())?;
    let p0 = per_qubit_one_probability(&merged0);
    let p1 = per_qubit_one_probability(&merged1);

    let layout = CodeLayout::new(d)?;
    let mut out = String::from("# repcode qubits v1\nposition\trole\tp1_E0\tp1_E1\n");
    for pos in 0..layout.n_total() {
        let role = match layout.role(pos) {
            crate::circuit::Role::Code(i) => format!("code{i}"),
            crate::circuit::Role::Ancilla(i) => format!("ancilla{i}"),
            crate::circuit::Role::Reference => "s".to_string(),
        };
        writeln!(out, "{pos}\t{role}\t{:.10}\t{:.10}", p0[pos], p1[pos]).unwrap();
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("qubits_d{d}.tsv"));
    std::fs::write(&path, out)?;

    let series = vec![
        Series {
            label: "E=0".into(),
            points: p0.iter().enumerate().map(|(i, &p)| (i as f64, p)).collect(),
        },
        Series {
            label: "E=1".into(),
            points: p1.iter().enumerate().map(|(i, &p)| (i as f64, p)).collect(),
        },
    ];
    std::fs::write(
        out_dir.join(format!("qubits_d{d}.svg")),
        line_plot(
            &format!("Final qubit states, d={d}"),
            "line position (s last)",
            "P(outcome 1)",
            &series,
            false,
        ),
    )?;
    Ok(path)
}

/// `histogram` command: ones-count distribution over the code qubits for
/// both encoded values at one distance, with the crossover point.
pub fn cmd_histogram(manifest_path: &Path, d: usize, out_dir: &Path) -> Result<PathBuf> {
    let counts = load_experiment(manifest_path)?;
    let runs = counts
        .by_distance
        .get(&d)
        .ok_or_else(|| Error::MissingData(format!("distance {d} absent from manifest")))?;
    let merged0 = merge_runs(&runs.iter().map(|(c0, _)| c0.clone()).collect::<Vec<_>>())?;
    let merged1 = merge_runs(&runs.iter().map(|(_, c1)| c1.clone()).collect::<Vec<_>>())?;
    let h0 = ones_histogram(&merged0);
    let h1 = ones_histogram(&merged1);
    let k_star = crossover_point(&h0, &h1)?;
    let fraction = ingest::crossover_fraction(&h0, &h1)?;

    let mut out = String::from("# repcode histogram v1\n");
    writeln!(out, "# crossover_point {k_star}").unwrap();
    if let Some(f) = fraction {
        writeln!(out, "# crossover_fraction {f:.6}").unwrap();
    }
    out.push_str("ones\tP_E0\tP_E1\n");
    for k in 0..=d {
        writeln!(out, "{k}\t{:.10}\t{:.10}", h0.weights[k], h1.weights[k]).unwrap();
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("histogram_d{d}.tsv"));
    std::fs::write(&path, out)?;

    let series = vec![
        Series {
            label: "E=0".into(),
            points: h0.weights.iter().enumerate().map(|(k, &w)| (k as f64, w)).collect(),
        },
        Series {
            label: "E=1".into(),
            points: h1.weights.iter().enumerate().map(|(k, &w)| (k as f64, w)).collect(),
        },
    ];
    std::fs::write(
        out_dir.join(format!("histogram_d{d}.svg")),
        line_plot(
            &format!("Ones-count distribution, d={d}"),
            "number of 1s among code qubits",
            "probability",
            &series,
            false,
        ),
    )?;
    Ok(path)
}

/// Exact-distribution oracle for one (d, E) cell under a noise model;
/// exposed for verification against sampled pipelines.
pub fn exact_distribution(d: usize, encoded: bool, noise: &NoiseModel) -> Result<Vec<f64>> {
    let layout = CodeLayout::new(d)?;
    let seq = build_circuit(&layout, encoded, noise)?;
    simulate_exact(&seq)
}

/// Exact ones-count histogram oracle.
pub fn exact_ones_histogram(
    d: usize,
    encoded: bool,
    noise: &NoiseModel,
) -> Result<ingest::OnesHistogram> {
    Ok(ingest::ones_histogram_from_distribution(
        d,
        encoded,
        &exact_distribution(d, encoded, noise)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_config(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            distances: vec![3],
            shots: 512,
            runs: 3,
            seed: 5,
            out_dir: out.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn simulate_writes_files_and_manifest() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path());
        let manifest = cmd_simulate(&config).unwrap();
        let entries = parse_manifest(&manifest).unwrap();
        assert_eq!(entries.len(), 6); // 1 distance x 2 values x 3 runs
        let counts = load_experiment(&manifest).unwrap();
        assert_eq!(counts.by_distance[&3].len(), 3);
    }

    #[test]
    fn simulate_is_byte_reproducible() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        cmd_simulate(&small_config(dir_a.path())).unwrap();
        cmd_simulate(&small_config(dir_b.path())).unwrap();
        for entry in std::fs::read_dir(dir_a.path()).unwrap() {
            let entry = entry.unwrap();
            let a = std::fs::read(entry.path()).unwrap();
            let b = std::fs::read(dir_b.path().join(entry.file_name())).unwrap();
            assert_eq!(a, b, "{:?} differs", entry.file_name());
        }
    }

    #[test]
    fn noiseless_errors_are_zero() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            injection: BTreeSet::new(),
            ..small_config(dir.path())
        };
        let manifest = cmd_simulate(&config).unwrap();
        let out = dir.path().join("analysis");
        let errors = cmd_errors(&manifest, ModeSelection::Both, false, &out).unwrap();
        let rows = parse_errors_table(&errors).unwrap();
        assert!(!rows.is_empty());
        for row in &rows {
            assert_eq!(row.mean, 0.0, "{row:?}");
        }
    }

    #[test]
    fn missing_run_is_reported() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path());
        let manifest = cmd_simulate(&config).unwrap();
        std::fs::remove_file(dir.path().join("d3_E1_r1.txt")).unwrap();
        match load_experiment(&manifest) {
            Err(Error::MissingData(msg)) => {
                assert!(msg.contains("d=3"), "{msg}");
                assert!(msg.contains("run=1"), "{msg}");
            }
            other => panic!("expected MissingData, got {other:?}"),
        }
    }

    #[test]
    fn qubits_and_histogram_commands() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path());
        let manifest = cmd_simulate(&config).unwrap();
        let out = dir.path().join("analysis");
        let qubits = cmd_qubits(&manifest, 3, &out).unwrap();
        let text = std::fs::read_to_string(qubits).unwrap();
        assert_eq!(text.lines().count(), 8); // comment + header + 6 positions
        assert!(out.join("qubits_d3.svg").exists());
        let hist = cmd_histogram(&manifest, 3, &out).unwrap();
        let text = std::fs::read_to_string(hist).unwrap();
        assert!(text.contains("# crossover_point"));
        assert!(cmd_qubits(&manifest, 7, &out).is_err());
    }

    #[test]
    fn fit_command_on_synthetic_model_data() {
        let dir = tempdir().unwrap();
        let mut rows = Vec::new();
        for d in 3..=8 {
            for (mode, value) in [
                ("partial", model::binomial_logical_error(d, 0.09).unwrap()),
                (
                    "full",
                    model::two_round_logical_error(d, 0.06, 0.03).unwrap(),
                ),
            ] {
                for encoded in [false, true] {
                    rows.push(ErrorsRow {
                        d,
                        encoded,
                        mode: mode.into(),
                        mean: value,
                        stderr: 0.0,
                    });
                }
            }
        }
        let errors_path = dir.path().join("errors.tsv");
        std::fs::write(&errors_path, serialize_errors_table(&rows)).unwrap();
        let report = cmd_fit(&errors_path, false, None, dir.path()).unwrap();
        let partial = report
            .iter()
            .find(|r| r.mode == "partial" && !r.encoded)
            .unwrap();
        match &partial.fit {
            FitResult::Single { p, .. } => assert!((p - 0.09).abs() < 1e-6),
            _ => panic!(),
        }
        // Full-mode data was generated with p0 + p1 = 0.09, matching the
        // partial constraint, so the two-round fit recovers it.
        let full = report.iter().find(|r| r.mode == "full" && !r.encoded).unwrap();
        match &full.fit {
            FitResult::TwoRound { p0, p1, .. } => {
                assert!((p0 - 0.06).abs() < 1e-6, "{p0}");
                assert!((p1 - 0.03).abs() < 1e-6, "{p1}");
            }
            _ => panic!(),
        }
        assert!(dir.path().join("fit.tsv").exists());
        assert!(dir.path().join("fit_curves.tsv").exists());
        assert!(dir.path().join("fit.svg").exists());
    }

    #[test]
    fn fit_skips_zero_series_with_warning() {
        let dir = tempdir().unwrap();
        let rows: Vec<ErrorsRow> = (4..=8)
            .flat_map(|d| {
                [false, true].into_iter().map(move |encoded| ErrorsRow {
                    d,
                    encoded,
                    mode: "partial".into(),
                    mean: 0.0,
                    stderr: 0.0,
                })
            })
            .collect();
        let errors_path = dir.path().join("errors.tsv");
        std::fs::write(&errors_path, serialize_errors_table(&rows)).unwrap();
        let report = cmd_fit(&errors_path, false, None, dir.path()).unwrap();
        assert!(report.is_empty());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("config.txt");
        std::fs::write(
            &path,
            "distances=3,4\nshots=100\nruns=2\nseed=9\ntheta_zero=0.1\ntheta_one=0.2\n\
             injection=after_encoding\nbackend=flip\nflip_probability=0.05\nmodes=partial\n\
             include_d3=true\nheld_out=true\n",
        )
        .unwrap();
        let mut config = ExperimentConfig::default();
        config.apply_file(&path).unwrap();
        assert_eq!(config.distances, vec![3, 4]);
        assert_eq!(config.shots, 100);
        assert_eq!(config.seed, 9);
        assert_eq!(config.injection.len(), 1);
        assert!(matches!(
            config.backend,
            Backend::StochasticFlip {
                flip_probability,
                code_only: true,
            } if (flip_probability - 0.05).abs() < 1e-15
        ));
        assert!(config.include_d3);
        assert!(config.held_out);

        std::fs::write(&path, "unknown_field=1\n").unwrap();
        let mut config = ExperimentConfig::default();
        assert!(config.apply_file(&path).is_err());
    }

    #[test]
    fn held_out_errors_run() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            runs: 4,
            ..small_config(dir.path())
        };
        let manifest = cmd_simulate(&config).unwrap();
        let out = dir.path().join("analysis");
        let errors = cmd_errors(&manifest, ModeSelection::Partial, true, &out).unwrap();
        let rows = parse_errors_table(&errors).unwrap();
        for row in rows.iter().filter(|r| r.mode == "partial") {
            assert!(row.mean >= 0.0 && row.mean <= 1.0);
        }
    }
}
