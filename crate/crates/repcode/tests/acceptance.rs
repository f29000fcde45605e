//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single pass line (run with `--nocapture` to see them all).

use std::collections::BTreeMap;
use std::time::Instant;

use repcode::circuit::{
    build_circuit, outcome_string, sample_index, simulate_exact, CodeLayout, InjectionPoint,
    NoiseModel,
};
use repcode::cli::{
    cmd_errors, cmd_fit, cmd_simulate, exact_distribution, exact_ones_histogram, ExperimentConfig,
    ModeSelection,
};
use repcode::decoder::{
    logical_error_per_run, lookup_from_distributions, majority_vote, DecodeMode,
};
use repcode::ingest::{crossover_fraction, crossover_point};
use repcode::model::{
    binomial_logical_error, fit_single, fit_two_round, two_round_logical_error, FitResult,
};
use repcode::sampling::{run_experiment, Backend, CountsTable, RunConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pass(n: usize, what: &str) {
    println!("criterion {n}: PASS - {what}");
}

fn runs_of(tables: &[CountsTable], d: usize, n_runs: usize) -> Vec<(CountsTable, CountsTable)> {
    (0..n_runs)
        .map(|r| {
            let c0 = tables
                .iter()
                .find(|t| t.d == d && !t.encoded && t.run_index == r)
                .unwrap()
                .clone();
            let c1 = tables
                .iter()
                .find(|t| t.d == d && t.encoded && t.run_index == r)
                .unwrap()
                .clone();
            (c0, c1)
        })
        .collect()
}

#[test]
fn criterion_01_noiseless_exactness() {
    let start = Instant::now();
    for d in 2..=8 {
        let layout = CodeLayout::new(d).unwrap();
        let mut dists = Vec::new();
        for encoded in [false, true] {
            let dist = exact_distribution(d, encoded, &NoiseModel::noiseless()).unwrap();
            let ideal = layout.ideal_codeword(encoded);
            let ideal_idx: usize = ideal
                .chars()
                .enumerate()
                .map(|(i, c)| if c == '1' { 1usize << i } else { 0 })
                .sum();
            assert!(
                (dist[ideal_idx] - 1.0).abs() < 1e-12,
                "d={d} E={} not a point mass",
                encoded as u8
            );
            dists.push(dist);
        }
        for mode in [DecodeMode::Full, DecodeMode::Partial] {
            let table = lookup_from_distributions(d, mode, &dists[0], &dists[1]);
            assert_eq!(
                repcode::decoder::logical_error_probability(&table, false),
                0.0
            );
            assert_eq!(
                repcode::decoder::logical_error_probability(&table, true),
                0.0
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(1, "noiseless point masses and zero logical error for d in 2..=8");
}

#[test]
fn criterion_02_stochastic_flip_oracle() {
    let start = Instant::now();
    let p = 0.1;
    let shots: u64 = 100_000;
    let config = RunConfig {
        shots_per_run: shots,
        n_runs: 1,
        master_seed: 11,
        d_list: vec![3],
        backend: Backend::StochasticFlip {
            flip_probability: p,
            code_only: true,
        },
    };
    let tables = run_experiment(&config, &NoiseModel::noiseless()).unwrap();
    let expected = 3.0 * p * p * (1.0 - p) + p * p * p;
    let se = (expected * (1.0 - expected) / shots as f64).sqrt();
    for table in tables.iter() {
        let mut failures = 0u64;
        for (key, count) in &table.counts {
            let code: String = key.chars().step_by(2).take(3).collect();
            let vote = majority_vote(&code).unwrap();
            if vote.decoded != table.encoded {
                failures += count;
            }
        }
        let rate = failures as f64 / shots as f64;
        assert!(
            (rate - expected).abs() < 3.0 * se,
            "E={}: rate {rate} vs expected {expected} (3se = {})",
            table.encoded as u8,
            3.0 * se
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(2, "majority-vote error 0.028 within 3 binomial standard errors");
}

#[test]
fn criterion_03_exact_vs_sampled_tv_distance() {
    let layout = CodeLayout::new(3).unwrap();
    let noise = NoiseModel::default_biased();
    let shots = 100_000usize;
    for encoded in [false, true] {
        let seq = build_circuit(&layout, encoded, &noise).unwrap();
        let exact = simulate_exact(&seq).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17 + encoded as u64);
        let mut empirical = vec![0u64; exact.len()];
        for _ in 0..shots {
            empirical[sample_index(&exact, &mut rng)] += 1;
        }
        let tv: f64 = exact
            .iter()
            .zip(&empirical)
            .map(|(&p, &c)| (p - c as f64 / shots as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "E={}: TV distance {tv}", encoded as u8);
    }
    pass(3, "total-variation distance of 1e5 shots below 0.01 for d=3, both E");
}

#[test]
fn criterion_04_analytic_model_identities() {
    let mut p = 0.01;
    while p < 0.495 {
        assert!((binomial_logical_error(1, p).unwrap() - p).abs() < 1e-12);
        assert!((binomial_logical_error(2, p).unwrap() - p).abs() < 1e-12);
        p += 0.01;
    }
    for d in 1..=10 {
        assert!((binomial_logical_error(d, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }
    let p = 1e-3;
    for d in [3usize, 5, 7] {
        let ratio =
            binomial_logical_error(d + 1, p).unwrap() / binomial_logical_error(d, p).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "d={d}: ratio {ratio}");
    }
    pass(4, "d=1/d=2 identities, P(d, 0.5) = 0.5, odd/even ratio within 1% at p = 1e-3");
}

#[test]
fn criterion_05_fit_recovery() {
    let start = Instant::now();
    let data: BTreeMap<usize, f64> = (4..=8)
        .map(|d| (d, binomial_logical_error(d, 0.09).unwrap()))
        .collect();
    match fit_single(&data).unwrap() {
        FitResult::Single { p, .. } => assert!((p - 0.09).abs() < 1e-6, "{p}"),
        _ => unreachable!(),
    }
    let data: BTreeMap<usize, f64> = (4..=8)
        .map(|d| (d, two_round_logical_error(d, 0.05, 0.03).unwrap()))
        .collect();
    match fit_two_round(&data, 0.08).unwrap() {
        FitResult::TwoRound { p0, p1, .. } => {
            assert!((p0 - 0.05).abs() < 1e-6, "{p0}");
            assert!((p1 - 0.03).abs() < 1e-6, "{p1}");
        }
        _ => unreachable!(),
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(5, "single fit recovers p = 0.09 and constrained fit recovers (0.05, 0.03) to 1e-6");
}

#[test]
fn criterion_06_full_vs_partial_benefit() {
    let start = Instant::now();
    let noise = NoiseModel::default_biased();
    let mut successes = 0;
    for seed in 0..10u64 {
        let config = RunConfig {
            shots_per_run: 8192,
            n_runs: 10,
            master_seed: seed,
            d_list: vec![5],
            backend: Backend::ExactSample,
        };
        let tables = run_experiment(&config, &noise).unwrap();
        let runs = runs_of(&tables, 5, 10);
        let full = logical_error_per_run(&runs, DecodeMode::Full).unwrap();
        let partial = logical_error_per_run(&runs, DecodeMode::Partial).unwrap();
        let gap = partial.mean[1] - full.mean[1];
        // stderr of each mean: across-run standard deviation over sqrt(n).
        let n = runs.len() as f64;
        let combined =
            ((full.stderr[1].powi(2) + partial.stderr[1].powi(2)) / n).sqrt();
        if gap > 0.0 && gap > 2.0 * combined {
            successes += 1;
        }
    }
    assert!(successes >= 8, "only {successes}/10 seeds showed the gap");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        6,
        "full decoding beats partial at d=5, E=1 by more than twice the combined stderr in >= 8/10 seeds",
    );
}

#[test]
fn criterion_07_d3_encoded_zero_anomaly() {
    let noise = NoiseModel::default_biased();
    let mut successes = 0;
    for seed in 0..10u64 {
        let config = RunConfig {
            shots_per_run: 8192,
            n_runs: 10,
            master_seed: seed,
            d_list: vec![3],
            backend: Backend::ExactSample,
        };
        let tables = run_experiment(&config, &noise).unwrap();
        let runs = runs_of(&tables, 3, 10);
        let full = logical_error_per_run(&runs, DecodeMode::Full).unwrap();
        let partial = logical_error_per_run(&runs, DecodeMode::Partial).unwrap();
        if partial.mean[0] < full.mean[0] {
            successes += 1;
        }
    }
    // Soft criterion: a majority failure calls for investigation rather
    // than rejection, so report instead of asserting hard on the margin.
    if successes > 5 {
        pass(
            7,
            "partial decoding beats full decoding for d=3, E=0 in the majority of seeds",
        );
    } else {
        println!(
            "criterion 7: SOFT FAIL - d=3 E=0 anomaly seen in only {successes}/10 seeds; investigate"
        );
    }
    assert!(successes > 5, "anomaly seen in only {successes}/10 seeds");
}

#[test]
fn criterion_08_crossover_shift() {
    let d = 6;
    let biased = NoiseModel::default_biased();
    let h0 = exact_ones_histogram(d, false, &biased).unwrap();
    let h1 = exact_ones_histogram(d, true, &biased).unwrap();
    let k = crossover_point(&h0, &h1).unwrap();
    assert!(k <= d / 2);
    let crossing = crossover_fraction(&h0, &h1).unwrap().unwrap();
    assert!(crossing < d as f64 / 2.0, "crossing {crossing} not below d/2");

    let symmetric = NoiseModel {
        theta_zero: std::f64::consts::PI / 20.0,
        theta_one: std::f64::consts::PI / 20.0,
        injection_points: InjectionPoint::ALL.iter().copied().collect(),
    };
    let h0 = exact_ones_histogram(d, false, &symmetric).unwrap();
    let h1 = exact_ones_histogram(d, true, &symmetric).unwrap();
    assert!((h0.weights[d / 2] - h1.weights[d / 2]).abs() < 1e-10);
    pass(
        8,
        "biased crossover shifted below d/2 = 3; symmetric noise balanced at k = 3 within 1e-10",
    );
}

#[test]
fn criterion_09_pipeline_end_to_end() {
    // The device-data fit targets need the published raw data; the pipeline
    // itself must run end to end on simulated data in the same file format.
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        seed: 3,
        out_dir: dir.path().join("counts"),
        ..Default::default()
    };
    let manifest = cmd_simulate(&config).unwrap();
    let analysis = dir.path().join("analysis");
    let errors = cmd_errors(&manifest, ModeSelection::Both, false, &analysis).unwrap();
    let report = cmd_fit(&errors, false, None, &analysis).unwrap();
    assert!(!report.is_empty(), "no fit series produced");
    for row in &report {
        match &row.fit {
            FitResult::Single { p, .. } => assert!(*p > 0.0 && *p < 0.5),
            FitResult::TwoRound { p0, p1, .. } => {
                assert!(*p0 >= 0.0 && *p0 < 0.5);
                assert!(*p1 >= 0.0 && *p1 < 0.5);
            }
        }
    }

    match std::env::var("REPCODE_DEVICE_MANIFEST") {
        Ok(device_manifest) => {
            let device_out = dir.path().join("device");
            let errors = cmd_errors(
                std::path::Path::new(&device_manifest),
                ModeSelection::Both,
                false,
                &device_out,
            )
            .unwrap();
            let report = cmd_fit(&errors, false, None, &device_out).unwrap();
            let single = |encoded: bool| -> f64 {
                report
                    .iter()
                    .find_map(|r| match (&r.fit, r.mode.as_str(), r.encoded == encoded) {
                        (FitResult::Single { p, .. }, "partial", true) => Some(*p),
                        _ => None,
                    })
                    .unwrap()
            };
            assert!((single(false) - 0.088).abs() < 0.005);
            assert!((single(true) - 0.102).abs() < 0.005);
            let two = |encoded: bool| -> (f64, f64) {
                report
                    .iter()
                    .find_map(|r| match (&r.fit, r.mode.as_str(), r.encoded == encoded) {
                        (FitResult::TwoRound { p0, p1, .. }, "full", true) => Some((*p0, *p1)),
                        _ => None,
                    })
                    .unwrap()
            };
            let (p0, p1) = two(false);
            assert!((p0 - 0.054).abs() < 0.01 && (p1 - 0.034).abs() < 0.01);
            let (p0, p1) = two(true);
            assert!((p0 - 0.051).abs() < 0.01 && (p1 - 0.051).abs() < 0.01);
            pass(9, "pipeline ran end to end; device-data fit parameters reproduced");
        }
        Err(_) => pass(
            9,
            "pipeline ran end to end on simulated data (device raw data not supplied; set REPCODE_DEVICE_MANIFEST to check fit targets)",
        ),
    }
}

#[test]
fn criterion_10_decoder_brute_force_equivalence() {
    let start = Instant::now();
    let d = 2;
    let noise = NoiseModel::default_biased();
    let dist0 = exact_distribution(d, false, &noise).unwrap();
    let dist1 = exact_distribution(d, true, &noise).unwrap();
    let table = lookup_from_distributions(d, DecodeMode::Partial, &dist0, &dist1);

    // Direct enumeration of all 4 partial keys.
    let keys: Vec<String> = (0..4usize)
        .map(|k| outcome_string(k, 2))
        .collect();
    for encoded in [false, true] {
        let mut brute = 0.0;
        for key in &keys {
            let pe = table.pi(key, encoded);
            let po = table.pi(key, !encoded);
            if po > pe {
                brute += pe;
            } else if po == pe {
                brute += pe / 2.0;
            }
        }
        let got = repcode::decoder::logical_error_probability(&table, encoded);
        assert!((got - brute).abs() < 1e-12, "E={}", encoded as u8);
    }

    // Exhaustive enumeration of all 16 deterministic decoders on the 4
    // keys: the argmax decoder's average error is minimal.
    let argmax_avg = (repcode::decoder::logical_error_probability(&table, false)
        + repcode::decoder::logical_error_probability(&table, true))
        / 2.0;
    let mut best = f64::INFINITY;
    for assignment in 0..16usize {
        let mut avg = 0.0;
        for (i, key) in keys.iter().enumerate() {
            let decodes_to_one = assignment >> i & 1 == 1;
            if decodes_to_one {
                avg += table.pi(key, false) / 2.0;
            } else {
                avg += table.pi(key, true) / 2.0;
            }
        }
        best = best.min(avg);
    }
    assert!(
        argmax_avg <= best + 1e-12,
        "argmax {argmax_avg} vs best deterministic {best}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        10,
        "Eq-by-enumeration match at d=2 and argmax optimality over all 16 deterministic decoders",
    );
}
