//! The simplest analytic model of the repetition code: independent bit flips
//! with probability p per qubit, decoded by majority vote, plus least-squares
//! fits of that model (in log space) to logical-error-vs-distance data.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Majority-vote logical error probability for distance `d` under
/// independent flips of probability `p`. Even distances charge half weight
/// to the ambiguous d/2-flip case.
pub fn binomial_logical_error(d: usize, p: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidArgument("distance must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "flip probability {p} outside [0, 1]"
        )));
    }
    let q = 1.0 - p;
    let term = |k: usize| binomial_coefficient(d, k) * p.powi(k as i32) * q.powi((d - k) as i32);
    let mut total = 0.0;
    if d % 2 == 1 {
        for k in (d + 1) / 2..=d {
            total += term(k);
        }
    } else {
        for k in d / 2 + 1..=d {
            total += term(k);
        }
        total += 0.5 * term(d / 2);
    }
    Ok(total)
}

/// Leading suppression factor (p / (1-p))^ceil(d/2) of the logical error
/// with distance.
pub fn decay_factor(d: usize, p: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidArgument("distance must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&p) || p <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "flip probability {p} outside (0, 0.5)"
        )));
    }
    Ok((p / (1.0 - p)).powi(d.div_ceil(2) as i32))
}

/// Two-round combined model: the stored bit survives only if both rounds
/// decode correctly.
pub fn two_round_logical_error(d: usize, p0: f64, p1: f64) -> Result<f64> {
    let a = binomial_logical_error(d, p0)?;
    let b = binomial_logical_error(d, p1)?;
    Ok(1.0 - (1.0 - a) * (1.0 - b))
}

/// A fitted physical error probability with residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum FitResult {
    Single {
        p: f64,
        residual_log_sse: f64,
        stderr: Option<f64>,
    },
    TwoRound {
        /// Reported with p0 >= p1.
        p0: f64,
        p1: f64,
        constraint_p: f64,
        residual_log_sse: f64,
        stderr_p0: Option<f64>,
        stderr_p1: Option<f64>,
    },
}

const P_LO: f64 = 1e-6;
const P_HI: f64 = 0.5 - 1e-6;
const REL_TOL: f64 = 1e-9;

/// Golden-section minimization of `f` on [lo, hi] after a coarse grid scan
/// to bracket the global minimum.
fn minimize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 512;
    let step = (hi - lo) / GRID as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..=GRID {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);

    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > REL_TOL * (a.abs() + b.abs()).max(1e-300) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    (a + b) / 2.0
}

fn validate_fit_data(data: &BTreeMap<usize, f64>) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit needs at least 2 distances, got {}",
            data.len()
        )));
    }
    for (&d, &p) in data {
        if d < 1 {
            return Err(Error::InvalidArgument("distance must be >= 1".into()));
        }
        if p <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "logical error probability for d={d} must be positive for a log-space fit, got {p}"
            )));
        }
    }
    Ok(())
}

fn log_sse_single(data: &BTreeMap<usize, f64>, p: f64) -> f64 {
    data.iter()
        .map(|(&d, &obs)| {
            let model = binomial_logical_error(d, p).unwrap();
            let r = obs.ln() - model.ln();
            r * r
        })
        .sum()
}

/// Fits the single-round model by least squares on the logarithms of the
/// logical error probabilities.
pub fn fit_single(data: &BTreeMap<usize, f64>) -> Result<FitResult> {
    validate_fit_data(data)?;
    let p = minimize_1d(|p| log_sse_single(data, p), P_LO, P_HI);
    Ok(FitResult::Single {
        p,
        residual_log_sse: log_sse_single(data, p),
        stderr: None,
    })
}

fn log_sse_two_round(data: &BTreeMap<usize, f64>, p0: f64, p1: f64) -> f64 {
    data.iter()
        .map(|(&d, &obs)| {
            let model = two_round_logical_error(d, p0, p1).unwrap();
            let r = obs.ln() - model.ln();
            r * r
        })
        .sum()
}

/// Fits the two-round combined model under the constraint p0 + p1 = p_total.
/// The objective is symmetric under swapping the rounds, so the search runs
/// over p0 in [p_total / 2, p_total] and the result reports p0 >= p1.
pub fn fit_two_round(data: &BTreeMap<usize, f64>, p_total: f64) -> Result<FitResult> {
    validate_fit_data(data)?;
    if !(0.0..0.5).contains(&p_total) || p_total <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "constraint p_total {p_total} outside (0, 0.5)"
        )));
    }
    let objective = |p0: f64| log_sse_two_round(data, p0, p_total - p0);
    let p0 = minimize_1d(objective, p_total / 2.0, p_total);
    let p1 = p_total - p0;
    Ok(FitResult::TwoRound {
        p0,
        p1,
        constraint_p: p_total,
        residual_log_sse: log_sse_two_round(data, p0, p1),
        stderr_p0: None,
        stderr_p1: None,
    })
}

fn bootstrap_means<R: Rng>(
    run_data: &BTreeMap<usize, Vec<f64>>,
    rng: &mut R,
) -> BTreeMap<usize, f64> {
    run_data
        .iter()
        .map(|(&d, runs)| {
            let n = runs.len();
            let mean = (0..n)
                .map(|_| runs[rng.gen_range(0..n)])
                .sum::<f64>()
                / n as f64;
            (d, mean)
        })
        .collect()
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64)
        .sqrt()
}

/// Single-round fit with a parameter error bar from nonparametric
/// resampling of the per-run logical error values.
pub fn fit_single_bootstrap(
    run_data: &BTreeMap<usize, Vec<f64>>,
    n_resamples: usize,
    seed: u64,
) -> Result<FitResult> {
    let point: BTreeMap<usize, f64> = run_data
        .iter()
        .map(|(&d, runs)| (d, runs.iter().sum::<f64>() / runs.len() as f64))
        .collect();
    let base = fit_single(&point)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fitted = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        let resampled = bootstrap_means(run_data, &mut rng);
        if resampled.values().all(|&p| p > 0.0) {
            if let Ok(FitResult::Single { p, .. }) = fit_single(&resampled) {
                fitted.push(p);
            }
        }
    }
    match base {
        FitResult::Single {
            p,
            residual_log_sse,
            ..
        } => Ok(FitResult::Single {
            p,
            residual_log_sse,
            stderr: Some(sample_std(&fitted)),
        }),
        other => Ok(other),
    }
}

/// Two-round fit with bootstrap error bars, as for the single fit.
pub fn fit_two_round_bootstrap(
    run_data: &BTreeMap<usize, Vec<f64>>,
    p_total: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<FitResult> {
    let point: BTreeMap<usize, f64> = run_data
        .iter()
        .map(|(&d, runs)| (d, runs.iter().sum::<f64>() / runs.len() as f64))
        .collect();
    let base = fit_two_round(&point, p_total)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fitted0 = Vec::with_capacity(n_resamples);
    let mut fitted1 = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        let resampled = bootstrap_means(run_data, &mut rng);
        if resampled.values().all(|&p| p > 0.0) {
            if let Ok(FitResult::TwoRound { p0, p1, .. }) = fit_two_round(&resampled, p_total) {
                fitted0.push(p0);
                fitted1.push(p1);
            }
        }
    }
    match base {
        FitResult::TwoRound {
            p0,
            p1,
            constraint_p,
            residual_log_sse,
            ..
        } => Ok(FitResult::TwoRound {
            p0,
            p1,
            constraint_p,
            residual_log_sse,
            stderr_p0: Some(sample_std(&fitted0)),
            stderr_p1: Some(sample_std(&fitted1)),
        }),
        other => Ok(other),
    }
}
