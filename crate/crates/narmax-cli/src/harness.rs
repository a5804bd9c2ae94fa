//! Monte Carlo validation of simulation models against the stochastic
//! process they were derived from.
//!
//! An experiment fixes one random input period `u` of length `N` and drives
//! the stochastic model through `p` periods of that input, each period with
//! a fresh noise stream. Averaging the output periods pointwise estimates
//! the conditional mean `E[y | u]` — the target an unbiased simulation
//! model's free run should track. Each candidate simulation model is then
//! free-run over the same input and compared against both the ensemble mean
//! (the bias/accuracy figure) and the individual noisy realizations (the
//! irreducible noise floor).
//!
//! Two run modes:
//!
//! * [`RunMode::Continuous`] (the default) runs the stochastic model once
//!   over the input tiled `p` times, so state carries across periods and
//!   the kept periods sample steady-state operation. Candidates free-run
//!   over two copies of the input period and keep the second, giving them
//!   the same warmed-up footing.
//! * [`RunMode::Reset`] restarts from zero initial conditions every period;
//!   periods are then independent and run in parallel under
//!   [`Execution::Parallel`]. Candidates free-run over a single period from
//!   zero initial conditions.
//!
//! Determinism: the input period derives from `base_seed` and period `i`'s
//! noise stream from `base_seed + 1 + i`, so a report is reproducible from
//! `(model, candidates, spec)` alone. All reductions run in a fixed order,
//! making serial and parallel execution byte-identical.

use anyhow::{bail, Context, Result};
use narmax_core::{sim, NarmaxModel, SimModel};
use rayon::prelude::*;

/// The input period's sampling law: `u[j] = mean + std * N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSpec {
    pub mean: f64,
    pub std: f64,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec { mean: 0.0, std: 1.0 }
    }
}

/// How state is handled across periods of the stochastic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// One long run over the tiled input; state carries across periods.
    Continuous,
    /// Zero initial conditions at the start of every period.
    Reset,
}

/// Whether independent work runs on one thread or across the thread pool.
/// Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// A complete experiment description.
pub struct ExperimentSpec<'a> {
    pub model: &'a NarmaxModel,
    pub candidates: &'a [(String, SimModel)],
    /// Number of periods `p` driven through the stochastic model.
    pub periods: usize,
    /// Samples per period `N`.
    pub samples: usize,
    /// Leading periods excluded from the ensemble statistics (start-up
    /// transient).
    pub discard: usize,
    pub input: InputSpec,
    pub base_seed: u64,
    pub mode: RunMode,
    pub execution: Execution,
    /// Bin count for the simulation-error histograms.
    pub histogram_bins: usize,
}

impl<'a> ExperimentSpec<'a> {
    /// A spec with the default mode (continuous), serial execution,
    /// unit-normal input, 5 discarded periods, and 50 histogram bins.
    pub fn new(
        model: &'a NarmaxModel,
        candidates: &'a [(String, SimModel)],
        periods: usize,
        samples: usize,
        base_seed: u64,
    ) -> Self {
        ExperimentSpec {
            model,
            candidates,
            periods,
            samples,
            discard: 5,
            input: InputSpec::default(),
            base_seed,
            mode: RunMode::Continuous,
            execution: Execution::Serial,
            histogram_bins: 50,
        }
    }
}

/// Equal-width histogram. `edges` has one more entry than `counts`; the last
/// bin is closed on both sides so the maximum lands in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Per-candidate comparison figures.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateReport {
    pub name: String,
    /// RMS distance between the candidate's free run and the ensemble mean
    /// over the kept periods — the accuracy/bias figure.
    pub rms_vs_mean: f64,
    /// Mean over kept periods of the RMS distance between the candidate's
    /// free run and each noisy realization — the noise-floor figure.
    pub avg_rms_vs_noisy: f64,
    /// The candidate's free-run output over one period.
    pub free_run: Vec<f64>,
    /// Distribution of the pointwise simulation errors `y - ys` across all
    /// kept periods.
    pub histogram: Histogram,
}

/// The full experiment outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub input_period: Vec<f64>,
    pub ensemble_mean: Vec<f64>,
    pub periods_kept: usize,
    pub candidates: Vec<CandidateReport>,
}

/// Root-mean-square of a sequence. Zero for an empty sequence.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    (sum_sq / values.len() as f64).sqrt()
}

/// Builds an equal-width histogram over `data`. Degenerate data (all values
/// equal) collapses to a single bin.
pub fn build_histogram(data: &[f64], bins: usize) -> Histogram {
    if data.is_empty() {
        return Histogram { edges: vec![0.0, 0.0], counts: vec![0] };
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in data {
        min = min.min(v);
        max = max.max(v);
    }
    if !(max > min) || bins == 0 {
        return Histogram { edges: vec![min, max], counts: vec![data.len() as u64] };
    }
    let width = (max - min) / bins as f64;
    let mut edges = Vec::with_capacity(bins + 1);
    for k in 0..bins {
        edges.push(min + k as f64 * width);
    }
    edges.push(max);
    let mut counts = vec![0u64; bins];
    for &v in data {
        let index = (((v - min) / width) as usize).min(bins - 1);
        counts[index] += 1;
    }
    Histogram { edges, counts }
}

fn period_noise(spec: &ExperimentSpec<'_>, period: usize) -> Vec<f64> {
    let seed = spec.base_seed.wrapping_add(1).wrapping_add(period as u64);
    sim::sample_noise(spec.samples, seed)
}

fn validate(spec: &ExperimentSpec<'_>) -> Result<()> {
    if spec.samples == 0 {
        bail!("samples per period must be at least 1");
    }
    if spec.periods <= spec.discard {
        bail!(
            "periods ({}) must exceed the discarded start-up periods ({})",
            spec.periods,
            spec.discard
        );
    }
    if !spec.input.mean.is_finite() || !spec.input.std.is_finite() || spec.input.std < 0.0 {
        bail!("input law must have finite mean and non-negative finite std");
    }
    Ok(())
}

/// Runs the stochastic model and returns one `Vec` per period, in period
/// order.
fn run_periods(spec: &ExperimentSpec<'_>, input: &[f64]) -> Result<Vec<Vec<f64>>> {
    match spec.mode {
        RunMode::Continuous => {
            let total = spec.periods * spec.samples;
            let mut tiled = Vec::with_capacity(total);
            let mut noise = Vec::with_capacity(total);
            for period in 0..spec.periods {
                tiled.extend_from_slice(input);
                noise.extend(period_noise(spec, period));
            }
            let long_run = sim::run_stochastic(spec.model, &tiled, &noise)
                .context("stochastic model run failed")?;
            Ok(long_run.chunks_exact(spec.samples).map(<[f64]>::to_vec).collect())
        }
        RunMode::Reset => {
            let one = |period: usize| -> Result<Vec<f64>> {
                sim::run_stochastic(spec.model, input, &period_noise(spec, period))
                    .with_context(|| format!("stochastic model run failed in period {period}"))
            };
            match spec.execution {
                Execution::Serial => (0..spec.periods).map(one).collect(),
                Execution::Parallel => (0..spec.periods).into_par_iter().map(one).collect(),
            }
        }
    }
}

/// Free-runs one candidate over the input period according to the run mode.
fn run_candidate(spec: &ExperimentSpec<'_>, input: &[f64], model: &SimModel) -> Result<Vec<f64>> {
    match spec.mode {
        RunMode::Continuous => {
            let mut doubled = Vec::with_capacity(2 * input.len());
            doubled.extend_from_slice(input);
            doubled.extend_from_slice(input);
            let full = sim::run_sim_model(model, &doubled)?;
            Ok(full[input.len()..].to_vec())
        }
        RunMode::Reset => Ok(sim::run_sim_model(model, input)?),
    }
}

fn compare_candidate(
    spec: &ExperimentSpec<'_>,
    name: &str,
    free_run: Vec<f64>,
    ensemble_mean: &[f64],
    kept_periods: &[Vec<f64>],
) -> CandidateReport {
    let deviation: Vec<f64> =
        ensemble_mean.iter().zip(&free_run).map(|(m, s)| m - s).collect();
    let rms_vs_mean = rms(&deviation);

    let mut rms_sum = 0.0;
    let mut errors = Vec::with_capacity(kept_periods.len() * spec.samples);
    for period in kept_periods {
        let start = errors.len();
        errors.extend(period.iter().zip(&free_run).map(|(y, s)| y - s));
        rms_sum += rms(&errors[start..]);
    }
    let avg_rms_vs_noisy = rms_sum / kept_periods.len() as f64;
    let histogram = build_histogram(&errors, spec.histogram_bins);

    CandidateReport {
        name: name.to_string(),
        rms_vs_mean,
        avg_rms_vs_noisy,
        free_run,
        histogram,
    }
}

/// Runs the full experiment: ensemble of stochastic runs, pointwise mean,
/// and per-candidate comparison figures.
pub fn run_experiment(spec: &ExperimentSpec<'_>) -> Result<EnsembleReport> {
    validate(spec)?;

    let raw = sim::sample_noise(spec.samples, spec.base_seed);
    let input: Vec<f64> =
        raw.iter().map(|n| spec.input.mean + spec.input.std * n).collect();

    let periods = run_periods(spec, &input)?;
    let kept = &periods[spec.discard..];

    let mut ensemble_mean = vec![0.0; spec.samples];
    for period in kept {
        for (acc, y) in ensemble_mean.iter_mut().zip(period) {
            *acc += y;
        }
    }
    let kept_count = kept.len() as f64;
    for acc in &mut ensemble_mean {
        *acc /= kept_count;
    }

    let one = |(name, model): &(String, SimModel)| -> Result<CandidateReport> {
        let free_run = run_candidate(spec, &input, model)
            .with_context(|| format!("free run of candidate `{name}` failed"))?;
        Ok(compare_candidate(spec, name, free_run, &ensemble_mean, kept))
    };
    let candidates: Vec<CandidateReport> = match spec.execution {
        Execution::Serial => spec.candidates.iter().map(one).collect::<Result<_>>()?,
        Execution::Parallel => {
            spec.candidates.par_iter().map(one).collect::<Result<_>>()?
        }
    };

    Ok(EnsembleReport {
        input_period: input,
        ensemble_mean,
        periods_kept: kept.len(),
        candidates,
    })
}
