//! Time-domain execution of prediction and simulation models, plus the
//! deterministic Gaussian sampler the Monte Carlo harness is built on.
//!
//! Both run functions compile the polynomial into a flat term list first so
//! the per-sample inner loop touches no maps, then recurse with zero initial
//! conditions: any reference to a sample before the start reads 0. Outputs
//! are checked for finiteness as they are produced — unstable free runs
//! surface as a structured [`Error::NonFinite`] with the first offending
//! index instead of silently filling the buffer with NaN.
//!
//! The sampler is deliberately hand-rolled rather than delegated to an RNG
//! crate: reproducibility across runs, platforms, and thread counts is part
//! of this crate's contract, so the exact sample stream must be pinned by
//! code this repository owns. SplitMix64 drives Box–Muller; both algorithms
//! are small, well studied, and documented below precisely enough to
//! reimplement bit-for-bit.

use alloc::vec::Vec;

use libm::{cos, log, sin, sqrt};

use crate::error::{Error, Result};
use crate::model::{pow_u32, NarmaxModel, Polynomial, SignalKind, SimModel};

// ───────────────────────── compiled evaluation ──────────────────────────

/// One term flattened for the inner loop: coefficient and (buffer, lag,
/// exponent) factors.
struct CompiledTerm {
    coefficient: f64,
    factors: Vec<(SignalKind, usize, u32)>,
}

/// A polynomial compiled to flat terms.
struct Compiled {
    terms: Vec<CompiledTerm>,
}

impl Compiled {
    fn new(poly: &Polynomial) -> Self {
        let terms = poly
            .terms()
            .iter()
            .map(|t| CompiledTerm {
                coefficient: t.coefficient,
                factors: t
                    .exponents
                    .iter()
                    .map(|(s, e)| (s.kind, s.lag as usize, *e))
                    .collect(),
            })
            .collect();
        Compiled { terms }
    }

    /// Evaluates at sample `k` with zero padding before the start.
    fn eval(&self, k: usize, input: &[f64], output: &[f64], noise: &[f64]) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let mut value = term.coefficient;
            for &(kind, lag, exponent) in &term.factors {
                let sample = match k.checked_sub(lag) {
                    Some(index) => match kind {
                        SignalKind::Input => input[index],
                        SignalKind::Output => output[index],
                        SignalKind::Noise => noise[index],
                    },
                    None => 0.0,
                };
                value *= pow_u32(sample, exponent);
            }
            acc += value;
        }
        acc
    }
}

/// Checks one produced sample, converting overflow/NaN into a structured
/// error carrying the first offending index.
fn check_finite(value: f64, index: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { index })
    }
}

/// Runs a prediction model forward over an input and a pre-drawn buffer of
/// standard-normal samples (`noise[k]` is the model's `e[k]`):
///
/// ```text
/// y[k] = f(u, y, e) + noise_scale * e[k] + noise_mean
/// ```
///
/// with zero initial conditions. `input` and `noise` must have equal length;
/// the output has the same length.
pub fn run_stochastic(model: &NarmaxModel, input: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if input.len() != noise.len() {
        return Err(Error::LengthMismatch { expected: input.len(), actual: noise.len() });
    }
    let compiled = Compiled::new(model.regression());
    let mut output = Vec::with_capacity(input.len());
    for k in 0..input.len() {
        let value = compiled.eval(k, input, &output, noise)
            + model.noise_scale() * noise[k]
            + model.noise_mean();
        output.push(check_finite(value, k)?);
    }
    Ok(output)
}

/// Free-runs a simulation model over an input: `ys[k] = f(u, ys)` with zero
/// initial conditions. The output has the input's length.
pub fn run_sim_model(model: &SimModel, input: &[f64]) -> Result<Vec<f64>> {
    let compiled = Compiled::new(model.regression());
    let mut output = Vec::with_capacity(input.len());
    for k in 0..input.len() {
        let value = compiled.eval(k, input, &output, &[]);
        output.push(check_finite(value, k)?);
    }
    Ok(output)
}

// ───────────────────────── deterministic sampler ──────────────────────────

/// Deterministic standard-normal sampler: SplitMix64 for uniform bits,
/// Box–Muller for the Gaussian transform, second sample of each pair cached.
///
/// SplitMix64 (Steele, Lea & Flood 2014): the state advances by the constant
/// `0x9E3779B97F4A7C15` and the output is the advanced state mixed by two
/// xor-shift-multiply rounds (`0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`) and
/// a final 31-bit xor-shift. Uniforms take the top 53 bits: `u1` maps into
/// `(0, 1]` (so `ln u1` is finite) and `u2` into `[0, 1)`. Box–Muller then
/// yields the pair `r*cos(2*pi*u2)`, `r*sin(2*pi*u2)` with
/// `r = sqrt(-2 ln u1)`.
///
/// The exact stream for a given seed is part of the crate's compatibility
/// contract; changing any constant or the call order is a breaking change.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    state: u64,
    cached: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        NormalSampler { state: seed, cached: None }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Next standard-normal sample.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(second) = self.cached.take() {
            return second;
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        // (0, 1]: the +1 excludes 0 so the logarithm stays finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * SCALE;
        // [0, 1).
        let u2 = (self.next_u64() >> 11) as f64 * SCALE;
        let radius = sqrt(-2.0 * log(u1));
        let angle = 2.0 * core::f64::consts::PI * u2;
        self.cached = Some(radius * sin(angle));
        radius * cos(angle)
    }
}

/// Draws `n` standard-normal samples from a fresh sampler seeded with `seed`.
pub fn sample_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut sampler = NormalSampler::new(seed);
    (0..n).map(|_| sampler.next_normal()).collect()
}

// ───────────────────────── tests ──────────────────────────
