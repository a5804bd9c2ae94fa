//! Derivation of simulation models from prediction models.
//!
//! Given a prediction model `y[k] = f(u, y, e) + e[k]`, the free-run
//! simulation target is the conditional expectation of `y[k]` given the input
//! alone. Noise enters `f` only through lagged iid standard-normal samples,
//! so the expectation of each term factorizes over its noise powers:
//! `E[e^d] = (d-1)!!` for even `d` and 0 for odd `d` (the `He_0` coefficient
//! of the monomial's Hermite expansion — see the `hermite` module). Output
//! references are the hard part, and the four derivations here differ only in
//! how they treat them:
//!
//! * [`derive_exact`] — for models whose terms are either products of inputs
//!   and noise, or purely linear in a single lagged output, the expectation
//!   commutes with the recursion and the result is exact.
//! * [`derive_noise_zeroed`] — the conventional biased shortcut: every
//!   noise-bearing term is dropped (noise set to 0, not averaged).
//! * [`derive_l_approximate`] — `l` rounds of recursive substitution: each
//!   round replaces every occurrence of the minimum-lag output `y[k-s]` with
//!   the model's own shifted right-hand side (`f` shifted by `s`, plus the
//!   now-explicit noise sample `e[k-s]`). After `l` rounds the noise moments
//!   are taken and the surviving output references (all at lag `l+1` or
//!   deeper) are read from the simulated output itself.
//! * [`derive_truncated`] — the same substitution ladder, but only the
//!   lowest-power occurrences of the minimum-lag output are expanded at each
//!   round, and every term still carrying an output reference afterwards is
//!   dropped before the moments are taken. Higher-power occurrences are
//!   destined for the cut, so expanding them would only manufacture terms the
//!   truncation deletes; skipping them keeps exactly the dominant branch of
//!   the infinite impulse-response expansion.
//!
//! Substitution is an exact rewrite (the substituted model reproduces the
//! original sample-for-sample once the start-up transient has passed), so all
//! approximation error enters in the final expectation step.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::hermite::{gaussian_moment, hermite_polynomial, monomial_to_hermite};
use crate::hermite::eval_monomial_coefficients;
use crate::model::{
    ExponentMap, LaggedMonomial, NarmaxModel, Polynomial, SignalKind, SignalRef, SimModel,
    DEFAULT_TERM_BUDGET,
};

/// Knobs for the long-running derivations.
///
/// `term_budget` caps the size of every intermediate polynomial;
/// `cancel` is polled between substitution rounds so a host can abort a
/// runaway derivation cooperatively (raising the flag makes the derivation
/// return [`Error::Cancelled`]).
#[derive(Debug, Clone, Copy)]
pub struct DeriveOptions<'a> {
    pub term_budget: usize,
    pub cancel: Option<&'a AtomicBool>,
}

impl Default for DeriveOptions<'_> {
    fn default() -> Self {
        DeriveOptions { term_budget: DEFAULT_TERM_BUDGET, cancel: None }
    }
}

impl DeriveOptions<'_> {
    fn check_cancelled(&self) -> Result<()> {
        match self.cancel {
            Some(flag) if flag.load(Ordering::Relaxed) => Err(Error::Cancelled),
            _ => Ok(()),
        }
    }
}

/// Splits a term into its non-noise part and its noise exponents.
fn split_noise(term: &LaggedMonomial) -> (LaggedMonomial, Vec<u32>) {
    let mut kept = LaggedMonomial::constant(term.coefficient);
    let mut noise_exponents = Vec::new();
    for (signal, exponent) in &term.exponents {
        if signal.kind == SignalKind::Noise {
            noise_exponents.push(*exponent);
        } else {
            kept.exponents.insert(*signal, *exponent);
        }
    }
    (kept, noise_exponents)
}

/// Replaces every noise power with its standard-normal moment: terms with any
/// odd noise exponent vanish, the rest keep their input/output factors with
/// the coefficient multiplied by the product of `(d-1)!!` moments.
fn take_noise_expectation(poly: &Polynomial) -> Result<Polynomial> {
    let mut resolved = Vec::new();
    for term in poly.terms() {
        let (mut kept, noise_exponents) = split_noise(term);
        if noise_exponents.iter().any(|d| d % 2 == 1) {
            continue;
        }
        for d in noise_exponents {
            kept.coefficient *= gaussian_moment(d)?;
        }
        resolved.push(kept);
    }
    Ok(Polynomial::from_terms(resolved))
}

/// Finishes a derivation: takes noise moments, adds the expectation of the
/// additive current-sample noise, and re-types the result as a simulation
/// model (output references now denote the simulated output).
fn finish(model: &NarmaxModel, poly: &Polynomial, approx_order: Option<u32>) -> Result<SimModel> {
    let mut expected = take_noise_expectation(poly)?;
    if model.noise_mean() != 0.0 {
        expected = expected.add_term(LaggedMonomial::constant(model.noise_mean()));
    }
    SimModel::new(expected, approx_order)
}

/// Exact simulation model for the restricted class whose terms are either
/// products of inputs and noise or purely linear in one lagged output.
///
/// For that class the expected output satisfies the same linear recursion in
/// itself, so replacing each noise power by its moment and each output by the
/// simulated output is exact. Any other structure (an output raised to a
/// power, or multiplied by anything) is rejected with
/// [`Error::NotSimplifiedClass`].
pub fn derive_exact(model: &NarmaxModel) -> Result<SimModel> {
    for term in model.regression().terms() {
        let output_factors: Vec<_> = term
            .exponents
            .iter()
            .filter(|(s, _)| s.kind == SignalKind::Output)
            .collect();
        if output_factors.is_empty() {
            continue;
        }
        if term.exponents.len() > 1 || *output_factors[0].1 > 1 {
            return Err(Error::NotSimplifiedClass {
                detail: format!(
                    "term {term} is not purely linear in a single lagged output"
                ),
            });
        }
    }
    finish(model, model.regression(), None)
}

/// The conventional biased shortcut: drops every noise-bearing term (setting
/// the noise signal to zero rather than averaging it) and re-types outputs as
/// simulated outputs. The additive noise contributes its mean.
pub fn derive_noise_zeroed(model: &NarmaxModel) -> Result<SimModel> {
    let kept = Polynomial::from_terms(
        model
            .regression()
            .terms()
            .iter()
            .filter(|t| !t.references_kind(SignalKind::Noise))
            .cloned(),
    );
    let mut regression = kept;
    if model.noise_mean() != 0.0 {
        regression = regression.add_term(LaggedMonomial::constant(model.noise_mean()));
    }
    SimModel::new(regression, Some(0))
}

/// One exact substitution round: every occurrence of the output at exactly
/// lag `step` (including inside powers) is replaced by the model's defining
/// equation shifted by `step` — the regression with all lags deepened by
/// `step`, plus the additive noise made explicit
/// (`noise_scale * e[k-step] + noise_mean`). A model with no output
/// reference at that lag is returned unchanged.
///
/// This is an identity rewrite: on any shared input/noise realization the
/// substituted model reproduces the original output. For a regression with
/// no constant term (and zero noise mean) the match is exact from the first
/// sample — before the start every replacement factor zero-pads to 0,
/// agreeing with the zero-initial-condition convention. A constant inside
/// the defining equation still evaluates at negative time indices where the
/// original reads `y = 0`, so for such models the two forms agree only up to
/// a start-up transient that decays at the recursion's own rate.
pub fn substitute_once(
    model: &NarmaxModel,
    step: u32,
    options: &DeriveOptions<'_>,
) -> Result<NarmaxModel> {
    options.check_cancelled()?;
    let rewritten = substitute_in(model.regression(), model, step, options, |_| true)?;
    NarmaxModel::from_standardized(rewritten, model.noise_scale(), model.noise_mean())
}

/// Rewrites `working` by replacing occurrences of the output at lag `step`
/// (those whose exponent passes `expand`) with `source`'s defining equation
/// shifted by `step`. The replacement always comes from the original model —
/// the equation for `y[k-step]` is the one equation the process has — never
/// from the partially substituted working polynomial.
fn substitute_in(
    working: &Polynomial,
    source: &NarmaxModel,
    step: u32,
    options: &DeriveOptions<'_>,
    expand: impl Fn(u32) -> bool,
) -> Result<Polynomial> {
    let target = SignalRef::output(step);
    // y[k-step] = f shifted by step, plus the additive noise made explicit.
    let mut replacement = source
        .regression()
        .shifted(step)
        .add_term(LaggedMonomial::new(source.noise_scale(), [(SignalRef::noise(step), 1)]));
    if source.noise_mean() != 0.0 {
        replacement = replacement.add_term(LaggedMonomial::constant(source.noise_mean()));
    }
    let mut power_cache: BTreeMap<u32, Polynomial> = BTreeMap::new();
    let mut accumulated = Polynomial::zero();
    let mut total_terms = 0usize;
    for term in working.terms() {
        let substituted = match term.exponents.get(&target) {
            Some(&exponent) if expand(exponent) => {
                if !power_cache.contains_key(&exponent) {
                    let power = replacement.pow_checked(exponent, options.term_budget)?;
                    power_cache.insert(exponent, power);
                }
                let mut base = term.clone();
                base.exponents.remove(&target);
                Polynomial::from_terms([base])
                    .mul_checked(&power_cache[&exponent], options.term_budget)?
            }
            _ => Polynomial::from_terms([term.clone()]),
        };
        total_terms += substituted.terms().len();
        if total_terms > options.term_budget {
            return Err(Error::TermBudgetExceeded {
                budget: options.term_budget,
                required: total_terms,
            });
        }
        accumulated = accumulated.add(&substituted);
    }
    Ok(accumulated)
}

/// `l` full substitution rounds, each at the working polynomial's current
/// minimum output lag, every round drawing its replacement from `model`'s
/// defining equation. Returns the rewritten — still exact — prediction
/// model. Rounds stop early when no output reference remains.
pub fn substitute_chain(
    model: &NarmaxModel,
    l: u32,
    options: &DeriveOptions<'_>,
) -> Result<NarmaxModel> {
    let mut working = model.regression().clone();
    for _ in 0..l {
        options.check_cancelled()?;
        let Some(step) = working.min_lag(SignalKind::Output) else {
            break;
        };
        working = substitute_in(&working, model, step, options, |_| true)?;
    }
    NarmaxModel::from_standardized(working, model.noise_scale(), model.noise_mean())
}

/// `l`-step approximate simulation model: `l` substitution rounds (each at
/// the current minimum output lag), then noise moments, with the surviving
/// output references — all at lag `l+1` or deeper — read from the simulated
/// output. Models with no output recursion are unaffected by the rounds, so
/// any `l` reproduces the exact derivation for them. `l = 0` takes the
/// moments directly, treating the simulated output as deterministic.
pub fn derive_l_approximate(
    model: &NarmaxModel,
    l: u32,
    options: &DeriveOptions<'_>,
) -> Result<SimModel> {
    let expanded = substitute_chain(model, l, options)?;
    finish(model, expanded.regression(), Some(l))
}

/// Truncated `l`-step model: the substitution ladder expands only the
/// lowest-power occurrences of the minimum-lag output at each round, and
/// every term still referencing an output afterwards is dropped before the
/// moments are taken. The result is a finite impulse-response approximation
/// of the expected output — the baseline the approximate family is judged
/// against.
pub fn derive_truncated(
    model: &NarmaxModel,
    l: u32,
    options: &DeriveOptions<'_>,
) -> Result<SimModel> {
    let mut working = model.regression().clone();
    for _ in 0..l {
        options.check_cancelled()?;
        let Some(step) = working.min_lag(SignalKind::Output) else {
            break;
        };
        let target = SignalRef::output(step);
        let lowest_power = working
            .terms()
            .iter()
            .filter_map(|t| t.exponents.get(&target).copied())
            .min()
            .expect("min_lag guarantees an occurrence");
        working = substitute_in(&working, model, step, options, |e| e == lowest_power)?;
    }
    let cut = Polynomial::from_terms(
        working
            .terms()
            .iter()
            .filter(|t| !t.references_kind(SignalKind::Output))
            .cloned(),
    );
    finish(model, &cut, Some(l))
}

// ───────────────────────── Hermite-basis form ──────────────────────────

/// One term of a [`HermiteForm`]: a coefficient, input/output powers, and a
/// Hermite basis factor `He_n(e[k-lag])` per noise lag (degree-0 factors are
/// omitted — `He_0` is the constant 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTerm {
    pub coefficient: f64,
    pub signal_exponents: ExponentMap,
    pub basis: BTreeMap<u32, u32>,
}

/// A prediction model's regression with every noise power expanded in the
/// probabilists' Hermite basis.
///
/// Structurally a sum of (input powers) x (output powers) x (Hermite basis
/// factors). Evaluating it reproduces the original regression exactly (up to
/// float roundoff), and taking its expectation is literal: only terms whose
/// basis is empty survive, which is how [`HermiteForm::expectation`] works.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteForm {
    terms: Vec<HermiteTerm>,
    noise_scale: f64,
    noise_mean: f64,
}

/// Expands every noise power of the model's regression in the Hermite basis.
pub fn to_hermite_form(model: &NarmaxModel) -> Result<HermiteForm> {
    let mut merged: BTreeMap<(ExponentMap, BTreeMap<u32, u32>), f64> = BTreeMap::new();
    for term in model.regression().terms() {
        let mut signal_exponents = ExponentMap::new();
        let mut noise_factors: Vec<(u32, u32)> = Vec::new();
        for (signal, exponent) in &term.exponents {
            if signal.kind == SignalKind::Noise {
                noise_factors.push((signal.lag, *exponent));
            } else {
                signal_exponents.insert(*signal, *exponent);
            }
        }
        // Distribute the product of per-lag expansions.
        let mut partials: Vec<(f64, BTreeMap<u32, u32>)> =
            alloc::vec![(term.coefficient, BTreeMap::new())];
        for (lag, exponent) in noise_factors {
            let expansion = monomial_to_hermite(exponent)?;
            let mut next = Vec::with_capacity(partials.len() * (exponent as usize / 2 + 1));
            for (coefficient, basis) in &partials {
                for (degree, basis_coefficient) in expansion.iter() {
                    let mut extended = basis.clone();
                    if degree > 0 {
                        extended.insert(lag, degree);
                    }
                    next.push((coefficient * basis_coefficient, extended));
                }
            }
            partials = next;
        }
        for (coefficient, basis) in partials {
            *merged.entry((signal_exponents.clone(), basis)).or_insert(0.0) += coefficient;
        }
    }
    let terms = merged
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|((signal_exponents, basis), coefficient)| HermiteTerm {
            coefficient,
            signal_exponents,
            basis,
        })
        .collect();
    Ok(HermiteForm {
        terms,
        noise_scale: model.noise_scale(),
        noise_mean: model.noise_mean(),
    })
}

impl HermiteForm {
    pub fn terms(&self) -> &[HermiteTerm] {
        &self.terms
    }

    /// Expected value of the model's right-hand side with outputs treated as
    /// deterministic: the terms with an empty basis (every `He_n` with
    /// `n >= 1` averages to zero), plus the mean of the additive noise.
    pub fn expectation(&self) -> Polynomial {
        let surviving = self.terms.iter().filter(|t| t.basis.is_empty()).map(|t| {
            LaggedMonomial { coefficient: t.coefficient, exponents: t.signal_exponents.clone() }
        });
        let poly = Polynomial::from_terms(surviving);
        if self.noise_mean != 0.0 {
            poly.add_term(LaggedMonomial::constant(self.noise_mean))
        } else {
            poly
        }
    }

    /// Evaluates the full right-hand side (including the additive noise) at
    /// sample `k` against zero-padded buffers — the Hermite-basis counterpart
    /// of evaluating the original model.
    pub fn eval_at(&self, k: usize, input: &[f64], output: &[f64], noise: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for term in &self.terms {
            let mut value = term.coefficient;
            for (signal, exponent) in &term.signal_exponents {
                let buffer = match signal.kind {
                    SignalKind::Input => input,
                    SignalKind::Output => output,
                    SignalKind::Noise => unreachable!("noise lives in the basis"),
                };
                let sample = match k.checked_sub(signal.lag as usize) {
                    Some(index) => buffer[index],
                    None => 0.0,
                };
                value *= crate::model::pow_u32(sample, *exponent);
            }
            for (&lag, &degree) in &term.basis {
                let sample = match k.checked_sub(lag as usize) {
                    Some(index) => noise[index],
                    None => 0.0,
                };
                value *=
                    eval_monomial_coefficients(&hermite_polynomial(degree)?, sample);
            }
            acc += value;
        }
        let current = noise.get(k).copied().unwrap_or(0.0);
        Ok(acc + self.noise_scale * current + self.noise_mean)
    }
}
