//! Lagged signal references, sparse multivariate polynomial algebra, and the
//! prediction/simulation model containers built on them.
//!
//! Polynomials are stored as flat sums of [`LaggedMonomial`]s in a canonical
//! form: terms are merged by exponent map, coefficients that vanish (exactly,
//! or as cancellation dust relative to the magnitudes that summed into them)
//! are pruned, and the term list is sorted by total degree (descending) with
//! the exponent map as tie-breaker. Every operation returns a canonical
//! result, so `==` on two polynomials compares mathematical identity up to
//! the merge tolerance.
//!
//! All products go through [`Polynomial::mul_checked`], which enforces a hard
//! term-count budget. Recursive substitution (see the `derive` module) can
//! grow polynomials exponentially; the budget turns runaway growth into a
//! structured [`Error::TermBudgetExceeded`] instead of an OOM kill.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

/// Cancellation tolerance used when merging like terms: a term is dropped
/// when its merged coefficient is exactly zero or smaller in magnitude than
/// this fraction of the *sum of magnitudes that formed it*. Near-complete
/// cancellations thus leave no floating-point dust behind, while a lone tiny
/// coefficient — however small against the polynomial's other terms — is
/// never touched: coefficients of different degrees multiply different
/// signal scales and are not comparable with each other.
pub const RELATIVE_MERGE_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of terms any polynomial operation may produce.
/// Override per call site through `derive::DeriveOptions` or the CLI's
/// `NARMAX_TERM_BUDGET` environment variable.
pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;

// ───────────────────────── signal references ──────────────────────────

/// Which lagged series a polynomial factor reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    /// Exogenous input `u`. Lag 0 (the current sample) is allowed.
    Input,
    /// Output `y` in a prediction model, or the simulated output `ys` in a
    /// simulation model. Lag 0 is never allowed: the current output is what
    /// the equation defines.
    Output,
    /// Standard-normal noise `e`. Lag 0 never appears inside terms; the
    /// additive `e[k]` of a prediction model is implicit (see
    /// [`NarmaxModel`]).
    Noise,
}

/// A single lagged signal: `u[k-lag]`, `y[k-lag]`, or `e[k-lag]`.
///
/// The derived ordering (kind, then lag) fixes the canonical factor order
/// inside a monomial: inputs first, then outputs, then noise, each by
/// ascending lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalRef {
    pub kind: SignalKind,
    pub lag: u32,
}

impl SignalRef {
    pub const fn input(lag: u32) -> Self {
        SignalRef { kind: SignalKind::Input, lag }
    }

    pub const fn output(lag: u32) -> Self {
        SignalRef { kind: SignalKind::Output, lag }
    }

    pub const fn noise(lag: u32) -> Self {
        SignalRef { kind: SignalKind::Noise, lag }
    }
}

impl fmt::Display for SignalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let symbol = match self.kind {
            SignalKind::Input => "u",
            SignalKind::Output => "y",
            SignalKind::Noise => "e",
        };
        if self.lag == 0 {
            write!(f, "{symbol}[k]")
        } else {
            write!(f, "{symbol}[k-{}]", self.lag)
        }
    }
}

/// Exponent map of a monomial: signal reference -> exponent (always >= 1).
pub type ExponentMap = BTreeMap<SignalRef, u32>;

// ───────────────────────── monomials ──────────────────────────

/// One term of a polynomial: a coefficient times a product of lagged signal
/// powers. An empty exponent map is a constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedMonomial {
    pub coefficient: f64,
    pub exponents: ExponentMap,
}

impl LaggedMonomial {
    /// Builds a monomial from a coefficient and `(signal, exponent)` factors.
    /// Repeated references merge by adding exponents; zero exponents are
    /// dropped, so the "no exponent is 0" invariant holds by construction.
    pub fn new(coefficient: f64, factors: impl IntoIterator<Item = (SignalRef, u32)>) -> Self {
        let mut exponents = ExponentMap::new();
        for (signal, exponent) in factors {
            if exponent > 0 {
                *exponents.entry(signal).or_insert(0) += exponent;
            }
        }
        LaggedMonomial { coefficient, exponents }
    }

    /// A constant term.
    pub fn constant(value: f64) -> Self {
        LaggedMonomial { coefficient: value, exponents: ExponentMap::new() }
    }

    /// Sum of all exponents (0 for a constant).
    pub fn total_degree(&self) -> u32 {
        self.exponents.values().sum()
    }

    /// True when any factor reads the given signal kind.
    pub fn references_kind(&self, kind: SignalKind) -> bool {
        self.exponents.keys().any(|s| s.kind == kind)
    }

    /// Evaluates the monomial at sample `k` against zero-padded history
    /// buffers (indices below 0 read as 0, matching zero initial conditions).
    pub fn eval_at(&self, k: usize, input: &[f64], output: &[f64], noise: &[f64]) -> f64 {
        let mut value = self.coefficient;
        for (signal, &exponent) in &self.exponents {
            let buffer = match signal.kind {
                SignalKind::Input => input,
                SignalKind::Output => output,
                SignalKind::Noise => noise,
            };
            let sample = match k.checked_sub(signal.lag as usize) {
                Some(index) => buffer[index],
                None => 0.0,
            };
            value *= pow_u32(sample, exponent);
        }
        value
    }
}

impl fmt::Display for LaggedMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coefficient)?;
        for (signal, exponent) in &self.exponents {
            write!(f, "*{signal}")?;
            if *exponent > 1 {
                write!(f, "^{exponent}")?;
            }
        }
        Ok(())
    }
}

/// Integer power by repeated squaring; exponents in models are small, but
/// this keeps the cost logarithmic for the occasional large one.
pub(crate) fn pow_u32(base: f64, mut exponent: u32) -> f64 {
    let mut result = 1.0;
    let mut factor = base;
    while exponent > 0 {
        if exponent & 1 == 1 {
            result *= factor;
        }
        exponent >>= 1;
        if exponent > 0 {
            factor *= factor;
        }
    }
    result
}

/// Canonical term order: total degree descending, then the exponent map's
/// lexicographic order. Constants therefore sort last, and `u[k] + 1` prints
/// in that order.
fn canonical_cmp(a: &LaggedMonomial, b: &LaggedMonomial) -> Ordering {
    b.total_degree()
        .cmp(&a.total_degree())
        .then_with(|| a.exponents.cmp(&b.exponents))
}

// ───────────────────────── polynomials ──────────────────────────

/// A sparse multivariate polynomial over lagged signals, kept in canonical
/// form (merged, pruned, sorted — see the module docs).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: Vec<LaggedMonomial>,
}

impl Polynomial {
    /// The zero polynomial (no terms).
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    /// A constant polynomial (zero constants canonicalize to no terms).
    pub fn constant(value: f64) -> Self {
        Polynomial::from_terms([LaggedMonomial::constant(value)])
    }

    /// Builds a canonical polynomial from arbitrary terms.
    pub fn from_terms(terms: impl IntoIterator<Item = LaggedMonomial>) -> Self {
        let mut merged: BTreeMap<ExponentMap, (f64, f64)> = BTreeMap::new();
        for term in terms {
            let entry = merged.entry(term.exponents).or_insert((0.0, 0.0));
            entry.0 += term.coefficient;
            entry.1 += term.coefficient.abs();
        }
        Self::from_merged(merged)
    }

    /// Finishes a merge: each bucket holds the signed coefficient sum and the
    /// sum of contribution magnitudes, so cancellation dust is detected
    /// per-term against its own computation.
    fn from_merged(merged: BTreeMap<ExponentMap, (f64, f64)>) -> Self {
        let mut terms: Vec<LaggedMonomial> = merged
            .into_iter()
            .filter(|(_, (sum, abs_sum))| {
                sum.abs() > 0.0 && sum.abs() >= RELATIVE_MERGE_TOLERANCE * abs_sum
            })
            .map(|(exponents, (coefficient, _))| LaggedMonomial { coefficient, exponents })
            .collect();
        terms.sort_by(canonical_cmp);
        Polynomial { terms }
    }

    /// The canonical term list.
    pub fn terms(&self) -> &[LaggedMonomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude (0 for the zero polynomial).
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0_f64, |acc, t| acc.max(t.coefficient.abs()))
    }

    /// Sum of two polynomials.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().chain(other.terms.iter()).cloned())
    }

    /// Adds a single term.
    pub fn add_term(&self, term: LaggedMonomial) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().cloned().chain([term]))
    }

    /// Scales every coefficient.
    pub fn scaled(&self, factor: f64) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|t| LaggedMonomial {
            coefficient: t.coefficient * factor,
            exponents: t.exponents.clone(),
        }))
    }

    /// Product of two polynomials, failing with
    /// [`Error::TermBudgetExceeded`] when the raw cross-product would exceed
    /// `budget` terms. (The check is conservative: it bounds the work done,
    /// not just the merged result size.)
    pub fn mul_checked(&self, other: &Polynomial, budget: usize) -> Result<Polynomial> {
        let required = self
            .terms
            .len()
            .checked_mul(other.terms.len())
            .ok_or(Error::TermBudgetExceeded { budget, required: usize::MAX })?;
        if required > budget {
            return Err(Error::TermBudgetExceeded { budget, required });
        }
        let mut merged: BTreeMap<ExponentMap, (f64, f64)> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let mut exponents = a.exponents.clone();
                for (signal, exponent) in &b.exponents {
                    *exponents.entry(*signal).or_insert(0) += exponent;
                }
                let product = a.coefficient * b.coefficient;
                let entry = merged.entry(exponents).or_insert((0.0, 0.0));
                entry.0 += product;
                entry.1 += product.abs();
            }
        }
        Ok(Self::from_merged(merged))
    }

    /// Integer power by repeated squaring, under the same term budget.
    pub fn pow_checked(&self, exponent: u32, budget: usize) -> Result<Polynomial> {
        let mut result = Polynomial::constant(1.0);
        let mut factor = self.clone();
        let mut remaining = exponent;
        while remaining > 0 {
            if remaining & 1 == 1 {
                result = result.mul_checked(&factor, budget)?;
            }
            remaining >>= 1;
            if remaining > 0 {
                factor = factor.mul_checked(&factor, budget)?;
            }
        }
        Ok(result)
    }

    /// The polynomial with every lag increased by `shift` (the time-shift
    /// operator: if `p` reads sample `k-j`, the result reads `k-shift-j`).
    /// `shift == 0` is the identity.
    pub fn shifted(&self, shift: u32) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|t| LaggedMonomial {
            coefficient: t.coefficient,
            exponents: t
                .exponents
                .iter()
                .map(|(s, e)| (SignalRef { kind: s.kind, lag: s.lag + shift }, *e))
                .collect(),
        }))
    }

    /// Largest lag referenced for a signal kind, `None` when the kind does
    /// not appear.
    pub fn max_lag(&self, kind: SignalKind) -> Option<u32> {
        self.terms
            .iter()
            .flat_map(|t| t.exponents.keys())
            .filter(|s| s.kind == kind)
            .map(|s| s.lag)
            .max()
    }

    /// Smallest lag referenced for a signal kind, `None` when absent.
    pub fn min_lag(&self, kind: SignalKind) -> Option<u32> {
        self.terms
            .iter()
            .flat_map(|t| t.exponents.keys())
            .filter(|s| s.kind == kind)
            .map(|s| s.lag)
            .min()
    }

    /// True when any term reads the given signal kind.
    pub fn references_kind(&self, kind: SignalKind) -> bool {
        self.terms.iter().any(|t| t.references_kind(kind))
    }

    /// Evaluates the polynomial at sample `k` against zero-padded history
    /// buffers. Callers must ensure `k` is in range for every buffer the
    /// polynomial actually reads.
    pub fn eval_at(&self, k: usize, input: &[f64], output: &[f64], noise: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval_at(k, input, output, noise)).sum()
    }

    /// True when `self` and `other` agree term-for-term with every
    /// coefficient difference at most `tolerance` (absolute). Terms present
    /// on one side only must have coefficients within `tolerance` of zero.
    pub fn approx_eq(&self, other: &Polynomial, tolerance: f64) -> bool {
        let difference = self.add(&other.scaled(-1.0));
        difference.max_abs_coefficient() <= tolerance
    }

    fn validate_finite(&self) -> Result<()> {
        for term in &self.terms {
            if !term.coefficient.is_finite() {
                return Err(Error::InvalidModel {
                    detail: format!("non-finite coefficient in term {term}"),
                });
            }
        }
        Ok(())
    }
}

// ───────────────────────── model containers ──────────────────────────

/// Maximum lag per signal kind; 0 when the kind is absent (or, for inputs,
/// when only the current sample is read).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lags {
    pub input: u32,
    pub output: u32,
    pub noise: u32,
}

impl Lags {
    fn of(poly: &Polynomial) -> Lags {
        Lags {
            input: poly.max_lag(SignalKind::Input).unwrap_or(0),
            output: poly.max_lag(SignalKind::Output).unwrap_or(0),
            noise: poly.max_lag(SignalKind::Noise).unwrap_or(0),
        }
    }

    /// Largest lag across all kinds — the length of the start-up transient.
    pub fn max(&self) -> u32 {
        self.input.max(self.output).max(self.noise)
    }
}

/// A stochastic polynomial NARMAX prediction model:
///
/// ```text
/// y[k] = regression(u, y, e) + noise_scale * e[k] + noise_mean
/// ```
///
/// with `e ~ iid N(0, 1)` and zero initial conditions (every signal reads 0
/// for samples before the start). The additive current-sample noise is
/// implicit: it is never stored in the regression terms, whose noise
/// references all have lag >= 1 and always denote *standard* normal samples.
///
/// Models whose noise law is `N(noise_mean, noise_scale^2)` rather than
/// standard normal are brought to this form by
/// [`NarmaxModel::with_noise_law`], which rewrites each lagged noise factor
/// `v^d` as `(noise_scale * e + noise_mean)^d` and expands. After that
/// rewrite the two fields describe only the additive current-sample noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaxModel {
    regression: Polynomial,
    noise_scale: f64,
    noise_mean: f64,
    lags: Lags,
}

impl NarmaxModel {
    /// Builds a model with standard additive noise (`scale` 1, `mean` 0).
    pub fn new(regression: Polynomial) -> Result<Self> {
        Self::build(regression, 1.0, 0.0)
    }

    /// Builds a model whose noise process is `v = scale * e + mean` with `e`
    /// standard normal. Lagged noise references in `regression` are taken to
    /// denote `v` and are rewritten into polynomials in standard `e`; the
    /// additive current-sample noise keeps `scale` and `mean` as fields.
    pub fn with_noise_law(regression: Polynomial, scale: f64, mean: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidModel {
                detail: format!("noise scale must be finite and positive, got {scale}"),
            });
        }
        if !mean.is_finite() {
            return Err(Error::InvalidModel {
                detail: format!("noise mean must be finite, got {mean}"),
            });
        }
        if scale == 1.0 && mean == 0.0 {
            return Self::build(regression, scale, mean);
        }
        let mut rewritten = Polynomial::zero();
        for term in regression.terms() {
            let mut signal_part = LaggedMonomial::constant(term.coefficient);
            let mut noise_factors: Vec<(u32, u32)> = Vec::new();
            for (signal, exponent) in &term.exponents {
                if signal.kind == SignalKind::Noise {
                    noise_factors.push((signal.lag, *exponent));
                } else {
                    signal_part.exponents.insert(*signal, *exponent);
                }
            }
            let mut expanded = Polynomial::from_terms([signal_part]);
            for (lag, exponent) in noise_factors {
                let law = Polynomial::from_terms([
                    LaggedMonomial::new(scale, [(SignalRef::noise(lag), 1)]),
                    LaggedMonomial::constant(mean),
                ]);
                let power = law.pow_checked(exponent, DEFAULT_TERM_BUDGET)?;
                expanded = expanded.mul_checked(&power, DEFAULT_TERM_BUDGET)?;
            }
            rewritten = rewritten.add(&expanded);
        }
        Self::build(rewritten, scale, mean)
    }

    /// Builds a model whose regression is already in standardized form (noise
    /// references denote standard normal samples) without the
    /// [`Self::with_noise_law`] rewrite. Used by substitution, which produces
    /// standardized regressions for models with any additive noise law.
    pub(crate) fn from_standardized(
        regression: Polynomial,
        noise_scale: f64,
        noise_mean: f64,
    ) -> Result<Self> {
        Self::build(regression, noise_scale, noise_mean)
    }

    fn build(regression: Polynomial, noise_scale: f64, noise_mean: f64) -> Result<Self> {
        regression.validate_finite()?;
        for term in regression.terms() {
            for signal in term.exponents.keys() {
                let illegal = match signal.kind {
                    SignalKind::Input => false,
                    SignalKind::Output | SignalKind::Noise => signal.lag == 0,
                };
                if illegal {
                    return Err(Error::InvalidModel {
                        detail: format!(
                            "{signal} has lag 0; outputs and noise must be lagged in terms"
                        ),
                    });
                }
            }
        }
        let lags = Lags::of(&regression);
        Ok(NarmaxModel { regression, noise_scale, noise_mean, lags })
    }

    /// The polynomial part `f` of the model.
    pub fn regression(&self) -> &Polynomial {
        &self.regression
    }

    /// Scale of the additive current-sample noise.
    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Mean of the additive current-sample noise.
    pub fn noise_mean(&self) -> f64 {
        self.noise_mean
    }

    /// Maximum lags `(n_u, n_y, n_e)` of the regression.
    pub fn lags(&self) -> Lags {
        self.lags
    }

    /// Smallest output lag present, `None` for models with no output
    /// recursion (finite-impulse-response structure).
    pub fn min_output_lag(&self) -> Option<u32> {
        self.regression.min_lag(SignalKind::Output)
    }
}

/// A deterministic free-run simulation model:
///
/// ```text
/// ys[k] = regression(u, ys)
/// ```
///
/// Output references in the regression denote the *simulated* output `ys`;
/// noise references are structurally forbidden. `approx_order` records how
/// the model was derived: `None` for exact derivations, `Some(l)` for the
/// `l`-step approximate and truncated families (noise-zeroing reports 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    regression: Polynomial,
    approx_order: Option<u32>,
    lags: Lags,
}

impl SimModel {
    pub fn new(regression: Polynomial, approx_order: Option<u32>) -> Result<Self> {
        regression.validate_finite()?;
        for term in regression.terms() {
            for signal in term.exponents.keys() {
                match signal.kind {
                    SignalKind::Noise => {
                        return Err(Error::InvalidModel {
                            detail: format!(
                                "{signal}: simulation models cannot reference noise"
                            ),
                        })
                    }
                    SignalKind::Output if signal.lag == 0 => {
                        return Err(Error::InvalidModel {
                            detail: format!("{signal} has lag 0 in a simulation model"),
                        })
                    }
                    _ => {}
                }
            }
        }
        let lags = Lags::of(&regression);
        Ok(SimModel { regression, approx_order, lags })
    }

    pub fn regression(&self) -> &Polynomial {
        &self.regression
    }

    pub fn approx_order(&self) -> Option<u32> {
        self.approx_order
    }

    pub fn lags(&self) -> Lags {
        self.lags
    }
}

// ───────────────────────── tests ──────────────────────────
