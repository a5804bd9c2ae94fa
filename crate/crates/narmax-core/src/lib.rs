//! Derivation of unbiased free-run simulation models from stochastic
//! polynomial NARMAX prediction models.
//!
//! A polynomial NARMAX prediction model writes the output as a polynomial in
//! lagged inputs, lagged outputs, and lagged standard-normal noise, plus an
//! additive noise term for the current sample:
//!
//! ```text
//! y[k] = f(y[k-1..], u[k..], e[k-1..]) + e[k],      e ~ iid N(0, 1)
//! ```
//!
//! When such a model is used in simulation (free run) the noise sequence is
//! unknown. The conventional shortcut — setting every noise term to zero —
//! biases the simulated output whenever noise enters `f` nonlinearly, because
//! `E[e^d] != 0` for even `d`. This crate computes the *expected* output
//! instead: noise monomials are resolved into their standard-normal moments
//! (equivalently, into their probabilists'-Hermite expansions, where only the
//! degree-0 component survives the expectation), and output recursions are
//! handled either exactly (for a restricted model class) or by `l` steps of
//! recursive substitution followed by a controlled truncation.
//!
//! Module map:
//!
//! * [`model`] — lagged signal references, sparse polynomial algebra with a
//!   term budget, and the prediction/simulation model containers.
//! * [`hermite`] — probabilists' Hermite polynomials, monomial-to-Hermite
//!   expansion, and standard-normal moment helpers.
//! * [`derive`] — the simulation-model derivations: exact, noise-zeroed,
//!   `l`-step approximate, and truncated, plus the Hermite-basis form.
//! * [`sim`] — deterministic evaluation of both model kinds and a fixed,
//!   reproducible standard-normal sampler.
//!
//! The crate is `no_std` (with `alloc`); everything here is pure computation,
//! so it can run in hosts without an operating system. IO, file formats, and
//! the Monte Carlo validation harness live in the companion CLI crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod derive;
pub mod error;
pub mod hermite;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    LaggedMonomial, Lags, NarmaxModel, Polynomial, SignalKind, SignalRef, SimModel,
    DEFAULT_TERM_BUDGET,
};
