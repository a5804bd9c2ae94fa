//! Property tests for the derivation pipeline on randomly generated models.
//!
//! The central claim under test: recursive substitution is an identity
//! rewrite. A substituted model run on the *same* input and noise
//! realization must reproduce the original model's output sample-for-sample
//! once the index clears the start-up transient (zero initial conditions
//! enter the two forms at different places before that). Everything else —
//! lag invariants of the approximate family, the Hermite-basis route
//! agreeing with the moment route — is layered on top.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use narmax_core::derive::{
    derive_l_approximate, derive_noise_zeroed, derive_truncated, substitute_chain,
    to_hermite_form, DeriveOptions,
};
use narmax_core::sim::{run_stochastic, sample_noise};
use narmax_core::{LaggedMonomial, NarmaxModel, Polynomial, SignalKind, SignalRef};

/// Draws a random polynomial NARMAX model with small coefficients (keeps the
/// recursion from exploding over a short run) and modest lags/degrees.
///
/// Every term carries at least one signal factor. Constant terms are
/// deliberately excluded: with zero initial conditions, a constant inside
/// the defining equation makes the substituted form disagree with the
/// original during the start-up window (the original reads `y = 0` before
/// the start, while a substituted constant still evaluates), so the
/// identity-rewrite property tested here holds exactly only for
/// constant-free regressions. Constants are covered by the hand-built
/// derivation tests instead.
fn random_model(rng: &mut StdRng) -> NarmaxModel {
    loop {
        let term_count = rng.gen_range(1..=4);
        let mut terms = Vec::new();
        for _ in 0..term_count {
            let coefficient = rng.gen_range(-0.2..0.2);
            let mut factors: Vec<(SignalRef, u32)> = Vec::new();
            while factors.is_empty() {
                if rng.gen_bool(0.8) {
                    factors
                        .push((SignalRef::input(rng.gen_range(0..=2)), rng.gen_range(1..=2)));
                }
                if rng.gen_bool(0.6) {
                    factors
                        .push((SignalRef::output(rng.gen_range(1..=2)), rng.gen_range(1..=2)));
                }
                if rng.gen_bool(0.5) {
                    factors
                        .push((SignalRef::noise(rng.gen_range(1..=2)), rng.gen_range(1..=2)));
                }
            }
            terms.push(LaggedMonomial::new(coefficient, factors));
        }
        let poly = Polynomial::from_terms(terms);
        if poly.is_zero() {
            continue;
        }
        return NarmaxModel::new(poly).unwrap();
    }
}

/// Shared realization for equivalence runs: bounded input, one noise stream.
fn shared_realization(rng: &mut StdRng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let input: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let noise = sample_noise(n, rng.gen());
    (input, noise)
}

#[test]
fn substitution_chains_preserve_the_realization() {
    let mut rng = StdRng::seed_from_u64(0x53554253);
    let options = DeriveOptions { term_budget: 4_000, ..Default::default() };
    let n = 32;
    let mut tested = 0;
    for _ in 0..40 {
        let model = random_model(&mut rng);
        let (input, noise) = shared_realization(&mut rng, n);
        let Ok(original) = run_stochastic(&model, &input, &noise) else {
            continue; // unstable draw — not the property under test
        };
        if original.iter().any(|y| y.abs() > 50.0) {
            continue;
        }
        for l in 1..=3u32 {
            let substituted = match substitute_chain(&model, l, &options) {
                Ok(m) => m,
                Err(narmax_core::Error::TermBudgetExceeded { .. }) => break,
                Err(other) => panic!("unexpected error: {other:?}"),
            };
            let rerun = run_stochastic(&substituted, &input, &noise).unwrap();
            let start = substituted.lags().max().max(model.lags().max()) as usize;
            for k in start..n {
                let scale = original[k].abs().max(1.0);
                assert!(
                    (original[k] - rerun[k]).abs() <= 1e-8 * scale,
                    "l = {l}, sample {k}: original {}, substituted {}",
                    original[k],
                    rerun[k]
                );
            }
        }
        tested += 1;
    }
    assert!(tested >= 20, "only {tested} stable models exercised");
}

#[test]
fn approximate_models_push_output_lags_past_l() {
    let mut rng = StdRng::seed_from_u64(0x4c414753);
    let options = DeriveOptions { term_budget: 4_000, ..Default::default() };
    for _ in 0..20 {
        let model = random_model(&mut rng);
        for l in 0..=3u32 {
            let Ok(sim) = derive_l_approximate(&model, l, &options) else {
                continue; // term budget exceeded on a fat draw
            };
            assert_eq!(sim.approx_order(), Some(l));
            if let Some(min) = sim.regression().min_lag(SignalKind::Output) {
                assert!(
                    min >= l + 1,
                    "l = {l} left an output at lag {min}: {:?}",
                    sim.regression()
                );
            }
        }
    }
}

#[test]
fn truncated_models_reference_no_outputs_beyond_inputs() {
    let mut rng = StdRng::seed_from_u64(0x54525543);
    let options = DeriveOptions { term_budget: 4_000, ..Default::default() };
    for _ in 0..20 {
        let model = random_model(&mut rng);
        for l in 0..=3u32 {
            let Ok(sim) = derive_truncated(&model, l, &options) else {
                continue;
            };
            assert!(
                !sim.regression().references_kind(SignalKind::Output),
                "truncated model still recursive: {:?}",
                sim.regression()
            );
        }
    }
}

#[test]
fn hermite_route_agrees_with_moment_route() {
    let mut rng = StdRng::seed_from_u64(0x4845524d);
    let options = DeriveOptions::default();
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let via_basis = to_hermite_form(&model).unwrap().expectation();
        let via_moments = derive_l_approximate(&model, 0, &options).unwrap();
        assert!(
            via_basis.approx_eq(via_moments.regression(), 1e-12),
            "routes disagree:\n  basis   {via_basis:?}\n  moments {:?}",
            via_moments.regression()
        );
    }
}

#[test]
fn hermite_form_evaluates_like_the_model() {
    let mut rng = StdRng::seed_from_u64(0x4556414c);
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let form = to_hermite_form(&model).unwrap();
        let n = 16;
        let input: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let output: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for k in 0..n {
            let direct = model.regression().eval_at(k, &input, &output, &noise)
                + model.noise_scale() * noise[k]
                + model.noise_mean();
            let via_form = form.eval_at(k, &input, &output, &noise).unwrap();
            assert!(
                (direct - via_form).abs() <= 1e-10 * direct.abs().max(1.0),
                "sample {k}: direct {direct}, form {via_form}"
            );
        }
    }
}

#[test]
fn noise_zeroed_drops_exactly_the_noise_terms() {
    let mut rng = StdRng::seed_from_u64(0x5a45524f);
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let sim = derive_noise_zeroed(&model).unwrap();
        assert!(!sim.regression().references_kind(SignalKind::Noise));
        assert_eq!(sim.approx_order(), Some(0));
        let expected = Polynomial::from_terms(
            model
                .regression()
                .terms()
                .iter()
                .filter(|t| !t.references_kind(SignalKind::Noise))
                .cloned(),
        );
        assert_eq!(sim.regression(), &expected);
    }
}
