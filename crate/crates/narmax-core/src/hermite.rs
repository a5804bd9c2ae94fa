//! Probabilists' Hermite polynomials and standard-normal moment helpers.
//!
//! The probabilists' family `He_n` is orthogonal under the standard normal
//! weight, with `∫ He_n(x) He_m(x) φ(x) dx = n! δ_{n,m}`. It is generated by
//! the three-term recurrence
//!
//! ```text
//! He_0(x) = 1,   He_1(x) = x,   He_{n+1}(x) = x He_n(x) - n He_{n-1}(x)
//! ```
//!
//! Two consequences carry the whole derivation machinery in this crate:
//!
//! * every monomial expands in the basis as
//!   `x^m = m! Σ_{j=0}^{⌊m/2⌋} He_{m-2j}(x) / (2^j j! (m-2j)!)`, and
//! * for standard normal `X`, `E[He_n(X)] = δ_{n,0}`,
//!
//! so `E[X^m]` is exactly the `He_0` coefficient of the expansion of `x^m` —
//! the double factorial `(m-1)!!` for even `m` and 0 for odd `m`.
//!
//! All arithmetic is plain `f64`. Factorial-style products overflow `f64`
//! beyond 170!, so every degree-taking function returns
//! [`Error::DegreeOverflow`] above [`MAX_DEGREE`].

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::pow_u32;

/// Largest degree any function in this module accepts: `171!` overflows
/// `f64`, so factorial-weighted quantities stop being representable there.
pub const MAX_DEGREE: u32 = 170;

fn check_degree(degree: u32) -> Result<()> {
    if degree > MAX_DEGREE {
        Err(Error::DegreeOverflow { degree, max: MAX_DEGREE })
    } else {
        Ok(())
    }
}

/// `n!` as `f64`; exact for `n <= 22`, correctly rounded products beyond.
fn factorial(n: u32) -> Result<f64> {
    check_degree(n)?;
    let mut acc = 1.0;
    for i in 2..=n {
        acc *= i as f64;
    }
    Ok(acc)
}

/// Monomial coefficients of `He_n`, ascending by degree (`len == n + 1`).
///
/// Built by the three-term recurrence; the leading coefficient is always 1.
pub fn hermite_polynomial(n: u32) -> Result<Vec<f64>> {
    check_degree(n)?;
    let mut prev = vec![1.0]; // He_0
    if n == 0 {
        return Ok(prev);
    }
    let mut curr = vec![0.0, 1.0]; // He_1
    for m in 1..n {
        // He_{m+1} = x * He_m - m * He_{m-1}
        let mut next = vec![0.0; m as usize + 2];
        for (i, c) in curr.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= m as f64 * c;
        }
        prev = curr;
        curr = next;
    }
    Ok(curr)
}

/// Evaluates a monomial-coefficient vector (ascending degrees) at `x`.
pub fn eval_monomial_coefficients(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// A finite combination of Hermite basis polynomials: degree -> coefficient.
///
/// Absent degrees have coefficient 0. Produced by [`monomial_to_hermite`];
/// the degree-0 coefficient of such an expansion is exactly the standard
/// normal moment of the expanded monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    coefficients: BTreeMap<u32, f64>,
}

impl HermiteExpansion {
    /// Coefficient of `He_n` (0 when the degree is absent).
    pub fn coefficient(&self, n: u32) -> f64 {
        self.coefficients.get(&n).copied().unwrap_or(0.0)
    }

    /// Iterates `(degree, coefficient)` pairs, ascending by degree.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coefficients.iter().map(|(d, c)| (*d, *c))
    }

    /// Evaluates the combination at `x` by expanding each basis polynomial.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&degree, &coefficient) in &self.coefficients {
            acc += coefficient * eval_monomial_coefficients(&hermite_polynomial(degree)?, x);
        }
        Ok(acc)
    }
}

/// Expands `x^m` in the probabilists' Hermite basis.
///
/// The coefficient of `He_{m-2j}` is `m! / (2^j j! (m-2j)!)`, computed by the
/// exact ratio recurrence `c_0 = 1`, `c_{j+1} = c_j (m-2j)(m-2j-1) / (2(j+1))`
/// — every `c_j` is an integer (it counts partial matchings), so the products
/// stay exact in `f64` until they pass 2^53.
pub fn monomial_to_hermite(m: u32) -> Result<HermiteExpansion> {
    check_degree(m)?;
    let mut coefficients = BTreeMap::new();
    let mut c = 1.0;
    let mut j = 0u32;
    loop {
        coefficients.insert(m - 2 * j, c);
        if 2 * (j + 1) > m {
            break;
        }
        let a = (m - 2 * j) as f64;
        let b = (m - 2 * j - 1) as f64;
        c = c * a * b / (2.0 * (j + 1) as f64);
        j += 1;
    }
    Ok(HermiteExpansion { coefficients })
}

/// `E[X^d]` for standard normal `X`: the double factorial `(d-1)!!` for even
/// `d` (1 for `d == 0`), and 0 for odd `d`.
pub fn gaussian_moment(d: u32) -> Result<f64> {
    check_degree(d)?;
    if d % 2 == 1 {
        return Ok(0.0);
    }
    let mut acc = 1.0;
    let mut i = 1;
    while i < d {
        acc *= i as f64;
        i += 2;
    }
    Ok(acc)
}

/// `E[He_n(X1) He_m(X2)]` for jointly standard normal `(X1, X2)` with
/// correlation `rho`: `n! rho^n` when `n == m`, 0 otherwise.
///
/// # Panics
///
/// Panics when `|rho| > 1` (not a correlation).
pub fn hermite_cross_expectation(n: u32, m: u32, rho: f64) -> Result<f64> {
    assert!(rho.is_finite() && rho.abs() <= 1.0, "|rho| must be at most 1, got {rho}");
    if n != m {
        return Ok(0.0);
    }
    Ok(factorial(n)? * pow_u32(rho, n))
}

/// Expected value of a product of powers of *independent* standard normal
/// samples: the product of the per-factor moments. Independence holds in the
/// model setting because the factors carry distinct lags of an iid sequence.
/// Returns 0 whenever any exponent is odd; the empty product is 1.
pub fn expected_noise_product(exponents: impl IntoIterator<Item = u32>) -> Result<f64> {
    let mut acc = 1.0;
    for d in exponents {
        let moment = gaussian_moment(d)?;
        if moment == 0.0 {
            return Ok(0.0);
        }
        acc *= moment;
    }
    Ok(acc)
}
