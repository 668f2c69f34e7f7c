// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::numeric::logsumexp;
use crate::reasons::{Belief, Proposition, ReasonVector};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what} has length {got}, belief has {want}"
        )));
    }
    Ok(())
}

/// `b * x`: reweights each world by `exp(x_k)` and renormalizes.
///
/// The exponent is shifted by the maximum of `x` over the support of `b`, so
/// large activations never overflow.
pub fn update(b: &Belief, x: &ReasonVector) -> Result<Belief> {
    check_len("reason", x.len(), b.len())?;
    let probs = b.probabilities();
    let shift = x
        .values()
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = x
        .values()
        .iter()
        .zip(probs)
        .map(|(v, &p)| if p > 0.0 { (v - shift).exp() * p } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate(format!(
            "update normalizer is {total} after stabilization"
        )));
    }
    Ok(Belief::new(weights.into_iter().map(|w| w / total).collect())
        .expect("normalized weights form a belief"))
}

/// Doxastic strength `D(x, A, b)`: half the log of posterior odds of `A`
/// under `b * x` over its prior odds under `b`.
///
/// Fails with [`Error::TrivialProposition`] unless `b(A) > 0` and
/// `b(A^c) > 0`.
pub fn strength(x: &ReasonVector, a: &Proposition, b: &Belief) -> Result<f64> {
    check_len("reason", x.len(), b.len())?;
    check_len("proposition", a.universe(), b.len())?;
    let probs = b.probabilities();
    let (mut mass_in, mut mass_out) = (0.0, 0.0);
    for (&p, &m) in probs.iter().zip(a.members()) {
        if m {
            mass_in += p;
        } else {
            mass_out += p;
        }
    }
    if mass_in <= 0.0 || mass_out <= 0.0 {
        return Err(Error::TrivialProposition {
            proposition: a.describe(),
            mass: mass_in,
        });
    }
    let terms = |inside: bool| {
        x.values()
            .iter()
            .zip(probs)
            .zip(a.members())
            .filter(move |((_, &p), &m)| p > 0.0 && m == inside)
            .map(|((v, p), _)| v + p.ln())
    };
    let log_post_odds = logsumexp(terms(true)) - logsumexp(terms(false));
    let log_prior_odds = mass_in.ln() - mass_out.ln();
    let d = 0.5 * (log_post_odds - log_prior_odds);
    if !d.is_finite() {
        return Err(Error::Degenerate(format!(
            "strength for `{}` evaluated to {d}",
            a.describe()
        )));
    }
    Ok(d)
}

/// Strength of `x` for each proposition, in order.
pub fn strength_profile(
    x: &ReasonVector,
    propositions: &[Proposition],
    b: &Belief,
) -> Result<Vec<(Proposition, f64)>> {
    propositions
        .iter()
        .map(|a| strength(x, a, b).map(|s| (a.clone(), s)))
        .collect()
}
