// SPDX-License-Identifier: MIT OR Apache-2.0

//! Doxastic strength recorded on a graph so it can be trained through.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::numeric::logsumexp;
use crate::reasons::{Belief, Proposition};
use crate::tensor::Tensor;

/// `D(x, A, b)` for a length-`n` vector `x` on the graph, differentiable in
/// `x`. Worlds outside the support of `b` are dropped; the proposition must
/// have positive mass on both sides.
pub fn graph_strength(g: &mut Graph, x: Var, a: &Proposition, b: &Belief) -> Result<Var> {
    let n = g.value(x).len();
    if g.shape(x) != [n] || a.universe() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "strength of a {:?} vector against |A| universe {} and belief over {}",
            g.shape(x),
            a.universe(),
            b.len()
        )));
    }
    let p = b.probabilities();
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for k in 0..n {
        if p[k] > 0.0 {
            if a.contains(k) { inside.push(k) } else { outside.push(k) }
        }
    }
    let mass_in = b.prob(a);
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::TrivialProposition {
            proposition: a.describe(),
            mass: mass_in,
        });
    }
    let mass_in = logsumexp(inside.iter().map(|&k| p[k].ln()));
    let mass_out = logsumexp(outside.iter().map(|&k| p[k].ln()));
    let side = |g: &mut Graph, idx: Vec<usize>| -> Result<Var> {
        let lnb = Tensor::vector(idx.iter().map(|&k| p[k].ln()).collect());
        let xs = g.gather(x, idx)?;
        let shifted = g.add_const(xs, &lnb)?;
        g.logsumexp(shifted, 0)
    };
    let lin = side(g, inside)?;
    let lout = side(g, outside)?;
    let diff = g.sub(lin, lout)?;
    let centred = g.add_scalar(diff, -(mass_in - mass_out))?;
    g.scale(centred, 0.5)
}
