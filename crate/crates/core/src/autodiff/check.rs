// SPDX-License-Identifier: MIT OR Apache-2.0

//! Central finite-difference gradient checking.

use super::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Default denominator floor for relative errors.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Worst relative error between the graph gradient of `f` at `x` and a
/// central difference with the given `step`, over all coordinates of `x`.
///
/// The error at each coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_with(f, x, step, RELATIVE_FLOOR)
}

/// [`grad_check`] with an explicit denominator floor.
pub fn grad_check_with<F>(f: F, x: &Tensor, step: f64, floor: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.leaf(x.clone());
    let root = f(&mut g, xv)?;
    let analytic = g.backward(root)?.wrt(&g, xv);

    let eval = |t: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let v = g.leaf(t);
        let r = f(&mut g, v)?;
        g.value(r).item()
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += step;
        let mut minus = x.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
