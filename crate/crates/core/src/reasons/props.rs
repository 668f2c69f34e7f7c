// SPDX-License-Identifier: MIT OR Apache-2.0

//! Property tests for the calculus invariants.

use proptest::prelude::*;

use crate::numeric::softmax;
use crate::reasons::{strength, update, Belief, Proposition, ReasonVector};

fn case(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>)> {
    (
        prop::collection::vec(0.01f64..1.0, n),
        prop::collection::vec(-6.0f64..6.0, n),
        prop::collection::vec(-6.0f64..6.0, n),
        prop::collection::vec(any::<bool>(), n),
    )
}

fn sized_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>)> {
    prop_oneof![case(2), case(4), case(16)]
}

fn nontrivial(mut mask: Vec<bool>) -> Proposition {
    let n = mask.len();
    if mask.iter().all(|&m| m) {
        mask[n - 1] = false;
    }
    if mask.iter().all(|&m| !m) {
        mask[0] = true;
    }
    Proposition::from_members(mask)
}

fn max_diff(a: &Belief, b: &Belief) -> f64 {
    a.probabilities()
        .iter()
        .zip(b.probabilities())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn update_normalizes_and_is_neutral((w, x, _, _) in sized_case()) {
        let b = Belief::from_weights(&w).unwrap();
        let post = update(&b, &ReasonVector::new(x).unwrap()).unwrap();
        prop_assert!((post.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let same = update(&b, &ReasonVector::zeros(w.len())).unwrap();
        prop_assert!(max_diff(&same, &b) < 1e-12);
    }

    #[test]
    fn update_shift_invariant((w, x, _, _) in sized_case(), c in -50.0f64..50.0) {
        let b = Belief::from_weights(&w).unwrap();
        let x = ReasonVector::new(x).unwrap();
        let p1 = update(&b, &x).unwrap();
        let p2 = update(&b, &x.shifted(c)).unwrap();
        prop_assert!(max_diff(&p1, &p2) < 1e-9);
    }

    #[test]
    fn sequential_composition((w, x, y, _) in sized_case()) {
        let b = Belief::from_weights(&w).unwrap();
        let x = ReasonVector::new(x).unwrap();
        let y = ReasonVector::new(y).unwrap();
        let folded = update(&update(&b, &x).unwrap(), &y).unwrap();
        let joint = update(&b, &(&x + &y)).unwrap();
        prop_assert!(max_diff(&folded, &joint) < 1e-9);
    }

    #[test]
    fn strength_antisymmetric_and_shift_invariant((w, x, _, mask) in sized_case(), c in -50.0f64..50.0) {
        let b = Belief::from_weights(&w).unwrap();
        let x = ReasonVector::new(x).unwrap();
        let a = nontrivial(mask);
        let s = strength(&x, &a, &b).unwrap();
        prop_assert!((s + strength(&x, &a.complement(), &b).unwrap()).abs() < 1e-9);
        prop_assert!((s - strength(&x.shifted(c), &a, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn elementary_calibration((w, _, _, mask) in sized_case()) {
        let b = Belief::from_weights(&w).unwrap();
        let a = nontrivial(mask);
        let s = strength(&ReasonVector::elementary(&a), &a, &b).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_update_is_softmax((_, x, _, _) in sized_case()) {
        let n = x.len();
        let post = update(&Belief::uniform(n), &ReasonVector::new(x.clone()).unwrap()).unwrap();
        let sm = softmax(&x);
        for (p, q) in post.probabilities().iter().zip(&sm) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}
