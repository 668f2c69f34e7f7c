// SPDX-License-Identifier: MIT OR Apache-2.0

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Layout, Tensor};

const BLOCK: usize = 128;

/// Mean over rows of the fraction of each row's `k` nearest Euclidean
/// neighbours (itself excluded, equal distances broken by lower index) that
/// share its label.
pub fn cluster_purity(rows: &Tensor, labels: &[usize], k: usize) -> Result<f64> {
    let (n, d) = rows.dims2()?;
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} rows, {} labels", labels.len())));
    }
    if k == 0 || n < k + 1 {
        return Err(Error::InvalidArgument(format!("k = {k} neighbours need more than {k} rows, got {n}")));
    }
    let x = rows.data();
    let sq: Vec<f64> = (0..n).map(|i| x[i * d..(i + 1) * d].iter().map(|v| v * v).sum()).collect();
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let total: f64 = starts
        .par_iter()
        .map(|&s| {
            let e = (s + BLOCK).min(n);
            let m = e - s;
            let mut dots = vec![0.0; m * n];
            gemm(m, d, n, &x[s * d..e * d], Layout::Normal, x, Layout::Transposed, &mut dots, false);
            let mut acc = 0.0;
            let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for r in 0..m {
                let i = s + r;
                cand.clear();
                cand.extend(
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| ((sq[i] + sq[j] - 2.0 * dots[r * n + j]).max(0.0), j)),
                );
                let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, cmp);
                }
                let same = cand[..k].iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
                acc += same as f64 / k as f64;
            }
            acc
        })
        .sum();
    Ok(total / n as f64)
}
