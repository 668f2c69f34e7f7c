// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::rng;
use crate::tensor::{gemm, Layout, Tensor};

/// Leading eigenpairs of a symmetric positive semi-definite matrix.
pub trait EigenSolver: Send + Sync {
    /// `m` is `d×d` row-major. Returns up to `k` eigenvalues in descending
    /// order with unit eigenvectors.
    fn top(&self, m: &[f64], d: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>>;
}

/// Cyclic Jacobi rotations on the full matrix.
pub struct Jacobi {
    pub max_sweeps: usize,
}

/// Power iteration, re-orthogonalizing against earlier eigenvectors.
pub struct PowerIteration {
    pub max_iter: usize,
    pub tol: f64,
}

/// Jacobi up to `threshold` dimensions, power iteration beyond.
pub struct Auto {
    pub threshold: usize,
}

impl EigenSolver for Jacobi {
    fn top(&self, m: &[f64], d: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut a = m.to_vec();
        let mut v = Tensor::eye(d).into_data();
        let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..self.max_sweeps {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * d + j] * a[i * d + j])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * frob.max(f64::MIN_POSITIVE) {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = a[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..d {
                        let (arp, arq) = (a[r * d + p], a[r * d + q]);
                        a[r * d + p] = c * arp - s * arq;
                        a[r * d + q] = s * arp + c * arq;
                    }
                    for r in 0..d {
                        let (apr, aqr) = (a[p * d + r], a[q * d + r]);
                        a[p * d + r] = c * apr - s * aqr;
                        a[q * d + r] = s * apr + c * aqr;
                    }
                    for r in 0..d {
                        let (vrp, vrq) = (v[r * d + p], v[r * d + q]);
                        v[r * d + p] = c * vrp - s * vrq;
                        v[r * d + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]).then(i.cmp(&j)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|j| (a[j * d + j], (0..d).map(|r| v[r * d + j]).collect()))
            .collect())
    }
}

fn matvec(m: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| m[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn orthonormalize(x: &mut [f64], basis: &[(f64, Vec<f64>)]) -> f64 {
    for (_, b) in basis {
        let dot: f64 = x.iter().zip(b).map(|(p, q)| p * q).sum();
        x.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

impl EigenSolver for PowerIteration {
    fn top(&self, m: &[f64], d: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut r = rng::stream(0, rng::tags::INIT);
        let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
        for _ in 0..k.min(d) {
            let mut x: Vec<f64> = (0..d).map(|_| rng::normal(&mut r)).collect();
            if orthonormalize(&mut x, &found) == 0.0 {
                break;
            }
            let mut lambda = 0.0;
            for _ in 0..self.max_iter {
                let mut y = matvec(m, d, &x);
                let norm = orthonormalize(&mut y, &found);
                if norm <= 1e-300 {
                    lambda = 0.0;
                    break;
                }
                let delta = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = y;
                lambda = norm;
                if delta < self.tol {
                    break;
                }
            }
            found.push((lambda, x));
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(found)
    }
}

impl EigenSolver for Auto {
    fn top(&self, m: &[f64], d: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        if d <= self.threshold {
            default_jacobi().top(m, d, k)
        } else {
            default_power().top(m, d, k)
        }
    }
}

fn default_jacobi() -> Jacobi {
    Jacobi { max_sweeps: 100 }
}

fn default_power() -> PowerIteration {
    PowerIteration {
        max_iter: 20_000,
        tol: 1e-12,
    }
}

/// `jacobi`, `power`, `auto` (Jacobi up to 128 dimensions).
pub fn eigen_solvers() -> Registry<dyn EigenSolver> {
    let mut r: Registry<dyn EigenSolver> = Registry::new("eigen-solver");
    r.register("jacobi", Box::new(default_jacobi()))
        .register("power", Box::new(default_power()))
        .register("auto", Box::new(Auto { threshold: 128 }));
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `[rows, k]` projected coordinates.
    pub coords: Tensor,
    /// Unit principal directions in input space, one per component.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues (zero for padded components).
    pub variances: Vec<f64>,
    pub flags: Vec<String>,
}

/// Projects rows of `x` (`[n, d]`) onto their top-`k` principal components.
///
/// Components are sign-normalized so the largest-magnitude entry of each
/// direction is positive. When fewer than `k` components carry variance the
/// remainder are zero and a flag is recorded. For `n < d` the eigenproblem is
/// solved on the `n×n` Gram matrix.
pub fn pca_project(x: &Tensor, k: usize, solver: &dyn EigenSolver) -> Result<Pca> {
    let (n, d) = x.dims2()?;
    if n < k.max(1) {
        return Err(Error::InvalidArgument(format!("PCA to {k} dimensions needs at least {k} rows, got {n}")));
    }
    let mut xc = x.data().to_vec();
    for j in 0..d {
        let mean = (0..n).map(|i| xc[i * d + j]).sum::<f64>() / n as f64;
        (0..n).for_each(|i| xc[i * d + j] -= mean);
    }
    let denom = (n.max(2) - 1) as f64;
    let gram = n < d;
    let m = if gram { n } else { d };
    let mut cov = vec![0.0; m * m];
    if gram {
        gemm(n, d, n, &xc, Layout::Normal, &xc, Layout::Transposed, &mut cov, false);
    } else {
        gemm(d, n, d, &xc, Layout::Transposed, &xc, Layout::Normal, &mut cov, false);
    }
    cov.iter_mut().for_each(|v| *v /= denom);
    // exact symmetry keeps the solvers honest
    for i in 0..m {
        for j in i + 1..m {
            let s = 0.5 * (cov[i * m + j] + cov[j * m + i]);
            cov[i * m + j] = s;
            cov[j * m + i] = s;
        }
    }
    let trace: f64 = (0..m).map(|i| cov[i * m + i]).sum();
    let tol = 1e-10 * trace;
    let pairs = solver.top(&cov, m, k)?;
    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    let mut flags = Vec::new();
    for c in 0..k {
        let pair = pairs.get(c).filter(|(l, _)| *l > tol && trace > 0.0);
        let Some((lambda, v)) = pair else {
            flags.push(format!("component {c} has no variance; padded with zeros"));
            components.push(vec![0.0; d]);
            variances.push(0.0);
            continue;
        };
        let mut u = if gram {
            let mut u = vec![0.0; d];
            for i in 0..n {
                let vi = v[i];
                u.iter_mut().zip(&xc[i * d..(i + 1) * d]).for_each(|(a, b)| *a += vi * b);
            }
            let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            u.iter_mut().for_each(|a| *a /= norm);
            u
        } else {
            v.clone()
        };
        let lead = (0..d).fold(0, |best, j| if u[j].abs() > u[best].abs() { j } else { best });
        if u[lead] < 0.0 {
            u.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(u);
        variances.push(*lambda);
    }
    let mut coords = vec![0.0; n * k];
    for i in 0..n {
        let row = &xc[i * d..(i + 1) * d];
        for (c, u) in components.iter().enumerate() {
            coords[i * k + c] = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
    }
    Ok(Pca {
        coords: Tensor::new(vec![n, k], coords)?,
        components,
        variances,
        flags,
    })
}
