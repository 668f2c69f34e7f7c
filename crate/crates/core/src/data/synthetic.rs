// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded offline stand-ins for MNIST and census data.

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, tags, StreamRng};
use crate::tensor::Tensor;

const SIDE: usize = 28;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64) -> Stroke {
    let steps = (((to - from).abs() / 15.0).ceil() as usize).max(2);
    (0..=steps)
        .map(|i| {
            let a = (from + (to - from) * i as f64 / steps as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn line(points: &[(f64, f64)]) -> Stroke {
    points.to_vec()
}

/// Stroke skeletons in a unit box, y pointing down.
fn glyph(digit: usize) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.38, 0.48, 0.0, 360.0)],
        1 => vec![line(&[(0.3, 0.2), (0.52, 0.02), (0.52, 0.98)])],
        2 => vec![
            arc(0.5, 0.28, 0.35, 0.26, 200.0, 380.0),
            line(&[(0.83, 0.37), (0.12, 0.97), (0.9, 0.97)]),
        ],
        3 => vec![
            arc(0.5, 0.27, 0.33, 0.25, 200.0, 450.0),
            arc(0.5, 0.73, 0.36, 0.25, 270.0, 520.0),
        ],
        4 => vec![
            line(&[(0.62, 0.02), (0.1, 0.65), (0.92, 0.65)]),
            line(&[(0.68, 0.3), (0.68, 0.98)]),
        ],
        5 => vec![
            line(&[(0.85, 0.02), (0.2, 0.02), (0.17, 0.45)]),
            arc(0.5, 0.68, 0.35, 0.3, 220.0, 500.0),
        ],
        6 => vec![
            arc(0.62, 0.55, 0.45, 0.5, 250.0, 180.0),
            arc(0.5, 0.7, 0.33, 0.28, 0.0, 360.0),
        ],
        7 => vec![line(&[(0.1, 0.03), (0.9, 0.03), (0.4, 0.98)])],
        8 => vec![
            arc(0.5, 0.27, 0.3, 0.24, 0.0, 360.0),
            arc(0.5, 0.73, 0.36, 0.25, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.3, 0.33, 0.27, 0.0, 360.0),
            line(&[(0.83, 0.3), (0.75, 0.98)]),
        ],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

fn render(digit: usize, rng: &mut StreamRng) -> Vec<f64> {
    let scale = rng::uniform(rng, 0.85, 1.1);
    let aspect = rng::uniform(rng, 0.85, 1.15);
    let theta = rng::uniform(rng, -10.0, 10.0).to_radians();
    let shear = rng::uniform(rng, -0.2, 0.2);
    let (tx, ty) = (rng::uniform(rng, -2.0, 2.0), rng::uniform(rng, -2.0, 2.0));
    let radius = rng::uniform(rng, 0.9, 1.6);
    let ink = rng::uniform(rng, 0.7, 1.0);
    let (sin, cos) = theta.sin_cos();
    let (w, h) = (14.0 * scale * aspect, 18.0 * scale);

    let mut place = |(u, v): (f64, f64)| {
        let u = u + 0.025 * rng::normal(rng);
        let v = v + 0.025 * rng::normal(rng);
        let x = (u - 0.5) * w + shear * (v - 0.5) * h;
        let y = (v - 0.5) * h;
        (14.0 + tx + cos * x - sin * y, 14.0 + ty + sin * x + cos * y)
    };

    let mut dist = vec![f64::INFINITY; SIDE * SIDE];
    for stroke in glyph(digit) {
        let pts: Vec<(f64, f64)> = stroke.into_iter().map(&mut place).collect();
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let reach = radius + 1.0;
            let x0 = (a.0.min(b.0) - reach).floor().max(0.0) as usize;
            let x1 = ((a.0.max(b.0) + reach).ceil().max(0.0) as usize).min(SIDE - 1);
            let y0 = (a.1.min(b.1) - reach).floor().max(0.0) as usize;
            let y1 = ((a.1.max(b.1) + reach).ceil().max(0.0) as usize).min(SIDE - 1);
            for py in y0..=y1 {
                for px in x0..=x1 {
                    let d = segment_distance((px as f64, py as f64), a, b);
                    let slot = &mut dist[py * SIDE + px];
                    *slot = slot.min(d);
                }
            }
        }
    }
    dist.into_iter()
        .map(|d| {
            let base = ink * (radius + 0.5 - d).clamp(0.0, 1.0);
            (base + 0.05 * rng::normal(rng)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Procedural 28×28 digit glyphs with seeded affine jitter, stroke wobble,
/// thickness variation and pixel noise. Classes are interleaved so any
/// prefix is near balanced. Inputs are `N × 1 × 28 × 28` in `[0, 1]`.
pub fn synthetic_digits(per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    let mut rng = rng::stream(seed, tags::SYNTH);
    let n = per_class * 10;
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let digit = i % 10;
        pixels.extend(render(digit, &mut rng));
        labels.push(digit);
    }
    let inputs = Tensor::new(vec![n, 1, SIDE, SIDE], pixels)?;
    Ok(Dataset::new(inputs, labels, 10)?.with_split("synthetic"))
}

/// Binary task with a protected group and a controlled label-rate gap.
///
/// Nine standard-normal features drive a noisy score; the tenth feature is
/// the group flag. Within each group the label is 1 for the top
/// `0.5 ± bias/2` fraction of scores (plus for the privileged group), so the
/// in-sample gap in positive rates is `bias` up to rounding.
pub fn synthetic_fairness(n: usize, bias: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidArgument("need at least 4 examples".into()));
    }
    if !(0.0..1.0).contains(&bias) {
        return Err(Error::InvalidArgument(format!("bias {bias} outside [0, 1)")));
    }
    const FEATURES: usize = 10;
    let mut rng = rng::stream(seed, tags::SYNTH);
    let mut x = Vec::with_capacity(n * FEATURES);
    let mut score = Vec::with_capacity(n);
    let mut privileged = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = 0.0;
        for j in 0..FEATURES - 1 {
            let v = rng::normal(&mut rng);
            s += v / (j + 1) as f64;
            x.push(v);
        }
        let g = rng::unit(&mut rng) < 0.5;
        x.push(g as u8 as f64);
        score.push(s + 0.3 * rng::normal(&mut rng));
        privileged.push(g);
    }
    let mut labels = vec![0usize; n];
    for group in [true, false] {
        let mut members: Vec<usize> = (0..n).filter(|&i| privileged[i] == group).collect();
        members.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let rate = if group { 0.5 + bias / 2.0 } else { 0.5 - bias / 2.0 };
        let positives = (rate * members.len() as f64).round() as usize;
        for &i in &members[..positives] {
            labels[i] = 1;
        }
    }
    let inputs = Tensor::new(vec![n, FEATURES], x)?;
    Dataset::new(inputs, labels, 2)?
        .with_privileged(privileged)
        .map(|d| d.with_split("synthetic"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_are_deterministic_and_sized() {
        let a = synthetic_digits(10, 3).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, synthetic_digits(10, 3).unwrap());
        assert_ne!(a.inputs(), synthetic_digits(10, 4).unwrap().inputs());
        assert!(a.inputs().data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        for d in 0..10 {
            assert_eq!(a.labels().iter().filter(|&&l| l == d).count(), 10);
        }
    }

    #[test]
    fn glyphs_have_ink() {
        let a = synthetic_digits(1, 0).unwrap();
        for i in 0..10 {
            let ink = a.inputs().row(i).iter().filter(|&&p| p > 0.5).count();
            assert!(ink > 20, "digit {i} has {ink} inked pixels");
        }
    }

    fn rates(d: &Dataset) -> (f64, f64) {
        let p = d.privileged().unwrap();
        let rate = |g: bool| {
            let m: Vec<usize> = (0..d.len()).filter(|&i| p[i] == g).collect();
            m.iter().filter(|&&i| d.labels()[i] == 1).count() as f64 / m.len() as f64
        };
        (rate(true), rate(false))
    }

    #[test]
    fn fairness_gap_follows_bias() {
        let (p, u) = rates(&synthetic_fairness(2000, 0.0, 1).unwrap());
        assert!((p - u).abs() < 0.01);
        let (p, u) = rates(&synthetic_fairness(2000, 0.3, 1).unwrap());
        assert!((p - u - 0.3).abs() < 0.01, "gap {}", p - u);
        assert_eq!(synthetic_fairness(50, 0.3, 9).unwrap(), synthetic_fairness(50, 0.3, 9).unwrap());
    }
}
