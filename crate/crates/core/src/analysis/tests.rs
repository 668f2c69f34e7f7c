// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;

use super::*;
use crate::data::{sample_worlds, Dataset, WorldSample, LABEL_ATTR};
use crate::error::Error;
use crate::nn::{architectures, Layer, LayerKind, LayerSpec, Model};
use crate::reasons::{strength, update, AttrValue, Belief, Proposition, ReasonVector, WorldSet};
use crate::rng;
use crate::tensor::Tensor;

/// One dense 1→1 unit computing `w·x + b`.
fn affine_model(w: f64, b: f64) -> Model {
    let layer = Layer {
        spec: LayerSpec::new("fc", LayerKind::Dense { inputs: 1, outputs: 1 }),
        params: vec![Tensor::matrix(1, 1, vec![w]).unwrap(), Tensor::vector(vec![b])],
        buffers: vec![],
    };
    Model::from_layers(&[1], vec![layer], 0).unwrap()
}

fn scalar_sample(xs: &[f64], labels: &[usize]) -> WorldSample {
    let x = Tensor::new(vec![xs.len(), 1], xs.to_vec()).unwrap();
    let classes = labels.iter().max().unwrap() + 1;
    let d = Dataset::new(x, labels.to_vec(), classes).unwrap();
    let mut s = sample_worlds(&d, xs.len(), 0).unwrap();
    // keep dataset order for readability
    let order: Vec<usize> = (0..xs.len()).collect();
    s.inputs = d.batch(&order).unwrap();
    s.labels = labels.to_vec();
    s.indices = order;
    s.worlds = WorldSet::indexed(xs.len())
        .unwrap()
        .with_attribute(LABEL_ATTR, labels.iter().map(|&l| AttrValue::Int(l as i64)).collect())
        .unwrap();
    s
}

fn random_image_data(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, 0);
    let x = Tensor::new(vec![n, 1, 28, 28], (0..n * 784).map(|_| rng::unit(&mut r)).collect()).unwrap();
    Dataset::new(x, (0..n).map(|i| i % 10).collect(), 10).unwrap().with_split("test")
}

#[test]
fn identity_and_constant_neurons() {
    let s = scalar_sample(&[0.3, 0.7], &[0, 1]);
    let m = ActivationMatrix::build(&affine_model(1.0, 0.0), &s, &["fc"]).unwrap();
    assert_eq!(m.column(0).unwrap().values(), &[0.3, 0.7]);
    assert_eq!(m.neurons(), &[NeuronId::new("fc", 0)]);
    let m = ActivationMatrix::build(&affine_model(0.0, 2.5), &s, &["fc"]).unwrap();
    assert_eq!(m.column(0).unwrap().values(), &[2.5, 2.5]);
    assert!(matches!(
        ActivationMatrix::build(&affine_model(1.0, 0.0), &s, &["conv9"]),
        Err(Error::UnknownLayer(_))
    ));
}

#[test]
fn mini_lenet_linear_layer_shape() {
    let model = architectures().get("mini-lenet").unwrap().build(&[1, 28, 28], 10, 0).unwrap();
    let s = sample_worlds(&random_image_data(1100, 1), 1024, 3).unwrap();
    let m = ActivationMatrix::build(&model, &s, &["fc1", "fc2"]).unwrap();
    assert_eq!((m.n_worlds(), m.n_neurons()), (1024, 74));
    assert_eq!(m.values().shape(), &[1024, 74]);
    assert_eq!(m.layers(), vec!["fc1", "fc2"]);
    assert_eq!(m.neurons()[64], NeuronId::new("fc2", 0));
    // post-activation capture: fc1 is read after its relu
    assert!(m.layer("fc1").unwrap().values().data().iter().all(|&v| v >= 0.0));
    let fc2 = m.layer("fc2").unwrap();
    let solo = ActivationMatrix::build(&model, &s, &["fc2"]).unwrap();
    assert_eq!(fc2, solo);
}

#[test]
fn label_propositions() {
    let w = WorldSet::indexed(3)
        .unwrap()
        .with_attribute("label", vec![3.into(), 1.into(), 3.into()])
        .unwrap();
    assert_eq!(label_proposition(&w, "label", &3.into()).unwrap().indices(), vec![0, 2]);
    assert!(label_proposition(&w, "label", &7.into()).unwrap().is_empty());
    assert!(matches!(label_proposition(&w, "sex", &1.into()), Err(Error::MissingAttribute(_))));
}

#[test]
fn class_proposition_sizes_follow_the_hypergeometric_law() {
    let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
    let d = Dataset::new(Tensor::zeros(&[10_000, 1]), labels, 10).unwrap();
    let (n, total) = (1024.0f64, 10_000.0f64);
    let mean = n * 0.1;
    let sd = (n * 0.1 * 0.9 * (total - n) / (total - 1.0)).sqrt();
    let s = sample_worlds(&d, 1024, 11).unwrap();
    let props = class_propositions(&s.worlds, LABEL_ATTR, 10).unwrap();
    for a in &props {
        assert!((a.count() as f64 - mean).abs() < 4.0 * sd, "{} vs {mean}", a.count());
    }
    assert_eq!(props.iter().map(Proposition::count).sum::<usize>(), 1024);
}

fn random_matrix(n: usize, cols: usize, seed: u64) -> ActivationMatrix {
    let mut r = rng::stream(seed, 9);
    let labels: Vec<AttrValue> = (0..n).map(|i| AttrValue::Int((i % 3) as i64)).collect();
    let worlds = WorldSet::indexed(n).unwrap().with_attribute(LABEL_ATTR, labels).unwrap();
    let neurons = (0..cols).map(|j| NeuronId::new(if j < cols / 2 { "a" } else { "b" }, j)).collect();
    let values = (0..n * cols).map(|_| rng::normal(&mut r)).collect();
    ActivationMatrix::new(worlds, neurons, Tensor::new(vec![n, cols], values).unwrap()).unwrap()
}

#[test]
fn heatmap_entries_and_summaries() {
    let m = random_matrix(30, 6, 1);
    let props = class_propositions(m.worlds(), LABEL_ATTR, 3).unwrap();
    let b = Belief::uniform(30);
    let t = strength_heatmap(&m, &props, &b).unwrap();
    for u in 0..6 {
        for (p, a) in props.iter().enumerate() {
            let direct = strength(&m.column(u).unwrap(), a, &b).unwrap();
            assert!((t.get(u, p) - direct).abs() < 1e-12);
        }
    }
    assert_eq!(t.summaries.len(), 6);
    let s = &t.summaries[0];
    assert_eq!(s.layer, "a");
    let col: Vec<f64> = (0..3).map(|u| t.get(u, 0)).collect();
    assert_eq!(s.min, col.iter().copied().fold(f64::INFINITY, f64::min));
    assert!((s.mean - col.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    let trivial = vec![Proposition::full(30)];
    assert!(matches!(strength_heatmap(&m, &trivial, &b), Err(Error::TrivialProposition { .. })));
}

#[test]
fn constant_column_has_zero_strength() {
    let worlds = WorldSet::indexed(5).unwrap();
    let m = ActivationMatrix::new(worlds, vec![NeuronId::new("c", 0)], Tensor::full(&[5, 1], 4.2)).unwrap();
    let props = vec![Proposition::from_indices(&[0, 3], 5).unwrap(), Proposition::from_indices(&[1], 5).unwrap()];
    let t = strength_heatmap(&m, &props, &Belief::uniform(5)).unwrap();
    assert!(t.values[0].iter().all(|s| s.abs() < 1e-12));
}

#[test]
fn untrained_model_strengths_match_the_label_shuffle_null() {
    let model = architectures().get("mini-lenet").unwrap().build(&[1, 28, 28], 10, 5).unwrap();
    let s = sample_worlds(&random_image_data(400, 2), 400, 1).unwrap();
    let m = ActivationMatrix::build(&model, &s, &["fc2"]).unwrap();
    let b = Belief::uniform(400);
    let mean_abs = |labels: &[usize]| {
        let props: Vec<Proposition> =
            (0..10).map(|d| Proposition::from_members(labels.iter().map(|&l| l == d).collect())).collect();
        let t = strength_heatmap(&m, &props, &b).unwrap();
        t.values.iter().flatten().map(|v| v.abs()).sum::<f64>() / 100.0
    };
    let real = mean_abs(&s.labels);
    let mut r = rng::stream(3, 0);
    let null: f64 = (0..5)
        .map(|_| {
            let mut l = s.labels.clone();
            rng::shuffle(&mut r, &mut l);
            mean_abs(&l)
        })
        .sum::<f64>()
        / 5.0;
    assert!(real < 3.0 * null && null < 3.0 * real, "real {real}, null {null}");
    assert!(real < 0.05, "{real}");
}

#[test]
fn layerwise_update_cases() {
    let l2 = normalizations();
    let l2 = l2.get("l2").unwrap();
    let b0 = Belief::uniform(4);
    let s = scalar_sample(&[1.0, -1.0, -1.0, 1.0], &[1, 0, 0, 1]);
    // constant layer
    let r = layerwise_update(&affine_model(0.0, 3.0), &s, &b0, l2).unwrap();
    assert_eq!(r.layers, vec!["fc"]);
    assert!(r.beliefs[1].probabilities().iter().all(|p| (p - 0.25).abs() < 1e-15));
    // elementary layer: direct evaluation
    let r = layerwise_update(&affine_model(1.0, 0.0), &s, &b0, l2).unwrap();
    let direct = update(&b0, &ReasonVector::new(vec![0.5, -0.5, -0.5, 0.5]).unwrap()).unwrap();
    for (p, q) in r.beliefs[1].probabilities().iter().zip(direct.probabilities()) {
        assert!((p - q).abs() < 1e-15);
    }
    let a = Proposition::from_indices(&[0, 3], 4).unwrap();
    assert!(r.beliefs[1].prob(&a) > 0.5);
    assert!(r.flags.is_empty());
    // zero aggregate
    let r = layerwise_update(&affine_model(0.0, 0.0), &s, &b0, l2).unwrap();
    assert_eq!(r.beliefs[1], b0);
    assert_eq!(r.flags.len(), 1);
    assert!(normalizations().get("l3").is_err());
}

#[test]
fn layerwise_layers_skip_reshapes_and_dropout() {
    let m = architectures().get("lenet").unwrap().build(&[1, 28, 28], 10, 0).unwrap();
    assert_eq!(update_layers(&m), vec!["conv1", "conv2", "pool", "fc1", "fc2", "log_softmax"]);
}

#[test]
fn pca_plane_isometry_for_every_solver() {
    let mut r = rng::stream(2, 0);
    // orthonormal pair in 10D
    let mut e1: Vec<f64> = (0..10).map(|_| rng::normal(&mut r)).collect();
    let n1 = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|v| *v /= n1);
    let mut e2: Vec<f64> = (0..10).map(|_| rng::normal(&mut r)).collect();
    let dot: f64 = e1.iter().zip(&e2).map(|(a, b)| a * b).sum();
    e2.iter_mut().zip(&e1).for_each(|(b, a)| *b -= dot * a);
    let n2 = e2.iter().map(|v| v * v).sum::<f64>().sqrt();
    e2.iter_mut().for_each(|v| *v /= n2);
    for n in [40, 6] {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (3.0 * rng::normal(&mut r), rng::normal(&mut r))).collect();
        let (e1, e2) = (&e1, &e2);
        let data: Vec<f64> = pts
            .iter()
            .flat_map(|&(a, b)| (0..10).map(move |j| a * e1[j] + b * e2[j] + 0.5))
            .collect();
        let x = Tensor::new(vec![n, 10], data).unwrap();
        for name in ["jacobi", "power", "auto"] {
            let p = pca_project(&x, 2, eigen_solvers().get(name).unwrap()).unwrap();
            assert!(p.flags.is_empty(), "{name}: {:?}", p.flags);
            for i in 0..n {
                for j in 0..n {
                    let d_in = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                    let (ci, cj) = (p.coords.row(i), p.coords.row(j));
                    let d_out = ((ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2)).sqrt();
                    assert!((d_in - d_out).abs() < 1e-6, "{name} n={n}");
                }
            }
            for u in &p.components {
                let lead = u.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
                assert!(lead > 0.0);
            }
        }
    }
}

#[test]
fn pca_duplicates_and_rank_deficiency() {
    let x = Tensor::new(vec![4, 3], vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 0.0, 1.0, 5.0, 2.0, 0.0, 1.0]).unwrap();
    let p = pca_project(&x, 2, eigen_solvers().get("auto").unwrap()).unwrap();
    assert_eq!(p.coords.row(0), p.coords.row(1));
    // 1D data
    let line: Vec<f64> = (0..8).flat_map(|i| { let t = i as f64; [t, 2.0 * t, -t] }).collect();
    let x = Tensor::new(vec![8, 3], line).unwrap();
    for name in ["jacobi", "power"] {
        let p = pca_project(&x, 2, eigen_solvers().get(name).unwrap()).unwrap();
        assert!((0..8).all(|i| p.coords.row(i)[1] == 0.0));
        assert_eq!(p.flags.len(), 1);
        assert!(p.variances[0] > 0.0);
    }
    assert!(pca_project(&Tensor::zeros(&[1, 3]), 2, eigen_solvers().get("auto").unwrap()).is_err());
}

#[test]
fn solvers_agree_and_gram_trick_matches_direct() {
    let mut r = rng::stream(8, 0);
    let x = Tensor::new(vec![12, 7], (0..84).map(|_| rng::normal(&mut r)).collect()).unwrap();
    let j = pca_project(&x, 3, eigen_solvers().get("jacobi").unwrap()).unwrap();
    let p = pca_project(&x, 3, eigen_solvers().get("power").unwrap()).unwrap();
    for c in 0..3 {
        assert!((j.variances[c] - p.variances[c]).abs() < 1e-8 * j.variances[0]);
    }
    for (a, b) in j.coords.data().iter().zip(p.coords.data()) {
        assert!((a - b).abs() < 1e-5);
    }
    // wide data goes through the 5×5 Gram matrix; compare with its transpose-free oracle
    let wide = Tensor::new(vec![5, 9], (0..45).map(|_| rng::normal(&mut r)).collect()).unwrap();
    let g = pca_project(&wide, 2, eigen_solvers().get("jacobi").unwrap()).unwrap();
    let padded = {
        // duplicating every row keeps covariance directions and makes n > d
        let mut rows = wide.data().to_vec();
        rows.extend_from_slice(wide.data());
        Tensor::new(vec![10, 9], rows).unwrap()
    };
    let d = pca_project(&padded, 2, eigen_solvers().get("jacobi").unwrap()).unwrap();
    for i in 0..5 {
        for c in 0..2 {
            assert!((g.coords.row(i)[c] - d.coords.row(i)[c]).abs() < 1e-8);
        }
    }
}

#[test]
fn purity_cases() {
    // identical rows per label, labels far apart
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let l = i % 4;
        data.extend([10.0 * l as f64, -3.0 * l as f64]);
        labels.push(l);
    }
    let x = Tensor::new(vec![40, 2], data).unwrap();
    assert_eq!(cluster_purity(&x, &labels, 5).unwrap(), 1.0);
    assert!(cluster_purity(&x, &labels, 40).is_err());
    // ties broken by index: row 0's nearest are rows 1 and 2 at equal distance
    let x = Tensor::new(vec![4, 1], vec![0.0, 1.0, -1.0, 5.0]).unwrap();
    assert_eq!(cluster_purity(&x.slice_rows(0, 4).unwrap(), &[0, 0, 1, 1], 1).unwrap(), 0.5);
}

#[test]
fn purity_of_random_labels_on_identical_rows_is_chance() {
    let n = 600;
    let x = Tensor::full(&[n, 4], 0.25);
    let mut r = rng::stream(6, 0);
    for classes in [2usize, 5] {
        let labels: Vec<usize> = (0..n).map(|_| rng::below_inclusive(&mut r, classes as u64 - 1) as usize).collect();
        let p = cluster_purity(&x, &labels, 10).unwrap();
        assert!((p - 1.0 / classes as f64).abs() < 0.05, "{classes}: {p}");
    }
}

fn random_rotation(d: usize, r: &mut rng::StreamRng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng::normal(r)).collect();
        for b in &q {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn purity_is_rotation_invariant(seed in 0u64..10_000) {
        let mut r = rng::stream(seed, 1);
        let (n, d) = (60, 5);
        let x: Vec<f64> = (0..n * d).map(|_| rng::normal(&mut r)).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 3).collect();
        let q = random_rotation(d, &mut r);
        let y: Vec<f64> = (0..n)
            .flat_map(|i| { let row = &x[i * d..(i + 1) * d]; q.iter().map(move |b| row.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()) })
            .collect();
        let px = cluster_purity(&Tensor::new(vec![n, d], x).unwrap(), &labels, 10).unwrap();
        let py = cluster_purity(&Tensor::new(vec![n, d], y).unwrap(), &labels, 10).unwrap();
        prop_assert_eq!(px, py);
    }

    #[test]
    fn pca_purity_is_permutation_invariant(seed in 0u64..10_000) {
        let mut r = rng::stream(seed, 2);
        let (n, d) = (50, 6);
        let x: Vec<f64> = (0..n * d).map(|_| rng::normal(&mut r) * (1.0 + (seed % 3) as f64)).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut r, &mut perm);
        let t = Tensor::new(vec![n, d], x).unwrap();
        let tp = t.select_rows(&perm).unwrap();
        let lp: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let solver = eigen_solvers();
        let solver = solver.get("jacobi").unwrap();
        let a = pca_project(&t, 2, solver).unwrap();
        let b = pca_project(&tp, 2, solver).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            for c in 0..2 {
                prop_assert!((a.coords.row(i)[c] - b.coords.row(k)[c]).abs() < 1e-8);
            }
        }
        let pa = cluster_purity(&a.coords, &labels, 5).unwrap();
        let pb = cluster_purity(&b.coords, &lp, 5).unwrap();
        prop_assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn layerwise_beliefs_stay_valid(seed in 0u64..10_000, w in -5.0f64..5.0, c in -3.0f64..3.0) {
        let mut r = rng::stream(seed, 3);
        let xs: Vec<f64> = (0..16).map(|_| rng::normal(&mut r)).collect();
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let s = scalar_sample(&xs, &labels);
        let prior = Belief::from_weights(&(0..16).map(|_| rng::unit(&mut r) + 0.01).collect::<Vec<_>>()).unwrap();
        for name in ["l2", "l1", "max"] {
            let reg = normalizations();
            let rep = layerwise_update(&affine_model(w, c), &s, &prior, reg.get(name).unwrap()).unwrap();
            for b in &rep.beliefs {
                prop_assert!((b.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(b.probabilities().iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn heatmap_matches_column_strengths(seed in 0u64..10_000) {
        let m = random_matrix(12, 4, seed);
        let mut r = rng::stream(seed, 4);
        let b = Belief::from_weights(&(0..12).map(|_| rng::unit(&mut r) + 0.05).collect::<Vec<_>>()).unwrap();
        let props = class_propositions(m.worlds(), LABEL_ATTR, 3).unwrap();
        let t = strength_heatmap(&m, &props, &b).unwrap();
        for u in 0..4 {
            for (p, a) in props.iter().enumerate() {
                prop_assert!((t.get(u, p) - strength(&m.column(u).unwrap(), a, &b).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dump_round_trip_and_csv() {
    let m = random_matrix(7, 3, 4);
    let bytes = dump::encode(&m).unwrap();
    let back = dump::decode(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(dump::encode(&back).unwrap(), bytes);
    let mut csv = Vec::new();
    dump::write_csv(&m, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
    assert_eq!(lines[0], "world,a[0],b[1],b[2]");
}

#[test]
fn dump_errors_carry_offsets() {
    let m = random_matrix(4, 2, 1);
    let bytes = dump::encode(&m).unwrap();
    let offset = |b: &[u8]| match dump::decode(b) {
        Err(Error::Format { offset, .. }) => offset,
        other => panic!("expected a format error, got {other:?}"),
    };
    let mut bad = bytes.clone();
    bad[6..10].copy_from_slice(&5u32.to_le_bytes());
    assert_eq!(offset(&bad), 6);
    let mut bad = bytes.clone();
    bad[10..14].copy_from_slice(&3u32.to_le_bytes());
    assert_eq!(offset(&bad), 10);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(offset(&bad), 0);
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert_eq!(offset(&bad), 4);
    assert_eq!(offset(&bytes[..bytes.len() - 3]), (bytes.len() - 8 * 8) as u64);
    let mut long = bytes.clone();
    long.push(0);
    assert_eq!(offset(&long), bytes.len() as u64);
    assert_eq!(offset(&bytes[..3]), 0);
}

#[test]
fn dump_of_model_layer_equals_internal_matrix() {
    let model = architectures().get("mini-lenet").unwrap().build(&[1, 28, 28], 10, 0).unwrap();
    let s = sample_worlds(&random_image_data(40, 5), 32, 3).unwrap();
    let m = ActivationMatrix::build(&model, &s, &["fc1"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fc1.ract");
    dump::save(&m, &path).unwrap();
    let back = dump::load(&path).unwrap();
    assert_eq!(back, m);
    let props = class_propositions(back.worlds(), LABEL_ATTR, 10)
        .unwrap()
        .into_iter()
        .filter(|a| !a.is_empty())
        .collect::<Vec<_>>();
    let b = Belief::uniform(32);
    assert_eq!(strength_heatmap(&back, &props, &b).unwrap(), strength_heatmap(&m, &props, &b).unwrap());
}
