// SPDX-License-Identifier: MIT OR Apache-2.0

use std::sync::OnceLock;

use proptest::prelude::*;

use crate::error::Error;
use crate::tensor::Tensor;

use super::*;
use crate::analysis::{ActivationMatrix, NeuronId, StrengthTable};
use crate::data::{sample_worlds, Dataset};
use crate::nn::{architectures, train_loop, LossSpec, Model, TrainConfig};
use crate::reasons::WorldSet;
use crate::rng;

fn table(strengths: &[f64]) -> StrengthTable {
    StrengthTable {
        neurons: (0..strengths.len()).map(|i| NeuronId::new("fc", i)).collect(),
        propositions: vec!["A".into()],
        values: strengths.iter().map(|&s| vec![s]).collect(),
        belief: vec![],
        summaries: vec![],
    }
}

fn indices(ids: &[NeuronId]) -> Vec<usize> {
    ids.iter().map(|n| n.index).collect()
}

#[test]
fn selection_examples() {
    let t = table(&[5.0, -2.0, 3.0]);
    assert_eq!(indices(&select_neurons(&t, "fc", 0, 2, Direction::For).unwrap()), vec![0, 2]);
    assert_eq!(indices(&select_neurons(&t, "fc", 0, 1, Direction::Against).unwrap()), vec![1]);
    let t = table(&[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(indices(&select_neurons(&t, "fc", 0, 2, Direction::For).unwrap()), vec![0, 1]);
    assert_eq!(indices(&select_neurons(&t, "fc", 0, 2, Direction::Against).unwrap()), vec![0, 1]);
    assert!(select_neurons(&t, "fc", 0, 5, Direction::For).is_err());
    assert!(select_neurons(&t, "conv", 0, 1, Direction::For).is_err());
}

#[test]
fn rules_parse_and_apply() {
    assert_eq!("affine(1,-3)".parse::<PatchRule>().unwrap(), PatchRule::affine(1.0, -3.0).unwrap());
    assert_eq!(" affine( 1 , -5 )".parse::<PatchRule>().unwrap().apply(2.0, 1.0), -3.0);
    assert_eq!("mean".parse::<PatchRule>().unwrap().apply(0.7, 9.0), 0.7);
    assert_eq!("scaled_mean(2)".parse::<PatchRule>().unwrap().apply(0.7, 9.0), 1.4);
    for bad in ["affine(1)", "median", "scaled_mean(x)", "affine(1,inf)", "affine(1,-3"] {
        assert!(bad.parse::<PatchRule>().is_err(), "{bad}");
    }
    let r = PatchRule::affine(1.0, -3.0).unwrap();
    assert_eq!(r.to_string().parse::<PatchRule>().unwrap(), r);
    assert_eq!(serde_json::to_string(&r).unwrap(), "\"affine(1,-3)\"");
    assert_eq!("against".parse::<Direction>().unwrap(), Direction::Against);
}

#[test]
fn neuron_mean_examples() {
    let worlds = WorldSet::indexed(2).unwrap();
    let ids = vec![NeuronId::new("l", 0), NeuronId::new("l", 1)];
    let m = ActivationMatrix::new(worlds, ids.clone(), Tensor::new(vec![2, 2], vec![3.0, 0.0, 3.0, 2.0]).unwrap()).unwrap();
    let means = neuron_means(&m, &ids).unwrap();
    assert_eq!(means[&ids[0]], 3.0);
    assert_eq!(means[&ids[1]], 1.0);
    assert!(neuron_means(&m, &[NeuronId::new("l", 2)]).is_err());
}

#[test]
fn kl_examples() {
    assert_eq!(kl_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
    assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
    // floored: finite even when q misses p's support
    let k = kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((k - (1.0f64 / (1e-12 / (1.0 + 1e-12))).ln()).abs() < 1e-9);
}

fn blobs3(n: usize, seed: u64) -> Dataset {
    let centres = [(2.0, 0.0), (-1.0, 1.7), (-1.0, -1.7)];
    let mut r = rng::stream(seed, 0);
    let mut x = Vec::new();
    for i in 0..n {
        let (a, b) = centres[i % 3];
        x.push(a + 0.5 * rng::normal(&mut r));
        x.push(b + 0.5 * rng::normal(&mut r));
    }
    Dataset::new(Tensor::new(vec![n, 2], x).unwrap(), (0..n).map(|i| i % 3).collect(), 3)
        .unwrap()
        .with_split("test")
}

fn trained() -> &'static (Model, Dataset) {
    static CELL: OnceLock<(Model, Dataset)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut m = architectures().get("mlp-s").unwrap().build(&[2], 3, 1).unwrap();
        let cfg = TrainConfig { epochs: 15, batch_size: 32, ..Default::default() };
        train_loop(&mut m, &blobs3(600, 1), &LossSpec::standard(), &cfg).unwrap();
        (m, blobs3(300, 2))
    })
}

#[test]
fn empty_and_fixed_point_patches_are_identities() {
    let (m, test) = trained();
    let plain = m.evaluate(test.inputs(), &mut crate::nn::CaptureSet::none()).unwrap();
    let none = patched_forward(m, test.inputs(), "fc1", &[], &BTreeMap::new()).unwrap();
    assert_eq!(none.data(), plain.data());
    // a dead (always zero) relu unit patched with affine(1,-3) around mean 0
    let s = sample_worlds(test, 300, 0).unwrap();
    let mat = ActivationMatrix::build(m, &s, &["fc1"]).unwrap();
    let means = neuron_means(&mat, mat.neurons()).unwrap();
    let rule = PatchRule::affine(1.0, -3.0).unwrap();
    let dead: Vec<(NeuronId, PatchRule)> = mat
        .neurons()
        .iter()
        .filter(|id| means[*id] == 0.0)
        .map(|id| (id.clone(), rule))
        .collect();
    let out = patched_forward(m, test.inputs(), "fc1", &dead, &means).unwrap();
    assert_eq!(out.data(), plain.data(), "{} dead units", dead.len());
}

#[test]
fn mean_rule_on_a_constant_neuron_is_an_identity() {
    let layer = crate::nn::Layer {
        spec: crate::nn::LayerSpec::new("fc", crate::nn::LayerKind::Dense { inputs: 1, outputs: 2 }),
        params: vec![Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap(), Tensor::vector(vec![0.75, 0.0])],
        buffers: vec![],
    };
    let m = Model::from_layers(&[1], vec![layer], 0).unwrap();
    let x = Tensor::new(vec![3, 1], vec![0.1, 0.5, -2.0]).unwrap();
    let plain = m.evaluate(&x, &mut crate::nn::CaptureSet::none()).unwrap();
    let id = NeuronId::new("fc", 0);
    let means = BTreeMap::from([(id.clone(), 0.75)]);
    let out = patched_forward(&m, &x, "fc", &[(id, PatchRule::Mean)], &means).unwrap();
    assert_eq!(out, plain);
    let ghost = NeuronId::new("fc", 2);
    assert!(matches!(
        patched_forward(&m, &x, "fc", &[(ghost, PatchRule::Mean)], &means),
        Err(Error::UnknownNeuron(_))
    ));
}

#[test]
fn neuron_means_agree_across_disjoint_samples() {
    let (m, _) = trained();
    let data = blobs3(2000, 9);
    let a = sample_worlds(&data.head(1000).unwrap(), 1000, 1).unwrap();
    let b = sample_worlds(&data.subset(&(1000..2000).collect::<Vec<_>>()).unwrap(), 1000, 1).unwrap();
    let ma = ActivationMatrix::build(m, &a, &["fc1"]).unwrap();
    let mb = ActivationMatrix::build(m, &b, &["fc1"]).unwrap();
    let se = |mat: &ActivationMatrix, j: usize| {
        let col = mat.column(j).unwrap();
        let v = col.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (mean, var / v.len() as f64)
    };
    for j in 0..8 {
        let ((ea, va), (eb, vb)) = (se(&ma, j), se(&mb, j));
        let means_a = neuron_means(&ma, &ma.neurons()[j..=j]).unwrap();
        assert_eq!(means_a.values().next().copied().unwrap(), ea);
        assert!((ea - eb).abs() <= 3.0 * (va + vb).sqrt() + 1e-12, "neuron {j}: {ea} vs {eb}");
    }
}

#[test]
fn experiments_report_consistent_records() {
    let (m, test) = trained();
    let s = sample_worlds(test, 300, 4).unwrap();
    let ctx = InterventionContext::build(m, &s, "fc1", 3).unwrap();
    assert_eq!(ctx.table.propositions[1], "label = 1");
    let rule = PatchRule::affine(1.0, -3.0).unwrap();
    for d in 0..3 {
        let r = pos2neg_experiment(m, test, &ctx, d, 0, rule).unwrap();
        assert_eq!(r.success_rate, 0.0);
        assert!(r.mean_kl.abs() < 1e-12);
        let r = pos2neg_experiment(m, test, &ctx, d, 30, rule).unwrap();
        assert!(r.flags_consistent());
        assert_eq!(r.attempts, r.records.len());
        assert_eq!(r.success_rate, r.successes as f64 / r.attempts as f64);
        assert!(r.records.iter().all(|x| x.label == d && x.original_prediction == d));
        assert!(r.mean_kl > 0.0);
        let affine_mean = pos2neg_experiment(m, test, &ctx, d, 30, PatchRule::affine(1.0, 0.0).unwrap()).unwrap();
        let mean = pos2neg_experiment(m, test, &ctx, d, 30, PatchRule::Mean).unwrap();
        assert_eq!(affine_mean.records, mean.records);
        let n = neg2pos_experiment(m, test, &ctx, d, 30, PatchRule::affine(1.0, -5.0).unwrap()).unwrap();
        assert!(n.flags_consistent());
        assert!(n.records.iter().all(|x| x.label != d));
        assert_eq!(n.attempts, 200);
    }
    let for_d = select_neurons(&ctx.table, "fc1", 0, 30, Direction::For).unwrap();
    let against_d = select_neurons(&ctx.table, "fc1", 0, 30, Direction::Against).unwrap();
    assert!(for_d.iter().all(|n| !against_d.contains(n)));
}

#[test]
fn no_qualifying_inputs() {
    let (m, test) = trained();
    let s = sample_worlds(test, 300, 4).unwrap();
    let ctx = InterventionContext::build(m, &s, "fc1", 3).unwrap();
    let only_zeros: Vec<usize> = (0..300).filter(|i| i % 3 == 0).collect();
    let zeros = test.subset(&only_zeros).unwrap();
    let rule = PatchRule::Mean;
    assert!(matches!(pos2neg_experiment(m, &zeros, &ctx, 1, 5, rule), Err(Error::NoQualifyingInputs(_))));
    assert!(matches!(neg2pos_experiment(m, &zeros, &ctx, 0, 5, rule), Err(Error::NoQualifyingInputs(_))));
}

proptest! {
    #[test]
    fn kl_is_nonnegative(p in proptest::collection::vec(0.0f64..1.0, 2..12), seed in 0u64..1000) {
        let mut r = rng::stream(seed, 0);
        let q: Vec<f64> = p.iter().map(|_| rng::unit(&mut r)).collect();
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum::<f64>().max(1e-300); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (p, q) = (norm(&p), norm(&q));
        prop_assume!(p.iter().sum::<f64>() > 0.5);
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn for_and_against_are_disjoint(values in proptest::collection::btree_set(-1000i32..1000, 4..40), frac in 0.0f64..0.5) {
        let strengths: Vec<f64> = values.iter().map(|&v| v as f64 / 7.0).collect();
        let t = table(&strengths);
        let k = (strengths.len() as f64 * frac) as usize;
        let a = select_neurons(&t, "fc", 0, k, Direction::For).unwrap();
        let b = select_neurons(&t, "fc", 0, k, Direction::Against).unwrap();
        prop_assert!(a.iter().all(|n| !b.contains(n)));
    }
}
