// SPDX-License-Identifier: MIT OR Apache-2.0

use std::sync::Arc;

use reasonlens::analysis::{
    class_propositions, cluster_purity, dump, eigen_solvers, label_proposition, layerwise_update, normalizations,
    pca_project, strength_heatmap, update_layers, ActivationMatrix, StrengthTable,
};
use reasonlens::data::{
    load_mnist_idx, load_tabular_csv, sample_worlds, synthetic_digits, synthetic_fairness, Dataset, TabularSpec,
    WorldSample, LABEL_ATTR,
};
use reasonlens::error::Error;
use reasonlens::interventions::{
    neg2pos_experiment, pos2neg_experiment, select_neurons, Direction, InterventionContext, InterventionReport,
    PatchRule,
};
use reasonlens::nn::{
    architectures, checkpoint, evaluate, predictions, train_loop, CaptureSet, LossSpec, Metrics, Model, Objective,
    TrainConfig, TrainHistory,
};
use reasonlens::objectives::{
    disparate_impact, equality_of_opportunity, objective, paired_training, reasons_difference, robustness_curve,
    FairnessRow, PairedRun,
};
use reasonlens::reasons::{AttrValue, Belief};
use serde_json::json;

use crate::config::{DatasetConfig, RunConfig, Split};
use crate::error::CliError;
use crate::output::{num, opt, Output};

pub struct Data {
    pub train: Dataset,
    pub test: Dataset,
    /// Binary tabular task with group flags and one output logit.
    pub tabular: bool,
}

pub fn load_data(cfg: &RunConfig) -> Result<Data, CliError> {
    Ok(match &cfg.dataset {
        DatasetConfig::SyntheticDigits { train_per_class, test_per_class, seed } => Data {
            train: synthetic_digits(*train_per_class, *seed)?.with_split("train"),
            test: synthetic_digits(*test_per_class, seed + 1)?.with_split("test"),
            tabular: false,
        },
        DatasetConfig::MnistIdx { train_images, train_labels, test_images, test_labels, limit } => {
            let mut train = load_mnist_idx(train_images, train_labels)?.with_split("train");
            if let Some(n) = limit {
                train = train.head(*n)?;
            }
            Data {
                train,
                test: load_mnist_idx(test_images, test_labels)?.with_split("test"),
                tabular: false,
            }
        }
        DatasetConfig::SyntheticFairness { train_n, test_n, bias, seed } => Data {
            train: synthetic_fairness(*train_n, *bias, *seed)?.with_split("train"),
            test: synthetic_fairness(*test_n, *bias, seed + 1)?.with_split("test"),
            tabular: true,
        },
        DatasetConfig::TabularCsv {
            path,
            label_column,
            threshold,
            protected_column,
            privileged_value,
            include_protected,
            test_fraction,
        } => {
            let mut spec = TabularSpec::new(label_column, *threshold, protected_column, *privileged_value);
            spec.include_protected = *include_protected;
            spec.test_fraction = *test_fraction;
            spec.seed = cfg.seed;
            let splits = load_tabular_csv(path, &spec)?;
            Data {
                train: splits.train,
                test: splits.test,
                tabular: true,
            }
        }
    })
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.training.epochs,
        batch_size: cfg.training.batch_size,
        optimizer: cfg.training.optimizer.clone(),
        seed: cfg.seed,
    }
}

fn initial_model(cfg: &RunConfig, data: &Data) -> Result<Model, CliError> {
    let outputs = if data.tabular { 1 } else { data.train.classes() };
    Ok(architectures()
        .get(&cfg.model.architecture)?
        .build(&data.train.input_shape(), outputs, cfg.seed)?)
}

fn reasons_objective(cfg: &RunConfig) -> Result<Option<Arc<dyn Objective>>, CliError> {
    cfg.loss.reasons.as_deref().map(objective).transpose().map_err(CliError::from)
}

fn loss_spec(cfg: &RunConfig) -> Result<LossSpec, CliError> {
    Ok(match reasons_objective(cfg)? {
        Some(o) => LossSpec::combined(o, cfg.loss.weight)?,
        None => LossSpec::standard(),
    })
}

/// The configured checkpoint, or a model trained as `train` would.
fn obtain_model(cfg: &RunConfig, data: &Data) -> Result<(Model, Option<TrainHistory>), CliError> {
    if let Some(p) = &cfg.model.checkpoint {
        return Ok((checkpoint::load(p)?, None));
    }
    let mut model = initial_model(cfg, data)?;
    let history = train_loop(&mut model, &data.train, &loss_spec(cfg)?, &train_config(cfg))?;
    Ok((model, Some(history)))
}

fn paired(cfg: &RunConfig, data: &Data, default_objective: Option<&str>) -> Result<PairedRun, CliError> {
    let extra = match (reasons_objective(cfg)?, default_objective) {
        (Some(o), _) => o,
        (None, Some(name)) => objective(name)?,
        (None, None) => return Err(CliError::Config("loss.paired: needs loss.reasons".into())),
    };
    let init = initial_model(cfg, data)?;
    Ok(paired_training(&init, &data.train, extra, cfg.loss.weight, &train_config(cfg))?)
}

fn world_sample(cfg: &RunConfig, data: &Data) -> Result<WorldSample, CliError> {
    let source = match cfg.worlds.split {
        Split::Train => &data.train,
        Split::Test => &data.test,
    };
    let n = cfg.worlds.count.unwrap_or(source.len());
    Ok(sample_worlds(source, n, cfg.worlds.seed.unwrap_or(cfg.seed))?)
}

fn metrics_json(m: &Metrics) -> serde_json::Value {
    json!({ "accuracy": m.accuracy, "f1": m.f1 })
}

pub fn train(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let mut rows = Vec::new();
    let mut doc = serde_json::Map::new();
    if cfg.loss.paired {
        let run = paired(cfg, &data, None)?;
        for (name, model, history) in [
            ("reasons", &run.reasons, &run.reasons_history),
            ("comparison", &run.comparison, &run.comparison_history),
        ] {
            out.write(&format!("{name}.ckpt"), &checkpoint::encode(model))?;
            let m = evaluate(model, &data.test)?;
            rows.push(vec![name.to_string(), num(m.accuracy), num(m.f1)]);
            doc.insert(name.into(), json!({ "test": metrics_json(&m), "history": history }));
        }
    } else {
        let (model, history) = obtain_model(cfg, &data)?;
        out.write("model.ckpt", &checkpoint::encode(&model))?;
        let m = evaluate(&model, &data.test)?;
        rows.push(vec!["model".to_string(), num(m.accuracy), num(m.f1)]);
        doc.insert("model".into(), json!({ "test": metrics_json(&m), "history": history }));
    }
    out.csv("metrics.csv", &["model", "accuracy", "f1"], &rows)?;
    out.json("metrics.json", &doc)
}

fn strength_rows(table: &StrengthTable) -> Vec<Vec<String>> {
    (0..table.propositions.len())
        .map(|p| {
            let mut row = vec![table.propositions[p].clone()];
            row.extend(table.values.iter().map(|r| num(r[p])));
            row
        })
        .collect()
}

fn strength_header(table: &StrengthTable) -> Vec<String> {
    let mut h = vec!["proposition".to_string()];
    h.extend(table.neurons.iter().map(ToString::to_string));
    h
}

fn file_stem(layer: &str) -> String {
    layer.replace(':', "_")
}

/// Largest layer, in neurons, written as an activation dump by `analyze`.
const DUMP_LIMIT: usize = 1024;

pub fn analyze(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let (model, _) = obtain_model(cfg, &data)?;
    let sample = world_sample(cfg, &data)?;
    let layers: Vec<String> = match &cfg.analysis.layers {
        Some(l) => l.clone(),
        None => update_layers(&model).into_iter().map(String::from).collect(),
    };
    let classes = data.test.classes();
    let props = class_propositions(&sample.worlds, LABEL_ATTR, classes)?;
    let belief = Belief::uniform(sample.worlds.len());
    let solvers = eigen_solvers();
    let solver = solvers.get(&cfg.analysis.solver)?;
    let mut purity_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut flags = Vec::new();
    for layer in &layers {
        let matrix = ActivationMatrix::build(&model, &sample, &[layer.as_str()])?;
        let stem = file_stem(layer);
        let table = strength_heatmap(&matrix, &props, &belief)?;
        out.csv(&format!("strengths_{stem}.csv"), &strength_header(&table), &strength_rows(&table))?;
        for s in &table.summaries {
            summary_rows.push(vec![s.layer.clone(), s.proposition.clone(), num(s.min), num(s.mean), num(s.max)]);
        }
        let pca = pca_project(matrix.values(), cfg.analysis.pca_dim, solver)?;
        flags.extend(pca.flags.iter().map(|f| format!("{layer}: {f}")));
        let mut header = vec!["world".to_string(), "label".to_string()];
        header.extend((1..=cfg.analysis.pca_dim).map(|c| format!("pc{c}")));
        let rows: Vec<Vec<String>> = (0..sample.worlds.len())
            .map(|i| {
                let mut r = vec![sample.worlds.ids()[i].clone(), sample.labels[i].to_string()];
                r.extend(pca.coords.row(i).iter().map(|&v| num(v)));
                r
            })
            .collect();
        out.csv(&format!("pca_{stem}.csv"), &header, &rows)?;
        let full = cluster_purity(matrix.values(), &sample.labels, cfg.analysis.k)?;
        let projected = cluster_purity(&pca.coords, &sample.labels, cfg.analysis.k)?;
        purity_rows.push(vec![layer.clone(), num(full), num(projected)]);
        if matrix.n_neurons() <= DUMP_LIMIT {
            out.write(&format!("activations_{stem}.ract"), &dump::encode(&matrix)?)?;
        }
    }
    out.csv("layer_summary.csv", &["layer", "proposition", "min", "mean", "max"], &summary_rows)?;
    out.csv("purity.csv", &["layer", "purity_full", "purity_pca"], &purity_rows)?;
    let norms = normalizations();
    let report = layerwise_update(&model, &sample, &belief, norms.get(&cfg.analysis.normalization)?)?;
    let mut header = vec!["world".to_string(), "label".to_string(), "prior".to_string()];
    header.extend(report.layers.iter().cloned());
    let rows: Vec<Vec<String>> = (0..sample.worlds.len())
        .map(|i| {
            let mut r = vec![sample.worlds.ids()[i].clone(), sample.labels[i].to_string()];
            r.extend(report.beliefs.iter().map(|b| num(b.probabilities()[i])));
            r
        })
        .collect();
    out.csv("layerwise.csv", &header, &rows)?;
    flags.extend(report.flags.iter().cloned());
    let entropies: Vec<f64> = report.beliefs.iter().map(Belief::entropy).collect();
    let purity: serde_json::Map<String, serde_json::Value> = purity_rows
        .iter()
        .map(|r| (r[0].clone(), json!({ "full": r[1].parse::<f64>().ok(), "pca": r[2].parse::<f64>().ok() })))
        .collect();
    out.json(
        "summary.json",
        &json!({
            "worlds": sample.worlds.len(),
            "layers": layers,
            "purity": purity,
            "layerwise_entropy": entropies,
            "flags": flags,
        }),
    )
}

fn rule(field: &str, text: &str) -> Result<PatchRule, CliError> {
    text.parse().map_err(|e: Error| CliError::Config(format!("{field}: {e}")))
}

pub fn intervene(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let (model, _) = obtain_model(cfg, &data)?;
    let sample = world_sample(cfg, &data)?;
    let ic = &cfg.intervention;
    let pos_rule = rule("intervention.pos2neg_rule", &ic.pos2neg_rule)?;
    let neg_rule = rule("intervention.neg2pos_rule", &ic.neg2pos_rule)?;
    let classes = data.test.classes();
    let ctx = InterventionContext::build(&model, &sample, &ic.layer, classes)?;
    let chosen: Vec<usize> = ic.classes.clone().unwrap_or_else(|| (0..classes).collect());
    let mut reports: Vec<InterventionReport> = Vec::new();
    let mut skipped = Vec::new();
    for &d in &chosen {
        for result in [
            pos2neg_experiment(&model, &data.test, &ctx, d, ic.count, pos_rule),
            neg2pos_experiment(&model, &data.test, &ctx, d, ic.count, neg_rule),
        ] {
            match result {
                Ok(r) => reports.push(r),
                Err(Error::NoQualifyingInputs(what)) => skipped.push(what),
                Err(e) => return Err(e.into()),
            }
        }
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.protocol.to_string(),
                r.class.to_string(),
                r.attempts.to_string(),
                num(r.success_rate),
                num(r.mean_kl),
                num(r.median_kl),
            ]
        })
        .collect();
    out.csv(
        "interventions.csv",
        &["protocol", "class", "attempts", "success_rate", "mean_kl", "median_kl"],
        &rows,
    )?;
    out.json(
        "interventions.json",
        &json!({ "reference_means": "world sample", "skipped": skipped, "reports": reports }),
    )
}

pub fn attack(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let models: Vec<(String, Model)> = if cfg.loss.paired {
        let run = paired(cfg, &data, None)?;
        vec![("reasons".into(), run.reasons), ("comparison".into(), run.comparison)]
    } else {
        vec![("model".into(), obtain_model(cfg, &data)?.0)]
    };
    let mut rows = Vec::new();
    let mut doc = serde_json::Map::new();
    for (name, model) in &models {
        let curve = robustness_curve(model, &data.test, &cfg.attack.epsilons)?;
        rows.extend(curve.iter().map(|p| vec![name.clone(), num(p.epsilon), num(p.accuracy)]));
        doc.insert(name.clone(), serde_json::to_value(&curve)?);
    }
    out.csv("robustness.csv", &["model", "epsilon", "accuracy"], &rows)?;
    out.json("robustness.json", &doc)
}

fn fairness_row(name: &str, model: &Model, test: &Dataset) -> Result<FairnessRow, CliError> {
    let privileged = test
        .privileged()
        .ok_or_else(|| CliError::Data("test split has no group flags".into()))?;
    let logits = model.evaluate(test.inputs(), &mut CaptureSet::none())?;
    let preds = predictions(&logits);
    let m = evaluate(model, test)?;
    Ok(FairnessRow {
        model: name.to_string(),
        accuracy: m.accuracy,
        f1: m.f1,
        di: disparate_impact(&preds, privileged).ok(),
        eoo: equality_of_opportunity(&preds, test.labels(), privileged).ok(),
        rd: reasons_difference(logits.data(), privileged)?,
    })
}

pub fn fair(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    if !data.tabular {
        return Err(CliError::Config("dataset.kind: fairness runs need a tabular dataset".into()));
    }
    let run = paired(cfg, &data, Some("reasons_difference"))?;
    let table = vec![
        fairness_row("reasons", &run.reasons, &data.test)?,
        fairness_row("comparison", &run.comparison, &data.test)?,
    ];
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| vec![r.model.clone(), num(r.accuracy), num(r.f1), opt(r.di), opt(r.eoo), opt(r.rd)])
        .collect();
    out.csv("fairness.csv", &["model", "Acc", "F1", "DI", "EoO", "RD"], &rows)?;
    out.json(
        "fairness.json",
        &json!({
            "table": table,
            "reasons_history": run.reasons_history,
            "comparison_history": run.comparison_history,
        }),
    )
}

pub fn ingest(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let path = cfg
        .ingest
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("ingest.path: required (or pass --dump)".into()))?;
    let matrix = dump::load(path)?;
    let attr = &cfg.ingest.attribute;
    let values: Vec<AttrValue> = match &cfg.ingest.values {
        Some(v) => v.iter().map(|s| AttrValue::parse(s)).collect(),
        None => matrix.worlds().attribute_values(attr)?,
    };
    let props = values
        .iter()
        .map(|v| label_proposition(matrix.worlds(), attr, v))
        .collect::<Result<Vec<_>, _>>()?;
    let table = strength_heatmap(&matrix, &props, &Belief::uniform(matrix.n_worlds()))?;
    let mut rows = Vec::new();
    let mut selections = Vec::new();
    for (p, name) in table.propositions.iter().enumerate() {
        let mut order: Vec<usize> = (0..table.neurons.len()).collect();
        order.sort_by(|&a, &b| table.values[b][p].total_cmp(&table.values[a][p]).then(a.cmp(&b)));
        for (rank, &u) in order.iter().enumerate() {
            rows.push(vec![name.clone(), (rank + 1).to_string(), table.neurons[u].to_string(), num(table.values[u][p])]);
        }
        for layer in matrix.layers() {
            let width = matrix.layer_columns(layer)?.len();
            let k = cfg.ingest.top_k.min(width);
            selections.push(json!({
                "proposition": name,
                "layer": layer,
                "for": select_neurons(&table, layer, p, k, Direction::For)?,
                "against": select_neurons(&table, layer, p, k, Direction::Against)?,
            }));
        }
    }
    out.csv("ranking.csv", &["proposition", "rank", "neuron", "strength"], &rows)?;
    out.csv(
        "strengths.csv",
        &strength_header(&table),
        &strength_rows(&table),
    )?;
    out.json("selection.json", &selections)
}
