//! End-to-end run: load, clean, split, rank on the training split, select,
//! encode, rebalance the training split, fit every requested model and
//! score it on the untouched test split.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::balance::{class_counts, oversample};
use crate::classic::{knn_fit, logistic_fit, nb_fit, tree_fit};
use crate::config::{ModelKind, RunConfig};
use crate::dataset::{split_indices, CleanReport, Dataset};
use crate::error::Result;
use crate::features::{fit_extra_trees, importances, select_variables, FeatureTable, ImportanceRanking};
use crate::metrics::{confusion, reports_to_csv, Averaging, MetricsReport};
use crate::model_io::{save_model, SavedModel};
use crate::neural::{build_network, train, NetworkConfig};
use crate::report::{render_importance_svg, render_metrics_svg, render_table};
use crate::rng::derive_seed;
use crate::synth::{calibrate_reference, generate};
use crate::{Classifier, EncodedMatrix, NUM_CLASSES};

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub model: SavedModel,
    pub report: MetricsReport,
    /// Per-epoch training loss; empty for models fitted in closed form.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub seed: u64,
    pub clean: CleanReport,
    pub ranking: ImportanceRanking,
    pub selected: Vec<String>,
    /// Row indices of the test split within the cleaned dataset.
    pub test_indices: Vec<usize>,
    pub test_matrix: EncodedMatrix,
    pub train_counts: [usize; NUM_CLASSES],
    pub balanced_counts: [usize; NUM_CLASSES],
    pub models: Vec<FittedModel>,
}

impl PipelineOutput {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.models.iter().map(|m| m.report.clone()).collect()
    }
}

pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    match (&config.data, &config.synth) {
        (Some(path), _) => Dataset::parse_csv(&fs::read_to_string(path)?),
        (None, Some(s)) => generate(&calibrate_reference(), s.n, s.seed),
        (None, None) => Err(crate::Error::Config("no input configured".into())),
    }
}

/// Extra-trees importance ranking of every predictor in `dataset`.
pub fn rank_variables(dataset: &Dataset, n_trees: usize, seed: u64) -> Result<ImportanceRanking> {
    let forest = fit_extra_trees(&FeatureTable::from_dataset(dataset), n_trees, derive_seed(seed, "importance"))?;
    Ok(importances(&forest))
}

/// Fits one model of `kind` on `train_set` with the hyperparameters in
/// `config`. Returns the model and its per-epoch loss, which is empty for
/// models fitted in closed form.
pub fn fit_model(
    kind: ModelKind,
    config: &RunConfig,
    seed: u64,
    train_set: &EncodedMatrix,
) -> Result<(SavedModel, Vec<f64>)> {
    let sub_seed = derive_seed(seed, kind.key());
    Ok(match kind {
        ModelKind::Lr => {
            let m = logistic_fit(train_set, &config.logistic.to_config(sub_seed))?;
            let loss = m.loss_history.clone();
            (SavedModel::Logistic(m), loss)
        }
        ModelKind::Nb => (SavedModel::NaiveBayes(nb_fit(train_set, config.naive_bayes.alpha)?), Vec::new()),
        ModelKind::Knn => (SavedModel::Knn(knn_fit(train_set, config.knn.k)?), Vec::new()),
        ModelKind::Dt => (SavedModel::Tree(tree_fit(train_set, &config.tree.to_config())?), Vec::new()),
        ModelKind::Rnn | ModelKind::Cnn | ModelKind::CnnRnn => {
            let arch = kind.architecture().expect("neural kind");
            let net_config = NetworkConfig { seed: sub_seed, ..config.network.clone() };
            let net = build_network(arch, &net_config, train_set.n_cols(), NUM_CLASSES)?;
            let net = train(net, train_set, &net_config)?;
            let loss = net.loss_history.clone();
            (SavedModel::Network(net), loss)
        }
    })
}

/// Scores `classifier` on `test_set` under the given averaging.
pub fn evaluate(
    name: &str,
    classifier: &dyn Classifier,
    test_set: &EncodedMatrix,
    averaging: Averaging,
) -> Result<MetricsReport> {
    let predicted = classifier.predict_matrix(test_set)?;
    let truth: Vec<usize> = test_set.labels().iter().map(|l| l.index()).collect();
    let cm = confusion(&truth, &predicted, NUM_CLASSES)?;
    MetricsReport::from_confusion(name, &cm, averaging)
}

fn fit_one(
    kind: ModelKind,
    config: &RunConfig,
    seed: u64,
    train_set: &EncodedMatrix,
    test_set: &EncodedMatrix,
) -> Result<FittedModel> {
    let started = Instant::now();
    let (model, loss_history) = fit_model(kind, config, seed, train_set)?;
    let report = evaluate(kind.display_name(), model.classifier(), test_set, config.averaging)?;
    info!(
        "{}: accuracy {:.4} precision {:.4} recall {:.4} ({:.1?})",
        kind.key(),
        report.accuracy,
        report.precision,
        report.recall,
        started.elapsed()
    );
    Ok(FittedModel { kind, model, report, loss_history })
}

/// Runs the pipeline in memory. Models train concurrently; each one draws
/// from its own seed, so the result matches a sequential run.
pub fn run(config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let seed = config.seed();
    let raw = load_dataset(config)?;
    let (dataset, clean) = raw.clean()?;
    info!("cleaned: kept {}, dropped {}", clean.kept, clean.dropped());

    let (train_idx, test_idx) = split_indices(&dataset.labels(), config.test_fraction, seed, config.stratified)?;
    let ranking = rank_variables(&dataset.subset(&train_idx), config.n_trees, seed)?;
    let selected = select_variables(&ranking, config.threshold, &config.force_drop)?;
    info!("selected {} variables: {}", selected.len(), selected.join(", "));

    let encoded = dataset.encode(&selected)?;
    let train_set = encoded.select_rows(&train_idx);
    let test_set = encoded.select_rows(&test_idx);
    let balanced = oversample(&train_set, config.oversample_k, derive_seed(seed, "oversample"))?;
    info!("training rows {} -> {} after oversampling", train_set.n_rows(), balanced.n_rows());

    let models = config
        .models
        .par_iter()
        .map(|&kind| fit_one(kind, config, seed, &balanced, &test_set))
        .collect::<Result<Vec<_>>>()?;

    Ok(PipelineOutput {
        seed,
        clean,
        ranking,
        selected,
        test_indices: test_idx,
        test_matrix: test_set,
        train_counts: class_counts(train_set.labels()),
        balanced_counts: class_counts(balanced.labels()),
        models,
    })
}

pub fn loss_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        let _ = writeln!(out, "{},{loss:.6}", epoch + 1);
    }
    out
}

fn balance_text(output: &PipelineOutput) -> String {
    let mut out = String::from("level  train  balanced\n");
    for c in 0..NUM_CLASSES {
        let _ = writeln!(out, "{c:>5}  {:>5}  {:>8}", output.train_counts[c], output.balanced_counts[c]);
    }
    out
}

/// Writes reports, importance files, loss histories and model files.
pub fn write_outputs(output: &PipelineOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("models"))?;
    let reports = output.reports();
    fs::write(dir.join("report.csv"), reports_to_csv(&reports))?;
    fs::write(dir.join("report.txt"), render_table(&reports)?)?;
    fs::write(dir.join("report.svg"), render_metrics_svg(&reports)?)?;
    fs::write(dir.join("importance.csv"), output.ranking.to_csv())?;
    fs::write(dir.join("importance.txt"), output.ranking.render_table(&output.selected))?;
    fs::write(dir.join("importance.svg"), render_importance_svg(&output.ranking, &output.selected)?)?;
    fs::write(dir.join("balance.txt"), balance_text(output))?;
    for m in &output.models {
        if !m.loss_history.is_empty() {
            fs::write(dir.join(format!("loss_{}.csv", m.kind.key())), loss_csv(&m.loss_history))?;
        }
        fs::write(dir.join("models").join(format!("{}.txt", m.kind.key())), save_model(&m.model))?;
    }
    Ok(())
}

pub fn run_and_write(config: &RunConfig) -> Result<PipelineOutput> {
    let output = run(config)?;
    write_outputs(&output, &config.out_dir)?;
    Ok(output)
}
