//! Experiment orchestration: resampling, variant comparison and result tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, load_table, Dataset, Problem};
use crate::error::{Error, Result};
use crate::guided::{guided_separate_and_conquer, Knowledge};
use crate::induction::{separate_and_conquer, InductionParams};
use crate::inference::{evaluate, Performance};
use crate::model::{save_ruleset, Conclusion, RuleSet};
use crate::quality::QualityMeasure;
use crate::stats::{paired_t_test, ruleset_report, ruleset_similarity, RuleSetReport};

pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Validation {
    #[serde(rename_all = "camelCase")]
    StratifiedKFold {
        k: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Separate test table; the experiment's `data` is the training table.
    #[serde(rename_all = "camelCase")]
    TrainTest { test: PathBuf },
}

/// Experiment description. Relative paths are resolved against the directory
/// of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub name: String,
    pub data: PathBuf,
    pub metadata: PathBuf,
    pub measure: QualityMeasure,
    pub mincov: usize,
    #[serde(default = "default_true")]
    pub pruning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<PathBuf>,
    pub validation: Validation,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Class name treated as positive for SE/SP/Gm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<String>,
    /// Another experiment config compared against this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    /// Makes every relative path relative to `base` instead.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data);
        fix(&mut self.metadata);
        if let Some(p) = self.knowledge.as_mut() {
            fix(p);
        }
        if let Some(p) = self.baseline.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output.as_mut() {
            fix(p);
        }
        if let Validation::TrainTest { test } = &mut self.validation {
            fix(test);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Validation::StratifiedKFold { k, .. } = self.validation {
            if k < 2 {
                return Err(Error::document("cross validation needs k >= 2"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::document("alpha must lie in (0, 1)"));
        }
        if self.mincov == 0 {
            return Err(Error::document("mincov must be at least 1"));
        }
        Ok(())
    }

    pub fn params(&self) -> InductionParams {
        InductionParams {
            measure: self.measure,
            mincov: self.mincov,
            pruning: self.pruning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic k-fold partition. Classification examples are shuffled
/// within each class and dealt round-robin, the dealing position carrying over
/// from one class to the next, so every fold holds each class within one
/// example of its share. Other problems deal one shuffled sequence.
pub fn stratified_k_fold(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid("k-fold partition needs k >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if data.problem() == Problem::Classification {
        let mut groups = vec![Vec::new(); data.schema().classes().len()];
        for (i, e) in data.examples().iter().enumerate() {
            if let Some(c) = e.class() {
                groups[c].push(i);
            }
        }
        groups.retain(|g| !g.is_empty());
        if let Some(smallest) = groups.iter().map(Vec::len).min() {
            if k > smallest {
                return Err(Error::invalid(format!(
                    "k = {k} exceeds the size of the smallest class ({smallest})"
                )));
            }
        }
        groups
    } else {
        if k > data.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the number of examples ({})",
                data.len()
            )));
        }
        vec![data.all_indices()]
    };
    let mut tests = vec![Vec::new(); k];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    let n = data.len();
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Induces a rule set, guided when knowledge is given.
pub fn train(data: &Dataset, params: &InductionParams, knowledge: Option<&Knowledge>) -> Result<RuleSet> {
    match knowledge {
        Some(k) => guided_separate_and_conquer(data, params, k),
        None => separate_and_conquer(data, params),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std_dev: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std_dev =
            (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
        Summary { mean, std_dev }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineComparison {
    pub name: String,
    pub metric: Summary,
    /// Paired t-test over folds; absent for a single train/test split.
    pub t_test_p_value: Option<f64>,
    /// Agreement of the full-data rule sets on the full data.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariantResult {
    pub name: String,
    pub problem: Problem,
    pub measure: QualityMeasure,
    pub mincov: usize,
    pub validation: Validation,
    /// `Gm`, `RRSE` or `IBS`.
    pub metric_name: String,
    /// Performance per fold, in fold order.
    pub folds: Vec<Performance>,
    pub metric: Summary,
    /// Report on the model induced from the full data.
    pub report: RuleSetReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineComparison>,
}

impl VariantResult {
    pub fn fold_metrics(&self) -> Vec<f64> {
        self.folds.iter().map(Performance::headline).collect()
    }

    /// One aligned header line and one row per result.
    pub fn table(results: &[&VariantResult]) -> String {
        let mut out = String::new();
        let metric = results.first().map_or("metric", |r| r.metric_name.as_str());
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>8} {:>8} {:>9} {:>6} {:>16} {:>8} {:>10}",
            "variant",
            "#rules",
            "#conds",
            "support",
            "precision",
            "sig%",
            metric,
            format!("{metric}-p"),
            "similarity"
        );
        for r in results {
            let value = match r.metric.std_dev {
                Some(sd) => format!("{:.3} ± {:.3}", r.metric.mean, sd),
                None => format!("{:.3}", r.metric.mean),
            };
            let p = r
                .baseline
                .as_ref()
                .and_then(|b| b.t_test_p_value)
                .map_or("-".to_string(), |p| format!("{p:.3}"));
            let sim = r
                .baseline
                .as_ref()
                .map_or("-".to_string(), |b| format!("{:.2}", b.similarity));
            let _ = writeln!(
                out,
                "{:<16} {:>7} {:>8.1} {:>8.2} {:>9.2} {:>6.0} {:>16} {:>8} {:>10}",
                r.name,
                r.report.rule_count,
                r.report.avg_conditions,
                r.report.avg_support,
                r.report.avg_precision,
                r.report.fraction_significant * 100.0,
                value,
                p,
                sim
            );
        }
        out
    }
}

/// Result of one experiment together with the full-data model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub result: VariantResult,
    pub model: RuleSet,
    pub data: Dataset,
}

fn load_knowledge(config: &ExperimentConfig, data: &Dataset) -> Result<Option<Knowledge>> {
    config
        .knowledge
        .as_deref()
        .map(|p| Knowledge::from_file(p, data.schema()))
        .transpose()
}

/// Runs one variant: per-fold (or train/test) evaluation, a model induced
/// from all training data with its report, and the baseline comparison.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    run_inner(config, true)
}

fn run_inner(config: &ExperimentConfig, with_baseline: bool) -> Result<Experiment> {
    config.validate()?;
    let data = load_dataset(&config.data, &config.metadata)?;
    let knowledge = load_knowledge(config, &data)?;
    let params = config.params();
    let positive = match &config.positive_class {
        Some(name) => Some(
            data.schema()
                .class_index(name)
                .ok_or_else(|| Error::document(format!("unknown positive class `{name}`")))?,
        ),
        None => None,
    };

    let folds: Vec<Performance> = match &config.validation {
        Validation::StratifiedKFold { k, seed } => {
            let folds = stratified_k_fold(&data, *k, *seed)?;
            folds
                .par_iter()
                .enumerate()
                .map(|(f, fold)| {
                    let run = || {
                        let model = train(&data.subset(&fold.train), &params, knowledge.as_ref())?;
                        evaluate(&model, &data.subset(&fold.test), positive)
                    };
                    run().map_err(|e| Error::Fold {
                        fold: f,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Validation::TrainTest { test } => {
            let test = load_table(test, data.schema_arc())?;
            let model = train(&data, &params, knowledge.as_ref())?;
            vec![evaluate(&model, &test, positive)?]
        }
    };
    log::info!("{}: {} evaluation(s) done", config.name, folds.len());

    let model = train(&data, &params, knowledge.as_ref())?;
    let report = ruleset_report(&model, &data, config.alpha)?;
    let metric_name = folds.first().map_or("metric", Performance::name).to_string();
    let values: Vec<f64> = folds.iter().map(Performance::headline).collect();
    let mut result = VariantResult {
        name: config.name.clone(),
        problem: data.problem(),
        measure: config.measure,
        mincov: config.mincov,
        validation: config.validation.clone(),
        metric_name,
        metric: Summary::of(&values),
        folds,
        report,
        baseline: None,
    };

    if let (true, Some(path)) = (with_baseline, config.baseline.as_deref()) {
        let base_config = ExperimentConfig::from_file(path)?;
        let base = run_inner(&base_config, false)?;
        let base_values = base.result.fold_metrics();
        let t_test_p_value = if values.len() >= 2 && values.len() == base_values.len() {
            Some(paired_t_test(&values, &base_values)?)
        } else {
            None
        };
        result.baseline = Some(BaselineComparison {
            name: base.result.name.clone(),
            metric: base.result.metric.clone(),
            t_test_p_value,
            similarity: ruleset_similarity(&model, &base.model, &data)?,
        });
    }
    Ok(Experiment { result, model, data })
}

/// Survival curves of every rule as `time,probability,rule` rows.
pub fn survival_curves_csv(model: &RuleSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "probability", "rule"])?;
    for (i, rule) in model.rules.iter().enumerate() {
        if let Conclusion::Survival(km) = &rule.conclusion {
            let id = format!("r{}", i + 1);
            w.write_record(["0", "1", id.as_str()])?;
            for (t, s) in km.points() {
                w.write_record([t.to_string(), s.to_string(), id.clone()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// Writes `results.json`, `table.txt`, `model.json`, `model.txt` and, for
/// survival, `survival_curves.csv` into `dir`.
pub fn write_outputs(experiment: &Experiment, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, content: &str| {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(path, e))
    };
    write("results.json", &serde_json::to_string_pretty(&experiment.result)?)?;
    write("table.txt", &VariantResult::table(&[&experiment.result]))?;
    save_ruleset(&experiment.model, &dir.join("model.json"))?;
    write("model.txt", &experiment.model.to_text())?;
    if experiment.model.problem() == Problem::Survival {
        write("survival_curves.csv", &survival_curves_csv(&experiment.model)?)?;
    }
    Ok(())
}
