//! Applying rule sets to examples and measuring predictive performance.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example, Schema};
use crate::error::{Error, Result};
use crate::model::{Conclusion, Defaults, KaplanMeier, RuleSet};

#[derive(Debug, Clone, PartialEq)]
pub enum Predicted {
    /// Winning class and the summed voting weight of every class.
    Class {
        class: usize,
        votes: Vec<f64>,
    },
    Value(f64),
    Survival(KaplanMeier),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub predicted: Predicted,
    /// Indices of the covering rules; empty when the defaults were used.
    pub covering_rules: Vec<usize>,
}

impl Prediction {
    pub fn class(&self) -> Option<usize> {
        match self.predicted {
            Predicted::Class { class, .. } => Some(class),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self.predicted {
            Predicted::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn curve(&self) -> Option<&KaplanMeier> {
        match &self.predicted {
            Predicted::Survival(km) => Some(km),
            _ => None,
        }
    }
}

/// Both schemas describe the same problem and regular attributes.
pub fn check_schema(model: &Schema, data: &Schema) -> Result<()> {
    if model.problem != data.problem {
        return Err(Error::Schema(format!(
            "model solves a {:?} problem but the data is {:?}",
            model.problem, data.problem
        )));
    }
    if model.attribute_count() != data.attribute_count() {
        return Err(Error::Schema("data and model have different attributes".into()));
    }
    for (a, b) in model.attributes().zip(data.attributes()) {
        if a.name != b.name || a.kind != b.kind {
            return Err(Error::Schema(format!(
                "attribute `{}` does not match the model",
                b.name
            )));
        }
    }
    if model.classes() != data.classes() {
        return Err(Error::Schema("data and model declare different classes".into()));
    }
    Ok(())
}

/// Prediction for one example.
///
/// Classification sums the voting weights of covering rules per class, ties
/// going to the class declared first. Regression averages the covering
/// conclusions; survival averages their curves pointwise. Uncovered examples
/// get the rule-set defaults.
pub fn predict(rs: &RuleSet, example: &Example) -> Result<Prediction> {
    if example.values.len() != rs.schema.attribute_count() {
        return Err(Error::Schema(format!(
            "example has {} attributes, the model expects {}",
            example.values.len(),
            rs.schema.attribute_count()
        )));
    }
    let covering: Vec<usize> = (0..rs.rules.len())
        .filter(|&r| rs.rules[r].premise.covers(example))
        .collect();
    let predicted = match &rs.defaults {
        Defaults::Classification {
            majority,
            class_weights,
        } => {
            if covering.is_empty() {
                Predicted::Class {
                    class: *majority,
                    votes: vec![0.0; class_weights.len()],
                }
            } else {
                let mut votes = vec![0.0; rs.schema.classes().len()];
                for &r in &covering {
                    if let Conclusion::Class(c) = rs.rules[r].conclusion {
                        votes[c] += rs.rules[r].voting_weight.max(0.0);
                    }
                }
                let mut class = 0;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[class] {
                        class = c;
                    }
                }
                Predicted::Class { class, votes }
            }
        }
        Defaults::Regression { mean, .. } => {
            let values: Vec<f64> = covering
                .iter()
                .filter_map(|&r| match rs.rules[r].conclusion {
                    Conclusion::Regression { value, .. } => Some(value),
                    _ => None,
                })
                .collect();
            if values.is_empty() {
                Predicted::Value(*mean)
            } else {
                Predicted::Value(values.iter().sum::<f64>() / values.len() as f64)
            }
        }
        Defaults::Survival { curve, .. } => {
            let curves: Vec<&KaplanMeier> = covering
                .iter()
                .filter_map(|&r| match &rs.rules[r].conclusion {
                    Conclusion::Survival(km) => Some(km),
                    _ => None,
                })
                .collect();
            if curves.is_empty() {
                Predicted::Survival(curve.clone())
            } else {
                Predicted::Survival(KaplanMeier::average(&curves))
            }
        }
    };
    Ok(Prediction {
        predicted,
        covering_rules: covering,
    })
}

pub fn predict_dataset(rs: &RuleSet, data: &Dataset) -> Result<Vec<Prediction>> {
    check_schema(&rs.schema, data.schema())?;
    data.examples().iter().map(|e| predict(rs, e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
}

/// Sensitivity, specificity and their geometric mean with `positive` as the
/// positive class and every other class negative.
pub fn binary_metrics(actual: &[usize], predicted: &[usize], positive: usize) -> Result<BinaryMetrics> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid("actual and predicted classes differ in length"));
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &p) in actual.iter().zip(predicted) {
        match (a == positive, p == positive) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    if tp + fn_ == 0 || tn + fp == 0 {
        return Err(Error::invalid(
            "sensitivity and specificity need positive and negative examples",
        ));
    }
    let sensitivity = tp as f64 / (tp + fn_) as f64;
    let specificity = tn as f64 / (tn + fp) as f64;
    Ok(BinaryMetrics {
        sensitivity,
        specificity,
        g_mean: (sensitivity * specificity).sqrt(),
    })
}

pub fn classification_metrics(rs: &RuleSet, test: &Dataset, positive: usize) -> Result<BinaryMetrics> {
    if positive >= rs.schema.classes().len() {
        return Err(Error::invalid(format!("no class with index {positive}")));
    }
    let predictions = predict_dataset(rs, test)?;
    let actual: Vec<usize> = test.examples().iter().filter_map(Example::class).collect();
    let predicted: Vec<usize> = predictions.iter().filter_map(Prediction::class).collect();
    binary_metrics(&actual, &predicted, positive)
}

/// Class reported as positive when none is chosen: the lightest training
/// class, the first declared on ties.
pub fn default_positive_class(rs: &RuleSet) -> Option<usize> {
    match &rs.defaults {
        Defaults::Classification { class_weights, .. } => {
            let mut best = 0;
            for (c, &w) in class_weights.iter().enumerate() {
                if w < class_weights[best] {
                    best = c;
                }
            }
            (!class_weights.is_empty()).then_some(best)
        }
        _ => None,
    }
}

/// Root relative squared error against the mean of `labels`.
pub fn rrse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(Error::invalid(
            "predictions and labels must be non-empty and equally long",
        ));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let den: f64 = labels.iter().map(|y| (mean - y).powi(2)).sum();
    if den <= 0.0 {
        return Err(Error::invalid(
            "relative squared error is undefined for constant labels",
        ));
    }
    let num: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum();
    Ok((num / den).sqrt())
}

pub fn regression_rrse(rs: &RuleSet, test: &Dataset) -> Result<f64> {
    let predictions = predict_dataset(rs, test)?;
    let p: Vec<f64> = predictions.iter().filter_map(Prediction::value).collect();
    let y: Vec<f64> = test.examples().iter().filter_map(Example::value).collect();
    rrse(&p, &y)
}

/// Inverse-probability-of-censoring weighted Brier score at time `t`.
///
/// An example that died by `t` contributes `S(t)^2 / G(T-)`; one still at
/// risk contributes `(1 - S(t))^2 / G(t)`; examples censored by `t`
/// contribute nothing. Terms whose weight `G` is zero are skipped.
pub fn brier_score(curves: &[&KaplanMeier], test: &[&Example], censoring: &KaplanMeier, t: f64) -> f64 {
    let mut total = 0.0;
    for (s, e) in curves.iter().zip(test) {
        let time = e.time();
        if time <= t {
            if e.is_event() {
                let g = censoring.survival_before(time);
                if g > 0.0 {
                    total += s.survival_at(t).powi(2) / g;
                }
            }
        } else {
            let g = censoring.survival_at(t);
            if g > 0.0 {
                total += (1.0 - s.survival_at(t)).powi(2) / g;
            }
        }
    }
    total / test.len() as f64
}

/// Brier score integrated over `[0, horizon]` and divided by the horizon,
/// which defaults to the largest observed test time.
///
/// The score is a step function that only changes at observed times and at
/// jumps of the predicted and censoring curves, so it is integrated exactly
/// piece by piece.
pub fn integrated_brier_score_of(
    curves: &[&KaplanMeier],
    test: &[&Example],
    censoring: &KaplanMeier,
    horizon: Option<f64>,
) -> Result<f64> {
    if curves.len() != test.len() {
        return Err(Error::invalid("one predicted curve is needed per test example"));
    }
    if !test.iter().any(|e| e.is_event()) {
        return Err(Error::invalid("integrated Brier score needs at least one event"));
    }
    let tau = horizon.unwrap_or_else(|| test.iter().map(|e| e.time()).fold(f64::NEG_INFINITY, f64::max));
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("integrated Brier score needs a positive time horizon"));
    }
    let mut knots: Vec<f64> = test
        .iter()
        .map(|e| e.time())
        .chain(curves.iter().flat_map(|c| c.points().iter().map(|p| p.0)))
        .chain(censoring.points().iter().map(|p| p.0))
        .filter(|&t| t > 0.0 && t < tau)
        .collect();
    knots.push(0.0);
    knots.push(tau);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let area: f64 = knots
        .windows(2)
        .map(|w| brier_score(curves, test, censoring, w[0]) * (w[1] - w[0]))
        .sum();
    Ok(area / tau)
}

pub fn integrated_brier_score(rs: &RuleSet, test: &Dataset) -> Result<f64> {
    let Defaults::Survival { censoring, .. } = &rs.defaults else {
        return Err(Error::invalid("integrated Brier score needs a survival model"));
    };
    let predictions = predict_dataset(rs, test)?;
    let curves: Vec<&KaplanMeier> = predictions.iter().filter_map(Prediction::curve).collect();
    let examples: Vec<&Example> = test.examples().iter().collect();
    integrated_brier_score_of(&curves, &examples, censoring, None)
}

/// Headline metric of a model on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "camelCase")]
pub enum Performance {
    Classification {
        positive: usize,
        #[serde(flatten)]
        metrics: BinaryMetrics,
    },
    Rrse {
        value: f64,
    },
    IntegratedBrierScore {
        value: f64,
    },
}

impl Performance {
    /// The number compared across variants: G-mean, RRSE or IBS.
    pub fn headline(&self) -> f64 {
        match self {
            Performance::Classification { metrics, .. } => metrics.g_mean,
            Performance::Rrse { value } | Performance::IntegratedBrierScore { value } => *value,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Performance::Classification { .. } => "Gm",
            Performance::Rrse { .. } => "RRSE",
            Performance::IntegratedBrierScore { .. } => "IBS",
        }
    }
}

/// G-mean, RRSE or integrated Brier score depending on the problem.
pub fn evaluate(rs: &RuleSet, test: &Dataset, positive: Option<usize>) -> Result<Performance> {
    match &rs.defaults {
        Defaults::Classification { .. } => {
            let positive = positive
                .or_else(|| default_positive_class(rs))
                .ok_or_else(|| Error::invalid("model has no classes"))?;
            Ok(Performance::Classification {
                positive,
                metrics: classification_metrics(rs, test, positive)?,
            })
        }
        Defaults::Regression { .. } => Ok(Performance::Rrse {
            value: regression_rrse(rs, test)?,
        }),
        Defaults::Survival { .. } => Ok(Performance::IntegratedBrierScore {
            value: integrated_brier_score(rs, test)?,
        }),
    }
}

/// Writes one CSV record per example: index, prediction and covering rules
/// (1-based, `;`-separated). Survival predictions are `time:probability`
/// pairs separated by `;`.
pub fn write_predictions<W: Write>(rs: &RuleSet, predictions: &[Prediction], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "prediction", "covering_rules"])?;
    for (i, p) in predictions.iter().enumerate() {
        let value = match &p.predicted {
            Predicted::Class { class, .. } => rs.schema.classes()[*class].clone(),
            Predicted::Value(v) => v.to_string(),
            Predicted::Survival(km) => km
                .points()
                .iter()
                .map(|(t, s)| format!("{t}:{s}"))
                .collect::<Vec<_>>()
                .join(";"),
        };
        let rules = p
            .covering_rules
            .iter()
            .map(|r| format!("r{}", r + 1))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([i.to_string(), value, rules])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

pub fn save_predictions(rs: &RuleSet, predictions: &[Prediction], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(rs, predictions, std::io::BufWriter::new(file))
}
