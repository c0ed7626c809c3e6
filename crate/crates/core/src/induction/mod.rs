//! Fully automatic separate-and-conquer induction.

mod evaluator;
mod grow;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use evaluator::{band_contains, check_measure, Accumulator, Evaluation, Evaluator, Target};
pub use grow::{best_condition, grow, is_better, premise_quality, prune, SearchSpace};

use crate::data::{Dataset, Problem};
use crate::error::{Error, Result};
use crate::model::{
    censoring_kaplan_meier, kaplan_meier, merge_conditions, CompoundCondition, Conclusion, Defaults, KaplanMeier, Rule,
    RuleSet,
};
use crate::quality::{confusion_matrix, QualityMeasure};
use crate::stats::rule_p_value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InductionParams {
    pub measure: QualityMeasure,
    /// Minimum number of previously uncovered examples a new rule must cover.
    pub mincov: usize,
    #[serde(default = "default_pruning")]
    pub pruning: bool,
}

fn default_pruning() -> bool {
    true
}

impl InductionParams {
    pub fn new(measure: QualityMeasure, mincov: usize) -> Self {
        InductionParams {
            measure,
            mincov,
            pruning: true,
        }
    }

    pub fn validate(&self, problem: Problem) -> Result<()> {
        if self.mincov == 0 {
            return Err(Error::invalid("mincov must be at least 1"));
        }
        check_measure(problem, self.measure)
    }
}

/// Median, population standard deviation and the positive band `[M - sd, M + sd]`
/// of the labels covered by a regression rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rebinarization {
    pub median: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
}

impl Rebinarization {
    pub fn is_positive(&self, label: f64) -> bool {
        band_contains(self.low, self.high, label)
    }
}

/// Median (mean of the middle pair for even counts) and population standard
/// deviation of the covered labels.
pub fn regression_rebinarize(data: &Dataset, covered: &[usize]) -> Result<Rebinarization> {
    let mut labels: Vec<f64> = covered.iter().filter_map(|&i| data.example(i).value()).collect();
    if labels.is_empty() {
        return Err(Error::invalid("regression rule covers no labelled examples"));
    }
    labels.sort_by(f64::total_cmp);
    let k = labels.len();
    let median = if k % 2 == 1 {
        labels[k / 2]
    } else {
        (labels[k / 2 - 1] + labels[k / 2]) / 2.0
    };
    let mean = labels.iter().sum::<f64>() / k as f64;
    let sd = (labels.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k as f64).sqrt();
    Ok(Rebinarization {
        median,
        sd,
        low: median - sd,
        high: median + sd,
    })
}

/// Kaplan-Meier estimate of the covered examples.
pub fn survival_conclusion(data: &Dataset, covered: &[usize]) -> Result<KaplanMeier> {
    kaplan_meier(covered.iter().map(|&i| data.example(i)))
}

/// Recomputes conclusion, statistics, quality, voting weight and p-value of a
/// premise on the full training set, after merging numeric conditions.
///
/// A premise covering nothing (possible only for user rules) concludes with
/// the band of all labels or the training-set survival curve.
pub fn finalize_rule(eval: &Evaluator<'_>, premise: &CompoundCondition, is_initial: bool) -> Result<Rule> {
    let data = eval.data();
    let premise = merge_conditions(premise)?;
    let covered: Vec<usize> = (0..data.len()).filter(|&i| premise.covers(data.example(i))).collect();
    let measure = eval.measure();
    let (conclusion, cm, quality) = match eval.target() {
        Target::Class(c) => {
            let ev = eval.evaluate(&covered, None);
            (Conclusion::Class(c), ev.cm, ev.quality)
        }
        Target::Regression => {
            let band = if covered.is_empty() {
                regression_rebinarize(data, &data.all_indices())?
            } else {
                regression_rebinarize(data, &covered)?
            };
            let cm = confusion_matrix(data, &covered, |e| e.value().is_some_and(|v| band.is_positive(v)));
            let quality = if covered.is_empty() {
                f64::NEG_INFINITY
            } else {
                measure.score(&cm)
            };
            let conclusion = Conclusion::Regression {
                value: band.median,
                low: band.low,
                high: band.high,
            };
            (conclusion, cm, quality)
        }
        Target::Survival => {
            let ev = eval.evaluate(&covered, None);
            let curve = if covered.is_empty() {
                survival_conclusion(data, &data.all_indices())?
            } else {
                survival_conclusion(data, &covered)?
            };
            (Conclusion::Survival(curve), ev.cm, ev.quality)
        }
    };
    let mut rule = Rule::new(premise, conclusion);
    rule.stats = cm;
    rule.quality = quality;
    rule.voting_weight = measure.voting_weight(quality, &cm);
    rule.p_value = rule_p_value(data, &covered, &cm).ok();
    rule.is_initial = is_initial;
    Ok(rule)
}

/// Predictions for examples no rule covers: the heaviest class (earliest on
/// ties), the weighted label mean, or the training-set survival curve.
pub fn compute_defaults(data: &Dataset) -> Result<Defaults> {
    if data.is_empty() {
        return Err(Error::invalid("cannot induce rules from an empty dataset"));
    }
    Ok(match data.problem() {
        Problem::Classification => {
            let mut class_weights = vec![0.0; data.schema().classes().len()];
            for e in data.examples() {
                if let Some(c) = e.class() {
                    class_weights[c] += e.weight;
                }
            }
            let mut majority = 0;
            for (c, &w) in class_weights.iter().enumerate() {
                if w > class_weights[majority] {
                    majority = c;
                }
            }
            Defaults::Classification {
                majority,
                class_weights,
            }
        }
        Problem::Regression => {
            let w = data.total_weight();
            let mean = data
                .examples()
                .iter()
                .map(|e| e.weight * e.value().unwrap_or(0.0))
                .sum::<f64>()
                / w;
            let variance = data
                .examples()
                .iter()
                .map(|e| e.weight * (e.value().unwrap_or(0.0) - mean).powi(2))
                .sum::<f64>()
                / w;
            Defaults::Regression { mean, variance }
        }
        Problem::Survival => Defaults::Survival {
            curve: survival_conclusion(data, &data.all_indices())?,
            censoring: censoring_kaplan_meier(data.examples())?,
        },
    })
}

/// Uncovered-example bookkeeping for one induction pass.
#[derive(Debug, Clone)]
pub struct Uncovered {
    mask: Vec<bool>,
    count: usize,
}

impl Uncovered {
    /// Examples of the pass (positives of the class, or every example).
    pub fn for_pass(eval: &Evaluator<'_>) -> Self {
        let n = eval.data().len();
        let mask: Vec<bool> = (0..n).map(|i| eval.is_pass_member(i)).collect();
        let count = mask.iter().filter(|&&m| m).count();
        Uncovered { mask, count }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Coverage requirement for the next rule: `mincov`, lowered to the number
    /// of examples left so the loop always terminates.
    pub fn effective_mincov(&self, mincov: usize) -> usize {
        mincov.min(self.count).max(1)
    }

    /// Number of uncovered examples a premise covers.
    pub fn covered_by(&self, data: &Dataset, premise: &CompoundCondition) -> usize {
        (0..data.len())
            .filter(|&i| self.mask[i] && premise.covers(data.example(i)))
            .count()
    }

    /// Marks examples covered by a premise; returns how many were newly covered.
    pub fn remove(&mut self, data: &Dataset, premise: &CompoundCondition) -> usize {
        let mut removed = 0;
        for i in 0..data.len() {
            if self.mask[i] && premise.covers(data.example(i)) {
                self.mask[i] = false;
                removed += 1;
            }
        }
        self.count -= removed;
        removed
    }
}

/// Grows and prunes one rule from `premise` without restrictions beyond the
/// forbidden sets.
pub(crate) fn grow_and_prune(
    eval: &Evaluator<'_>,
    params: &InductionParams,
    premise: CompoundCondition,
    uncovered: &Uncovered,
    forbidden_attributes: &BTreeSet<usize>,
    forbidden_conditions: &[crate::model::ElementaryCondition],
) -> CompoundCondition {
    let mincov = uncovered.effective_mincov(params.mincov);
    let grown = grow(
        eval,
        premise,
        uncovered.mask(),
        mincov,
        forbidden_attributes,
        forbidden_conditions,
    );
    if params.pruning && !grown.is_empty() {
        prune(eval, grown)
    } else {
        grown
    }
}

/// Automatic rules for one pass until every pass example is covered.
pub(crate) fn automatic_pass(
    eval: &Evaluator<'_>,
    params: &InductionParams,
    uncovered: &mut Uncovered,
    rules: &mut Vec<Rule>,
) -> Result<()> {
    let data = eval.data();
    let none = BTreeSet::new();
    while !uncovered.is_empty() {
        let premise = grow_and_prune(eval, params, CompoundCondition::default(), uncovered, &none, &[]);
        let removed = uncovered.remove(data, &premise);
        if removed == 0 {
            return Err(Error::Internal("induced rule covers no uncovered example".into()));
        }
        rules.push(finalize_rule(eval, &premise, false)?);
    }
    Ok(())
}

/// Separate-and-conquer induction. Classification runs one pass per class in
/// declaration order with that class as positive; regression and survival run
/// a single pass over all examples.
pub fn separate_and_conquer(data: &Dataset, params: &InductionParams) -> Result<RuleSet> {
    params.validate(data.problem())?;
    let defaults = compute_defaults(data)?;
    let mut rules = Vec::new();
    for target in pass_targets(data) {
        let eval = Evaluator::new(data, params.measure, target)?;
        let mut uncovered = Uncovered::for_pass(&eval);
        automatic_pass(&eval, params, &mut uncovered, &mut rules)?;
    }
    Ok(RuleSet {
        schema: data.schema_arc(),
        measure: params.measure,
        rules,
        defaults,
    })
}

/// Induction passes in processing order.
pub(crate) fn pass_targets(data: &Dataset) -> Vec<Target> {
    match data.problem() {
        Problem::Classification => (0..data.schema().classes().len()).map(Target::Class).collect(),
        Problem::Regression => vec![Target::Regression],
        Problem::Survival => vec![Target::Survival],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rebinarize_worked_examples() {
        use crate::data::{Attribute, AttributeKind, Example, Label, Role, Schema};
        use std::sync::Arc;
        let schema = Arc::new(
            Schema::new(
                Problem::Regression,
                vec![
                    Attribute {
                        name: "x".into(),
                        kind: AttributeKind::Numeric,
                        role: Role::Regular,
                    },
                    Attribute {
                        name: "y".into(),
                        kind: AttributeKind::Numeric,
                        role: Role::Label,
                    },
                ],
                None,
            )
            .unwrap(),
        );
        let mk = |ys: &[f64]| {
            let ex = ys
                .iter()
                .map(|&y| Example {
                    values: vec![crate::data::Cell::Numeric(0.0)],
                    label: Label::Value(y),
                    survival_time: None,
                    weight: 1.0,
                })
                .collect();
            Dataset::new(Arc::clone(&schema), ex).unwrap()
        };
        let d = mk(&[1.0, 3.0]);
        let b = regression_rebinarize(&d, &[0, 1]).unwrap();
        assert_eq!((b.median, b.sd, b.low, b.high), (2.0, 1.0, 1.0, 3.0));
        let d = mk(&[1.0, 2.0, 3.0, 100.0]);
        let b = regression_rebinarize(&d, &[0, 1, 2, 3]).unwrap();
        assert!((b.median - 2.5).abs() < 1e-12);
        assert!((b.sd - 1801.25f64.sqrt()).abs() < 1e-9);
        let d = mk(&[4.0, 4.0, 4.0]);
        let b = regression_rebinarize(&d, &[0, 1, 2]).unwrap();
        assert_eq!((b.median, b.sd), (4.0, 0.0));
        assert!(b.is_positive(4.0) && !b.is_positive(4.1));
    }
}
