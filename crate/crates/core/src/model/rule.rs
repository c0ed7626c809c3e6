use std::fmt;
use std::sync::Arc;

use crate::data::{AttributeKind, Problem, Schema};
use crate::error::{Error, Result};
use crate::model::{CompoundCondition, ElementaryCondition, KaplanMeier, Provenance, Relation};
use crate::quality::{ConfusionMatrix, QualityMeasure};

#[derive(Debug, Clone, PartialEq)]
pub enum Conclusion {
    Class(usize),
    /// Median of covered labels with the [M - sd, M + sd] band.
    Regression {
        value: f64,
        low: f64,
        high: f64,
    },
    Survival(KaplanMeier),
}

impl Conclusion {
    pub fn problem(&self) -> Problem {
        match self {
            Conclusion::Class(_) => Problem::Classification,
            Conclusion::Regression { .. } => Problem::Regression,
            Conclusion::Survival(_) => Problem::Survival,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub premise: CompoundCondition,
    pub conclusion: Conclusion,
    pub stats: ConfusionMatrix,
    pub quality: f64,
    pub voting_weight: f64,
    pub p_value: Option<f64>,
    pub is_initial: bool,
}

impl Rule {
    pub fn new(premise: CompoundCondition, conclusion: Conclusion) -> Self {
        Rule {
            premise,
            conclusion,
            stats: ConfusionMatrix::default(),
            quality: f64::NEG_INFINITY,
            voting_weight: 0.0,
            p_value: None,
            is_initial: false,
        }
    }

    pub fn class(&self) -> Option<usize> {
        match self.conclusion {
            Conclusion::Class(c) => Some(c),
            _ => None,
        }
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, schema }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    schema: &'a Schema,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = &self.schema.label().name;
        let cm = &self.rule.stats;
        write!(f, "IF {} THEN ", self.rule.premise.display(self.schema))?;
        match &self.rule.conclusion {
            Conclusion::Class(c) => {
                let name = self.schema.classes().get(*c).map(String::as_str).unwrap_or("?");
                write!(
                    f,
                    "{label} = {name} (p={}, n={}, P={}, N={})",
                    cm.p, cm.n, cm.total_p, cm.total_n
                )
            }
            Conclusion::Regression { value, low, high } => {
                write!(
                    f,
                    "{label} = {value} [{low}, {high}] (p={}, n={}, P={}, N={})",
                    cm.p, cm.n, cm.total_p, cm.total_n
                )
            }
            Conclusion::Survival(km) => {
                write!(
                    f,
                    "survival curve with {} steps (p={}, P={})",
                    km.points().len(),
                    cm.p,
                    cm.total_p
                )
            }
        }
    }
}

/// Prediction used for examples no rule covers.
#[derive(Debug, Clone, PartialEq)]
pub enum Defaults {
    Classification {
        majority: usize,
        class_weights: Vec<f64>,
    },
    Regression {
        mean: f64,
        variance: f64,
    },
    /// `censoring` is the training-set censoring distribution used by the
    /// integrated Brier score.
    Survival {
        curve: KaplanMeier,
        censoring: KaplanMeier,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub schema: Arc<Schema>,
    pub measure: QualityMeasure,
    pub rules: Vec<Rule>,
    pub defaults: Defaults,
}

impl RuleSet {
    pub fn problem(&self) -> Problem {
        self.schema.problem
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Human-readable listing, one rule per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.rules.iter().enumerate() {
            out.push_str(&format!("r{}: {}\n", i + 1, r.display(&self.schema)));
        }
        out
    }

    /// Checks rule conclusions and conditions against the schema.
    pub fn validate(&self) -> Result<()> {
        let problem = self.problem();
        let defaults_ok = matches!(
            (problem, &self.defaults),
            (Problem::Classification, Defaults::Classification { .. })
                | (Problem::Regression, Defaults::Regression { .. })
                | (Problem::Survival, Defaults::Survival { .. })
        );
        if !defaults_ok {
            return Err(Error::document("defaults do not match the problem type"));
        }
        for (i, r) in self.rules.iter().enumerate() {
            if r.conclusion.problem() != problem {
                return Err(Error::document(format!(
                    "rule {} conclusion does not match {problem:?}",
                    i + 1
                )));
            }
            if let Some(c) = r.class() {
                if c >= self.schema.classes().len() {
                    return Err(Error::document(format!("rule {} has an unknown class", i + 1)));
                }
            }
            for c in &r.premise.conditions {
                validate_condition(&self.schema, c)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_condition(schema: &Schema, c: &ElementaryCondition) -> Result<()> {
    if c.attribute >= schema.attribute_count() {
        return Err(Error::document("condition refers to an unknown attribute"));
    }
    let attr = schema.attribute(c.attribute);
    match (&c.relation, &attr.kind) {
        (Relation::Equals(v), AttributeKind::Nominal(dict)) if (*v as usize) < dict.len() => Ok(()),
        (Relation::Within(iv), AttributeKind::Numeric) if !iv.is_empty() => Ok(()),
        (Relation::Within(_), AttributeKind::Numeric) => {
            Err(Error::document(format!("empty interval on `{}`", attr.name)))
        }
        _ => Err(Error::document(format!(
            "condition kind does not match attribute `{}`",
            attr.name
        ))),
    }
}

/// Replaces all conditions on the same numeric attribute by their interval
/// intersection, placed where the first of them stood.
///
/// Initial-rule conditions are left verbatim. The merged condition takes the
/// highest provenance among its inputs. An empty intersection means the rule
/// covers nothing, which induction never produces.
pub fn merge_conditions(premise: &CompoundCondition) -> Result<CompoundCondition> {
    let mut out: Vec<ElementaryCondition> = Vec::with_capacity(premise.len());
    for c in &premise.conditions {
        let Relation::Within(iv) = c.relation else {
            out.push(*c);
            continue;
        };
        if c.provenance == Provenance::InitialRule {
            out.push(*c);
            continue;
        }
        let existing = out.iter_mut().find(|o| {
            o.attribute == c.attribute
                && o.provenance != Provenance::InitialRule
                && matches!(o.relation, Relation::Within(_))
        });
        match existing {
            Some(o) => {
                let Relation::Within(prev) = o.relation else {
                    unreachable!()
                };
                let merged = prev.intersect(&iv);
                if merged.is_empty() {
                    return Err(Error::Internal(format!(
                        "contradictory conditions on attribute #{}",
                        c.attribute
                    )));
                }
                o.relation = Relation::Within(merged);
                o.provenance = o.provenance.max(c.provenance);
            }
            None => out.push(*c),
        }
    }
    Ok(CompoundCondition::new(out))
}
