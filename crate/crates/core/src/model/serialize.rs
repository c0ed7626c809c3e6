//! JSON documents for rule sets and conditions.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Schema};
use crate::error::{Error, Result};
use crate::model::rule::validate_condition;
use crate::model::{
    Bound, CompoundCondition, Conclusion, Defaults, ElementaryCondition, Interval, KaplanMeier, Provenance, Relation,
    Rule, RuleSet,
};
use crate::quality::{ConfusionMatrix, QualityMeasure};

/// Numbers that may be infinite; JSON has no literal for those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Finite(f64),
    Special(String),
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Real::Finite(x)
        } else if x.is_nan() {
            Real::Special("nan".into())
        } else if x > 0.0 {
            Real::Special("inf".into())
        } else {
            Real::Special("-inf".into())
        }
    }
}

impl TryFrom<Real> for f64 {
    type Error = Error;

    fn try_from(r: Real) -> Result<f64> {
        match r {
            Real::Finite(x) => Ok(x),
            Real::Special(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(Error::document(format!("`{s}` is not a number"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionValue {
    Number(f64),
    Text(String),
}

/// `{attribute, op, value | range}` with op one of `=`, `<`, `<=`, `>`, `>=`, `in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionDoc {
    pub attribute: String,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ConditionValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[Option<f64>; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_closed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_closed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ConditionDoc {
    pub fn from_condition(c: &ElementaryCondition, schema: &Schema) -> Self {
        let attr = schema.attribute(c.attribute);
        let mut doc = ConditionDoc {
            attribute: attr.name.clone(),
            op: String::new(),
            value: None,
            range: None,
            lower_closed: None,
            upper_closed: None,
            provenance: Some(c.provenance),
        };
        match c.relation {
            Relation::Equals(v) => {
                doc.op = "=".into();
                let name = attr.kind.values().map(|d| d[v as usize].clone()).unwrap_or_default();
                doc.value = Some(ConditionValue::Text(name));
            }
            Relation::Within(iv) => match (iv.lower, iv.upper) {
                (None, Some(b)) => {
                    doc.op = if b.closed { "<=" } else { "<" }.into();
                    doc.value = Some(ConditionValue::Number(b.value));
                }
                (Some(b), None) => {
                    doc.op = if b.closed { ">=" } else { ">" }.into();
                    doc.value = Some(ConditionValue::Number(b.value));
                }
                _ => {
                    doc.op = "in".into();
                    doc.range = Some([iv.lower.map(|b| b.value), iv.upper.map(|b| b.value)]);
                    doc.lower_closed = Some(iv.lower.is_some_and(|b| b.closed));
                    doc.upper_closed = Some(iv.upper.is_some_and(|b| b.closed));
                }
            },
        }
        doc
    }

    /// Resolves names against the schema. `default_provenance` applies when the
    /// document does not state one.
    pub fn to_condition(&self, schema: &Schema, default_provenance: Provenance) -> Result<ElementaryCondition> {
        let id = schema
            .find(&self.attribute)
            .ok_or_else(|| Error::document(format!("unknown attribute `{}`", self.attribute)))?;
        let attr = schema.attribute(id);
        let number = || match &self.value {
            Some(ConditionValue::Number(x)) => Ok(*x),
            Some(ConditionValue::Text(t)) => t
                .parse::<f64>()
                .map_err(|_| Error::document(format!("`{t}` is not a number for `{}`", attr.name))),
            None => Err(Error::document(format!("condition on `{}` lacks a value", attr.name))),
        };
        let relation = match (self.op.as_str(), &attr.kind) {
            ("=", AttributeKind::Nominal(_)) => {
                let text = match &self.value {
                    Some(ConditionValue::Text(t)) => t.clone(),
                    Some(ConditionValue::Number(x)) => format!("{x}"),
                    None => return Err(Error::document(format!("condition on `{}` lacks a value", attr.name))),
                };
                Relation::Equals(
                    attr.value_index(&text)
                        .ok_or_else(|| Error::document(format!("`{text}` is not a value of `{}`", attr.name)))?,
                )
            }
            ("<", AttributeKind::Numeric) => Relation::Within(Interval::less_than(number()?)),
            ("<=", AttributeKind::Numeric) => Relation::Within(Interval::at_most(number()?)),
            (">", AttributeKind::Numeric) => Relation::Within(Interval::greater_than(number()?)),
            (">=", AttributeKind::Numeric) => Relation::Within(Interval::at_least(number()?)),
            ("in", AttributeKind::Numeric) => {
                let [lo, hi] = self
                    .range
                    .ok_or_else(|| Error::document(format!("`in` condition on `{}` lacks a range", attr.name)))?;
                Relation::Within(Interval {
                    lower: lo.map(|value| Bound {
                        value,
                        closed: self.lower_closed.unwrap_or(true),
                    }),
                    upper: hi.map(|value| Bound {
                        value,
                        closed: self.upper_closed.unwrap_or(false),
                    }),
                })
            }
            (op, _) => {
                return Err(Error::document(format!(
                    "operator `{op}` is not valid for attribute `{}`",
                    attr.name
                )))
            }
        };
        let c = ElementaryCondition {
            attribute: id,
            relation,
            provenance: self.provenance.unwrap_or(default_provenance),
        };
        validate_condition(schema, &c)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConclusionDoc {
    Class { class: String },
    Regression { value: f64, interval: [f64; 2] },
    Survival { curve: KaplanMeier },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleDoc {
    pub premise: Vec<ConditionDoc>,
    pub conclusion: ConclusionDoc,
    pub stats: ConfusionMatrix,
    pub quality: Real,
    pub voting_weight: f64,
    #[serde(default)]
    pub p_value: Option<f64>,
    #[serde(default)]
    pub is_initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DefaultsDoc {
    Classification { majority: String, class_weights: Vec<f64> },
    Regression { mean: f64, variance: f64 },
    Survival { curve: KaplanMeier, censoring: KaplanMeier },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSetDoc {
    pub problem: crate::data::Problem,
    pub measure: QualityMeasure,
    pub schema: Schema,
    pub defaults: DefaultsDoc,
    pub rules: Vec<RuleDoc>,
}

impl RuleSetDoc {
    pub fn from_ruleset(rs: &RuleSet) -> Self {
        let schema = &*rs.schema;
        let class_name = |c: usize| schema.classes()[c].clone();
        let rules = rs
            .rules
            .iter()
            .map(|r| RuleDoc {
                premise: r
                    .premise
                    .conditions
                    .iter()
                    .map(|c| ConditionDoc::from_condition(c, schema))
                    .collect(),
                conclusion: match &r.conclusion {
                    Conclusion::Class(c) => ConclusionDoc::Class { class: class_name(*c) },
                    Conclusion::Regression { value, low, high } => ConclusionDoc::Regression {
                        value: *value,
                        interval: [*low, *high],
                    },
                    Conclusion::Survival(km) => ConclusionDoc::Survival { curve: km.clone() },
                },
                stats: r.stats,
                quality: r.quality.into(),
                voting_weight: r.voting_weight,
                p_value: r.p_value,
                is_initial: r.is_initial,
            })
            .collect();
        let defaults = match &rs.defaults {
            Defaults::Classification {
                majority,
                class_weights,
            } => DefaultsDoc::Classification {
                majority: class_name(*majority),
                class_weights: class_weights.clone(),
            },
            Defaults::Regression { mean, variance } => DefaultsDoc::Regression {
                mean: *mean,
                variance: *variance,
            },
            Defaults::Survival { curve, censoring } => DefaultsDoc::Survival {
                curve: curve.clone(),
                censoring: censoring.clone(),
            },
        };
        RuleSetDoc {
            problem: rs.problem(),
            measure: rs.measure,
            schema: schema.clone(),
            defaults,
            rules,
        }
    }

    pub fn into_ruleset(self) -> Result<RuleSet> {
        if self.problem != self.schema.problem {
            return Err(Error::document("problem does not match the embedded schema"));
        }
        let schema = Arc::new(self.schema);
        let class_index = |name: &str| {
            schema
                .class_index(name)
                .ok_or_else(|| Error::document(format!("unknown class `{name}`")))
        };
        let mut rules = Vec::with_capacity(self.rules.len());
        for doc in self.rules {
            let conditions = doc
                .premise
                .iter()
                .map(|c| c.to_condition(&schema, Provenance::Automatic))
                .collect::<Result<Vec<_>>>()?;
            let conclusion = match doc.conclusion {
                ConclusionDoc::Class { class } => Conclusion::Class(class_index(&class)?),
                ConclusionDoc::Regression { value, interval } => Conclusion::Regression {
                    value,
                    low: interval[0],
                    high: interval[1],
                },
                ConclusionDoc::Survival { curve } => Conclusion::Survival(curve),
            };
            rules.push(Rule {
                premise: CompoundCondition::new(conditions),
                conclusion,
                stats: doc.stats,
                quality: doc.quality.try_into()?,
                voting_weight: doc.voting_weight,
                p_value: doc.p_value,
                is_initial: doc.is_initial,
            });
        }
        let defaults = match self.defaults {
            DefaultsDoc::Classification {
                majority,
                class_weights,
            } => Defaults::Classification {
                majority: class_index(&majority)?,
                class_weights,
            },
            DefaultsDoc::Regression { mean, variance } => Defaults::Regression { mean, variance },
            DefaultsDoc::Survival { curve, censoring } => Defaults::Survival { curve, censoring },
        };
        let rs = RuleSet {
            schema,
            measure: self.measure,
            rules,
            defaults,
        };
        rs.validate()?;
        Ok(rs)
    }
}

pub fn serialize_ruleset(rs: &RuleSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RuleSetDoc::from_ruleset(rs))?)
}

pub fn parse_ruleset(text: &str) -> Result<RuleSet> {
    let doc: RuleSetDoc = serde_json::from_str(text)?;
    doc.into_ruleset()
}

pub fn save_ruleset(rs: &RuleSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &RuleSetDoc::from_ruleset(rs))?;
    Ok(())
}

pub fn load_ruleset(path: &Path) -> Result<RuleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let doc: RuleSetDoc = serde_json::from_reader(BufReader::new(file))?;
    doc.into_ruleset()
}
