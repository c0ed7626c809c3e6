//! Dataset representation, CSV + JSON-metadata ingestion, coverage and
//! candidate-condition enumeration.
//!
//! A dataset is a table of examples described by *regular* attributes plus a
//! label. Survival datasets additionally carry a survival time, and any dataset
//! may carry a per-example weight column. Regular attributes are addressed by
//! [`AttrId`], their position in declaration order among regular attributes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompoundCondition, ElementaryCondition, Interval};

/// Index of a regular attribute in declaration order.
pub type AttrId = usize;

pub const DEFAULT_MISSING_TOKEN: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Classification,
    Regression,
    Survival,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeKind {
    Nominal(Vec<String>),
    Numeric,
}

impl AttributeKind {
    pub fn values(&self) -> Option<&[String]> {
        match self {
            AttributeKind::Nominal(v) => Some(v),
            AttributeKind::Numeric => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, AttributeKind::Numeric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    #[default]
    Regular,
    Label,
    SurvivalTime,
    Weight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub role: Role,
}

impl Attribute {
    pub fn value_index(&self, value: &str) -> Option<u32> {
        self.kind.values()?.iter().position(|v| v == value).map(|i| i as u32)
    }
}

/// On-disk metadata sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub problem: Problem,
    pub attributes: Vec<AttributeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: KindTag,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindTag {
    Nominal,
    Numeric,
}

/// Validated attribute schema of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Metadata", into = "Metadata")]
pub struct Schema {
    pub problem: Problem,
    columns: Vec<Attribute>,
    regular: Vec<usize>,
    label: usize,
    survival_time: Option<usize>,
    weight: Option<usize>,
    missing: String,
}

impl TryFrom<Metadata> for Schema {
    type Error = Error;

    fn try_from(meta: Metadata) -> Result<Self> {
        let mut columns = Vec::with_capacity(meta.attributes.len());
        let mut seen = HashSet::new();
        for spec in meta.attributes {
            if !seen.insert(spec.name.clone()) {
                return Err(Error::schema(format!("duplicate attribute `{}`", spec.name)));
            }
            let kind = match (spec.kind, spec.values) {
                (KindTag::Numeric, None) => AttributeKind::Numeric,
                (KindTag::Numeric, Some(_)) => {
                    return Err(Error::schema(format!(
                        "numeric attribute `{}` declares a value dictionary",
                        spec.name
                    )))
                }
                (KindTag::Nominal, Some(values)) => {
                    let distinct: HashSet<_> = values.iter().collect();
                    if distinct.len() != values.len() {
                        return Err(Error::schema(format!(
                            "nominal attribute `{}` has duplicate dictionary entries",
                            spec.name
                        )));
                    }
                    AttributeKind::Nominal(values)
                }
                (KindTag::Nominal, None) => {
                    return Err(Error::schema(format!(
                        "nominal attribute `{}` lacks a value dictionary",
                        spec.name
                    )))
                }
            };
            columns.push(Attribute {
                name: spec.name,
                kind,
                role: spec.role,
            });
        }
        Schema::new(meta.problem, columns, meta.missing)
    }
}

impl From<Schema> for Metadata {
    fn from(schema: Schema) -> Self {
        let missing = (schema.missing != DEFAULT_MISSING_TOKEN).then(|| schema.missing.clone());
        Metadata {
            problem: schema.problem,
            attributes: schema
                .columns
                .into_iter()
                .map(|a| AttributeSpec {
                    name: a.name,
                    kind: match a.kind {
                        AttributeKind::Numeric => KindTag::Numeric,
                        AttributeKind::Nominal(_) => KindTag::Nominal,
                    },
                    role: a.role,
                    values: match a.kind {
                        AttributeKind::Nominal(v) => Some(v),
                        AttributeKind::Numeric => None,
                    },
                })
                .collect(),
            missing,
        }
    }
}

impl Schema {
    pub fn new(problem: Problem, columns: Vec<Attribute>, missing: Option<String>) -> Result<Self> {
        let mut regular = Vec::new();
        let mut label = None;
        let mut survival_time = None;
        let mut weight = None;
        let mut names = HashSet::new();
        for (i, a) in columns.iter().enumerate() {
            if !names.insert(a.name.as_str()) {
                return Err(Error::schema(format!("duplicate attribute `{}`", a.name)));
            }
            let slot = match a.role {
                Role::Regular => {
                    regular.push(i);
                    continue;
                }
                Role::Label => &mut label,
                Role::SurvivalTime => &mut survival_time,
                Role::Weight => &mut weight,
            };
            if slot.replace(i).is_some() {
                return Err(Error::schema(format!("more than one attribute with role {:?}", a.role)));
            }
        }
        let label = label.ok_or_else(|| Error::schema("no attribute has role `label`"))?;
        let label_attr = &columns[label];
        match (problem, &label_attr.kind) {
            (Problem::Classification, AttributeKind::Nominal(v)) if !v.is_empty() => {}
            (Problem::Classification, _) => {
                return Err(Error::schema(
                    "classification label must be nominal with a non-empty dictionary",
                ))
            }
            (Problem::Regression | Problem::Survival, AttributeKind::Numeric) => {}
            (_, AttributeKind::Nominal(_)) => return Err(Error::schema(format!("{problem:?} label must be numeric"))),
        }
        match (problem, survival_time) {
            (Problem::Survival, None) => {
                return Err(Error::schema("survival problem requires a `survival-time` attribute"))
            }
            (Problem::Survival, Some(t)) if !columns[t].kind.is_numeric() => {
                return Err(Error::schema("survival-time attribute must be numeric"))
            }
            (Problem::Classification | Problem::Regression, Some(_)) => {
                return Err(Error::schema(
                    "survival-time attribute only allowed for survival problems",
                ))
            }
            _ => {}
        }
        if let Some(w) = weight {
            if !columns[w].kind.is_numeric() {
                return Err(Error::schema("weight attribute must be numeric"));
            }
        }
        Ok(Schema {
            problem,
            columns,
            regular,
            label,
            survival_time,
            weight,
            missing: missing.unwrap_or_else(|| DEFAULT_MISSING_TOKEN.to_string()),
        })
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Number of regular attributes.
    pub fn attribute_count(&self) -> usize {
        self.regular.len()
    }

    pub fn attribute(&self, id: AttrId) -> &Attribute {
        &self.columns[self.regular[id]]
    }

    pub fn attributes(&self) -> impl Iterator<Item = &Attribute> + '_ {
        self.regular.iter().map(|&i| &self.columns[i])
    }

    pub fn find(&self, name: &str) -> Option<AttrId> {
        self.regular.iter().position(|&i| self.columns[i].name == name)
    }

    pub fn label(&self) -> &Attribute {
        &self.columns[self.label]
    }

    pub fn columns(&self) -> &[Attribute] {
        &self.columns
    }

    pub fn missing_token(&self) -> &str {
        &self.missing
    }

    pub fn set_missing_token(&mut self, token: impl Into<String>) {
        self.missing = token.into();
    }

    /// Class names for classification, empty otherwise.
    pub fn classes(&self) -> &[String] {
        match (&self.problem, &self.label().kind) {
            (Problem::Classification, AttributeKind::Nominal(v)) => v,
            _ => &[],
        }
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes().iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Missing,
    Nominal(u32),
    Numeric(f64),
}

impl Cell {
    pub fn numeric(self) -> Option<f64> {
        match self {
            Cell::Numeric(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Class(usize),
    Value(f64),
    /// Survival censoring status: `true` = event observed, `false` = censored.
    Status(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// One cell per regular attribute.
    pub values: Vec<Cell>,
    pub label: Label,
    pub survival_time: Option<f64>,
    pub weight: f64,
}

impl Example {
    pub fn class(&self) -> Option<usize> {
        match self.label {
            Label::Class(c) => Some(c),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self.label {
            Label::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_event(&self) -> bool {
        matches!(self.label, Label::Status(true))
    }

    pub fn time(&self) -> f64 {
        self.survival_time.unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    examples: Vec<Example>,
}

impl Dataset {
    /// Builds a dataset, checking every example against the schema.
    pub fn new(schema: Arc<Schema>, examples: Vec<Example>) -> Result<Self> {
        for (row, e) in examples.iter().enumerate() {
            validate_example(&schema, e).map_err(|msg| Error::schema(format!("example {row}: {msg}")))?;
        }
        Ok(Dataset { schema, examples })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn problem(&self) -> Problem {
        self.schema.problem
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.examples.len()).collect()
    }

    /// New dataset holding the selected examples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.examples.iter().map(|e| e.weight).sum()
    }
}

fn validate_example(schema: &Schema, e: &Example) -> std::result::Result<(), String> {
    if e.values.len() != schema.attribute_count() {
        return Err(format!(
            "has {} values, schema declares {} attributes",
            e.values.len(),
            schema.attribute_count()
        ));
    }
    for (id, cell) in e.values.iter().enumerate() {
        let attr = schema.attribute(id);
        match (cell, &attr.kind) {
            (Cell::Missing, _) => {}
            (Cell::Numeric(x), AttributeKind::Numeric) if x.is_finite() => {}
            (Cell::Nominal(v), AttributeKind::Nominal(dict)) if (*v as usize) < dict.len() => {}
            _ => return Err(format!("cell for `{}` does not match its kind", attr.name)),
        }
    }
    if !(e.weight.is_finite() && e.weight > 0.0) {
        return Err("weight must be positive".into());
    }
    match (schema.problem, e.label) {
        (Problem::Classification, Label::Class(c)) if c < schema.classes().len() => {}
        (Problem::Regression, Label::Value(v)) if v.is_finite() => {}
        (Problem::Survival, Label::Status(_)) => match e.survival_time {
            Some(t) if t.is_finite() && t >= 0.0 => {}
            _ => return Err("survival time must be finite and non-negative".into()),
        },
        _ => return Err("label kind does not match problem type".into()),
    }
    if schema.problem != Problem::Survival && e.survival_time.is_some() {
        return Err("survival time given for a non-survival problem".into());
    }
    Ok(())
}

/// Loads a comma-delimited table with a header row plus its JSON metadata.
pub fn load_dataset(table_path: &Path, metadata_path: &Path) -> Result<Dataset> {
    let schema = Schema::from_json_file(metadata_path)?;
    load_table(table_path, Arc::new(schema))
}

pub fn load_table(table_path: &Path, schema: Arc<Schema>) -> Result<Dataset> {
    let file = File::open(table_path).map_err(|e| Error::io(table_path, e))?;
    read_table(file, schema)
}

pub fn read_table<R: std::io::Read>(reader: R, schema: Arc<Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if position.insert(h.as_str(), i).is_some() {
            return Err(Error::schema(format!("duplicate column `{h}` in table header")));
        }
    }
    let declared: HashSet<&str> = schema.columns().iter().map(|a| a.name.as_str()).collect();
    if let Some(extra) = header.iter().find(|h| !declared.contains(h.as_str())) {
        return Err(Error::schema(format!("column `{extra}` is not declared in metadata")));
    }
    let locate = |a: &Attribute| {
        position
            .get(a.name.as_str())
            .copied()
            .ok_or_else(|| Error::schema(format!("table lacks declared column `{}`", a.name)))
    };
    let regular_cols = schema.attributes().map(locate).collect::<Result<Vec<_>>>()?;
    let label_col = locate(schema.label())?;
    let time_col = schema.survival_time.map(|i| locate(&schema.columns[i])).transpose()?;
    let weight_col = schema.weight.map(|i| locate(&schema.columns[i])).transpose()?;

    let missing = schema.missing_token().to_string();
    let mut examples = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let field = |col: usize| record.get(col).unwrap_or("");
        let cell_err = |attr: &Attribute, message: String| Error::Cell {
            row,
            column: attr.name.clone(),
            message,
        };

        let mut values = Vec::with_capacity(regular_cols.len());
        for (id, &col) in regular_cols.iter().enumerate() {
            let attr = schema.attribute(id);
            let text = field(col);
            let cell = if text == missing {
                Cell::Missing
            } else {
                match &attr.kind {
                    AttributeKind::Numeric => Cell::Numeric(parse_number(text).map_err(|m| cell_err(attr, m))?),
                    AttributeKind::Nominal(_) => Cell::Nominal(
                        attr.value_index(text)
                            .ok_or_else(|| cell_err(attr, format!("`{text}` is not in the value dictionary")))?,
                    ),
                }
            };
            values.push(cell);
        }

        let label_attr = schema.label();
        let label_text = field(label_col);
        let label = match schema.problem {
            Problem::Classification => Label::Class(
                label_attr
                    .value_index(label_text)
                    .ok_or_else(|| cell_err(label_attr, format!("unknown class `{label_text}`")))?
                    as usize,
            ),
            Problem::Regression => Label::Value(parse_number(label_text).map_err(|m| cell_err(label_attr, m))?),
            Problem::Survival => {
                let v = parse_number(label_text).map_err(|m| cell_err(label_attr, m))?;
                if v == 0.0 {
                    Label::Status(false)
                } else if v == 1.0 {
                    Label::Status(true)
                } else {
                    return Err(cell_err(
                        label_attr,
                        format!("censoring status must be 0 or 1, got `{label_text}`"),
                    ));
                }
            }
        };

        let survival_time = match time_col {
            Some(col) => {
                let attr = &schema.columns[schema.survival_time.unwrap()];
                let t = parse_number(field(col)).map_err(|m| cell_err(attr, m))?;
                if t < 0.0 {
                    return Err(cell_err(attr, "survival time must be non-negative".into()));
                }
                Some(t)
            }
            None => None,
        };
        let weight = match weight_col {
            Some(col) => {
                let attr = &schema.columns[schema.weight.unwrap()];
                let w = parse_number(field(col)).map_err(|m| cell_err(attr, m))?;
                if w <= 0.0 {
                    return Err(cell_err(attr, "weight must be positive".into()));
                }
                w
            }
            None => 1.0,
        };
        examples.push(Example {
            values,
            label,
            survival_time,
            weight,
        });
    }
    Dataset::new(schema, examples)
}

fn parse_number(text: &str) -> std::result::Result<f64, String> {
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("`{text}` is not a finite number")),
    }
}

pub fn covers(condition: &ElementaryCondition, example: &Example) -> bool {
    condition.covers(example)
}

/// Examples (by index) satisfying every condition of the premise.
pub fn covered_set(premise: &CompoundCondition, data: &Dataset, examples: &[usize]) -> Vec<usize> {
    examples
        .iter()
        .copied()
        .filter(|&i| premise.covers(data.example(i)))
        .collect()
}

/// Split point between two consecutive distinct values. Falls back to the
/// upper value when the midpoint rounds onto the lower one, so that `< split`
/// and `>= split` always separate the two values.
pub fn split_point(lower: f64, upper: f64) -> f64 {
    let mid = (lower + upper) / 2.0;
    let mid = if mid.is_finite() {
        mid
    } else {
        lower / 2.0 + upper / 2.0
    };
    if mid > lower && mid <= upper {
        mid
    } else {
        upper
    }
}

/// Sorted distinct non-missing values of a numeric attribute among `covered`.
pub fn distinct_values(data: &Dataset, covered: &[usize], attribute: AttrId) -> Vec<f64> {
    let mut values: Vec<f64> = covered
        .iter()
        .filter_map(|&i| data.example(i).values[attribute].numeric())
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Candidate conditions over the covered examples, in deterministic order:
/// attribute declaration order, then dictionary order or ascending split
/// point, with `<` before `>=`.
pub fn possible_conditions(data: &Dataset, covered: &[usize], excluded: &BTreeSet<AttrId>) -> Vec<ElementaryCondition> {
    let schema = data.schema();
    let mut out = Vec::new();
    for id in 0..schema.attribute_count() {
        if excluded.contains(&id) {
            continue;
        }
        match &schema.attribute(id).kind {
            AttributeKind::Nominal(dict) => {
                let mut present = vec![false; dict.len()];
                for &i in covered {
                    if let Cell::Nominal(v) = data.example(i).values[id] {
                        present[v as usize] = true;
                    }
                }
                for (v, _) in present.iter().enumerate().filter(|(_, &p)| p) {
                    out.push(ElementaryCondition::equals(id, v as u32));
                }
            }
            AttributeKind::Numeric => {
                let values = distinct_values(data, covered, id);
                for pair in values.windows(2) {
                    let split = split_point(pair[0], pair[1]);
                    out.push(ElementaryCondition::within(id, Interval::less_than(split)));
                    out.push(ElementaryCondition::within(id, Interval::at_least(split)));
                }
            }
        }
    }
    out
}
