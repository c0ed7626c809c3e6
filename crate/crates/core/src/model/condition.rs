//! Elementary conditions and conjunctive premises.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{AttrId, Cell, Example, Schema};

/// Origin of a condition, ordered from lowest to highest priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Automatic,
    PreferredAttribute,
    PreferredCondition,
    InitialRule,
}

impl Provenance {
    /// User-supplied conditions are protected from pruning.
    pub fn is_user(self) -> bool {
        self != Provenance::Automatic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub closed: bool,
}

/// Numeric interval with optional lower and upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Option<Bound>,
    pub upper: Option<Bound>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: None,
        upper: None,
    };

    /// `x < value`
    pub fn less_than(value: f64) -> Self {
        Interval {
            lower: None,
            upper: Some(Bound { value, closed: false }),
        }
    }

    /// `x >= value`
    pub fn at_least(value: f64) -> Self {
        Interval {
            lower: Some(Bound { value, closed: true }),
            upper: None,
        }
    }

    /// `x <= value`
    pub fn at_most(value: f64) -> Self {
        Interval {
            lower: None,
            upper: Some(Bound { value, closed: true }),
        }
    }

    /// `x > value`
    pub fn greater_than(value: f64) -> Self {
        Interval {
            lower: Some(Bound { value, closed: false }),
            upper: None,
        }
    }

    /// `[low, high)`
    pub fn half_open(low: f64, high: f64) -> Self {
        Interval {
            lower: Some(Bound {
                value: low,
                closed: true,
            }),
            upper: Some(Bound {
                value: high,
                closed: false,
            }),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        if x.is_nan() {
            return false;
        }
        let above = match self.lower {
            None => true,
            Some(b) => x > b.value || (b.closed && x == b.value),
        };
        let below = match self.upper {
            None => true,
            Some(b) => x < b.value || (b.closed && x == b.value),
        };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => lo.value > hi.value || (lo.value == hi.value && !(lo.closed && hi.closed)),
            _ => false,
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lower = match (self.lower, other.lower) {
            (None, b) | (b, None) => b,
            (Some(a), Some(b)) => Some(if a.value > b.value {
                a
            } else if b.value > a.value {
                b
            } else {
                Bound {
                    value: a.value,
                    closed: a.closed && b.closed,
                }
            }),
        };
        let upper = match (self.upper, other.upper) {
            (None, b) | (b, None) => b,
            (Some(a), Some(b)) => Some(if a.value < b.value {
                a
            } else if b.value < a.value {
                b
            } else {
                Bound {
                    value: a.value,
                    closed: a.closed && b.closed,
                }
            }),
        };
        Interval { lower, upper }
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        !self.intersect(other).is_empty()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (open, low) = match self.lower {
            Some(b) => (if b.closed { '[' } else { '(' }, format!("{}", b.value)),
            None => ('(', "-inf".to_string()),
        };
        let (close, high) = match self.upper {
            Some(b) => (if b.closed { ']' } else { ')' }, format!("{}", b.value)),
            None => (')', "inf".to_string()),
        };
        write!(f, "{open}{low}, {high}{close}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    /// Equality with an index into the attribute's value dictionary.
    Equals(u32),
    Within(Interval),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryCondition {
    pub attribute: AttrId,
    pub relation: Relation,
    pub provenance: Provenance,
}

impl ElementaryCondition {
    pub fn equals(attribute: AttrId, value: u32) -> Self {
        ElementaryCondition {
            attribute,
            relation: Relation::Equals(value),
            provenance: Provenance::Automatic,
        }
    }

    pub fn within(attribute: AttrId, interval: Interval) -> Self {
        ElementaryCondition {
            attribute,
            relation: Relation::Within(interval),
            provenance: Provenance::Automatic,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Missing values never satisfy a condition.
    pub fn covers(&self, example: &Example) -> bool {
        self.covers_cell(example.values[self.attribute])
    }

    pub fn covers_cell(&self, cell: Cell) -> bool {
        match (self.relation, cell) {
            (Relation::Equals(v), Cell::Nominal(x)) => v == x,
            (Relation::Within(iv), Cell::Numeric(x)) => iv.contains(x),
            _ => false,
        }
    }

    /// True when some value satisfies both conditions. Conditions on different
    /// attributes never intersect in this sense.
    pub fn intersects(&self, other: &ElementaryCondition) -> bool {
        if self.attribute != other.attribute {
            return false;
        }
        match (self.relation, other.relation) {
            (Relation::Equals(a), Relation::Equals(b)) => a == b,
            (Relation::Within(a), Relation::Within(b)) => a.overlaps(&b),
            _ => false,
        }
    }

    /// Same relation on the same attribute, ignoring provenance.
    pub fn same_relation(&self, other: &ElementaryCondition) -> bool {
        self.attribute == other.attribute && self.relation == other.relation
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> ConditionDisplay<'a> {
        ConditionDisplay {
            condition: self,
            schema,
        }
    }
}

pub struct ConditionDisplay<'a> {
    condition: &'a ElementaryCondition,
    schema: &'a Schema,
}

impl fmt::Display for ConditionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attr = self.schema.attribute(self.condition.attribute);
        match self.condition.relation {
            Relation::Equals(v) => {
                let value = attr
                    .kind
                    .values()
                    .and_then(|vals| vals.get(v as usize))
                    .map(String::as_str)
                    .unwrap_or("?");
                write!(f, "{} = {}", attr.name, value)
            }
            Relation::Within(iv) => match (iv.lower, iv.upper) {
                (None, Some(b)) => {
                    write!(f, "{} {} {}", attr.name, if b.closed { "<=" } else { "<" }, b.value)
                }
                (Some(b), None) => {
                    write!(f, "{} {} {}", attr.name, if b.closed { ">=" } else { ">" }, b.value)
                }
                _ => write!(f, "{} in {}", attr.name, iv),
            },
        }
    }
}

/// Conjunction of elementary conditions; the empty conjunction covers everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompoundCondition {
    pub conditions: Vec<ElementaryCondition>,
}

impl CompoundCondition {
    pub fn new(conditions: Vec<ElementaryCondition>) -> Self {
        CompoundCondition { conditions }
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn covers(&self, example: &Example) -> bool {
        self.conditions.iter().all(|c| c.covers(example))
    }

    pub fn push(&mut self, condition: ElementaryCondition) {
        self.conditions.push(condition);
    }

    pub fn uses_attribute(&self, attribute: AttrId) -> bool {
        self.conditions.iter().any(|c| c.attribute == attribute)
    }

    pub fn attributes(&self) -> impl Iterator<Item = AttrId> + '_ {
        self.conditions.iter().map(|c| c.attribute)
    }

    pub fn without(&self, index: usize) -> CompoundCondition {
        let mut conditions = self.conditions.clone();
        conditions.remove(index);
        CompoundCondition { conditions }
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> PremiseDisplay<'a> {
        PremiseDisplay { premise: self, schema }
    }
}

pub struct PremiseDisplay<'a> {
    premise: &'a CompoundCondition,
    schema: &'a Schema,
}

impl fmt::Display for PremiseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.premise.is_empty() {
            return write!(f, "TRUE");
        }
        for (i, c) in self.premise.conditions.iter().enumerate() {
            if i > 0 {
                write!(f, " AND ")?;
            }
            write!(f, "{}", c.display(self.schema))?;
        }
        Ok(())
    }
}
