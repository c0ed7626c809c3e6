//! Conditions, rules, rule sets and survival curves.

mod condition;
mod rule;
pub mod serialize;
mod survival;

pub use condition::{Bound, CompoundCondition, ElementaryCondition, Interval, Provenance, Relation};
pub use rule::{merge_conditions, Conclusion, Defaults, Rule, RuleSet};
pub use serialize::{load_ruleset, parse_ruleset, save_ruleset, serialize_ruleset, ConditionDoc};
pub use survival::{censoring_kaplan_meier, kaplan_meier, KaplanMeier};
