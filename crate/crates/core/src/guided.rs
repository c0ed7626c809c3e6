//! User knowledge and guided separate-and-conquer induction.
//!
//! Knowledge is prioritized: initial rules, then preferred conditions, then
//! preferred attributes, then automatic conditions. A condition added at one
//! level locks its attribute against every lower level, and only automatic
//! conditions are ever pruned. Forbidden conditions and attributes restrict
//! automatic conditions only.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{AttrId, Dataset, Problem, Schema};
use crate::error::{Error, Result};
use crate::induction::{
    automatic_pass, best_condition, compute_defaults, finalize_rule, grow, is_better, pass_targets, prune, Evaluation,
    Evaluator, InductionParams, SearchSpace, Target, Uncovered,
};
use crate::model::{CompoundCondition, ConditionDoc, ElementaryCondition, Provenance, Rule, RuleSet};

/// How many rules a preferred element may appear in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "CountDoc", into = "CountDoc")]
pub enum Multiplicity {
    Finite(u64),
    Infinite,
}

impl Multiplicity {
    pub fn is_available(self) -> bool {
        self != Multiplicity::Finite(0)
    }

    fn consume(&mut self) {
        if let Multiplicity::Finite(k) = self {
            *k = k.saturating_sub(1);
        }
    }
}

/// Integer or `"inf"` in documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountDoc {
    Count(u64),
    Text(String),
}

fn parse_infinite(text: &str) -> bool {
    matches!(text.trim().to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞")
}

impl TryFrom<CountDoc> for Multiplicity {
    type Error = Error;

    fn try_from(doc: CountDoc) -> Result<Self> {
        match doc {
            CountDoc::Count(0) => Err(Error::document("multiplicities must be positive")),
            CountDoc::Count(k) => Ok(Multiplicity::Finite(k)),
            CountDoc::Text(t) if parse_infinite(&t) => Ok(Multiplicity::Infinite),
            CountDoc::Text(t) => Err(Error::document(format!("`{t}` is not a multiplicity"))),
        }
    }
}

impl From<Multiplicity> for CountDoc {
    fn from(m: Multiplicity) -> Self {
        match m {
            Multiplicity::Finite(k) => CountDoc::Count(k),
            Multiplicity::Infinite => CountDoc::Text("inf".into()),
        }
    }
}

/// Per-rule cap on preferred conditions or attributes; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountDoc", into = "CountDoc")]
pub struct Cap(pub Option<u64>);

impl TryFrom<CountDoc> for Cap {
    type Error = Error;

    fn try_from(doc: CountDoc) -> Result<Self> {
        match doc {
            CountDoc::Count(k) => Ok(Cap(Some(k))),
            CountDoc::Text(t) if parse_infinite(&t) => Ok(Cap(None)),
            CountDoc::Text(t) => Err(Error::document(format!("`{t}` is not a cap"))),
        }
    }
}

impl From<Cap> for CountDoc {
    fn from(c: Cap) -> Self {
        match c.0 {
            Some(k) => CountDoc::Count(k),
            None => CountDoc::Text("inf".into()),
        }
    }
}

impl Cap {
    fn allows(self, used: u64) -> bool {
        self.0.is_none_or(|k| used < k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InitialRuleDoc {
    pub premise: Vec<ConditionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    /// Number of copies of the rule to induce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreferredConditionDoc {
    pub conditions: Vec<ConditionDoc>,
    #[serde(default = "one")]
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreferredAttributeDoc {
    pub attribute: String,
    #[serde(default = "one")]
    pub multiplicity: Multiplicity,
}

fn one() -> Multiplicity {
    Multiplicity::Finite(1)
}

/// One block of knowledge. Unset flags and caps fall back to the enclosing
/// block, then to the automatic-mode defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnowledgeBlockDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_rules: Vec<InitialRuleDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preferred_conditions: Vec<PreferredConditionDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preferred_attributes: Vec<PreferredAttributeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden_attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden_conditions: Vec<ConditionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extend_with_preferred: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extend_with_automatic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induce_with_preferred: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induce_with_automatic: Option<bool>,
    #[serde(default, rename = "K_C", skip_serializing_if = "Option::is_none")]
    pub k_c: Option<Cap>,
    #[serde(default, rename = "K_A", skip_serializing_if = "Option::is_none")]
    pub k_a: Option<Cap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consider_other_classes: Option<bool>,
}

/// Knowledge document: a global block plus optional class-specific blocks
/// keyed by class name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnowledgeDoc {
    #[serde(flatten)]
    pub global: KnowledgeBlockDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<String, KnowledgeBlockDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialRule {
    pub premise: CompoundCondition,
    pub class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferredCondition {
    /// Conjunction added atomically.
    pub conditions: Vec<ElementaryCondition>,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferredAttribute {
    pub attribute: AttrId,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flags {
    pub extend_with_preferred: bool,
    pub extend_with_automatic: bool,
    pub induce_with_preferred: bool,
    pub induce_with_automatic: bool,
    pub k_c: Cap,
    pub k_a: Cap,
}

impl Default for Flags {
    /// Automatic-mode behaviour: only new automatic rules, no caps.
    fn default() -> Self {
        Flags {
            extend_with_preferred: false,
            extend_with_automatic: false,
            induce_with_preferred: false,
            induce_with_automatic: true,
            k_c: Cap(None),
            k_a: Cap(None),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct FlagOverrides {
    extend_with_preferred: Option<bool>,
    extend_with_automatic: Option<bool>,
    induce_with_preferred: Option<bool>,
    induce_with_automatic: Option<bool>,
    k_c: Option<Cap>,
    k_a: Option<Cap>,
}

impl FlagOverrides {
    fn apply(&self, base: Flags) -> Flags {
        Flags {
            extend_with_preferred: self.extend_with_preferred.unwrap_or(base.extend_with_preferred),
            extend_with_automatic: self.extend_with_automatic.unwrap_or(base.extend_with_automatic),
            induce_with_preferred: self.induce_with_preferred.unwrap_or(base.induce_with_preferred),
            induce_with_automatic: self.induce_with_automatic.unwrap_or(base.induce_with_automatic),
            k_c: self.k_c.unwrap_or(base.k_c),
            k_a: self.k_a.unwrap_or(base.k_a),
        }
    }
}

/// Knowledge resolved for one induction pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassKnowledge {
    pub initial_rules: Vec<CompoundCondition>,
    pub preferred_conditions: Vec<PreferredCondition>,
    pub preferred_attributes: Vec<PreferredAttribute>,
    pub forbidden_conditions: Vec<ElementaryCondition>,
    pub forbidden_attributes: BTreeSet<AttrId>,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Block {
    initial_rules: Vec<InitialRule>,
    preferred_conditions: Vec<PreferredCondition>,
    preferred_attributes: Vec<PreferredAttribute>,
    forbidden_conditions: Vec<ElementaryCondition>,
    forbidden_attributes: BTreeSet<AttrId>,
    flags: FlagOverrides,
    consider_other_classes: Option<bool>,
}

/// Knowledge resolved against a schema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Knowledge {
    global: Block,
    per_class: BTreeMap<usize, Block>,
}

impl Knowledge {
    /// No knowledge: guided induction then equals automatic induction.
    pub fn empty() -> Self {
        Knowledge::default()
    }

    pub fn from_json_str(text: &str, schema: &Schema) -> Result<Self> {
        let doc: KnowledgeDoc = if text.trim().is_empty() {
            KnowledgeDoc::default()
        } else {
            serde_json::from_str(text)?
        };
        Knowledge::resolve(&doc, schema)
    }

    pub fn from_file(path: &Path, schema: &Schema) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Knowledge::from_json_str(&text, schema)
    }

    pub fn resolve(doc: &KnowledgeDoc, schema: &Schema) -> Result<Self> {
        let global = resolve_block(&doc.global, schema, None)?;
        let mut per_class = BTreeMap::new();
        for (name, block) in &doc.per_class {
            if schema.problem != Problem::Classification {
                return Err(Error::document(
                    "class-specific knowledge needs a classification problem",
                ));
            }
            let class = schema
                .class_index(name)
                .ok_or_else(|| Error::document(format!("unknown class `{name}`")))?;
            per_class.insert(class, resolve_block(block, schema, Some(class))?);
        }
        Ok(Knowledge { global, per_class })
    }

    pub fn consider_other_classes(&self) -> bool {
        self.global.consider_other_classes.unwrap_or(false)
            || self
                .per_class
                .values()
                .any(|b| b.consider_other_classes.unwrap_or(false))
    }

    /// Classes that carry class-specific knowledge, or `None` when knowledge
    /// applies to every class.
    fn guided_classes(&self) -> Option<BTreeSet<usize>> {
        let mut classes: BTreeSet<usize> = self.per_class.keys().copied().collect();
        classes.extend(self.global.initial_rules.iter().filter_map(|r| r.class));
        (!classes.is_empty()).then_some(classes)
    }

    /// Knowledge for one pass, or `None` when the pass has none and should be
    /// handled by automatic induction (if at all).
    pub fn for_pass(&self, target: Target) -> Option<PassKnowledge> {
        let class = match target {
            Target::Class(c) => Some(c),
            _ => None,
        };
        if let (Some(c), Some(guided)) = (class, self.guided_classes()) {
            if !guided.contains(&c) {
                return None;
            }
        }
        let mut flags = self.global.flags.apply(Flags::default());
        let mut pk = PassKnowledge::default();
        let blocks = std::iter::once(&self.global).chain(class.and_then(|c| self.per_class.get(&c)));
        for (depth, block) in blocks.enumerate() {
            if depth > 0 {
                flags = block.flags.apply(flags);
            }
            pk.initial_rules.extend(
                block
                    .initial_rules
                    .iter()
                    .filter(|r| r.class.is_none() || r.class == class)
                    .map(|r| r.premise.clone()),
            );
            pk.preferred_conditions
                .extend(block.preferred_conditions.iter().cloned());
            pk.preferred_attributes
                .extend(block.preferred_attributes.iter().cloned());
            pk.forbidden_conditions
                .extend(block.forbidden_conditions.iter().copied());
            pk.forbidden_attributes
                .extend(block.forbidden_attributes.iter().copied());
        }
        pk.flags = flags;
        Some(pk)
    }
}

fn resolve_block(doc: &KnowledgeBlockDoc, schema: &Schema, class: Option<usize>) -> Result<Block> {
    let classification = schema.problem == Problem::Classification;
    let mut initial_rules = Vec::new();
    for r in &doc.initial_rules {
        let conditions = r
            .premise
            .iter()
            .map(|c| {
                Ok(c.to_condition(schema, Provenance::InitialRule)?
                    .with_provenance(Provenance::InitialRule))
            })
            .collect::<Result<Vec<_>>>()?;
        let rule_class = match (&r.class, classification) {
            (Some(name), true) => Some(
                schema
                    .class_index(name)
                    .ok_or_else(|| Error::document(format!("unknown class `{name}`")))?,
            ),
            (None, true) => class,
            (Some(_), false) => {
                return Err(Error::document(
                    "initial rules of regression and survival problems take no class",
                ))
            }
            (None, false) => None,
        };
        if classification && rule_class.is_none() {
            return Err(Error::document(
                "initial rules of a classification problem need a class",
            ));
        }
        if class.is_some() && rule_class != class {
            return Err(Error::document("initial rule class differs from its block"));
        }
        let copies = match r.multiplicity {
            Some(0) => return Err(Error::document("multiplicities must be positive")),
            Some(k) => k,
            None => 1,
        };
        for _ in 0..copies {
            initial_rules.push(InitialRule {
                premise: CompoundCondition::new(conditions.clone()),
                class: rule_class,
            });
        }
    }
    let preferred_conditions = doc
        .preferred_conditions
        .iter()
        .map(|p| {
            if p.conditions.is_empty() {
                return Err(Error::document("a preferred condition needs at least one condition"));
            }
            let conditions = p
                .conditions
                .iter()
                .map(|c| {
                    Ok(c.to_condition(schema, Provenance::PreferredCondition)?
                        .with_provenance(Provenance::PreferredCondition))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PreferredCondition {
                conditions,
                multiplicity: p.multiplicity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let find = |name: &str| {
        schema
            .find(name)
            .ok_or_else(|| Error::document(format!("unknown attribute `{name}`")))
    };
    let preferred_attributes = doc
        .preferred_attributes
        .iter()
        .map(|p| {
            Ok(PreferredAttribute {
                attribute: find(&p.attribute)?,
                multiplicity: p.multiplicity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let forbidden_attributes = doc
        .forbidden_attributes
        .iter()
        .map(|a| find(a))
        .collect::<Result<_>>()?;
    let forbidden_conditions = doc
        .forbidden_conditions
        .iter()
        .map(|c| c.to_condition(schema, Provenance::Automatic))
        .collect::<Result<Vec<_>>>()?;
    Ok(Block {
        initial_rules,
        preferred_conditions,
        preferred_attributes,
        forbidden_conditions,
        forbidden_attributes,
        flags: FlagOverrides {
            extend_with_preferred: doc.extend_with_preferred,
            extend_with_automatic: doc.extend_with_automatic,
            induce_with_preferred: doc.induce_with_preferred,
            induce_with_automatic: doc.induce_with_automatic,
            k_c: doc.k_c,
            k_a: doc.k_a,
        },
        consider_other_classes: doc.consider_other_classes,
    })
}

fn covered_indices(eval: &Evaluator<'_>, premise: &CompoundCondition) -> Vec<usize> {
    let data = eval.data();
    (0..data.len()).filter(|&i| premise.covers(data.example(i))).collect()
}

/// Best condition on one attribute for the rule whose coverage is `covered`,
/// subject to the coverage requirement on the uncovered examples.
pub fn induce_best_condition(
    eval: &Evaluator<'_>,
    attribute: AttrId,
    covered: &[usize],
    uncovered: &[bool],
    mincov: usize,
) -> Option<(ElementaryCondition, Evaluation)> {
    let space = SearchSpace {
        only: Some(attribute),
        ..SearchSpace::default()
    };
    best_condition(eval, covered, uncovered, mincov, &space)
}

/// Extends a rule with preferred conditions (at most `k_c` rounds), then
/// with conditions on preferred attributes (at most `k_a` rounds). Each
/// round adds the admissible candidate giving the best rule and consumes one
/// use of it; attributes of the rule are never constrained twice.
#[allow(clippy::too_many_arguments)]
pub fn guided_grow(
    eval: &Evaluator<'_>,
    mut premise: CompoundCondition,
    uncovered: &[bool],
    mincov: usize,
    preferred_conditions: &mut [PreferredCondition],
    preferred_attributes: &mut [PreferredAttribute],
    k_c: Cap,
    k_a: Cap,
) -> CompoundCondition {
    let data = eval.data();
    let mut used: BTreeSet<AttrId> = premise.attributes().collect();
    let mut covered = covered_indices(eval, &premise);

    let mut rounds = 0;
    while k_c.allows(rounds) {
        let mut best: Option<(usize, Evaluation)> = None;
        for (idx, pc) in preferred_conditions.iter().enumerate() {
            if !pc.multiplicity.is_available() || pc.conditions.iter().any(|c| used.contains(&c.attribute)) {
                continue;
            }
            let extended: Vec<usize> = covered
                .iter()
                .copied()
                .filter(|&i| pc.conditions.iter().all(|c| c.covers(data.example(i))))
                .collect();
            let ev = eval.evaluate(&extended, Some(uncovered));
            if ev.new_coverage < mincov {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| is_better(&ev, b)) {
                best = Some((idx, ev));
            }
        }
        let Some((idx, _)) = best else { break };
        let pc = &mut preferred_conditions[idx];
        pc.multiplicity.consume();
        for c in &pc.conditions {
            used.insert(c.attribute);
            covered.retain(|&i| c.covers(data.example(i)));
            premise.push(c.with_provenance(Provenance::PreferredCondition));
        }
        rounds += 1;
    }

    let mut rounds = 0;
    while k_a.allows(rounds) {
        let mut best: Option<(usize, ElementaryCondition, Evaluation)> = None;
        for (idx, pa) in preferred_attributes.iter().enumerate() {
            if !pa.multiplicity.is_available() || used.contains(&pa.attribute) {
                continue;
            }
            let Some((cond, ev)) = induce_best_condition(eval, pa.attribute, &covered, uncovered, mincov) else {
                continue;
            };
            if best.as_ref().is_none_or(|(_, _, b)| is_better(&ev, b)) {
                best = Some((idx, cond, ev));
            }
        }
        let Some((idx, cond, _)) = best else { break };
        preferred_attributes[idx].multiplicity.consume();
        used.insert(cond.attribute);
        covered.retain(|&i| cond.covers(data.example(i)));
        premise.push(cond.with_provenance(Provenance::PreferredAttribute));
        rounds += 1;
    }
    premise
}

/// Guided induction of one pass: initial rules first, then new rules while
/// the new-rule flags allow it.
///
/// When new rules are built without automatic conditions, the loop stops as
/// soon as a rule is empty or misses the coverage requirement, leaving the
/// remaining examples uncovered.
pub fn guided_pass(
    eval: &Evaluator<'_>,
    params: &InductionParams,
    mut knowledge: PassKnowledge,
    uncovered: &mut Uncovered,
    rules: &mut Vec<Rule>,
) -> Result<()> {
    let data = eval.data();
    let flags = knowledge.flags;
    let forbidden_attributes = knowledge.forbidden_attributes.clone();
    let forbidden_conditions = knowledge.forbidden_conditions.clone();

    let extend = |premise: CompoundCondition,
                  uncovered: &Uncovered,
                  knowledge: &mut PassKnowledge,
                  preferred: bool,
                  automatic: bool| {
        let mincov = uncovered.effective_mincov(params.mincov);
        let mut premise = premise;
        if preferred {
            premise = guided_grow(
                eval,
                premise,
                uncovered.mask(),
                mincov,
                &mut knowledge.preferred_conditions,
                &mut knowledge.preferred_attributes,
                flags.k_c,
                flags.k_a,
            );
        }
        if automatic {
            premise = grow(
                eval,
                premise,
                uncovered.mask(),
                mincov,
                &forbidden_attributes,
                &forbidden_conditions,
            );
            if params.pruning && !premise.is_empty() {
                premise = prune(eval, premise);
            }
        }
        premise
    };

    let initial = std::mem::take(&mut knowledge.initial_rules);
    for premise in initial {
        let premise = extend(
            premise,
            uncovered,
            &mut knowledge,
            flags.extend_with_preferred,
            flags.extend_with_automatic,
        );
        uncovered.remove(data, &premise);
        rules.push(finalize_rule(eval, &premise, true)?);
    }

    if !(flags.induce_with_preferred || flags.induce_with_automatic) {
        return Ok(());
    }
    while !uncovered.is_empty() {
        let mincov = uncovered.effective_mincov(params.mincov);
        let premise = extend(
            CompoundCondition::default(),
            uncovered,
            &mut knowledge,
            flags.induce_with_preferred,
            flags.induce_with_automatic,
        );
        if !flags.induce_with_automatic && (premise.is_empty() || uncovered.covered_by(data, &premise) < mincov) {
            break;
        }
        if uncovered.remove(data, &premise) == 0 {
            return Err(Error::Internal("induced rule covers no uncovered example".into()));
        }
        rules.push(finalize_rule(eval, &premise, false)?);
    }
    Ok(())
}

/// Guided separate-and-conquer induction. Classification passes run in
/// class declaration order; classes without knowledge get automatic
/// induction only when `considerOtherClasses` is set.
pub fn guided_separate_and_conquer(data: &Dataset, params: &InductionParams, knowledge: &Knowledge) -> Result<RuleSet> {
    params.validate(data.problem())?;
    let defaults = compute_defaults(data)?;
    let mut rules = Vec::new();
    for target in pass_targets(data) {
        let eval = Evaluator::new(data, params.measure, target)?;
        let mut uncovered = Uncovered::for_pass(&eval);
        match knowledge.for_pass(target) {
            Some(pk) => guided_pass(&eval, params, pk, &mut uncovered, &mut rules)?,
            None if knowledge.consider_other_classes() => automatic_pass(&eval, params, &mut uncovered, &mut rules)?,
            None => {}
        }
    }
    Ok(RuleSet {
        schema: data.schema_arc(),
        measure: params.measure,
        rules,
        defaults,
    })
}
