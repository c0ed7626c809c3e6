//! Shared generators and property checks for the integration suites.
#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snc_core::data::{Attribute, AttributeKind, Cell, Dataset, Example, Label, Problem, Role, Schema};
use snc_core::guided::{
    guided_separate_and_conquer, InitialRuleDoc, Knowledge, KnowledgeBlockDoc, KnowledgeDoc, Multiplicity,
    PreferredAttributeDoc, PreferredConditionDoc,
};
use snc_core::induction::{
    grow, premise_quality, prune, separate_and_conquer, Evaluator, InductionParams, Target, Uncovered,
};
use snc_core::model::serialize::ConditionValue;
use snc_core::model::{serialize_ruleset, CompoundCondition, ConditionDoc, Provenance, RuleSet};
use snc_core::quality::QualityMeasure;

pub const NOMINAL_VALUES: [&str; 3] = ["a", "b", "c"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random table with at most `max_rows` examples and at most five regular
/// attributes. Numeric cells come from a coarse grid so ties are common.
pub fn random_dataset(rng: &mut ChaCha8Rng, problem: Problem, max_rows: usize) -> Dataset {
    let attributes = rng.gen_range(1..=5);
    let mut columns = Vec::new();
    for a in 0..attributes {
        let kind = if rng.gen_bool(0.6) {
            AttributeKind::Numeric
        } else {
            let k = rng.gen_range(2..=3);
            AttributeKind::Nominal(NOMINAL_VALUES[..k].iter().map(|s| s.to_string()).collect())
        };
        columns.push(Attribute {
            name: format!("x{a}"),
            kind,
            role: Role::Regular,
        });
    }
    let classes = rng.gen_range(2..=3);
    let label_kind = match problem {
        Problem::Classification => AttributeKind::Nominal((0..classes).map(|c| format!("c{c}")).collect()),
        _ => AttributeKind::Numeric,
    };
    columns.push(Attribute {
        name: "label".into(),
        kind: label_kind,
        role: Role::Label,
    });
    if problem == Problem::Survival {
        columns.push(Attribute {
            name: "time".into(),
            kind: AttributeKind::Numeric,
            role: Role::SurvivalTime,
        });
    }
    let missing_rate = if rng.gen_bool(0.3) { 0.1 } else { 0.0 };
    let rows = rng.gen_range(2..=max_rows);
    let mut examples = Vec::with_capacity(rows);
    for _ in 0..rows {
        let values = columns[..attributes]
            .iter()
            .map(|a| {
                if rng.gen_bool(missing_rate) {
                    return Cell::Missing;
                }
                match &a.kind {
                    AttributeKind::Numeric => Cell::Numeric(rng.gen_range(0..8) as f64),
                    AttributeKind::Nominal(v) => Cell::Nominal(rng.gen_range(0..v.len()) as u32),
                }
            })
            .collect();
        let (label, survival_time) = match problem {
            Problem::Classification => (Label::Class(rng.gen_range(0..classes)), None),
            Problem::Regression => (Label::Value(rng.gen_range(0..20) as f64 / 2.0), None),
            Problem::Survival => (Label::Status(rng.gen_bool(0.7)), Some(rng.gen_range(1..=15) as f64)),
        };
        examples.push(Example {
            values,
            label,
            survival_time,
            weight: 1.0,
        });
    }
    let schema = Schema::new(problem, columns, None).expect("generated schema is valid");
    Dataset::new(Arc::new(schema), examples).expect("generated examples match the schema")
}

pub fn measures_for(problem: Problem) -> Vec<QualityMeasure> {
    match problem {
        Problem::Survival => vec![QualityMeasure::LogRank],
        _ => QualityMeasure::ALL
            .into_iter()
            .filter(|m| *m != QualityMeasure::LogRank)
            .collect(),
    }
}

pub fn problem_of(seed: u64) -> Problem {
    [Problem::Classification, Problem::Regression, Problem::Survival][(seed % 3) as usize]
}

/// Dataset and induction parameters drawn from one seed.
pub fn random_case(seed: u64) -> (Dataset, InductionParams) {
    let mut rng = rng(seed);
    let problem = problem_of(seed);
    let data = random_dataset(&mut rng, problem, 40);
    let measures = measures_for(problem);
    let measure = measures[rng.gen_range(0..measures.len())];
    let params = InductionParams {
        measure,
        mincov: rng.gen_range(1..=5),
        pruning: rng.gen_bool(0.8),
    };
    (data, params)
}

pub fn targets(data: &Dataset) -> Vec<Target> {
    match data.problem() {
        Problem::Classification => (0..data.schema().classes().len()).map(Target::Class).collect(),
        Problem::Regression => vec![Target::Regression],
        Problem::Survival => vec![Target::Survival],
    }
}

fn in_pass(target: Target, e: &Example) -> bool {
    match target {
        Target::Class(c) => e.class() == Some(c),
        _ => true,
    }
}

fn rule_in_pass(target: Target, rule: &snc_core::model::Rule) -> bool {
    match target {
        Target::Class(c) => rule.class() == Some(c),
        _ => true,
    }
}

fn json(rs: &RuleSet) -> String {
    serialize_ruleset(rs).expect("rule sets serialize")
}

/// Every pass example is covered by a rule of its pass, and every rule
/// covers at least the effective mincov of the examples still uncovered
/// when it was added.
pub fn check_coverage_and_mincov(data: &Dataset, params: &InductionParams, rs: &RuleSet) -> Result<(), String> {
    for target in targets(data) {
        let mut uncovered: Vec<bool> = data.examples().iter().map(|e| in_pass(target, e)).collect();
        for (r, rule) in rs.rules.iter().enumerate().filter(|(_, r)| rule_in_pass(target, r)) {
            let left = uncovered.iter().filter(|&&u| u).count();
            let required = params.mincov.min(left).max(1);
            let mut newly = 0;
            for (i, e) in data.examples().iter().enumerate() {
                if uncovered[i] && rule.premise.covers(e) {
                    uncovered[i] = false;
                    newly += 1;
                }
            }
            if newly < required {
                return Err(format!("rule {r} covers {newly} new examples, needs {required}"));
            }
        }
        if let Some(i) = uncovered.iter().position(|&u| u) {
            return Err(format!("example {i} left uncovered in pass {target:?}"));
        }
    }
    Ok(())
}

/// Pruning a grown premise never lowers its quality and keeps a condition.
pub fn check_pruning(data: &Dataset, params: &InductionParams) -> Result<(), String> {
    for target in targets(data) {
        let eval = Evaluator::new(data, params.measure, target).map_err(|e| e.to_string())?;
        let uncovered = Uncovered::for_pass(&eval);
        if uncovered.is_empty() {
            continue;
        }
        let mincov = uncovered.effective_mincov(params.mincov);
        let grown = grow(
            &eval,
            CompoundCondition::default(),
            uncovered.mask(),
            mincov,
            &Default::default(),
            &[],
        );
        if grown.is_empty() {
            continue;
        }
        let before = premise_quality(&eval, &grown);
        let pruned = prune(&eval, grown.clone());
        let after = premise_quality(&eval, &pruned);
        if after < before {
            return Err(format!("pruning lowered quality from {before} to {after}"));
        }
        if pruned.is_empty() {
            return Err("pruning removed every condition".into());
        }
    }
    Ok(())
}

/// The induction property suite on one dataset: termination, full coverage,
/// mincov, pruning, determinism and empty-knowledge equivalence.
pub fn check_induction_properties(data: &Dataset, params: &InductionParams) -> Result<(), String> {
    let first = separate_and_conquer(data, params).map_err(|e| format!("induction failed: {e}"))?;
    check_coverage_and_mincov(data, params, &first)?;
    check_pruning(data, params)?;
    let second = separate_and_conquer(data, params).map_err(|e| e.to_string())?;
    if json(&first) != json(&second) {
        return Err("repeated runs differ".into());
    }
    let guided = guided_separate_and_conquer(data, params, &Knowledge::empty()).map_err(|e| e.to_string())?;
    if json(&first) != json(&guided) {
        return Err("guided run with empty knowledge differs from the automatic run".into());
    }
    Ok(())
}

fn random_condition(rng: &mut ChaCha8Rng, data: &Dataset, attribute: usize) -> ConditionDoc {
    let attr = data.schema().attribute(attribute);
    let (op, value) = match attr.kind.values() {
        Some(values) => (
            "=",
            ConditionValue::Text(values[rng.gen_range(0..values.len())].clone()),
        ),
        None => (
            if rng.gen_bool(0.5) { "<" } else { ">=" },
            ConditionValue::Number(rng.gen_range(0..8) as f64 + 0.5),
        ),
    };
    ConditionDoc {
        attribute: attr.name.clone(),
        op: op.into(),
        value: Some(value),
        range: None,
        lower_closed: None,
        upper_closed: None,
        provenance: None,
    }
}

/// Random knowledge for a dataset, without class-specific blocks.
pub fn random_knowledge(rng: &mut ChaCha8Rng, data: &Dataset) -> KnowledgeDoc {
    let attributes = data.schema().attribute_count();
    let classification = data.problem() == Problem::Classification;
    let mut block = KnowledgeBlockDoc::default();
    for _ in 0..rng.gen_range(0..=2) {
        let mut attrs: Vec<usize> = (0..attributes).collect();
        let len = rng.gen_range(1..=attributes.min(2));
        let mut premise = Vec::new();
        for _ in 0..len {
            let a = attrs.remove(rng.gen_range(0..attrs.len()));
            premise.push(random_condition(rng, data, a));
        }
        let class = classification.then(|| {
            let classes = data.schema().classes();
            classes[rng.gen_range(0..classes.len())].clone()
        });
        block.initial_rules.push(InitialRuleDoc {
            premise,
            class,
            multiplicity: None,
        });
    }
    // one preferred condition per attribute at most, so counts are unambiguous
    let mut pref_attrs: Vec<usize> = (0..attributes).collect();
    for _ in 0..rng.gen_range(0..=2).min(attributes) {
        let a = pref_attrs.remove(rng.gen_range(0..pref_attrs.len()));
        block.preferred_conditions.push(PreferredConditionDoc {
            conditions: vec![random_condition(rng, data, a)],
            multiplicity: random_multiplicity(rng),
        });
    }
    for a in 0..attributes {
        if rng.gen_bool(0.3) {
            block.preferred_attributes.push(PreferredAttributeDoc {
                attribute: data.schema().attribute(a).name.clone(),
                multiplicity: random_multiplicity(rng),
            });
        }
    }
    for a in 0..attributes {
        if rng.gen_bool(0.3) {
            block.forbidden_attributes.push(data.schema().attribute(a).name.clone());
        }
    }
    if rng.gen_bool(0.3) {
        let a = rng.gen_range(0..attributes);
        block.forbidden_conditions.push(random_condition(rng, data, a));
    }
    block.extend_with_preferred = Some(rng.gen_bool(0.5));
    block.extend_with_automatic = Some(rng.gen_bool(0.5));
    block.induce_with_preferred = Some(rng.gen_bool(0.5));
    block.induce_with_automatic = Some(rng.gen_bool(0.5));
    if classification {
        block.consider_other_classes = Some(rng.gen_bool(0.5));
    }
    KnowledgeDoc {
        global: block,
        per_class: BTreeMap::new(),
    }
}

fn random_multiplicity(rng: &mut ChaCha8Rng) -> Multiplicity {
    if rng.gen_bool(0.2) {
        Multiplicity::Infinite
    } else {
        Multiplicity::Finite(rng.gen_range(1..=3))
    }
}

fn limit(m: Multiplicity) -> usize {
    match m {
        Multiplicity::Finite(k) => k as usize,
        Multiplicity::Infinite => usize::MAX,
    }
}

/// Guidance-priority properties of one guided run.
pub fn check_guidance(data: &Dataset, params: &InductionParams, doc: &KnowledgeDoc) -> Result<(), String> {
    let schema = data.schema();
    let knowledge = Knowledge::resolve(doc, schema).map_err(|e| format!("knowledge rejected: {e}"))?;
    let rs =
        guided_separate_and_conquer(data, params, &knowledge).map_err(|e| format!("guided induction failed: {e}"))?;
    let block = &doc.global;
    let forbidden: Vec<usize> = block
        .forbidden_attributes
        .iter()
        .map(|n| schema.find(n).expect("generated names exist"))
        .collect();
    let guided_classes: Vec<Target> = match data.problem() {
        Problem::Classification => {
            let named: Vec<usize> = block
                .initial_rules
                .iter()
                .filter_map(|r| r.class.as_deref().and_then(|c| schema.class_index(c)))
                .collect();
            targets(data)
                .into_iter()
                .filter(|t| named.is_empty() || matches!(t, Target::Class(c) if named.contains(c)))
                .collect()
        }
        _ => targets(data),
    };

    for target in targets(data) {
        let pass_rules: Vec<_> = rs.rules.iter().filter(|r| rule_in_pass(target, r)).collect();
        if !guided_classes.contains(&target) {
            continue;
        }
        for (r, rule) in pass_rules.iter().enumerate() {
            for c in &rule.premise.conditions {
                if c.provenance == Provenance::Automatic && forbidden.contains(&c.attribute) {
                    return Err(format!(
                        "rule {r} has an automatic condition on forbidden attribute #{}",
                        c.attribute
                    ));
                }
            }
        }
        // preferred multiplicities, counted per pass
        for pc in &block.preferred_conditions {
            let cond = pc.conditions[0]
                .to_condition(schema, Provenance::PreferredCondition)
                .map_err(|e| e.to_string())?;
            let used = pass_rules
                .iter()
                .filter(|r| {
                    r.premise
                        .conditions
                        .iter()
                        .any(|c| c.provenance == Provenance::PreferredCondition && c.same_relation(&cond))
                })
                .count();
            if used > limit(pc.multiplicity) {
                return Err(format!(
                    "preferred condition used in {used} rules, allowed {:?}",
                    pc.multiplicity
                ));
            }
        }
        for pa in &block.preferred_attributes {
            let a = schema.find(&pa.attribute).expect("generated names exist");
            let used = pass_rules
                .iter()
                .filter(|r| {
                    r.premise
                        .conditions
                        .iter()
                        .any(|c| c.provenance == Provenance::PreferredAttribute && c.attribute == a)
                })
                .count();
            if used > limit(pa.multiplicity) {
                return Err(format!(
                    "preferred attribute used in {used} rules, allowed {:?}",
                    pa.multiplicity
                ));
            }
        }
        // initial rules lead the pass and keep their conditions verbatim
        let initial: Vec<&InitialRuleDoc> = block
            .initial_rules
            .iter()
            .filter(|r| match (target, r.class.as_deref()) {
                (Target::Class(c), Some(name)) => schema.class_index(name) == Some(c),
                _ => true,
            })
            .collect();
        if pass_rules.len() < initial.len() {
            return Err(format!(
                "{} initial rules but only {} rules in the pass",
                initial.len(),
                pass_rules.len()
            ));
        }
        for (k, ir) in initial.iter().enumerate() {
            let rule = pass_rules[k];
            if !rule.is_initial {
                return Err(format!("rule {k} of the pass is not the initial rule"));
            }
            for doc in &ir.premise {
                let want = doc
                    .to_condition(schema, Provenance::InitialRule)
                    .map_err(|e| e.to_string())?;
                let kept = rule
                    .premise
                    .conditions
                    .iter()
                    .any(|c| c.provenance == Provenance::InitialRule && c.same_relation(&want));
                if !kept {
                    return Err(format!("initial rule {k} lost a condition"));
                }
            }
        }
        let no_new = block.induce_with_preferred == Some(false) && block.induce_with_automatic == Some(false);
        if no_new && pass_rules.len() != initial.len() {
            return Err(format!(
                "no new rules allowed but the pass has {} rules for {} initial rules",
                pass_rules.len(),
                initial.len()
            ));
        }
    }
    Ok(())
}

/// Dataset, parameters and knowledge for one guidance case.
pub fn random_guidance_case(seed: u64) -> (Dataset, InductionParams, KnowledgeDoc) {
    let (data, params) = random_case(seed);
    let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let doc = random_knowledge(&mut rng, &data);
    (data, params, doc)
}
