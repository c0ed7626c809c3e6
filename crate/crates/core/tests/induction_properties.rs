mod common;

use std::sync::Arc;

use proptest::prelude::*;
use snc_core::data::{Attribute, AttributeKind, Cell, Dataset, Example, Label, Problem, Role, Schema};
use snc_core::induction::{premise_quality, prune, separate_and_conquer, Evaluator, InductionParams, Target};
use snc_core::model::{CompoundCondition, Conclusion, ElementaryCondition, Interval, Provenance};
use snc_core::quality::QualityMeasure;

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn induction_contract_on_random_tables(seed in any::<u64>()) {
        let (data, params) = common::random_case(seed);
        prop_assert!(data.len() <= 40 && data.schema().attribute_count() <= 5);
        if let Err(msg) = common::check_induction_properties(&data, &params) {
            return Err(TestCaseError::fail(format!("seed {seed}: {msg}")));
        }
    }
}

/// Two numeric attributes; `a` separates the classes, `b` is noise.
fn separable() -> Dataset {
    let columns = vec![
        Attribute {
            name: "a".into(),
            kind: AttributeKind::Numeric,
            role: Role::Regular,
        },
        Attribute {
            name: "b".into(),
            kind: AttributeKind::Numeric,
            role: Role::Regular,
        },
        Attribute {
            name: "class".into(),
            kind: AttributeKind::Nominal(vec!["no".into(), "yes".into()]),
            role: Role::Label,
        },
    ];
    let schema = Arc::new(Schema::new(Problem::Classification, columns, None).unwrap());
    let rows = [
        (1.0, 5.0, 0),
        (2.0, 1.0, 0),
        (3.0, 4.0, 0),
        (4.0, 2.0, 1),
        (5.0, 6.0, 1),
        (6.0, 3.0, 1),
    ];
    let examples = rows
        .iter()
        .map(|&(a, b, c)| Example {
            values: vec![Cell::Numeric(a), Cell::Numeric(b)],
            label: Label::Class(c),
            survival_time: None,
            weight: 1.0,
        })
        .collect();
    Dataset::new(schema, examples).unwrap()
}

#[test]
fn perfect_split_gives_one_rule_per_class() {
    for measure in [
        QualityMeasure::C2,
        QualityMeasure::ConditionalEntropy,
        QualityMeasure::Rss,
    ] {
        let data = separable();
        let rs = separate_and_conquer(&data, &InductionParams::new(measure, 1)).unwrap();
        assert_eq!(rs.len(), 2, "{measure:?}\n{}", rs.to_text());
        assert_eq!(rs.rules[0].conclusion, Conclusion::Class(0));
        assert_eq!(rs.rules[1].conclusion, Conclusion::Class(1));
        for rule in &rs.rules {
            assert_eq!(rule.stats.n, 0.0);
            assert_eq!(rule.stats.p, 3.0);
            assert_eq!(rule.premise.conditions.len(), 1);
            assert_eq!(rule.premise.conditions[0].attribute, 0);
        }
    }
}

#[test]
fn single_class_with_full_mincov_gives_one_rule() {
    let data = separable();
    let one_class: Vec<usize> = (0..3).collect();
    let data = data.subset(&one_class);
    let rs = separate_and_conquer(&data, &InductionParams::new(QualityMeasure::C2, 3)).unwrap();
    let own: Vec<_> = rs.rules.iter().filter(|r| r.class() == Some(0)).collect();
    assert_eq!(own.len(), 1);
    assert_eq!(own[0].stats.p, 3.0);
}

#[test]
fn redundant_condition_is_pruned() {
    let data = separable();
    let eval = Evaluator::new(&data, QualityMeasure::C2, Target::Class(1)).unwrap();
    // a >= 3.5 already decides the class; b < 10 changes nothing
    let premise = CompoundCondition::new(vec![
        ElementaryCondition::within(0, Interval::at_least(3.5)),
        ElementaryCondition::within(1, Interval::less_than(10.0)),
    ]);
    let pruned = prune(&eval, premise.clone());
    assert_eq!(pruned.conditions, vec![premise.conditions[0]]);
    assert_eq!(premise_quality(&eval, &pruned), premise_quality(&eval, &premise));
}

#[test]
fn quality_lowering_deletion_is_kept() {
    let data = separable();
    let eval = Evaluator::new(&data, QualityMeasure::C2, Target::Class(1)).unwrap();
    let premise = CompoundCondition::new(vec![ElementaryCondition::within(0, Interval::at_least(3.5))]);
    assert_eq!(prune(&eval, premise.clone()), premise);
    // the user condition cannot go; dropping the automatic one admits two negatives
    let premise = CompoundCondition::new(vec![
        ElementaryCondition::within(1, Interval::less_than(4.5)).with_provenance(Provenance::InitialRule),
        ElementaryCondition::within(0, Interval::at_least(3.5)),
    ]);
    let pruned = prune(&eval, premise.clone());
    assert_eq!(pruned, premise);
}

#[test]
fn mincov_larger_than_data_still_terminates() {
    let data = separable();
    let rs = separate_and_conquer(&data, &InductionParams::new(QualityMeasure::Correlation, 100)).unwrap();
    common::check_coverage_and_mincov(&data, &InductionParams::new(QualityMeasure::Correlation, 100), &rs).unwrap();
}
