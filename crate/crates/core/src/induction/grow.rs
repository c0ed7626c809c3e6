//! Condition search, rule growing and pruning.

use std::collections::BTreeSet;

use crate::data::{split_point, AttrId, AttributeKind, Cell};
use crate::induction::evaluator::{Evaluation, Evaluator, Target};
use crate::model::{CompoundCondition, ElementaryCondition, Interval, Provenance, Relation};

/// Restrictions on the conditions a search may produce.
#[derive(Debug, Clone, Default)]
pub struct SearchSpace<'k> {
    /// Attributes that must not be used.
    pub excluded: BTreeSet<AttrId>,
    /// Candidates intersecting any of these are rejected.
    pub forbidden_conditions: &'k [ElementaryCondition],
    /// Restricts the search to one attribute.
    pub only: Option<AttrId>,
}

impl SearchSpace<'_> {
    fn allows(&self, c: &ElementaryCondition) -> bool {
        !self.forbidden_conditions.iter().any(|f| f.intersects(c))
    }
}

/// A candidate is better when its quality is higher, or equal with larger
/// coverage. Earlier candidates win remaining ties.
pub fn is_better(candidate: &Evaluation, best: &Evaluation) -> bool {
    candidate.quality > best.quality || (candidate.quality == best.quality && candidate.coverage > best.coverage)
}

/// Best admissible condition refining the rule whose coverage is `covered`.
///
/// Admissible candidates cover at least `mincov` examples flagged in
/// `uncovered` and have a quality above negative infinity. Candidates are
/// visited in attribute order, then dictionary order or ascending split point
/// with `<` before `>=`.
pub fn best_condition(
    eval: &Evaluator<'_>,
    covered: &[usize],
    uncovered: &[bool],
    mincov: usize,
    space: &SearchSpace<'_>,
) -> Option<(ElementaryCondition, Evaluation)> {
    let data = eval.data();
    let schema = data.schema();
    let mut acc = eval.accumulator();
    let mut best: Option<(ElementaryCondition, Evaluation)> = None;
    let mut consider = |cond: ElementaryCondition, ev: Evaluation| {
        if ev.new_coverage < mincov || ev.quality == f64::NEG_INFINITY || ev.quality.is_nan() {
            return;
        }
        if !space.allows(&cond) {
            return;
        }
        if best.as_ref().is_none_or(|(_, b)| is_better(&ev, b)) {
            best = Some((cond, ev));
        }
    };

    for id in 0..schema.attribute_count() {
        if space.excluded.contains(&id) || space.only.is_some_and(|only| only != id) {
            continue;
        }
        match &schema.attribute(id).kind {
            AttributeKind::Nominal(dict) => {
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); dict.len()];
                for &i in covered {
                    if let Cell::Nominal(v) = data.example(i).values[id] {
                        groups[v as usize].push(i);
                    }
                }
                for (v, group) in groups.iter().enumerate() {
                    if group.is_empty() {
                        continue;
                    }
                    acc.clear();
                    for &i in group {
                        acc.add(i, uncovered[i]);
                    }
                    consider(ElementaryCondition::equals(id, v as u32), acc.evaluate());
                }
            }
            AttributeKind::Numeric => {
                let mut points: Vec<(f64, usize)> = covered
                    .iter()
                    .filter_map(|&i| data.example(i).values[id].numeric().map(|x| (x, i)))
                    .collect();
                if points.len() < 2 {
                    continue;
                }
                points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let boundaries: Vec<usize> = (1..points.len()).filter(|&k| points[k].0 != points[k - 1].0).collect();
                if boundaries.is_empty() {
                    continue;
                }
                let mut left = Vec::with_capacity(boundaries.len());
                acc.clear();
                let mut next = 0;
                for &b in &boundaries {
                    while next < b {
                        let i = points[next].1;
                        acc.add(i, uncovered[i]);
                        next += 1;
                    }
                    left.push(acc.evaluate());
                }
                let mut right = vec![None; boundaries.len()];
                acc.clear();
                let mut next = points.len();
                for (slot, &b) in boundaries.iter().enumerate().rev() {
                    while next > b {
                        next -= 1;
                        let i = points[next].1;
                        acc.add(i, uncovered[i]);
                    }
                    right[slot] = Some(acc.evaluate());
                }
                for (slot, &b) in boundaries.iter().enumerate() {
                    let split = split_point(points[b - 1].0, points[b].0);
                    consider(ElementaryCondition::within(id, Interval::less_than(split)), left[slot]);
                    let r = right[slot].expect("every boundary has a right side");
                    consider(ElementaryCondition::within(id, Interval::at_least(split)), r);
                }
            }
        }
    }
    best
}

/// Adds automatic conditions one at a time, each the best admissible
/// candidate, until none remains or, outside survival problems, the rule
/// covers no negatives.
///
/// Attributes already in the input premise, `forbidden_attributes`, and
/// nominal attributes added along the way are never refined. Numeric
/// attributes added here may be refined again.
pub fn grow(
    eval: &Evaluator<'_>,
    mut premise: CompoundCondition,
    uncovered: &[bool],
    mincov: usize,
    forbidden_attributes: &BTreeSet<AttrId>,
    forbidden_conditions: &[ElementaryCondition],
) -> CompoundCondition {
    let data = eval.data();
    let mut covered: Vec<usize> = (0..data.len()).filter(|&i| premise.covers(data.example(i))).collect();
    let mut space = SearchSpace {
        excluded: forbidden_attributes
            .iter()
            .copied()
            .chain(premise.attributes())
            .collect(),
        forbidden_conditions,
        only: None,
    };
    let stop_when_pure = !matches!(eval.target(), Target::Survival);
    while let Some((cond, ev)) = best_condition(eval, &covered, uncovered, mincov, &space) {
        if matches!(cond.relation, Relation::Equals(_)) {
            space.excluded.insert(cond.attribute);
        }
        covered.retain(|&i| cond.covers(data.example(i)));
        premise.push(cond.with_provenance(Provenance::Automatic));
        if stop_when_pure && ev.cm.n <= 0.0 {
            break;
        }
    }
    premise
}

/// Quality of a premise on the full training set.
pub fn premise_quality(eval: &Evaluator<'_>, premise: &CompoundCondition) -> f64 {
    let data = eval.data();
    let covered: Vec<usize> = (0..data.len()).filter(|&i| premise.covers(data.example(i))).collect();
    eval.evaluate(&covered, None).quality
}

/// Greedily deletes automatic conditions while some deletion does not lower
/// quality, taking the best deletion (earliest on ties). Stops at one
/// condition.
pub fn prune(eval: &Evaluator<'_>, premise: CompoundCondition) -> CompoundCondition {
    let data = eval.data();
    let n = data.len();
    let conds = &premise.conditions;
    let k = conds.len();
    if k <= 1 {
        return premise;
    }
    let mut current = premise_quality(eval, &premise);
    let mut alive = vec![true; k];
    let mut remaining = k;
    // examples failing each condition
    let fails: Vec<Vec<usize>> = conds
        .iter()
        .map(|c| (0..n).filter(|&i| !c.covers(data.example(i))).collect())
        .collect();
    let mut failed = vec![0u32; n];
    let mut culprit = vec![usize::MAX; n];
    for (idx, list) in fails.iter().enumerate() {
        for &i in list {
            failed[i] += 1;
            culprit[i] = idx;
        }
    }
    // covered by every alive condition, ascending
    let mut base: Vec<usize> = (0..n).filter(|&i| failed[i] == 0).collect();
    // failing exactly one alive condition, grouped by that condition
    let mut exclusive: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        if failed[i] == 1 {
            exclusive[culprit[i]].push(i);
        }
    }
    let mut acc = eval.accumulator();
    let mut merged = Vec::new();
    while remaining > 1 {
        let mut best: Option<(usize, f64)> = None;
        for idx in 0..k {
            if !alive[idx] || conds[idx].provenance != Provenance::Automatic {
                continue;
            }
            merge_sorted(&base, &exclusive[idx], &mut merged);
            acc.clear();
            for &i in &merged {
                acc.add(i, false);
            }
            let q = acc.evaluate().quality;
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((idx, q));
            }
        }
        let Some((idx, q)) = best.filter(|&(_, q)| q >= current) else {
            break;
        };
        alive[idx] = false;
        remaining -= 1;
        current = q;
        merge_sorted(&base, &exclusive[idx], &mut merged);
        std::mem::swap(&mut base, &mut merged);
        exclusive[idx].clear();
        for &i in &fails[idx] {
            failed[i] -= 1;
            if failed[i] == 1 {
                let c = (0..k)
                    .find(|&c| alive[c] && !conds[c].covers(data.example(i)))
                    .expect("one alive condition still fails");
                culprit[i] = c;
                let list = &mut exclusive[c];
                let at = list.partition_point(|&j| j < i);
                list.insert(at, i);
            }
        }
    }
    let kept = conds.iter().zip(&alive).filter(|(_, &a)| a).map(|(c, _)| *c).collect();
    CompoundCondition::new(kept)
}

fn merge_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    out.reserve(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        if a[x] < b[y] {
            out.push(a[x]);
            x += 1;
        } else {
            out.push(b[y]);
            y += 1;
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
}
