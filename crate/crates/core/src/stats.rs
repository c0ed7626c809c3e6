//! Rule significance tests, multiple-testing correction, rule-set similarity
//! and descriptive reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::data::{covered_set, Dataset, Example, Problem};
use crate::error::{Error, Result};
use crate::induction::band_contains;
use crate::model::{Conclusion, Rule, RuleSet};
use crate::quality::{confusion_matrix, log_rank_statistic, ConfusionMatrix};

/// Relative tolerance for treating two table probabilities as equal.
const FISHER_TIE: f64 = 1.0 + 1e-7;

fn count(x: f64) -> Result<u64> {
    if !x.is_finite() || x < -0.5 {
        return Err(Error::invalid(format!("`{x}` is not a valid count")));
    }
    Ok(x.round().max(0.0) as u64)
}

/// Two-sided Fisher exact test of the table `[p, n; P - p, N - n]`.
///
/// Weighted counts are rounded to integers. The p-value is the total
/// probability of tables with the same margins that are no more likely than
/// the observed one.
pub fn fisher_exact(cm: &ConfusionMatrix) -> Result<f64> {
    let (p, n, total_p, total_n) = (count(cm.p)?, count(cm.n)?, count(cm.total_p)?, count(cm.total_n)?);
    if p > total_p || n > total_n {
        return Err(Error::invalid("covered counts exceed totals"));
    }
    let row = p + n;
    let lo = row.saturating_sub(total_n);
    let hi = row.min(total_p);
    if lo == hi {
        return Ok(1.0);
    }
    // f(x+1)/f(x) for the hypergeometric mass of the covered-positive cell
    let ratio = |x: u64| ((total_p - x) as f64 * (row - x) as f64) / ((x + 1) as f64 * (total_n + x + 1 - row) as f64);
    let mode = {
        let m = ((row + 1) as f64 * (total_p + 1) as f64 / (total_p + total_n + 2) as f64).floor() as u64;
        m.clamp(lo, hi)
    };
    let span = (hi - lo + 1) as usize;
    let mut w = vec![0.0f64; span];
    w[(mode - lo) as usize] = 1.0;
    for x in mode..hi {
        let i = (x - lo) as usize;
        w[i + 1] = w[i] * ratio(x);
    }
    for x in (lo..mode).rev() {
        let i = (x - lo) as usize;
        w[i] = w[i + 1] / ratio(x);
    }
    let observed = w[(p - lo) as usize] * FISHER_TIE;
    let total: f64 = w.iter().sum();
    let tail: f64 = w.iter().filter(|&&v| v <= observed).sum();
    Ok((tail / total).min(1.0))
}

fn sample_variance(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0)
}

/// Lower-tail chi-square test of the covered-label variance against the
/// uncovered-label variance: `X = (n_c - 1) s_c^2 / s_u^2` with `n_c - 1`
/// degrees of freedom.
pub fn chi2_variance_test(covered: &[f64], uncovered: &[f64]) -> Result<f64> {
    if covered.len() < 2 || uncovered.len() < 2 {
        return Err(Error::invalid("variance test needs at least two labels on each side"));
    }
    let su = sample_variance(uncovered);
    if !(su > 0.0 && su.is_finite()) {
        return Err(Error::invalid("uncovered labels have zero variance"));
    }
    let df = (covered.len() - 1) as f64;
    let x = df * sample_variance(covered) / su;
    let chi = ChiSquared::new(df).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(chi.cdf(x))
}

/// Upper-tail chi-square(1) probability of a log-rank statistic.
pub fn log_rank_p_value(statistic: f64) -> f64 {
    let chi = ChiSquared::new(1.0).expect("one degree of freedom is valid");
    chi.sf(statistic.max(0.0))
}

/// Log-rank test comparing survival of covered and uncovered examples.
pub fn log_rank_test(covered: &[&Example], uncovered: &[&Example]) -> Result<f64> {
    if !covered.iter().chain(uncovered).any(|e| e.is_event()) {
        return Err(Error::invalid("log-rank test needs at least one event"));
    }
    Ok(log_rank_p_value(log_rank_statistic(covered, uncovered)?))
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let v = p_values[i] * m as f64 / (rank + 1) as f64;
        running = running.min(v);
        adjusted[i] = running.min(1.0);
    }
    Ok(adjusted)
}

/// Indices of `data` examples covered by each rule, packed as bitsets per example.
fn coverage_bits(rs: &RuleSet, data: &Dataset) -> (Vec<u64>, usize) {
    let words = rs.len().div_ceil(64).max(1);
    let mut bits = vec![0u64; data.len() * words];
    for (r, rule) in rs.rules.iter().enumerate() {
        for (i, e) in data.examples().iter().enumerate() {
            if rule.premise.covers(e) {
                bits[i * words + r / 64] |= 1 << (r % 64);
            }
        }
    }
    (bits, words)
}

/// Probability that two rule sets agree on whether a random pair of examples
/// is covered together by some rule.
pub fn ruleset_similarity(a: &RuleSet, b: &RuleSet, data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("similarity needs at least two examples"));
    }
    let (ba, wa) = coverage_bits(a, data);
    let (bb, wb) = coverage_bits(b, data);
    let co = |bits: &[u64], w: usize, i: usize, j: usize| {
        bits[i * w..(i + 1) * w]
            .iter()
            .zip(&bits[j * w..(j + 1) * w])
            .any(|(x, y)| x & y != 0)
    };
    let mut agree: u64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            if co(&ba, wa, i, j) == co(&bb, wb, i, j) {
                agree += 1;
            }
        }
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    Ok(agree as f64 / pairs as f64)
}

/// Confusion matrix of a stored rule on a dataset. Positives are examples of
/// the rule's class, labels within the regression interval, or every
/// survival example.
pub fn rule_confusion_matrix(rule: &Rule, data: &Dataset) -> (Vec<usize>, ConfusionMatrix) {
    let covered = covered_set(&rule.premise, data, &data.all_indices());
    let cm = match &rule.conclusion {
        Conclusion::Class(c) => confusion_matrix(data, &covered, |e| e.class() == Some(*c)),
        Conclusion::Regression { low, high, .. } => confusion_matrix(data, &covered, |e| {
            e.value().is_some_and(|v| band_contains(*low, *high, v))
        }),
        Conclusion::Survival(_) => confusion_matrix(data, &covered, |_| true),
    };
    (covered, cm)
}

/// Significance of a rule on a dataset by the test matching its problem type.
pub fn rule_p_value(data: &Dataset, covered: &[usize], cm: &ConfusionMatrix) -> Result<f64> {
    if data.problem() == Problem::Classification {
        return fisher_exact(cm);
    }
    let mut mask = vec![false; data.len()];
    for &i in covered {
        mask[i] = true;
    }
    let (inside, outside): (Vec<_>, Vec<_>) = data.examples().iter().zip(&mask).partition(|(_, &m)| m);
    let inside: Vec<&Example> = inside.into_iter().map(|(e, _)| e).collect();
    let outside: Vec<&Example> = outside.into_iter().map(|(e, _)| e).collect();
    if data.problem() == Problem::Regression {
        let labels = |side: &[&Example]| side.iter().filter_map(|e| e.value()).collect::<Vec<f64>>();
        chi2_variance_test(&labels(&inside), &labels(&outside))
    } else {
        log_rank_test(&inside, &outside)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleReportRow {
    pub conditions: usize,
    pub support: f64,
    pub precision: f64,
    /// Missing when the rule's test is undefined (for example an empty side).
    pub p_value: Option<f64>,
    pub adjusted_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleSetReport {
    pub rule_count: usize,
    pub avg_conditions: f64,
    pub avg_support: f64,
    pub avg_precision: f64,
    pub alpha: f64,
    pub fraction_significant: f64,
    pub rules: Vec<RuleReportRow>,
}

/// Descriptive statistics of a rule set on a dataset. Rules without a defined
/// test count as not significant.
pub fn ruleset_report(rs: &RuleSet, data: &Dataset, alpha: f64) -> Result<RuleSetReport> {
    let survival = data.problem() == Problem::Survival;
    let mut rows = Vec::with_capacity(rs.len());
    for rule in &rs.rules {
        let (covered, cm) = rule_confusion_matrix(rule, data);
        let (support, precision) = if survival {
            (ratio_or_zero(cm.p, cm.total_p), 1.0)
        } else {
            (
                ratio_or_zero(cm.covered(), cm.total()),
                ratio_or_zero(cm.p, cm.covered()),
            )
        };
        rows.push(RuleReportRow {
            conditions: rule.premise.len(),
            support,
            precision,
            p_value: rule_p_value(data, &covered, &cm).ok(),
            adjusted_p_value: None,
        });
    }
    let raw: Vec<f64> = rows.iter().filter_map(|r| r.p_value).collect();
    let adjusted = benjamini_hochberg(&raw)?;
    let mut it = adjusted.into_iter();
    for row in rows.iter_mut().filter(|r| r.p_value.is_some()) {
        row.adjusted_p_value = it.next();
    }
    let k = rows.len();
    let mean = |f: &dyn Fn(&RuleReportRow) -> f64| {
        if k == 0 {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / k as f64
        }
    };
    let significant = rows
        .iter()
        .filter(|r| r.adjusted_p_value.is_some_and(|p| p < alpha))
        .count();
    Ok(RuleSetReport {
        rule_count: k,
        avg_conditions: mean(&|r| r.conditions as f64),
        avg_support: mean(&|r| r.support),
        avg_precision: mean(&|r| r.precision),
        alpha,
        fraction_significant: if k == 0 { 0.0 } else { significant as f64 / k as f64 },
        rules: rows,
    })
}

fn ratio_or_zero(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

impl RuleSetReport {
    /// Aligned one-row table: rules, conditions, support, precision, significant %.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>7} {:>11} {:>9} {:>10} {:>14}",
            "#rules", "#conditions", "support", "precision", "significant %"
        );
        let _ = writeln!(
            out,
            "{:>7} {:>11.1} {:>9.2} {:>10.2} {:>14.0}",
            self.rule_count,
            self.avg_conditions,
            self.avg_support,
            self.avg_precision,
            self.fraction_significant * 100.0
        );
        out
    }
}

/// Two-sided paired t-test on per-fold differences `a - b`.
///
/// All-zero differences give 1; zero variance with a non-zero mean gives 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired t-test needs vectors of equal length"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let k = d.len() as f64;
    let mean = d.iter().sum::<f64>() / k;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / k).sqrt();
    let dist = StudentsT::new(0.0, 1.0, k - 1.0).map_err(|e| Error::Internal(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}
