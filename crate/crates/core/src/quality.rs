//! Confusion matrices and rule quality measures.
//!
//! Every measure is oriented so that larger is better. Degenerate inputs
//! (a zero denominator) score [`f64::NEG_INFINITY`], which is never selected
//! during growing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};

/// Weighted (P, N, p, n) statistics of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Positives covered by the rule.
    pub p: f64,
    /// Negatives covered by the rule.
    pub n: f64,
    /// Positives in the whole training set.
    #[serde(rename = "P")]
    pub total_p: f64,
    /// Negatives in the whole training set.
    #[serde(rename = "N")]
    pub total_n: f64,
}

impl ConfusionMatrix {
    pub fn new(total_p: f64, total_n: f64, p: f64, n: f64) -> Self {
        ConfusionMatrix { p, n, total_p, total_n }
    }

    pub fn covered(&self) -> f64 {
        self.p + self.n
    }

    pub fn total(&self) -> f64 {
        self.total_p + self.total_n
    }

    pub fn precision(&self) -> f64 {
        self.p / (self.p + self.n)
    }
}

/// Builds the confusion matrix of a rule from its coverage and a positive-example predicate.
pub fn confusion_matrix<F>(data: &Dataset, covered: &[usize], is_positive: F) -> ConfusionMatrix
where
    F: Fn(&Example) -> bool,
{
    let mut cm = ConfusionMatrix::default();
    for e in data.examples() {
        if is_positive(e) {
            cm.total_p += e.weight;
        } else {
            cm.total_n += e.weight;
        }
    }
    for &i in covered {
        let e = data.example(i);
        if is_positive(e) {
            cm.p += e.weight;
        } else {
            cm.n += e.weight;
        }
    }
    cm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QualityMeasure {
    C2,
    Correlation,
    ConditionalEntropy,
    Lift,
    #[serde(rename = "RSS")]
    Rss,
    SBayesian,
    LogRank,
}

impl QualityMeasure {
    pub const ALL: [QualityMeasure; 7] = [
        QualityMeasure::C2,
        QualityMeasure::Correlation,
        QualityMeasure::ConditionalEntropy,
        QualityMeasure::Lift,
        QualityMeasure::Rss,
        QualityMeasure::SBayesian,
        QualityMeasure::LogRank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QualityMeasure::C2 => "C2",
            QualityMeasure::Correlation => "Correlation",
            QualityMeasure::ConditionalEntropy => "ConditionalEntropy",
            QualityMeasure::Lift => "Lift",
            QualityMeasure::Rss => "RSS",
            QualityMeasure::SBayesian => "SBayesian",
            QualityMeasure::LogRank => "LogRank",
        }
    }

    /// Score of a confusion matrix. `LogRank` works on survival times and has
    /// no confusion-matrix form; it scores negative infinity here.
    pub fn score(self, cm: &ConfusionMatrix) -> f64 {
        let q = match self {
            QualityMeasure::C2 => c2(cm),
            QualityMeasure::Correlation => correlation(cm),
            QualityMeasure::ConditionalEntropy => conditional_entropy_quality(cm),
            QualityMeasure::Lift => lift(cm),
            QualityMeasure::Rss => rss(cm),
            QualityMeasure::SBayesian => s_bayesian(cm),
            QualityMeasure::LogRank => f64::NEG_INFINITY,
        };
        if q.is_nan() {
            f64::NEG_INFINITY
        } else {
            q
        }
    }

    /// Non-negative weight a rule carries when voting.
    ///
    /// Conditional entropy votes with the information gain H(Y) - H(Y|X), which
    /// orders rules of one class exactly like -H(Y|X); other measures vote with
    /// their value clipped at zero.
    pub fn voting_weight(self, quality: f64, cm: &ConfusionMatrix) -> f64 {
        let w = match self {
            QualityMeasure::ConditionalEntropy => {
                let prior = binary_entropy(cm.total_p, cm.total_n);
                prior + quality
            }
            _ => quality,
        };
        if w.is_finite() {
            w.max(0.0)
        } else {
            0.0
        }
    }
}

impl fmt::Display for QualityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "c2" => QualityMeasure::C2,
            "correlation" => QualityMeasure::Correlation,
            "conditionalentropy" | "entropy" => QualityMeasure::ConditionalEntropy,
            "lift" => QualityMeasure::Lift,
            "rss" | "wra" => QualityMeasure::Rss,
            "sbayesian" => QualityMeasure::SBayesian,
            "logrank" => QualityMeasure::LogRank,
            _ => return Err(Error::invalid(format!("unknown quality measure `{s}`"))),
        })
    }
}

/// RSS = p/P - n/N.
pub fn rss(cm: &ConfusionMatrix) -> f64 {
    if cm.total_p <= 0.0 || cm.total_n <= 0.0 {
        return f64::NEG_INFINITY;
    }
    cm.p / cm.total_p - cm.n / cm.total_n
}

fn plogp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Entropy (bits) of a two-outcome distribution given by non-negative masses.
fn binary_entropy(a: f64, b: f64) -> f64 {
    let total = a + b;
    if total <= 0.0 {
        return 0.0;
    }
    -(plogp(a / total) + plogp(b / total))
}

/// Negated conditional entropy -H(Y|X), Y = positive/negative, X = covered/uncovered.
///
/// Each probability is formed from its own numerator rather than as `1 - q`, so
/// a split and its complement score bit-identically.
pub fn conditional_entropy_quality(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let covered = cm.p + cm.n;
    let up = cm.total_p - cm.p;
    let un = cm.total_n - cm.n;
    let uncovered = up + un;
    let h_cov = covered / total * binary_entropy(cm.p, cm.n);
    let h_unc = uncovered / total * binary_entropy(up, un);
    -(h_cov + h_unc)
}

/// Lift = [p/(p+n)] * [(P+N)/P].
pub fn lift(cm: &ConfusionMatrix) -> f64 {
    let covered = cm.p + cm.n;
    if covered <= 0.0 || cm.total_p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (cm.p / covered) * (cm.total() / cm.total_p)
}

/// Correlation = (pN - nP) / sqrt(P N (p+n) (P+N-p-n)).
pub fn correlation(cm: &ConfusionMatrix) -> f64 {
    let covered = cm.p + cm.n;
    let uncovered = cm.total() - covered;
    let denom = (cm.total_p * cm.total_n * covered * uncovered).sqrt();
    // NaN from an empty side also lands here
    if denom.is_nan() || denom <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (cm.p * cm.total_n - cm.n * cm.total_p) / denom
}

/// s = p/(p+n) - (P-p)/(P+N-p-n).
pub fn s_bayesian(cm: &ConfusionMatrix) -> f64 {
    let covered = cm.p + cm.n;
    let uncovered = cm.total() - covered;
    if covered <= 0.0 || uncovered <= 0.0 {
        return f64::NEG_INFINITY;
    }
    cm.p / covered - (cm.total_p - cm.p) / uncovered
}

/// C2 = [((P+N)/N) (p/(p+n) - P/(P+N))] * [(1 + p/P)/2].
pub fn c2(cm: &ConfusionMatrix) -> f64 {
    let covered = cm.p + cm.n;
    let total = cm.total();
    if covered <= 0.0 || cm.total_n <= 0.0 || cm.total_p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let accuracy_gain = (total / cm.total_n) * (cm.p / covered - cm.total_p / total);
    accuracy_gain * (1.0 + cm.p / cm.total_p) / 2.0
}

/// Per-time counts of one group: events at the time and subjects at risk.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RiskCounts {
    pub events: f64,
    pub at_risk: f64,
}

/// Log-rank statistic x^2/y from per-event-time counts of the covered and
/// uncovered groups, iterated in ascending time order.
///
/// Times with fewer than two subjects at risk contribute nothing to either sum.
pub fn log_rank_from_counts<I>(counts: I) -> f64
where
    I: IntoIterator<Item = (RiskCounts, RiskCounts)>,
{
    let mut x = 0.0;
    let mut y = 0.0;
    for (c, u) in counts {
        let h = c.at_risk + u.at_risk;
        if h <= 1.0 {
            continue;
        }
        let e = c.events + u.events;
        x += u.events - u.at_risk / h * e;
        y += c.at_risk * u.at_risk * e * (h - e) / (h * h * (h - 1.0));
    }
    if y > 0.0 {
        x * x / y
    } else {
        0.0
    }
}

/// Log-rank statistic comparing survival of covered and uncovered examples.
pub fn log_rank_statistic(covered: &[&Example], uncovered: &[&Example]) -> Result<f64> {
    if covered.is_empty() || uncovered.is_empty() {
        return Err(Error::invalid("log-rank statistic needs both groups non-empty"));
    }
    let mut times: Vec<f64> = covered
        .iter()
        .chain(uncovered)
        .filter(|e| e.is_event())
        .map(|e| e.time())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let counts_at = |group: &[&Example], t: f64| {
        let mut rc = RiskCounts::default();
        for e in group {
            let ti = e.time();
            if ti >= t {
                rc.at_risk += 1.0;
            }
            if ti == t && e.is_event() {
                rc.events += 1.0;
            }
        }
        rc
    };
    Ok(log_rank_from_counts(
        times.iter().map(|&t| (counts_at(covered, t), counts_at(uncovered, t))),
    ))
}
