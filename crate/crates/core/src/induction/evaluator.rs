//! Rule evaluation against the full training set.
//!
//! An [`Evaluator`] precomputes per-dataset tables once; an [`Accumulator`]
//! collects a covered set one example at a time and scores it in time
//! independent of the set size (logarithmic for regression, linear in the
//! number of event times for survival).

use crate::data::{Dataset, Problem};
use crate::error::{Error, Result};
use crate::quality::{log_rank_from_counts, ConfusionMatrix, QualityMeasure, RiskCounts};

/// What counts as a positive example during one induction pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Examples of this class are positive.
    Class(usize),
    /// Positives are labels within one standard deviation of the covered median.
    Regression,
    /// Every example is positive; quality is the log-rank statistic.
    Survival,
}

impl Target {
    pub fn for_problem(problem: Problem, class: Option<usize>) -> Result<Target> {
        match (problem, class) {
            (Problem::Classification, Some(c)) => Ok(Target::Class(c)),
            (Problem::Classification, None) => Err(Error::invalid("classification target needs a class")),
            (Problem::Regression, _) => Ok(Target::Regression),
            (Problem::Survival, _) => Ok(Target::Survival),
        }
    }
}

/// Checks that a quality measure applies to a problem type.
pub fn check_measure(problem: Problem, measure: QualityMeasure) -> Result<()> {
    match (problem, measure) {
        (Problem::Survival, QualityMeasure::LogRank) => Ok(()),
        (Problem::Survival, m) => Err(Error::invalid(format!(
            "survival rules need the LogRank measure, not {m}"
        ))),
        (_, QualityMeasure::LogRank) => Err(Error::invalid("LogRank applies only to survival problems")),
        _ => Ok(()),
    }
}

/// Whether a label lies in the closed band `[low, high]`. The band is widened
/// by a relative 1e-10 so that labels sitting exactly on `M +- sd` stay inside
/// whatever summation order produced `sd`.
pub fn band_contains(low: f64, high: f64, v: f64) -> bool {
    let slack = 1e-10 * (low.abs().max(high.abs()) + (high - low)).max(f64::MIN_POSITIVE);
    v >= low - slack && v <= high + slack
}

struct RegressionTables {
    /// Rank of each example's label in `sorted` (ties broken by index).
    rank: Vec<usize>,
    sorted: Vec<f64>,
    /// `prefix_weight[r]` = weight of labels with rank < r.
    prefix_weight: Vec<f64>,
}

struct SurvivalTables {
    event_times: Vec<f64>,
    /// Number of event times <= the example's time.
    bucket: Vec<usize>,
    /// Index of the event time at which the example had its event.
    event_at: Vec<Option<usize>>,
    all_leaving: Vec<f64>,
    all_events: Vec<f64>,
}

enum Tables {
    Class {
        positive: Vec<bool>,
        total_p: f64,
        total_n: f64,
    },
    Regression(RegressionTables),
    Survival(SurvivalTables),
}

pub struct Evaluator<'a> {
    data: &'a Dataset,
    measure: QualityMeasure,
    target: Target,
    total_weight: f64,
    tables: Tables,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a Dataset, measure: QualityMeasure, target: Target) -> Result<Self> {
        check_measure(data.problem(), measure)?;
        let n = data.len();
        let total_weight = data.total_weight();
        let tables = match target {
            Target::Class(c) => {
                if data.problem() != Problem::Classification || c >= data.schema().classes().len() {
                    return Err(Error::invalid("class target does not match the dataset"));
                }
                let positive: Vec<bool> = data.examples().iter().map(|e| e.class() == Some(c)).collect();
                let total_p: f64 = data
                    .examples()
                    .iter()
                    .zip(&positive)
                    .filter(|(_, &p)| p)
                    .map(|(e, _)| e.weight)
                    .sum();
                let total_n: f64 = data
                    .examples()
                    .iter()
                    .zip(&positive)
                    .filter(|(_, &p)| !p)
                    .map(|(e, _)| e.weight)
                    .sum();
                Tables::Class {
                    positive,
                    total_p,
                    total_n,
                }
            }
            Target::Regression => {
                if data.problem() != Problem::Regression {
                    return Err(Error::invalid("regression target does not match the dataset"));
                }
                let labels: Vec<f64> = data.examples().iter().map(|e| e.value().unwrap_or(f64::NAN)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| labels[a].total_cmp(&labels[b]).then(a.cmp(&b)));
                let mut rank = vec![0; n];
                let mut prefix_weight = Vec::with_capacity(n + 1);
                prefix_weight.push(0.0);
                let mut acc = 0.0;
                for (r, &i) in order.iter().enumerate() {
                    rank[i] = r;
                    acc += data.example(i).weight;
                    prefix_weight.push(acc);
                }
                let sorted = order.iter().map(|&i| labels[i]).collect();
                Tables::Regression(RegressionTables {
                    rank,
                    sorted,
                    prefix_weight,
                })
            }
            Target::Survival => {
                if data.problem() != Problem::Survival {
                    return Err(Error::invalid("survival target does not match the dataset"));
                }
                let mut event_times: Vec<f64> = data
                    .examples()
                    .iter()
                    .filter(|e| e.is_event())
                    .map(|e| e.time())
                    .collect();
                event_times.sort_by(f64::total_cmp);
                event_times.dedup();
                let t = event_times.len();
                let mut bucket = Vec::with_capacity(n);
                let mut event_at = Vec::with_capacity(n);
                let mut all_leaving = vec![0.0; t + 1];
                let mut all_events = vec![0.0; t];
                for e in data.examples() {
                    let b = event_times.partition_point(|&x| x <= e.time());
                    bucket.push(b);
                    all_leaving[b] += 1.0;
                    let ev = (e.is_event()).then(|| b - 1);
                    if let Some(k) = ev {
                        all_events[k] += 1.0;
                    }
                    event_at.push(ev);
                }
                Tables::Survival(SurvivalTables {
                    event_times,
                    bucket,
                    event_at,
                    all_leaving,
                    all_events,
                })
            }
        };
        Ok(Evaluator {
            data,
            measure,
            target,
            total_weight,
            tables,
        })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn measure(&self) -> QualityMeasure {
        self.measure
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// Whether an example counts towards the uncovered set of this pass.
    pub fn is_pass_member(&self, i: usize) -> bool {
        match &self.tables {
            Tables::Class { positive, .. } => positive[i],
            _ => true,
        }
    }

    pub fn accumulator(&self) -> Accumulator<'_> {
        let state = match &self.tables {
            Tables::Class { .. } => State::Class { p: 0.0, n: 0.0 },
            Tables::Regression(t) => State::Regression {
                counts: Fenwick::new(t.sorted.len()),
                weights: Fenwick::new(t.sorted.len()),
                weight: 0.0,
                mean: 0.0,
                m2: 0.0,
            },
            Tables::Survival(t) => State::Survival {
                leaving: vec![0.0; t.event_times.len() + 1],
                events: vec![0.0; t.event_times.len()],
                weight: 0.0,
            },
        };
        Accumulator {
            eval: self,
            state,
            count: 0,
            new_count: 0,
        }
    }

    /// Confusion matrix and quality of an explicit covered set, accumulated in
    /// ascending index order.
    /// `uncovered`, when given, marks the examples counted as new coverage.
    pub fn evaluate(&self, covered: &[usize], uncovered: Option<&[bool]>) -> Evaluation {
        let mut acc = self.accumulator();
        let mut sorted = covered.to_vec();
        sorted.sort_unstable();
        for i in sorted {
            acc.add(i, uncovered.is_some_and(|u| u[i]));
        }
        acc.evaluate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cm: ConfusionMatrix,
    pub quality: f64,
    /// Examples covered.
    pub coverage: usize,
    /// Covered examples still in the uncovered set.
    pub new_coverage: usize,
}

/// Fenwick tree over positions `0..n`.
#[derive(Clone)]
struct Fenwick<T> {
    tree: Vec<T>,
}

impl<T: Copy + Default + std::ops::AddAssign + std::ops::Sub<Output = T> + PartialOrd> Fenwick<T> {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![T::default(); n + 1],
        }
    }

    fn clear(&mut self) {
        self.tree.fill(T::default());
    }

    fn add(&mut self, pos: usize, v: T) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `< end`.
    fn prefix(&self, end: usize) -> T {
        let mut s = T::default();
        let mut i = end;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    /// Smallest position whose inclusive prefix reaches `target` (> 0).
    fn lower_bound(&self, mut target: T) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < target {
                pos = next;
                target = target - self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

enum State {
    Class {
        p: f64,
        n: f64,
    },
    Regression {
        counts: Fenwick<u32>,
        weights: Fenwick<f64>,
        weight: f64,
        mean: f64,
        m2: f64,
    },
    Survival {
        leaving: Vec<f64>,
        events: Vec<f64>,
        weight: f64,
    },
}

/// Incrementally built covered set.
pub struct Accumulator<'e> {
    eval: &'e Evaluator<'e>,
    state: State,
    count: usize,
    new_count: usize,
}

impl Accumulator<'_> {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn new_count(&self) -> usize {
        self.new_count
    }

    pub fn clear(&mut self) {
        self.count = 0;
        self.new_count = 0;
        match &mut self.state {
            State::Class { p, n } => {
                *p = 0.0;
                *n = 0.0;
            }
            State::Regression {
                counts,
                weights,
                weight,
                mean,
                m2,
            } => {
                counts.clear();
                weights.clear();
                *weight = 0.0;
                *mean = 0.0;
                *m2 = 0.0;
            }
            State::Survival {
                leaving,
                events,
                weight,
            } => {
                leaving.fill(0.0);
                events.fill(0.0);
                *weight = 0.0;
            }
        }
    }

    /// Adds example `i`; `new` marks it as still uncovered.
    pub fn add(&mut self, i: usize, new: bool) {
        let e = self.eval.data.example(i);
        self.count += 1;
        if new {
            self.new_count += 1;
        }
        match (&mut self.state, &self.eval.tables) {
            (State::Class { p, n }, Tables::Class { positive, .. }) => {
                if positive[i] {
                    *p += e.weight;
                } else {
                    *n += e.weight;
                }
            }
            (
                State::Regression {
                    counts,
                    weights,
                    weight,
                    mean,
                    m2,
                },
                Tables::Regression(t),
            ) => {
                let r = t.rank[i];
                counts.add(r, 1);
                weights.add(r, e.weight);
                *weight += e.weight;
                // Welford update over unweighted labels
                let x = t.sorted[r];
                let k = self.count as f64;
                let d = x - *mean;
                *mean += d / k;
                *m2 += d * (x - *mean);
            }
            (
                State::Survival {
                    leaving,
                    events,
                    weight,
                },
                Tables::Survival(t),
            ) => {
                leaving[t.bucket[i]] += 1.0;
                if let Some(k) = t.event_at[i] {
                    events[k] += 1.0;
                }
                *weight += e.weight;
            }
            _ => unreachable!("accumulator state matches its evaluator"),
        }
    }

    pub fn evaluate(&self) -> Evaluation {
        let eval = self.eval;
        let (cm, quality) = match (&self.state, &eval.tables) {
            (State::Class { p, n }, Tables::Class { total_p, total_n, .. }) => {
                let cm = ConfusionMatrix::new(*total_p, *total_n, *p, *n);
                (cm, eval.measure.score(&cm))
            }
            (
                State::Regression {
                    counts,
                    weights,
                    weight,
                    mean: _,
                    m2,
                },
                Tables::Regression(t),
            ) => {
                if self.count == 0 {
                    (
                        ConfusionMatrix::new(0.0, eval.total_weight, 0.0, 0.0),
                        f64::NEG_INFINITY,
                    )
                } else {
                    let c = self.count as u32;
                    let kth = |k: u32| t.sorted[counts.lower_bound(k)];
                    let median = if c % 2 == 1 {
                        kth(c / 2 + 1)
                    } else {
                        (kth(c / 2) + kth(c / 2 + 1)) / 2.0
                    };
                    let sd = (m2 / self.count as f64).max(0.0).sqrt();
                    let (low, high) = (median - sd, median + sd);
                    let lo = t.sorted.partition_point(|&v| v < low && !band_contains(low, high, v));
                    let hi = t.sorted.partition_point(|&v| v <= high || band_contains(low, high, v));
                    let total_p = t.prefix_weight[hi] - t.prefix_weight[lo];
                    let p = weights.prefix(hi) - weights.prefix(lo);
                    let cm = ConfusionMatrix::new(
                        total_p,
                        (eval.total_weight - total_p).max(0.0),
                        p,
                        (weight - p).max(0.0),
                    );
                    (cm, eval.measure.score(&cm))
                }
            }
            (
                State::Survival {
                    leaving,
                    events,
                    weight,
                },
                Tables::Survival(t),
            ) => {
                let cm = ConfusionMatrix::new(eval.total_weight, 0.0, *weight, 0.0);
                let quality = if self.count == 0 {
                    f64::NEG_INFINITY
                } else {
                    survival_statistic(t, leaving, events, self.count as f64)
                };
                (cm, quality)
            }
            _ => unreachable!("accumulator state matches its evaluator"),
        };
        Evaluation {
            cm,
            quality,
            coverage: self.count,
            new_coverage: self.new_count,
        }
    }
}

fn survival_statistic(t: &SurvivalTables, leaving: &[f64], events: &[f64], covered: f64) -> f64 {
    let all: f64 = t.all_leaving.iter().sum();
    let mut gone_c = 0.0;
    let mut gone_a = 0.0;
    let counts = (0..t.event_times.len()).map(|k| {
        // subjects with time >= event time k are those in buckets > k
        gone_c += leaving[k];
        gone_a += t.all_leaving[k];
        let h_c = covered - gone_c;
        let h_a = all - gone_a;
        (
            RiskCounts {
                events: events[k],
                at_risk: h_c,
            },
            RiskCounts {
                events: t.all_events[k] - events[k],
                at_risk: h_a - h_c,
            },
        )
    });
    log_rank_from_counts(counts)
}
