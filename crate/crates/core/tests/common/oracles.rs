//! Independent reference implementations and the suites comparing them with
//! the library.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use snc_core::data::{Dataset, Example, Label, Problem};
use snc_core::inference::{binary_metrics, brier_score, integrated_brier_score_of, rrse};
use snc_core::model::{
    kaplan_meier, CompoundCondition, Conclusion, Defaults, ElementaryCondition, Interval, KaplanMeier, Rule, RuleSet,
};
use snc_core::quality::{log_rank_statistic, ConfusionMatrix, QualityMeasure};
use snc_core::stats::{benjamini_hochberg, fisher_exact, ruleset_similarity};

use super::{random_dataset, rng};

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Two-sided Fisher p-value by enumerating every table with the observed
/// margins in exact integer arithmetic. Tables count as extreme when their
/// probability is at most `1 + 1e-7` times the observed one.
pub fn fisher_oracle(total_p: u64, total_n: u64, p: u64, n: u64) -> f64 {
    let row = p + n;
    let weight = |x: u64| binomial(total_p, x) * binomial(total_n, row - x);
    let lo = row.saturating_sub(total_n);
    let hi = row.min(total_p);
    let observed = weight(p);
    let mut tail: u128 = 0;
    for x in lo..=hi {
        let w = weight(x);
        if w * 10_000_000 <= observed * 10_000_001 {
            tail += w;
        }
    }
    let all = binomial(total_p + total_n, row);
    (tail as f64 / all as f64).min(1.0)
}

/// Every 2x2 table with at most `max_total` examples.
pub fn fisher_suite(max_total: u64, tolerance: f64) -> Result<usize, String> {
    let mut checked = 0;
    for total in 0..=max_total {
        for total_p in 0..=total {
            let total_n = total - total_p;
            for p in 0..=total_p {
                for n in 0..=total_n {
                    let cm = ConfusionMatrix::new(total_p as f64, total_n as f64, p as f64, n as f64);
                    let got = fisher_exact(&cm).map_err(|e| e.to_string())?;
                    let want = fisher_oracle(total_p, total_n, p, n);
                    if (got - want).abs() > tolerance {
                        return Err(format!("P={total_p} N={total_n} p={p} n={n}: {got} vs {want}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Adjusted p-values by the textbook definition: the minimum over all ranks
/// at or above an example's rank of `p * m / rank`, capped at one.
pub fn bh_oracle(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut sorted: Vec<(usize, f64)> = p_values.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = vec![0.0; m];
    for k in 0..m {
        let mut best = f64::INFINITY;
        for (j, &(_, p)) in sorted.iter().enumerate().skip(k) {
            best = best.min(p * m as f64 / (j + 1) as f64);
        }
        out[sorted[k].0] = best.min(1.0);
    }
    out
}

pub fn bh_suite(seed: u64, vectors: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for v in 0..vectors {
        let m = rng.gen_range(1..=30);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    // repeated values exercise ties
                    [0.0, 0.01, 0.05, 1.0][rng.gen_range(0..4)]
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let got = benjamini_hochberg(&p).map_err(|e| e.to_string())?;
        let want = bh_oracle(&p);
        if got != want {
            return Err(format!("vector {v}: {got:?} vs {want:?}"));
        }
    }
    Ok(())
}

fn survival_example(time: f64, event: bool) -> Example {
    Example {
        values: vec![],
        label: Label::Status(event),
        survival_time: Some(time),
        weight: 1.0,
    }
}

pub fn random_survival_sample(rng: &mut impl Rng, max: usize) -> Vec<Example> {
    let k = rng.gen_range(1..=max);
    (0..k)
        .map(|_| survival_example(rng.gen_range(1..=12) as f64, rng.gen_bool(0.65)))
        .collect()
}

/// Product-limit estimate in exact rationals: `(time, S(time))` at every
/// distinct event time.
pub fn km_oracle(sample: &[Example]) -> Vec<(f64, BigRational)> {
    let mut times: Vec<f64> = sample.iter().filter(|e| e.is_event()).map(|e| e.time()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = BigRational::one();
    let mut out = Vec::new();
    for t in times {
        let at_risk = sample.iter().filter(|e| e.time() >= t).count() as i64;
        let deaths = sample.iter().filter(|e| e.is_event() && e.time() == t).count() as i64;
        s *= BigRational::new(BigInt::from(at_risk - deaths), BigInt::from(at_risk));
        out.push((t, s.clone()));
    }
    out
}

pub fn km_suite(seed: u64, samples: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..samples {
        let sample = random_survival_sample(&mut rng, 25);
        let km = kaplan_meier(&sample).map_err(|e| e.to_string())?;
        let want = km_oracle(&sample);
        if km.points().len() != want.len() {
            return Err(format!("sample {k}: {} points vs {}", km.points().len(), want.len()));
        }
        for (&(t, s), (wt, ws)) in km.points().iter().zip(&want) {
            // the library value must be the correctly rounded exact product
            let exact = ws.to_f64().ok_or("rational out of range")?;
            if t != *wt || s != exact {
                return Err(format!("sample {k}: ({t}, {s}) vs ({wt}, {ws} = {exact})"));
            }
        }
    }
    Ok(())
}

/// Log-rank statistic written out term by term over distinct event times.
pub fn log_rank_oracle(covered: &[Example], uncovered: &[Example]) -> f64 {
    let mut times: Vec<f64> = covered
        .iter()
        .chain(uncovered)
        .filter(|e| e.is_event())
        .map(|e| e.time())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let at_risk = |g: &[Example], t: f64| g.iter().filter(|e| e.time() >= t).count() as f64;
    let deaths = |g: &[Example], t: f64| g.iter().filter(|e| e.is_event() && e.time() == t).count() as f64;
    let (mut num, mut var) = (0.0, 0.0);
    for t in times {
        let (h1, h2) = (at_risk(covered, t), at_risk(uncovered, t));
        let h = h1 + h2;
        if h < 2.0 {
            continue;
        }
        let d = deaths(covered, t) + deaths(uncovered, t);
        let expected = h2 * d / h;
        num += deaths(uncovered, t) - expected;
        var += h1 * h2 * d * (h - d) / (h * h * (h - 1.0));
    }
    if var > 0.0 {
        num * num / var
    } else {
        0.0
    }
}

pub fn log_rank_suite(seed: u64, samples: usize, tolerance: f64) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..samples {
        let a = random_survival_sample(&mut rng, 20);
        let b = random_survival_sample(&mut rng, 20);
        let ra: Vec<&Example> = a.iter().collect();
        let rb: Vec<&Example> = b.iter().collect();
        let got = log_rank_statistic(&ra, &rb).map_err(|e| e.to_string())?;
        let want = log_rank_oracle(&a, &b);
        let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        if err > tolerance && (got - want).abs() > 1e-300 {
            return Err(format!("sample {k}: {got} vs {want}"));
        }
    }
    Ok(())
}

fn random_rule(rng: &mut impl Rng, data: &Dataset) -> Rule {
    let attributes = data.schema().attribute_count();
    let mut conditions = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..attributes);
        let c = match data.schema().attribute(a).kind.values() {
            Some(values) => ElementaryCondition::equals(a, rng.gen_range(0..values.len()) as u32),
            None => {
                let v = rng.gen_range(0..8) as f64 + 0.5;
                let iv = if rng.gen_bool(0.5) {
                    Interval::less_than(v)
                } else {
                    Interval::at_least(v)
                };
                ElementaryCondition::within(a, iv)
            }
        };
        conditions.push(c);
    }
    Rule::new(CompoundCondition::new(conditions), Conclusion::Class(0))
}

fn random_ruleset(rng: &mut impl Rng, data: &Dataset) -> RuleSet {
    let rules = (0..rng.gen_range(0..=6)).map(|_| random_rule(rng, data)).collect();
    let classes = data.schema().classes().len();
    RuleSet {
        schema: Arc::new(data.schema().clone()),
        measure: QualityMeasure::C2,
        rules,
        defaults: Defaults::Classification {
            majority: 0,
            class_weights: vec![1.0; classes],
        },
    }
}

/// Agreement over all unordered pairs, checking coverage rule by rule.
pub fn similarity_oracle(a: &RuleSet, b: &RuleSet, data: &Dataset) -> f64 {
    let together =
        |rs: &RuleSet, x: &Example, y: &Example| rs.rules.iter().any(|r| r.premise.covers(x) && r.premise.covers(y));
    let ex = data.examples();
    let (mut agree, mut pairs) = (0u64, 0u64);
    for i in 0..ex.len() {
        for j in i + 1..ex.len() {
            pairs += 1;
            if together(a, &ex[i], &ex[j]) == together(b, &ex[i], &ex[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs as f64
}

pub fn similarity_suite(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..cases {
        let data = random_dataset(&mut rng, Problem::Classification, 50);
        if data.len() < 2 {
            continue;
        }
        let a = random_ruleset(&mut rng, &data);
        let b = random_ruleset(&mut rng, &data);
        let got = ruleset_similarity(&a, &b, &data).map_err(|e| e.to_string())?;
        let want = similarity_oracle(&a, &b, &data);
        if got != want {
            return Err(format!("case {k}: {got} vs {want}"));
        }
    }
    Ok(())
}

/// Mean predictor gives RRSE 1; Gm squared equals SE times SP.
pub fn metric_formula_suite(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..cases {
        let m = rng.gen_range(2..=40);
        let labels: Vec<f64> = (0..m).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let mean = labels.iter().sum::<f64>() / m as f64;
        let r = rrse(&vec![mean; m], &labels).map_err(|e| e.to_string())?;
        if (r - 1.0).abs() > 1e-12 {
            return Err(format!("case {k}: mean predictor RRSE {r}"));
        }
        let actual: Vec<usize> = (0..m)
            .map(|i| {
                if i < 1 {
                    0
                } else if i < 2 {
                    1
                } else {
                    rng.gen_range(0..3)
                }
            })
            .collect();
        let predicted: Vec<usize> = (0..m).map(|_| rng.gen_range(0..3)).collect();
        let bm = binary_metrics(&actual, &predicted, 0).map_err(|e| e.to_string())?;
        let tp = actual
            .iter()
            .zip(&predicted)
            .filter(|(a, p)| **a == 0 && **p == 0)
            .count() as f64;
        let pos = actual.iter().filter(|a| **a == 0).count() as f64;
        let tn = actual
            .iter()
            .zip(&predicted)
            .filter(|(a, p)| **a != 0 && **p != 0)
            .count() as f64;
        let neg = m as f64 - pos;
        if bm.sensitivity != tp / pos || bm.specificity != tn / neg {
            return Err(format!("case {k}: SE/SP {bm:?}"));
        }
        if (bm.g_mean * bm.g_mean - bm.sensitivity * bm.specificity).abs() > 1e-12 {
            return Err(format!("case {k}: Gm^2 != SE*SP for {bm:?}"));
        }
    }
    Ok(())
}

/// Brier score at `t` from its definition.
pub fn brier_oracle(curves: &[KaplanMeier], test: &[Example], g: &KaplanMeier, t: f64) -> f64 {
    let mut sum = 0.0;
    for (s, e) in curves.iter().zip(test) {
        let st = s.survival_at(t);
        if e.time() <= t && e.is_event() {
            let w = g.survival_before(e.time());
            if w > 0.0 {
                sum += st * st / w;
            }
        } else if e.time() > t {
            let w = g.survival_at(t);
            if w > 0.0 {
                sum += (1.0 - st) * (1.0 - st) / w;
            }
        }
    }
    sum / test.len() as f64
}

/// Integral of the Brier score over `[0, tau]` divided by `tau`, evaluating
/// each constant piece at its midpoint.
pub fn ibs_oracle(curves: &[KaplanMeier], test: &[Example], g: &KaplanMeier, tau: f64) -> f64 {
    let mut cuts = vec![0.0, tau];
    for e in test {
        cuts.push(e.time());
    }
    for c in curves.iter().chain(std::iter::once(g)) {
        cuts.extend(c.points().iter().map(|p| p.0));
    }
    cuts.retain(|&t| (0.0..=tau).contains(&t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut area = 0.0;
    for w in cuts.windows(2) {
        area += brier_oracle(curves, test, g, (w[0] + w[1]) / 2.0) * (w[1] - w[0]);
    }
    area / tau
}

pub fn ibs_suite(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..cases {
        let train = random_survival_sample(&mut rng, 25);
        let test = random_survival_sample(&mut rng, 15);
        if !test.iter().any(|e| e.is_event()) {
            continue;
        }
        let flipped: Vec<Example> = train
            .iter()
            .map(|e| survival_example(e.time(), !e.is_event()))
            .collect();
        let g = kaplan_meier(&flipped).map_err(|e| e.to_string())?;
        let curves: Vec<KaplanMeier> = (0..test.len())
            .map(|_| kaplan_meier(&random_survival_sample(&mut rng, 10)).expect("non-empty sample"))
            .collect();
        let refs: Vec<&KaplanMeier> = curves.iter().collect();
        let examples: Vec<&Example> = test.iter().collect();
        let tau = test.iter().map(|e| e.time()).fold(0.0, f64::max);
        let got = integrated_brier_score_of(&refs, &examples, &g, None).map_err(|e| e.to_string())?;
        let want = ibs_oracle(&curves, &test, &g, tau);
        if (got - want).abs() > 1e-12 {
            return Err(format!("case {k}: IBS {got} vs {want}"));
        }
        let t = rng.gen_range(0.0..tau);
        let bs = brier_score(&refs, &examples, &g, t);
        if (bs - brier_oracle(&curves, &test, &g, t)).abs() > 1e-12 {
            return Err(format!("case {k}: Brier score at {t}"));
        }
    }
    Ok(())
}

/// Two-sided p-value of Student's t with an odd number of degrees of
/// freedom, from the closed-form series of the distribution function.
pub fn t_two_sided_odd_df(t: f64, df: u32) -> f64 {
    assert!(df % 2 == 1, "closed form needs odd degrees of freedom");
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let mut series = 0.0;
    if df > 1 {
        let mut term = c;
        series = term;
        let mut k = 1;
        while 2 * k + 1 < df {
            term *= c * c * (2 * k) as f64 / (2 * k + 1) as f64;
            series += term;
            k += 1;
        }
    }
    let a = 2.0 / std::f64::consts::PI * (theta + s * series);
    1.0 - a
}
