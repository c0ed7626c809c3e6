//! Kaplan-Meier product-limit estimation.

use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};

/// Right-continuous step function; `S(t) = 1` before the first point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct KaplanMeier {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for KaplanMeier {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        KaplanMeier::from_points(points)
    }
}

impl From<KaplanMeier> for Vec<(f64, f64)> {
    fn from(km: KaplanMeier) -> Self {
        km.points
    }
}

impl KaplanMeier {
    /// Survival identically one.
    pub fn flat() -> Self {
        KaplanMeier { points: Vec::new() }
    }

    /// Validates ascending times and non-increasing probabilities in [0, 1].
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev_t = f64::NEG_INFINITY;
        let mut prev_s = 1.0;
        for &(t, s) in &points {
            if !(t.is_finite() && t > prev_t) {
                return Err(Error::document(
                    "survival curve times must be finite and strictly ascending",
                ));
            }
            if !(0.0..=1.0).contains(&s) || s > prev_s {
                return Err(Error::document(
                    "survival probabilities must be non-increasing within [0, 1]",
                ));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(KaplanMeier { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&(ti, _)| ti <= t);
        if k == 0 {
            1.0
        } else {
            self.points[k - 1].1
        }
    }

    /// Value just before `t` (left limit).
    pub fn survival_before(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&(ti, _)| ti < t);
        if k == 0 {
            1.0
        } else {
            self.points[k - 1].1
        }
    }

    /// Pointwise mean of several curves over the union of their time points.
    pub fn average(curves: &[&KaplanMeier]) -> KaplanMeier {
        match curves {
            [] => KaplanMeier::flat(),
            [only] => (*only).clone(),
            _ => {
                let mut times: Vec<f64> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
                times.sort_by(f64::total_cmp);
                times.dedup();
                let k = curves.len() as f64;
                let mut prev = 1.0f64;
                let points = times
                    .into_iter()
                    .map(|t| {
                        let s = curves.iter().map(|c| c.survival_at(t)).sum::<f64>() / k;
                        // summation order can wobble by an ulp; keep the curve monotone
                        let s = s.min(prev).clamp(0.0, 1.0);
                        prev = s;
                        (t, s)
                    })
                    .collect();
                KaplanMeier { points }
            }
        }
    }
}

/// Running survival product. Kept as an exact reduced fraction while weights
/// are integral and the terms fit, so unit-weight estimates are correctly rounded.
enum Product {
    Exact { num: u128, den: u128 },
    Float(f64),
}

impl Product {
    fn value(&self) -> f64 {
        match *self {
            Product::Exact { num, den } => num as f64 / den as f64,
            Product::Float(s) => s,
        }
    }

    fn step(&mut self, survivors: f64, at_risk: f64) {
        if let Product::Exact { num, den } = *self {
            if let (Some(a), Some(b)) = (as_integer(survivors), as_integer(at_risk)) {
                if let (Some(n), Some(d)) = (num.checked_mul(a), den.checked_mul(b)) {
                    let g = gcd(n, d).max(1);
                    *self = Product::Exact { num: n / g, den: d / g };
                    return;
                }
            }
        }
        let s = self.value() * (survivors / at_risk);
        *self = Product::Float(s);
    }
}

fn as_integer(x: f64) -> Option<u128> {
    (x >= 0.0 && x.fract() == 0.0 && x < 9.0e15).then_some(x as u128)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Product-limit estimate over a non-empty collection of survival examples.
///
/// At each distinct event time `t`, with `d` (weighted) events among `h`
/// subjects at risk (time >= t), survival is multiplied by `(h - d) / h`.
/// Observations censored at `t` are still at risk at `t`.
pub fn kaplan_meier<'a, I>(examples: I) -> Result<KaplanMeier>
where
    I: IntoIterator<Item = &'a Example>,
{
    product_limit(
        examples
            .into_iter()
            .map(|e| (e.time(), e.is_event(), e.weight))
            .collect(),
    )
}

/// Censoring-distribution estimate `G`: the product-limit estimate with the
/// event indicator flipped.
pub fn censoring_kaplan_meier<'a, I>(examples: I) -> Result<KaplanMeier>
where
    I: IntoIterator<Item = &'a Example>,
{
    product_limit(
        examples
            .into_iter()
            .map(|e| (e.time(), !e.is_event(), e.weight))
            .collect(),
    )
}

/// Product-limit estimate over `(time, event, weight)` observations.
fn product_limit(mut obs: Vec<(f64, bool, f64)>) -> Result<KaplanMeier> {
    if obs.is_empty() {
        return Err(Error::invalid("Kaplan-Meier estimate of an empty collection"));
    }
    if obs.iter().any(|o| !o.0.is_finite()) {
        return Err(Error::invalid("Kaplan-Meier estimate needs survival times"));
    }
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk: f64 = obs.iter().map(|o| o.2).sum();
    let mut product = Product::Exact { num: 1, den: 1 };
    let mut points = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut events = 0.0;
        let mut leaving = 0.0;
        while i < obs.len() && obs[i].0 == t {
            if obs[i].1 {
                events += obs[i].2;
            }
            leaving += obs[i].2;
            i += 1;
        }
        if events > 0.0 {
            product.step(at_risk - events, at_risk);
            points.push((t, product.value().clamp(0.0, 1.0)));
        }
        at_risk -= leaving;
    }
    Ok(KaplanMeier { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    fn obs(t: f64, event: bool) -> Example {
        Example {
            values: vec![],
            label: Label::Status(event),
            survival_time: Some(t),
            weight: 1.0,
        }
    }

    #[test]
    fn all_events() {
        let ex = [obs(1.0, true), obs(2.0, true), obs(3.0, true)];
        let km = kaplan_meier(&ex).unwrap();
        assert_eq!(km.points(), &[(1.0, 2.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 0.0)]);
    }

    #[test]
    fn all_censored_is_flat() {
        let ex = [obs(1.0, false), obs(4.0, false)];
        let km = kaplan_meier(&ex).unwrap();
        assert!(km.points().is_empty());
        assert_eq!(km.survival_at(100.0), 1.0);
    }

    #[test]
    fn censoring_shrinks_risk_set() {
        let ex = [obs(1.0, true), obs(2.0, false), obs(3.0, true)];
        let km = kaplan_meier(&ex).unwrap();
        assert_eq!(km.points(), &[(1.0, 2.0 / 3.0), (3.0, 0.0)]);
        assert_eq!(km.survival_at(2.5), 2.0 / 3.0);
        assert_eq!(km.survival_at(0.5), 1.0);
    }

    #[test]
    fn events_precede_censorings_at_tied_times() {
        // 4 at risk at t=2: one event, one censoring -> S = 3/4
        let ex = [obs(2.0, true), obs(2.0, false), obs(5.0, true), obs(6.0, false)];
        let km = kaplan_meier(&ex).unwrap();
        assert_eq!(km.points()[0], (2.0, 0.75));
        assert_eq!(km.points()[1], (5.0, 0.375));
    }

    #[test]
    fn empty_collection_rejected() {
        assert!(kaplan_meier(std::iter::empty()).is_err());
    }

    #[test]
    fn average_of_curves() {
        let a = KaplanMeier::from_points(vec![(1.0, 0.5)]).unwrap();
        let b = KaplanMeier::from_points(vec![(2.0, 0.0)]).unwrap();
        let avg = KaplanMeier::average(&[&a, &b]);
        assert_eq!(avg.points(), &[(1.0, 0.75), (2.0, 0.25)]);
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(KaplanMeier::from_points(vec![(1.0, 0.5), (2.0, 0.7)]).is_err());
        assert!(KaplanMeier::from_points(vec![(2.0, 0.5), (1.0, 0.4)]).is_err());
    }
}
