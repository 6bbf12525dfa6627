//! Interval-scale checks on rank metrics over enumerated SERP states.
//!
//! A SERP state is a tuple of relevance grades. Metric values are computed as
//! exact rationals so spacing and solvability are decided without floating
//! point. Differences are `delta(a, b) = v(a) - v(b)`; solvability requires,
//! for every `0 <= delta(c, d) <= delta(a, b)`, values `x`, `y` with
//! `v(a) - v(x) = delta(c, d) = v(y) - v(b)`. Because the condition depends
//! only on values, it is checked over the distinct value set.

use std::collections::BTreeSet;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::{Gain, MetricKind, MetricSpec};

pub type Rational = Ratio<i128>;

pub const DEFAULT_STATE_CAP: usize = 1 << 20;
pub const VALUE_SET_CAP: usize = 512;

/// All `g^n` grade tuples of length `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSpace {
    pub depth: usize,
    pub grades: u32,
    /// Descending lexicographic order: `(g-1, ..., g-1)` first, all zeros last.
    pub states: Vec<Vec<u32>>,
}

pub fn enumerate_states(depth: usize, grades: u32, cap: usize) -> Result<StateSpace> {
    if depth == 0 {
        return Err(Error::Argument("depth must be at least 1".into()));
    }
    if grades < 2 {
        return Err(Error::Argument("need at least two grades".into()));
    }
    let size = (grades as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::Resource(format!(
            "{grades}^{depth} = {} states exceeds the cap of {cap}",
            if size == u128::MAX { "overflowing".to_string() } else { size.to_string() }
        )));
    }
    let size = size as usize;
    let states = (0..size)
        .rev()
        .map(|mut code| {
            let mut state = vec![0u32; depth];
            for slot in state.iter_mut().rev() {
                *slot = (code % grades as usize) as u32;
                code /= grades as usize;
            }
            state
        })
        .collect();
    Ok(StateSpace { depth, grades, states })
}

fn gain(g: Gain, grade: u32) -> Rational {
    match g {
        Gain::Exponential => Rational::from_integer((1i128 << grade) - 1),
        Gain::Linear => Rational::from_integer(grade as i128),
    }
}

/// Exact metric value of one state. The ideal for NCG and the relevant count
/// for AP come from the state's own grades.
pub fn metric_value(state: &[u32], spec: &MetricSpec) -> Result<Rational> {
    let k = spec.cutoff.unwrap_or(state.len()).min(state.len());
    let top = &state[..k];
    let threshold = spec.threshold.unwrap_or(1);
    Ok(match spec.kind {
        MetricKind::RR => top
            .iter()
            .position(|&g| g >= threshold)
            .map_or_else(Rational::zero, |i| Rational::new(1, i as i128 + 1)),
        MetricKind::AP => {
            let total = state.iter().filter(|&&g| g >= threshold).count() as i128;
            if total == 0 {
                return Ok(Rational::zero());
            }
            let mut hits = 0i128;
            let mut sum = Rational::zero();
            for (i, _) in top.iter().enumerate().filter(|(_, &g)| g >= threshold) {
                hits += 1;
                sum += Rational::new(hits, i as i128 + 1);
            }
            sum / Rational::from_integer(total)
        }
        MetricKind::NCG => {
            let mut ideal = state.to_vec();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let best: Rational = ideal[..k].iter().map(|&g| gain(spec.gain, g)).sum();
            if best.is_zero() {
                return Ok(Rational::zero());
            }
            top.iter().map(|&g| gain(spec.gain, g)).sum::<Rational>() / best
        }
        MetricKind::NDCG => {
            return Err(Error::Argument(
                "ndcg has logarithmic discounts and no exact rational value set; use rr, map or ncg".into(),
            ))
        }
    })
}

/// Metric value of every state, in state order.
pub fn metric_values(space: &StateSpace, spec: &MetricSpec) -> Result<Vec<Rational>> {
    space.states.iter().map(|s| metric_value(s, spec)).collect()
}

/// Distinct metric values over the space, ascending.
pub fn metric_value_set(space: &StateSpace, spec: &MetricSpec) -> Result<Vec<Rational>> {
    let set: BTreeSet<Rational> = metric_values(space, spec)?.into_iter().collect();
    Ok(set.into_iter().collect())
}

/// A failing quadruple for the solvability condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    #[serde(serialize_with = "ser_rational")]
    pub a: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub b: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub c: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub d: Rational,
    /// `c - d`, the difference that cannot be laid off from `a` or `b`.
    #[serde(serialize_with = "ser_rational")]
    pub delta: Rational,
    /// The required values `a - delta` and/or `b + delta` that are absent.
    #[serde(serialize_with = "ser_rationals")]
    pub missing: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaleCheckResult {
    #[serde(serialize_with = "ser_rationals")]
    pub value_set: Vec<Rational>,
    pub equi_spaced: bool,
    /// Distinct gaps between consecutive values, ascending.
    #[serde(serialize_with = "ser_rationals")]
    pub gaps: Vec<Rational>,
    pub solvable: bool,
    pub counterexample: Option<Counterexample>,
}

/// `p/q` with the two-decimal rendering alongside, e.g. `1/6 (0.17)`.
pub fn render(r: &Rational) -> String {
    format!("{} ({:.2})", r, r.to_f64().unwrap_or(f64::NAN))
}

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

fn ser_rationals<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

pub fn solvability_check(values: &[Rational]) -> Result<ScaleCheckResult> {
    let set: BTreeSet<Rational> = values.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::Argument("value set is empty".into()));
    }
    if set.len() > VALUE_SET_CAP {
        return Err(Error::Resource(format!(
            "{} distinct values exceeds the cap of {VALUE_SET_CAP}",
            set.len()
        )));
    }
    let sorted: Vec<Rational> = set.iter().copied().collect();
    let gaps: BTreeSet<Rational> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let equi_spaced = gaps.len() <= 1;

    let deltas: BTreeSet<Rational> = sorted
        .iter()
        .enumerate()
        .flat_map(|(i, hi)| sorted[..i].iter().map(move |lo| hi - lo))
        .collect();
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut counterexample = None;
    for &delta in &deltas {
        // a - delta must exist whenever some b <= a - delta, i.e. a - delta >= min;
        // symmetrically b + delta must exist whenever b + delta <= max.
        let from_above = sorted.iter().find(|&&a| a - delta >= lo && !set.contains(&(a - delta)));
        let from_below = sorted.iter().find(|&&b| b + delta <= hi && !set.contains(&(b + delta)));
        if from_above.is_none() && from_below.is_none() {
            continue;
        }
        counterexample = Some(witness(&set, &sorted, delta));
        break;
    }
    Ok(ScaleCheckResult {
        value_set: sorted,
        equi_spaced,
        gaps: gaps.into_iter().collect(),
        solvable: counterexample.is_none(),
        counterexample,
    })
}

/// Widest failing `(a, b)` for `delta`, scanning `a` from the top and `b` from
/// the bottom.
fn witness(set: &BTreeSet<Rational>, sorted: &[Rational], delta: Rational) -> Counterexample {
    let (c, d) = sorted
        .iter()
        .rev()
        .find_map(|&c| set.contains(&(c - delta)).then_some((c, c - delta)))
        .expect("delta is a realized difference");
    for &a in sorted.iter().rev() {
        for &b in sorted.iter().take_while(|&&b| a - b >= delta) {
            let missing: Vec<Rational> = [b + delta, a - delta]
                .into_iter()
                .filter(|v| !set.contains(v))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !missing.is_empty() {
                return Counterexample {
                    a,
                    b,
                    c,
                    d,
                    delta,
                    missing,
                };
            }
        }
    }
    unreachable!("a failing pair exists for this delta")
}

/// Brute-force check of the weak-order, sign-reversal and additivity axioms
/// for differences over a (small) value set. Returns the names of violated
/// axioms; numeric value sets should never violate any.
pub fn check_difference_axioms(values: &[Rational]) -> Vec<&'static str> {
    let v = values;
    let delta = |a: usize, b: usize| v[a] - v[b];
    let n = v.len();
    let mut violated = BTreeSet::new();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    for &(a, b) in &pairs {
        for &(c, d) in &pairs {
            let (x, y) = (delta(a, b), delta(c, d));
            if !(x <= y || y <= x) {
                violated.insert("weak order: completeness");
            }
            for &(e, f) in &pairs {
                if x <= y && y <= delta(e, f) && x > delta(e, f) {
                    violated.insert("weak order: transitivity");
                }
            }
            if x <= y && delta(d, c) > delta(b, a) {
                violated.insert("sign reversal");
            }
        }
    }
    for a1 in 0..n {
        for b1 in 0..n {
            for c1 in 0..n {
                for a2 in 0..n {
                    for b2 in 0..n {
                        for c2 in 0..n {
                            if delta(a1, b1) <= delta(a2, b2)
                                && delta(b1, c1) <= delta(b2, c2)
                                && delta(a1, c1) > delta(a2, c2)
                            {
                                violated.insert("additivity");
                            }
                        }
                    }
                }
            }
        }
    }
    violated.into_iter().collect()
}

/// Convenience wrapper: enumerate, evaluate and check.
pub fn scale_check(depth: usize, grades: u32, spec: &MetricSpec, cap: usize) -> Result<ScaleCheckResult> {
    let space = enumerate_states(depth, grades, cap)?;
    solvability_check(&metric_value_set(&space, spec)?)
}
