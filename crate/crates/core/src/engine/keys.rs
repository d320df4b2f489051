use serde::Serialize;

use crate::dsl::{Comparator, KeyDecl};
use crate::model::W5hSummary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyResult {
    pub prop: String,
    pub comparator: String,
    pub required: bool,
    /// `None` when either side lacks the dimension.
    pub value: Option<bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeDecision {
    pub a: String,
    pub b: String,
    pub key_results: Vec<KeyResult>,
    pub merged: bool,
}

/// Compare two summaries on one key dimension. `None` if either side is missing it.
pub fn compare(c: &Comparator, a: &W5hSummary, b: &W5hSummary) -> Option<bool> {
    match *c {
        Comparator::TimeWindow(h) => {
            let (x, y) = (a.when?, b.when?);
            Some(x.gap(&y).num_milliseconds() as f64 <= h * 3_600_000.0)
        }
        Comparator::ExactPlace => {
            if a.places.is_empty() || b.places.is_empty() {
                return None;
            }
            Some(a.places.keys().any(|k| b.places.contains_key(k)))
        }
        Comparator::GeoRadius(r) => {
            let ga: Vec<_> = a.places.values().filter_map(|p| p.geo).collect();
            let gb: Vec<_> = b.places.values().filter_map(|p| p.geo).collect();
            if ga.is_empty() || gb.is_empty() {
                return None;
            }
            Some(ga.iter().any(|x| gb.iter().any(|y| x.distance_m(y) <= r)))
        }
        Comparator::WhoJaccard(t) => {
            if a.who.is_empty() || b.who.is_empty() {
                return None;
            }
            let inter = a.who.intersection(&b.who).count() as f64;
            let union = a.who.union(&b.who).count() as f64;
            Some(inter / union >= t)
        }
    }
}

/// Evaluate every key. A missing dimension passes only for optional keys; the
/// pair merges iff every required key passes.
pub fn evaluate_keys(a: &W5hSummary, b: &W5hSummary, keys: &[KeyDecl]) -> (Vec<KeyResult>, bool) {
    let results: Vec<KeyResult> = keys
        .iter()
        .map(|k| {
            let value = compare(&k.comparator, a, b);
            KeyResult {
                prop: k.prop_name.clone(),
                comparator: k.comparator.to_string(),
                required: k.required,
                value,
                passed: value.unwrap_or(!k.required),
            }
        })
        .collect();
    let merged = results.iter().filter(|r| r.required).all(|r| r.passed);
    (results, merged)
}

/// True iff every required key passes; short-circuits.
pub(crate) fn required_pass(a: &W5hSummary, b: &W5hSummary, keys: &[KeyDecl]) -> bool {
    keys.iter().filter(|k| k.required).all(|k| compare(&k.comparator, a, b) == Some(true))
}
