//! Binary and graded evaluation of an episode report against a gold set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EpisodeRecord;
use crate::model::{PlaceRef, TimeSpec};

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Exact,
    TooBroad,
    TooNarrow,
    Partial,
    NotRelevant,
}

impl Grade {
    pub fn gain(self) -> f64 {
        match self {
            Grade::Exact => 5.0,
            Grade::TooBroad => 4.0,
            Grade::TooNarrow => 3.0,
            Grade::Partial => 2.0,
            Grade::NotRelevant => 1.0,
        }
    }
}

/// A calendar date or an explicit span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldWhen {
    Date(NaiveDate),
    Span(TimeSpec),
}

impl GoldWhen {
    pub fn dates(&self) -> BTreeSet<NaiveDate> {
        match self {
            GoldWhen::Date(d) => [*d].into(),
            GoldWhen::Span(t) => t.local_dates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldEpisode {
    pub id: String,
    pub when: GoldWhen,
    #[serde(rename = "where")]
    pub place: PlaceRef,
    #[serde(default)]
    pub who: BTreeSet<String>,
}

/// A known non-episode that a prediction may land on, with the grade such a prediction earns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoy {
    pub kind: String,
    pub when: GoldWhen,
    #[serde(rename = "where")]
    pub place: PlaceRef,
    pub grade: Grade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub binary: bool,
    pub grade: Grade,
    #[serde(default)]
    pub w5h: BTreeMap<String, Grade>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_digest: Option<String>,
    pub episodes: Vec<GoldEpisode>,
    #[serde(default)]
    pub decoys: Vec<Decoy>,
    #[serde(default)]
    pub judgments: BTreeMap<String, Judgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold set has no episodes")]
    EmptyGold,
    #[error("predictions and gold refer to different corpora: {0}")]
    MismatchedCorpus(String),
}

/// Average precision over the top `k`, normalized by `min(k, total_relevant)`.
pub fn average_precision_at_k(relevant: &[bool], k: usize, total_relevant: usize) -> f64 {
    let denom = k.min(total_relevant);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Linear-gain DCG with a `log2(i + 1)` discount, ranks starting at 1.
pub fn dcg_at_k(gains: &[f64], k: usize) -> f64 {
    gains.iter().take(k).enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum()
}

/// DCG normalized by the DCG of the same gains sorted descending; 0 when that is 0.
pub fn ndcg_at_k(gains: &[f64], k: usize) -> f64 {
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg_at_k(gains, k) / idcg
    }
}

fn pred_dates(e: &EpisodeRecord) -> BTreeSet<NaiveDate> {
    e.w5h.when.map(|w| w.local_dates()).unwrap_or_default()
}

fn pred_places(e: &EpisodeRecord) -> BTreeSet<&str> {
    e.w5h.places.iter().map(|p| p.canonical_id.as_str()).collect()
}

/// Prediction-to-gold pairs, one to one, assigned greedily from the highest score down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    /// For each prediction (in input order), the index of its gold episode.
    pub gold_for: Vec<Option<usize>>,
    pub n_gold: usize,
}

impl Alignment {
    pub fn matched(&self) -> usize {
        self.gold_for.iter().flatten().count()
    }

    pub fn unmatched_gold(&self) -> usize {
        self.n_gold - self.matched()
    }
}

/// Gold-side lookup by (canonical place, local date).
struct PlaceDayIndex<'a> {
    map: BTreeMap<(&'a str, NaiveDate), Vec<usize>>,
}

impl<'a> PlaceDayIndex<'a> {
    fn new(items: impl Iterator<Item = (&'a PlaceRef, &'a GoldWhen)>) -> Self {
        let mut map: BTreeMap<(&str, NaiveDate), Vec<usize>> = BTreeMap::new();
        for (i, (place, when)) in items.enumerate() {
            for d in when.dates() {
                map.entry((place.canonical_id.as_str(), d)).or_default().push(i);
            }
        }
        PlaceDayIndex { map }
    }

    /// Indices of every item sharing a place and a date with `e`, ascending.
    fn hits(&self, e: &EpisodeRecord) -> BTreeSet<usize> {
        let dates = pred_dates(e);
        let mut out = BTreeSet::new();
        for place in pred_places(e) {
            for d in &dates {
                if let Some(v) = self.map.get(&(place, *d)) {
                    out.extend(v.iter().copied());
                }
            }
        }
        out
    }
}

fn gold_index(gold: &GoldSet) -> PlaceDayIndex<'_> {
    PlaceDayIndex::new(gold.episodes.iter().map(|g| (&g.place, &g.when)))
}

pub fn match_predictions(preds: &[EpisodeRecord], gold: &GoldSet) -> Alignment {
    let index = gold_index(gold);
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; gold.episodes.len()];
    let mut gold_for = vec![None; preds.len()];
    for p in order {
        if let Some(g) = index.hits(&preds[p]).into_iter().find(|&g| !taken[g]) {
            taken[g] = true;
            gold_for[p] = Some(g);
        }
    }
    Alignment { gold_for, n_gold: gold.episodes.len() }
}

/// Matched gold episodes over all gold episodes.
pub fn recall_proxy(a: &Alignment) -> Result<f64, EvalError> {
    if a.n_gold == 0 {
        return Err(EvalError::EmptyGold);
    }
    Ok(a.matched() as f64 / a.n_gold as f64)
}

/// Matched predictions over all predictions; 0 when nothing was predicted.
pub fn precision(a: &Alignment) -> f64 {
    if a.gold_for.is_empty() {
        0.0
    } else {
        a.matched() as f64 / a.gold_for.len() as f64
    }
}

/// Set comparison used for per-dimension grading.
pub fn grade_sets<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> Grade {
    if pred == gold {
        Grade::Exact
    } else if pred.is_empty() || pred.is_disjoint(gold) {
        Grade::NotRelevant
    } else if pred.is_subset(gold) {
        Grade::TooNarrow
    } else {
        Grade::TooBroad
    }
}

pub const DIMENSIONS: [&str; 3] = ["who", "where", "when"];

fn dimension_grades(e: &EpisodeRecord, g: &GoldEpisode) -> BTreeMap<String, Grade> {
    let who: BTreeSet<&str> = e.w5h.who.iter().map(|p| p.id.as_str()).collect();
    let gold_who: BTreeSet<&str> = g.who.iter().map(String::as_str).collect();
    let gold_place: BTreeSet<&str> = [g.place.canonical_id.as_str()].into();
    [
        ("who", grade_sets(&who, &gold_who)),
        ("where", grade_sets(&pred_places(e), &gold_place)),
        ("when", grade_sets(&pred_dates(e), &g.when.dates())),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradedPrediction {
    pub episode_id: String,
    pub score: f64,
    pub gold: Option<String>,
    pub grade: Grade,
    pub w5h: BTreeMap<String, Grade>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtK {
    pub k: usize,
    pub map: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub predictions: usize,
    pub gold: usize,
    pub matched: usize,
    pub recall_proxy: f64,
    pub precision: f64,
    pub episode: Vec<AtK>,
    pub dimensions: BTreeMap<String, Vec<AtK>>,
    pub graded: Vec<GradedPrediction>,
}

/// Grade every prediction in rank order, then compute all metrics at each `k`.
pub fn evaluate(
    preds: &[EpisodeRecord],
    pred_digest: Option<&str>,
    gold: &GoldSet,
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    if let (Some(a), Some(b)) = (pred_digest, gold.corpus_digest.as_deref()) {
        if a != b {
            return Err(EvalError::MismatchedCorpus(format!("corpus digest {a} vs {b}")));
        }
    }
    let ids: BTreeSet<&str> = preds.iter().map(|p| p.episode_id.as_str()).collect();
    if let Some(missing) = gold.judgments.keys().find(|k| !ids.contains(k.as_str())) {
        return Err(EvalError::MismatchedCorpus(format!("judged episode `{missing}` is not among the predictions")));
    }
    let alignment = match_predictions(preds, gold);
    let recall = recall_proxy(&alignment)?;
    let gold_idx = gold_index(gold);
    let decoy_idx = PlaceDayIndex::new(gold.decoys.iter().map(|d| (&d.place, &d.when)));

    let graded: Vec<GradedPrediction> = preds
        .iter()
        .zip(&alignment.gold_for)
        .map(|(p, g)| {
            let (grade, w5h) = match (gold.judgments.get(&p.episode_id), g) {
                (Some(j), _) => (j.grade, j.w5h.clone()),
                (None, Some(g)) => {
                    let ge = &gold.episodes[*g];
                    let grade = if gold_idx.hits(p).len() > 1 { Grade::TooBroad } else { Grade::Exact };
                    (grade, dimension_grades(p, ge))
                }
                (None, None) => {
                    let grade = decoy_idx.hits(p).first().map_or(Grade::NotRelevant, |&d| gold.decoys[d].grade);
                    (grade, DIMENSIONS.iter().map(|d| (d.to_string(), Grade::NotRelevant)).collect())
                }
            };
            GradedPrediction {
                episode_id: p.episode_id.clone(),
                score: p.score,
                gold: g.map(|i| gold.episodes[i].id.clone()),
                grade,
                w5h,
            }
        })
        .collect();

    let total = gold.episodes.len();
    let at_k = |grades: &[Grade]| -> Vec<AtK> {
        let rel: Vec<bool> = grades.iter().map(|g| *g == Grade::Exact).collect();
        let gains: Vec<f64> = grades.iter().map(|g| g.gain()).collect();
        ks.iter().map(|&k| AtK { k, map: average_precision_at_k(&rel, k, total), ndcg: ndcg_at_k(&gains, k) }).collect()
    };
    let episode = at_k(&graded.iter().map(|g| g.grade).collect::<Vec<_>>());
    let dimensions = DIMENSIONS
        .iter()
        .map(|d| {
            let grades: Vec<Grade> =
                graded.iter().map(|g| g.w5h.get(*d).copied().unwrap_or(Grade::NotRelevant)).collect();
            (d.to_string(), at_k(&grades))
        })
        .collect();

    Ok(EvalReport {
        predictions: preds.len(),
        gold: total,
        matched: alignment.matched(),
        recall_proxy: recall,
        precision: precision(&alignment),
        episode,
        dimensions,
        graded,
    })
}

impl EvalReport {
    /// Aligned text tables: one summary block, then one row per metric with a column per k.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "predictions  {}", self.predictions);
        let _ = writeln!(s, "gold         {}", self.gold);
        let _ = writeln!(s, "matched      {}", self.matched);
        let _ = writeln!(s, "recall       {:.4}", self.recall_proxy);
        let _ = writeln!(s, "precision    {:.4}", self.precision);
        s.push('\n');
        let mut header = format!("{:<14}", "metric");
        for a in &self.episode {
            let _ = write!(header, "{:>9}", format!("@{}", a.k));
        }
        let _ = writeln!(s, "{}", header.trim_end());
        let mut row = |name: String, vals: Vec<f64>| {
            let mut line = format!("{name:<14}");
            for v in vals {
                let _ = write!(line, "{v:>9.4}");
            }
            let _ = writeln!(s, "{line}");
        };
        row("MAP".into(), self.episode.iter().map(|a| a.map).collect());
        row("nDCG".into(), self.episode.iter().map(|a| a.ndcg).collect());
        for (dim, rows) in &self.dimensions {
            row(format!("{dim} MAP"), rows.iter().map(|a| a.map).collect());
            row(format!("{dim} nDCG"), rows.iter().map(|a| a.ndcg).collect());
        }
        s
    }
}
