//! Episode construction: seed candidates from strong and weak evidence, merge
//! key-compatible candidates to a fixed point, and attach contextual evidence.

mod extract;
mod keys;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::clues::{build_evidence_set, EvidenceHit, Matcher};
use crate::dsl::{Comparator, KeyDecl, LexiconError, PlanError, ScriptLibrary, ScriptPlan};
use crate::ingest::Corpus;
use crate::model::{TimeSpec, W5hSummary};
use crate::score::combine;
use crate::unionfind::UnionFind;

pub use crate::score::{hooper, ScoreOutOfRange};
pub use extract::hit_w5h;
pub use keys::{compare, evaluate_keys, KeyResult, MergeDecision};
pub use report::{explain, EpisodeRecord, EvidenceRecord, Report, Thresholds, UnknownEpisode};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// Threshold overrides applied on top of the script's own keys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EngineConfig {
    pub time_window_h: Option<f64>,
    pub geo_radius_m: Option<f64>,
}

impl EngineConfig {
    pub fn apply(&self, keys: &[KeyDecl]) -> Vec<KeyDecl> {
        keys.iter()
            .map(|k| {
                let comparator = match k.comparator {
                    Comparator::TimeWindow(h) => Comparator::TimeWindow(self.time_window_h.unwrap_or(h)),
                    Comparator::GeoRadius(m) => Comparator::GeoRadius(self.geo_radius_m.unwrap_or(m)),
                    c => c,
                };
                KeyDecl { comparator, ..k.clone() }
            })
            .collect()
    }
}

/// A hit together with the W5H it contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub hit: EvidenceHit,
    pub w5h: W5hSummary,
    /// The hit's W5H, falling back to the documents' own time and place; used to attach.
    probe: W5hSummary,
}

impl Evidence {
    pub fn new(hit: EvidenceHit, plan: &ScriptPlan, corpus: &Corpus) -> Self {
        let w5h = hit_w5h(&hit, plan, corpus);
        let mut probe = w5h.clone();
        let records = hit.doc_ids.iter().filter_map(|id| corpus.records.get(id));
        for r in records {
            if w5h.when.is_none() {
                probe.when = Some(probe.when.map_or(r.when, |w| w.hull(&r.when)));
            }
            if w5h.places.is_empty() {
                if let Some(p) = &r.place {
                    probe.places.insert(p.canonical_id.clone(), p.clone());
                }
            }
        }
        Evidence { hit, w5h, probe }
    }
}

/// A candidate instance of a script.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEpisode {
    pub episode_id: String,
    pub script: String,
    pub members: Vec<Evidence>,
    pub attached: Vec<Evidence>,
    pub summary: W5hSummary,
    pub score: f64,
    pub instantiated_steps: BTreeSet<String>,
}

impl CandidateEpisode {
    fn new(script: &str, members: Vec<Evidence>, attached: Vec<Evidence>, discount: f64) -> Self {
        let mut c = CandidateEpisode {
            episode_id: String::new(),
            script: script.to_string(),
            members,
            attached,
            summary: W5hSummary::default(),
            score: 0.0,
            instantiated_steps: BTreeSet::new(),
        };
        c.rebuild(discount);
        c
    }

    fn rebuild(&mut self, discount: f64) {
        let key = |e: &Evidence| (e.hit.unit_id.clone(), e.hit.step.clone());
        self.members.sort_by_key(key);
        self.attached.sort_by_key(key);
        let min_doc = self.members.iter().flat_map(|e| &e.hit.doc_ids).min().cloned().unwrap_or_default();
        self.episode_id = format!("{}:{}", self.script, min_doc);
        self.summary = W5hSummary::default();
        for e in self.members.iter().chain(&self.attached) {
            self.summary.union_with(&e.w5h);
        }
        let scores: Vec<f64> = self
            .members
            .iter()
            .map(|e| e.hit.doc_score)
            .chain(self.attached.iter().map(|e| e.hit.doc_score * discount))
            .collect();
        self.score = combine(&scores);
        self.instantiated_steps = self.members.iter().chain(&self.attached).map(|e| e.hit.step.clone()).collect();
    }

    /// Every record id contributing to the episode.
    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.members.iter().chain(&self.attached).flat_map(|e| e.hit.doc_ids.iter().map(String::as_str)).collect()
    }

    pub fn member_scores(&self) -> Vec<f64> {
        self.members.iter().map(|e| e.hit.doc_score).collect()
    }
}

/// One merge performed by the loop, with snapshots of the parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    pub episode_id: String,
    pub score: f64,
    pub summary: W5hSummary,
    pub parts: Vec<(String, f64, W5hSummary)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub script: String,
    pub episodes: Vec<CandidateEpisode>,
    /// Size of the evidence set D.
    pub evidence_count: usize,
    /// Hits on contextual steps only.
    pub contextual_count: usize,
    pub iterations: usize,
    pub merges: Vec<MergeEvent>,
    pub warnings: Vec<String>,
    pub keys: Vec<KeyDecl>,
    pub attach_discount: f64,
}

impl RunOutput {
    pub fn iteration_bound(&self) -> usize {
        self.evidence_count + self.contextual_count
    }
}

/// One candidate per unit that carries strong or weak evidence. Contextual hits
/// on a seeding unit are attached to it directly; the rest are returned pending.
pub fn seed_candidates(
    d: &[EvidenceHit],
    plan: &ScriptPlan,
    corpus: &Corpus,
) -> (Vec<CandidateEpisode>, Vec<Evidence>) {
    let discount = plan.script.attach_discount();
    let mut by_unit: BTreeMap<&str, Vec<&EvidenceHit>> = BTreeMap::new();
    for h in d {
        by_unit.entry(&h.unit_id).or_default().push(h);
    }
    let mut cands = Vec::new();
    let mut pending = Vec::new();
    for hits in by_unit.into_values() {
        let (seeding, ctx): (Vec<&EvidenceHit>, Vec<&EvidenceHit>) = hits.into_iter().partition(|h| h.strength.seeds());
        let ctx: Vec<Evidence> = ctx.into_iter().map(|h| Evidence::new(h.clone(), plan, corpus)).collect();
        if seeding.is_empty() {
            pending.extend(ctx);
        } else {
            let members = seeding.into_iter().map(|h| Evidence::new(h.clone(), plan, corpus)).collect();
            cands.push(CandidateEpisode::new(&plan.script.name, members, ctx, discount));
        }
    }
    cands.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    (cands, pending)
}

fn required_window_ms(keys: &[KeyDecl]) -> Option<f64> {
    keys.iter().filter(|k| k.required).find_map(|k| match k.comparator {
        Comparator::TimeWindow(h) => Some(h * 3_600_000.0),
        _ => None,
    })
}

fn span_ms(w: &TimeSpec) -> (i64, i64) {
    (w.start().timestamp_millis(), w.end().timestamp_millis())
}

/// Collapse connected components of the key-compatibility relation.
pub fn merge_step(
    cands: Vec<CandidateEpisode>,
    keys: &[KeyDecl],
    discount: f64,
    log: &mut Vec<MergeEvent>,
) -> (Vec<CandidateEpisode>, bool) {
    let n = cands.len();
    let mut uf = UnionFind::new(n);
    match required_window_ms(keys) {
        Some(window) => {
            let mut order: Vec<(i64, i64, usize)> = (0..n)
                .filter_map(|i| {
                    cands[i].summary.when.map(|w| {
                        let (s, e) = span_ms(&w);
                        (s, e, i)
                    })
                })
                .collect();
            order.sort();
            for (x, &(_, end_i, i)) in order.iter().enumerate() {
                for &(start_j, _, j) in &order[x + 1..] {
                    if (start_j - end_i) as f64 > window {
                        break;
                    }
                    if uf.find(i) != uf.find(j) && keys::required_pass(&cands[i].summary, &cands[j].summary, keys) {
                        uf.union(i, j);
                    }
                }
            }
        }
        None => {
            for i in 0..n {
                for j in i + 1..n {
                    if uf.find(i) != uf.find(j) && keys::required_pass(&cands[i].summary, &cands[j].summary, keys) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let groups = uf.groups();
    if groups.len() == n {
        return (cands, false);
    }
    let mut slots: Vec<Option<CandidateEpisode>> = cands.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let mut parts: Vec<CandidateEpisode> = g.iter().filter_map(|&i| slots[i].take()).collect();
        if parts.len() == 1 {
            out.extend(parts);
            continue;
        }
        parts.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
        let snapshot: Vec<(String, f64, W5hSummary)> =
            parts.iter().map(|p| (p.episode_id.clone(), p.score, p.summary.clone())).collect();
        let script = parts[0].script.clone();
        let (mut members, mut attached) = (Vec::new(), Vec::new());
        for p in parts {
            members.extend(p.members);
            attached.extend(p.attached);
        }
        let merged = CandidateEpisode::new(&script, members, attached, discount);
        log.push(MergeEvent {
            episode_id: merged.episode_id.clone(),
            score: merged.score,
            summary: merged.summary.clone(),
            parts: snapshot,
        });
        out.push(merged);
    }
    out.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    (out, true)
}

/// Attach each pending contextual hit to the best compatible candidate, judged
/// against the candidates as they stood before this pass. A hit with a place
/// only attaches where the where key holds; a placeless hit is judged on time.
pub fn attach_secondary(
    cands: &mut [CandidateEpisode],
    pending: &mut Vec<Evidence>,
    keys: &[KeyDecl],
    discount: f64,
) -> bool {
    let window_h = keys
        .iter()
        .find_map(|k| match k.comparator {
            Comparator::TimeWindow(h) => Some(h),
            _ => None,
        })
        .unwrap_or(f64::INFINITY);
    let time_cmp = Comparator::TimeWindow(window_h);
    let where_key = keys.iter().find(|k| k.comparator.dimension() == crate::dsl::Dimension::Where);

    let mut order: Vec<(i64, usize)> =
        (0..cands.len()).filter_map(|i| cands[i].summary.when.map(|w| (span_ms(&w).0, i))).collect();
    order.sort();
    let longest =
        cands.iter().filter_map(|c| c.summary.when).map(|w| span_ms(&w)).map(|(s, e)| e - s).max().unwrap_or(0);
    let window_ms = if window_h.is_finite() { (window_h * 3_600_000.0) as i64 } else { i64::MAX / 4 };

    let mut assign: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in pending.iter().enumerate() {
        let Some(pw) = p.probe.when else { continue };
        let (ps, pe) = span_ms(&pw);
        let lo = order.partition_point(|&(s, _)| s < ps.saturating_sub(window_ms).saturating_sub(longest));
        let hi = order.partition_point(|&(s, _)| s <= pe.saturating_add(window_ms));
        let mut best: Option<usize> = None;
        for &(_, ci) in &order[lo..hi] {
            let c = &cands[ci];
            if compare(&time_cmp, &c.summary, &p.probe) != Some(true) {
                continue;
            }
            if let Some(k) = where_key {
                if !p.probe.places.is_empty() && compare(&k.comparator, &c.summary, &p.probe) != Some(true) {
                    continue;
                }
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let cb = &cands[b];
                    c.score > cb.score || (c.score == cb.score && c.episode_id < cb.episode_id)
                }
            };
            if better {
                best = Some(ci);
            }
        }
        if let Some(ci) = best {
            assign.push((ci, pi));
        }
    }
    if assign.is_empty() {
        return false;
    }
    let mut taken: Vec<Option<Evidence>> = pending.drain(..).map(Some).collect();
    let mut touched = BTreeSet::new();
    for (ci, pi) in assign {
        if let Some(e) = taken[pi].take() {
            cands[ci].attached.push(e);
            touched.insert(ci);
        }
    }
    pending.extend(taken.into_iter().flatten());
    for ci in touched {
        cands[ci].rebuild(discount);
    }
    true
}

fn order_warnings(ep: &CandidateEpisode, ordering: &[(String, String)]) -> Vec<String> {
    let mut spans: BTreeMap<&str, (TimeSpec, TimeSpec)> = BTreeMap::new();
    for e in ep.members.iter().chain(&ep.attached) {
        if let Some(w) = e.probe.when {
            spans
                .entry(&e.hit.step)
                .and_modify(|(lo, hi)| {
                    if w.start() < lo.start() {
                        *lo = w;
                    }
                    if w.end() > hi.end() {
                        *hi = w;
                    }
                })
                .or_insert((w, w));
        }
    }
    ordering
        .iter()
        .filter_map(|(a, b)| {
            let (first_a, _) = spans.get(a.as_str())?;
            let (_, last_b) = spans.get(b.as_str())?;
            (first_a.start() > last_b.end()).then(|| format!("{}: `{a}` observed only after `{b}`", ep.episode_id))
        })
        .collect()
}

/// Run the construction loop for one matcher over a corpus.
pub fn run_matcher(matcher: &Matcher, corpus: &Corpus, config: &EngineConfig) -> RunOutput {
    let plan = &matcher.plan;
    let keys = config.apply(&plan.script.keys);
    let discount = plan.script.attach_discount();
    let d = build_evidence_set(corpus, matcher);
    let contextual_count = d.iter().filter(|h| !h.strength.seeds()).count();
    let (mut cands, mut pending) = seed_candidates(&d, plan, corpus);
    let mut merges = Vec::new();
    let mut iterations = 0;
    if !d.is_empty() {
        loop {
            iterations += 1;
            let (next, merged) = merge_step(cands, &keys, discount, &mut merges);
            cands = next;
            let attached = attach_secondary(&mut cands, &mut pending, &keys, discount);
            if !merged && !attached {
                break;
            }
        }
    }
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| {
                let (sa, sb) = (a.summary.when.map(|w| w.start()), b.summary.when.map(|w| w.start()));
                match (sa, sb) {
                    (Some(x), Some(y)) => x.cmp(&y),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                }
            })
            .then_with(|| a.episode_id.cmp(&b.episode_id))
    });
    let warnings = cands.iter().flat_map(|c| order_warnings(c, &plan.script.ordering)).collect();
    RunOutput {
        script: plan.script.name.clone(),
        episodes: cands,
        evidence_count: d.len(),
        contextual_count,
        iterations,
        merges,
        warnings,
        keys,
        attach_discount: discount,
    }
}

/// Plan `script_name`, load its keyword lists and run it over `corpus`.
pub fn run(
    library: &ScriptLibrary,
    script_name: &str,
    corpus: &Corpus,
    config: &EngineConfig,
) -> Result<RunOutput, EngineError> {
    let plan = library.plan(script_name).map_err(|e| match e {
        PlanError::UnknownScript(s) => EngineError::UnknownScript(s),
        other => EngineError::Plan(other),
    })?;
    let matcher = Matcher::new(plan, library.base_dir.as_deref())?;
    Ok(run_matcher(&matcher, corpus, config))
}
