//! Episode report file and narrative rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Corpus, StayParams, SNAP_RADIUS_M};
use chrono::{NaiveTime, Timelike};

use crate::model::{PlaceRef, TimeSpec, OWNER_ID};

use super::RunOutput;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyThreshold {
    pub prop: String,
    pub comparator: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub keys: Vec<KeyThreshold>,
    pub attach_discount: f64,
    pub stay_d_max_m: f64,
    pub stay_t_min_minutes: f64,
    pub snap_radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub corpus_digest: String,
    pub thresholds: Thresholds,
    pub evidence_count: usize,
    pub contextual_count: usize,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonEntry {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W5hRecord {
    pub who: Vec<PersonEntry>,
    #[serde(rename = "where")]
    pub places: Vec<PlaceRef>,
    pub when: Option<TimeSpec>,
    pub what: Vec<String>,
    pub why: Option<String>,
    pub how: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceRole {
    Member,
    Attached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub doc_id: String,
    pub step: String,
    pub doc_score: f64,
    pub role: EvidenceRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    pub script: String,
    pub score: f64,
    pub w5h: W5hRecord,
    pub evidence: Vec<EvidenceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub script: String,
    pub run: RunMeta,
    pub episodes: Vec<EpisodeRecord>,
}

impl Report {
    pub fn build(out: &RunOutput, corpus: &Corpus, stay: &StayParams) -> Report {
        let episodes = out
            .episodes
            .iter()
            .map(|c| {
                let mut evidence: Vec<EvidenceRecord> = Vec::new();
                for (role, list) in [(EvidenceRole::Member, &c.members), (EvidenceRole::Attached, &c.attached)] {
                    for e in list {
                        for d in &e.hit.doc_ids {
                            evidence.push(EvidenceRecord {
                                doc_id: d.clone(),
                                step: e.hit.step.clone(),
                                doc_score: e.hit.doc_score,
                                role,
                                group: e.hit.group.clone(),
                            });
                        }
                    }
                }
                evidence.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then_with(|| a.step.cmp(&b.step)));
                EpisodeRecord {
                    episode_id: c.episode_id.clone(),
                    script: c.script.clone(),
                    score: c.score,
                    w5h: W5hRecord {
                        who: c
                            .summary
                            .who
                            .iter()
                            .map(|id| PersonEntry { id: id.clone(), name: corpus.display_name(id) })
                            .collect(),
                        places: c.summary.places.values().cloned().collect(),
                        when: c.summary.when,
                        what: c.summary.what.iter().cloned().collect(),
                        why: c.summary.why.clone(),
                        how: c.summary.how.iter().cloned().collect(),
                    },
                    evidence,
                }
            })
            .collect();
        Report {
            script: out.script.clone(),
            run: RunMeta {
                tool_version: TOOL_VERSION.to_string(),
                corpus_digest: corpus.digest.clone(),
                thresholds: Thresholds {
                    keys: out
                        .keys
                        .iter()
                        .map(|k| KeyThreshold {
                            prop: k.prop_name.clone(),
                            comparator: k.comparator.to_string(),
                            required: k.required,
                        })
                        .collect(),
                    attach_discount: out.attach_discount,
                    stay_d_max_m: stay.d_max_m,
                    stay_t_min_minutes: stay.t_min_minutes,
                    snap_radius_m: SNAP_RADIUS_M,
                },
                evidence_count: out.evidence_count,
                contextual_count: out.contextual_count,
                iterations: out.iterations,
                warnings: out.warnings.clone(),
            },
            episodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Report> {
        serde_json::from_str(text)
    }

    pub fn episode(&self, id: &str) -> Option<&EpisodeRecord> {
        self.episodes.iter().find(|e| e.episode_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no episode `{0}` in report")]
pub struct UnknownEpisode(pub String);

fn render_when(w: &TimeSpec) -> String {
    let (s, e) = (w.start(), w.end().with_timezone(w.start().offset()));
    let whole_day =
        s.time() == NaiveTime::MIN && e.date_naive() == s.date_naive() && e.hour() == 23 && e.minute() == 59;
    if whole_day {
        s.format("%Y-%m-%d").to_string()
    } else if s == e {
        s.format("%Y-%m-%d %H:%M").to_string()
    } else if s.date_naive() == e.date_naive() {
        format!("{} {}-{}", s.format("%Y-%m-%d"), s.format("%H:%M"), e.format("%H:%M"))
    } else {
        format!("{} to {}", s.format("%Y-%m-%d %H:%M"), e.format("%Y-%m-%d %H:%M"))
    }
}

fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Plain-text account of one episode with one line per evidence document.
/// The corpus owner is the implied "you" and is left out of the company.
pub fn explain(report: &Report, episode_id: &str) -> Result<String, UnknownEpisode> {
    let ep = report.episode(episode_id).ok_or_else(|| UnknownEpisode(episode_id.to_string()))?;
    let mut s = String::new();
    let places: Vec<String> = ep.w5h.places.iter().map(|p| p.name.clone()).collect();
    let mut line = String::from("You were");
    if !places.is_empty() {
        let _ = write!(line, " at {}", join_names(&places));
    }
    if let Some(w) = &ep.w5h.when {
        let _ = write!(line, " on {}", render_when(w));
    }
    let who: Vec<String> = ep.w5h.who.iter().filter(|p| p.id != OWNER_ID).map(|p| p.name.clone()).collect();
    if !who.is_empty() {
        let _ = write!(line, " with {}", join_names(&who));
    }
    line.push('.');
    let _ = writeln!(s, "{} ({}, score {:.3})", ep.episode_id, ep.script, ep.score);
    let _ = writeln!(s, "{line}");
    if let Some(why) = &ep.w5h.why {
        let _ = writeln!(s, "Why: {why}");
    }
    if !ep.w5h.how.is_empty() {
        let _ = writeln!(s, "How: {}", ep.w5h.how.join(", "));
    }
    let _ = writeln!(s, "Evidence:");
    for e in &ep.evidence {
        let role = match e.role {
            EvidenceRole::Member => "member",
            EvidenceRole::Attached => "attached",
        };
        let _ = write!(s, "  - doc:{} step={} role={role} score={:.3}", e.doc_id, e.step, e.doc_score);
        if let Some(g) = &e.group {
            let _ = write!(s, " group={g}");
        }
        s.push('\n');
    }
    Ok(s)
}
