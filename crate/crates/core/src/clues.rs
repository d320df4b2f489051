//! Matching clue declarations against a corpus to build the evidence set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::dsl::{ClueDecl, KeywordClue, Lexicon, LexiconError, MetadataPredicate, PlanLeaf, ScriptPlan, Strength};
use crate::ingest::{Corpus, Unit};
use crate::model::PdtRecord;
use crate::score::combine;
use crate::text::{contains_phrase, tokens};

/// True iff the record comes from one of the predicate's sources and the field equals the value, ignoring case.
pub fn match_metadata(record: &PdtRecord, pred: &MetadataPredicate) -> bool {
    let Some(want) = pred.literal() else { return false };
    pred.sources.contains(&record.source)
        && record.field(&pred.field).is_some_and(|v| v.to_lowercase() == want.to_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordMatch {
    pub term: String,
    pub field: String,
    pub weight: f64,
}

/// Tokenized keyword terms, in lexicon order.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSet {
    terms: Vec<(String, Vec<String>)>,
}

impl From<&Lexicon> for TermSet {
    fn from(lex: &Lexicon) -> Self {
        TermSet { terms: lex.terms.iter().map(|t| (t.clone(), tokens(t))).collect() }
    }
}

/// One entry per distinct (term, field) found in the record.
pub fn match_keywords(record: &PdtRecord, clue: &KeywordClue, terms: &TermSet) -> Vec<KeywordMatch> {
    let mut out = Vec::new();
    for fw in &clue.fields {
        let Some(text) = record.what.text_field(&fw.field) else { continue };
        let toks = tokens(text);
        for (term, t) in &terms.terms {
            if contains_phrase(&toks, t) {
                out.push(KeywordMatch { term: term.clone(), field: fw.field.clone(), weight: fw.weight });
            }
        }
    }
    out
}

/// One scored occurrence inside a hit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occurrence {
    pub doc_id: String,
    /// Index of the matched leaf within its step.
    pub leaf: usize,
    pub term: Option<String>,
    pub field: Option<String>,
    pub score: f64,
}

/// Evidence that one unit (document or group) instantiates one top-level step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceHit {
    pub unit_id: String,
    pub doc_ids: Vec<String>,
    pub group: Option<String>,
    pub step: String,
    pub strength: Strength,
    pub occurrences: Vec<Occurrence>,
    pub doc_score: f64,
}

impl EvidenceHit {
    pub fn occurrence_scores(&self) -> Vec<f64> {
        self.occurrences.iter().map(|o| o.score).collect()
    }

    pub fn matched_leaves(&self) -> BTreeSet<usize> {
        self.occurrences.iter().map(|o| o.leaf).collect()
    }
}

/// A plan together with the keyword lists its clues reference.
#[derive(Debug, Clone)]
pub struct Matcher {
    pub plan: ScriptPlan,
    terms: BTreeMap<String, TermSet>,
}

impl Matcher {
    /// Load every keyword file named by the plan, relative to `base_dir`.
    pub fn new(plan: ScriptPlan, base_dir: Option<&Path>) -> Result<Self, LexiconError> {
        let mut lexicons = BTreeMap::new();
        for leaf in plan.steps.iter().flat_map(|s| &s.leaves) {
            if let ClueDecl::Keywords(k) = &leaf.clue {
                if !lexicons.contains_key(&k.file) {
                    let path = base_dir.map(|d| d.join(&k.file)).unwrap_or_else(|| k.file.clone().into());
                    lexicons.insert(k.file.clone(), Lexicon::load(&path)?);
                }
            }
        }
        Ok(Self::with_lexicons(plan, &lexicons))
    }

    /// Use in-memory keyword lists keyed by the file names the plan refers to.
    pub fn with_lexicons(plan: ScriptPlan, lexicons: &BTreeMap<String, Lexicon>) -> Self {
        let terms = lexicons.iter().map(|(k, v)| (k.clone(), TermSet::from(v))).collect();
        Matcher { plan, terms }
    }

    fn leaf_occurrences(&self, leaf_idx: usize, leaf: &PlanLeaf, record: &PdtRecord, out: &mut Vec<Occurrence>) {
        match &leaf.clue {
            ClueDecl::Metadata(m) => {
                if match_metadata(record, m) {
                    out.push(Occurrence {
                        doc_id: record.doc_id.clone(),
                        leaf: leaf_idx,
                        term: None,
                        field: None,
                        score: leaf.base,
                    });
                }
            }
            ClueDecl::Keywords(k) => {
                let Some(terms) = self.terms.get(&k.file) else { return };
                for m in match_keywords(record, k, terms) {
                    out.push(Occurrence {
                        doc_id: record.doc_id.clone(),
                        leaf: leaf_idx,
                        score: leaf.base * m.weight,
                        term: Some(m.term),
                        field: Some(m.field),
                    });
                }
            }
        }
    }

    /// Hits for one unit, one per matched top-level step.
    pub fn match_unit(&self, corpus: &Corpus, unit: &Unit) -> Vec<EvidenceHit> {
        let mut out = Vec::new();
        for step in &self.plan.steps {
            let mut occ = Vec::new();
            for id in &unit.doc_ids {
                let Some(r) = corpus.records.get(id) else { continue };
                for (i, leaf) in step.leaves.iter().enumerate() {
                    self.leaf_occurrences(i, leaf, r, &mut occ);
                }
            }
            // Within a unit a (leaf, term, field) counts once, whichever member carries it.
            let mut seen = BTreeSet::new();
            occ.retain(|o| seen.insert((o.leaf, o.term.clone(), o.field.clone())));
            if occ.is_empty() {
                continue;
            }
            let strength = occ.iter().map(|o| step.leaves[o.leaf].strength).max().unwrap_or(Strength::Contextual);
            let scores: Vec<f64> = occ.iter().map(|o| o.score).collect();
            out.push(EvidenceHit {
                unit_id: unit.id.clone(),
                doc_ids: unit.doc_ids.clone(),
                group: unit.group.clone(),
                step: step.name.clone(),
                strength,
                doc_score: combine(&scores),
                occurrences: occ,
            });
        }
        out
    }
}

/// Evidence set D, sorted by (unit id, step).
pub fn build_evidence_set(corpus: &Corpus, matcher: &Matcher) -> Vec<EvidenceHit> {
    let mut hits: Vec<EvidenceHit> = corpus.units().iter().flat_map(|u| matcher.match_unit(corpus, u)).collect();
    hits.sort_by(|a, b| a.unit_id.cmp(&b.unit_id).then_with(|| a.step.cmp(&b.step)));
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_keyword_file, parse_library, FieldWeight, ValueRef};
    use crate::ingest::{preprocess, IngestParams, RawCorpus};
    use crate::model::SourceKind;

    fn record(json: &str) -> PdtRecord {
        crate::model::validate_record(&serde_json::from_str(json).unwrap()).unwrap()
    }

    fn bank(category: &str) -> PdtRecord {
        record(&format!(
            r#"{{"doc_id":"b1","source":"BankTransaction","when":"2019-03-14T19:32:00-05:00","who":{{"payer":["me"]}},"what":{{"amount":42.5,"category":"{category}"}},"where":{{"canonical_id":"aurora","name":"Cafe Aurora"}}}}"#
        ))
    }

    fn pred(value: &str, sources: &[SourceKind]) -> MetadataPredicate {
        MetadataPredicate {
            field: "what.category".into(),
            value: ValueRef::Literal(value.into()),
            sources: sources.to_vec(),
        }
    }

    #[test]
    fn metadata_category() {
        assert!(match_metadata(&bank("Restaurant"), &pred("Restaurant", &[SourceKind::BankTransaction])));
        assert!(match_metadata(&bank("restaurant"), &pred("Restaurant", &[SourceKind::BankTransaction])));
        assert!(!match_metadata(&bank("Restaurant"), &pred("Supermarket", &[SourceKind::BankTransaction])));
        assert!(!match_metadata(&bank("Restaurant"), &pred("Restaurant", &[SourceKind::Email])));
    }

    fn clue() -> KeywordClue {
        KeywordClue {
            file: "k".into(),
            fields: vec![
                FieldWeight { field: "subject".into(), weight: 1.0 },
                FieldWeight { field: "body".into(), weight: 0.6 },
            ],
        }
    }

    fn email(subject: &str, body: &str) -> PdtRecord {
        record(&format!(
            r#"{{"doc_id":"e1","source":"Email","when":"2019-03-14T10:00:00Z","who":{{"from":["a"]}},"what":{{"subject":"{subject}","body":"{body}"}}}}"#
        ))
    }

    #[test]
    fn keyword_subject() {
        let terms = TermSet::from(&parse_keyword_file("dinner\nlunch\nrestaurant\n"));
        let m = match_keywords(&email("Dinner Friday?", ""), &clue(), &terms);
        assert_eq!(m, vec![KeywordMatch { term: "dinner".into(), field: "subject".into(), weight: 1.0 }]);
    }

    #[test]
    fn keyword_dedup_and_empty() {
        let terms = TermSet::from(&parse_keyword_file("lunch\n"));
        assert_eq!(match_keywords(&email("", "lunch then more lunch"), &clue(), &terms).len(), 1);
        assert!(match_keywords(&bank("Restaurant"), &clue(), &terms).is_empty());
    }

    const SCRIPT: &str = r#"
script Pay<T> {
  goal: "pay"
  action card { metadata what.category = T on BankTransaction }
}
script Out {
  goal: "eat"
  prop w: when
  use Pay<restaurant> as pay
  action talk { keywords "kw" in subject:1.0 body:0.6 }
  strong pay
  weak talk
  key w required time_window(6)
}
"#;

    fn matcher() -> Matcher {
        let lib = parse_library(SCRIPT).unwrap();
        let mut lex = BTreeMap::new();
        lex.insert("kw".to_string(), parse_keyword_file("dinner\nrestaurant\n"));
        Matcher::with_lexicons(lib.plan("Out").unwrap(), &lex)
    }

    fn corpus(records: Vec<PdtRecord>) -> Corpus {
        preprocess(RawCorpus { records, ..Default::default() }, &IngestParams::default()).unwrap()
    }

    #[test]
    fn bank_hit_scores_base() {
        let d = build_evidence_set(&corpus(vec![bank("Restaurant")]), &matcher());
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].step.as_str(), d[0].strength, d[0].doc_score), ("pay", Strength::Strong, 0.8));
    }

    #[test]
    fn keyword_hit_combines_fields() {
        let d = build_evidence_set(&corpus(vec![email("dinner?", "that restaurant")]), &matcher());
        assert_eq!(d[0].occurrence_scores(), vec![0.3, 0.3 * 0.6]);
        assert!((d[0].doc_score - 0.426).abs() < 1e-12);
    }

    #[test]
    fn nothing_matches() {
        assert!(build_evidence_set(&corpus(vec![bank("Supermarket")]), &matcher()).is_empty());
    }
}
