use std::collections::BTreeSet;

use crate::clues::EvidenceHit;
use crate::dsl::{Dimension, PlanLeaf, ScriptPlan};
use crate::ingest::Corpus;
use crate::model::{PdtRecord, Role, TimeSpec, W5hSummary};

/// Top-level props a leaf prop reaches through the lift chain, with the leaf prop's role filter.
fn reached(leaf: &PlanLeaf, plan: &ScriptPlan) -> Vec<(Dimension, Vec<Role>)> {
    let mut out = Vec::new();
    for prop in &leaf.props {
        let mut names: BTreeSet<&str> = [prop.name.as_str()].into();
        for level in &leaf.lifts {
            names = level
                .iter()
                .filter(|r| names.contains(r.child_prop.as_str()))
                .map(|r| r.parent_prop.as_str())
                .collect();
        }
        for n in names {
            if let Some(p) = plan.script.prop(n) {
                out.push((p.dimension, prop.roles.clone()));
            }
        }
    }
    out
}

fn unit_when(records: &[&PdtRecord], corpus: &Corpus) -> Option<TimeSpec> {
    let mentioned =
        records.iter().filter_map(|r| corpus.annotations.get(&r.doc_id)).find_map(|a| a.dates.first()).map(|d| d.span);
    mentioned.or_else(|| records.iter().map(|r| r.when).reduce(|a, b| a.hull(&b)))
}

/// W5H contributed by one hit, following the script's prop declarations and lift rules.
pub fn hit_w5h(hit: &EvidenceHit, plan: &ScriptPlan, corpus: &Corpus) -> W5hSummary {
    let mut records: Vec<&PdtRecord> = hit.doc_ids.iter().filter_map(|id| corpus.records.get(id)).collect();
    records.sort_by(|a, b| a.when.start().cmp(&b.when.start()).then_with(|| a.doc_id.cmp(&b.doc_id)));

    let mut w = W5hSummary { why: Some(plan.script.goal.clone()), ..Default::default() };
    for o in &hit.occurrences {
        if let Some(t) = &o.term {
            w.what.insert(t.clone());
        }
    }
    for r in &records {
        if let Some(c) = &r.what.category {
            w.what.insert(c.clone());
        }
        w.how.insert(if r.how.is_empty() { r.source.to_string() } else { r.how.clone() });
    }

    let Some(step) = plan.step(&hit.step) else { return w };
    for leaf_idx in hit.matched_leaves() {
        for (dim, roles) in reached(&step.leaves[leaf_idx], plan) {
            match dim {
                Dimension::Who => {
                    for r in &records {
                        w.who.extend(r.people(&roles).cloned());
                    }
                }
                Dimension::Where => {
                    for r in &records {
                        match &r.place {
                            Some(p) => {
                                w.places.insert(p.canonical_id.clone(), p.clone());
                            }
                            None => {
                                let mentioned =
                                    corpus.annotations.get(&r.doc_id).map(|a| a.places.as_slice()).unwrap_or(&[]);
                                for id in mentioned {
                                    if let Some(p) = corpus.places.get(id) {
                                        w.places.insert(id.clone(), p.clone());
                                    }
                                }
                            }
                        }
                    }
                }
                Dimension::When => w.when = unit_when(&records, corpus),
                Dimension::What | Dimension::Why | Dimension::How => {}
            }
        }
    }
    w
}
