//! Email threads and message bursts.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;

use crate::model::{PdtRecord, SourceKind};
use crate::unionfind::UnionFind;

pub const BURST_GAP_MINUTES: i64 = 30;
pub const THREAD_GAP_DAYS: i64 = 14;

/// Lowercased subject with any run of `re:`, `fw:`, `fwd:` prefixes removed.
pub fn normalize_subject(subject: &str) -> String {
    let mut s = subject.trim().to_lowercase();
    loop {
        let stripped =
            ["re:", "fwd:", "fw:"].iter().find_map(|p| s.strip_prefix(p)).map(|rest| rest.trim_start().to_string());
        match stripped {
            Some(rest) => s = rest,
            None => return s.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }
}

fn participants(r: &PdtRecord) -> BTreeSet<&str> {
    r.people(&[]).map(String::as_str).collect()
}

fn by_time(mut docs: Vec<&PdtRecord>) -> Vec<&PdtRecord> {
    docs.sort_by(|a, b| a.when.start().cmp(&b.when.start()).then_with(|| a.doc_id.cmp(&b.doc_id)));
    docs
}

/// Group ids to member doc ids. Records carrying an explicit `group_id` keep it;
/// automatic threads and bursts need at least two documents.
pub fn group_documents<'a>(records: impl IntoIterator<Item = &'a PdtRecord>) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut threads: BTreeMap<String, Vec<&PdtRecord>> = BTreeMap::new();
    let mut bursts: BTreeMap<BTreeSet<&str>, Vec<&PdtRecord>> = BTreeMap::new();
    for r in records {
        if let Some(g) = &r.group_id {
            groups.entry(g.clone()).or_default().push(r.doc_id.clone());
            continue;
        }
        match r.source {
            SourceKind::Email => {
                let subj = normalize_subject(r.what.subject.as_deref().unwrap_or(""));
                if !subj.is_empty() {
                    threads.entry(subj).or_default().push(r);
                }
            }
            SourceKind::Message => {
                let who = participants(r);
                if !who.is_empty() {
                    bursts.entry(who).or_default().push(r);
                }
            }
            _ => {}
        }
    }

    for docs in threads.into_values() {
        let docs = by_time(docs);
        let mut uf = UnionFind::new(docs.len());
        for i in 0..docs.len() {
            let pi = participants(docs[i]);
            for j in i + 1..docs.len() {
                if docs[i].when.gap(&docs[j].when) > Duration::days(THREAD_GAP_DAYS) {
                    break;
                }
                if !pi.is_disjoint(&participants(docs[j])) {
                    uf.union(i, j);
                }
            }
        }
        for g in uf.groups().into_iter().filter(|g| g.len() > 1) {
            let ids: Vec<String> = g.iter().map(|&i| docs[i].doc_id.clone()).collect();
            insert_group(&mut groups, "thread", ids);
        }
    }

    for docs in bursts.into_values() {
        let docs = by_time(docs);
        let mut run = vec![docs[0].doc_id.clone()];
        for w in docs.windows(2) {
            if w[0].when.gap(&w[1].when) <= Duration::minutes(BURST_GAP_MINUTES) {
                run.push(w[1].doc_id.clone());
            } else {
                insert_group(&mut groups, "burst", std::mem::replace(&mut run, vec![w[1].doc_id.clone()]));
            }
        }
        insert_group(&mut groups, "burst", run);
    }
    for ids in groups.values_mut() {
        ids.sort();
    }
    groups
}

fn insert_group(groups: &mut BTreeMap<String, Vec<String>>, kind: &str, ids: Vec<String>) {
    if ids.len() > 1 {
        let min = ids.iter().min().cloned().unwrap_or_default();
        groups.insert(format!("{kind}:{min}"), ids);
    }
}
