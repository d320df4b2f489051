//! Match-merge entity resolution for people and places.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{PersonRef, PlaceRef};
use crate::text::tokens;
use crate::unionfind::UnionFind;

use super::IngestError;

/// Places closer than this with equal folded names are one venue.
pub const SNAP_RADIUS_M: f64 = 50.0;

fn name_key(name: &str) -> String {
    let set: BTreeSet<String> = tokens(name).into_iter().collect();
    set.into_iter().collect::<Vec<_>>().join(" ")
}

/// Resolved people plus a lookup from every known id and alias to its canonical id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeopleIndex {
    pub people: BTreeMap<String, PersonRef>,
    lookup: BTreeMap<String, String>,
}

impl PeopleIndex {
    pub fn canonical(&self, id_or_alias: &str) -> Option<&str> {
        self.lookup.get(id_or_alias).or_else(|| self.lookup.get(&id_or_alias.to_lowercase())).map(String::as_str)
    }
}

/// Merge people sharing an alias or a folded token-set name. Canonical id is the smallest member id.
pub fn resolve_people(people: &[PersonRef], aliases: &[(String, String)]) -> Result<PeopleIndex, IngestError> {
    let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, alias) in aliases {
        if let Some(prev) = claimed.insert(alias, id) {
            if prev != id {
                return Err(IngestError::ConflictingAlias {
                    alias: alias.clone(),
                    first: prev.to_string(),
                    second: id.clone(),
                });
            }
        }
    }

    let mut by_id: BTreeMap<String, PersonRef> = BTreeMap::new();
    for p in people {
        by_id
            .entry(p.canonical_id.clone())
            .and_modify(|e| e.aliases.extend(p.aliases.iter().cloned()))
            .or_insert_with(|| p.clone());
    }
    for (id, alias) in aliases {
        by_id
            .entry(id.clone())
            .or_insert_with(|| PersonRef {
                canonical_id: id.clone(),
                display_name: id.clone(),
                aliases: BTreeSet::new(),
            })
            .aliases
            .insert(alias.clone());
    }

    let list: Vec<PersonRef> = by_id.into_values().collect();
    let mut uf = UnionFind::new(list.len());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, p) in list.iter().enumerate() {
        let mut keys: Vec<String> =
            p.aliases.iter().chain([&p.canonical_id]).map(|a| format!("a:{}", a.to_lowercase())).collect();
        let name = name_key(&p.display_name);
        if !name.is_empty() {
            keys.push(format!("n:{name}"));
        }
        for k in keys {
            match seen.get(&k) {
                Some(&j) => {
                    uf.union(i, j);
                }
                None => {
                    seen.insert(k, i);
                }
            }
        }
    }

    let mut index = PeopleIndex::default();
    for group in uf.groups() {
        let canon = &list[group[0]];
        let mut merged = PersonRef {
            canonical_id: canon.canonical_id.clone(),
            display_name: canon.display_name.clone(),
            aliases: BTreeSet::new(),
        };
        for &i in &group {
            merged.aliases.extend(list[i].aliases.iter().cloned());
            merged.aliases.insert(list[i].canonical_id.clone());
        }
        merged.aliases.remove(&merged.canonical_id);
        for key in merged.aliases.iter().chain([&merged.canonical_id]) {
            index.lookup.insert(key.clone(), merged.canonical_id.clone());
            index.lookup.entry(key.to_lowercase()).or_insert_with(|| merged.canonical_id.clone());
        }
        index.people.insert(merged.canonical_id.clone(), merged);
    }
    Ok(index)
}

/// Resolved places plus a lookup from every member id to its canonical id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlaceIndex {
    pub places: BTreeMap<String, PlaceRef>,
    lookup: BTreeMap<String, String>,
}

impl PlaceIndex {
    pub fn canonical(&self, id: &str) -> Option<&PlaceRef> {
        self.lookup.get(id).and_then(|c| self.places.get(c))
    }
}

/// Merge places with equal folded names unless both carry coordinates at least 50 m apart.
pub fn resolve_places(places: &[PlaceRef]) -> PlaceIndex {
    let mut by_id: BTreeMap<String, PlaceRef> = BTreeMap::new();
    for p in places {
        let e = by_id.entry(p.canonical_id.clone()).or_insert_with(|| p.clone());
        if e.category.is_none() {
            e.category.clone_from(&p.category);
        }
        if e.geo.is_none() {
            e.geo = p.geo;
        }
    }
    let list: Vec<PlaceRef> = by_id.into_values().collect();
    let mut buckets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, p) in list.iter().enumerate() {
        let k = name_key(&p.name);
        if !k.is_empty() {
            buckets.entry(k).or_default().push(i);
        }
    }
    let mut uf = UnionFind::new(list.len());
    for members in buckets.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                let near = match (list[i].geo, list[j].geo) {
                    (Some(a), Some(b)) => a.distance_m(&b) < SNAP_RADIUS_M,
                    _ => true,
                };
                if near {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut index = PlaceIndex::default();
    for group in uf.groups() {
        let mut merged = list[group[0]].clone();
        for &i in &group[1..] {
            if merged.category.is_none() {
                merged.category.clone_from(&list[i].category);
            }
            if merged.geo.is_none() {
                merged.geo = list[i].geo;
            }
        }
        for &i in &group {
            index.lookup.insert(list[i].canonical_id.clone(), merged.canonical_id.clone());
        }
        index.places.insert(merged.canonical_id.clone(), merged);
    }
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn person(id: &str, name: &str, aliases: &[&str]) -> PersonRef {
        PersonRef {
            canonical_id: id.into(),
            display_name: name.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn place(id: &str, name: &str, geo: Option<(f64, f64)>) -> PlaceRef {
        PlaceRef {
            canonical_id: id.into(),
            name: name.into(),
            category: None,
            geo: geo.map(|(a, b)| GeoPoint::new(a, b).unwrap()),
        }
    }

    #[test]
    fn shared_alias_merges() {
        let idx = resolve_people(
            &[person("p2", "Bob Smith", &["bob@x.com"]), person("p1", "bob smith", &["+1555", "bob@x.com"])],
            &[],
        )
        .unwrap();
        assert_eq!(idx.people.len(), 1);
        let bob = &idx.people["p1"];
        assert!(bob.aliases.contains("bob@x.com") && bob.aliases.contains("+1555"));
        assert_eq!(idx.canonical("BOB@x.com"), Some("p1"));
    }

    #[test]
    fn token_set_and_diacritics() {
        let idx = resolve_people(&[person("a", "Zoë Martin", &[]), person("b", "martin zoe", &[])], &[]).unwrap();
        assert_eq!(idx.people.len(), 1);
    }

    #[test]
    fn disjoint_stay_apart() {
        let idx = resolve_people(&[person("a", "Ann", &["ann@x"]), person("b", "Ben", &["ben@x"])], &[]).unwrap();
        assert_eq!(idx.people.len(), 2);
    }

    #[test]
    fn conflicting_alias() {
        let table = vec![("a".to_string(), "x@y".to_string()), ("b".to_string(), "x@y".to_string())];
        assert!(matches!(resolve_people(&[], &table), Err(IngestError::ConflictingAlias { .. })));
    }

    #[test]
    fn people_idempotent() {
        let once = resolve_people(
            &[person("c", "Cy", &["cy@x"]), person("a", "Al", &["cy@x"]), person("b", "al", &[])],
            &[("b".into(), "+1".into())],
        )
        .unwrap();
        let again: Vec<PersonRef> = once.people.values().cloned().collect();
        let twice = resolve_people(&again, &[]).unwrap();
        assert_eq!(once.people, twice.people);
    }

    #[test]
    fn nearby_cafes_merge() {
        let idx = resolve_places(&[
            place("v2", "Cafe Aurora", Some((40.5001, -74.4001))),
            place("v1", "Café Aurora", Some((40.5000, -74.4000))),
        ]);
        assert_eq!(idx.places.len(), 1);
        assert_eq!(idx.canonical("v2").unwrap().canonical_id, "v1");
    }

    #[test]
    fn distant_branches_stay_apart() {
        let idx = resolve_places(&[
            place("v1", "Noodle Bar", Some((40.5, -74.4))),
            place("v2", "Noodle Bar", Some((40.6, -74.4))),
            place("v3", "Other", Some((40.5, -74.4))),
        ]);
        assert_eq!(idx.places.len(), 3);
    }

    #[test]
    fn places_idempotent() {
        let once = resolve_places(&[
            place("v3", "Trattoria", None),
            place("v1", "trattoria", Some((40.5, -74.4))),
            place("v2", "Bistro", Some((40.5, -74.4))),
        ]);
        let again: Vec<PlaceRef> = once.places.values().cloned().collect();
        assert_eq!(resolve_places(&again).places, once.places);
    }
}
