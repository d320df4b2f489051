//! Corpus loading and preprocessing.
//!
//! A corpus directory holds:
//!
//! | file            | format                                  | required |
//! |-----------------|-----------------------------------------|----------|
//! | `records.jsonl` | one [`PdtRecord`] JSON object per line  | yes      |
//! | `people.jsonl`  | one [`PersonRef`] per line              | no       |
//! | `places.jsonl`  | one [`PlaceRef`] per line               | no       |
//! | `aliases.tsv`   | `canonical_id<TAB>alias`                | no       |
//! | `gps.csv`       | `timestamp, lat, lon` (RFC 3339 time)   | no       |
//!
//! Preprocessing runs in a fixed order: dates, entities, groups, visits. Place
//! mentions in text are annotated last, once the place table is final.

pub mod dates;
pub mod entities;
pub mod groups;
pub mod visits;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::model::{validate_record, PdtRecord, PersonRef, PlaceRef, SourceKind, TimeSpec};
use crate::text::{contains_phrase, tokens};

pub use dates::{explicate_dates, DateMention};
pub use entities::{resolve_people, resolve_places, PeopleIndex, PlaceIndex, SNAP_RADIUS_M};
pub use groups::group_documents;
pub use visits::{detect_visits, stay_points, GpsFix, StayParams, Visit, DEFAULT_D_MAX_M, DEFAULT_T_MIN_MINUTES};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error("{} schema error(s): {}", .0.len(), .0.join("; "))]
    Schema(Vec<String>),
    #[error("duplicate doc_id `{doc_id}` on lines {first_line} and {second_line}")]
    DuplicateDocId { doc_id: String, first_line: usize, second_line: usize },
    #[error("alias `{alias}` claimed by both `{first}` and `{second}`")]
    ConflictingAlias { alias: String, first: String, second: String },
    #[error("location fixes out of time order at index {index}")]
    UnsortedInput { index: usize },
}

/// A records line that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    pub line: usize,
    pub doc_id: Option<String>,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Quarantine {
    pub rejected: Vec<Rejected>,
}

impl Quarantine {
    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }
}

/// Corpus contents as stored on disk, before preprocessing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCorpus {
    pub records: Vec<PdtRecord>,
    pub people: Vec<PersonRef>,
    pub places: Vec<PlaceRef>,
    pub aliases: Vec<(String, String)>,
    pub gps: Vec<GpsFix>,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("serializable") + "\n").collect()
}

fn gps_sort_key(f: &GpsFix) -> (i64, u32, u64, u64) {
    (f.at.timestamp(), f.at.timestamp_subsec_nanos(), f.point.lat.to_bits(), f.point.lon.to_bits())
}

impl RawCorpus {
    /// Read a corpus directory. Invalid record lines are quarantined; problems
    /// in the auxiliary tables are fatal.
    pub fn read(dir: &Path) -> Result<(RawCorpus, Quarantine), IngestError> {
        let mut raw = RawCorpus::default();
        let mut quarantine = Quarantine::default();
        let mut schema = Vec::new();

        let path = dir.join("records.jsonl");
        let file = fs::File::open(&path).map_err(|source| IngestError::Unreadable { path: path.clone(), source })?;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| IngestError::Unreadable { path: path.clone(), source })?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = match serde_json::from_str(&line) {
                Ok(v) => v,
                Err(e) => {
                    quarantine.rejected.push(Rejected { line: n, doc_id: None, reasons: vec![e.to_string()] });
                    continue;
                }
            };
            match validate_record(&value) {
                Ok(r) => {
                    if let Some(first) = seen.insert(r.doc_id.clone(), n) {
                        return Err(IngestError::DuplicateDocId {
                            doc_id: r.doc_id,
                            first_line: first,
                            second_line: n,
                        });
                    }
                    raw.records.push(r);
                }
                Err(errs) => quarantine.rejected.push(Rejected {
                    line: n,
                    doc_id: value.get("doc_id").and_then(|v| v.as_str()).map(str::to_string),
                    reasons: errs.iter().map(ToString::to_string).collect(),
                }),
            }
        }

        raw.people = read_jsonl(&dir.join("people.jsonl"), &mut schema)?;
        raw.places = read_jsonl(&dir.join("places.jsonl"), &mut schema)?;
        for p in &raw.places {
            if let Some(g) = p.geo {
                if let Err(e) = GeoPoint::new(g.lat, g.lon) {
                    schema.push(format!("places.jsonl: {}: {e}", p.canonical_id));
                }
            }
        }

        let path = dir.join("aliases.tsv");
        if let Some(text) = read_optional(&path)? {
            for (i, line) in text.lines().enumerate() {
                let t = line.trim_end_matches('\r');
                if t.trim().is_empty() || t.starts_with('#') {
                    continue;
                }
                match t.split_once('\t') {
                    Some((id, alias)) if !id.trim().is_empty() && !alias.trim().is_empty() => {
                        raw.aliases.push((id.trim().to_string(), alias.trim().to_string()))
                    }
                    _ => schema.push(format!("aliases.tsv:{}: expected `canonical_id<TAB>alias`", i + 1)),
                }
            }
        }

        let path = dir.join("gps.csv");
        if let Some(text) = read_optional(&path)? {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .comment(Some(b'#'))
                .flexible(true)
                .from_reader(text.as_bytes());
            for (i, row) in rdr.records().enumerate() {
                let at_line = |msg: String| format!("gps.csv:{}: {msg}", i + 1);
                let row = match row {
                    Ok(r) => r,
                    Err(e) => {
                        schema.push(at_line(e.to_string()));
                        continue;
                    }
                };
                if i == 0 && row.get(0) == Some("timestamp") {
                    continue;
                }
                match parse_fix(&row) {
                    Ok(f) => raw.gps.push(f),
                    Err(e) => schema.push(at_line(e)),
                }
            }
        }

        if !schema.is_empty() {
            return Err(IngestError::Schema(schema));
        }
        Ok((raw, quarantine))
    }

    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        let put = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| IngestError::Unwritable { path, source })
        };
        fs::create_dir_all(dir).map_err(|source| IngestError::Unwritable { path: dir.to_path_buf(), source })?;
        put("records.jsonl", jsonl(&self.records))?;
        put("people.jsonl", jsonl(&self.people))?;
        put("places.jsonl", jsonl(&self.places))?;
        put("aliases.tsv", self.aliases.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect())?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for f in &self.gps {
            w.write_record([f.at.to_rfc3339(), f.point.lat.to_string(), f.point.lon.to_string()])
                .expect("in-memory write");
        }
        put("gps.csv", String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"))
    }

    /// Remove every trace of the given kinds. Dropping `GpsPoint` drops the raw fixes.
    pub fn without_sources(mut self, kinds: &[SourceKind]) -> RawCorpus {
        self.records.retain(|r| !kinds.contains(&r.source));
        if kinds.contains(&SourceKind::GpsPoint) {
            self.gps.clear();
        }
        self
    }

    /// Content digest, independent of line order.
    pub fn digest(&self) -> String {
        let mut records: Vec<String> =
            self.records.iter().map(|r| serde_json::to_string(r).expect("serializable")).collect();
        records.sort();
        let mut people: Vec<String> =
            self.people.iter().map(|r| serde_json::to_string(r).expect("serializable")).collect();
        people.sort();
        let mut places: Vec<String> =
            self.places.iter().map(|r| serde_json::to_string(r).expect("serializable")).collect();
        places.sort();
        let mut aliases = self.aliases.clone();
        aliases.sort();
        let mut gps = self.gps.clone();
        gps.sort_by_key(gps_sort_key);
        let mut h = Sha256::new();
        for section in [records, people, places] {
            for line in section {
                h.update(line.as_bytes());
                h.update(b"\n");
            }
            h.update(b"--\n");
        }
        for (a, b) in aliases {
            h.update(format!("{a}\t{b}\n").as_bytes());
        }
        h.update(b"--\n");
        for f in gps {
            h.update(format!("{},{},{}\n", f.at.to_rfc3339(), f.point.lat, f.point.lon).as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn read_optional(path: &Path) -> Result<Option<String>, IngestError> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(IngestError::Unreadable { path: path.to_path_buf(), source }),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, schema: &mut Vec<String>) -> Result<Vec<T>, IngestError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut out = Vec::new();
    if let Some(text) = read_optional(path)? {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(v) => out.push(v),
                Err(e) => schema.push(format!("{name}:{}: {e}", i + 1)),
            }
        }
    }
    Ok(out)
}

fn parse_fix(row: &csv::StringRecord) -> Result<GpsFix, String> {
    if row.len() != 3 {
        return Err(format!("expected 3 fields, found {}", row.len()));
    }
    let at = chrono::DateTime::parse_from_rfc3339(&row[0]).map_err(|e| format!("timestamp: {e}"))?;
    let lat: f64 = row[1].parse().map_err(|_| format!("bad latitude `{}`", &row[1]))?;
    let lon: f64 = row[2].parse().map_err(|_| format!("bad longitude `{}`", &row[2]))?;
    Ok(GpsFix { at, point: GeoPoint::new(lat, lon)? })
}

/// Derived, per-document annotations. Records themselves are never rewritten by these.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Annotation {
    pub dates: Vec<DateMention>,
    /// Canonical ids of known places named in the text.
    pub places: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IngestParams {
    pub stay: StayParams,
}

/// A set of documents that counts as one piece of evidence: a thread, a burst, or a single document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub id: String,
    pub doc_ids: Vec<String>,
    pub group: Option<String>,
}

/// A preprocessed corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub records: BTreeMap<String, PdtRecord>,
    pub people: BTreeMap<String, PersonRef>,
    pub places: BTreeMap<String, PlaceRef>,
    pub visits: Vec<Visit>,
    pub groups: BTreeMap<String, Vec<String>>,
    pub annotations: BTreeMap<String, Annotation>,
    /// Digest of the raw input.
    pub digest: String,
}

impl Corpus {
    /// Evidence units sorted by id. Grouped documents appear only inside their group.
    pub fn units(&self) -> Vec<Unit> {
        let grouped: BTreeSet<&str> = self.groups.values().flatten().map(String::as_str).collect();
        let mut out: Vec<Unit> = self
            .groups
            .iter()
            .map(|(g, ids)| Unit { id: g.clone(), doc_ids: ids.clone(), group: Some(g.clone()) })
            .chain(self.records.keys().filter(|id| !grouped.contains(id.as_str())).map(|id| Unit {
                id: id.clone(),
                doc_ids: vec![id.clone()],
                group: None,
            }))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn display_name(&self, person: &str) -> String {
        self.people.get(person).map(|p| p.display_name.clone()).unwrap_or_else(|| person.to_string())
    }
}

/// Read and preprocess a corpus directory.
pub fn load_corpus(dir: &Path, params: &IngestParams) -> Result<(Corpus, Quarantine), IngestError> {
    let (raw, quarantine) = RawCorpus::read(dir)?;
    Ok((preprocess(raw, params)?, quarantine))
}

/// Dates, entities, groups, visits, then place mentions.
pub fn preprocess(raw: RawCorpus, params: &IngestParams) -> Result<Corpus, IngestError> {
    let digest = raw.digest();
    let mut records: BTreeMap<String, PdtRecord> = BTreeMap::new();
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    for (i, r) in raw.records.into_iter().enumerate() {
        if let Some(first) = lines.insert(r.doc_id.clone(), i + 1) {
            return Err(IngestError::DuplicateDocId { doc_id: r.doc_id, first_line: first, second_line: i + 1 });
        }
        records.insert(r.doc_id.clone(), r);
    }

    let mut annotations: BTreeMap<String, Annotation> = records
        .iter()
        .map(|(id, r)| (id.clone(), Annotation { dates: explicate_dates(r), places: Vec::new() }))
        .collect();

    // Unknown who entries become people of their own so every reference resolves.
    let mut known: BTreeSet<String> = BTreeSet::new();
    for p in &raw.people {
        known.insert(p.canonical_id.to_lowercase());
        known.extend(p.aliases.iter().map(|a| a.to_lowercase()));
    }
    for (id, alias) in &raw.aliases {
        known.insert(id.to_lowercase());
        known.insert(alias.to_lowercase());
    }
    let mut people = raw.people;
    let implicit: BTreeSet<&String> =
        records.values().flat_map(|r| r.people(&[])).filter(|s| !known.contains(&s.to_lowercase())).collect();
    people.extend(implicit.into_iter().map(|s| PersonRef {
        canonical_id: s.clone(),
        display_name: s.clone(),
        aliases: BTreeSet::new(),
    }));
    let people = resolve_people(&people, &raw.aliases)?;

    let mut places = raw.places;
    places.extend(records.values().filter_map(|r| r.place.clone()));
    let places = resolve_places(&places);

    for r in records.values_mut() {
        for ids in r.who.values_mut() {
            let mut seen = BTreeSet::new();
            *ids = ids
                .iter()
                .filter_map(|s| people.canonical(s).map(str::to_string))
                .filter(|c| seen.insert(c.clone()))
                .collect();
        }
        if let Some(p) = &r.place {
            r.place = places.canonical(&p.canonical_id).cloned();
        }
    }

    let groups = group_documents(records.values());

    let mut gps = raw.gps;
    gps.sort_by_key(gps_sort_key);
    let visits = detect_visits(&gps, &params.stay, places.places.values())?;
    let mut place_table = places.places;
    for v in &visits {
        place_table.entry(v.place.canonical_id.clone()).or_insert_with(|| v.place.clone());
        let id = v.doc_id();
        if records.contains_key(&id) {
            continue;
        }
        annotations.insert(id.clone(), Annotation::default());
        records.insert(
            id.clone(),
            PdtRecord {
                doc_id: id,
                source: SourceKind::GpsPoint,
                when: TimeSpec::Interval { start: v.arrive, end: v.depart },
                who: BTreeMap::new(),
                place: Some(v.place.clone()),
                what: Default::default(),
                how: "location history".into(),
                group_id: None,
            },
        );
    }

    let named: Vec<(&String, Vec<String>)> = place_table
        .iter()
        .filter(|(id, _)| !id.starts_with("loc:"))
        .map(|(id, p)| (id, tokens(&p.name)))
        .filter(|(_, t)| !t.is_empty())
        .collect();
    for (id, r) in &records {
        let text: Vec<String> = ["subject", "body", "caption"]
            .iter()
            .filter_map(|f| r.what.text_field(f))
            .flat_map(|t| {
                let mut v = tokens(t);
                v.push(String::new());
                v
            })
            .collect();
        if text.is_empty() {
            continue;
        }
        let found: Vec<String> =
            named.iter().filter(|(_, t)| contains_phrase(&text, t)).map(|(id, _)| (*id).clone()).collect();
        if let Some(a) = annotations.get_mut(id) {
            a.places = found;
        }
    }

    Ok(Corpus { records, people: people.people, places: place_table, visits, groups, annotations, digest })
}

/// Write the quarantine report as JSON lines.
pub fn write_quarantine(q: &Quarantine, path: &Path) -> Result<(), IngestError> {
    let mut f =
        fs::File::create(path).map_err(|source| IngestError::Unwritable { path: path.to_path_buf(), source })?;
    f.write_all(jsonl(&q.rejected).as_bytes())
        .map_err(|source| IngestError::Unwritable { path: path.to_path_buf(), source })
}
