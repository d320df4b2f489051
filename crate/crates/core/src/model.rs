//! Canonical data model for personal digital traces.
//!
//! Every trace is normalized into a [`PdtRecord`] whose fields follow the six
//! contextual dimensions: who, what, where, when, why and how. Timestamps keep
//! their original UTC offset for display, but every comparison is made on the
//! UTC instant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geo::GeoPoint;

/// Kind of service a trace was collected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    Email,
    Message,
    SocialPost,
    CalendarEntry,
    BankTransaction,
    GpsPoint,
    Photo,
}

impl SourceKind {
    pub const ALL: [SourceKind; 7] = [
        SourceKind::Email,
        SourceKind::Message,
        SourceKind::SocialPost,
        SourceKind::CalendarEntry,
        SourceKind::BankTransaction,
        SourceKind::GpsPoint,
        SourceKind::Photo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Email => "Email",
            SourceKind::Message => "Message",
            SourceKind::SocialPost => "SocialPost",
            SourceKind::CalendarEntry => "CalendarEntry",
            SourceKind::BankTransaction => "BankTransaction",
            SourceKind::GpsPoint => "GpsPoint",
            SourceKind::Photo => "Photo",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| s.to_string())
    }
}

/// Sub-property of the who dimension a person appears under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    From,
    To,
    Cc,
    Tags,
    Author,
    Payer,
}

impl Role {
    pub const ALL: [Role; 6] = [Role::From, Role::To, Role::Cc, Role::Tags, Role::Author, Role::Payer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::From => "from",
            Role::To => "to",
            Role::Cc => "cc",
            Role::Tags => "tags",
            Role::Author => "author",
            Role::Payer => "payer",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| s.to_string())
    }
}

/// Canonical id of the corpus owner, the person whose traces these are.
pub const OWNER_ID: &str = "me";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonRef {
    pub canonical_id: String,
    pub display_name: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceRef {
    pub canonical_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo: Option<GeoPoint>,
}

/// A point in time or a closed interval. Offsets are retained for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Instant(DateTime<FixedOffset>),
    Interval { start: DateTime<FixedOffset>, end: DateTime<FixedOffset> },
}

impl TimeSpec {
    pub fn start(&self) -> DateTime<FixedOffset> {
        match *self {
            TimeSpec::Instant(t) => t,
            TimeSpec::Interval { start, .. } => start,
        }
    }

    pub fn end(&self) -> DateTime<FixedOffset> {
        match *self {
            TimeSpec::Instant(t) => t,
            TimeSpec::Interval { end, .. } => end,
        }
    }

    /// Gap between the closest endpoints, zero when the spans overlap.
    pub fn gap(&self, other: &TimeSpec) -> Duration {
        if self.end() < other.start() {
            other.start() - self.end()
        } else if other.end() < self.start() {
            self.start() - other.end()
        } else {
            Duration::zero()
        }
    }

    /// Smallest span covering both. Keeps the offset of whichever endpoint wins.
    pub fn hull(&self, other: &TimeSpec) -> TimeSpec {
        let start = if other.start() < self.start() { other.start() } else { self.start() };
        let end = if other.end() > self.end() { other.end() } else { self.end() };
        if start == end {
            TimeSpec::Instant(start)
        } else {
            TimeSpec::Interval { start, end }
        }
    }

    pub fn contains(&self, other: &TimeSpec) -> bool {
        self.start() <= other.start() && other.end() <= self.end()
    }

    /// Calendar dates touched by this span, in the offset of its start.
    pub fn local_dates(&self) -> BTreeSet<NaiveDate> {
        let offset = *self.start().offset();
        let first = self.start().date_naive();
        let last = self.end().with_timezone(&offset).date_naive();
        first.iter_days().take_while(|d| *d <= last).collect()
    }
}

/// Content fields of a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Content {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
}

impl Content {
    pub fn text_field(&self, name: &str) -> Option<&str> {
        match name {
            "subject" | "title" => self.subject.as_deref(),
            "body" => self.body.as_deref(),
            "caption" => self.caption.as_deref(),
            _ => None,
        }
    }
}

/// One normalized personal digital trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdtRecord {
    pub doc_id: String,
    pub source: SourceKind,
    pub when: TimeSpec,
    #[serde(default)]
    pub who: BTreeMap<Role, Vec<String>>,
    #[serde(default, rename = "where", skip_serializing_if = "Option::is_none")]
    pub place: Option<PlaceRef>,
    #[serde(default)]
    pub what: Content,
    #[serde(default)]
    pub how: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
}

impl PdtRecord {
    /// All person ids mentioned under any role, or only under `roles` when non-empty.
    pub fn people<'a>(&'a self, roles: &'a [Role]) -> impl Iterator<Item = &'a String> + 'a {
        self.who.iter().filter(move |(r, _)| roles.is_empty() || roles.contains(r)).flat_map(|(_, ids)| ids.iter())
    }

    /// Resolve a dotted field path such as `what.category` or `where.name`.
    pub fn field(&self, path: &str) -> Option<String> {
        let mut parts = path.splitn(2, '.');
        let head = parts.next()?;
        let tail = parts.next();
        match (head, tail) {
            ("source", None) => Some(self.source.to_string()),
            ("how", None) => Some(self.how.clone()),
            ("doc_id", None) => Some(self.doc_id.clone()),
            ("what", Some(f)) => match f {
                "amount" => self.what.amount.map(|a| a.to_string()),
                "category" => self.what.category.clone(),
                "media_ref" => self.what.media_ref.clone(),
                other => self.what.text_field(other).map(str::to_string),
            },
            ("where", Some(f)) => {
                let place = self.place.as_ref()?;
                match f {
                    "name" => Some(place.name.clone()),
                    "category" => place.category.clone(),
                    "id" | "canonical_id" => Some(place.canonical_id.clone()),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// Aggregated six-dimension view of an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct W5hSummary {
    pub who: BTreeSet<String>,
    pub places: BTreeMap<String, PlaceRef>,
    pub when: Option<TimeSpec>,
    pub what: BTreeSet<String>,
    pub why: Option<String>,
    pub how: BTreeSet<String>,
}

impl W5hSummary {
    /// Per-dimension union; `when` becomes the covering span.
    pub fn union_with(&mut self, other: &W5hSummary) {
        self.who.extend(other.who.iter().cloned());
        for (id, p) in &other.places {
            self.places.entry(id.clone()).or_insert_with(|| p.clone());
        }
        self.when = match (self.when, other.when) {
            (Some(a), Some(b)) => Some(a.hull(&b)),
            (a, b) => a.or(b),
        };
        self.what.extend(other.what.iter().cloned());
        if self.why.is_none() {
            self.why.clone_from(&other.why);
        }
        self.how.extend(other.how.iter().cloned());
    }

    /// True when every dimension of `self` contains the corresponding one of `other`.
    pub fn covers(&self, other: &W5hSummary) -> bool {
        let when_ok = match (self.when, other.when) {
            (_, None) => true,
            (Some(a), Some(b)) => a.contains(&b),
            (None, Some(_)) => false,
        };
        other.who.is_subset(&self.who)
            && other.places.keys().all(|k| self.places.contains_key(k))
            && when_ok
            && other.what.is_subset(&self.what)
            && other.how.is_subset(&self.how)
            && (other.why.is_none() || self.why == other.why)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("missing timestamp")]
    MissingTimestamp,
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
    #[error("interval start is after its end")]
    InvertedInterval,
    #[error("unknown source kind `{0}`")]
    UnknownSourceKind(String),
    #[error("unknown who role `{0}`")]
    UnknownRole(String),
    #[error("malformed geo: {0}")]
    MalformedGeo(String),
    #[error("field `{field}` has the wrong type, expected {expected}")]
    WrongType { field: String, expected: &'static str },
}

fn parse_time(v: &Value) -> Result<TimeSpec, RecordError> {
    fn instant(v: &Value) -> Result<DateTime<FixedOffset>, RecordError> {
        let s = v.as_str().ok_or_else(|| RecordError::InvalidTimestamp(v.to_string()))?;
        DateTime::parse_from_rfc3339(s).map_err(|_| RecordError::InvalidTimestamp(s.to_string()))
    }
    match v {
        Value::String(_) => Ok(TimeSpec::Instant(instant(v)?)),
        Value::Object(m) => {
            let start = instant(m.get("start").unwrap_or(&Value::Null))?;
            let end = instant(m.get("end").unwrap_or(&Value::Null))?;
            if start > end {
                return Err(RecordError::InvertedInterval);
            }
            Ok(TimeSpec::Interval { start, end })
        }
        other => Err(RecordError::InvalidTimestamp(other.to_string())),
    }
}

fn opt_str(m: &serde_json::Map<String, Value>, key: &str, errs: &mut Vec<RecordError>) -> Option<String> {
    match m.get(key) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errs.push(RecordError::WrongType { field: key.to_string(), expected: "string" });
            None
        }
    }
}

fn parse_place(v: &Value, errs: &mut Vec<RecordError>) -> Option<PlaceRef> {
    let Some(m) = v.as_object() else {
        errs.push(RecordError::WrongType { field: "where".into(), expected: "object" });
        return None;
    };
    let id = opt_str(m, "canonical_id", errs);
    let name = opt_str(m, "name", errs);
    let category = opt_str(m, "category", errs);
    let geo = match m.get("geo") {
        None | Some(Value::Null) => None,
        Some(g) => match (g.get("lat").and_then(Value::as_f64), g.get("lon").and_then(Value::as_f64)) {
            (Some(lat), Some(lon)) => match GeoPoint::new(lat, lon) {
                Ok(p) => Some(p),
                Err(e) => {
                    errs.push(RecordError::MalformedGeo(e));
                    None
                }
            },
            _ => {
                errs.push(RecordError::MalformedGeo("lat/lon must be numbers".into()));
                None
            }
        },
    };
    match (id, name) {
        (Some(canonical_id), Some(name)) => Some(PlaceRef { canonical_id, name, category, geo }),
        (None, _) => {
            errs.push(RecordError::MissingField("where.canonical_id"));
            None
        }
        (_, None) => {
            errs.push(RecordError::MissingField("where.name"));
            None
        }
    }
}

/// Check an untyped record and build a [`PdtRecord`], reporting every violation found.
pub fn validate_record(raw: &Value) -> Result<PdtRecord, Vec<RecordError>> {
    let Some(m) = raw.as_object() else {
        return Err(vec![RecordError::NotAnObject]);
    };
    let mut errs = Vec::new();

    let doc_id = opt_str(m, "doc_id", &mut errs);
    if doc_id.is_none() && !errs.iter().any(|e| matches!(e, RecordError::WrongType { .. })) {
        errs.push(RecordError::MissingField("doc_id"));
    }

    let source = match m.get("source") {
        Some(Value::String(s)) => match s.parse::<SourceKind>() {
            Ok(k) => Some(k),
            Err(s) => {
                errs.push(RecordError::UnknownSourceKind(s));
                None
            }
        },
        Some(other) => {
            errs.push(RecordError::UnknownSourceKind(other.to_string()));
            None
        }
        None => {
            errs.push(RecordError::MissingField("source"));
            None
        }
    };

    let when = match m.get("when") {
        None | Some(Value::Null) => {
            errs.push(RecordError::MissingTimestamp);
            None
        }
        Some(v) => match parse_time(v) {
            Ok(t) => Some(t),
            Err(e) => {
                errs.push(e);
                None
            }
        },
    };

    let mut who = BTreeMap::new();
    match m.get("who") {
        None | Some(Value::Null) => {}
        Some(Value::Object(roles)) => {
            for (role, ids) in roles {
                let Ok(role) = role.parse::<Role>() else {
                    errs.push(RecordError::UnknownRole(role.clone()));
                    continue;
                };
                let list: Option<Vec<String>> =
                    ids.as_array().map(|a| a.iter().map(|x| x.as_str().map(str::to_string)).collect()).unwrap_or(None);
                match list {
                    Some(l) => {
                        who.insert(role, l);
                    }
                    None => errs.push(RecordError::WrongType {
                        field: format!("who.{}", role.as_str()),
                        expected: "list of strings",
                    }),
                }
            }
        }
        Some(_) => errs.push(RecordError::WrongType { field: "who".into(), expected: "object" }),
    }

    let place = match m.get("where") {
        None | Some(Value::Null) => None,
        Some(v) => parse_place(v, &mut errs),
    };

    let what = match m.get("what") {
        None | Some(Value::Null) => Content::default(),
        Some(Value::Object(w)) => {
            let amount = match w.get("amount") {
                None | Some(Value::Null) => None,
                Some(Value::Number(n)) => n.as_f64(),
                Some(_) => {
                    errs.push(RecordError::WrongType { field: "what.amount".into(), expected: "number" });
                    None
                }
            };
            Content {
                subject: opt_str(w, "subject", &mut errs),
                body: opt_str(w, "body", &mut errs),
                caption: opt_str(w, "caption", &mut errs),
                amount,
                category: opt_str(w, "category", &mut errs),
                media_ref: opt_str(w, "media_ref", &mut errs),
            }
        }
        Some(_) => {
            errs.push(RecordError::WrongType { field: "what".into(), expected: "object" });
            Content::default()
        }
    };

    let how = opt_str(m, "how", &mut errs).unwrap_or_default();
    let group_id = opt_str(m, "group_id", &mut errs);

    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(PdtRecord {
        doc_id: doc_id.expect("checked"),
        source: source.expect("checked"),
        when: when.expect("checked"),
        who,
        place,
        what,
        how,
        group_id,
    })
}
