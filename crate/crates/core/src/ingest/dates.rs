//! Relative-date explication over a closed phrase grammar.
//!
//! Supported: `today`, `tonight`, `tomorrow`, `yesterday`, and `on`/`next`/`this`
//! followed by a weekday name. Resolution is anchored at the record's own
//! timestamp, in its own UTC offset.
//!
//! * `on X`: the first X strictly after the anchor date.
//! * `next X`: X in the ISO week after the anchor's.
//! * `this X`: X in the anchor's ISO week if not already past, else the next X.

use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Days, FixedOffset, NaiveDate, NaiveTime, TimeZone, Weekday};
use regex::Regex;
use serde::Serialize;

use crate::model::{PdtRecord, TimeSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DateMention {
    pub phrase: String,
    pub date: NaiveDate,
    /// Whole local day of `date`.
    pub span: TimeSpec,
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(today|tonight|tomorrow|yesterday|(on|next|this)\s+(monday|tuesday|wednesday|thursday|friday|saturday|sunday))\b",
        )
        .unwrap()
    })
}

fn weekday(name: &str) -> Weekday {
    name.to_lowercase().parse().unwrap_or(Weekday::Mon)
}

fn resolve(phrase: &str, anchor: NaiveDate) -> Option<NaiveDate> {
    let lower = phrase.to_lowercase();
    let mut words = lower.split_whitespace();
    let head = words.next()?;
    let day = |n: u64| anchor.checked_add_days(Days::new(n));
    match (head, words.next()) {
        ("today" | "tonight", None) => Some(anchor),
        ("tomorrow", None) => day(1),
        ("yesterday", None) => anchor.checked_sub_days(Days::new(1)),
        (kind, Some(w)) => {
            let target = weekday(w).num_days_from_monday() as i64;
            let here = anchor.weekday().num_days_from_monday() as i64;
            let ahead = match kind {
                "on" => (target - here - 1).rem_euclid(7) + 1,
                "next" => 7 - here + target,
                _ if target >= here => target - here,
                _ => target - here + 7,
            };
            day(ahead as u64)
        }
        _ => None,
    }
}

fn whole_day(date: NaiveDate, offset: FixedOffset) -> Option<TimeSpec> {
    let start = offset.from_local_datetime(&date.and_time(NaiveTime::MIN)).single()?;
    let end = offset.from_local_datetime(&date.and_hms_opt(23, 59, 59)?).single()?;
    Some(TimeSpec::Interval { start, end })
}

/// Resolve relative date phrases in `text` against `anchor`.
pub fn explicate_text(text: &str, anchor: DateTime<FixedOffset>) -> Vec<DateMention> {
    let local = anchor.date_naive();
    pattern()
        .find_iter(text)
        .filter_map(|m| {
            let date = resolve(m.as_str(), local)?;
            Some(DateMention { phrase: m.as_str().to_string(), date, span: whole_day(date, *anchor.offset())? })
        })
        .collect()
}

/// Resolutions for subject and body, in that order. The record is not touched.
pub fn explicate_dates(record: &PdtRecord) -> Vec<DateMention> {
    let anchor = record.when.start();
    ["subject", "body"]
        .iter()
        .filter_map(|f| record.what.text_field(f))
        .flat_map(|t| explicate_text(t, anchor))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<FixedOffset> {
        DateTime::parse_from_rfc3339(s).unwrap()
    }

    fn one(text: &str, anchor: &str) -> (String, NaiveDate) {
        let m = explicate_text(text, at(anchor));
        assert_eq!(m.len(), 1, "{text}");
        (m[0].phrase.clone(), m[0].date)
    }

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn tomorrow() {
        assert_eq!(one("see you tomorrow", "2019-03-14T10:00:00-05:00"), ("tomorrow".into(), ymd(2019, 3, 15)));
    }

    #[test]
    fn on_weekday_strictly_after() {
        // 2019-03-14 is a Thursday.
        assert_eq!(one("dinner on Friday", "2019-03-14T10:00:00-05:00"), ("on Friday".into(), ymd(2019, 3, 15)));
        assert_eq!(one("on thursday", "2019-03-14T10:00:00-05:00").1, ymd(2019, 3, 21));
    }

    #[test]
    fn next_and_this() {
        let a = "2019-03-14T10:00:00-05:00";
        assert_eq!(one("next friday", a).1, ymd(2019, 3, 22));
        assert_eq!(one("next monday", a).1, ymd(2019, 3, 18));
        assert_eq!(one("this friday", a).1, ymd(2019, 3, 15));
        assert_eq!(one("this thursday", a).1, ymd(2019, 3, 14));
        assert_eq!(one("this monday", a).1, ymd(2019, 3, 18));
    }

    #[test]
    fn anchored_in_local_offset() {
        // 23:30 local on the 14th is already the 15th in UTC.
        assert_eq!(one("tonight", "2019-03-14T23:30:00-05:00").1, ymd(2019, 3, 14));
    }

    #[test]
    fn no_phrase() {
        assert!(explicate_text("see you at the usual place", at("2019-03-14T10:00:00Z")).is_empty());
        assert!(explicate_text("ontuesday nextfriday", at("2019-03-14T10:00:00Z")).is_empty());
    }

    #[test]
    fn span_is_whole_local_day() {
        let m = &explicate_text("yesterday", at("2019-03-14T10:00:00-05:00"))[0];
        assert_eq!(m.span.start(), at("2019-03-13T00:00:00-05:00"));
        assert_eq!(m.span.end(), at("2019-03-13T23:59:59-05:00"));
    }

    /// Independent oracle: walk forward day by day.
    fn brute_on(anchor: NaiveDate, target: Weekday) -> NaiveDate {
        let mut d = anchor.succ_opt().unwrap();
        while d.weekday() != target {
            d = d.succ_opt().unwrap();
        }
        d
    }

    #[test]
    fn on_weekday_matches_walk_forward() {
        let names = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
        for offset in 0..14 {
            let anchor = ymd(2019, 3, 1) + Days::new(offset);
            for n in names {
                assert_eq!(resolve(&format!("on {n}"), anchor), Some(brute_on(anchor, weekday(n))));
            }
        }
    }
}
