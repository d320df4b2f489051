//! Seeded synthetic corpora with known ground truth.
//!
//! Each gold episode is a meal at a restaurant. Every trace kind is emitted
//! independently with its configured probability:
//!
//! | kind        | source          | timing                                   |
//! |-------------|-----------------|------------------------------------------|
//! | planning    | Message burst   | `planning_lead_days` before              |
//! | reservation | Email           | `planning_lead_days` before              |
//! | ride        | Email           | `ride_lead_minutes` before arrival       |
//! | gps         | raw fixes       | during the meal, plus travel points      |
//! | payment     | BankTransaction | when the meal ends                       |
//! | post        | SocialPost      | up to `post_delay_max_minutes` after     |
//!
//! Distractors are independent of the episodes: newsletter emails that use
//! meal words, take-out payments whose GPS stop is too short to count as a
//! visit, supermarket payments and rides to restaurants on days nobody ate
//! there.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, TimeZone, Timelike};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Decoy, GoldEpisode, GoldSet, GoldWhen, Grade};
use crate::geo::GeoPoint;
use crate::ingest::{GpsFix, IngestError, RawCorpus};
use crate::model::{Content, PdtRecord, PersonRef, PlaceRef, Role, SourceKind, TimeSpec};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Write(#[from] IngestError),
}

/// Per-episode probability of each trace kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Emission {
    pub planning: f64,
    pub reservation: f64,
    pub ride: f64,
    pub gps: f64,
    pub payment: f64,
    pub post: f64,
}

impl Emission {
    pub fn all(p: f64) -> Emission {
        Emission { planning: p, reservation: p, ride: p, gps: p, payment: p, post: p }
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("planning", self.planning),
            ("reservation", self.reservation),
            ("ride", self.ride),
            ("gps", self.gps),
            ("payment", self.payment),
            ("post", self.post),
        ]
    }
}

impl Default for Emission {
    fn default() -> Self {
        Emission { planning: 0.4, reservation: 0.3, ride: 0.3, gps: 1.0, payment: 1.0, post: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Distractors {
    pub keyword_emails: usize,
    pub take_out: usize,
    pub supermarket: usize,
    pub stray_rides: usize,
}

impl Distractors {
    pub fn none() -> Distractors {
        Distractors { keyword_emails: 0, take_out: 0, supermarket: 0, stray_rides: 0 }
    }
}

impl Default for Distractors {
    fn default() -> Self {
        Distractors { keyword_emails: 40, take_out: 4, supermarket: 10, stray_rides: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pools {
    pub venues: usize,
    pub friends: usize,
    pub supermarkets: usize,
}

impl Default for Pools {
    fn default() -> Self {
        Pools { venues: 12, friends: 6, supermarkets: 3 }
    }
}

/// Generator-side timing. Inclusive ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    pub planning_lead_days: [u32; 2],
    pub ride_lead_minutes: [u32; 2],
    pub meal_minutes: [u32; 2],
    pub post_delay_max_minutes: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            planning_lead_days: [1, 3],
            ride_lead_minutes: [20, 40],
            meal_minutes: [45, 90],
            post_delay_max_minutes: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub utc_offset_minutes: i32,
    pub days: usize,
    pub n_episodes: usize,
    pub emission: Emission,
    pub distractors: Distractors,
    pub pools: Pools,
    pub timing: Timing,
    /// Allow a lunch and a dinner on the same day.
    pub collision_stress: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            start_date: NaiveDate::from_ymd_opt(2019, 1, 7).expect("valid date"),
            utc_offset_minutes: -300,
            days: 120,
            n_episodes: 60,
            emission: Emission::default(),
            distractors: Distractors::default(),
            pools: Pools::default(),
            timing: Timing::default(),
            collision_stress: false,
        }
    }
}

const FIRST_NAMES: [&str; 16] = [
    "Ann", "Ben", "Carla", "Dev", "Elena", "Farid", "Grace", "Hiro", "Ines", "Jonas", "Kemi", "Luis", "Maya", "Noor",
    "Omar", "Priya",
];
const LAST_NAMES: [&str; 12] =
    ["Lee", "Okafor", "Novak", "Shah", "Costa", "Berg", "Tanaka", "Walsh", "Ruiz", "Haddad", "Kim", "Moreau"];
const VENUE_FIRST: [&str; 12] =
    ["Golden", "Blue", "Little", "Old", "Red", "Silver", "Green", "Northern", "Royal", "Lucky", "Olive", "Copper"];
const VENUE_SECOND: [&str; 12] =
    ["Lotus", "Harbor", "Fig", "Lantern", "Oak", "Pepper", "Anchor", "Saffron", "Juniper", "Basil", "Tavern", "Kettle"];
const SUPERMARKETS: [&str; 6] =
    ["FreshWay Market", "Corner Grocer", "Valley Foods", "Harvest Depot", "Pantry Plus", "Union Provisions"];
const NEWSLETTER_SUBJECTS: [&str; 5] = [
    "Lunch menu ideas",
    "Dinner recipes digest",
    "Restaurant industry roundup",
    "Brunch club newsletter",
    "Supper club notes",
];
const NEWSLETTER_SENDERS: [&str; 3] = ["news@eatlocal.example", "digest@cityguide.example", "hello@mealkit.example"];
const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

const CENTER: (f64, f64) = (40.7400, -73.9900);
const CITY_RADIUS_M: f64 = 6_000.0;
const MIN_PLACE_SEPARATION_M: f64 = 400.0;
const FIX_JITTER_M: f64 = 14.0;
const RESERVATIONS_FROM: &str = "reservations@tablebook.example";
const RIDES_FROM: &str = "receipts@rideshare.example";

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        for (name, p) in self.emission.named() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("emission.{name} = {p} is outside [0, 1]"));
            }
        }
        if FixedOffset::east_opt(self.utc_offset_minutes * 60).is_none() {
            return bad(format!("utc_offset_minutes {} out of range", self.utc_offset_minutes));
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        let slots = if self.collision_stress { 2 * self.days } else { self.days };
        if self.n_episodes > slots {
            return bad(format!("{} episodes do not fit in {} days", self.n_episodes, self.days));
        }
        let needs_venues = self.n_episodes + self.distractors.take_out + self.distractors.stray_rides > 0;
        if needs_venues && self.pools.venues < 4 {
            return bad("pools.venues must be at least 4".into());
        }
        if self.pools.venues > VENUE_FIRST.len() * VENUE_SECOND.len() {
            return bad(format!("pools.venues is capped at {}", VENUE_FIRST.len() * VENUE_SECOND.len()));
        }
        if self.pools.friends > FIRST_NAMES.len() * LAST_NAMES.len() {
            return bad(format!("pools.friends is capped at {}", FIRST_NAMES.len() * LAST_NAMES.len()));
        }
        let social = self.emission.planning > 0.0 || self.emission.post > 0.0;
        if self.n_episodes > 0 && social && self.pools.friends == 0 {
            return bad("planning and post traces need a non-empty friend pool".into());
        }
        if self.distractors.supermarket > 0 && self.pools.supermarkets == 0 {
            return bad("supermarket distractors need a non-empty supermarket pool".into());
        }
        if self.pools.supermarkets > SUPERMARKETS.len() {
            return bad(format!("pools.supermarkets is capped at {}", SUPERMARKETS.len()));
        }
        let t = &self.timing;
        let [lo, hi] = t.planning_lead_days;
        if lo < 1 || lo > hi || hi > 6 {
            return bad("timing.planning_lead_days must satisfy 1 <= lo <= hi <= 6".into());
        }
        for (name, [lo, hi]) in [("ride_lead_minutes", t.ride_lead_minutes), ("meal_minutes", t.meal_minutes)] {
            if lo > hi {
                return bad(format!("timing.{name} has lo > hi"));
            }
        }
        if t.meal_minutes[0] < 30 || t.meal_minutes[1] > 150 {
            return bad("timing.meal_minutes must lie within [30, 150]".into());
        }
        if t.ride_lead_minutes[1] > 120 || t.post_delay_max_minutes > 180 {
            return bad("ride lead is capped at 120 minutes and post delay at 180".into());
        }
        Ok(())
    }
}

/// One generated document before ids are assigned.
struct Draft {
    at: DateTime<FixedOffset>,
    record: PdtRecord,
}

struct World {
    offset: FixedOffset,
    owner: PersonRef,
    friends: Vec<PersonRef>,
    venues: Vec<PlaceRef>,
    supermarkets: Vec<PlaceRef>,
}

struct Episode {
    day: usize,
    venue: usize,
    start: DateTime<FixedOffset>,
    end: DateTime<FixedOffset>,
    companions: Vec<usize>,
}

fn person(id: String, first: &str, last: &str) -> PersonRef {
    PersonRef {
        canonical_id: id,
        display_name: format!("{first} {last}"),
        aliases: [format!("{}.{}@example.com", first.to_lowercase(), last.to_lowercase())].into(),
    }
}

fn alias(p: &PersonRef) -> String {
    p.aliases.iter().next().cloned().unwrap_or_else(|| p.canonical_id.clone())
}

fn shift(p: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let lat = p.lat + north_m / 111_320.0;
    let lon = p.lon + east_m / (111_320.0 * p.lat.to_radians().cos());
    GeoPoint::new(lat, lon).expect("shifted point stays in range")
}

fn polar(rng: &mut ChaCha8Rng, p: GeoPoint, r_lo: f64, r_hi: f64) -> GeoPoint {
    let r = rng.gen_range(r_lo..r_hi);
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    shift(p, r * a.cos(), r * a.sin())
}

fn jitter(rng: &mut ChaCha8Rng, p: GeoPoint) -> GeoPoint {
    shift(p, rng.gen_range(-FIX_JITTER_M..FIX_JITTER_M), rng.gen_range(-FIX_JITTER_M..FIX_JITTER_M))
}

fn build_world(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> World {
    let offset = FixedOffset::east_opt(cfg.utc_offset_minutes * 60).expect("validated");
    let owner = person("me".into(), "Sam", "Rivera");
    let names: Vec<(usize, usize)> = (0..FIRST_NAMES.len())
        .flat_map(|f| (0..LAST_NAMES.len()).map(move |l| (f, (f + l) % LAST_NAMES.len())))
        .collect();
    let mut picked: Vec<usize> = sample(rng, names.len(), cfg.pools.friends).into_vec();
    picked.sort_unstable();
    let friends = picked
        .iter()
        .enumerate()
        .map(|(i, &n)| person(format!("p{:03}", i + 1), FIRST_NAMES[names[n].0], LAST_NAMES[names[n].1]))
        .collect();

    let center = GeoPoint::new(CENTER.0, CENTER.1).expect("valid center");
    let mut spots: Vec<GeoPoint> = Vec::new();
    let mut place = |rng: &mut ChaCha8Rng| loop {
        let p = polar(rng, center, 0.0, CITY_RADIUS_M);
        if spots.iter().all(|q| q.distance_m(&p) >= MIN_PLACE_SEPARATION_M) {
            spots.push(p);
            return p;
        }
    };
    let mut venue_names: Vec<usize> = sample(rng, VENUE_FIRST.len() * VENUE_SECOND.len(), cfg.pools.venues).into_vec();
    venue_names.sort_unstable();
    let venues = venue_names
        .iter()
        .enumerate()
        .map(|(i, &n)| PlaceRef {
            canonical_id: format!("v{:03}", i + 1),
            name: format!("{} {}", VENUE_FIRST[n / VENUE_SECOND.len()], VENUE_SECOND[n % VENUE_SECOND.len()]),
            category: Some("Restaurant".into()),
            geo: Some(place(rng)),
        })
        .collect();
    let supermarkets = SUPERMARKETS[..cfg.pools.supermarkets]
        .iter()
        .enumerate()
        .map(|(i, name)| PlaceRef {
            canonical_id: format!("s{:03}", i + 1),
            name: name.to_string(),
            category: Some("Supermarket".into()),
            geo: Some(place(rng)),
        })
        .collect();
    World { offset, owner, friends, venues, supermarkets }
}

impl World {
    fn at(&self, cfg: &GenConfig, day: i64, minutes: i64) -> DateTime<FixedOffset> {
        let date = cfg.start_date + Duration::days(day);
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight");
        self.offset.from_local_datetime(&midnight).single().expect("fixed offset") + Duration::minutes(minutes)
    }

    fn geo(&self, p: &PlaceRef) -> GeoPoint {
        p.geo.expect("generated places have coordinates")
    }
}

fn day_phrase(sent: DateTime<FixedOffset>, target: DateTime<FixedOffset>) -> String {
    let lead = (target.date_naive() - sent.date_naive()).num_days();
    if lead == 1 {
        "tomorrow".into()
    } else {
        format!("on {}", WEEKDAYS[target.weekday().num_days_from_monday() as usize])
    }
}

fn clock(t: DateTime<FixedOffset>) -> String {
    t.format("%-I:%M %p").to_string()
}

fn record(source: SourceKind, at: DateTime<FixedOffset>, who: &[(Role, Vec<String>)], what: Content) -> PdtRecord {
    PdtRecord {
        doc_id: String::new(),
        source,
        when: TimeSpec::Instant(at),
        who: who.iter().cloned().collect(),
        place: None,
        what,
        how: String::new(),
        group_id: None,
    }
}

struct Gen<'a> {
    cfg: &'a GenConfig,
    rng: ChaCha8Rng,
    world: World,
    drafts: Vec<Draft>,
    gps: Vec<GpsFix>,
    codes: BTreeSet<u32>,
}

impl Gen<'_> {
    fn code(&mut self) -> u32 {
        loop {
            let c = self.rng.gen_range(100_000..1_000_000);
            if self.codes.insert(c) {
                return c;
            }
        }
    }

    fn push(&mut self, record: PdtRecord) {
        self.drafts.push(Draft { at: record.when.start(), record });
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn schedule(&mut self) -> Vec<Episode> {
        let cfg = self.cfg;
        let slots = if cfg.collision_stress { 2 * cfg.days } else { cfg.days };
        let mut chosen = sample(&mut self.rng, slots, cfg.n_episodes).into_vec();
        chosen.sort_unstable();
        let mut episodes: Vec<Episode> = Vec::with_capacity(chosen.len());
        for slot in chosen {
            let (day, meal) =
                if cfg.collision_stress { (slot / 2, slot % 2) } else { (slot, self.rng.gen_range(0..2)) };
            let blocked: BTreeSet<usize> = episodes.iter().filter(|e| e.day + 1 >= day).map(|e| e.venue).collect();
            let open: Vec<usize> = (0..cfg.pools.venues).filter(|v| !blocked.contains(v)).collect();
            let venue = *open.choose(&mut self.rng).expect("at least four venues");
            let first = if meal == 0 { 11 * 60 + 30 } else { 18 * 60 };
            let start = self.world.at(cfg, day as i64, first + 5 * self.rng.gen_range(0..=24));
            let [lo, hi] = cfg.timing.meal_minutes;
            let end = start + Duration::minutes(self.rng.gen_range(lo..=hi) as i64);
            let companions = if self.world.friends.is_empty() {
                Vec::new()
            } else {
                let n = self.rng.gen_range(1..=self.world.friends.len().min(3));
                let mut c = sample(&mut self.rng, self.world.friends.len(), n).into_vec();
                c.sort_unstable();
                c
            };
            episodes.push(Episode { day, venue, start, end, companions });
        }
        episodes
    }

    fn emit(&mut self, e: &Episode) {
        let em = self.cfg.emission;
        let venue = self.world.venues[e.venue].clone();
        let meal = if e.start.hour() < 15 { "lunch" } else { "dinner" };
        let me = alias(&self.world.owner);
        let friends: Vec<PersonRef> = e.companions.iter().map(|&i| self.world.friends[i].clone()).collect();
        let [lead_lo, lead_hi] = self.cfg.timing.planning_lead_days;

        if self.coin(em.planning) {
            let lead = self.rng.gen_range(lead_lo..=lead_hi) as i64;
            let hour = 9 + (e.day % 4) as i64 * 3 + if e.start.hour() < 15 { 0 } else { 1 };
            let mut t = self.world.at(self.cfg, e.day as i64 - lead, hour * 60 + self.rng.gen_range(0..30));
            let when = day_phrase(t, e.start);
            let everyone: Vec<String> = std::iter::once(me.clone()).chain(friends.iter().map(alias)).collect();
            let mut lines = vec![(me.clone(), format!("Want to grab {meal} at {} {when}?", venue.name))];
            lines.push((alias(&friends[0]), format!("Sure, {} {when} works for me.", venue.name)));
            if let Some(f) = friends.get(1) {
                lines.push((alias(f), "Count me in!".to_string()));
            }
            for (from, body) in lines {
                let to: Vec<String> = everyone.iter().filter(|p| **p != from).cloned().collect();
                let what = Content { body: Some(body), ..Default::default() };
                let mut r = record(SourceKind::Message, t, &[(Role::From, vec![from]), (Role::To, to)], what);
                r.how = "SMS".into();
                self.push(r);
                t += Duration::minutes(self.rng.gen_range(2..=8));
            }
        }

        if self.coin(em.reservation) {
            let lead = self.rng.gen_range(lead_lo..=lead_hi) as i64;
            let t = self.world.at(self.cfg, e.day as i64 - lead, self.rng.gen_range(10 * 60..20 * 60));
            let code = self.code();
            let what = Content {
                subject: Some(format!("Reservation confirmed: {} #{code}", venue.name)),
                body: Some(format!(
                    "Your table for {} at {} {} at {} is confirmed.",
                    friends.len() + 1,
                    venue.name,
                    day_phrase(t, e.start),
                    clock(e.start)
                )),
                ..Default::default()
            };
            let mut r = record(
                SourceKind::Email,
                t,
                &[(Role::From, vec![RESERVATIONS_FROM.into()]), (Role::To, vec![me.clone()])],
                what,
            );
            r.how = "TableBook".into();
            self.push(r);
        }

        if self.coin(em.ride) {
            let [lo, hi] = self.cfg.timing.ride_lead_minutes;
            let t = e.start - Duration::minutes(self.rng.gen_range(lo..=hi) as i64);
            self.ride(t, &venue);
        }

        if self.coin(em.gps) {
            let at = self.world.geo(&venue);
            let before = polar(&mut self.rng, at, 2_000.0, 5_000.0);
            self.gps.push(GpsFix { at: e.start - Duration::minutes(self.rng.gen_range(25..=35)), point: before });
            let n = self.rng.gen_range(6..=10);
            let span = (e.end - e.start).num_seconds();
            for i in 0..n {
                let t = e.start + Duration::seconds(span * i / (n - 1));
                let p = jitter(&mut self.rng, at);
                self.gps.push(GpsFix { at: t, point: p });
            }
            let after = polar(&mut self.rng, at, 2_000.0, 5_000.0);
            self.gps.push(GpsFix { at: e.end + Duration::minutes(self.rng.gen_range(25..=35)), point: after });
        }

        if self.coin(em.payment) {
            self.payment(e.end, &venue, 18.0..120.0);
        }

        if self.coin(em.post) {
            let t = e.end + Duration::minutes(self.rng.gen_range(0..=self.cfg.timing.post_delay_max_minutes) as i64);
            let names: Vec<&str> = friends.iter().map(|f| f.display_name.as_str()).collect();
            let caption = format!("Great {meal} at {} with {}", venue.name, names.join(" and "));
            let what = Content { caption: Some(caption), ..Default::default() };
            let mut r = record(
                SourceKind::SocialPost,
                t,
                &[(Role::Author, vec![me.clone()]), (Role::Tags, friends.iter().map(alias).collect())],
                what,
            );
            r.place = Some(venue.clone());
            r.how = "Instagram".into();
            self.push(r);
        }
    }

    fn ride(&mut self, t: DateTime<FixedOffset>, venue: &PlaceRef) {
        let code = self.code();
        let what = Content {
            subject: Some(format!("Your trip receipt #{code}")),
            body: Some(format!("Thanks for riding. Drop-off: {}.", venue.name)),
            amount: Some(f64::from(self.rng.gen_range(900..3500u32)) / 100.0),
            category: Some("Rideshare".into()),
            ..Default::default()
        };
        let mut r = record(
            SourceKind::Email,
            t,
            &[(Role::From, vec![RIDES_FROM.into()]), (Role::To, vec![alias(&self.world.owner)])],
            what,
        );
        r.place = Some(venue.clone());
        r.how = "Rideshare".into();
        self.push(r);
    }

    fn payment(&mut self, t: DateTime<FixedOffset>, place: &PlaceRef, range: std::ops::Range<f64>) {
        let amount = (self.rng.gen_range(range) * 100.0).round() / 100.0;
        let what = Content { amount: Some(amount), category: place.category.clone(), ..Default::default() };
        let mut r =
            record(SourceKind::BankTransaction, t, &[(Role::Payer, vec![self.world.owner.canonical_id.clone()])], what);
        r.place = Some(place.clone());
        r.how = "Visa *4417".into();
        self.push(r);
    }

    /// A day and venue with no episode at that venue within a day either side.
    fn quiet_slot(&mut self, episodes: &[Episode], taken: &BTreeSet<(usize, usize)>) -> (usize, usize) {
        let days = self.cfg.days;
        loop {
            let day = self.rng.gen_range(0..days);
            let venue = self.rng.gen_range(0..self.cfg.pools.venues);
            let clash = episodes.iter().any(|e| e.venue == venue && e.day + 1 >= day && day + 1 >= e.day)
                || taken.iter().any(|&(d, v)| v == venue && d + 1 >= day && day + 1 >= d);
            if !clash {
                return (day, venue);
            }
        }
    }

    fn distractors(&mut self, episodes: &[Episode], decoys: &mut Vec<Decoy>) {
        let d = self.cfg.distractors;
        for i in 0..d.keyword_emails {
            let day = self.rng.gen_range(0..self.cfg.days) as i64;
            let t = self.world.at(self.cfg, day, self.rng.gen_range(7 * 60..22 * 60));
            let subject = NEWSLETTER_SUBJECTS[i % NEWSLETTER_SUBJECTS.len()];
            let from = NEWSLETTER_SENDERS[self.rng.gen_range(0..NEWSLETTER_SENDERS.len())];
            let what = Content {
                subject: Some(format!("{subject} #{}", i + 1)),
                body: Some("Fresh ideas for lunch boxes and easy dinner recipes, plus restaurant news.".into()),
                ..Default::default()
            };
            let mut r = record(
                SourceKind::Email,
                t,
                &[(Role::From, vec![from.into()]), (Role::To, vec![alias(&self.world.owner)])],
                what,
            );
            r.how = "newsletter".into();
            self.push(r);
        }

        let mut taken: BTreeSet<(usize, usize)> = BTreeSet::new();
        for _ in 0..d.take_out {
            let (day, v) = self.quiet_slot(episodes, &taken);
            taken.insert((day, v));
            let venue = self.world.venues[v].clone();
            let t = self.world.at(self.cfg, day as i64, 15 * 60 + 30 + 5 * self.rng.gen_range(0..=15));
            self.payment(t, &venue, 9.0..40.0);
            if self.cfg.emission.gps > 0.0 {
                let at = self.world.geo(&venue);
                let far = polar(&mut self.rng, at, 2_000.0, 5_000.0);
                self.gps.push(GpsFix { at: t - Duration::minutes(25), point: far });
                for m in [-6, 2] {
                    let p = jitter(&mut self.rng, at);
                    self.gps.push(GpsFix { at: t + Duration::minutes(m), point: p });
                }
                let far = polar(&mut self.rng, at, 2_000.0, 5_000.0);
                self.gps.push(GpsFix { at: t + Duration::minutes(25), point: far });
            }
            decoys.push(Decoy {
                kind: "take_out".into(),
                when: GoldWhen::Date(t.date_naive()),
                place: venue,
                grade: Grade::TooNarrow,
            });
        }

        for _ in 0..d.supermarket {
            let day = self.rng.gen_range(0..self.cfg.days) as i64;
            let shop = self.world.supermarkets[self.rng.gen_range(0..self.world.supermarkets.len())].clone();
            let start = self.world.at(self.cfg, day, 7 * 60 + 30 + 5 * self.rng.gen_range(0..=24));
            let end = start + Duration::minutes(self.rng.gen_range(25..=40));
            if self.cfg.emission.gps > 0.0 {
                let at = self.world.geo(&shop);
                let span = (end - start).num_seconds();
                for i in 0..5 {
                    let p = jitter(&mut self.rng, at);
                    self.gps.push(GpsFix { at: start + Duration::seconds(span * i / 4), point: p });
                }
                let far = polar(&mut self.rng, at, 2_000.0, 5_000.0);
                self.gps.push(GpsFix { at: end + Duration::minutes(20), point: far });
            }
            self.payment(end, &shop, 12.0..180.0);
        }

        for _ in 0..d.stray_rides {
            let (day, v) = self.quiet_slot(episodes, &taken);
            let t = self.world.at(self.cfg, day as i64, 16 * 60 + self.rng.gen_range(0..60));
            let venue = self.world.venues[v].clone();
            self.ride(t, &venue);
        }
    }
}

/// Generate a corpus and its gold set. Same config, same bytes.
pub fn generate(cfg: &GenConfig) -> Result<(RawCorpus, GoldSet), GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = build_world(cfg, &mut rng);
    let mut g = Gen { cfg, rng, world, drafts: Vec::new(), gps: Vec::new(), codes: BTreeSet::new() };

    let episodes = g.schedule();
    for e in &episodes {
        g.emit(e);
    }
    let mut decoys = Vec::new();
    g.distractors(&episodes, &mut decoys);

    let Gen { world, mut drafts, mut gps, .. } = g;
    drafts.sort_by_key(|d| d.at);
    let width = drafts.len().to_string().len().max(4);
    let records: Vec<PdtRecord> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| PdtRecord { doc_id: format!("d{:0width$}", i + 1), ..d.record })
        .collect();
    gps.sort_by_key(|f| f.at);

    let gold_episodes = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| GoldEpisode {
            id: format!("g{:04}", i + 1),
            when: GoldWhen::Date(e.start.date_naive()),
            place: world.venues[e.venue].clone(),
            who: std::iter::once(world.owner.canonical_id.clone())
                .chain(e.companions.iter().map(|&c| world.friends[c].canonical_id.clone()))
                .collect(),
        })
        .collect();

    let mut people = vec![world.owner];
    people.extend(world.friends);
    let mut places = world.venues;
    places.extend(world.supermarkets);
    let raw = RawCorpus { records, people, places, aliases: Vec::new(), gps };
    let gold =
        GoldSet { corpus_digest: Some(raw.digest()), episodes: gold_episodes, decoys, judgments: BTreeMap::new() };
    Ok((raw, gold))
}

/// Write the corpus files and `gold.json` into `dir`.
pub fn write_generated(dir: &Path, raw: &RawCorpus, gold: &GoldSet) -> Result<(), GenError> {
    raw.write(dir)?;
    let path = dir.join("gold.json");
    let body = serde_json::to_string_pretty(gold).expect("serializable") + "\n";
    fs::write(&path, body).map_err(|source| GenError::Write(IngestError::Unwritable { path, source }))
}
