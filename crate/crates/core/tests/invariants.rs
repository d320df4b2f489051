use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use pdt_episodes::dsl::{load_library, parse_library, ScriptLibrary};
use pdt_episodes::engine::{run, EngineConfig, Report};
use pdt_episodes::eval::{average_precision_at_k, match_predictions, ndcg_at_k, GoldSet};
use pdt_episodes::geo::GeoPoint;
use pdt_episodes::ingest::{
    explicate_dates, preprocess, stay_points, Corpus, GpsFix, IngestParams, RawCorpus, StayParams,
};
use pdt_episodes::model::validate_record;
use pdt_episodes::synth::{generate, write_generated, Distractors, Emission, GenConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn library() -> ScriptLibrary {
    load_library(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/eating_out.script")).unwrap()
}

fn small_config(seed: u64, p: f64, episodes: usize) -> GenConfig {
    GenConfig {
        seed,
        days: 30,
        n_episodes: episodes,
        emission: Emission { gps: 1.0, payment: 1.0, ..Emission::all(p) },
        distractors: Distractors { keyword_emails: 6, take_out: 2, supermarket: 3, stray_rides: 2 },
        ..Default::default()
    }
}

fn reconstruct(raw: RawCorpus) -> (Corpus, Report) {
    let params = IngestParams::default();
    let corpus = preprocess(raw, &params).unwrap();
    let out = run(&library(), "Eating_Out", &corpus, &EngineConfig::default()).unwrap();
    let report = Report::build(&out, &corpus, &params.stay);
    (corpus, report)
}

fn corpus_strategy() -> impl Strategy<Value = GenConfig> {
    (any::<u64>(), 0.0f64..=1.0, 1usize..=20).prop_map(|(s, p, n)| small_config(s, p, n))
}

fn t0() -> DateTime<FixedOffset> {
    FixedOffset::west_opt(5 * 3600).unwrap().with_ymd_and_hms(2020, 5, 1, 8, 0, 0).unwrap()
}

/// Sorted fixes: a random walk of short hops and occasional jumps.
fn track() -> impl Strategy<Value = Vec<GpsFix>> {
    prop::collection::vec((1i64..=15, prop::bool::weighted(0.15), -60.0f64..60.0, -60.0f64..60.0), 0..60).prop_map(
        |steps| {
            let mut at = t0();
            let (mut lat, mut lon) = (40.0, -75.0);
            steps
                .into_iter()
                .map(|(minutes, jump, dy, dx)| {
                    at += Duration::minutes(minutes);
                    let scale = if jump { 40.0 } else { 1.0 };
                    lat += dy * scale / 111_000.0;
                    lon += dx * scale / 85_000.0;
                    GpsFix { at, point: GeoPoint::new(lat, lon).unwrap() }
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn records_survive_json(cfg in corpus_strategy(), text in "[ -~]{0,40}") {
        let (raw, _) = generate(&cfg).unwrap();
        for mut r in raw.records {
            r.what.body = Some(text.clone());
            let v = serde_json::to_value(&r).unwrap();
            prop_assert_eq!(validate_record(&v).unwrap(), r);
        }
    }

    #[test]
    fn input_order_does_not_matter(cfg in corpus_strategy(), shuffle_seed in any::<u64>()) {
        let (raw, _) = generate(&cfg).unwrap();
        let mut permuted = raw.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        permuted.records.shuffle(&mut rng);
        permuted.gps.shuffle(&mut rng);
        permuted.places.shuffle(&mut rng);
        let (a, ra) = reconstruct(raw);
        let (b, rb) = reconstruct(permuted);
        prop_assert_eq!(a.digest, b.digest);
        prop_assert_eq!(a.visits, b.visits);
        prop_assert_eq!(ra.to_json(), rb.to_json());
    }

    #[test]
    fn preprocessing_keeps_record_times(cfg in corpus_strategy()) {
        let (raw, _) = generate(&cfg).unwrap();
        let before = raw.records.clone();
        let (corpus, _) = reconstruct(raw);
        for r in &before {
            let kept = &corpus.records[&r.doc_id];
            prop_assert_eq!(&kept.when, &r.when);
            prop_assert_eq!(&kept.what, &r.what);
            prop_assert_eq!(explicate_dates(kept), explicate_dates(r));
        }
    }

    #[test]
    fn evidence_points_at_real_documents(cfg in corpus_strategy()) {
        let (raw, _) = generate(&cfg).unwrap();
        let (corpus, report) = reconstruct(raw);
        let lib = library();
        let plan_steps: BTreeSet<String> = lib.get("Eating_Out").unwrap().body.iter().map(|s| s.name().to_string()).collect();
        for ep in &report.episodes {
            prop_assert!(!ep.evidence.is_empty());
            prop_assert!(ep.score > 0.0 && ep.score < 1.0);
            for ev in &ep.evidence {
                prop_assert!(corpus.records.contains_key(&ev.doc_id), "{} not in corpus", ev.doc_id);
                prop_assert!(plan_steps.contains(&ev.step), "unknown step {}", ev.step);
                prop_assert!(ev.doc_score > 0.0 && ev.doc_score <= ep.score + 1e-12);
            }
        }
    }

    #[test]
    fn alignment_accounts_for_every_gold_episode(cfg in corpus_strategy(), keep in prop::collection::vec(any::<bool>(), 0..64)) {
        let (raw, gold) = generate(&cfg).unwrap();
        let (_, report) = reconstruct(raw);
        let preds: Vec<_> = report
            .episodes
            .iter()
            .enumerate()
            .filter(|(i, _)| keep.get(*i).copied().unwrap_or(true))
            .map(|(_, e)| e.clone())
            .collect();
        let a = match_predictions(&preds, &gold);
        prop_assert_eq!(a.matched() + a.unmatched_gold(), gold.episodes.len());
        let taken: Vec<usize> = a.gold_for.iter().flatten().copied().collect();
        let distinct: BTreeSet<usize> = taken.iter().copied().collect();
        prop_assert_eq!(taken.len(), distinct.len());
    }

    #[test]
    fn stays_are_disjoint_and_meet_thresholds(points in track(), d_max in 20.0f64..150.0, t_min in 5.0f64..40.0) {
        let params = StayParams { d_max_m: d_max, t_min_minutes: t_min };
        let runs = stay_points(&points, &params).unwrap();
        let mut last_end = 0;
        for r in &runs {
            prop_assert!(r.start >= last_end && r.end > r.start + 1);
            last_end = r.end;
            let run = &points[r.clone()];
            let span = run[run.len() - 1].at - run[0].at;
            prop_assert!(span.num_seconds() as f64 >= t_min * 60.0);
            let geo: Vec<GeoPoint> = run.iter().map(|f| f.point).collect();
            let c = GeoPoint::centroid(&geo).unwrap();
            for p in &geo {
                prop_assert!(p.distance_m(&geo[0]) <= d_max);
                prop_assert!(p.distance_m(&c) <= d_max);
            }
        }
    }
}

proptest! {
    #[test]
    fn metrics_stay_in_unit_interval(rel in prop::collection::vec(any::<bool>(), 0..20), k in 1usize..25, extra in 0usize..5) {
        let total = rel.iter().filter(|r| **r).count() + extra;
        let ap = average_precision_at_k(&rel, k, total);
        prop_assert!((0.0..=1.0).contains(&ap));
        let gains: Vec<f64> = rel.iter().map(|r| if *r { 1.0 } else { 0.0 }).collect();
        let n = ndcg_at_k(&gains, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
    }

    #[test]
    fn appending_below_the_cutoff_changes_nothing(
        rel in prop::collection::vec(any::<bool>(), 1..15),
        tail in prop::collection::vec(any::<bool>(), 0..10),
        total in 0usize..20,
    ) {
        let k = rel.len();
        let mut longer = rel.clone();
        longer.extend(&tail);
        prop_assert_eq!(average_precision_at_k(&rel, k, total), average_precision_at_k(&longer, k, total));
    }

    #[test]
    fn ndcg_is_one_exactly_for_sorted_gains(gains in prop::collection::vec(0u8..4, 1..9)) {
        let g: Vec<f64> = gains.iter().map(|&x| x as f64).collect();
        prop_assume!(g.iter().any(|&x| x > 0.0));
        let sorted = g.windows(2).all(|w| w[0] >= w[1]);
        let n = ndcg_at_k(&g, g.len());
        prop_assert_eq!(n == 1.0, sorted, "gains {:?} ndcg {}", g, n);
    }

    #[test]
    fn printed_scripts_parse_back(
        goal in "[ -~]{0,30}",
        category in "[A-Za-z][A-Za-z ]{0,12}",
        base in prop::option::of(0.0f64..1.0),
        discount in prop::option::of(0.0f64..1.0),
        w1 in 0.0f64..=1.0,
        w2 in 0.0f64..=1.0,
        hours in 1u32..48,
        jaccard in 0.0f64..=1.0,
        optional_where in any::<bool>(),
    ) {
        let base = base.map(|b| format!(" base {b}")).unwrap_or_default();
        let discount = discount.map(|d| format!("  attach_discount {d}\n")).unwrap_or_default();
        let req = if optional_where { "optional" } else { "required" };
        let goal = goal.replace('\\', "\\\\").replace('"', "\\\"");
        let text = format!(
            "script Outing {{\n  goal: \"{goal}\"\n  prop w: when\n  prop p: where\n  prop c: who\n\
             action pay {{ prop t: when prop at: where metadata what.category = \"{category}\" on BankTransaction }}\n\
             action chat {{ prop t: when prop ps: who(from, to) keywords \"kw.txt\" in subject:{w1} body:{w2} }}\n\
             order chat < pay\n  strong pay{base}\n  weak chat\n{discount}\
             lift pay.t -> w\n  lift pay.at -> p\n  lift chat.t -> w\n  lift chat.ps -> c\n\
             key p {req} exact_place\n  key w required time_window({hours})\n  key c optional who_jaccard({jaccard})\n}}\n"
        );
        let lib = parse_library(&text).unwrap();
        let printed = lib.to_string();
        let again = parse_library(&printed).unwrap();
        prop_assert_eq!(&lib, &again);
        prop_assert_eq!(printed, again.to_string());
    }
}

#[test]
fn quarantined_records_never_reach_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, gold) = generate(&small_config(5, 1.0, 10)).unwrap();
    write_generated(dir.path(), &raw, &gold).unwrap();
    let path = dir.path().join("records.jsonl");
    let mut text = std::fs::read_to_string(&path).unwrap();
    let first = raw.records.iter().find(|r| r.what.category.as_deref() == Some("Restaurant")).unwrap();
    let mut bad = serde_json::to_value(first).unwrap();
    bad["doc_id"] = "bad-time".into();
    bad["when"] = "last thursday".into();
    text.push_str(&(bad.to_string() + "\n"));
    let mut bad = serde_json::to_value(first).unwrap();
    bad["doc_id"] = "bad-source".into();
    bad["source"] = "Carrier pigeon".into();
    text.push_str(&(bad.to_string() + "\n"));
    text.push_str("{\"doc_id\": \"bad-json\", \"what\": {\"subject\": \"dinner\"\n");
    std::fs::write(&path, text).unwrap();

    let (raw_read, q) = RawCorpus::read(dir.path()).unwrap();
    assert_eq!(q.len(), 3);
    assert_eq!(raw_read.records.len(), raw.records.len());
    let (corpus, report) = reconstruct(raw_read);
    assert!(corpus.records.keys().all(|k| !k.starts_with("bad-")));
    assert!(report.episodes.iter().flat_map(|e| &e.evidence).all(|ev| !ev.doc_id.starts_with("bad-")));
    let gold = GoldSet { corpus_digest: None, ..gold };
    assert_eq!(match_predictions(&report.episodes, &gold).matched(), 10);
}
