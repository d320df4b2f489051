//! One line per acceptance criterion. Runs without the libtest harness so the
//! PASS/FAIL lines are printed even when everything passes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pdt_episodes::dsl::{load_library, parse_library, validate_library, DslError, ScriptLibrary, ValidationError};
use pdt_episodes::engine::{hooper, run, EngineConfig, Report, RunOutput};
use pdt_episodes::eval::{average_precision_at_k, evaluate, ndcg_at_k, EvalReport, GoldSet, DEFAULT_KS};
use pdt_episodes::ingest::{preprocess, Corpus, IngestParams, RawCorpus};
use pdt_episodes::model::SourceKind;
use pdt_episodes::synth::{generate, write_generated, Distractors, Emission, GenConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn library() -> ScriptLibrary {
    load_library(&fixture("eating_out.script")).expect("fixture library loads")
}

fn gen_config(name: &str) -> GenConfig {
    let text = std::fs::read_to_string(fixture(&format!("gen/{name}.json"))).expect("config fixture");
    serde_json::from_str(&text).expect("config parses")
}

struct Pipeline {
    out: RunOutput,
    eval: EvalReport,
}

fn pipeline(lib: &ScriptLibrary, raw: RawCorpus, gold: &GoldSet) -> Pipeline {
    let params = IngestParams::default();
    let corpus = preprocess(raw, &params).expect("generated corpus is valid");
    let out = run(lib, "Eating_Out", &corpus, &EngineConfig::default()).expect("script runs");
    let report = Report::build(&out, &corpus, &params.stay);
    let gold = GoldSet { corpus_digest: None, ..gold.clone() };
    let eval = evaluate(&report.episodes, None, &gold, &DEFAULT_KS).expect("gold is non-empty");
    Pipeline { out, eval }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fold_oracle(xs: &[f64]) -> f64 {
    1.0 - xs.iter().map(|s| 1.0 - s).product::<f64>()
}

fn c1_hooper_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let n = rng.gen_range(1..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=0.95)).collect();
        let h = hooper(&xs).unwrap();
        if (h - fold_oracle(&xs)).abs() > 1e-12 {
            failures.push(format!("list {i}: product form differs"));
        }
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut rng);
        if hooper(&shuffled).unwrap() != h {
            failures.push(format!("list {i}: order dependent"));
        }
        let extra = rng.gen_range(0.0..=0.95);
        let mut longer = xs.clone();
        longer.push(extra);
        if hooper(&longer).unwrap() < h {
            failures.push(format!("list {i}: not monotone"));
        }
        if h >= 1.0 {
            failures.push(format!("list {i}: reached 1"));
        }
        if (hooper(&xs[..1]).unwrap() - xs[0]).abs() > 1e-12 {
            failures.push(format!("list {i}: singleton not identity"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("took {elapsed:?}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() { format!("1000 lists in {elapsed:?}") } else { failures.join("; ") },
    )
}

fn c2_worked_examples() -> Outcome {
    let a = hooper(&[0.8, 0.3]).unwrap();
    let b = hooper(&[0.3, 0.3, 0.3]).unwrap();
    let ok = (a - 0.86).abs() < 1e-12 && (b - 0.657).abs() < 1e-12;
    check(ok, format!("H(0.8,0.3)={a:.12} H(0.3,0.3,0.3)={b:.12}"))
}

fn c3_full_emission() -> Outcome {
    let start = Instant::now();
    let (raw, gold) = generate(&gen_config("full_emission")).unwrap();
    let p = pipeline(&library(), raw, &gold);
    let elapsed = start.elapsed();
    let ok = p.eval.recall_proxy == 1.0 && p.eval.precision == 1.0 && elapsed < Duration::from_secs(10);
    check(
        ok,
        format!(
            "{} gold, recall {:.4} precision {:.4}, {} iterations, {elapsed:?}",
            gold.episodes.len(),
            p.eval.recall_proxy,
            p.eval.precision,
            p.out.iterations
        ),
    )
}

fn c4_distractors(p: &Pipeline, gold: usize) -> Outcome {
    let ok = p.eval.recall_proxy == 1.0 && p.eval.precision >= 0.9;
    check(
        ok,
        format!(
            "{gold} gold, {} predictions, recall {:.4} precision {:.5}",
            p.eval.predictions, p.eval.recall_proxy, p.eval.precision
        ),
    )
}

fn c5_ablation() -> Outcome {
    let lib = library();
    let (raw, gold) = generate(&gen_config("default")).unwrap();
    let full = pipeline(&lib, raw.clone(), &gold);
    let text = pipeline(&lib, raw.without_sources(&[SourceKind::BankTransaction, SourceKind::GpsPoint]), &gold);
    let ok = text.eval.precision <= full.eval.precision && text.eval.recall_proxy <= full.eval.recall_proxy;
    check(
        ok,
        format!(
            "all sources P={:.4} R={:.4}; without bank+gps P={:.4} R={:.4}",
            full.eval.precision, full.eval.recall_proxy, text.eval.precision, text.eval.recall_proxy
        ),
    )
}

fn permutations(xs: &[f64]) -> Vec<Vec<f64>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut all = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            all.push(tail);
        }
    }
    all
}

fn c6_metrics() -> Outcome {
    let ap = average_precision_at_k(&[true, false, true], 3, 2);
    let ap_oracle = (1.0 + 2.0 / 3.0) / 2.0;
    let gains = [5.0, 1.0, 4.0];
    let dcg = |g: &[f64]| g.iter().enumerate().map(|(i, x)| x / ((i + 2) as f64).log2()).sum::<f64>();
    let idcg = permutations(&gains).iter().map(|p| dcg(p)).fold(f64::MIN, f64::max);
    let ndcg = ndcg_at_k(&gains, 3);
    let ndcg_oracle = dcg(&gains) / idcg;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sorted_ok = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let mut g: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
        g.sort_by(|a, b| b.total_cmp(a));
        if g[0] > 0.0 && ndcg_at_k(&g, n) != 1.0 {
            sorted_ok = false;
        }
    }
    let ok = (ap - ap_oracle).abs() < 1e-12
        && format!("{ap:.4}") == "0.8333"
        && (ndcg - ndcg_oracle).abs() < 1e-12
        && (ndcg - 0.9510).abs() < 1e-4
        && sorted_ok;
    check(ok, format!("AP@3={ap:.4} nDCG@3={ndcg:.4} sorted lists score 1: {sorted_ok}"))
}

fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (raw, gold) = generate(&GenConfig { n_episodes: 40, days: 60, ..Default::default() }).unwrap();
    write_generated(dir.path(), &raw, &gold).unwrap();
    let scripts = fixture("eating_out.script");
    let out = dir.path().join("episodes.json");
    let args = |out: &Path| {
        vec![
            "pdt-episodes".to_string(),
            "match".into(),
            "--scripts".into(),
            scripts.display().to_string(),
            "--script".into(),
            "Eating_Out".into(),
            "--corpus".into(),
            dir.path().display().to_string(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let code_a = pdt_episodes::cli::run(args(&out));
    let first = std::fs::read(&out).unwrap();
    let code_b = pdt_episodes::cli::run(args(&out));
    let second = std::fs::read(&out).unwrap();
    let identical = code_a == 0 && code_b == 0 && first == second;

    let lib = library();
    let params = IngestParams::default();
    let report = |raw: RawCorpus| -> (Corpus, String) {
        let corpus = preprocess(raw, &params).unwrap();
        let out = run(&lib, "Eating_Out", &corpus, &EngineConfig::default()).unwrap();
        let json = Report::build(&out, &corpus, &params.stay).to_json();
        (corpus, json)
    };
    let (_, base) = report(raw.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut permuted = raw;
    permuted.records.shuffle(&mut rng);
    permuted.gps.shuffle(&mut rng);
    permuted.people.shuffle(&mut rng);
    permuted.places.shuffle(&mut rng);
    let (_, shuffled) = report(permuted);
    let invariant = base == shuffled;
    check(
        identical && invariant,
        format!("repeat runs byte-identical: {identical}; record order invariant: {invariant}"),
    )
}

fn c8_termination() -> Outcome {
    let lib = library();
    let params = IngestParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = (0usize, 0usize);
    let mut failures = Vec::new();
    for i in 0..100 {
        let days = rng.gen_range(10..=40);
        let cfg = GenConfig {
            seed: rng.gen(),
            days,
            n_episodes: rng.gen_range(0..=days),
            emission: Emission {
                planning: rng.gen_range(0.0..=1.0),
                reservation: rng.gen_range(0.0..=1.0),
                ride: rng.gen_range(0.0..=1.0),
                gps: rng.gen_range(0.0..=1.0),
                payment: rng.gen_range(0.0..=1.0),
                post: rng.gen_range(0.0..=1.0),
            },
            distractors: Distractors {
                keyword_emails: rng.gen_range(0..=10),
                take_out: rng.gen_range(0..=5),
                supermarket: rng.gen_range(0..=5),
                stray_rides: rng.gen_range(0..=5),
            },
            collision_stress: rng.gen_bool(0.3),
            ..Default::default()
        };
        let (raw, _) = match generate(&cfg) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("config {i}: {e}"));
                continue;
            }
        };
        let corpus = preprocess(raw, &params).unwrap();
        let out = run(&lib, "Eating_Out", &corpus, &EngineConfig::default()).unwrap();
        if out.iterations > out.iteration_bound() {
            failures.push(format!("config {i}: {} iterations > bound {}", out.iterations, out.iteration_bound()));
        }
        if out.iterations > worst.0 {
            worst = (out.iterations, out.iteration_bound());
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("100 corpora, most iterations {} (bound {})", worst.0, worst.1)
        } else {
            failures.join("; ")
        },
    )
}

fn c9_merge_monotone(p: &Pipeline) -> Outcome {
    let merges = &p.out.merges;
    let bad_score = merges.iter().filter(|m| m.parts.iter().any(|(_, s, _)| m.score < *s)).count();
    let bad_cover = merges.iter().filter(|m| m.parts.iter().any(|(_, _, w)| !m.summary.covers(w))).count();
    let ok = !merges.is_empty() && bad_score == 0 && bad_cover == 0;
    check(ok, format!("{} merges, {bad_score} lowered a score, {bad_cover} dropped a dimension value", merges.len()))
}

fn c10_dsl() -> Outcome {
    let text = std::fs::read_to_string(fixture("eating_out.script")).unwrap();
    let lib = parse_library(&text).unwrap();
    let reparsed = parse_library(&lib.to_string()).unwrap();
    let round_trip = lib == reparsed;

    let invalid = |name: &str| std::fs::read_to_string(fixture(&format!("invalid/{name}"))).unwrap();
    let cycle = parse_library(&invalid("cycle.script"))
        .map(|l| validate_library(&l).iter().any(|e| matches!(e, ValidationError::CyclicOrdering { .. })))
        .unwrap_or(false);
    let range = parse_library(&invalid("score_range.script"))
        .map(|l| validate_library(&l).iter().any(|e| matches!(e, ValidationError::ScoreOutOfRange { .. })))
        .unwrap_or(false);
    let unresolved = match parse_library(&invalid("unresolved.script")) {
        Err(errs) => errs.iter().any(|e| matches!(e, DslError::UnresolvedReference { .. })),
        Ok(_) => false,
    };
    check(
        round_trip && cycle && range && unresolved,
        format!("round trip {round_trip}; cyclic ordering {cycle}; score out of range {range}; unresolved reference {unresolved}"),
    )
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() {
    let distractor = guarded(|| {
        let (raw, gold) = generate(&gen_config("distractors")).unwrap();
        let n = gold.episodes.len();
        Ok((pipeline(&library(), raw, &gold), n))
    });
    let (big, big_gold) = match distractor {
        Ok((p, n)) => (Some(p), n),
        Err(_) => (None, 0),
    };
    let shared = |f: fn(&Pipeline) -> Outcome| match &big {
        Some(p) => guarded(|| f(p)),
        None => Err("distractor corpus could not be built".to_string()),
    };

    let results: Vec<(&str, Outcome)> = vec![
        ("hooper algebra", guarded(c1_hooper_algebra)),
        ("hooper worked examples", guarded(c2_worked_examples)),
        ("full emission recovery", guarded(c3_full_emission)),
        (
            "distractor precision",
            match &big {
                Some(p) => guarded(|| c4_distractors(p, big_gold)),
                None => Err("distractor corpus could not be built".to_string()),
            },
        ),
        ("source ablation", guarded(c5_ablation)),
        ("ranking metrics", guarded(c6_metrics)),
        ("determinism", guarded(c7_determinism)),
        ("termination bound", guarded(c8_termination)),
        ("merge monotonicity", shared(c9_merge_monotone)),
        ("script round trip and rejection", guarded(c10_dsl)),
    ];

    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
