//! Generate a seeded corpus, reconstruct Eating_Out episodes and score them
//! against the generator's gold set, with and without bank and GPS sources.
//!
//! cargo run --release --example synthetic_eval [-- SEED]

use std::path::Path;

use pdt_episodes::dsl::load_library;
use pdt_episodes::engine::{run, EngineConfig, Report};
use pdt_episodes::eval::{evaluate, GoldSet, DEFAULT_KS};
use pdt_episodes::ingest::{preprocess, IngestParams, RawCorpus};
use pdt_episodes::model::SourceKind;
use pdt_episodes::synth::{generate, GenConfig};

fn score(raw: RawCorpus, gold: &GoldSet) -> String {
    let lib = load_library(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/eating_out.script")).expect("fixture");
    let params = IngestParams::default();
    let corpus = preprocess(raw, &params).expect("generated corpus is valid");
    let out = run(&lib, "Eating_Out", &corpus, &EngineConfig::default()).expect("known script");
    let report = Report::build(&out, &corpus, &params.stay);
    let gold = GoldSet { corpus_digest: None, ..gold.clone() };
    evaluate(&report.episodes, None, &gold, &DEFAULT_KS).expect("non-empty gold").to_text()
}

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let cfg = GenConfig { seed, ..Default::default() };
    let (raw, gold) = generate(&cfg).expect("default config is valid");
    println!(
        "seed {seed}: {} records, {} gps fixes, {} gold episodes\n",
        raw.records.len(),
        raw.gps.len(),
        gold.episodes.len()
    );
    println!("all sources\n{}", score(raw.clone(), &gold));
    let text_only = raw.without_sources(&[SourceKind::BankTransaction, SourceKind::GpsPoint]);
    println!("without bank and gps\n{}", score(text_only, &gold));
}
