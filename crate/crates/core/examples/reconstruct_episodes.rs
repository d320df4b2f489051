//! Run every top-level script of the fixture library over a corpus, print the
//! merge log and explain each episode.
//!
//! cargo run --example reconstruct_episodes [-- path/to/corpus]

use std::path::{Path, PathBuf};

use pdt_episodes::dsl::load_library;
use pdt_episodes::engine::{explain, run, EngineConfig, Report};
use pdt_episodes::ingest::{load_corpus, IngestParams};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| root.join("fixtures/corpora/dinner-week"));
    let lib = load_library(&root.join("fixtures/eating_out.script")).expect("fixture library");
    let params = IngestParams::default();
    let (corpus, _) = load_corpus(&dir, &params).unwrap_or_else(|e| {
        eprintln!("{}: {e}", dir.display());
        std::process::exit(4);
    });

    for script in lib.top_level() {
        let out = run(&lib, &script.name, &corpus, &EngineConfig::default()).expect("script runs");
        println!(
            "== {}: {} evidence units, {} iterations (bound {}), {} episode(s)",
            script.name,
            out.evidence_count,
            out.iterations,
            out.iteration_bound(),
            out.episodes.len()
        );
        for m in &out.merges {
            let parts: Vec<String> = m.parts.iter().map(|(id, s, _)| format!("{id} ({s:.3})")).collect();
            println!("merge {} <- {} = {:.3}", m.episode_id, parts.join(" + "), m.score);
        }
        let report = Report::build(&out, &corpus, &params.stay);
        for ep in &report.episodes {
            println!("\n{}", explain(&report, &ep.episode_id).expect("episode is in its report"));
        }
    }
}
