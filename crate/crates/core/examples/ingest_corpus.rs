//! Load a corpus directory and print what preprocessing derives from it:
//! quarantined lines, document groups, date mentions, place mentions and visits.
//!
//! cargo run --example ingest_corpus [-- path/to/corpus]

use std::path::PathBuf;

use pdt_episodes::ingest::{load_corpus, IngestParams};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpora/dinner-week")));
    let (corpus, quarantine) = match load_corpus(&dir, &IngestParams::default()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            std::process::exit(4);
        }
    };
    println!(
        "{} records, {} people, {} places, digest {}",
        corpus.records.len(),
        corpus.people.len(),
        corpus.places.len(),
        &corpus.digest[..12]
    );
    for r in &quarantine.rejected {
        println!("quarantined line {}: {}", r.line, r.reasons.join("; "));
    }

    println!("\ngroups");
    for (id, docs) in &corpus.groups {
        println!("  {id}: {}", docs.join(", "));
    }

    println!("\nannotations");
    for (id, a) in &corpus.annotations {
        if a.dates.is_empty() && a.places.is_empty() {
            continue;
        }
        let dates: Vec<String> = a.dates.iter().map(|d| format!("\"{}\" = {}", d.phrase, d.date)).collect();
        println!("  {id}: dates [{}] places [{}]", dates.join(", "), a.places.join(", "));
    }

    println!("\nvisits");
    for v in &corpus.visits {
        println!(
            "  {} {} {}..{}",
            v.doc_id(),
            v.place.name,
            v.arrive.format("%Y-%m-%d %H:%M"),
            v.depart.format("%H:%M")
        );
    }
}
