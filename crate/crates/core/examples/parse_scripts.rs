//! Load the Eating_Out library, print its plan and the pretty-printed source.
//!
//! cargo run --example parse_scripts [-- path/to/file.script]

use std::path::PathBuf;

use pdt_episodes::dsl::{load_library, LoadError};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/eating_out.script")));
    let lib = match load_library(&path) {
        Ok(lib) => lib,
        Err(LoadError::Parse(errs)) => {
            errs.iter().for_each(|e| eprintln!("{}: {e}", path.display()));
            std::process::exit(3);
        }
        Err(LoadError::Invalid(errs)) => {
            errs.iter().for_each(|e| eprintln!("{}: {e}", path.display()));
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    for script in lib.top_level() {
        let name = &script.name;
        let plan = lib.plan(name).expect("validated");
        println!("{name}");
        for step in &plan.steps {
            for leaf in &step.leaves {
                println!("  {:<20} {:<48} {:?} {:.2}", step.name, leaf.path.join("/"), leaf.strength, leaf.base);
            }
        }
    }
    println!();
    print!("{lib}");
}
