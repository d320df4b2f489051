pub mod cli;
pub mod clues;
pub mod dsl;
pub mod engine;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod model;
pub mod score;
pub mod synth;
pub mod text;

mod unionfind;
