//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 invalid input (validation, unknown script or
//! episode, bad config, mismatched corpus), 3 script parse failure, 4 corpus
//! or other file failure. Diagnostics go to stderr; machine output to files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsl::{parse_library, validate_library, ClueDecl, ScriptLibrary};
use crate::engine::{explain, run as run_engine, EngineConfig, EngineError, Report, Thresholds};
use crate::eval::{evaluate, GoldSet, DEFAULT_KS};
use crate::ingest::{load_corpus, write_quarantine, IngestParams, Quarantine, StayParams, SNAP_RADIUS_M};
use crate::synth::{generate, write_generated, GenConfig, GenError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_IO: i32 = 4;

const CORPUS_FILES: [&str; 5] = ["records.jsonl", "people.jsonl", "places.jsonl", "aliases.tsv", "gps.csv"];

#[derive(Debug, Parser)]
#[command(name = "pdt-episodes", version, about = "Reconstruct everyday episodes from personal digital traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and preprocess a corpus; write a summary of what was derived.
    Ingest(IngestArgs),
    /// Reconstruct episodes of one script.
    Match(MatchArgs),
    /// Score a report against a gold file.
    Eval(EvalArgs),
    /// Write a synthetic corpus and its gold file.
    Gen(GenArgs),
    /// Print a narrative for one episode of a report.
    Explain(ExplainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StayFlags {
    /// Stay-point radius in metres.
    #[arg(long, default_value_t = crate::ingest::DEFAULT_D_MAX_M)]
    pub stay_d_max_m: f64,
    /// Minimum dwell for a visit, in minutes.
    #[arg(long, default_value_t = crate::ingest::DEFAULT_T_MIN_MINUTES)]
    pub stay_t_min_minutes: f64,
}

impl StayFlags {
    fn params(&self) -> Result<IngestParams, CliError> {
        positive("--stay-d-max-m", self.stay_d_max_m)?;
        positive("--stay-t-min-minutes", self.stay_t_min_minutes)?;
        Ok(IngestParams { stay: StayParams { d_max_m: self.stay_d_max_m, t_min_minutes: self.stay_t_min_minutes } })
    }
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub stay: StayFlags,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    /// Script library file.
    #[arg(long)]
    pub scripts: PathBuf,
    /// Top-level script to instantiate.
    #[arg(long)]
    pub script: String,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Report path; the manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the time_window key, in hours.
    #[arg(long)]
    pub time_window_h: Option<f64>,
    /// Override the geo_radius key, in metres.
    #[arg(long)]
    pub geo_radius_m: Option<f64>,
    #[command(flatten)]
    pub stay: StayFlags,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    pub k: Vec<usize>,
    /// Also write the full evaluation as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// JSON generator config; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub episode: String,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub messages: Vec<String>,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, messages: vec![message.into()] }
    }

    fn invalid(message: impl Into<String>) -> Self {
        CliError::new(EXIT_INVALID, message)
    }

    fn io(message: impl Into<String>) -> Self {
        CliError::new(EXIT_IO, message)
    }
}

fn positive(flag: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::invalid(format!("{flag} must be a positive number, got {v}")))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Everything needed to audit or repeat a `match` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub script: String,
    /// Input path → sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub corpus_digest: String,
    /// sha256 of the pretty-printed library.
    pub script_library_digest: String,
    pub thresholds: Thresholds,
    pub output: String,
    pub output_digest: String,
}

fn load_scripts(path: &Path) -> Result<ScriptLibrary, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    let mut lib = parse_library(&text).map_err(|errs| CliError {
        code: EXIT_PARSE,
        messages: errs.iter().map(|e| format!("{}:{e}", path.display())).collect(),
    })?;
    lib.base_dir = Some(path.parent().map(Path::to_path_buf).unwrap_or_default());
    let errs = validate_library(&lib);
    if !errs.is_empty() {
        return Err(CliError {
            code: EXIT_INVALID,
            messages: errs.iter().map(|e| format!("{}: {e}", path.display())).collect(),
        });
    }
    Ok(lib)
}

fn keyword_files(lib: &ScriptLibrary, script: &str) -> Vec<PathBuf> {
    let (Ok(plan), Some(base)) = (lib.plan(script), lib.base_dir.as_ref()) else { return Vec::new() };
    let mut files: Vec<PathBuf> = plan
        .steps
        .iter()
        .flat_map(|s| &s.leaves)
        .filter_map(|l| match &l.clue {
            ClueDecl::Keywords(k) => Some(base.join(&k.file)),
            ClueDecl::Metadata(_) => None,
        })
        .collect();
    files.sort();
    files.dedup();
    files
}

fn load(dir: &Path, params: &IngestParams) -> Result<(crate::ingest::Corpus, Quarantine), CliError> {
    load_corpus(dir, params).map_err(|e| CliError::io(format!("corpus {}: {e}", dir.display())))
}

fn report_quarantine(q: &Quarantine, out: &Path) -> Result<(), CliError> {
    if q.is_empty() {
        return Ok(());
    }
    let path = with_suffix(out, ".quarantine.jsonl");
    write_quarantine(q, &path).map_err(|e| CliError::io(e.to_string()))?;
    eprintln!("warning: {} record(s) quarantined, see {}", q.len(), path.display());
    Ok(())
}

pub fn cmd_match(a: &MatchArgs) -> Result<(), CliError> {
    let params = a.stay.params()?;
    if let Some(h) = a.time_window_h {
        if !(h.is_finite() && h >= 0.0) {
            return Err(CliError::invalid(format!("--time-window-h must be non-negative, got {h}")));
        }
    }
    if let Some(r) = a.geo_radius_m {
        positive("--geo-radius-m", r)?;
    }
    let lib = load_scripts(&a.scripts)?;
    match lib.get(&a.script) {
        Some(s) if s.params.is_empty() => {}
        _ => return Err(CliError::invalid(format!("unknown top-level script `{}`", a.script))),
    }
    let (corpus, quarantine) = load(&a.corpus, &params)?;
    report_quarantine(&quarantine, &a.out)?;

    let config = EngineConfig { time_window_h: a.time_window_h, geo_radius_m: a.geo_radius_m };
    let out = run_engine(&lib, &a.script, &corpus, &config).map_err(|e| match e {
        EngineError::Lexicon(_) | EngineError::UnknownScript(_) | EngineError::Plan(_) => {
            CliError::invalid(e.to_string())
        }
    })?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let report = Report::build(&out, &corpus, &params.stay);
    let body = report.to_json();
    write(&a.out, &body)?;

    let mut inputs = BTreeMap::new();
    let mut files = vec![a.scripts.clone()];
    files.extend(keyword_files(&lib, &a.script));
    files.extend(CORPUS_FILES.iter().map(|f| a.corpus.join(f)).filter(|p| p.exists()));
    for f in files {
        let bytes = fs::read(&f).map_err(|e| CliError::io(format!("cannot read {}: {e}", f.display())))?;
        inputs.insert(f.display().to_string(), sha256_hex(&bytes));
    }
    let manifest = RunManifest {
        tool_version: report.run.tool_version.clone(),
        script: a.script.clone(),
        inputs,
        corpus_digest: corpus.digest.clone(),
        script_library_digest: sha256_hex(lib.to_string().as_bytes()),
        thresholds: report.run.thresholds.clone(),
        output: a.out.display().to_string(),
        output_digest: sha256_hex(body.as_bytes()),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write(&with_suffix(&a.out, ".manifest.json"), &text)?;
    eprintln!("{} episode(s) written to {}", report.episodes.len(), a.out.display());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    if a.k.is_empty() || a.k.contains(&0) {
        return Err(CliError::invalid("--k needs positive cutoffs"));
    }
    let report = Report::from_json(&read(&a.pred)?)
        .map_err(|e| CliError::invalid(format!("{}: not a report: {e}", a.pred.display())))?;
    let gold: GoldSet = serde_json::from_str(&read(&a.gold)?)
        .map_err(|e| CliError::invalid(format!("{}: not a gold file: {e}", a.gold.display())))?;
    let ev = evaluate(&report.episodes, Some(&report.run.corpus_digest), &gold, &a.k)
        .map_err(|e| CliError::invalid(e.to_string()))?;
    print!("{}", ev.to_text());
    if let Some(out) = &a.out {
        write(out, &(serde_json::to_string_pretty(&ev).expect("serializable") + "\n"))?;
    }
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<GenConfig>(&read(p)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?,
        None => GenConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let (raw, gold) = generate(&cfg).map_err(|e| CliError::invalid(e.to_string()))?;
    write_generated(&a.out, &raw, &gold).map_err(|e| match e {
        GenError::InvalidConfig(m) => CliError::invalid(m),
        GenError::Write(w) => CliError::io(w.to_string()),
    })?;
    write(&a.out.join("gen_config.json"), &(serde_json::to_string_pretty(&cfg).expect("serializable") + "\n"))?;
    eprintln!(
        "{} records, {} gps fixes, {} gold episodes written to {}",
        raw.records.len(),
        raw.gps.len(),
        gold.episodes.len(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<(), CliError> {
    let report = Report::from_json(&read(&a.report)?)
        .map_err(|e| CliError::invalid(format!("{}: not a report: {e}", a.report.display())))?;
    let text = explain(&report, &a.episode).map_err(|e| CliError::invalid(e.to_string()))?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    corpus_digest: &'a str,
    records: usize,
    people: usize,
    places: usize,
    stay: StayParams,
    snap_radius_m: f64,
    visits: &'a [crate::ingest::Visit],
    groups: &'a BTreeMap<String, Vec<String>>,
    annotations: &'a BTreeMap<String, crate::ingest::Annotation>,
    quarantined: usize,
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<(), CliError> {
    let params = a.stay.params()?;
    let (corpus, quarantine) = load(&a.corpus, &params)?;
    report_quarantine(&quarantine, &a.out)?;
    let summary = IngestSummary {
        corpus_digest: &corpus.digest,
        records: corpus.records.len(),
        people: corpus.people.len(),
        places: corpus.places.len(),
        stay: params.stay,
        snap_radius_m: SNAP_RADIUS_M,
        visits: &corpus.visits,
        groups: &corpus.groups,
        annotations: &corpus.annotations,
        quarantined: quarantine.len(),
    };
    write(&a.out, &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"))?;
    eprintln!(
        "{} records, {} visits, {} groups, {} quarantined",
        corpus.records.len(),
        corpus.visits.len(),
        corpus.groups.len(),
        quarantine.len()
    );
    Ok(())
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Match(a) => cmd_match(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Explain(a) => cmd_explain(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            for m in &e.messages {
                eprintln!("error: {m}");
            }
            e.code
        }
    }
}
