use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdt-episodes"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn match_cmd(scripts: &Path, script: &str, corpus: &Path, out: &Path) -> Command {
    let mut c = bin();
    c.arg("match")
        .arg("--scripts")
        .arg(scripts)
        .arg("--script")
        .arg(script)
        .arg("--corpus")
        .arg(corpus)
        .arg("--out")
        .arg(out);
    c
}

fn gen(dir: &Path, config: &str) -> Output {
    exec(bin().arg("gen").arg("--config").arg(fixture(config)).arg("--out").arg(dir))
}

#[test]
fn match_writes_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("episodes.json");
    let o = exec(&mut match_cmd(&fixture("eating_out.script"), "Eating_Out", &fixture("corpora/dinner-week"), &out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let eps = report["episodes"].as_array().unwrap();
    assert_eq!(eps.len(), 1);
    assert_eq!(eps[0]["episode_id"], "Eating_Out:b1");

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("episodes.json.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["script"], "Eating_Out");
    assert_eq!(manifest["corpus_digest"], report["run"]["corpus_digest"]);
    let inputs = manifest["inputs"].as_object().unwrap();
    assert!(inputs.keys().any(|k| k.ends_with("restaurant.txt")));
    assert!(inputs.values().all(|v| v.as_str().unwrap().len() == 64));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r.json");
    let corpus = fixture("corpora/dinner-week");
    let scripts = fixture("eating_out.script");

    assert_eq!(code(&exec(&mut match_cmd(&scripts, "Eating_Outt", &corpus, &out))), 2);
    assert_eq!(code(&exec(&mut match_cmd(&fixture("invalid/cycle.script"), "a", &corpus, &out))), 2);
    assert_eq!(code(&exec(&mut match_cmd(&fixture("invalid/score_range.script"), "a", &corpus, &out))), 2);
    assert_eq!(code(&exec(&mut match_cmd(&fixture("invalid/unresolved.script"), "a", &corpus, &out))), 3);
    assert_eq!(code(&exec(&mut match_cmd(&scripts, "Eating_Out", &tmp.path().join("missing"), &out))), 4);
    assert_eq!(code(&exec(bin().arg("frobnicate"))), 2);
    assert_eq!(code(&exec(bin().arg("--help"))), 0);

    let bad = exec(match_cmd(&scripts, "Eating_Out", &corpus, &out).arg("--geo-radius-m").arg("-5"));
    assert_eq!(code(&bad), 2);
    assert!(!out.exists());
}

#[test]
fn syntax_error_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let scripts = tmp.path().join("broken.script");
    std::fs::write(&scripts, "script Broken {\n  strong pay base\n}\n").unwrap();
    let o = exec(&mut match_cmd(&scripts, "Broken", &fixture("corpora/dinner-week"), &tmp.path().join("r.json")));
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn gen_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen(a.path(), "gen/default.json")), 0);
    assert_eq!(code(&gen(b.path(), "gen/default.json")), 0);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "gold.json"));
    assert!(names.iter().any(|n| n == "gen_config.json"));
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }

    let c = tempfile::tempdir().unwrap();
    assert_eq!(code(&exec(bin().arg("gen").arg("--seed").arg("7").arg("--out").arg(c.path()))), 0);
    assert_ne!(std::fs::read(a.path().join("gold.json")).unwrap(), std::fs::read(c.path().join("gold.json")).unwrap());
}

#[test]
fn gen_rejects_invalid_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gen(tmp.path(), "gen/invalid_probability.json");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("post"));
}

#[test]
fn eval_prints_one_column_per_cutoff() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert_eq!(code(&gen(&corpus, "gen/default.json")), 0);
    let pred = tmp.path().join("episodes.json");
    assert_eq!(code(&exec(&mut match_cmd(&fixture("eating_out.script"), "Eating_Out", &corpus, &pred))), 0);

    let o = exec(
        bin()
            .arg("eval")
            .arg("--pred")
            .arg(&pred)
            .arg("--gold")
            .arg(corpus.join("gold.json"))
            .arg("--out")
            .arg(tmp.path().join("eval.json")),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let map = text.lines().find(|l| l.starts_with("MAP")).unwrap();
    assert_eq!(map.split_whitespace().count(), 5, "{map}");
    assert!(text.lines().any(|l| l.starts_with("where MAP")));

    let ev: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(ev["episode"].as_array().unwrap().len(), 4);
    assert_eq!(ev["recall_proxy"], 1.0);

    let o = exec(
        bin().arg("eval").arg("--pred").arg(&pred).arg("--gold").arg(corpus.join("gold.json")).arg("--k").arg("2,7"),
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("@2") && text.contains("@7") && !text.contains("@5"));
}

#[test]
fn eval_of_empty_predictions_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert_eq!(code(&gen(&corpus, "gen/payment_only.json")), 0);

    // Grocery_Shopping finds nothing in a corpus of restaurant payments.
    let pred = tmp.path().join("none.json");
    assert_eq!(code(&exec(&mut match_cmd(&fixture("eating_out.script"), "Grocery_Shopping", &corpus, &pred))), 0);
    let o = exec(
        bin()
            .arg("eval")
            .arg("--pred")
            .arg(&pred)
            .arg("--gold")
            .arg(corpus.join("gold.json"))
            .arg("--out")
            .arg(tmp.path().join("eval.json")),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ev: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(ev["predictions"], 0);
    assert_eq!(ev["recall_proxy"], 0.0);
    assert!(ev["episode"].as_array().unwrap().iter().all(|a| a["map"] == 0.0 && a["ndcg"] == 0.0));
}

#[test]
fn eval_rejects_foreign_gold() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&gen(&a, "gen/payment_only.json")), 0);
    assert_eq!(code(&exec(bin().arg("gen").arg("--seed").arg("3").arg("--out").arg(&b))), 0);
    let pred = tmp.path().join("r.json");
    assert_eq!(code(&exec(&mut match_cmd(&fixture("eating_out.script"), "Eating_Out", &a, &pred))), 0);
    let o = exec(bin().arg("eval").arg("--pred").arg(&pred).arg("--gold").arg(b.join("gold.json")));
    assert_eq!(code(&o), 2);
    let o =
        exec(bin().arg("eval").arg("--pred").arg(tmp.path().join("nope.json")).arg("--gold").arg(b.join("gold.json")));
    assert_eq!(code(&o), 4);
}

#[test]
fn explain_leaves_out_the_owner() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert_eq!(code(&gen(&corpus, "gen/payment_only.json")), 0);
    let pred = tmp.path().join("r.json");
    assert_eq!(code(&exec(&mut match_cmd(&fixture("eating_out.script"), "Eating_Out", &corpus, &pred))), 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&pred).unwrap()).unwrap();
    let id = report["episodes"][0]["episode_id"].as_str().unwrap().to_string();

    let o = exec(bin().arg("explain").arg("--report").arg(&pred).arg("--episode").arg(&id));
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("You were at "), "{first}");
    assert!(!first.contains(" with "), "{first}");
    assert!(text.contains("role=member"));

    let o = exec(bin().arg("explain").arg("--report").arg(&pred).arg("--episode").arg("Eating_Out:nope"));
    assert_eq!(code(&o), 2);
}

#[test]
fn ingest_summarizes_and_quarantines() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    assert_eq!(
        code(&exec(bin().arg("gen").arg("--config").arg(fixture("gen/full_emission.json")).arg("--out").arg(&corpus))),
        0
    );
    let records = corpus.join("records.jsonl");
    let mut text = std::fs::read_to_string(&records).unwrap();
    text.push_str("{\"id\": \"broken\"\n");
    std::fs::write(&records, text).unwrap();

    let out = tmp.path().join("ingest.json");
    let o = exec(bin().arg("ingest").arg("--corpus").arg(&corpus).arg("--out").arg(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["quarantined"], 1);
    assert_eq!(summary["visits"].as_array().unwrap().len(), 50);
    let q = std::fs::read_to_string(tmp.path().join("ingest.json.quarantine.jsonl")).unwrap();
    assert_eq!(q.lines().count(), 1);
}
