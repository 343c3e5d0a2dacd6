use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pregen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pregen"))
        .args(args)
        .env_remove("PREGEN_THREADS")
        .output()
        .expect("spawn pregen")
}

fn ok(args: &[&str]) -> String {
    let out = pregen(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn col(csv: &str, metric: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{metric},")))
        .unwrap_or_else(|| panic!("{metric} missing"))
        .parse()
        .unwrap()
}

const TRACES: &str = r#"{"image_id":"a","caption_id":"1","tokens":["a","dog"],"p_ref":[0.9,0.2,0.7],"argmax":[true,false,true]}
{"image_id":"a","caption_id":"2","tokens":["a","red","dog"],"p_ref":[0.8,0.6,0.5,0.4],"argmax":[true,true,false,true]}
{"image_id":"b","caption_id":"1","tokens":["the","cat"],"p_ref":[0.3,0.9,0.95],"argmax":[false,true,true]}
"#;

#[test]
fn pregen_writes_504_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces.jsonl");
    fs::write(&traces, TRACES).unwrap();
    let out = dir.path().join("scores.csv");
    ok(&["pregen", "--traces", s(&traces), "--out", s(&out)]);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("metric,value"));
    let names: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names.len(), 504);
    assert!(names.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn no_end_token_changes_normcount_denominator() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces.jsonl");
    fs::write(&traces, TRACES).unwrap();
    let with_end = dir.path().join("with.csv");
    let without = dir.path().join("without.csv");
    ok(&["pregen", "--traces", s(&traces), "--out", s(&with_end)]);
    ok(&["pregen", "--traces", s(&traces), "--out", s(&without), "--no-end-token"]);
    let a = fs::read_to_string(with_end).unwrap();
    let b = fs::read_to_string(without).unwrap();
    // filter0 counts per caption: with end 2/3, 3/4, 2/3; without 1/2, 2/3, 1/2.
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let want_with = mean(&[2.0 / 3.0, 3.0 / 4.0, 2.0 / 3.0]);
    let want_without = mean(&[1.0 / 2.0, 2.0 / 3.0, 1.0 / 2.0]);
    assert!((col(&a, "mean_join_normcount_filter0") - want_with).abs() < 1e-12);
    assert!((col(&b, "mean_join_normcount_filter0") - want_without).abs() < 1e-12);
}

#[test]
fn missing_input_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = pregen(&["pregen", "--traces", s(&missing), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: ") && err.contains("nope.jsonl"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn malformed_traces_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("bad.jsonl");
    fs::write(&traces, "{\"image_id\":\"a\",\"caption_id\":\"1\",\"tokens\":[\"x\"],\"p_ref\":[0.5],\"argmax\":[true]}\n").unwrap();
    let out = pregen(&["pregen", "--traces", s(&traces), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));
}

#[test]
fn toy_pipeline_and_postgen() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let world = d.join("world");
    ok(&["toy", "gen", "--seed", "3", "--images", "12", "--out", s(&world)]);
    let (w, ds, emb) = (world.join("world.json"), world.join("dataset.json"), world.join("embeddings.txt"));
    let model = d.join("model.json");
    ok(&["toy", "train", "--world", s(&w), "--dataset", s(&ds), "--epsilon", "0.2", "--out", s(&model)]);
    let traces = d.join("traces.jsonl");
    ok(&["toy", "trace", "--world", s(&w), "--dataset", s(&ds), "--model", s(&model), "--out", s(&traces)]);
    assert_eq!(fs::read_to_string(&traces).unwrap().lines().count(), 36);
    let decoded = d.join("decoded.json");
    ok(&["toy", "decode", "--world", s(&w), "--dataset", s(&ds), "--model", s(&model), "--out", s(&decoded)]);

    let pg = d.join("post");
    ok(&["postgen", "--dataset", s(&decoded), "--embeddings", s(&emb), "--out", s(&pg)]);
    let corpus = fs::read_to_string(pg.join("corpus.csv")).unwrap();
    for m in ["bleu", "cider", "wmd_sim"] {
        assert!(col(&corpus, m).is_finite());
    }
    let per_image = fs::read_to_string(pg.join("per_image.csv")).unwrap();
    assert_eq!(per_image.lines().count(), 1 + 12 * 3);

    let strata = d.join("strata.csv");
    ok(&["stratify", "--dataset", s(&decoded), "--k", "1,3", "--out", s(&strata)]);
    assert_eq!(fs::read_to_string(&strata).unwrap().lines().count(), 1 + 24);

    // A dataset whose generated caption is its own first reference.
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ds).unwrap()).unwrap();
    for img in json["images"].as_array_mut().unwrap() {
        img["gen"] = img["refs"][0].clone();
    }
    let ident = d.join("ident.json");
    fs::write(&ident, json.to_string()).unwrap();
    let pg2 = d.join("post2");
    ok(&["postgen", "--dataset", s(&ident), "--embeddings", s(&emb), "--out", s(&pg2)]);
    let corpus = fs::read_to_string(pg2.join("corpus.csv")).unwrap();
    assert_eq!(col(&corpus, "wmd_sim"), 1.0);

    // Without generated captions post-gen refuses.
    let out = pregen(&["postgen", "--dataset", s(&ds), "--embeddings", s(&emb), "--out", s(&d.join("post3"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn study_is_deterministic_and_report_reproduces_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |out: &Path| {
        vec![
            "study".to_string(),
            "--images".into(),
            "20".into(),
            "--epsilon-grid".into(),
            "0,0.3,0.6".into(),
            "--out".into(),
            s(out).to_string(),
        ]
    };
    let run = |out: &Path, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_pregen"))
            .args(args(out))
            .env("PREGEN_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let stdout = run(&a, "1");
    assert_eq!(stdout, run(&b, "3"));
    assert!(stdout.contains("cider (top 5)"));
    for f in ["scores.csv", "correlations.csv", "ranking.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let rep = dir.path().join("rep");
    ok(&["report", "--scores", s(&a.join("scores.csv")), "--out", s(&rep)]);
    for f in ["correlations.csv", "ranking.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(rep.join(f)).unwrap(), "{f}");
    }

    let corr = dir.path().join("one.csv");
    ok(&[
        "correlate", "--scores", s(&a.join("scores.csv")), "--out", s(&corr),
        "--x", "mean_max_normcount_prefix0", "--y", "cider",
    ]);
    assert_eq!(fs::read_to_string(&corr).unwrap().lines().count(), 2);
}

#[test]
fn study_rejects_short_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = pregen(&["study", "--epsilon-grid", "0.1", "--images", "10", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate correlation sample"));
}

#[test]
fn bad_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pregen"))
        .args(["study", "--images", "10", "--out", s(dir.path())])
        .env("PREGEN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
