use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affectrec::affect::AffectiveIndex;
use affectrec::profiles::{CatalogItem, UserProfile};
use affectrec::privacy::EmotionId;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn affectrec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affectrec"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_jsonl(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).unwrap();
}

fn fixture(name: &str) -> String {
    PathBuf::from(FIXTURES).join(name).to_string_lossy().into_owned()
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = affectrec(&["--help"], dir.path());
    assert_eq!(code(&out), 0);
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(help.contains("affective_index") && help.contains("consumed_ids"));
    assert_eq!(code(&affectrec(&["extract", "--help"], dir.path())), 0);
    assert_eq!(code(&affectrec(&["--version"], dir.path())), 0);
    assert_eq!(code(&affectrec(&[], dir.path())), 1);
    assert_eq!(code(&affectrec(&["extract"], dir.path())), 1);
    assert_eq!(code(&affectrec(&["extract", "--input", "x", "--concurrency", "0"], dir.path())), 1);
    assert_eq!(code(&affectrec(&["extract", "--input", "x", "--backend", "llm"], dir.path())), 1);
    assert_eq!(code(&affectrec(&["frobnicate"], dir.path())), 1);
}

#[test]
fn extract_three_documents() {
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(
        &dir.path().join("corpus.jsonl"),
        &[
            json!({"id": "d1", "text": "Tears at the funeral."}),
            json!({"id": "d2", "title": "Feast", "text": "Joy and laughter."}),
            json!({"id": "d3", "text": "A sudden shock."}),
        ],
    );
    let out = affectrec(&["extract", "--input", "corpus.jsonl"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["id"], "d1");
    assert_eq!(lines[0]["affective_index"]["sadness"], 1.0);
    assert_eq!(lines[1]["affective_index"]["happiness"], 1.0);
    assert_eq!(lines[2]["affective_index"]["surprise"], 1.0);
}

#[test]
fn extract_reports_bad_documents_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(
        &dir.path().join("corpus.jsonl"),
        &[
            json!({"id": "d1", "text": "grief"}),
            json!({"id": "empty", "text": ""}),
            json!({"id": "d3", "text": "rage"}),
        ],
    );
    let out = affectrec(&["extract", "--input", "corpus.jsonl", "--output", "out.jsonl"], dir.path());
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.matches("\"empty\"").count(), 1, "{stderr}");
    let written = fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    assert_eq!(written.lines().count(), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn extract_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let words = ["joy", "grief", "rage", "dread", "shock", "filth", "the", "a", "river"];
    let mut rng = StdRng::seed_from_u64(3);
    let corpus: Vec<Value> = (0..200)
        .map(|i| {
            let text: Vec<&str> = (0..12).map(|_| words[rng.random_range(0..words.len())]).collect();
            json!({"id": format!("doc{i}"), "text": text.join(" ") + " joy"})
        })
        .collect();
    write_jsonl(&dir.path().join("corpus.jsonl"), &corpus);
    for (out, width) in [("a.jsonl", "1"), ("b.jsonl", "4")] {
        let o = affectrec(
            &["extract", "--input", "corpus.jsonl", "--output", out, "--concurrency", width],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 200);
}

#[test]
fn extract_with_custom_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("lx.tsv"), "word\temotion\tweight\nsunny\thappiness\t3\nrain\tsadness\t1\n").unwrap();
    fs::write(dir.path().join("sw.txt"), "rain\n").unwrap();
    write_jsonl(&dir.path().join("c.jsonl"), &[json!({"id": "w", "text": "sunny then rain"})]);
    let out = affectrec(&["extract", "--input", "c.jsonl", "--lexicon", "lx.tsv"], dir.path());
    assert_eq!(stdout_lines(&out)[0]["affective_index"]["happiness"], 0.75);
    let out = affectrec(
        &["extract", "--input", "c.jsonl", "--lexicon", "lx.tsv", "--stopwords", "sw.txt"],
        dir.path(),
    );
    assert_eq!(stdout_lines(&out)[0]["affective_index"]["happiness"], 1.0);

    fs::write(dir.path().join("bad.tsv"), "word\tcolour\nx\tred\n").unwrap();
    assert_eq!(code(&affectrec(&["extract", "--input", "c.jsonl", "--lexicon", "bad.tsv"], dir.path())), 2);
    assert_eq!(code(&affectrec(&["extract", "--input", "missing.jsonl"], dir.path())), 2);
}

#[test]
fn unreachable_llm_backend_exits_three() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(&dir.path().join("c.jsonl"), &[json!({"id": "x", "text": "anything"})]);
    let out = affectrec(
        &[
            "extract", "--input", "c.jsonl", "--backend", "llm", "--llm-endpoint", &endpoint,
            "--llm-model", "m", "--llm-max-retries", "0",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ingest_builds_and_extends_a_catalog() {
    let dir = tempfile::tempdir().unwrap();
    write_jsonl(
        &dir.path().join("c1.jsonl"),
        &[json!({"id": "a", "text": "joy"}), json!({"id": "b", "text": "grief"})],
    );
    write_jsonl(
        &dir.path().join("c2.jsonl"),
        &[json!({"id": "b", "text": "rage"}), json!({"id": "c", "text": "dread"})],
    );
    assert_eq!(code(&affectrec(&["ingest", "--input", "c1.jsonl", "--catalog", "cat.jsonl"], dir.path())), 0);
    let out = affectrec(&["ingest", "--input", "c2.jsonl", "--catalog", "cat.jsonl"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate id \"b\""));
    let catalog = fs::read_to_string(dir.path().join("cat.jsonl")).unwrap();
    let ids: Vec<String> = catalog
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

fn index_json(probs: [f64; 6]) -> Value {
    json!({"happiness": probs[0], "sadness": probs[1], "anger": probs[2],
           "fear": probs[3], "surprise": probs[4], "disgust": probs[5]})
}

#[test]
fn recommend_one_hot_profile_on_orthogonal_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let catalog: Vec<Value> = (0..6)
        .map(|e| {
            let mut p = [0.0; 6];
            p[e] = 1.0;
            json!({"id": format!("e{e}"), "affective_index": index_json(p)})
        })
        .collect();
    write_jsonl(&dir.path().join("cat.jsonl"), &catalog);
    let profile = json!({"emotion_id": "u", "index": index_json([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
                         "consumed_count": 1, "consumed_ids": ["old"]});
    fs::write(dir.path().join("me.json"), profile.to_string()).unwrap();

    let out = affectrec(&["recommend", "--profile", "me.json", "--catalog", "cat.jsonl", "--n", "3"], dir.path());
    assert_eq!(code(&out), 0);
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], json!({"item_id": "e3", "score": 1.0}));
    assert_eq!(lines[1], json!({"item_id": "e0", "score": 0.0}));
    assert_eq!(lines.len(), 3);

    let out = affectrec(&["recommend", "--profile", "me.json", "--catalog", "cat.jsonl", "--n", "100"], dir.path());
    assert_eq!((code(&out), stdout_lines(&out).len()), (0, 6));

    let usage = |args: &[&str]| code(&affectrec(args, dir.path()));
    let base = ["recommend", "--profile", "me.json", "--catalog", "cat.jsonl"];
    assert_eq!(usage(&[&base[..], &["--strategy", "popular"]].concat()), 1);
    assert_eq!(usage(&[&base[..], &["--strategy", "hybrid"]].concat()), 1);
    assert_eq!(usage(&[&base[..], &["--alpha", "2"]].concat()), 1);

    fs::write(dir.path().join("bad.json"), r#"{"emotion_id": "u"}"#).unwrap();
    assert_eq!(usage(&["recommend", "--profile", "bad.json", "--catalog", "cat.jsonl"]), 2);
    fs::write(dir.path().join("bad.jsonl"), "{\"id\": \"x\"}\n").unwrap();
    assert_eq!(usage(&["recommend", "--profile", "me.json", "--catalog", "bad.jsonl"]), 2);
}

#[test]
fn recommend_matches_content_oracle_on_random_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let mut random = || {
        let v: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>() + 1e-3);
        let s: f64 = v.iter().sum();
        AffectiveIndex::try_from_probs(v.map(|x| x / s)).unwrap()
    };
    let items: Vec<CatalogItem> = (0..50).map(|i| CatalogItem::new(format!("m{i:02}"), random())).collect();
    let lines: Vec<Value> = items
        .iter()
        .map(|c| json!({"id": c.item_id, "affective_index": c.index}))
        .collect();
    write_jsonl(&dir.path().join("cat.jsonl"), &lines);
    let profile = affectrec::profiles::profile_from_history(EmotionId::new("u").unwrap(), &items[..4]).unwrap();
    fs::write(dir.path().join("me.json"), serde_json::to_string(&profile).unwrap()).unwrap();

    let out = affectrec(&["recommend", "--profile", "me.json", "--catalog", "cat.jsonl", "--n", "10"], dir.path());
    assert_eq!(code(&out), 0);
    let got: Vec<(String, f64)> = stdout_lines(&out)
        .iter()
        .map(|v| (v["item_id"].as_str().unwrap().to_owned(), v["score"].as_f64().unwrap()))
        .collect();
    assert_eq!(got, oracle_content(&profile, &items, 10));
}

fn oracle_content(profile: &UserProfile, items: &[CatalogItem], n: usize) -> Vec<(String, f64)> {
    let p = profile.index.probs();
    let norm = |v: &[f64; 6]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = items
        .iter()
        .filter(|c| !profile.consumed_ids.contains(&c.item_id))
        .map(|c| {
            let q = c.index.probs();
            let dot: f64 = (0..6).map(|i| p[i] * q[i]).sum();
            (c.item_id.clone(), (dot / (norm(&p) * norm(&q))).clamp(0.0, 1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

#[test]
fn recommend_collaborative_with_peer_file() {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<Value> = ["x", "y", "z"]
        .iter()
        .map(|id| json!({"id": id, "affective_index": index_json([0.5, 0.5, 0.0, 0.0, 0.0, 0.0])}))
        .collect();
    write_jsonl(&dir.path().join("cat.jsonl"), &lines);
    let me = json!({"emotion_id": "me", "index": index_json([0.5, 0.5, 0.0, 0.0, 0.0, 0.0]),
                    "consumed_count": 1, "consumed_ids": ["x"]});
    fs::write(dir.path().join("me.json"), me.to_string()).unwrap();
    write_jsonl(
        &dir.path().join("peers.jsonl"),
        &[json!({"emotion_id": "p", "index": index_json([0.5, 0.5, 0.0, 0.0, 0.0, 0.0]),
                 "consumed_count": 2, "consumed_ids": ["x", "z"]})],
    );
    let out = affectrec(
        &["recommend", "--profile", "me.json", "--catalog", "cat.jsonl", "--strategy", "collaborative", "--peers", "peers.jsonl"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_lines(&out), [json!({"item_id": "z", "score": 1.0})]);
}

#[test]
fn validate_fixture_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = affectrec(&["validate-fixture", "--file", &fixture("godfather_response.json")], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        r#"{"happiness":0.02571,"sadness":0.81373,"anger":0.05563,"fear":0.09933,"surprise":0.00486,"disgust":0.00074}"#
    );
    assert!(out.stderr.is_empty());

    let out = affectrec(&["validate-fixture", "--file", &fixture("garbage.txt")], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse_failure"));

    let out = affectrec(&["validate-fixture", "--file", &fixture("sum_out_of_range_response.json")], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum_out_of_range"));

    let out = affectrec(&["validate-fixture", "--file", &fixture("sum_098_response.json")], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("renormalized"));
    let index: AffectiveIndex = serde_json::from_slice(&out.stdout).unwrap();
    for (_, p) in index.iter() {
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }
}
