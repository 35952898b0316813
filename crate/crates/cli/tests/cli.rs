use infostyle::metric::{choice_probability, distance};
use infostyle_testkit::{fixture_dir, synth, agreement_csv_path};
use rand::Rng;
use serde_json::Value;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infostyle"));
    c.arg("--quiet");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(&full)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus() -> PathBuf {
    fixture_dir().join("corpus")
}

fn triplets() -> PathBuf {
    fixture_dir().join("triplets.csv")
}

/// extract → train → index on the fixture corpus, shared by the tests below.
struct Pipeline {
    dir: PathBuf,
}

impl Pipeline {
    fn features(&self) -> PathBuf {
        self.dir.join("features.jsonl")
    }
    fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    fn index(&self) -> PathBuf {
        self.dir.join("index.jsonl")
    }
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-pipeline");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let p = Pipeline { dir };
        ok(&["extract", "--corpus", s(&corpus()), "--out", s(&p.features()), "--features", "color_hist,lum_hist,hog16"]);
        ok(&["train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", s(&p.model()), "--lambda", "1"]);
        ok(&["index", "--model", s(&p.model()), "--features", s(&p.features()), "--out", s(&p.index())]);
        p
    })
}

#[test]
fn extract_counts_records_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("corpus");
    std::fs::create_dir(&small).unwrap();
    for name in ["warm00.jpg", "cool01.png", "mono02.png"] {
        std::fs::copy(corpus().join(name), small.join(name)).unwrap();
    }
    let out = dir.path().join("f.jsonl");
    let summary = json(&["extract", "--corpus", s(&small), "--out", s(&out), "--features", "color_hist,lum_hist"]);
    assert_eq!(summary["records"], 6);
    let first = std::fs::read(&out).unwrap();
    let ids: Vec<String> = String::from_utf8(first.clone())
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            format!("{}/{}", v["id"].as_str().unwrap(), v["feature"].as_str().unwrap())
        })
        .collect();
    assert_eq!(
        ids,
        ["cool01/color_hist", "cool01/lum_hist", "mono02/color_hist", "mono02/lum_hist", "warm00/color_hist", "warm00/lum_hist"]
    );
    ok(&["extract", "--corpus", s(&small), "--out", s(&out), "--features", "color_hist,lum_hist"]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn extract_bad_image_needs_skip_bad() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("corpus");
    std::fs::create_dir(&small).unwrap();
    std::fs::copy(corpus().join("warm01.png"), small.join("warm01.png")).unwrap();
    std::fs::write(small.join("broken.png"), b"not really a png").unwrap();
    let out = dir.path().join("f.jsonl");
    let res = run(&["extract", "--corpus", s(&small), "--out", s(&out), "--features", "lum_hist"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("broken"));
    assert!(!out.exists());

    let summary = json(&["extract", "--corpus", s(&small), "--out", s(&out), "--features", "lum_hist", "--skip-bad"]);
    assert_eq!(summary["records"], 1);
    assert_eq!(summary["skipped"][0]["id"], "broken");
}

#[test]
fn analyze_reproduces_reference_table() {
    let text = ok(&["analyze", "--triplets", s(&agreement_csv_path())]);
    for v in ["76.45%", "79.59%", "85.31%", "90.28%", "95.08%", "100.00%"] {
        assert!(text.contains(v), "missing {v} in\n{text}");
    }
    assert!(text.contains("Oracle consistency: 76.45%"));
    let csv = ok(&["analyze", "--triplets", s(&agreement_csv_path()), "--csv"]);
    assert!(csv.lines().any(|l| l == "cumulative,50,,847,8454,6463,76.45"));
    let j = json(&["analyze", "--triplets", s(&agreement_csv_path())]);
    assert_eq!(j["banded"].as_array().unwrap().len(), 6);
}

#[test]
fn analyze_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "triplet_id,ref_id,option_b_id,option_c_id,votes_b,votes_c\nt1,a,b,c,7,0\n").unwrap();
    let j = json(&["analyze", "--triplets", s(&one)]);
    let populated: Vec<&Value> = j["banded"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["triplets"] != 0)
        .collect();
    assert_eq!(populated.len(), 1);
    assert_eq!(populated[0]["accuracy"], 100.0);

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "triplet_id,ref_id,option_b_id,option_c_id,votes_b,votes_c\n").unwrap();
    assert_eq!(run(&["analyze", "--triplets", s(&empty)]).status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "triplet_id,ref_id,option_b_id,option_c_id,votes_b,votes_c\nt1,a,b,c,1,1\nt2,a,b,c,one,2\n").unwrap();
    let res = run(&["analyze", "--triplets", s(&bad)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    let p = pipeline();
    assert_eq!(run(&["search", "--model", s(&p.model()), "--index", s(&p.index())]).status.code(), Some(1));
    assert_eq!(
        run(&["train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", "/tmp/x.json", "--config", "color_hist+color_hist"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["analyze", "--triplets", "/definitely/missing.csv"]).status.code(), Some(1));
    let out = bin()
        .env("INFOSTYLE_THREADS", "zero")
        .args(["analyze", "--triplets", s(&triplets())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn train_with_fixed_lambda_skips_cross_validation() {
    let p = pipeline();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let j = json(&["train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", s(&a), "--lambda", "1"]);
    assert!(j["cross_validation"].is_null());
    assert_eq!(j["lambda"], 1.0);
    assert_eq!(j["ties_excluded"], 6);
    for key in ["test_accuracy", "baseline_accuracy", "oracle", "train_accuracy"] {
        assert!(j[key].as_f64().unwrap() >= 0.0);
    }
    let threaded = bin()
        .env("INFOSTYLE_THREADS", "1")
        .args(["train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", s(&b), "--lambda", "1"])
        .output()
        .unwrap();
    assert!(threaded.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(p.model()).unwrap());
}

#[test]
fn train_with_cross_validation_reports_grid() {
    let p = pipeline();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let j = json(&[
        "train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", s(&out),
        "--config", "color_hist", "--lambda-grid", "0.1,1,10", "--folds", "3",
    ]);
    let cv = j["cross_validation"].as_array().unwrap();
    assert_eq!(cv.len(), 3);
    let best = cv.iter().map(|r| r["mean_accuracy"].as_f64().unwrap()).fold(0.0, f64::max);
    let chosen = cv.iter().find(|r| r["lambda"] == j["lambda"]).unwrap();
    assert_eq!(chosen["mean_accuracy"].as_f64().unwrap(), best);
}

#[test]
fn train_missing_features_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let partial = dir.path().join("partial.jsonl");
    let text = std::fs::read_to_string(pipeline().features()).unwrap();
    let kept: String = text.lines().filter(|l| !l.contains("\"warm03\"")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&partial, kept).unwrap();
    let res = run(&["train", "--features", s(&partial), "--triplets", s(&triplets()), "--out", s(&dir.path().join("m.json")), "--lambda", "1"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("warm03"));
}

#[test]
fn planted_feature_task_beats_baseline() {
    // externally supplied 50-dim vectors with votes sampled from the choice model
    let dir = tempfile::tempdir().unwrap();
    let mut rng = synth::rng(8);
    let dim = 50;
    let mut w_star = vec![0.0; dim];
    for i in [3, 11, 19, 27, 42] {
        w_star[i] = 20.0;
    }
    let vecs: Vec<Vec<f64>> = (0..300).map(|_| synth::uniform_vec(&mut rng, dim)).collect();
    let mut feats = String::new();
    for (i, v) in vecs.iter().enumerate() {
        feats.push_str(&serde_json::json!({"id": format!("p{i:03}"), "feature": "planted", "values": v}).to_string());
        feats.push('\n');
    }
    let mut csv = String::from("triplet_id,ref_id,option_b_id,option_c_id,votes_b,votes_c\n");
    for t in 0..847 {
        let (a, b, c) = loop {
            let t = (rng.random_range(0..300), rng.random_range(0..300), rng.random_range(0..300));
            if t.0 != t.1 && t.1 != t.2 && t.0 != t.2 {
                break t;
            }
        };
        let p_b = choice_probability(
            distance(&w_star, &vecs[a], &vecs[b]).unwrap(),
            distance(&w_star, &vecs[a], &vecs[c]).unwrap(),
        );
        let vb = (0..9).filter(|_| rng.random::<f64>() < p_b).count();
        csv.push_str(&format!("t{t},p{a:03},p{b:03},p{c:03},{vb},{}\n", 9 - vb));
    }
    let fpath = dir.path().join("planted.jsonl");
    let tpath = dir.path().join("planted.csv");
    std::fs::write(&fpath, feats).unwrap();
    std::fs::write(&tpath, csv).unwrap();
    let j = json(&[
        "train", "--features", s(&fpath), "--triplets", s(&tpath), "--out", s(&dir.path().join("m.json")),
        "--config", "planted:raw", "--lambda", "1",
    ]);
    assert_eq!(j["n_train"], 600);
    assert!(j["test_accuracy"].as_f64().unwrap() >= j["baseline_accuracy"].as_f64().unwrap(), "{j}");
}

#[test]
fn ablate_shares_one_split() {
    let p = pipeline();
    let j = json(&[
        "ablate", "--features", s(&p.features()), "--triplets", s(&triplets()), "--lambda", "1",
        "--config", "color_hist", "--config", "color_hist+hog16", "--config", "color_hist",
    ]);
    let rows = j["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["dims"], 30);
    assert_eq!(rows[0]["accuracy"], rows[2]["accuracy"]);
    assert!(j["oracle"].as_f64().unwrap() > 0.0);
    let text = ok(&["ablate", "--features", s(&p.features()), "--triplets", s(&triplets()), "--lambda", "1", "--config", "lum_hist"]);
    assert!(text.contains("lum_hist:raw"));
    assert!(text.contains("Baseline (unit weights)"));
    assert!(text.contains("Oracle"));
}

#[test]
fn search_by_id_and_by_image() {
    let p = pipeline();
    let (model, index) = (p.model(), p.index());
    let (m, i) = (s(&model), s(&index));
    let j = json(&["search", "--model", m, "--index", i, "--id", "mono04", "-k", "5"]);
    let hits = j["results"].as_array().unwrap();
    assert_eq!(hits.len(), 5);
    assert!(hits.iter().all(|h| h["id"] != "mono04"));
    let d: Vec<f64> = hits.iter().map(|h| h["distance"].as_f64().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]));

    let j = json(&["search", "--model", m, "--index", i, "--id", "mono04", "--include-self", "-k", "1"]);
    assert_eq!(j["results"][0]["id"], "mono04");
    assert_eq!(j["results"][0]["distance"], 0.0);

    for name in ["warm00.jpg", "cool04.png"] {
        let j = json(&["search", "--model", m, "--index", i, "--image", s(&corpus().join(name))]);
        assert_eq!(j["results"][0]["id"], name.split('.').next().unwrap());
        assert!(j["results"][0]["distance"].as_f64().unwrap() <= 1e-6);
    }
    let text = ok(&["search", "--model", m, "--index", i, "--id", "mono04"]);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn search_boundaries_and_mismatch() {
    let p = pipeline();
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.jsonl");
    let text = std::fs::read_to_string(p.features()).unwrap();
    let kept: String = text.lines().filter(|l| l.contains("\"cool00\"")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&one, kept).unwrap();
    let idx = dir.path().join("one_index.jsonl");
    ok(&["index", "--model", s(&p.model()), "--features", s(&one), "--out", s(&idx)]);
    let j = json(&["search", "--model", s(&p.model()), "--index", s(&idx), "--id", "cool00", "-k", "1"]);
    assert!(j["results"].as_array().unwrap().is_empty());

    let other = dir.path().join("other.json");
    ok(&["train", "--features", s(&p.features()), "--triplets", s(&triplets()), "--out", s(&other), "--lambda", "10"]);
    let res = run(&["search", "--model", s(&other), "--index", s(&p.index()), "--id", "cool00"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("fingerprint"));

    let bad = dir.path().join("query.png");
    std::fs::write(&bad, b"nope").unwrap();
    let res = run(&["search", "--model", s(&p.model()), "--index", s(&p.index()), "--image", s(&bad)]);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["search", "--model", s(&p.model()), "--index", s(&p.index()), "--id", "unknown"]);
    assert_eq!(res.status.code(), Some(2));
}

fn http_get(addr: &str, path: &str) -> Option<(u16, String)> {
    let mut stream = std::net::TcpStream::connect(addr).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(10))).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    stream.read_to_string(&mut buf).ok()?;
    let status = buf.split_whitespace().nth(1)?.parse().ok()?;
    let body = buf.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
    Some((status, body))
}

#[test]
fn serve_answers_health_and_similar() {
    let p = pipeline();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = bin()
        .args(["serve", "--addr", &addr, "--model", s(&p.model()), "--index", s(&p.index()), "--corpus", s(&corpus())])
        .spawn()
        .unwrap();
    let start = Instant::now();
    let health = loop {
        if let Some((200, body)) = http_get(&addr, "/health") {
            break body;
        }
        assert!(start.elapsed() < Duration::from_secs(60), "service did not become ready");
        std::thread::sleep(Duration::from_millis(100));
    };
    let similar = http_get(&addr, "/similar/warm05?k=3");
    child.kill().unwrap();
    let _ = child.wait();

    let h: Value = serde_json::from_str(&health).unwrap();
    assert_eq!(h["index_size"], 30);
    use sha2::Digest;
    let file_hash = hex::encode(sha2::Sha256::digest(std::fs::read(p.model()).unwrap()));
    assert_eq!(h["model_fingerprint"], file_hash.as_str());
    let (status, body) = similar.unwrap();
    assert_eq!(status, 200);
    let r: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(r["results"].as_array().unwrap().len(), 3);
}
