use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ras(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ras"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for (cmd, flags) in [
        (
            "score",
            &[
                "--alpha",
                "--format",
                "--strict",
                "--out",
                "--tokenize",
                "--lowercase",
                "--strip-punct",
            ][..],
        ),
        ("calibrate", &["--lambda", "--out"]),
        ("make-ph", &["--counts", "--strict"]),
        ("replace-logit", &["--bar"]),
        ("sweep-bar", &["--bar-grid", "--alpha"]),
        ("serve", &["--bind", "--max-batch", "--body-limit"]),
        (
            "gen-synth-prefs",
            &[
                "--seed",
                "--count",
                "--votes",
                "--alpha-true",
                "--tie-prob",
                "--design",
            ],
        ),
    ] {
        let out = ras(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd}");
        let help = stdout(&out);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
    assert_eq!(code(&ras(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        "{\"id\":\"1\",\"ref\":\"a\",\"hyp\":\"a\"}\n",
    );
    for args in [
        vec!["score", s(&input), "--alpha", "1.5"],
        vec!["score", s(&input), "--alpha", "0"],
        vec!["score", s(&input), "--no-such-flag"],
        vec!["sweep-bar", s(&input), "--bar-grid", "0.5:0.1:0.1"],
        vec!["frobnicate"],
        vec![],
    ] {
        let out = ras(&args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn perfect_corpus_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        "{\"id\":\"2\",\"ref\":\"x y z\",\"hyp\":\"x y z\"}\n{\"id\":\"1\",\"ref\":\"a b\",\"hyp\":\"a b\"}\n",
    );
    let out = ras(&["score", s(&input)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("\"ras\": 1.000000"), "{text}");
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["summary"]["micro"]["ras"].as_f64(), Some(1.0));
    assert_eq!(doc["per_utterance"][0]["id"], "1");
    assert_eq!(doc["scatter"].as_array().unwrap().len(), 2);
}

#[test]
fn row_failures_exit_2_only_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        "{\"id\":\"1\",\"ref\":\"a\",\"hyp\":\"a\"}\n{oops\n",
    );
    let lenient = ras(&["score", s(&input)]);
    assert_eq!(code(&lenient), 0);
    let doc: Value = serde_json::from_slice(&lenient.stdout).unwrap();
    assert_eq!(doc["failures"][0]["line"], 2);
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("line 2"));
    assert_eq!(code(&ras(&["score", s(&input), "--strict"])), 2);
}

#[test]
fn missing_input_is_a_data_error() {
    let out = ras(&["score", "/nonexistent/corpus.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot open"));
}

#[test]
fn output_is_written_atomically_and_checked_first() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        "{\"id\":\"u\",\"ref\":\"a b c\",\"hyp\":\"a <ph> c\"}\n",
    );
    let target = dir.path().join("report.tsv");
    let out = ras(&[
        "score",
        s(&input),
        "--format",
        "tsv",
        "--alpha",
        "0.5",
        "--out",
        s(&target),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let tsv = std::fs::read_to_string(&target).unwrap();
    assert_eq!(
        tsv,
        "id\tras\tusefulness\tcost\twer\tn_ref\tph_count\nu\t0.500000\t0.666667\t0.166667\t\t3\t1\n"
    );
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");

    let out = ras(&["score", s(&input), "--out", "/nonexistent/dir/r.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn tokenizer_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        "{\"id\":\"1\",\"ref\":\"Hello, world\",\"hyp\":\"hello world!\"}\n",
    );
    let plain: Value = serde_json::from_slice(&ras(&["score", s(&input)]).stdout).unwrap();
    assert_eq!(plain["summary"]["micro"]["ras"].as_f64(), Some(-1.0));
    let norm: Value =
        serde_json::from_slice(&ras(&["score", s(&input), "--lowercase", "--strip-punct"]).stdout).unwrap();
    assert_eq!(norm["summary"]["micro"]["ras"].as_f64(), Some(1.0));

    let cjk = write(
        dir.path(),
        "z.jsonl",
        "{\"id\":\"1\",\"ref\":\"我爱你\",\"hyp\":\"我<ph>你\"}\n",
    );
    let doc: Value =
        serde_json::from_slice(&ras(&["score", s(&cjk), "--tokenize", "mixed-cjk"]).stdout).unwrap();
    assert_eq!(doc["per_utterance"][0]["n_ref"], 3);
    assert_eq!(doc["per_utterance"][0]["ph_count"], 1);
}

#[test]
fn make_ph_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        concat!(
            "{\"id\":\"fig\",\"ref\":\"chronic disease of hair follicles and sebaceous gland\",",
            "\"hyp\":\"the chronic disease of her and spoculus gland\"}\n",
            "{\"id\":\"same\",\"ref\":\"a b\",\"hyp\":\"a b\"}\n",
            "{\"id\":\"del\",\"ref\":\"a b c\",\"hyp\":\"a\"}\n",
        ),
    );
    let counts = write(
        dir.path(),
        "counts.tsv",
        "# tokens per segment\nher\t1\nfollicles\t3\nspoculus\t3\n",
    );
    let out = ras(&["make-ph", s(&input), "--counts", s(&counts)]);
    assert_eq!(code(&out), 0);
    let rows: Vec<Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(
        rows[0]["hyp"],
        "<ph> chronic disease of <ph> <ph> <ph> <ph> and <ph> <ph> <ph> gland"
    );
    assert_eq!(
        rows[0]["ref"],
        "chronic disease of hair follicles and sebaceous gland"
    );
    assert_eq!(rows[1]["hyp"], "a b");
    assert_eq!(rows[2]["hyp"], "a <ph> <ph>");

    let bad = write(
        dir.path(),
        "bad.jsonl",
        "{\"id\":\"p\",\"ref\":\"a\",\"hyp\":\"<ph>\"}\n",
    );
    assert_eq!(code(&ras(&["make-ph", s(&bad)])), 0);
    assert_eq!(code(&ras(&["make-ph", s(&bad), "--strict"])), 2);
}

#[test]
fn logit_replacement_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.jsonl",
        concat!(
            "{\"id\":\"1\",\"ref\":\"a b c d\",\"words\":[{\"w\":\"a\",\"conf\":0.9},{\"w\":\"x\",\"conf\":0.1},",
            "{\"w\":\"y\",\"conf\":0.2},{\"w\":\"d\",\"conf\":0.8}]}\n",
            "{\"id\":\"2\",\"ref\":\"e f\",\"hyp\":\"e z\",\"confidences\":[0.7,0.05]}\n",
        ),
    );
    let out = ras(&["replace-logit", s(&input), "--bar", "0.3"]);
    assert_eq!(code(&out), 0);
    let hyps: Vec<String> = stdout(&out)
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["hyp"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(hyps, ["a <ph> d", "e <ph>"]);

    let out = ras(&["sweep-bar", s(&input), "--bar-grid", "0:0.3:0.1"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let bars: Vec<f64> = doc["curve"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["bar"].as_f64().unwrap())
        .collect();
    assert_eq!(bars, [0.0, 0.1, 0.2, 0.3]);
    assert_eq!(doc["best_bar"].as_f64(), Some(0.3));

    let single: Value =
        serde_json::from_slice(&ras(&["sweep-bar", s(&input), "--bar-grid", "0.25"]).stdout).unwrap();
    assert_eq!(single["curve"].as_array().unwrap().len(), 1);
    let default: Value = serde_json::from_slice(&ras(&["sweep-bar", s(&input)]).stdout).unwrap();
    assert_eq!(default["curve"].as_array().unwrap().len(), 51);
}

#[test]
fn synthetic_preferences_round_trip_through_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let prefs = dir.path().join("prefs.jsonl");
    let gen = |seed: &str| ras(&["gen-synth-prefs", "--seed", seed, "--design", "informative"]).stdout;
    assert_eq!(gen("3"), gen("3"));
    assert_ne!(gen("3"), gen("4"));
    std::fs::write(&prefs, gen("3")).unwrap();
    assert_eq!(std::fs::read_to_string(&prefs).unwrap().lines().count(), 200);

    let out = ras(&["calibrate", s(&prefs), "--lambda", "0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let alpha = doc["alpha_star"].as_f64().unwrap();
    assert!((alpha - 0.5).abs() < 0.05, "{alpha}");
    assert_eq!(doc["records"], 200);
    assert_eq!(doc["lambda"], 0.1);

    let empty = write(dir.path(), "empty.jsonl", "");
    assert_eq!(code(&ras(&["calibrate", s(&empty)])), 2);
}

#[cfg(unix)]
#[test]
fn serve_answers_health_and_stops_on_interrupt() {
    use std::io::{Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::time::{Duration, Instant};

    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let bind = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_ras"))
        .args(["serve", "--bind", &bind, "--alpha", "0.4"])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut stream = loop {
        match TcpStream::connect(&bind) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("server did not start: {e}"),
        }
    };
    stream
        .write_all(b"GET /health HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n")
        .unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"default_alpha\":0.4"), "{reply}");

    let killed = Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    assert_eq!(child.wait().unwrap().code(), Some(0));
}
