use std::path::PathBuf;
use std::process::{Command, Output};

use compass_core::storage::{load_domain_model, save_domain_model, to_canonical_string};
use compass_core::{Edge, OverlayReport};
use compass_testkit::build::simple_model;
use compass_testkit::fixtures::{worked_example, OVERLAY_DOT};

fn fixture(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/worked_example");
    root.join(name).to_string_lossy().into_owned()
}

fn compass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compass")).args(args).output().expect("run compass")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulated_assessment_on_worked_example() {
    let out = compass(&[
        "assess", "--domain", &fixture("domain.json"), "--items", &fixture("items.json"), "--lo", "LO2",
        "--simulate-level", "4", "--now", "2025-02-01T00:00:00Z",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("localized_level: 4, items_used: 3"), "{text}");
    assert!(text.contains("lo2-l3a level 3 correct"));
    assert!(text.contains("lo2-l5a level 5 wrong"));

    let alias = compass(&[
        "assess", "--domain", &fixture("domain.json"), "--items", &fixture("items.json"), "--target", "LO2",
        "--simulate-level", "4", "--format", "json", "--now", "2025-02-01T00:00:00Z",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&alias.stdout).unwrap();
    assert_eq!(json["result"]["localized_level"], 4);
    assert_eq!(json["trace"].as_array().unwrap().len(), 3);
}

#[test]
fn interactive_assessment_reads_stdin() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_compass"))
        .args(["assess", "--domain", &fixture("domain.json"), "--items", &fixture("items.json"), "--lo", "LO2"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let f = worked_example();
    let key = |id: &str| f.pool.item(id).unwrap().answer_key.iter().next().copied().unwrap();
    let wrong = |id: &str| (key(id) + 1) % f.pool.item(id).unwrap().options.len();
    let answers = format!("{}\nx\n{}\n{}\n", wrong("lo2-l3a"), key("lo2-l1a"), key("lo2-l2a"));
    child.stdin.take().unwrap().write_all(answers.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("localized_level: 2, items_used: 3"), "{text}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("lo2-l3a"));
}

#[test]
fn validate_reports_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cyclic.json");
    let m = simple_model("loop", &["A", "B"], &[Edge::prerequisite("A", "B"), Edge::prerequisite("B", "A")]);
    std::fs::write(&path, save_domain_model(&m)).unwrap();
    let out = compass(&["validate", "--domain", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("CYCLE"));

    let ok = compass(&["validate", "--domain", &fixture("domain.json"), "--items", &fixture("items.json")]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn overlay_outputs() {
    let base = [
        "overlay", "--domain", &fixture("domain.json"), "--learner", &fixture("learner.json"), "--course", "C1,C2",
        "--now", "2025-01-31T12:00:00Z",
    ];
    let dot = compass(&[&base[..], &["--format", "dot"]].concat());
    assert_eq!(dot.status.code(), Some(0));
    assert_eq!(stdout(&dot), OVERLAY_DOT);

    let json = compass(&[&base[..], &["--format", "json"]].concat());
    let f = worked_example();
    let local: OverlayReport = compass_core::overlay(&f.domain, &f.course, &f.learner, f.now, &Default::default()).unwrap();
    assert_eq!(stdout(&json), to_canonical_string(&local));

    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("o.dot");
    let to_file = compass(&[&base[..], &["--format", "dot", "--out", out_path.to_str().unwrap()]].concat());
    assert_eq!(to_file.status.code(), Some(0));
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(out_path).unwrap(), OVERLAY_DOT);
}

#[test]
fn recommend_and_merge() {
    let out = compass(&[
        "recommend", "--domain", &fixture("domain.json"), "--learner", &fixture("learner.json"), "--course", "C1,C2",
        "--now", "2025-01-31T12:00:00Z", "--target", "C2", "--alternatives", "3", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["plans"].as_array().unwrap().len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, save_domain_model(&simple_model("ext", &["A", "B"], &[Edge::prerequisite("A", "B")]))).unwrap();
    std::fs::write(&b, save_domain_model(&simple_model("course", &["B", "C"], &[Edge::prerequisite("B", "C")]))).unwrap();
    let merged = compass(&["merge", "--domain", a.to_str().unwrap(), "--domain", b.to_str().unwrap()]);
    assert_eq!(merged.status.code(), Some(0));
    let model = load_domain_model(&merged.stdout).unwrap().value;
    assert_eq!(model.module_id, "course+ext");
    assert_eq!(model.prerequisite_closure("C").unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(compass(&["overlay"]).status.code(), Some(2));
    assert_eq!(compass(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(compass(&["--help"]).status.code(), Some(0));
    let missing = compass(&["validate", "--domain", "/nonexistent/domain.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(missing.stdout.is_empty());
    assert!(!missing.stderr.is_empty());
    let bad_course = compass(&[
        "overlay", "--domain", &fixture("domain.json"), "--learner", &fixture("learner.json"), "--course", "Q",
        "--now", "2025-01-31T12:00:00Z",
    ]);
    assert_eq!(bad_course.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{").unwrap();
    assert_eq!(compass(&["validate", "--domain", junk.to_str().unwrap()]).status.code(), Some(1));
}
