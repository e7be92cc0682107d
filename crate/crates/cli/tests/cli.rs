use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mincsp-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mincsp"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn classify_gamma_ex_is_tractable() {
    let out = run(&["classify", &fixture("gamma_ex.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "tractable");
    assert_eq!(v["witness"]["kind"], "one_defect");
    assert_eq!(v["core_domain"].as_array().unwrap().len(), 4);
    assert!(v["verified"]
        .as_array()
        .unwrap()
        .iter()
        .any(|s| s["structure"] == "a<d<{b,c}"));
}

#[test]
fn classify_h_eq_is_hard() {
    let out = run(&["classify", &fixture("h_eq.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "np_hard");
    assert_eq!(v["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_with_one_defect_method() {
    let out = run(&[
        "solve",
        &fixture("gamma_ex.json"),
        &fixture("inst.json"),
        "--method",
        "one-defect",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["value"], "0");
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&["classify", "no/such/file.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["solve", &fixture("gamma_ex.json")]).status.code(),
        Some(2)
    );
    let out = run(&[
        "solve",
        &fixture("gamma_ex.json"),
        &fixture("inst.json"),
        "--method",
        "fast",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        run(&["classify", &fixture("inst.json")]).status.code(),
        Some(2)
    );
}

#[test]
fn auto_and_brute_agree_on_every_fixture() {
    let cases = [
        ("gamma_ex.json", "inst.json"),
        ("gamma_ex.json", "gamma_ex_weighted.json"),
        ("h_eq.json", "triangle.json"),
        ("u_ab.json", "u_ab_inst.json"),
    ];
    for (lang, inst) in cases {
        let auto = json(&run(&[
            "solve",
            &fixture(lang),
            &fixture(inst),
            "--method",
            "auto",
        ]));
        let brute = json(&run(&[
            "solve",
            &fixture(lang),
            &fixture(inst),
            "--method",
            "brute",
        ]));
        assert_eq!(auto["value"], brute["value"], "{lang} {inst}");
    }
}

#[test]
fn check_mm_reports_both_outcomes() {
    for pair in ["pair1.json", "pair2.json"] {
        let out = run(&["check-mm", &fixture("gamma_ex.json"), &fixture(pair)]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(json(&out)["multimorphism"], true);
    }
    let dir = scratch_dir("check");
    let path = dir.join("minmax.json");
    std::fs::write(
        &path,
        r#"{"f": [["a","a"],["a","b"]], "g": [["a","b"],["b","b"]]}"#,
    )
    .unwrap();
    let out = run(&["check-mm", &fixture("h_eq.json"), path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["multimorphism"], false);
    assert_eq!(v["structure"]["kind"], "chain");
    assert_eq!(v["violation"]["function"], "h_eq");
}

#[test]
fn exceeding_the_budget_exits_with_three() {
    let out = run(&[
        "solve",
        &fixture("gamma_ex.json"),
        &fixture("inst.json"),
        "--method",
        "brute",
        "--budget",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&[
        "check-mm",
        &fixture("gamma_ex.json"),
        &fixture("pair1.json"),
        "--budget",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn core_of_a_single_unary_is_a_point() {
    let out = run(&["core", &fixture("u_ab.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["is_core"], false);
    assert_eq!(v["core_domain"].as_array().unwrap().len(), 1);
}

#[test]
fn graph_finds_the_loop_and_writes_dot() {
    let dir = scratch_dir("graph");
    let dot = dir.join("h_eq.dot");
    let out = run(&[
        "graph",
        &fixture("h_eq.json"),
        "--emit-dot",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["witness"]["vertex"], "<ab>");
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("graph mm {"));
    assert!(text.contains("color=red"));
}

#[test]
fn output_is_byte_stable() {
    for args in [
        vec!["classify".to_string(), fixture("gamma_ex.json")],
        vec!["gen".to_string(), "--seed".to_string(), "11".to_string()],
        vec![
            "solve".to_string(),
            fixture("gamma_ex.json"),
            fixture("gamma_ex_weighted.json"),
        ],
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(&args).stdout, run(&args).stdout);
    }
}

#[test]
fn generated_cases_feed_the_solver() {
    for (seed, kind) in [(1, "chain"), (2, "one-defect"), (3, "any")] {
        let dir = scratch_dir(&format!("gen{seed}"));
        let out = run(&[
            "gen",
            "--seed",
            &seed.to_string(),
            "--kind",
            kind,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let lang = dir.join("language.json");
        let inst = dir.join("instance.json");
        let (lang, inst) = (lang.to_str().unwrap(), inst.to_str().unwrap());
        let auto = json(&run(&["solve", lang, inst]));
        let brute = json(&run(&["solve", lang, inst, "--method", "brute"]));
        assert_eq!(auto["value"], brute["value"]);
        if kind != "any" {
            assert_eq!(json(&run(&["classify", lang]))["verdict"], "tractable");
        }
    }
}

#[test]
fn text_format_is_available() {
    let out = run(&["classify", &fixture("gamma_ex.json"), "--format", "text"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("verdict: tractable"));
    assert_eq!(
        run(&["classify", &fixture("gamma_ex.json"), "--format", "dot"])
            .status
            .code(),
        Some(2)
    );
}
