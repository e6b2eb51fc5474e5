use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn macsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macsel"))
        .args(args)
        .env_remove("MACSEL_REGISTRY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const BOTH: &str = "overhearing-avoidance,distributed";

#[test]
fn evaluate_prints_one_row_per_category() {
    let o = macsel(&["evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out
        .lines()
        .filter(|l| ["ScP ", "CAP ", "PSP "].iter().any(|p| l.starts_with(p)))
        .collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(out.lines().any(|l| l.starts_with("best: ")));
}

#[test]
fn zero_weights_are_degenerate() {
    let o = macsel(&["evaluate", "--alpha", "0", "--beta", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degenerate CPF"), "{}", stderr(&o));
}

#[test]
fn scenario_one_ranks_scheduled_above_preamble_sampling() {
    let o = macsel(&["evaluate", "--n-nodes", "90", "--network-radius", "100", "--pkt-rate", "100", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let order: Vec<&str> = v["ranking"]["order"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let pos = |c: &str| order.iter().position(|x| *x == c).unwrap();
    assert!(pos("ScP") < pos("PSP"), "{order:?}");
}

#[test]
fn scenario_one_selects_smacs_and_as_mac() {
    let o = macsel(&["select", "--n-nodes", "90", "--network-radius", "100", "--pkt-rate", "100", "--require", BOTH]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("selected category: ScP\n"), "{out}");
    assert!(out.contains("protocols: SMACS, AS-MAC\n"), "{out}");
}

#[test]
fn scenario_two_selects_stem() {
    let o = macsel(&["select", "--n-nodes", "110", "--network-radius", "70", "--pkt-rate", "100", "--require", BOTH]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("selected category: PSP\n"), "{out}");
    assert!(out.contains("protocols: STEM\n"), "{out}");
}

#[test]
fn unsatisfiable_requirements_fail() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("reg.json");
    let r = reg.to_str().unwrap();
    assert!(macsel(&["registry", "--registry", r, "init"]).status.success());
    assert!(macsel(&["registry", "--registry", r, "add-requirement", "--id", "multi-channel"])
        .status
        .success());
    let o = macsel(&["select", "--registry", r, "--require", "multi-channel"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = macsel(&["sweep", "--axis", "pkt_rate", "--from", "1", "--to", "10", "--steps", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3, "{text}");
    assert!(text.starts_with("axis,category,"));
}

#[test]
fn sweep_rejects_bad_ranges() {
    assert_eq!(macsel(&["sweep", "--axis", "pkt_rate", "--from", "5", "--to", "1", "--steps", "3"]).status.code(), Some(2));
    assert_eq!(macsel(&["sweep", "--axis", "pkt_rate", "--from", "1", "--to", "5", "--steps", "1"]).status.code(), Some(2));
}

#[test]
fn sweep_to_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("s.csv");
    let o = macsel(&["sweep", "--axis", "n_nodes", "--from", "10", "--to", "20", "--steps", "2", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot write"), "{}", stderr(&o));
}

#[test]
fn unknown_protocol_is_a_usage_error() {
    let o = macsel(&["simulate", "--protocol", "bmac"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = dir.path().join("ctx.json");
    fs::write(&ctx, r#"{"n_nodes": 100, "tx_rnage": 30}"#).unwrap();
    let o = macsel(&["evaluate", "--context", ctx.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("context.tx_rnage"), "{}", stderr(&o));

    fs::write(&ctx, r#"{"tx_range": -3}"#).unwrap();
    let o = macsel(&["evaluate", "--context", ctx.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tx_range"), "{}", stderr(&o));
}

#[test]
fn output_is_stable_across_runs() {
    for args in [
        vec!["evaluate"],
        vec!["select", "--require", BOTH],
        vec!["select", "--require", BOTH, "--json"],
    ] {
        let a = macsel(&args);
        let b = macsel(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let args = ["simulate", "--protocol", "psa", "--seed", "7", "--duration", "20", "--max-reps", "2", "--json"];
    let a = macsel(&args);
    let b = macsel(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validate_fails_when_tolerance_is_exceeded() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let base = ["validate", "--protocol", "psa", "--rates", "5", "--duration", "50", "--max-reps", "2"];
    let mut ok = base.to_vec();
    ok.extend(["--out", csv.to_str().unwrap()]);
    let o = macsel(&ok);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("ok"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);

    let mut strict = base.to_vec();
    strict.extend(["--tolerance", "0"]);
    let o = macsel(&strict);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("EXCEEDED"));
}

fn registry_file(dir: &Path) -> String {
    let p = dir.join("reg.json");
    let r = p.to_str().unwrap().to_string();
    let o = macsel(&["registry", "--registry", &r, "init"]);
    assert!(o.status.success(), "{}", stderr(&o));
    r
}

#[test]
fn added_protocol_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let r = registry_file(dir.path());
    let o = macsel(&[
        "registry", "--registry", &r, "add-protocol", "--name", "B-MAC", "--category", "PSP", "--satisfies", "distributed",
        "--fails", "overhearing-avoidance",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let list = stdout(&macsel(&["registry", "--registry", &r, "list"]));
    assert!(list.lines().any(|l| l.trim_start().starts_with("B-MAC") && l.contains("PSP")), "{list}");
    let pending = stdout(&macsel(&["registry", "--registry", &r, "pending", "--requirement", "distributed"]));
    assert!(!pending.contains("B-MAC"));
}

#[test]
fn registry_path_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let r = registry_file(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_macsel"))
        .args(["registry", "add-category", "--id", "FHSS", "--representative", "X-MAC"])
        .env("MACSEL_REGISTRY", &r)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&r).unwrap().contains("FHSS"));
}

#[test]
fn add_requirement_prints_worklist() {
    let dir = tempfile::tempdir().unwrap();
    let r = registry_file(dir.path());
    let o = macsel(&["registry", "--registry", &r, "add-requirement", "--id", "mobility", "--description", "nodes move"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("review order:"));
    for p in ["TSMP", "SMAC", "PSA", "STEM"] {
        assert!(out.contains(p), "{out}");
    }
}

#[test]
fn duplicate_protocol_leaves_file_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let r = registry_file(dir.path());
    let before = fs::read(&r).unwrap();
    let o = macsel(&["registry", "--registry", &r, "add-protocol", "--name", "STEM", "--category", "PSP"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(&r).unwrap(), before);
}

#[test]
fn mutations_need_a_registry_file() {
    let o = macsel(&["registry", "add-category", "--id", "X", "--representative", "Y"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn review_records_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let r = registry_file(dir.path());
    assert!(macsel(&["registry", "--registry", &r, "add-requirement", "--id", "mobility"]).status.success());
    let o = macsel(&[
        "registry", "--registry", &r, "review", "--protocol", "SMAC", "--requirement", "mobility", "--satisfied", "true",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pending = stdout(&macsel(&["registry", "--registry", &r, "pending", "--requirement", "mobility"]));
    assert!(!pending.lines().any(|l| l == "SMAC"), "{pending}");
    assert!(pending.lines().any(|l| l == "PSA"), "{pending}");
}

#[test]
fn json_output_matches_the_service_golden_files() {
    let golden = |name: &str| -> serde_json::Value {
        let path = format!("{}/../service/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
        serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
    };
    let scenario = ["--n-nodes", "90", "--network-radius", "100", "--pkt-rate", "100", "--json"];
    let mut eval = vec!["evaluate"];
    eval.extend(scenario);
    let mut sel = vec!["select", "--require", BOTH];
    sel.extend(scenario);
    for (args, name) in [(eval, "scenario1_evaluate.json"), (sel, "scenario1_select.json")] {
        let o = macsel(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v, golden(name), "{name}");
    }
}
