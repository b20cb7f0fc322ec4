use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn deixis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deixis"))
        .args(args)
        .current_dir(root())
        .env_remove("GIRAF_BACKEND_URL")
        .output()
        .expect("spawn deixis")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_exits_zero() {
    assert_eq!(deixis(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = deixis(&["resolve", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_backend_is_a_usage_error() {
    assert_eq!(
        deixis(&["plan", "--speech", "open it", "--backend", "oracle"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_scenario_is_a_domain_error() {
    let o = deixis(&["run", "--scenario", "missing.file"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.file"));
}

#[test]
fn remote_without_url_is_a_domain_error() {
    assert_eq!(
        deixis(&["plan", "--speech", "open it", "--backend", "remote"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn resolve_names_the_pointed_drawer() {
    let o = deixis(&[
        "resolve",
        "--scene",
        "fixtures/scenes/drawers.scene",
        "--hand",
        "fixtures/hands/point_3_5.hand",
        "--target",
        "drawer",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stdout(&o), "drawer_3_5 (0.1500, -0.0500, 1.5000)\n");
}

#[test]
fn resolve_missing_category_fails() {
    let o = deixis(&[
        "resolve",
        "--scene",
        "fixtures/scenes/single.scene",
        "--hand",
        "fixtures/hands/point_mug.hand",
        "--target",
        "drawer",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plan_validate_only() {
    let o = deixis(&[
        "plan",
        "--speech",
        "give me that tool",
        "--gesture",
        "pointing",
        "--backend",
        "rule",
        "--validate-only",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("detect_referred_obj_pos('tool')"), "{text}");
    assert!(text.contains("# valid:"), "{text}");
}

#[test]
fn plan_without_needed_gesture_asks_again() {
    let o = deixis(&["plan", "--speech", "open that drawer"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("say("), "{}", stdout(&o));
}

#[test]
fn scene_gen_round_trips_through_show() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.scene");
    let o = deixis(&[
        "scene",
        "gen",
        "--drawers",
        "2x3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let shown = deixis(&["scene", "show", out.to_str().unwrap()]);
    assert_eq!(shown.status.code(), Some(0));
    assert!(stdout(&shown).contains("drawer_1_2"));
    assert_eq!(
        deixis(&["scene", "gen", "--drawers", "2by3"]).status.code(),
        Some(2)
    );
}

#[test]
fn batch_reports_every_fixture() {
    let o = deixis(&[
        "batch",
        "--dir",
        "fixtures/scenarios",
        "--transcripts",
        "fixtures/transcripts",
        "--ontology",
        "fixtures/ontology.json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "id,planning_success,execution_success,trials_used"
    );
    assert_eq!(lines.len(), 6);
    assert!(lines.contains(&"garbled-transcript,false,false,3"));
    assert!(lines.contains(&"water-jug-handover,true,true,1"));
}

#[test]
fn seeded_reports_are_identical() {
    for args in [
        &[
            "run",
            "--scenario",
            "fixtures/scenarios/fetch_hammer.json",
            "--seed",
            "4",
        ][..],
        &["sweep", "--trials", "50", "--seed", "4"][..],
    ] {
        let (a, b) = (deixis(args), deixis(args));
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn gi_eval_prints_the_table() {
    let o = deixis(&["gi-eval", "--cases", "fixtures/gesture_instruct.json"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(
        text.lines()
            .any(|l| l.starts_with("deictic") && l.contains("8/8")),
        "{text}"
    );
}

#[test]
fn config_file_paths_are_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    std::fs::create_dir(&store).unwrap();
    for entry in std::fs::read_dir(root().join("fixtures/transcripts")).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, store.join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"transcripts": "store", "backend": "replay"}"#,
    )
    .unwrap();
    let cfg = dir.path().join("c.json");
    let o = deixis(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--scenario",
        "fixtures/scenarios/water_jug.json",
        "--ontology",
        "fixtures/ontology.json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    std::fs::write(&cfg, r#"{"colour": "blue"}"#).unwrap();
    assert_eq!(
        deixis(&["run", "--config", cfg.to_str().unwrap(), "--scenario", "x"])
            .status
            .code(),
        Some(1)
    );
}
