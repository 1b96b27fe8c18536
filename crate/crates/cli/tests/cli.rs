use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wlip(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlip"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn bundled(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    root.join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bundled_velocity_step_writes_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = wlip(
        &["sim", &bundled("velocity-step.toml"), "--out", out.to_str().unwrap(), "--duration", "0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("velocity-step.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# wlip sim log v1"));
    assert!(lines.next().unwrap().starts_with("t,"));
    assert_eq!(lines.count(), 250);
    assert!(stdout(&o).contains("max CLF slack"));
}

#[test]
fn every_bundled_config_parses() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        wlip_core::config::ScenarioConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn malformed_config_exits_one_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scenario = \"stand\"\n\n[controller]\nfriction = = 0.4\n").unwrap();
    let o = wlip(&["sim", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "scenario = \"stand\"\nsede = 3\n").unwrap();
    assert_eq!(wlip(&["sim", cfg.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn same_seed_gives_byte_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let o = wlip(
            &["sim", &bundled("sine-terrain.toml"), "--out", sub, "--seed", seed, "--duration", "0.3"],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(dir.path().join(sub).join("velocity-step.csv")).unwrap()
    };
    let a = run("a", "9");
    assert_eq!(a, run("b", "9"));
    assert_ne!(a, run("c", "10"));
}

#[test]
fn fall_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("shove.toml");
    std::fs::write(
        &cfg,
        "scenario = \"impulse\"\nduration = 2.0\n\n[[disturbances]]\nkind = \"impulse\"\nstart = 0.1\nduration = 0.05\nimpulse = [150.0, 0.0, 0.0]\n",
    )
    .unwrap();
    let o = wlip(&["sim", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(dir.path().join("o/impulse.csv").exists());
}

#[test]
fn to_study_reports_the_shorter_wlip_stop() {
    let dir = tempfile::tempdir().unwrap();
    let o = wlip(&["to-study", "--out", "study"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("shorter stopping distance: wlip"));
    for f in ["to_wlip.csv", "to_wip.csv", "to_summary.csv"] {
        assert!(dir.path().join("study").join(f).exists(), "{f}");
    }
}

#[test]
fn single_model_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = wlip(&["to-study", "--model", "wlip", "--out", "one"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("one/to_wip.csv").exists());
    let o = wlip(&["to-study", "--sweep", "--out", "sweep"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("sweep/to_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 28);
}

#[test]
fn design_preset_prints_the_moment_arms() {
    let dir = tempfile::tempdir().unwrap();
    let o = wlip(&["design", "--preset", "--out", "d"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("L1/LH = 0.64") && s.contains("L2/LH = 1.36"), "{s}");
    let grid = std::fs::read_to_string(dir.path().join("d/design_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2);
}

#[test]
fn design_grid_rows_match_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let o = wlip(&["design", "--grid", "4", "--out", "d"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let grid = std::fs::read_to_string(dir.path().join("d/design_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 4 * 4 * 4);
}

#[test]
fn outputs_stay_inside_out() {
    let dir = tempfile::tempdir().unwrap();
    wlip(&["design", "--grid", "2", "--out", "only"], dir.path());
    wlip(&["sim", &bundled("stand.toml"), "--out", "only", "--duration", "0.1"], dir.path());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("only")]);
}

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, flags) in [
        ("sim", &["--out", "--seed", "--duration"][..]),
        ("to-study", &["--model", "--sweep", "--out"][..]),
        ("design", &["--grid", "--spread", "--preset", "--out"][..]),
    ] {
        let help = stdout(&wlip(&[cmd, "--help"], dir.path()));
        for f in flags {
            assert!(help.contains(f), "{cmd} help lacks {f}");
        }
    }
}
