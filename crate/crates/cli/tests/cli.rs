use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use shiptrack::output::{write_run_dir, OutputOptions};
use shiptrack::scenario::Scenario;
use shiptrack::{simulate, RunOptions};

fn shiptrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiptrack")).args(args).output().expect("binary runs")
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let digest = Sha256::digest(fs::read(e.path()).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (e.file_name().to_string_lossy().into_owned(), hex)
        })
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "n_frames = 40\ngrid = [64, 64]\nwindow = [0.0, 0.0, 12.0, 17.5]\nepsilon_lag = 1.0\n";

#[test]
fn preset_run_writes_frames_and_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run1");
    let o = shiptrack(&["simulate", "--preset", "paper-fig3", "--seed", "42", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = hashes(&out);
    assert_eq!(files.keys().filter(|k| k.starts_with("frame_") && k.ends_with(".pgm")).count(), 100);
    assert!(files.contains_key("frame_0099.pgm"));
    assert!(files.contains_key("events.jsonl"));
    assert!(files.contains_key("points.csv"));
}

#[test]
fn same_seed_gives_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o =
            shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        hashes(&out)
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a["events.jsonl"], c["events.jsonl"]);
}

#[test]
fn zero_dt_exits_2_naming_the_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "dt = 0.0\n").unwrap();
    let o =
        shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NonPositiveDt"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.toml");
    fs::write(&cfg, "sigma_xx = 0.1\n").unwrap();
    let o =
        shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma_xx"));
}

#[test]
fn unreadable_inputs_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shiptrack(&["simulate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let cfg = tmp.path().join("wind.toml");
    fs::write(&cfg, "wind_csv = \"nowhere.csv\"\n").unwrap();
    let o =
        shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn blank_video_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.toml");
    fs::write(&cfg, "n_frames = 3\ngrid = [4, 4]\nboats = []\n").unwrap();
    let out = tmp.path().join("empty");
    let o = shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("AllZeroVideo"));

    let o = shiptrack(&["summarize", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("max intensity: error AllZeroVideo"));
}

#[test]
fn no_frames_skips_pgms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = tmp.path().join("nf");
    let o = shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--no-frames", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let files = hashes(&out);
    assert!(!files.keys().any(|k| k.ends_with(".pgm")));
    assert!(files.contains_key("run.json"));
}

#[test]
fn summarize_reports_four_tracks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig3");
    assert!(shiptrack(&["simulate", "--preset", "paper-fig3", "--no-frames", "--out", out.to_str().unwrap()])
        .status
        .success());
    let o = shiptrack(&["summarize", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("tracks: 4"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["tracks"], 4);
    assert_eq!(json["frames"].as_array().unwrap().len(), 100);
}

#[test]
fn summarize_missing_run_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = shiptrack(&["summarize", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("MissingLog"));
}

#[test]
fn cli_and_library_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cli_out = tmp.path().join("cli");
    let o = shiptrack(&["simulate", "--preset", "paper-fig3", "--seed", "11", "--out", cli_out.to_str().unwrap()]);
    assert!(o.status.success());

    let lib_out = tmp.path().join("lib");
    let scene = Scenario::<f64>::paper_fig3(11).into_scene().unwrap();
    let result = simulate(&scene, RunOptions::default()).unwrap();
    write_run_dir(&scene, &result, &lib_out, OutputOptions::default()).unwrap();
    assert_eq!(hashes(&cli_out), hashes(&lib_out));
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("seeded.toml");
    fs::write(&cfg, format!("{SMALL}seed = 1\n")).unwrap();
    let flagged = tmp.path().join("flagged");
    let o =
        shiptrack(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", flagged.to_str().unwrap()]);
    assert!(o.status.success());

    let mut s = Scenario::<f64>::load(&cfg).unwrap();
    s.config.seed = 5;
    let scene = s.into_scene().unwrap();
    let lib_out = tmp.path().join("lib");
    write_run_dir(&scene, &simulate(&scene, RunOptions::default()).unwrap(), &lib_out, OutputOptions::default())
        .unwrap();
    assert_eq!(hashes(&flagged), hashes(&lib_out));
}
