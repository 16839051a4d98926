use std::fs;
use std::path::Path;
use std::process::Command;

use areaflow::app::config::parse_config;
use areaflow::app::output::{load_run, read_manifest, sha256_hex, write_run, MANIFEST_FILE, TIMESERIES_FILE};
use areaflow::app::scenario::builtin;
use areaflow::app::{run_scenario, RunStatus};
use areaflow::classify::LimitClass;
use areaflow::verify::CSV_COLUMNS;

fn write(dir: &Path, name: &str) {
    let cfg = builtin(name).unwrap();
    let out = run_scenario(&cfg).unwrap();
    write_run(dir, &cfg, &out, 0.0).unwrap();
}

#[test]
fn rerunning_a_config_reproduces_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write(&a, "torus_projection");
    // Second run from the emitted config, as a user would.
    let cfg = parse_config(&fs::read_to_string(a.join("config.toml")).unwrap()).unwrap();
    let out = run_scenario(&cfg).unwrap();
    write_run(&b, &cfg, &out, 0.0).unwrap();
    let (ma, mb) = (read_manifest(&a).unwrap(), read_manifest(&b).unwrap());
    assert_eq!(ma.config_sha256, mb.config_sha256);
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(fs::read(a.join(&f.name)).unwrap(), fs::read(b.join(&f.name)).unwrap(), "{}", f.name);
    }
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "cylinder_waist");
    let m = read_manifest(tmp.path()).unwrap();
    let mut on_disk: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST_FILE)
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = m.files.iter().map(|f| f.name.clone()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);
    for f in &m.files {
        assert_eq!(sha256_hex(&fs::read(tmp.path().join(&f.name)).unwrap()), f.sha256);
    }
    let csv = fs::read_to_string(tmp.path().join(TIMESERIES_FILE)).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let run = load_run(tmp.path()).unwrap();
    assert_eq!(run.record.status, RunStatus::Converged);

    // Tampering is detected.
    fs::write(tmp.path().join(TIMESERIES_FILE), "t\n").unwrap();
    assert!(load_run(tmp.path()).is_err());
}

#[test]
fn classification_survives_refinement() {
    for (name, dims, expected) in [
        ("torus_projection", vec![8, 8, 8], LimitClass::Rank2Flat),
        ("tsui_wang_s2", vec![48, 4], LimitClass::Constant),
        ("cylinder_waist", vec![12, 6, 6], LimitClass::Rank1Geodesic),
    ] {
        for d in [builtin(name).unwrap().grid.dims, dims] {
            let mut cfg = builtin(name).unwrap();
            cfg.grid.dims = d.clone();
            cfg.verify.compare_grid_until = None;
            let out = run_scenario(&cfg).unwrap();
            assert_eq!(out.classification.unwrap().class, expected, "{name} at {d:?}");
        }
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_areaflow")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr))
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    fs::write(p("ok.toml"), "scenario = \"hopf_pointwise\"\n").unwrap();
    fs::write(p("edge.toml"), "scenario = \"torus_identity_edge\"\n").unwrap();
    fs::write(p("bad.toml"), "scenario = \"hopf_pointwise\"\n[verify\n").unwrap();
    fs::write(p("abort.toml"), "scenario = \"tsui_wang_s2\"\n[flow]\ndt = 0.05\nt_end = 5.0\n").unwrap();

    let (code, text) = cli(&["run", &p("ok.toml"), "--out", &p("run")]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(cli(&["verify", &p("run")]).0, 0);
    assert_eq!(cli(&["classify", &p("run")]).0, 0);
    assert_eq!(cli(&["check-curvature", &p("ok.toml")]).0, 0);

    let (code, text) = cli(&["run", &p("edge.toml"), "--out", &p("edge")]);
    assert_eq!(code, 2);
    assert!(text.contains("min p = 0"), "{text}");
    let (code, text) = cli(&["run", &p("bad.toml")]);
    assert_eq!(code, 2);
    assert!(text.contains("line 2"), "{text}");
    assert_eq!(cli(&["no-such-command"]).0, 2);

    let (code, text) = cli(&["run", &p("abort.toml"), "--out", &p("abort")]);
    assert_eq!(code, 3, "{text}");
    assert_eq!(read_manifest(Path::new(&p("abort"))).unwrap().status, RunStatus::Aborted);

    let (code, text) = cli(&["identities", "--samples", "200", "--seed", "3"]);
    assert_eq!(code, 0, "{text}");
}
