use std::path::Path;
use std::process::{Command, Output};

use volterra_sim::manifest::parse_manifest;

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volterra-sim"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.conf");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "level = 5\ngrid.t = linspace(0, 1, 5)\ngrid.x = linspace(0, 1, 5)\n";

#[test]
fn simulate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = cli(&["simulate", "--seed", "1"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("t,x1,value"));
    assert_eq!(grid.lines().count(), 26);
    for field in grid.lines().nth(7).unwrap().split(',') {
        let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{field}");
        field.parse::<f64>().unwrap();
    }
}

#[test]
fn two_dimensional_grid_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "kernel.d = 2\nlevy.p = 1.5\ndomain.center = (0.5;0.5)\nlevel = 2\ngrid.t = 0.5, 1\ngrid.x = 0, 1\ngrid.x_sections = (1;0)\n",
    );
    let out = dir.path().join("out");
    let o = cli(&["simulate", "--seed", "3"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("t,x1,x2,value"));
    assert_eq!(grid.lines().count(), 1 + 2 * 4);
    assert!(out.join("section_x_1_0.csv").exists());
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "levy.kind = \"gamma\"\nlevy.lambda = 0.1\n");
    let out = dir.path().join("out");
    let o = cli(&["simulate"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("levy.gamma"));
    let m = parse_manifest(&std::fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(m.get("status"), Some("error"));
    assert_eq!(m.get("error.kind"), Some("Config"));
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["simulate"], &dir.path().join("absent.conf"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_fit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}study.levels = 5, 5, 5, 5\nstudy.replicates = 4\n"));
    let o = cli(&["rate-study", "--seed", "2"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn resource_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}resource.max_events = 10\n"));
    let out = dir.path().join("out");
    let o = cli(&["simulate"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    let m = parse_manifest(&std::fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(m.get("error.kind"), Some("ResourceCap"));
    assert_eq!(m.get("exit_code"), Some("4"));
}

#[test]
fn level_and_replicate_overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = cli(&["simulate", "--level", "7", "--replicates", "3", "--seed", "11"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    let m = parse_manifest(&std::fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(m.get("config.level"), Some("7"));
    assert_eq!(m.get("config.replicates"), Some("3"));
    assert_eq!(m.get("seed"), Some("11"));
}

#[test]
fn validate_confirms_and_rejects_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sim = dir.path().join("sim");
    assert_eq!(cli(&["simulate", "--seed", "5"], &cfg, &sim).status.code(), Some(0));
    let manifest = sim.join("manifest.txt");
    let manifest_arg = manifest.to_str().unwrap();

    let o = cli(&["validate", "--seed", "5", "--manifest", manifest_arg], &cfg, &dir.path().join("v1"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("v1/validation.txt")).unwrap();
    assert!(report.contains("grid.csv: ok"), "{report}");

    std::fs::write(sim.join("grid.csv"), "tampered\n").unwrap();
    let o = cli(&["validate", "--seed", "5", "--manifest", manifest_arg], &cfg, &dir.path().join("v2"));
    assert_eq!(o.status.code(), Some(2));
    let report = std::fs::read_to_string(dir.path().join("v2/validation.txt")).unwrap();
    assert!(report.contains("grid.csv: MISMATCH"), "{report}");
}

#[test]
fn bad_mode_is_rejected_by_the_argument_parser() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = cli(&["explode"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        volterra_sim::config::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 4);
}
