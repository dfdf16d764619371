use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use walksum::model::free_angle;
use walksum::observables::LocalOp;
use walksum::oracle::ed_evolve;
use walksum::{ModelSpec, RydbergModel, SiteCoord};
use walksum_cli::output::read_csv;
use walksum_cli::{run, Command, RunConfig};

fn small_config(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.out = out.to_path_buf();
    c.l_final = 2;
    c.l_virtual = 3;
    c.times = vec![PI / 30.0, 2.0 * PI / 30.0];
    c
}

fn result(path: &Path) -> serde_json::Value {
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(doc["version"].is_string());
    assert!(doc["config"]["model"]["nx"].is_number());
    doc["result"].clone()
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    for cmd in [Command::Simulate, Command::FreePairs, Command::G2Analytic] {
        let first = run(cmd, &c).unwrap();
        let bytes: Vec<Vec<u8>> = first.files.iter().map(|f| fs::read(f).unwrap()).collect();
        let second = run(cmd, &c).unwrap();
        assert_eq!(first.files, second.files);
        for (f, b) in second.files.iter().zip(&bytes) {
            assert_eq!(&fs::read(f).unwrap(), b, "{}", f.display());
        }
    }
}

#[test]
fn outputs_embed_version_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    let out = run(Command::Simulate, &c).unwrap();
    assert!(out.converged);
    let names: Vec<String> = out.files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into()).collect();
    for kind in ["g1", "g1p", "g2", "order_param", "r_density"] {
        for i in 0..2 {
            assert!(names.contains(&format!("{kind}_t{i}.csv")));
        }
    }
    let text = fs::read_to_string(dir.path().join("g2_t0.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# walksum "));
    assert_eq!(lines.next().unwrap(), "# command: simulate");
    let cfg: RunConfig = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(cfg, c);
    let (header, rows) = read_csv(&dir.path().join("g2_t0.csv")).unwrap();
    assert_eq!(header, ["j_x", "j_y", "value", "value_pair_scaled"]);
    assert_eq!(rows.len(), 8);
    let s = result(&dir.path().join("summary.json"));
    assert_eq!(s["times"].as_array().unwrap().len(), 2);
    assert!(s["times"][1]["pressure"]["pressure"].is_number());
}

#[test]
fn exhaustive_simulation_matches_exact_observables() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.l_final = 8;
    c.l_virtual = 8;
    c.times = vec![PI / 30.0];
    run(Command::Simulate, &c).unwrap();
    let model = RydbergModel::new(&c.model).unwrap();
    let psi = ed_evolve(&model, c.times[0]).unwrap();
    let (_, rows) = read_csv(&dir.path().join("r_density_t0.csv")).unwrap();
    let dens = column(&rows, 2);
    let mut total = psi.expect(&[(0, LocalOp::P)]).re;
    for k in 0..model.n_env() {
        let c = model.env_coord(k);
        assert_eq!((rows[k][0].parse::<i64>().unwrap(), rows[k][1].parse::<i64>().unwrap()), (c.x, c.y));
        let want = psi.expect(&[(k + 1, LocalOp::P)]).re;
        assert!((dens[k] - want).abs() < 1e-8, "site {k}");
        total += want;
    }
    let s = result(&dir.path().join("summary.json"));
    let f_r = s["times"][0]["rydberg_fraction"].as_f64().unwrap();
    assert!((f_r - total / 9.0).abs() < 1e-8);
    assert!(s["times"][0]["norm_deficit"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn zero_drive_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.model.omega = 0.0;
    let out = run(Command::Simulate, &c).unwrap();
    assert!(out.converged);
    let s = result(&dir.path().join("summary.json"));
    for t in s["times"].as_array().unwrap() {
        assert_eq!(t["rydberg_fraction"].as_f64(), Some(0.0));
        assert_eq!(t["norm_deficit"].as_f64(), Some(0.0));
        assert_eq!(t["pressure"]["energy"].as_f64(), Some(0.0));
    }
    let (_, rows) = read_csv(&dir.path().join("g2_t1.csv")).unwrap();
    assert!(rows.iter().all(|r| r[2] == "nan" && r[3] == "nan"));
    let (_, rows) = read_csv(&dir.path().join("r_density_t1.csv")).unwrap();
    assert!(column(&rows, 2).iter().all(|&v| v == 0.0));
}

fn free_set(dir: &Path, spec: ModelSpec) -> Vec<(i64, i64)> {
    let mut c = RunConfig::default();
    c.out = dir.to_path_buf();
    c.model = spec;
    run(Command::FreePairs, &c).unwrap();
    let (_, rows) = read_csv(&dir.join("free_pairs.csv")).unwrap();
    let mut set: Vec<(i64, i64)> = rows
        .iter()
        .filter(|r| r[2] == "1")
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    set.sort();
    set
}

#[test]
fn free_pair_maps() {
    let dir = tempfile::tempdir().unwrap();
    assert!(free_set(dir.path(), ModelSpec::new(7, 7, 1.5, 30.0, 0.0, 0.0, PI / 2.0)).is_empty());

    let theta = (1.0 / 3f64.sqrt()).asin();
    let diag = free_set(dir.path(), ModelSpec::new(7, 7, 1.5, 30.0, 0.0, theta, PI / 4.0));
    let want: Vec<(i64, i64)> = [-3, -2, -1, 1, 2, 3].iter().map(|&k| (k, k)).collect();
    assert_eq!(diag, want);

    let theta = free_angle(SiteCoord::new(15, 11), PI / 2.0).unwrap();
    assert!((theta / PI - 0.4306).abs() < 1e-4);
    let family = free_set(dir.path(), ModelSpec::new(31, 23, 1.5, 30.0, 0.0, theta, PI / 2.0));
    assert_eq!(family, vec![(-15, -11), (-15, 11), (15, -11), (15, 11)]);
    let r = result(&dir.path().join("free_pairs.json"));
    let site = r["sites"].as_array().unwrap().iter().find(|s| s["j_x"] == 15 && s["j_y"] == 11).unwrap();
    assert!((site["free_angle"].as_f64().unwrap() - theta).abs() < 1e-15);
    assert!(site["deviation"].as_f64().unwrap().abs() < 1e-12);
    let (_, rows) = read_csv(&dir.path().join("free_pairs.csv")).unwrap();
    let scaled = column(&rows, 3);
    assert!(scaled.iter().all(|&v| v == 0.0 || v == 712.0));
}

#[test]
fn g2_grid_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::default();
    c.out = dir.path().to_path_buf();
    let out = run(Command::G2Analytic, &c).unwrap();
    assert!(out.converged);
    let (header, rows) = read_csv(&dir.path().join("g2_analytic.csv")).unwrap();
    assert_eq!(header, ["delta", "a", "t", "g2", "g2_two_atom", "abs_diff"]);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().filter(|r| r[1] == "0").all(|r| r[3] == "1"));
}

fn walksum() -> Process {
    Process::new(env!("CARGO_BIN_EXE_walksum"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let ok = walksum()
        .args(["free-pairs", "--workers", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    assert!(out.join("free_pairs.csv").exists());

    let unconverged = walksum()
        .args(["simulate", "--lmax-final", "1", "--kmax", "1", "--tol", "1e-12", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(unconverged.status.code(), Some(2));
    assert!(out.join("summary.json").exists());

    let invalid = walksum()
        .args(["simulate", "--lmax-final", "3", "--lmax-virtual", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("l_virtual"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"modle": {}}"#).unwrap();
    let bad = walksum().arg("g2-analytic").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"model": {"nx": 2, "ny": 2, "L_um": 1.5, "omega": 2.0, "delta": 0.0, "theta": 0.0, "phi": 0.0},
            "l_final": 3, "l_virtual": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let status = walksum()
        .args(["simulate", "--t", "0.1", "--t", "0.3", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("WALKSUM_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["times"], serde_json::json!([0.1, 0.3]));
    assert_eq!(doc["config"]["seed"], 5);
    assert_eq!(doc["config"]["model"]["nx"], 2);
    assert!(out.join("g2_t1.csv").exists());
}
