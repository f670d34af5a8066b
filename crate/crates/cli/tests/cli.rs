use std::path::Path;
use std::process::{Command, Output};

use surrosel_cli::config::ExperimentConfig;
use surrosel_cli::experiments::Workspace;

const SMALL: &[&str] = &[
    "--fine_level", "4", "--coarse_levels", "[2,3]", "--n_train", "10", "--n_test", "5", "--n_splits", "1", "--m", "6",
];

fn surrosel(out: &Path, args: &[&str], extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surrosel"))
        .args(args)
        .args(["--output_dir", out.to_str().unwrap()])
        .args(extra)
        .output()
        .expect("binary runs")
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn config(out: &Path, extra: &[(&str, &str)]) -> ExperimentConfig {
    let mut pairs: Vec<(String, String)> = SMALL.chunks(2).map(|p| (p[0][2..].to_string(), p[1].to_string())).collect();
    pairs.push(("output_dir".into(), out.to_str().unwrap().into()));
    pairs.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    ExperimentConfig::from_pairs(&pairs).unwrap()
}

#[test]
fn smoke_run_and_stable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let t = std::time::Instant::now();
    ok(surrosel(out, &["offline"], SMALL));
    let manifest = std::fs::read(out.join("store/manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(json["summary"]["K"], 2);
    assert!(json["rng"].as_str().unwrap().contains("ChaCha8"));
    ok(surrosel(out, &["exp1", "--plots"], SMALL));
    ok(surrosel(out, &["exp2", "--plots"], SMALL));
    assert!(t.elapsed().as_secs() < 60);

    for row in csv_rows(&out.join("exp1_rows.csv")) {
        if row[1] == "4" {
            assert_eq!(row[5].parse::<f64>().unwrap(), 0.0);
        }
    }
    let agree = csv_rows(&out.join("exp2_agreement.csv"));
    let fine = agree.iter().find(|r| r[1] == "4").unwrap();
    assert_eq!(fine[3], "5");
    assert!(out.join("exp1_error.svg").exists() && out.join("exp2_histogram.svg").exists());

    ok(surrosel(out, &["offline"], SMALL));
    assert_eq!(std::fs::read(out.join("store/manifest.json")).unwrap(), manifest);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "fine_level = 4\nflne_level = 5\n").unwrap();
    let o = surrosel(dir.path(), &["offline", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = surrosel(dir.path(), &["offline", "--m", "4", "--rb_max_dim", "4"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = surrosel(dir.path(), &["exp1"], SMALL);
    assert_eq!(o.status.code(), Some(2), "missing store");
    let o = surrosel(dir.path(), &["offline", "--bogus", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn store_built_with_other_settings_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(surrosel(dir.path(), &["offline"], SMALL));
    let o = surrosel(dir.path(), &["exp1"], &[SMALL, &["--seed", "9"]].concat());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_reproduces_the_experiment_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(surrosel(out, &["offline"], SMALL));
    ok(surrosel(out, &["exp2"], SMALL));
    let ws = Workspace::load(&config(out, &[]), &out.join("store")).unwrap();
    let selections = csv_rows(&out.join("exp2_selections.csv"));
    for i in [0usize, 3] {
        let w = ws.ms.measure(&ws.test_snapshots[i]).unwrap();
        let text: Vec<String> = w.iter().map(|v| format!("{v:e}")).collect();
        let wf = out.join(format!("w{i}.txt"));
        std::fs::write(&wf, text.join("\n")).unwrap();
        let stdout = ok(surrosel(out, &["estimate", "--w-file", wf.to_str().unwrap()], SMALL));
        let k: String = stdout.lines().next().unwrap().trim_start_matches("k* = ").split(' ').next().unwrap().into();
        assert_eq!(k, selections[i][2], "test point {i}");
        let nodal = csv_rows(&out.join("estimate_nodal.csv"));
        assert_eq!(nodal.len(), ws.test_snapshots[i].len());

        std::fs::write(&wf, text[..text.len() - 1].join(" ")).unwrap();
        let o = surrosel(out, &["estimate", "--w-file", wf.to_str().unwrap()], SMALL);
        assert_eq!(o.status.code(), Some(3), "short measurement vector");
    }
}

#[test]
fn degenerate_single_cell_estimate_is_offset_plus_correction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let args = ["--fine_level", "4", "--coarse_levels", "[2,3]", "--n_train", "10", "--n_test", "5", "--m", "6", "--rb_max_dim", "0", "--n_splits", "0"];
    ok(surrosel(out, &["offline"], &args));
    let mut cfg = config(out, &[("rb_max_dim", "0")]);
    cfg.n_splits = 0;
    let ws = Workspace::load(&cfg, &out.join("store")).unwrap();
    assert_eq!(ws.family.len(), 1);
    let offset = ws.global.offset();
    let w = ws.ms.measure(&ws.test_snapshots[1]).unwrap();
    let wf = out.join("w.txt");
    std::fs::write(&wf, w.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")).unwrap();
    ok(surrosel(out, &["estimate", "--w-file", wf.to_str().unwrap(), "--level", "3"], &args));
    let shift: Vec<f64> = w.iter().zip(ws.ms.measure(offset).unwrap()).map(|(a, b)| a - b).collect();
    let mut expected = ws.ms.reconstruct(&shift).unwrap();
    expected.axpy(1.0, offset).unwrap();
    let nodal = csv_rows(&out.join("estimate_nodal.csv"));
    for (row, e) in nodal.iter().zip(expected.coeffs()) {
        assert!((row[3].parse::<f64>().unwrap() - e).abs() <= 1e-12 * (1.0 + e.abs()));
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

#[test]
fn surrogate_wall_time_grows_with_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let args = ["--fine_level", "6", "--coarse_levels", "[2,3,4,5]", "--n_train", "20", "--n_test", "10", "--n_splits", "0", "--threads", "1"];
    ok(surrosel(out, &["offline"], &args));
    ok(surrosel(out, &["exp1"], &args));
    let rows = csv_rows(&out.join("exp1_timing.csv"));
    let levels: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let times: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let (rl, rt) = (ranks(&levels), ranks(&times));
    let n = rl.len() as f64;
    let d2: f64 = rl.iter().zip(&rt).map(|(a, b)| (a - b) * (a - b)).sum();
    let rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    assert!(rho > 0.0, "spearman {rho}, times {times:?}");
}
