//! Black-box tests of the `sysrisk` binary: exit codes, output structure,
//! configuration precedence and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use sysrisk_core::dependence::DccParams;
use sysrisk_core::synthetic::{hub_market_spec, SimulationSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sysrisk"));
    c.env_remove("SYSRISK_OUTPUT_DIR");
    c
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/hub_market/prices.csv")
}

fn run(c: &mut Command) -> Output {
    let out = c.output().expect("binary runs");
    if !out.stderr.is_empty() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn csv_header(p: &Path) -> Vec<String> {
    csv::Reader::from_path(p).unwrap().headers().unwrap().iter().map(str::to_string).collect()
}

/// Writes a spec file and simulates it into `dir`, returning the price CSV.
fn simulate(dir: &Path, spec: &SimulationSpec) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(spec).unwrap()).unwrap();
    let out = run(bin().args(["simulate", "--spec"]).arg(&spec_path).arg("-o").arg(dir));
    assert_eq!(out.status.code(), Some(0));
    dir.join("prices.csv")
}

fn small_hub(k: usize, weeks: usize, seed: u64) -> SimulationSpec {
    SimulationSpec { weeks, ..hub_market_spec(k.max(5), 0.85, 0.35, seed).unwrap() }
}

fn tree_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_deterministic_and_manifest_matches_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_hub(5, 120, 21);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    simulate(&a, &spec);
    simulate(&b, &spec);
    assert_eq!(read(&a.join("prices.csv")), read(&b.join("prices.csv")));
    assert_eq!(read(&a.join("manifest.json")), read(&b.join("manifest.json")));
    let manifest: serde_json::Value = serde_json::from_str(&read(&a.join("manifest.json"))).unwrap();
    let back: SimulationSpec = serde_json::from_value(manifest["spec"].clone()).unwrap();
    assert_eq!(back, spec);
    assert_eq!(manifest["price_rows"], 121);
    assert_eq!(manifest["hub"], "HUB");
    assert_eq!(csv_rows(&a.join("prices.csv")).len(), 121);

    // Different seed, different panel.
    let c = dir.path().join("c");
    std::fs::create_dir_all(&c).unwrap();
    simulate(&c, &SimulationSpec { seed: 22, ..spec });
    assert_ne!(read(&a.join("prices.csv")), read(&c.join("prices.csv")));
}

#[test]
fn default_simulation_reproduces_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["simulate", "--seed", "7", "-o"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(&dir.path().join("prices.csv")), read(&fixture()));
    let bundled = fixture().with_file_name("manifest.json");
    assert_eq!(read(&dir.path().join("manifest.json")), read(&bundled));
    assert_eq!(csv_rows(&fixture()).len(), 754);
}

#[test]
fn fit_on_fixture_writes_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().arg("fit").arg("--input").arg(fixture()).arg("-o").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    let models: Vec<_> = std::fs::read_dir(dir.path().join("models")).unwrap().collect();
    assert_eq!(models.len(), 10);
    assert!(dir.path().join("dcc.json").exists());
    let summary = csv_rows(&dir.path().join("fit_summary.csv"));
    assert!(summary.iter().all(|r| r[1] == "ok" && r[2] == "true"));
}

#[test]
fn constant_column_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let prices = simulate(dir.path(), &small_hub(5, 260, 3));
    let text = read(&prices);
    let mut lines = text.lines();
    let mut edited = format!("{},FLAT\n", lines.next().unwrap());
    for l in lines {
        edited.push_str(&format!("{l},50\n"));
    }
    let input = dir.path().join("with_flat.csv");
    std::fs::write(&input, edited).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(bin().arg("fit").arg("--input").arg(&input).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(1));
    let summary = csv_rows(&out_dir.join("fit_summary.csv"));
    let flat = summary.iter().find(|r| r[0] == "FLAT").unwrap();
    assert_eq!(flat[1], "failed");
    assert_eq!(summary.iter().filter(|r| r[1] == "ok").count(), 5);
    assert_eq!(std::fs::read_dir(out_dir.join("models")).unwrap().count(), 5);
    let dcc: serde_json::Value = serde_json::from_str(&read(&out_dir.join("dcc.json"))).unwrap();
    assert_eq!(dcc["entities"].as_array().unwrap().len(), 5);
}

#[test]
fn mst_and_covar_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let weeks = 260;
    let k = 5;
    let prices = simulate(dir.path(), &small_hub(k, weeks, 4));
    let out_dir = dir.path().join("out");
    let out = run(bin().arg("mst").arg("--input").arg(&prices).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0));
    let ind = out_dir.join("mst_indicators.csv");
    assert_eq!(csv_rows(&ind).len(), weeks);
    assert_eq!(csv_header(&ind)[2..], ["apl", "max_degree", "alpha_degree", "max_bc"]);
    assert_eq!(csv_rows(&out_dir.join("mst_nodes.csv")).len(), weeks * k);
    assert_eq!(csv_rows(&out_dir.join("mst_edges.csv")).len(), weeks * (k - 1));
    for name in ["mst_indicators", "mst_nodes", "mst_edges", "mst_summary_by_state"] {
        let side: serde_json::Value =
            serde_json::from_str(&read(&out_dir.join(format!("{name}.schema.json")))).unwrap();
        assert_eq!(side["schema_version"], 1);
        assert_eq!(side["table"], name);
    }

    let out = run(bin().arg("covar").arg("--input").arg(&prices).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0));
    let long = out_dir.join("covar_series.csv");
    let rows = csv_rows(&long);
    assert_eq!(rows.len(), weeks * k);
    assert_eq!(csv_header(&long)[3..], ["var_i", "covar_stress", "covar_median", "delta_covar"]);
    for r in &rows {
        let v: Vec<f64> = r[3..].iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[3] - (v[1] - v[2])).abs() < 1e-12);
    }
    // One summary row per (entity, label) present in the data.
    let mut pairs: Vec<(String, String)> = rows.iter().map(|r| (r[1].clone(), r[2].clone())).collect();
    pairs.sort();
    pairs.dedup();
    let summary = csv_rows(&out_dir.join("covar_summary_by_state.csv"));
    assert_eq!(summary.len(), pairs.len());
    let meta: serde_json::Value = serde_json::from_str(&read(&out_dir.join("covar_metadata.json"))).unwrap();
    assert!(meta["sector_index"].as_str().unwrap().contains("excluded"));
}

#[test]
fn relate_two_entities() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_hub(5, 260, 5);
    spec.entities.truncate(2);
    spec.loadings = None;
    spec.dcc.qbar = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let prices = simulate(dir.path(), &spec);
    let out_dir = dir.path().join("out");
    let out = run(bin().arg("relate").arg("--input").arg(&prices).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&out_dir.join("relate.csv")).len(), 2);
    let summary: serde_json::Value = serde_json::from_str(&read(&out_dir.join("relate_summary.json"))).unwrap();
    assert_eq!(summary["entities"], 2);
}

#[test]
fn independent_panel_has_negligible_delta_covar() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_hub(5, 600, 6);
    spec.entities.truncate(4);
    spec.loadings = None;
    spec.dcc = DccParams { c: vec![0.0], d: vec![0.0], qbar: DMatrix::identity(4, 4), nu_copula: 1e6 };
    let prices = simulate(dir.path(), &spec);
    let out_dir = dir.path().join("out");
    let out = run(bin().arg("relate").arg("--input").arg(&prices).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(0));
    for r in csv_rows(&out_dir.join("relate.csv")) {
        let mean: f64 = r[2].parse().unwrap();
        assert!(mean.abs() < 0.005, "{}: {mean}", r[0]);
    }
}

#[test]
fn hard_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = run(bin().arg("fit").arg("--input").arg(&missing).arg("-o").arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().arg("covar").arg("-o").arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().args(["fit", "--alpha", "0.7", "--input"]).arg(fixture()));
    assert_eq!(out.status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"inptu": "x.csv"}"#).unwrap();
    let out = run(bin().arg("fit").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "date,A,B\n2020-01-03,1,2\n2020-01-10,-1,2\n").unwrap();
    let out = run(bin().arg("mst").arg("--input").arg(&bad_csv).arg("-o").arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let prices = simulate(dir.path(), &small_hub(5, 220, 8));
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"input": "prices.csv", "output_dir": "from-config", "entities": ["HUB", "P01", "P02"]}"#,
    )
    .unwrap();
    assert!(prices.exists());

    let out = run(bin().arg("mst").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let nodes = csv_rows(&dir.path().join("from-config/mst_nodes.csv"));
    assert_eq!(nodes.len(), 220 * 3);

    let env_dir = dir.path().join("from-env");
    let out = run(bin().arg("mst").arg("--config").arg(&cfg).env("SYSRISK_OUTPUT_DIR", &env_dir));
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("mst_indicators.csv").exists());

    let cli_dir = dir.path().join("from-cli");
    let out = run(
        bin()
            .args(["mst", "--entities", "HUB,P03", "--config"])
            .arg(&cfg)
            .arg("-o")
            .arg(&cli_dir)
            .env("SYSRISK_OUTPUT_DIR", &env_dir),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&cli_dir.join("mst_nodes.csv")).len(), 220 * 2);
}

#[test]
fn report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let prices = simulate(dir.path(), &small_hub(5, 240, 9));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out_dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = run(
            bin()
                .args(["report", "--charts", "--threads", threads, "--input"])
                .arg(&prices)
                .arg("-o")
                .arg(out_dir),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let ta = tree_files(&a);
    assert!(ta.iter().any(|(n, _)| n.ends_with(".svg")));
    assert_eq!(ta, tree_files(&b));
    let index: serde_json::Value = serde_json::from_str(&read(&a.join("report.json"))).unwrap();
    let listed: Vec<String> =
        index["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let actual: Vec<String> = ta.iter().map(|(n, _)| n.clone()).collect();
    assert_eq!(listed, actual);
}
