use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spamm_core::bench::CSV_COLUMNS;

fn spamm_ec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spamm-ec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(name: &str) -> usize {
    CSV_COLUMNS.iter().position(|c| *c == name).unwrap()
}

#[test]
fn square_generated_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let o = spamm_ec(&[
        "square",
        "--matrix",
        "gen:96,0.7,3",
        "--variants",
        "truncmul,spamm,hybrid",
        "--tolerances",
        "1e-2:1e-8:log:4",
        "--grid-start",
        "1",
        "--grid-ratio",
        "0.9",
        "--grid-count",
        "350",
        "--leaf",
        "16",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows[0].join(","), CSV_COLUMNS.join(","));
    assert_eq!(rows.len(), 1 + 3 * 4);
    for row in &rows[1..] {
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[column("status")], "ok");
        assert_eq!(row[column("iter")], "2");
        let err: f64 = row[column("realized_error")].parse().unwrap();
        let tol: f64 = row[column("tolerance")].parse().unwrap();
        assert!(err < tol);
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("error/tolerance"));
}

#[test]
fn square_identity_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("eye.mtx");
    let mut text = String::from("%%MatrixMarket matrix coordinate real general\n40 40 40\n");
    for i in 1..=40 {
        text.push_str(&format!("{i} {i} 1.0\n"));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("eye.csv");
    let o = spamm_ec(&[
        "square",
        "--matrix",
        input.to_str().unwrap(),
        "--variants",
        "truncmul",
        "--tolerances",
        "1e-3,1e-6",
        "--leaf",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for row in &csv_rows(&out)[1..] {
        assert_eq!(row[column("realized_error")].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[column("nnz_in")], "40");
        assert_eq!(row[column("nnz_out")], "40");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let from_cfg = dir.path().join("from_cfg.csv");
    let from_flag = dir.path().join("from_flag.csv");
    fs::write(
        &cfg,
        format!(
            "# squaring run\nmatrix = gen:64,0.8,5\nvariants = spamm\ntolerances = 1e-4\nleaf = 8\ngrid_count = 100\nout = {}\n",
            from_cfg.display()
        ),
    )
    .unwrap();
    let o = spamm_ec(&["square", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&from_cfg);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][column("variant")], "spamm");

    let o = spamm_ec(&[
        "square",
        "--config",
        cfg.to_str().unwrap(),
        "--variants",
        "truncmul,hybrid",
        "--out",
        from_flag.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let variants: Vec<String> = csv_rows(&from_flag)[1..]
        .iter()
        .map(|r| r[column("variant")].clone())
        .collect();
    assert_eq!(variants, ["truncmul", "hybrid"]);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "matrix = gen:32,1,1\nleaves = 8\n").unwrap();
    let o = spamm_ec(&["square", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leaves"));
}

#[test]
fn purify_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let o = spamm_ec(&[
        "purify",
        "--gen",
        "64,0.7,2",
        "--occupation",
        "16",
        "--epsilon",
        "1e-5",
        "--variant",
        "hybrid",
        "--max-iter",
        "100",
        "--leaf",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let summary = &doc["summaries"][0];
    assert_eq!(summary["variant"], "hybrid");
    assert_eq!(summary["converged"], true);
    assert!(summary["oracle_error"].as_f64().unwrap() < 1e-5);
    let records = doc["records"].as_array().unwrap();
    assert!(records.len() > 2);
    assert!(records
        .iter()
        .all(|r| r["status"] == "ok" && r["processes"] == 1));
}

#[test]
fn non_convergence_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short.csv");
    let o = spamm_ec(&[
        "purify",
        "--gen",
        "64,0.7,2",
        "--variant",
        "truncmul",
        "--max-iter",
        "2",
        "--leaf",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let rows = csv_rows(&out);
    assert_eq!(rows.last().unwrap()[column("status")], "not_converged");
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    let extras: [&[&str]; 2] = [&[], &["--sequential"]];
    for (i, extra) in extras.iter().enumerate() {
        let out = dir.path().join(format!("r{i}.csv"));
        let mut args = vec![
            "square",
            "--matrix",
            "gen:64,0.9,11",
            "--leaf",
            "8",
            "--tolerances",
            "1e-3,1e-7",
        ];
        args.extend_from_slice(extra);
        let out_s = out.to_str().unwrap().to_string();
        args.extend_from_slice(&["--out", &out_s]);
        assert!(spamm_ec(&args).status.success());
        let stripped: Vec<String> = csv_rows(&out)
            .into_iter()
            .map(|mut r| {
                for name in ["t_mul", "t_trunc", "t_spamm", "t_cse"] {
                    r[column(name)].clear();
                }
                r.join(",")
            })
            .collect();
        outputs.push(stripped);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn missing_input_is_an_error() {
    let o = spamm_ec(&[
        "square",
        "--matrix",
        "/nonexistent/file.mtx",
        "--out",
        "/tmp/none.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = spamm_ec(&["purify"]);
    assert_eq!(o.status.code(), Some(1));
}
