//! End-to-end tests of the `osassl` binary: smoke run, determinism,
//! validation diagnostics, generation round trip and the CSV feature
//! pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_osassl")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("osassl_cli_{}_{name}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn synthetic_config(seed: u64, out_dir: &Path) -> String {
    format!(
        r#"{{
  "input": {{ "synthetic": {{
    "n_cities": 50,
    "n_slices": 12,
    "topology": {{ "kind": "lattice", "rows": 10, "cols": 5 }},
    "theta": "linear",
    "declaration": {{ "base": 0.35, "slope": 0.5 }},
    "noise": {{ "model": "constant", "fraction": 0.5, "edge_correlation": 0.3 }},
    "seed": {seed}
  }} }},
  "zoo": [
    {{ "name": "mean", "kind": "mean" }},
    {{ "name": "ridge", "kind": "ridge", "lambda": 1.0 }},
    {{ "name": "boost", "kind": "boosted_linear", "rounds": 6, "shrinkage": 0.5 }}
  ],
  "meta": {{
    "stages": [2, 2, 2],
    "lambda": 0.05,
    "epsilon": 0.1,
    "penalty_variant": "literal",
    "algorithms": [
      {{ "kind": "discrete_over_learners" }},
      {{ "kind": "net_over_learners", "epsilon": 0.25 }},
      {{ "kind": "average" }},
      {{ "kind": "median" }},
      {{ "kind": "ridge_stack", "lambda": 1.0 }}
    ]
  }},
  "importance": {{ "n_permutations": 200, "seed": 7 }},
  "output_dir": "{}"
}}"#,
        out_dir.display()
    )
}

const EXPECTED_FILES: &[&str] = &[
    "forecast.csv",
    "forecast.json",
    "risk_traces.csv",
    "weights.csv",
    "predictions_vs_actual.csv",
    "residuals_by_decile.csv",
    "importance.csv",
    "importance_groups.csv",
    "degree_stats.csv",
    "oracle_probe.csv",
];

#[test]
fn synthetic_smoke_run_produces_all_artifacts() {
    let dir = temp_dir("smoke");
    let out_dir = dir.join("out");
    let config_path = dir.join("config.json");
    fs::write(&config_path, synthetic_config(1, &out_dir)).unwrap();

    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for file in EXPECTED_FILES {
        let path = out_dir.join(file);
        assert!(path.exists(), "missing artifact `{file}`");
        assert!(fs::metadata(&path).unwrap().len() > 0, "empty `{file}`");
    }

    // forecast.csv parses and has one row per evaluation year (12 - 6 = 6)
    let mut reader = csv::Reader::from_path(out_dir.join("forecast.csv")).unwrap();
    let rows: Vec<_> = reader.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 6);

    // forecast.json parses and carries per-city predictions
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("forecast.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 6);
    assert_eq!(
        json["rows"][0]["city_predictions"]
            .as_array()
            .unwrap()
            .len(),
        50
    );

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_config_and_seed_give_byte_identical_outputs() {
    let dir = temp_dir("determinism");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let config_a = dir.join("a.json");
    let config_b = dir.join("b.json");
    fs::write(&config_a, synthetic_config(99, &out_a)).unwrap();
    fs::write(&config_b, synthetic_config(99, &out_b)).unwrap();

    assert!(run_cli(&["run", "--config", config_a.to_str().unwrap()])
        .status
        .success());
    assert!(run_cli(&[
        "run",
        "--config",
        config_b.to_str().unwrap(),
        "--workers",
        "2"
    ])
    .status
    .success());

    for file in EXPECTED_FILES {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "artifact `{file}` differs between identical runs");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn validate_accepts_a_valid_config() {
    let dir = temp_dir("validate_ok");
    let config_path = dir.join("config.json");
    fs::write(&config_path, synthetic_config(5, &dir.join("out"))).unwrap();
    let output = run_cli(&["validate", "--config", config_path.to_str().unwrap()]);
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("config ok"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn validate_reports_every_violation_without_fail_fast() {
    let dir = temp_dir("validate_bad");
    let config_path = dir.join("config.json");
    let mut config = synthetic_config(5, &dir.join("out"));
    config = config.replace(r#""lambda": 0.05"#, r#""lambda": -1.0"#);
    config = config.replace(r#""epsilon": 0.1"#, r#""epsilon": 2.0"#);
    fs::write(&config_path, config).unwrap();

    let output = run_cli(&["validate", "--config", config_path.to_str().unwrap()]);
    assert!(!output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("meta.lambda"), "stdout: {stdout}");
    assert!(stdout.contains("meta.epsilon"), "stdout: {stdout}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_schema_file_fails_with_named_path() {
    let dir = temp_dir("missing_schema");
    let config_path = dir.join("config.json");
    let config = format!(
        r#"{{
  "input": {{ "csv": {{ "panel": "{panel}", "schema": "{schema}" }} }},
  "zoo": [ {{ "name": "mean", "kind": "mean" }} ],
  "meta": {{
    "stages": [1, 1, 1],
    "algorithms": [ {{ "kind": "average" }}, {{ "kind": "median" }} ]
  }},
  "output_dir": "{out}"
}}"#,
        panel = dir.join("panel.csv").display(),
        schema = dir.join("nope_schema.json").display(),
        out = dir.join("out").display(),
    );
    fs::write(&config_path, config).unwrap();
    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nope_schema.json"), "stderr: {stderr}");
    assert!(
        stderr.lines().count() == 1,
        "diagnostic not single-line: {stderr}"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_round_trips_through_csv_run() {
    let dir = temp_dir("gen_roundtrip");
    let gen_dir = dir.join("generated");
    let spec_path = dir.join("spec.json");
    fs::write(
        &spec_path,
        r#"{
  "n_cities": 30,
  "n_slices": 10,
  "topology": { "kind": "ring", "neighbors_each_side": 2 },
  "theta": "additive_nonlinear",
  "declaration": { "base": 0.4, "slope": 0.4 },
  "noise": { "model": "proportional", "fraction": 0.4, "edge_correlation": 0.2 },
  "seed": 13
}"#,
    )
    .unwrap();
    let output = run_cli(&[
        "gen",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        gen_dir.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for file in ["panel.csv", "schema.json", "truth.json"] {
        assert!(gen_dir.join(file).exists(), "missing `{file}`");
    }

    // run the schedule on the generated CSV
    let out_dir = dir.join("out");
    let config = format!(
        r#"{{
  "input": {{ "csv": {{ "panel": "{panel}", "schema": "{schema}" }} }},
  "zoo": [
    {{ "name": "mean", "kind": "mean" }},
    {{ "name": "ridge", "kind": "ridge", "lambda": 1.0 }}
  ],
  "meta": {{
    "stages": [2, 2, 2],
    "algorithms": [
      {{ "kind": "single", "learner": 0 }},
      {{ "kind": "single", "learner": 1 }},
      {{ "kind": "average" }}
    ]
  }},
  "importance": {{ "n_permutations": 100, "seed": 3 }},
  "output_dir": "{out}"
}}"#,
        panel = gen_dir.join("panel.csv").display(),
        schema = gen_dir.join("schema.json").display(),
        out = out_dir.display(),
    );
    let config_path = dir.join("config.json");
    fs::write(&config_path, config).unwrap();
    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out_dir.join("forecast.csv").exists());
    // no graph or ground truth on CSV input
    assert!(!out_dir.join("degree_stats.csv").exists());
    assert!(!out_dir.join("oracle_probe.csv").exists());
    fs::remove_dir_all(&dir).ok();
}

/// Small hand-built fixtures exercising the full feature pipeline:
/// grid-to-city aggregation, quarter CDFs, compound covariates.
#[test]
fn csv_run_with_feature_enrichment() {
    let dir = temp_dir("enrichment");
    let n_cities = 3;
    let years = 1995..=2002;

    // schema: one base continuous covariate
    let schema_path = dir.join("schema.json");
    fs::write(
        &schema_path,
        r#"[{"name":"pop","kind":"continuous","group":"exposure"}]"#,
    )
    .unwrap();

    // panel
    let mut panel = String::from("city,year,declared,cost,pop\n");
    for year in years.clone() {
        for city in 0..n_cities {
            let declared = (city + year as usize) % 2 == 0;
            let cost = if declared {
                1.0 + 0.1 * city as f64 + 0.05 * (year - 1995) as f64
            } else {
                0.0
            };
            panel.push_str(&format!(
                "{city},{year},{},{cost},{}\n",
                u8::from(declared),
                0.3 + 0.2 * city as f64
            ));
        }
    }
    let panel_path = dir.join("panel.csv");
    fs::write(&panel_path, panel).unwrap();

    // grid: 2 cells for years 1993..=2002 (panel years need two lags)
    let mut grid = String::from("cell,year,period,swi\n");
    for cell in 0..2 {
        for year in 1993..=2002 {
            for period in 1..=36 {
                let value =
                    0.2 + 0.3 * cell as f64 + 0.01 * (period as f64) + 0.002 * (year - 1993) as f64;
                grid.push_str(&format!("{cell},{year},{period},{value}\n"));
            }
        }
    }
    let grid_path = dir.join("grid.csv");
    fs::write(&grid_path, grid).unwrap();

    // overlaps: each city covers both cells
    let mut overlaps = String::from("city,cell,area\n");
    for city in 0..n_cities {
        overlaps.push_str(&format!("{city},0,{}\n", 1.0 + city as f64));
        overlaps.push_str(&format!("{city},1,2.0\n"));
    }
    let overlaps_path = dir.join("overlaps.csv");
    fs::write(&overlaps_path, overlaps).unwrap();

    // houses: two per (city, year)
    let mut houses = String::from("house,city,year,insured_sum,attr1,attr2,attr3\n");
    let mut house_id = 0;
    for year in years.clone() {
        for city in 0..n_cities {
            for h in 0..2 {
                houses.push_str(&format!(
                    "{house_id},{city},{year},{},{},{},{}\n",
                    1.0 + h as f64,
                    0.4 + 0.1 * h as f64,
                    2.0,
                    0.5 + 0.2 * city as f64
                ));
                house_id += 1;
            }
        }
    }
    let houses_path = dir.join("houses.csv");
    fs::write(&houses_path, houses).unwrap();

    let out_dir = dir.join("out");
    let config = format!(
        r#"{{
  "input": {{ "csv": {{
    "panel": "{panel}",
    "schema": "{schema}",
    "swi": {{ "grid": "{grid}", "overlaps": "{overlaps}", "cdf_years": [1993, 1996] }},
    "houses": {{ "path": "{houses}", "quantile_count": 5 }}
  }} }},
  "zoo": [
    {{ "name": "mean", "kind": "mean" }},
    {{ "name": "ridge", "kind": "ridge", "lambda": 1.0, "screen": ["pop", "swi_dry_w1", "swi_cdf_q3_t0", "cc_mean_attr1"] }}
  ],
  "meta": {{
    "stages": [2, 2, 2],
    "algorithms": [
      {{ "kind": "single", "learner": 0 }},
      {{ "kind": "single", "learner": 1 }}
    ]
  }},
  "importance": {{ "n_permutations": 50, "seed": 2 }},
  "output_dir": "{out}"
}}"#,
        panel = panel_path.display(),
        schema = schema_path.display(),
        grid = grid_path.display(),
        overlaps = overlaps_path.display(),
        houses = houses_path.display(),
        out = out_dir.display(),
    );
    let config_path = dir.join("config.json");
    fs::write(&config_path, config).unwrap();

    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    // enriched covariates appear in the importance report
    let importance = fs::read_to_string(out_dir.join("importance.csv")).unwrap();
    assert!(importance.contains("swi_raw_t0_p01"));
    assert!(importance.contains("swi_cdf_q4_t2"));
    assert!(importance.contains("cc_mean_a123"));
    assert!(importance.contains("cc_q_attr3_05"));
    let n_scored = importance.lines().count() - 1;
    // 1 base + 6 compound means + 3 * 5 quantiles + 120 block + 12 probs
    assert_eq!(n_scored, 1 + 6 + 15 + 120 + 12);
    fs::remove_dir_all(&dir).ok();
}
