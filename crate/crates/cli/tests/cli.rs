use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use neqsteady_core::currents::micro_currents;
use neqsteady_core::dynamics::{build_generators, stationary_state};
use neqsteady_core::rates::rate_set;
use neqsteady_core::scenario::load_scenario;
use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neqsteady"))
        .args(args)
        .env("NEQSTEADY_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_with(config: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", config.to_str().unwrap()];
    all.extend_from_slice(args);
    run(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of a CSV report as header plus f64-parsed records (text cells as NaN).
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

const THREE_LEVEL: &str = r#"
lamb_shift = "none"

[system]
levels = [0.0, 1.0, 2.5]
dipoles = [[[1, 2, 1.0, 0.0], [2, 3, 1.0, 0.0], [1, 3, 1.0, 0.0]]]

[[reservoir]]
kind = "equilibrium"
beta = 1.0
spectral_density = { form = "flat", eta = 0.1 }
"#;

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_subcommand_succeeds_on_the_shipped_scenarios() {
    let cases: [(&str, &[&str]); 9] = [
        ("two_bath_3level.toml", &["validate"]),
        ("two_bath_3level.toml", &["steady"]),
        ("two_bath_3level.toml", &["evolve", "--n-samples", "4"]),
        ("two_bath_3level.toml", &["currents"]),
        ("two_bath_3level.toml", &["kms", "--energy-offset", "1"]),
        ("model_b.toml", &["ddb"]),
        ("model_b.toml", &["kms"]),
        ("sym.toml", &["onsager"]),
        ("sym.toml", &["sweep", "--param", "delta_mu", "--range", "-0.1:0.1:3"]),
    ];
    for (file, args) in cases {
        let o = run_with(&scenario(file), args);
        assert_eq!(code(&o), 0, "{file} {args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).lines().count() >= 2, "{file} {args:?}");
    }
}

#[test]
fn exit_code_matrix() {
    let dir = TempDir::new().unwrap();
    let bad_schema = write_config(&dir, "schema.toml", &THREE_LEVEL.replace("eta = 0.1", "eta = 0.1, width = 2"));
    let degenerate = write_config(&dir, "degenerate.toml", &THREE_LEVEL.replace("[0.0, 1.0, 2.5]", "[0.0, 1.0, 1.0]"));
    let equal_gaps = write_config(&dir, "gaps.toml", &THREE_LEVEL.replace("[0.0, 1.0, 2.5]", "[0.0, 1.0, 2.0]"));
    // level 3 is coupled to nothing, so A has a two-dimensional kernel
    let reducible = write_config(
        &dir,
        "reducible.toml",
        &THREE_LEVEL.replace("[[1, 2, 1.0, 0.0], [2, 3, 1.0, 0.0], [1, 3, 1.0, 0.0]]", "[[1, 2, 1.0, 0.0]]"),
    );
    let good = write_config(&dir, "good.toml", THREE_LEVEL);
    let missing = dir.path().join("absent.toml");

    let cases: [(&Path, &[&str], i32); 10] = [
        (&good, &["steady"], 0),
        (&bad_schema, &["validate"], 2),
        (&degenerate, &["validate"], 2),
        (&equal_gaps, &["steady"], 2),
        (&reducible, &["validate"], 0),
        (&reducible, &["steady"], 3),
        (&reducible, &["currents"], 3),
        (&good, &["onsager"], 2),
        (&good, &["kms"], 2),
        (&missing, &["steady"], 1),
    ];
    for (path, args, want) in cases {
        let o = run_with(path, args);
        assert_eq!(
            code(&o),
            want,
            "{} {args:?}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
        if want != 0 {
            assert!(o.stdout.is_empty());
            assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
        }
    }
}

#[test]
fn flag_errors_exit_two() {
    let sym = scenario("sym.toml");
    for args in [
        &["sweep", "--param", "delta_beta", "--range", "0:0.2:0"][..],
        &["sweep", "--param", "delta_beta", "--range", "0:0.2"],
        &["sweep", "--param", "gamma", "--range", "0:0.2:3"],
        &["steady", "--format", "xml"],
        &["--lamb-shift", "maybe", "steady"],
    ] {
        let o = run_with(&sym, args);
        assert_eq!(code(&o), 2, "{args:?}");
    }
    assert_eq!(code(&run(&["steady"])), 2);
}

#[test]
fn csv_round_trips_to_full_precision() {
    let cfg = scenario("two_bath_3level.toml");
    let csv_out = run_with(&cfg, &["currents"]);
    let json_out = run_with(&cfg, &["currents", "--format", "json"]);
    assert_eq!(code(&csv_out), 0);
    let (header, rows) = parse_csv(&stdout(&csv_out));
    assert_eq!(header.join(","), "reservoir,m,n,omega,J,JE,JQ,defect");
    let doc: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    let currents = doc["currents"].as_array().unwrap();
    assert_eq!(currents.len(), rows.len());
    for (row, c) in rows.iter().zip(currents) {
        assert_eq!(row[4].to_bits(), c["number"].as_f64().unwrap().to_bits());
        assert_eq!(row[5].to_bits(), c["energy"].as_f64().unwrap().to_bits());
        assert_eq!(row[6].to_bits(), c["heat"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn ddb_report_matches_the_library() {
    let cfg = scenario("model_b.toml");
    let o = run_with(&cfg, &["ddb"]);
    assert_eq!(code(&o), 0);
    let s = load_scenario(&cfg).unwrap();
    let rates = rate_set(&s.system, &s.reservoirs, s.lamb_shift.unwrap_or_default()).unwrap();
    let (ops, _) = build_generators(&s.system, &rates).unwrap();
    let rho = stationary_state(&ops).unwrap();
    let report = micro_currents(&rates, &rho);
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(header[3], "defect");
    assert_eq!(rows.len(), report.ddb_defect.len());
    for (row, d) in rows.iter().zip(&report.ddb_defect) {
        assert_eq!(row[0] as usize, d.upper + 1);
        assert_eq!(row[1] as usize, d.lower + 1);
        assert_eq!(row[3].to_bits(), d.value.to_bits());
        assert!((row[4] - row[6]).abs() < 1e-11);
    }
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn sweep_entropy_production_is_nonnegative() {
    let sym = scenario("sym.toml");
    for (param, range) in [("delta_beta", "-0.2:0.2:21"), ("delta_mu", "-0.2:0.2:21"), ("mu0", "-1:0.5:7")] {
        let o = run_with(&sym, &["sweep", "--param", param, "--range", range]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let (header, rows) = parse_csv(&stdout(&o));
        assert_eq!(header[0], param);
        assert_eq!(header.last().unwrap(), "sigma");
        let n: usize = range.rsplit(':').next().unwrap().parse().unwrap();
        assert_eq!(rows.len(), n);
        assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]), "rows out of order");
        for r in &rows {
            assert!(*r.last().unwrap() >= -1e-12, "{param} = {}: sigma {}", r[0], r.last().unwrap());
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = scenario("two_bath_3level.toml");
    for args in [&["evolve", "--n-samples", "5"][..], &["steady"], &["validate", "--format", "json"]] {
        let a = run_with(&cfg, args);
        let b = run_with(&cfg, args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let sym = scenario("sym.toml");
    let a = run_with(&sym, &["sweep", "--param", "delta_beta", "--range", "0:0.3:16"]);
    let b = run_with(&sym, &["sweep", "--param", "delta_beta", "--range", "0:0.3:16"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn stationary_state_file_feeds_evolve() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario("two_bath_3level.toml");
    let state = dir.path().join("rho.txt");
    let out = dir.path().join("steady.csv");
    let o = run_with(
        &cfg,
        &["steady", "--state-out", state.to_str().unwrap(), "--out", out.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("level,energy,population,beta_s\n"));

    let o = run_with(&cfg, &["evolve", "--initial", state.to_str().unwrap(), "--t-final", "5", "--n-samples", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = parse_csv(&stdout(&o));
    for r in rows {
        assert!(*r.last().unwrap() < 1e-10, "stationary state drifted: {r:?}");
    }

    let bad = write_config(&dir, "bad_state.txt", "1 0 0 0 0 0 0 0 0.5 0");
    let o = run_with(&cfg, &["evolve", "--initial", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn seeded_initial_states() {
    let cfg = scenario("two_bath_3level.toml");
    let first_row = |seed: &str| {
        let o = run_with(&cfg, &["evolve", "--seed", seed, "--n-samples", "2"]);
        stdout(&o).lines().nth(1).unwrap().to_string()
    };
    assert_eq!(first_row("7"), first_row("7"));
    assert_ne!(first_row("7"), first_row("8"));
}

#[test]
fn json_reports_are_versioned() {
    let cfg = scenario("model_b.toml");
    for cmd in ["validate", "steady", "currents", "kms", "ddb"] {
        let o = run_with(&cfg, &[cmd, "--format", "json"]);
        assert_eq!(code(&o), 0, "{cmd}");
        let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(doc["schema_version"], 1, "{cmd}");
        assert_eq!(doc["command"], cmd);
    }
}
