use std::path::PathBuf;
use std::process::Command;

use rproj::cli::{
    admissible_pairs, fit_loglog_slope, run_scenario, CliError, Scenario, ScenarioConfig,
    EXIT_MODULE, EXIT_OK, EXIT_VALIDATION,
};
use rproj::geom3::FamilyKind;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rproj() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rproj"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rproj-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        ScenarioConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn parse_reads_keys_and_comments() {
    let cfg = ScenarioConfig::parse(
        "# comment\nscenario = sublevel\nfamily = plane  # trailing\nx = 0, 0, 1\ndelta_k = 3, 5\nseed = 11\n",
    )
    .unwrap();
    assert_eq!(cfg.scenario, Scenario::Sublevel);
    assert_eq!(cfg.family, FamilyKind::Plane);
    assert_eq!(cfg.deltas(), vec![0.125, 0.03125]);
    assert_eq!(cfg.seed, 11);
}

fn field_of(text: &str) -> String {
    match ScenarioConfig::parse(text) {
        Err(CliError::Validation { field, .. }) => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn validation_names_the_field() {
    assert_eq!(field_of("family = line"), "scenario");
    assert_eq!(field_of("scenario = nope"), "scenario");
    assert_eq!(field_of("scenario = sublevel\nbogus = 1"), "bogus");
    assert_eq!(field_of("scenario = sublevel\ntau = 0.5"), "tau");
    assert_eq!(field_of("scenario = sublevel\nc = 0.3"), "c");
    assert_eq!(field_of("scenario = sublevel\ndelta_k = 5, 5"), "delta_k");
    assert_eq!(field_of("scenario = sublevel\ndelta_k = 6, 4"), "delta_k");
    assert_eq!(field_of("scenario = pipeline\nsigma = 1.0"), "sigma");
    assert_eq!(field_of("scenario = pipeline\nfamily = line\nsigma = 0.5"), "sigma");
    assert!(ScenarioConfig::parse("scenario = pipeline\nfamily = line\nsigma = 0.6").is_ok());
    assert_eq!(field_of("scenario = sublevel\nx = 1, 2"), "x");
    assert_eq!(field_of("scenario = dimsweep\nifs = koch"), "ifs");
    assert_eq!(field_of("scenario = dimsweep\nk_min = 3\nk_max = 6"), "k_max");
    assert_eq!(field_of("scenario = sublevel\njunk line"), "line 2");
}

#[test]
fn exit_codes_by_error_kind() {
    let v = CliError::Validation { field: "tau".into(), msg: String::new() };
    assert_eq!(v.exit_code(), EXIT_VALIDATION);
    assert_eq!(CliError::InsufficientData(String::new()).exit_code(), EXIT_MODULE);
}

#[test]
fn fit_examples() {
    let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| x.sqrt()).collect();
    let f = fit_loglog_slope(&xs, &ys).unwrap();
    assert!((f.slope - 0.5).abs() < 1e-12);
    assert!((f.r2 - 1.0).abs() < 1e-12);

    let xs = [0.5, 1.0, 1.5, 2.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
    let f = fit_loglog_slope(&xs, &ys).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert_eq!(f.dropped, 0);
}

#[test]
fn fit_drops_zeros_and_needs_three_points() {
    let f = fit_loglog_slope(&[1.0, 2.0, 3.0, 4.0], &[0.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(f.dropped, 1);
    assert!((f.slope - 1.0).abs() < 1e-12);
    assert!(matches!(
        fit_loglog_slope(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]),
        Err(CliError::InsufficientData(_))
    ));
    assert!(fit_loglog_slope(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    assert!(fit_loglog_slope(&[1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
}

#[test]
fn curve_check_margin_column() {
    let cfg = ScenarioConfig::parse("scenario = curve-check\ntheta_samples = 500").unwrap();
    let t = run_scenario(&cfg).unwrap();
    assert_eq!(t.rows.len(), 500);
    for d in t.column("det").unwrap() {
        assert!((d.abs() - 0.353553).abs() < 1e-6);
    }
    let planar = ScenarioConfig::parse("scenario = curve-check\ncurve = planar").unwrap();
    let t = run_scenario(&planar).unwrap();
    assert!(t.column("det").unwrap().iter().all(|d| d.abs() < 1e-12));
}

#[test]
fn sublevel_ladder_slope() {
    let text = std::fs::read_to_string(configs_dir().join("sublevel.conf")).unwrap();
    let t = run_scenario(&ScenarioConfig::parse(&text).unwrap()).unwrap();
    let f = fit_loglog_slope(&t.column("delta").unwrap(), &t.column("length").unwrap()).unwrap();
    assert!((0.45..=0.55).contains(&f.slope), "{}", f.slope);
}

#[test]
fn metadata_records_constants() {
    let cases = [
        ("twocones", &["eps", "tau", "slab_c", "cap_scale"][..]),
        ("threecones", &["c", "R", "collinear_tau"][..]),
        ("pipeline", &["sigma", "c0"][..]),
    ];
    for (name, keys) in cases {
        let text = std::fs::read_to_string(configs_dir().join(format!("{name}.conf"))).unwrap();
        let t = run_scenario(&ScenarioConfig::parse(&text).unwrap()).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with(&format!("#schema=rproj.{name}.v1\n#seed=")));
        for k in keys {
            assert!(t.metadata.iter().any(|(m, _)| m == k), "{name} lacks {k}");
        }
    }
}

#[test]
fn admissible_pairs_respect_floor() {
    let pairs = admissible_pairs(3, 50, 0.4);
    assert_eq!(pairs.len(), 50);
    for (p, q) in pairs {
        assert!(p.norm() <= 1.0 && q.norm() <= 1.0);
        assert!(p.norm().min(q.norm()).min((p - q).norm()) >= 0.4);
    }
    assert_eq!(admissible_pairs(3, 5, 0.4), admissible_pairs(3, 5, 0.4));
}

#[test]
fn binary_exit_codes() {
    let bad = tmp("bad.conf");
    std::fs::write(&bad, "scenario = sublevel\ntau = 0.7\n").unwrap();
    let out = rproj().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));

    let broken = tmp("broken.conf");
    std::fs::write(&broken, "scenario = sublevel\nx = 0, 0, 0\n").unwrap();
    let out = rproj().arg("--config").arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_MODULE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sublevel"));

    let out = rproj().args(["--config", "/nonexistent/x.conf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_MODULE));

    let out = rproj().args(["--threads", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));

    let good = configs_dir().join("curve-check.conf");
    let out = rproj().arg("--config").arg(&good).args(["--threads", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    let out = rproj().arg("--config").arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(out.stdout.starts_with(b"#schema=rproj.curve-check.v1"));
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = configs_dir().join("threecones.conf");
    let a = tmp("seed-a.csv");
    let b = tmp("seed-b.csv");
    for (path, seed) in [(&a, "7"), (&b, "8")] {
        let st = rproj().arg("--config").arg(&cfg).args(["--seed", seed, "--out"]).arg(path).status().unwrap();
        assert!(st.success());
    }
    let a = std::fs::read_to_string(a).unwrap();
    let b = std::fs::read_to_string(b).unwrap();
    assert!(a.contains("#seed=7\n") && b.contains("#seed=8\n"));
    assert_ne!(a, b);
}

#[test]
fn output_is_independent_of_thread_count() {
    for name in ["pipeline", "threecones", "dimsweep-line"] {
        let cfg = configs_dir().join(format!("{name}.conf"));
        let mut outs = Vec::new();
        for threads in ["1", "4"] {
            let path = tmp(&format!("{name}-{threads}.csv"));
            let st = rproj()
                .arg("--config")
                .arg(&cfg)
                .args(["--threads", threads, "--out"])
                .arg(&path)
                .status()
                .unwrap();
            assert!(st.success());
            outs.push(std::fs::read(path).unwrap());
        }
        assert_eq!(outs[0], outs[1], "{name}");
    }
}
