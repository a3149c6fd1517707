use retrodetect::resgen::GeneratorKind;
use retrodetect::scenario::{
    check_design, design, export_csv, load_config, read_residuals_csv, run_scenario, EventKind, ScenarioConfig,
};

fn short(kind: GeneratorKind, q: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::minimal("R18");
    cfg.generator_kind = kind;
    cfg.gain_q = q;
    cfg.horizon_s = 6.0;
    cfg
}

#[test]
fn same_seed_gives_identical_csv() {
    let cfg = short(GeneratorKind::Retrofit, 10.0);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export_csv(&run_scenario(&cfg).unwrap(), a.path()).unwrap();
    export_csv(&run_scenario(&cfg).unwrap(), b.path()).unwrap();
    for f in ["residuals.csv", "voltages.csv", "events.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let mut other = cfg.clone();
    other.noise.seed = 1;
    let c = tempfile::tempdir().unwrap();
    export_csv(&run_scenario(&other).unwrap(), c.path()).unwrap();
    assert_ne!(
        std::fs::read(a.path().join("residuals.csv")).unwrap(),
        std::fs::read(c.path().join("residuals.csv")).unwrap()
    );
}

#[test]
fn disconnection_follows_first_alarm() {
    let r = run_scenario(&short(GeneratorKind::Retrofit, 1.0)).unwrap();
    let first = r.first_alarm().expect("attack must be detected");
    let cut = r
        .events
        .iter()
        .find(|e| matches!(e.kind, EventKind::Disconnection { .. }))
        .expect("disconnection event");
    assert_eq!(cut.time, first);
    let EventKind::Disconnection { removed } = &cut.kind else { unreachable!() };
    for &i in removed {
        for (k, &t) in r.time.iter().enumerate() {
            if t > first {
                assert!(r.residual_norms[(k, i)].is_nan(), "subsystem {} still reported at {t}", i + 1);
            }
        }
    }
}

#[test]
fn csv_round_trip_matches_memory() {
    let r = run_scenario(&short(GeneratorKind::Naive, 1.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_csv(&r, dir.path()).unwrap();
    let (t, m) = read_residuals_csv(&dir.path().join("residuals.csv")).unwrap();
    assert_eq!(m.ncols(), r.nsubsystems());
    assert_eq!(t.len(), r.time.len());
    for (a, b) in m.iter().zip(r.residual_norms.iter()) {
        assert!(a.is_nan() && b.is_nan() || (a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

#[test]
fn voltages_settle_after_separation() {
    let mut cfg = short(GeneratorKind::Retrofit, 10.0);
    cfg.noise.std = 0.0;
    cfg.horizon_s = 30.0;
    cfg.step_s = 1e-2;
    let r = run_scenario(&cfg).unwrap();
    let t = r.first_alarm().unwrap();
    // The sample stamped at the alarm is the last one before the cut.
    let before = r.max_voltage_deviation(0.0, t + cfg.step_s / 2.0);
    let after = r.max_voltage_deviation(t + cfg.step_s / 2.0, f64::INFINITY);
    assert!(after <= before, "after {after} > before {before}");
    // Late samples change by less than a thousandth of the peak.
    let late = r.max_voltage_deviation(25.0, 30.0);
    let settled = r.max_voltage_deviation(29.0, 30.0);
    assert!((late - settled).abs() <= 1e-3 * before);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let (grid, partition) = cfg.grid().unwrap();
            let d = design(&cfg, &grid, &partition).unwrap();
            // Filtered attack maps carry defective eigenvalue clusters.
            let lines = check_design(&grid, &partition, &d).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let failed: Vec<_> = lines.iter().filter(|l| !l.passed).map(|l| l.name.as_str()).collect();
            assert!(failed.is_empty(), "{}: {failed:?}", path.display());
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn cli_sweep_detects_faster_with_gain() {
    let configs = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let call = |args: Vec<String>| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = retrodetect::scenario::cli::run(args, &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        String::from_utf8(out).unwrap()
    };
    let mut analyze = vec!["retrodetect".to_string(), "analyze".into()];
    for name in ["naive", "retrofit_q1", "retrofit_q10"] {
        let cfg = configs.join(format!("{name}.json")).display().to_string();
        let out = tmp.path().join(name).display().to_string();
        if name == "naive" {
            let report = call(vec!["retrodetect".into(), "check".into(), "--config".into(), cfg.clone()]);
            assert!(report.lines().all(|l| l.starts_with("PASS")), "{report}");
        }
        call(vec!["retrodetect".into(), "simulate".into(), "--config".into(), cfg, "--out".into(), out.clone()]);
        analyze.extend(["--result".into(), out]);
    }
    let report = call(analyze);
    let firsts: Vec<f64> = report
        .lines()
        .filter_map(|l| l.trim().strip_prefix("first alarm: "))
        .map(|s| s.trim_end_matches(" s").parse().unwrap())
        .collect();
    assert_eq!(firsts.len(), 3, "{report}");
    assert!(firsts[0] > firsts[1] && firsts[1] > firsts[2], "{firsts:?}");
    assert!(report.contains("detection order: strictly decreasing"), "{report}");
}
