use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ionscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionscope"))
        .args(args)
        .output()
        .expect("run ionscope")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repro_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/repro")
}

#[test]
fn grid_pattern_has_one_row_per_point() {
    let out = ionscope(&[
        "pattern",
        "--n",
        "4",
        "--spacing",
        "5.75",
        "--isotope",
        "1",
        "--order",
        "2",
        "--slice",
        "grid2d",
        "--points",
        "201",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi1,phi2,value"));
    assert_eq!(lines.count(), 201 * 201);
}

#[test]
fn opposite_scan_maxima() {
    let out = ionscope(&[
        "pattern",
        "--n",
        "4",
        "--spacing",
        "0.5",
        "--isotope",
        "1",
        "--order",
        "2",
        "--slice",
        "opposite",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<(f64, f64)> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    let step = std::f64::consts::PI / 1000.0;
    let maxima: Vec<f64> = (1..rows.len() - 1)
        .filter(|&i| rows[i].1 > rows[i - 1].1 && rows[i].1 >= rows[i + 1].1)
        .map(|i| rows[i].0)
        .collect();
    let want = [
        -std::f64::consts::FRAC_PI_6,
        0.0,
        std::f64::consts::FRAC_PI_6,
    ];
    assert_eq!(maxima.len(), 3, "{maxima:?}");
    for (g, w) in maxima.iter().zip(want) {
        assert!((g - w).abs() <= step, "{g} vs {w}");
    }
}

#[test]
fn order_one_header_and_event_export() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g1.csv");
    let ev = dir.path().join("events.json");
    let out = ionscope(&[
        "pattern",
        "--n",
        "4",
        "--spacing",
        "5.75",
        "--isotope",
        "2",
        "--order",
        "1",
        "--pulse",
        "pi/2",
        "--slice",
        "fixed-second",
        "--points",
        "51",
        "--events",
        "20",
        "--seed",
        "3",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        ev.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("phi1,value\n"));
    assert_eq!(text.lines().count(), 52);
    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ev).unwrap()).unwrap();
    assert_eq!(events["seed"], 3);
    assert_eq!(events["bins"].as_array().unwrap().len(), 51);
    assert_eq!(events["events"].as_array().unwrap().len(), 20);
}

#[test]
fn chain_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    std::fs::write(
        &chain,
        r#"{"positions_lambda":[0,1.3,3.1,5.9],"isotope":3}"#,
    )
    .unwrap();
    let out = ionscope(&[
        "pattern",
        "--chain",
        chain.to_str().unwrap(),
        "--slice",
        "opposite",
        "--points",
        "11",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let inline = ionscope(&[
        "pattern",
        "--positions",
        "0,1.3,3.1,5.9",
        "--isotope",
        "3",
        "--slice",
        "opposite",
        "--points",
        "11",
    ]);
    assert_eq!(out.stdout, inline.stdout);

    std::fs::write(
        &chain,
        r#"{"positions_lambda":[0,1],"isotope":1,"extra":true}"#,
    )
    .unwrap();
    let out = ionscope(&["pattern", "--chain", chain.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn degenerate_configs_fail_with_diagnostics() {
    let out = ionscope(&[
        "pattern",
        "--n",
        "2",
        "--spacing",
        "1",
        "--isotope",
        "1",
        "--events",
        "5",
        "--json",
        "/dev/null",
        "--slice",
        "opposite",
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("not normalizable"),
        "{}",
        stderr(&out)
    );

    let out = ionscope(&[
        "pattern",
        "--n",
        "4",
        "--spacing",
        "1",
        "--order",
        "2",
        "--pulse",
        "pi/2",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("pi"), "{}", stderr(&out));

    let out = ionscope(&[
        "pattern",
        "--n",
        "4",
        "--spacing",
        "1",
        "--slice",
        "offset-mag",
        "--offset",
        "1.0",
        "--phi-min",
        "-0.5",
        "--phi-max",
        "0.5",
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("degenerate slice"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn search_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("search.json");
    let out = ionscope(&[
        "search",
        "--n",
        "4",
        "--spacing",
        "5.75",
        "--isotope",
        "2",
        "--schedule",
        "50,200,1000",
        "--trials",
        "200",
        "--seed",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("m_at_95") && summary.contains("classical_mean_probes"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let rates: Vec<f64> = v["success_rates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
    assert_eq!(v["true_p"], 2);
    assert_eq!(v["spacing_lambda"], 5.75);
    assert_eq!(v["master_seed"], 1);
    assert_eq!(v["slice"]["kind"], "offset-magnitude");
}

#[test]
fn search_two_ion_classical_baseline() {
    // localization needs N >= 3; the classical baseline for N = 2 is one probe
    let out = ionscope(&[
        "search",
        "--n",
        "2",
        "--spacing",
        "1",
        "--isotope",
        "1",
        "--events",
        "5",
    ]);
    assert!(!out.status.success());
    assert_eq!(
        ionscope::classical_search_sim(2, 1000, 1).unwrap().mean,
        1.0
    );
}

#[test]
fn search_rejects_bad_isotope() {
    let out = ionscope(&["search", "--n", "4", "--spacing", "5.75", "--isotope", "5"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("1 <= p <= N"), "{}", stderr(&out));
}

#[test]
fn bad_thread_env_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_ionscope"))
        .args([
            "pattern",
            "--n",
            "2",
            "--spacing",
            "1",
            "--slice",
            "opposite",
            "--points",
            "3",
        ])
        .env("IONSCOPE_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("IONSCOPE_THREADS"));
}

#[test]
fn verify_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let out = ionscope(&["verify", "--json", json.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    for c in v["checks"].as_array().unwrap() {
        assert!(c["max_abs_err"].is_number());
        assert_eq!(c["passed"], true);
    }
}

#[test]
fn verify_detects_injected_fault() {
    let out = ionscope(&["verify", "--perturb", "1e-6"]);
    assert!(!out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("[FAIL] g2_equals_four_ion_closed_form"),
        "{text}"
    );
}

#[test]
fn reference_csvs_regenerate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut checked = 0;
    let mut entries: Vec<_> = std::fs::read_dir(repro_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "args"))
        .collect();
    entries.sort();
    for args_path in entries {
        let args = std::fs::read_to_string(&args_path).unwrap();
        let out_path = dir.path().join("out.csv");
        let mut argv: Vec<&str> = args.split_whitespace().collect();
        argv.extend(["--out", out_path.to_str().unwrap()]);
        let out = ionscope(&argv);
        assert!(
            out.status.success(),
            "{}: {}",
            args_path.display(),
            stderr(&out)
        );
        let reference = std::fs::read(args_path.with_extension("csv")).unwrap();
        assert!(
            std::fs::read(&out_path).unwrap() == reference,
            "{} does not match its reference CSV",
            args_path.display()
        );
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} reference configs found");
}
