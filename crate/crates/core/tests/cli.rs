//! The command-line front end, driven through `run_with_args`.

use std::fs;
use std::path::Path;

use naffo::cli::{run_with_args, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_SUCCESS};
use naffo::signal::read_signal;

fn run(args: &[&str]) -> (Result<(), u8>, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("naffo").chain(args.iter().copied());
    let result = run_with_args(argv, &mut out).map_err(|f| f.code);
    (result, String::from_utf8(out).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const OSCILLATOR: &str = r#"{
    "model": {"model": "forced_linear_oscillator",
              "parameters": {"omega": 2, "gamma": 0.1, "nu": 1}},
    "initial_condition": [0, 0]
}"#;

#[test]
fn synth_then_analyze_recovers_the_terms() {
    let dir = tempfile::tempdir().unwrap();
    let signal = dir.path().join("signal.csv");
    let terms = dir.path().join("terms.csv");
    let (r, _) = run(&[
        "synth",
        "--term",
        "1.25:0.5",
        "--term",
        "2.0:0:-0.25",
        "--half-span",
        "100",
        "--count",
        "8192",
        "--real",
        "-o",
        path(&signal),
    ]);
    assert_eq!(r, Ok(()));
    let s = read_signal(&signal).unwrap();
    assert!(s.is_real());
    assert_eq!(s.count(), 8192);

    let (r, report) = run(&[
        "analyze",
        path(&signal),
        "--max-terms",
        "4",
        "-o",
        path(&terms),
    ]);
    assert_eq!(r, Ok(()));
    assert!(report.starts_with("# T = 100"));
    let text = fs::read_to_string(&terms).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("rank,frequency,amp_re,amp_im,amp_modulus")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let line = |f: f64| rows.iter().find(|r| (r[1] - f).abs() < 1e-8).unwrap();
    assert!((line(1.25)[2] - 0.5).abs() < 1e-10);
    assert!((line(-1.25)[2] - 0.5).abs() < 1e-10);
    assert!((line(2.0)[3] + 0.25).abs() < 1e-10);
    assert!((line(-2.0)[3] - 0.25).abs() < 1e-10);
}

#[test]
fn search_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, OSCILLATOR).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (r1, text1) = run(&["search", path(&config), "--output-dir", path(&a)]);
    let (r2, text2) = run(&["search", path(&config), "--output-dir", path(&b)]);
    assert_eq!((r1, r2), (Ok(()), Ok(())));
    assert_eq!(text1, text2);
    assert!(text1.contains("converged: true"), "{text1}");
    for file in ["refinement.json", "refinement.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap()
        );
    }
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("refinement.json")).unwrap()).unwrap();
    assert_eq!(json["converged"], true);
    let x = json["final_condition"][0].as_f64().unwrap();
    assert!((x - 1.0 / 30.0).abs() < 1e-10);
    let csv = fs::read_to_string(a.join("refinement.csv")).unwrap();
    assert!(csv.starts_with(
        "n,dimension,initial_condition,frequency_count,rank,amplitude,proper_frequency\n"
    ));
}

#[test]
fn plotdata_writes_both_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, OSCILLATOR).unwrap();
    let out = dir.path().join("plots");
    let (r, text) = run(&["plotdata", path(&config), "--output-dir", path(&out)]);
    assert_eq!(r, Ok(()));
    assert_eq!(text.lines().count(), 2);
    let after = fs::read_to_string(out.join("after.csv")).unwrap();
    let mut rows = after.lines();
    assert_eq!(rows.next(), Some("t,x1,x2"));
    let first: Vec<f64> = rows
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0 / 30.0).abs() < 1e-10);
}

#[test]
fn exhausted_iterations_exit_with_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"model": {"model": "forced_linear_oscillator",
                      "parameters": {"omega": 2, "gamma": 0.1, "nu": 1}},
            "initial_condition": [0, 0],
            "refine": {"max_iterations": 1}}"#,
    )
    .unwrap();
    let (r, _) = run(&["search", path(&config), "--output-dir", path(dir.path())]);
    assert_eq!(r, Err(EXIT_NOT_CONVERGED));
}

#[test]
fn input_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["search", path(&missing)]).0, Err(EXIT_INPUT));
    assert_eq!(run(&["analyze", path(&missing)]).0, Err(EXIT_INPUT));
    assert_eq!(run(&["no-such-command"]).0, Err(EXIT_INPUT));

    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{"model": {"model": "forced_linear_oscillator"}, "bogus": 1}"#,
    )
    .unwrap();
    assert_eq!(run(&["search", path(&config)]).0, Err(EXIT_INPUT));

    fs::write(&config, OSCILLATOR).unwrap();
    let (r, _) = run(&["search", path(&config), "--stop", "sideways"]);
    assert_eq!(r, Err(EXIT_INPUT));

    let signal = dir.path().join("s.csv");
    fs::write(&signal, "t,re\n0,1\n1,1\n2,1\n").unwrap();
    assert_eq!(
        run(&["analyze", path(&signal), "--window", "7"]).0,
        Err(EXIT_INPUT)
    );
    assert_eq!(
        run(&[
            "synth",
            "--term",
            "x:1",
            "--half-span",
            "1",
            "-o",
            path(&signal)
        ])
        .0,
        Err(EXIT_INPUT)
    );
}

#[test]
fn help_is_not_an_error() {
    assert_eq!(run(&["--help"]).0, Err(EXIT_SUCCESS));
}
