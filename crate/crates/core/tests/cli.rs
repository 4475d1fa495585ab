use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_market-timing"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--stocks")
        .arg(data("stocks.csv"))
        .arg("--bonds")
        .arg(data("bonds.csv"))
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn polylines(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let doc =
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .count()
}

#[test]
fn report_writes_well_formed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let balanced = data("balanced.csv");
    let out = run(
        &[
            "report",
            "--paths",
            "4000",
            "--workers",
            "2",
            "--overlay",
            balanced.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p_b = 0.6364"), "{stdout}");

    // best, worst, balanced, stocks, bonds
    assert_eq!(polylines(&dir.path().join("envelope.svg")), 5);
    // every second of 4000 paths, then best, worst, balanced
    assert_eq!(polylines(&dir.path().join("paths.svg")), 2003);
    // histogram and normal fit
    assert_eq!(polylines(&dir.path().join("pdf_log.svg")), 2);
    // main panel and inset
    assert_eq!(polylines(&dir.path().join("pdf_return.svg")), 2);
    assert_eq!(polylines(&dir.path().join("timingpath.svg")), 0);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["monte_carlo"]["envelope_violations"], 0);
    let worst = summary["envelope"]["worst_terminal"].as_f64().unwrap();
    let best = summary["envelope"]["best_terminal"].as_f64().unwrap();
    let median = summary["median_analysis"]["median_terminal"]
        .as_f64()
        .unwrap();
    assert!(worst <= median && median <= best);
    assert_eq!(summary["overlays"][0]["id"], "balanced");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "report");
    assert_eq!(manifest["m_paths"], 4000);
    assert!(manifest["timestamp"].as_str().unwrap().ends_with('Z'));
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "report",
        "--paths",
        "3000",
        "--seed",
        "11",
        "--dump-terminals",
    ];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    for f in [
        "envelope.csv",
        "randomness.json",
        "randomness.txt",
        "summary.json",
        "terminals.csv",
        "envelope.svg",
        "paths.svg",
        "pdf_log.svg",
        "pdf_return.svg",
        "timingpath.svg",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timestamp");
        v.as_object_mut().unwrap().remove("output_dir");
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    let terminals = fs::read_to_string(a.path().join("terminals.csv")).unwrap();
    assert_eq!(
        terminals.lines().next(),
        Some("path_index,terminal,log_terminal")
    );
    assert_eq!(terminals.lines().count(), 3001);
}

#[test]
fn all_stocks_collapses_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--paths", "500", "--p", "1"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["monte_carlo"]["sigma_hat"], 0.0);
    assert_eq!(
        summary["monte_carlo"]["median"],
        summary["envelope"]["stock_terminal"]
    );
}

#[test]
fn constant_winner_marks_tests_inapplicable() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..40)
        .map(|i| format!("{}Q{},1.0\n", 2000 + i / 4, i % 4 + 1))
        .collect();
    let stocks = dir.path().join("s.csv");
    let bonds = dir.path().join("b.csv");
    fs::write(
        &stocks,
        format!("period,return\n{}", rows.replace(",1.0", ",2.0")),
    )
    .unwrap();
    fs::write(&bonds, format!("period,return\n{rows}")).unwrap();
    let out = bin()
        .args(["randomness", "--stocks"])
        .arg(&stocks)
        .arg("--bonds")
        .arg(&bonds)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p_b = 1.0000"), "{stdout}");
    assert!(stdout.contains("not applicable"), "{stdout}");
}

#[test]
fn input_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin()
        .args([
            "envelope",
            "--stocks",
            "/nonexistent.csv",
            "--bonds",
            "/nonexistent.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "period,return\n2000Q1,abc\n").unwrap();
    let out = bin()
        .args(["envelope", "--stocks"])
        .arg(&bad)
        .arg("--bonds")
        .arg(data("bonds.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let unknown = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));

    let bad_p = run(&["simulate", "--p", "1.5"], &dir.path().join("o"));
    assert_eq!(bad_p.status.code(), Some(1));

    let capped = run(
        &["simulate", "--paths", "1000", "--max-work", "10"],
        &dir.path().join("o"),
    );
    assert_eq!(capped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("work limit"));
}

#[test]
fn synth_reproduces_bundled_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("synth")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["stocks.csv", "bonds.csv", "balanced.csv"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(data(f)).unwrap(),
            "{f}"
        );
    }
}
