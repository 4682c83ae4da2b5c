//! End-to-end checks of the `qswitch` binary: flags, file outputs, exit
//! codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qswitch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qswitch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn workdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

#[test]
fn capacity_known_values() {
    let dir = workdir();
    let out = qswitch(&["capacity", "--eta", "0.5"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), 1.0);

    let out = qswitch(&["capacity", "--eta", "0.75"], dir.path());
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), 2.0);

    let out = qswitch(&["capacity", "--eta", "0.99"], dir.path());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - (-(0.01f64).log2())).abs() < 1e-12);
    assert!((v - 6.6439).abs() < 1e-4);
}

#[test]
fn capacity_domain_error_is_usage() {
    let dir = workdir();
    let out = qswitch(&["capacity", "--eta", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = qswitch(&["capacity", "--eta", "1.0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = workdir();
    let out = qswitch(&["capacity", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = qswitch(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn region_scenario_a_reference_values() {
    let dir = workdir();
    let out = qswitch(
        &["region", "--scenario", "a", "--p", "0.632", "--out", "region.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("[binding]"), "binding facets printed:\n{text}");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("region.json")).unwrap())
            .unwrap();
    let bounds = json["bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 7);
    let p: f64 = 0.632;
    for b in bounds {
        let subset = b["subset"].as_array().unwrap();
        let bound = b["bound"].as_f64().unwrap();
        let expected = match subset.len() {
            1 => p * p,
            2 => p.powi(3) + 2.0 * (1.0 - p) * p * p,
            _ => p.powi(3) + 3.0 * (1.0 - p) * p * p,
        };
        assert!((bound - expected).abs() < 1e-9, "{subset:?}: {bound}");
    }
}

#[test]
fn region_parity_and_zero_p() {
    let dir = workdir();
    let out = qswitch(
        &["region", "--scenario", "a", "--p", "0.632", "--rule", "parity", "--out", "r.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let singles: Vec<f64> = json["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["subset"].as_array().unwrap().len() == 1)
        .map(|b| b["bound"].as_f64().unwrap())
        .collect();
    for s in singles {
        assert!((s - 0.632 * 0.632 / 2.0).abs() < 1e-9);
    }

    let out = qswitch(
        &["region", "--scenario", "a", "--p", "0", "--out", "zero.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zero.json")).unwrap())
            .unwrap();
    for b in json["bounds"].as_array().unwrap() {
        assert_eq!(b["bound"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn region_from_config_file_with_derived_link() {
    let dir = workdir();
    std::fs::write(
        dir.path().join("topo.json"),
        r#"{
            "users": [1, 2, 3],
            "links": [{"p": 0.5}, {"p": 0.5}, {"pnla": 0.5, "m": 1}],
            "flows": [{"users": [1, 2], "q": 1.0}, {"users": [2, 3], "q": 1.0}]
        }"#,
    )
    .unwrap();
    let out = qswitch(
        &["region", "--config", "topo.json", "--out", "region.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("region.json")).unwrap())
            .unwrap();
    assert_eq!(json["n_flows"], 2);
}

#[test]
fn region_bad_config_exits_2() {
    let dir = workdir();
    let out = qswitch(&["region", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"users": [1,2], "links": [{"p": 0.5}], "flows": [{"users": [1,2], "q": 1.0}]}"#,
    )
    .unwrap();
    let out = qswitch(&["region", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn region_boundary_csv_format() {
    let dir = workdir();
    let out = qswitch(
        &[
            "region", "--scenario", "c", "--p", "0.632", "--format", "csv", "--dlam", "0.5",
            "--out", "bounds.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lam1,lam2,lam3,in_region"));
    assert_eq!(lines.count(), 27);
}

#[test]
fn simulate_zero_rates_stable() {
    let dir = workdir();
    let out = qswitch(
        &[
            "simulate", "--scenario", "a", "--lam", "0,0,0", "--steps", "2000", "--out", "zero",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("stable: true"));

    let trace = std::fs::read_to_string(dir.path().join("zero.trace.csv")).unwrap();
    assert!(trace.starts_with("step,q1,q2,q3,qtotal\n"));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zero.verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["verdict"]["stable"], true);
    assert_eq!(verdict["verdict"]["slope"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_unstable_point_still_exits_zero() {
    let dir = workdir();
    let out = qswitch(
        &[
            "simulate", "--scenario", "a", "--p", "0.632", "--lam", "0.4,0.4,0.4", "--steps",
            "20000", "--out", "hot",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "verdict must not affect exit code");
    assert!(stdout(&out).contains("stable: false"));
}

#[test]
fn simulate_wrong_rate_count_is_usage() {
    let dir = workdir();
    let out = qswitch(
        &["simulate", "--scenario", "a", "--lam", "0.1,0.2", "--steps", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_csv_schema_and_determinism() {
    let dir = workdir();
    let run = |name: &str| {
        let out = qswitch(
            &[
                "sweep", "--scenario", "c", "--p", "0.632", "--dlam", "0.5", "--steps", "400",
                "--out", name, "--summary", &format!("{name}.summary.json"),
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let first = run("s1.csv");
    let second = run("s2.csv");
    assert_eq!(first, second, "sweep output must be byte-identical");

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lam1,lam2,lam3,slope,stable,inside,agree"));
    assert_eq!(lines.count(), 27);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("s1.csv.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["points"], 27);
    assert!(summary["agreement"]["disagreement"].is_number());
}

#[test]
fn sweep_resource_cap_exits_3() {
    let dir = workdir();
    let out = qswitch(
        &[
            "sweep", "--scenario", "a", "--dlam", "0.005", "--steps", "100000", "--max-steps",
            "1000",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("steps"), "refusal carries the estimate: {err}");
}

fn write_sweep_and_region(dir: &Path) -> (PathBuf, PathBuf) {
    let out = qswitch(
        &[
            "sweep", "--scenario", "a", "--p", "0.632", "--dlam", "0.25", "--steps", "400",
            "--out", "sw.csv", "--summary", "sw.json",
        ],
        dir,
    );
    assert!(out.status.success());
    let out = qswitch(
        &["region", "--scenario", "a", "--p", "0.632", "--out", "rg.json"],
        dir,
    );
    assert!(out.status.success());
    (dir.join("sw.csv"), dir.join("rg.json"))
}

#[test]
fn plot_renders_deterministic_svg() {
    let dir = workdir();
    let (sweep, region) = write_sweep_and_region(dir.path());
    let run = |name: &str| {
        let out = qswitch(
            &[
                "plot", "--sweep", sweep.to_str().unwrap(), "--region", region.to_str().unwrap(),
                "--out", name,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let first = run("p1.svg");
    let second = run("p2.svg");
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("<polygon"), "facet wireframe present");
    assert!(text.contains("<circle"), "scatter present");
}

#[test]
fn plot_empty_sweep_gives_wireframe_only() {
    let dir = workdir();
    let (_, region) = write_sweep_and_region(dir.path());
    std::fs::write(
        dir.path().join("empty.csv"),
        "lam1,lam2,lam3,slope,stable,inside,agree\n",
    )
    .unwrap();
    let out = qswitch(
        &[
            "plot", "--sweep", "empty.csv", "--region", region.to_str().unwrap(), "--out",
            "empty.svg",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("empty.svg")).unwrap();
    assert!(text.contains("<polygon"));
    assert!(!text.contains("<circle"));
}

#[test]
fn plot_rejects_non_3_flow() {
    let dir = workdir();
    std::fs::write(
        dir.path().join("two.csv"),
        "lam1,lam2,slope,stable,inside,agree\n0,0,0,true,,\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("two.json"),
        r#"{"rule": "any_orientation", "n_flows": 2, "bounds": [
            {"subset": [1], "bound": 0.5}, {"subset": [2], "bound": 0.5},
            {"subset": [1, 2], "bound": 0.75}
        ]}"#,
    )
    .unwrap();
    let out = qswitch(
        &["plot", "--sweep", "two.csv", "--region", "two.json", "--out", "x.svg"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_and_config_conflict_is_usage() {
    let dir = workdir();
    std::fs::write(dir.path().join("t.json"), r#"{"scenario": {"tag": "a", "p": 0.5, "q": 1.0}}"#)
        .unwrap();
    let out = qswitch(
        &["region", "--config", "t.json", "--scenario", "a"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pnla_flags_derive_link_probability() {
    let dir = workdir();
    // m defaults to round(1/pnla) = 2 -> p = 1 - 0.25 = 0.75.
    let out = qswitch(
        &["region", "--scenario", "c", "--pnla", "0.5", "--out", "d.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    let single = json["bounds"].as_array().unwrap()[0]["bound"].as_f64().unwrap();
    assert!((single - 0.75 * 0.75).abs() < 1e-12);
}
