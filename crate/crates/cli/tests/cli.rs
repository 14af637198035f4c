use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ltcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltcast")).args(args).output().expect("spawn ltcast")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TWO_DEC: &str =
    r#"{"clusters":[{"z":0.98,"decoding":true,"epsilon":0},{"z":0.63,"decoding":true,"epsilon":0.5}]}"#;
const DEC_NONDEC: &str =
    r#"{"clusters":[{"z":0.98,"decoding":true,"epsilon":0},{"z":0.72,"decoding":false,"epsilon":0}]}"#;
const MIXED_REFERENCE: &str =
    r#"{"clusters":[{"z":0.8,"decoding":true,"epsilon":0},{"z":0.4,"decoding":false,"epsilon":0}]}"#;

/// `key,value` rows of `optimize` output.
fn lookup(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

#[test]
fn optimize_prints_reference_value_and_writes_json() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "two.json", TWO_DEC);
    let out = dir.path().join("r.json");
    let o = ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&sc), "--out", s(&out)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("key,value\nobjective,minmax-latency\n"));
    assert!((lookup(&text, "objective_value") - 1.6220).abs() < 1e-3);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["objective"], "minmax-latency");
}

#[test]
fn optimize_single_nondecoding_cluster_is_closed_form() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "nd.json", r#"{"clusters":[{"z":0.72,"decoding":false,"epsilon":0}]}"#);
    let o = ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&sc)]);
    let text = stdout(&o);
    assert!((lookup(&text, "objective_value") - 1.2730).abs() < 1e-4);
    assert_eq!(lookup(&text, "p_1"), 1.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let o = ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());

    let typo = write(&dir, "typo.json", r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0,"eps":1}]}"#);
    let o = ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&typo)]);
    assert_eq!(o.status.code(), Some(2));

    let bad_z = write(&dir, "bad.json", r#"{"clusters":[{"z":1.0,"decoding":true,"epsilon":0}]}"#);
    let o = ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&bad_z)]);
    assert_eq!(o.status.code(), Some(2));

    let two = write(&dir, "two.json", TWO_DEC);
    let o = ltcast(&["optimize", "--objective", "min-avg-latency", "--scenario", s(&two)]);
    assert_eq!(o.status.code(), Some(3));

    let one = write(&dir, "one.json", r#"{"clusters":[{"z":0.5,"decoding":true,"epsilon":0}]}"#);
    let o = ltcast(&["compare", "--scenario", s(&one)]);
    assert_eq!(o.status.code(), Some(3));

    for range in ["0:0.5", "0:0.5:x", "0:1.5:3", "0:0.5:0", "a:b:c"] {
        let o = ltcast(&[
            "sweep",
            "--objective",
            "minmax-latency",
            "--scenario",
            s(&two),
            "--z1",
            range,
            "--z2",
            "0:0.5:2",
        ]);
        assert_eq!(o.status.code(), Some(2), "range {range}");
    }

    let bad_dist = write(&dir, "d.json", r#"{"probs":[0.3,0.3]}"#);
    let o = ltcast(&["simulate", "--dist", s(&bad_dist), "--scenario", s(&two), "--k", "50", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let not_json = write(&dir, "x.json", "probs = [1]");
    let o = ltcast(&["simulate", "--dist", s(&not_json), "--scenario", s(&two), "--k", "50", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_reproduces_reference_totals() {
    let dir = TempDir::new().unwrap();
    let expected = [(DEC_NONDEC, [1.5634, f64::INFINITY, 3.9120, 2.2644]), (TWO_DEC, [1.6220, 1.9828, 1.9959, 2.5696])];
    for (body, totals) in expected {
        let sc = write(&dir, "sc.json", body);
        let o = ltcast(&["compare", "--scenario", s(&sc)]);
        assert!(o.status.success());
        let text = stdout(&o);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("scheme,t_1,t_2,total"));
        for ((line, scheme), want) in lines.zip(["A0", "A1", "A2", "A12"]).zip(totals) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[0], scheme);
            let total = cells[3];
            if want.is_infinite() {
                assert_eq!(total, "inf");
            } else {
                let v: f64 = total.parse().unwrap();
                assert!((v - want).abs() / want < 0.01, "{scheme}: {v} vs {want}");
            }
        }
    }
}

#[test]
fn compare_identical_clusters_doubles_for_separate_streams() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        &dir,
        "same.json",
        r#"{"clusters":[{"z":0.7,"decoding":true,"epsilon":0.2},{"z":0.7,"decoding":true,"epsilon":0.2}]}"#,
    );
    let text = stdout(&ltcast(&["compare", "--scenario", s(&sc)]));
    let total = |scheme: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{scheme},"))).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!((total("A12") - 2.0 * total("A0")).abs() < 1e-6);
}

#[test]
fn one_cell_sweep_matches_optimize() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "two.json", TWO_DEC);
    let o = ltcast(&[
        "sweep",
        "--objective",
        "minmax-latency",
        "--scenario",
        s(&sc),
        "--z1",
        "0.98:0.98:1",
        "--z2",
        "0.63:0.63:1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("z1\\z2,0.63"));
    let cell: f64 = text.lines().nth(1).unwrap().strip_prefix("0.98,").unwrap().parse().unwrap();
    let opt = stdout(&ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&sc)]));
    assert_eq!(cell, lookup(&opt, "objective_value"));
}

#[test]
fn sweep_level_set_passes_through_reference_point() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "two.json", TWO_DEC);
    let out = dir.path().join("m.csv");
    let o = ltcast(&[
        "sweep",
        "--objective",
        "minmax-latency",
        "--scenario",
        s(&sc),
        "--z1",
        "0:0.98:8",
        "--z2",
        "0:0.63:10",
        "--grid",
        "301",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(out).unwrap();
    assert!(!text.contains('\r'));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("0.98,"));
    let corner: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!((corner - 1.62).abs() < 0.01, "corner {corner}");
}

#[test]
fn utilization_sweep_ignores_channel_quality() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for (e1, e2) in [(0.0, 0.5), (0.3, 0.1)] {
        let body = format!(
            r#"{{"clusters":[{{"z":0.5,"decoding":true,"epsilon":{e1}}},{{"z":0.5,"decoding":false,"epsilon":{e2}}}],"grid_points":201}}"#
        );
        let sc = write(&dir, "u.json", &body);
        let o = ltcast(&[
            "sweep",
            "--objective",
            "maxmin-utilization",
            "--scenario",
            s(&sc),
            "--z1",
            "0:0.9:4",
            "--z2",
            "0:0.9:4",
        ]);
        assert!(o.status.success());
        outputs.push(o.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn optimize_output_feeds_simulate() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "mixed.json", MIXED_REFERENCE);
    let res = dir.path().join("r.json");
    assert!(ltcast(&["optimize", "--objective", "minmax-latency", "--scenario", s(&sc), "--out", s(&res)])
        .status
        .success());
    let csv = dir.path().join("t.csv");
    let summary = dir.path().join("s.json");
    let o = ltcast(&[
        "simulate",
        "--dist",
        s(&res),
        "--scenario",
        s(&sc),
        "--k",
        "800",
        "--trials",
        "100",
        "--seed",
        "0",
        "--out",
        s(&csv),
        "--summary",
        s(&summary),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mean_row: Vec<f64> =
        text.lines().find(|l| l.starts_with("mean,")).unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!((1.03..=1.12).contains(&mean_row[2]), "mean t0 {}", mean_row[2]);

    let rows = fs::read_to_string(csv).unwrap();
    assert_eq!(rows.lines().next(), Some("trial,t_1,t_2,t_0"));
    assert_eq!(rows.lines().count(), 101);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(json["trials"], 100);
    assert_eq!(json["clusters"].as_array().unwrap().len(), 2);

    // The distribution survives the JSON round trip bit for bit.
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(&res).unwrap()).unwrap();
    let bare = write(&dir, "bare.json", &serde_json::to_string(&result["distribution"]).unwrap());
    let again =
        ltcast(&["simulate", "--dist", s(&bare), "--scenario", s(&sc), "--k", "800", "--trials", "100", "--seed", "0"]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "mixed.json", MIXED_REFERENCE);
    let d = write(&dir, "d.json", r#"{"probs":[0.4878,0,0,0.4878,0.0244]}"#);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = ltcast(&[
            "simulate",
            "--dist",
            s(&d),
            "--scenario",
            s(&sc),
            "--k",
            "400",
            "--trials",
            "1",
            "--seed",
            seed,
            "--out",
            s(&out),
        ]);
        assert!(o.status.success());
        (o.stdout, fs::read_to_string(out).unwrap())
    };
    let a = run("11", "a.csv");
    let b = run("11", "b.csv");
    assert_eq!(a, b);
    assert_eq!(a.1.lines().count(), 2);
    assert!(String::from_utf8_lossy(&a.0).contains("\nstd,0,0,0\n"));
    assert_ne!(run("12", "c.csv").1, a.1);
}

#[test]
fn unreachable_targets_report_inf() {
    let dir = TempDir::new().unwrap();
    let sc = write(&dir, "mixed.json", MIXED_REFERENCE);
    let d = write(&dir, "d.json", r#"{"probs":[0,0.5,0.5]}"#);
    let o = ltcast(&["simulate", "--dist", s(&d), "--scenario", s(&sc), "--k", "100", "--trials", "3", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("mean,inf,inf,inf"), "{text}");
    assert!(text.contains("unmet,3,3,3"));
}
