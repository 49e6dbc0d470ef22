use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn penbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penbias"))
        .args(args)
        .output()
        .expect("spawn penbias")
}

fn ok(args: &[&str]) -> String {
    let out = penbias(args);
    assert!(
        out.status.success(),
        "penbias {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BASE: &str = "\
seed = 11
n_pixels = 400
incidence_deg = 40
profile = exponential
d_pen_range = 3.5, 15
h_ref_range = 200, 3000
";

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{BASE}{extra}")).unwrap();
    p
}

fn simulate(dir: &Path, extra: &str) -> PathBuf {
    let cfg = write_config(dir, "scenes.conf", extra);
    let out = dir.join("scenes");
    ok(&["simulate", "--config", s(&cfg), "--out-dir", s(&out)]);
    out
}

const NOISY: &str = "\
hoa_m = 30, 45, 60, 75, 90
coherence_noise_std = 0.01
elevation_noise_std = 0.3
";

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let da = simulate(a.path(), NOISY);
    let db = simulate(b.path(), NOISY);
    let mut names: Vec<_> = fs::read_dir(&da)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for n in names {
        assert_eq!(
            fs::read(da.join(&n)).unwrap(),
            fs::read(db.join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn missing_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "hoa_m = 50\ncoherence_noise_std = 0\n",
    );
    let out = penbias(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elevation_noise_std"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(penbias(&["train", "--kind", "nope"]).status.code(), Some(2));
}

#[test]
fn uv_inversion_recovers_noiseless_bias() {
    let dir = TempDir::new().unwrap();
    let scenes = simulate(
        dir.path(),
        "hoa_m = 30, 70\ncoherence_noise_std = 0\nelevation_noise_std = 0\nbackscatter_noise_db = 0\n",
    );
    let uv = dir.path().join("uv.csv");
    let metrics = dir.path().join("uv_metrics");
    ok(&[
        "invert-uv",
        "--samples",
        s(&scenes),
        "--output",
        s(&uv),
        "--metrics-dir",
        s(&metrics),
    ]);

    let mut p_ref = Vec::new();
    for id in ["scene00", "scene01"] {
        let f = scenes.join(format!("{id}.csv"));
        let h_insar = column(&f, "h_insar");
        let h_ref = column(&f, "h_ref");
        p_ref.extend(h_insar.iter().zip(&h_ref).map(|(a, b)| a - b));
    }
    let pred = column(&uv, "bias_uv");
    assert_eq!(pred.len(), p_ref.len());
    let mse = pred
        .iter()
        .zip(&p_ref)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    assert!(mse.sqrt() < 1e-6, "rmse {}", mse.sqrt());

    for f in [
        "metrics.csv",
        "error_histogram.csv",
        "elevation_bins.csv",
        "meta.json",
    ] {
        assert!(metrics.join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(metrics.join("metrics.csv")).unwrap();
    assert!(rows.contains("Uncorrected") && rows.contains("Physical (UV)"));
}

#[test]
fn training_is_deterministic_and_evaluates() {
    let dir = TempDir::new().unwrap();
    let scenes = simulate(dir.path(), NOISY);
    let train = |out: &Path| {
        ok(&[
            "train",
            "--kind",
            "hybrid-exp",
            "--scenario",
            "extrapolation",
            "--samples",
            s(&scenes),
            "--output",
            s(out),
            "--seed",
            "5",
            "--epochs",
            "3",
            "--batch",
            "128",
        ])
    };
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("models/m2.json");
    train(&m1);
    train(&m2);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    for (subset, n_expected) in [("test", None), ("excluded", Some(800usize))] {
        let out = dir.path().join(format!("eval_{subset}"));
        ok(&[
            "evaluate",
            "--model",
            s(&m1),
            "--samples",
            s(&scenes),
            "--subset",
            subset,
            "--out-dir",
            s(&out),
        ]);
        let pred = column(&out.join("predictions.csv"), "bias_pred");
        assert!(pred.iter().all(|v| v.is_finite()));
        if let Some(n) = n_expected {
            assert_eq!(pred.len(), n);
        }
        let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert!(metrics.contains("Hybrid (Exp)"), "{metrics}");
    }
}

#[test]
fn excluded_subset_of_all_scenario_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let scenes = simulate(dir.path(), NOISY);
    let model = dir.path().join("m.json");
    ok(&[
        "train",
        "--kind",
        "mlp",
        "--samples",
        s(&scenes),
        "--output",
        s(&model),
        "--epochs",
        "1",
    ]);
    let out = penbias(&[
        "evaluate",
        "--model",
        s(&model),
        "--samples",
        s(&scenes),
        "--subset",
        "excluded",
        "--out-dir",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extrapolation_without_training_scenes_fails() {
    let dir = TempDir::new().unwrap();
    let scenes = simulate(
        dir.path(),
        "hoa_m = 80, 90\ncoherence_noise_std = 0.01\nelevation_noise_std = 0.3\n",
    );
    let out = penbias(&[
        "train",
        "--kind",
        "mlp",
        "--scenario",
        "extrapolation",
        "--samples",
        s(&scenes),
        "--output",
        s(&dir.path().join("m.json")),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn report_combines_evaluations() {
    let dir = TempDir::new().unwrap();
    let scenes = simulate(dir.path(), NOISY);
    let uv_dir = dir.path().join("eval/uv");
    ok(&[
        "invert-uv",
        "--samples",
        s(&scenes),
        "--output",
        s(&dir.path().join("uv.csv")),
        "--metrics-dir",
        s(&uv_dir),
    ]);
    let mut inputs = vec![uv_dir];
    for kind in ["hybrid-exp", "mlp"] {
        for scenario in ["all", "interpolation", "extrapolation"] {
            let model = dir.path().join(format!("{kind}-{scenario}.json"));
            ok(&[
                "train",
                "--kind",
                kind,
                "--scenario",
                scenario,
                "--samples",
                s(&scenes),
                "--output",
                s(&model),
                "--epochs",
                "1",
            ]);
            let mut subsets = vec!["test"];
            if scenario != "all" {
                subsets.push("excluded");
            }
            for subset in subsets {
                let out = dir.path().join(format!("eval/{kind}-{scenario}-{subset}"));
                ok(&[
                    "evaluate",
                    "--model",
                    s(&model),
                    "--samples",
                    s(&scenes),
                    "--subset",
                    subset,
                    "--out-dir",
                    s(&out),
                ]);
                inputs.push(out);
            }
        }
    }
    let csv = dir.path().join("report.csv");
    let txt = dir.path().join("report.txt");
    let mut args = vec!["report"];
    args.extend(inputs.iter().map(|p| s(p)));
    args.extend(["--out-csv", s(&csv), "--out-text", s(&txt)]);
    let stdout = ok(&args);

    let report = fs::read_to_string(&csv).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "approach,scenario,me,mae,mape,rmse,r2,mu,sigma,n"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows[0].starts_with("Uncorrected,"));
    assert!(rows[1].starts_with("Physical (UV),"));
    assert!(rows.iter().all(|r| !r.contains(" #2")), "{report}");
    assert_eq!(fs::read_to_string(&txt).unwrap(), stdout);

    let odd = dir.path().join("eval/odd");
    ok(&[
        "invert-uv",
        "--samples",
        s(&scenes),
        "--output",
        s(&dir.path().join("uv2.csv")),
        "--metrics-dir",
        s(&odd),
        "--bin-width",
        "100",
    ]);
    let out = penbias(&["report", s(&inputs[0]), s(&odd), "--out-csv", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
}
