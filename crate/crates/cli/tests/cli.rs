use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn params(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/params").join(name)
}

fn tlsecho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlsecho"))
        .args(args)
        .env_remove("TLSECHO_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SUBCOMMANDS: &[&[&str]] = &[
    &["model", "hahn"],
    &["model", "stimulated"],
    &["model", "t2"],
    &["model", "t1"],
    &["model", "alpha"],
    &["model", "beta"],
    &["simulate", "telegraph"],
    &["simulate", "ensemble"],
    &["simulate", "rabi"],
    &["analyze", "trace"],
    &["analyze", "noise"],
    &["analyze", "diff"],
    &["fit", "exp"],
    &["fit", "stretched"],
    &["fit", "global"],
    &["losses", "tandelta"],
    &["losses", "efficiency"],
    &["losses", "cascade"],
    &["synth", "decay"],
    &["synth", "traces"],
];

/// Every option that takes a number must say which unit it is in.
#[test]
fn help_documents_units_for_numeric_flags() {
    let unit_markers = [
        ", s", ", K", "1/s", "Hz", ", m", ", W", ", F", "ohm", "Ω", "photons", "V", "debye", "rad", "dimensionless", "count",
        "relative", "1/m³", "1/(J·m³)", "seed",
    ];
    for sub in SUBCOMMANDS {
        let mut args = sub.to_vec();
        args.push("--help");
        let o = tlsecho(&args);
        assert!(o.status.success(), "{sub:?} --help failed");
        let text = stdout(&o);
        let mut blocks: Vec<String> = Vec::new();
        for line in text.lines() {
            let t = line.trim_start();
            if t.starts_with("--") || t.starts_with('-') && t.len() > 1 && !t.starts_with("- ") {
                blocks.push(t.to_owned());
            } else if let Some(b) = blocks.last_mut() {
                b.push(' ');
                b.push_str(t);
            }
        }
        for b in blocks {
            let flag = b.split_whitespace().next().unwrap();
            let takes_value = b.split_whitespace().nth(1).is_some_and(|v| v.starts_with('<'));
            let textual = ["--params", "--input", "--init", "--manifest", "--filter-from", "--out", "--emit-curve",
                "--variant", "--format", "--threads", "--kind", "--label", "--a", "--b"];
            if !takes_value || textual.contains(&flag) {
                continue;
            }
            assert!(
                unit_markers.iter().any(|m| b.contains(m)),
                "{sub:?}: {flag} has no unit in its help: {b}"
            );
        }
    }
}

#[test]
fn model_t2_on_d3_parameters() {
    let o = tlsecho(&["model", "t2", "--params", p(&params("d3.json")), "--temp-k", "0.09"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2τ = 0.64"), "{}", stdout(&o));
}

#[test]
fn payload_goes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t2.json");
    let o = tlsecho(&["--out", p(&out), "model", "t2", "--params", p(&params("d3.json")), "--temp-k", "0.09"]);
    assert!(o.status.success());
    let v = read_json(&out);
    assert_eq!(v["kind"], "model_t2");
    let t2 = v["results"]["two_tau_s"].as_f64().unwrap();
    assert!((0.49e-6..0.73e-6).contains(&t2), "{t2}");
}

#[test]
fn telegraph_matches_kernel() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("mc.json");
    let o = tlsecho(&[
        "--seed", "1", "--out", p(&out), "simulate", "telegraph", "--w", "1.0", "--tau", "1.0", "--histories", "200000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &read_json(&out)["results"];
    let mean = r["mean_s"].as_f64().unwrap();
    let se = r["std_error_s"].as_f64().unwrap();
    assert!((mean - 0.672).abs() < 3.0 * se + 5e-4, "{mean} ± {se}");
}

#[test]
fn csv_format_writes_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cascade.csv");
    let o = tlsecho(&["--out", p(&out), "--format", "csv", "losses", "cascade", "--tan-delta", "0.0128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("n_out_closed_form,"));
}

#[test]
fn losses_report_records_assumptions() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("eff.json");
    let o = tlsecho(&["--out", p(&out), "losses", "efficiency", "--tan-delta", "0.0128"]);
    assert!(o.status.success());
    let v = read_json(&out);
    for key in ["capacitance", "z0", "omega_over_2pi"] {
        assert!(v["assumptions"][key]["value"].is_number(), "missing {key}");
    }
    let eta = v["results"]["eta"].as_f64().unwrap();
    assert!((eta - 0.59).abs() < 0.08, "{eta}");
}

#[test]
fn emit_curve_writes_xy_csv() {
    let dir = TempDir::new().unwrap();
    let curve = dir.path().join("alpha.csv");
    let o = tlsecho(&[
        "model", "alpha", "--tau", "1", "--w", "1", "--emit-curve", p(&curve), "--curve-points", "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&curve).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau_s,alpha_s");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[1], "0,0");
}

#[test]
fn bad_flags_exit_one_and_name_the_flag() {
    let o = tlsecho(&["model", "t2", "--params", p(&params("d3.json")), "--temp-k", "-0.09"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--temp-k"), "{}", stderr(&o));

    let o = tlsecho(&["model", "t2", "--nonsense"]);
    assert_eq!(o.status.code(), Some(1));

    let o = tlsecho(&["model", "t2", "--params", "/no/such/file.json", "--temp-k", "0.1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = tlsecho(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn schema_errors_exit_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"format_version": 1, "variant": "base", "gamma_sd0_over_2pi_hz": 1e5,
            "omega_b_over_2pi_hz": 2e9, "gamma1_b_over_2pi_hz": -3, "gamma2_over_2pi_hz": 5e4}"#,
    )
    .unwrap();
    let o = tlsecho(&["model", "t2", "--params", p(&path), "--temp-k", "0.05"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma1_b_over_2pi_hz"), "{}", stderr(&o));
}

#[test]
fn undecaying_data_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("flat.json");
    let points: Vec<String> = (1..=6)
        .map(|k| format!(r#"{{"delay_s": {k}e-6, "amplitude_Vs": 1e-3}}"#))
        .collect();
    fs::write(
        &path,
        format!(
            r#"{{"format_version": 1, "kind": "hahn", "series": [{{"temperature_k": 0.02, "points": [{}]}}]}}"#,
            points.join(",")
        ),
    )
    .unwrap();
    let o = tlsecho(&["fit", "exp", "--input", p(&path)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn synth_decay(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(format!("decay_{seed}.json"));
    let o = tlsecho(&[
        "--seed", seed, "--out", p(&out), "synth", "decay", "--params", p(&params("d2.json")),
        "--temps-k", "0.01,0.02,0.035,0.05,0.065,0.08,0.1", "--delay-min", "0.2e-6", "--delay-max", "10e-6",
        "--n-delays", "40", "--amplitude", "3e-3", "--noise-std", "0.1e-3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn synth_then_global_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = synth_decay(dir.path(), "4");
    let out = dir.path().join("fit.json");
    let o = tlsecho(&["--seed", "4", "--out", p(&out), "fit", "global", "--input", p(&data), "--bootstrap", "20", "--subset", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &read_json(&out)["results"];
    assert_eq!(r["converged"], true);
    let truth = [("gamma2_over_2pi_hz", 50e3), ("gamma_sd0_over_2pi_hz", 743e3), ("omega_b_over_2pi_hz", 1.9e9)];
    for (key, want) in truth {
        let got = r["params"][key].as_f64().unwrap();
        assert!((got / want - 1.0).abs() < 0.25, "{key}: {got} vs {want}");
    }
    let boot = &r["bootstrap"];
    assert_eq!(boot["n_resamples"], 20);
    assert_eq!(boot["std_over_2pi_hz"].as_array().unwrap().len(), 4);
}

#[test]
fn identical_argv_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let a = synth_decay(dir.path(), "9");
    let b = dir.path().join("again.json");
    fs::copy(&a, &b).unwrap();
    let again = synth_decay(dir.path(), "9");
    assert_eq!(fs::read(&b).unwrap(), fs::read(&again).unwrap());

    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = tlsecho(&[
            "--seed", "2", "--threads", threads, "--out", p(&out), "fit", "global", "--input", p(&again),
            "--bootstrap", "12", "--subset", "5",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let first = run("f1.json", "2");
    assert_eq!(first, run("f2.json", "2"));
    assert_eq!(first, run("f3.json", "1"));
}

#[test]
fn trace_pipeline_from_synthetic_set() {
    let dir = TempDir::new().unwrap();
    let set = dir.path().join("traces");
    let o = tlsecho(&[
        "--seed", "3", "--out", p(&set), "synth", "traces", "--dt", "1e-9", "--duration", "4e-6", "--amplitude", "5e-3",
        "--center", "2e-6", "--width", "0.3e-6", "--phase", "-0.7", "--noise", "0.05e-3", "--n-traces", "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = set.join("manifest.json");
    let out = dir.path().join("trace.json");
    let o = tlsecho(&["--out", p(&out), "analyze", "trace", "--manifest", p(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &read_json(&out)["results"];
    assert!((r["filter"]["phi0_rad"].as_f64().unwrap() + 0.7).abs() < 0.01);
    let expected = 5e-3 * (2.0 * std::f64::consts::PI).sqrt() * 0.3e-6;
    for t in r["traces"].as_array().unwrap() {
        let i = t["i_bar_Vs"].as_f64().unwrap();
        assert!((i / expected - 1.0).abs() < 0.02, "{i} vs {expected}");
    }

    let o = tlsecho(&[
        "analyze", "diff", "--a", p(&set.join("trace_0000.csv")), "--b", p(&set.join("trace_0000.csv")),
        "--window-start", "1e-6", "--window-end", "3e-6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("= 0.000000e0"), "{}", stdout(&o));
}

#[test]
fn stretched_fit_on_synthetic_stimulated_decay() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("stim.json");
    let o = tlsecho(&[
        "--out", p(&data), "synth", "decay", "--kind", "stimulated", "--params", p(&params("d3.json")),
        "--temps-k", "0.01", "--tau", "0.55e-6", "--delay-min", "0", "--delay-max", "30e-6",
        "--amplitude", "40e-3", "--noise-std", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("s.json");
    let o = tlsecho(&["--out", p(&out), "fit", "stretched", "--input", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = &read_json(&out)["results"]["series"][0];
    let pw = s["p"].as_f64().unwrap();
    assert!((0.1..=2.0).contains(&pw), "{pw}");
}
