use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn markovest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markovest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn fixture(name: &str) -> Value {
    let text =
        std::fs::read_to_string(Path::new(FIXTURE_DIR).join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &tempfile::TempDir, name: &str, v: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn stability_exit_codes() {
    let out = markovest(&["stability"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["margin"].as_f64().unwrap() - 0.338).abs() < 1e-3);
    assert_eq!(v["stable_thm1"], true);

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture("pendubot_default");
    cfg["channel"]["d"] = serde_json::json!([1.0, 1.0]);
    let path = write_config(&dir, "drop.json", &cfg);
    let out = markovest(&["stability", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["J"], "unbounded");
}

#[test]
fn malformed_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture("pendubot_default");
    cfg["system"]["A"][2] = serde_json::json!([1.0, 0.0, 0.0]);
    let path = write_config(&dir, "bad.json", &cfg);
    let out = markovest(&["stability", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("system.A[2]"), "{err}");

    cfg = fixture("pendubot_default");
    cfg["simulation"]["horizon"] = serde_json::json!("long");
    let path = write_config(&dir, "bad2.json", &cfg);
    let out = markovest(&["mse", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.horizon"));

    assert_eq!(
        code(&markovest(&["stability", "--config", "no_such_fixture"])),
        1
    );
    assert_eq!(code(&markovest(&["stability", "--format", "svg"])), 1);
    assert_eq!(
        code(&markovest(&["region"])),
        1,
        "default config has no scan block"
    );
}

#[test]
fn region_corners_match_stability() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture("fig3a");
    cfg["scan"]["axes"][0]["resolution"] = 2.into();
    cfg["scan"]["axes"][1]["resolution"] = 2.into();
    let path = write_config(&dir, "corners.json", &cfg);
    let out = markovest(&["region", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let mut corner = fixture("pendubot_default");
        corner["channel"]["d"] =
            serde_json::json!([f[0].parse::<f64>().unwrap(), f[1].parse::<f64>().unwrap()]);
        let p = write_config(&dir, "corner.json", &corner);
        let verdict = markovest(&["stability", "--config", p.to_str().unwrap()]);
        assert_eq!(code(&verdict) == 0, f[3] == "true", "corner {row}");
    }
}

fn stable_cells(config: &str) -> usize {
    let out = markovest(&["region", "--config", config]);
    assert_eq!(code(&out), 0);
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(3) == Some("true"))
        .count()
}

#[test]
fn longer_channel_memory_shrinks_the_region() {
    assert!(stable_cells("fig3d") < stable_cells("fig3c"));
}

#[test]
fn region_svg_and_json() {
    let out = markovest(&["region", "--config", "fig3a", "--format", "svg"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("<svg"));
    let out = markovest(&["region", "--config", "three_state_fig8", "--format", "json"]);
    let v = stdout_json(&out);
    assert_eq!(v["cells"].as_array().unwrap().len(), 121);
    assert!(v["cells"][0]["j"].as_f64().is_some());
}

#[test]
fn mse_modes() {
    let out = markovest(&["mse", "--analytic"]);
    assert_eq!(code(&out), 0);
    assert!((stdout_json(&out)["analytic"]["J"].as_f64().unwrap() - 16.301865743).abs() < 1e-6);

    let out = markovest(&["mse", "--both", "--horizon", "20000", "--seed", "1,2,3"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["relative_gap"].as_f64().unwrap() < 0.05);
    assert_eq!(v["agreement"], true);

    let mut per_mode = Vec::new();
    for mode in ["smart", "conventional"] {
        let out = markovest(&[
            "mse",
            "--simulate",
            "--mode",
            mode,
            "--horizon",
            "20000",
            "--seed",
            "4,5,6",
        ]);
        assert_eq!(code(&out), 0);
        let v = stdout_json(&out);
        assert!(v.get("analytic").is_none());
        per_mode.push(
            v["simulation"]["runs"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| r["empirical_j"].as_f64().unwrap())
                .collect::<Vec<_>>(),
        );
    }
    for (smart, conv) in per_mode[0].iter().zip(&per_mode[1]) {
        assert!(conv >= smart, "conventional {conv} < smart {smart}");
    }

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture("pendubot_default");
    cfg["channel"]["d"] = serde_json::json!([0.9, 0.9]);
    let path = write_config(&dir, "unstable.json", &cfg);
    let out = markovest(&["mse", "--analytic", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["analytic"]["J"], "unbounded");
}

#[test]
fn trajectory_dump() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let out = markovest(&[
        "mse",
        "--simulate",
        "--horizon",
        "50",
        "--seed",
        "7",
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(traj).unwrap();
    assert!(csv.starts_with("t,channel_state,gamma,delta,trace_Pt\n"));
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn bounds_command() {
    let out = markovest(&["bounds"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["all_pass"], true);

    let v = stdout_json(&markovest(&["bounds", "--config", "rotation"]));
    let lower = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "power_lower")
        .unwrap();
    assert_eq!(lower["result"]["period"], 2);

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture("pendubot_default");
    cfg["channel"]["d"] = serde_json::json!([1.0, 1.0]);
    let path = write_config(&dir, "always.json", &cfg);
    let out = markovest(&["bounds", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    let dm = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "channel_powers")
        .unwrap();
    assert_eq!(dm["status"], "refused");
    assert!(dm["reason"].as_str().unwrap().contains("D = I"));
}

#[test]
fn channel_from_snr_limits() {
    let d = |rate: &str| -> Vec<f64> {
        let out = markovest(&[
            "channel-from-snr",
            "--gains",
            "300,250",
            "--blocklength",
            "200",
            "--rate",
            rate,
        ]);
        assert_eq!(code(&out), 0);
        stdout_json(&out)["d"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    assert!(d("0.01").iter().all(|&x| x < 1e-12));
    assert!(d("100").iter().all(|&x| x > 1.0 - 1e-12));
    let out = markovest(&["channel-from-snr", "--gains", "300,-1", "--rate", "8"]);
    assert_eq!(code(&out), 1);
    let out = markovest(&[
        "channel-from-snr",
        "--gains",
        "300",
        "--rate",
        "8",
        "--format",
        "csv",
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("state,gain,d\n1,300,"));
}

#[test]
fn echoed_config_reparses() {
    for name in ["pendubot_default", "fig3b", "three_state_fig8"] {
        let echo = markovest(&["config", "--config", name]);
        assert_eq!(code(&echo), 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.json");
        std::fs::write(&path, &echo.stdout).unwrap();
        let again = markovest(&["config", "--config", path.to_str().unwrap()]);
        assert_eq!(echo.stdout, again.stdout);
        let a = markovest(&["stability", "--config", name]);
        let b = markovest(&["stability", "--config", path.to_str().unwrap()]);
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["stability"],
        &["region", "--config", "fig3a"],
        &["region", "--config", "fig3a", "--format", "svg"],
        &["mse", "--both", "--horizon", "5000", "--seed", "1,2"],
        &[
            "mse",
            "--simulate",
            "--mode",
            "conventional",
            "--horizon",
            "5000",
            "--seed",
            "3,4",
        ],
        &["bounds", "--config", "rotation"],
        &["channel-from-snr", "--gains", "300,250", "--rate", "8"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let mut files = Vec::new();
        for (run, threads) in ["1", "4"].iter().enumerate() {
            let path = dir.path().join(format!("{k}-{run}.out"));
            let mut full: Vec<&str> = args.to_vec();
            let p = path.to_str().unwrap().to_owned();
            full.extend(["--out", &p]);
            let out = Command::new(env!("CARGO_BIN_EXE_markovest"))
                .args(&full)
                .env("ME_THREADS", threads)
                .output()
                .unwrap();
            assert!(out.status.code().is_some());
            files.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(files[0], files[1], "{args:?}");
    }
}
