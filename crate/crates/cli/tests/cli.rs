use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_pareto-region");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(dir: &Path, args: &[&str]) {
    let o = run(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn small_scenario(dir: &Path) {
    ok(dir, &["scenario", "--kind", "network-mimo", "--n", "2", "--users", "2", "--seed", "5", "--out", "s"]);
}

#[test]
fn scenario_examples_and_invalid_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["scenario", "--kind", "miso-ic", "--kt", "3", "--n", "4", "--snr", "10", "--seed", "7", "--out", "ic"]);
    let s: Value = serde_json::from_slice(&fs::read(d.join("ic/scenario.json")).unwrap()).unwrap();
    assert_eq!(s["num_users"], 3);
    assert_eq!(s["antennas_per_transmitter"], serde_json::json!([4, 4, 4]));
    let m = manifest(&d.join("ic"));
    assert_eq!(m["command"], "scenario");
    assert_eq!(m["config"]["generator"]["seed"], 7);

    ok(d, &["scenario", "--kind", "network-mimo", "--n", "3", "--users", "2", "--evm", "0.15", "--out", "nm"]);
    let s: Value = serde_json::from_slice(&fs::read(d.join("nm/scenario.json")).unwrap()).unwrap();
    assert_eq!(s["evm"], serde_json::json!([0.15, 0.15, 0.15]));

    for bad in [
        vec!["scenario", "--kind", "miso-ic", "--kt", "0", "--out", "bad"],
        vec!["scenario", "--kind", "network-mimo", "--users", "0", "--out", "bad"],
        vec!["scenario", "--kind", "star", "--out", "bad"],
        vec!["scenario", "--out", "bad"],
    ] {
        let o = run(d, &bad);
        assert_eq!(code(&o), 2, "{bad:?}");
        assert!(!o.stderr.is_empty());
        assert!(!d.join("bad").exists());
    }
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    ok(d, &["explicit", "--scenario", "s/scenario.json", "--step", "0.1", "--threads", "1", "--out", "a"]);
    ok(d, &["explicit", "--scenario", "s/scenario.json", "--step", "0.1", "--threads", "3", "--out", "b"]);
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "11", "--threads", "1", "--out", "a"]);
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "11", "--threads", "3", "--out", "b"]);
    for f in ["sweep.csv", "front.csv", "boundary.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest(&d.join("b"))["threads"], 3);
    let leftovers: Vec<_> = fs::read_dir(d.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    fs::write(d.join("run.toml"), "scenario = \"s/scenario.json\"\nstep = 0.25\nout = \"from-config\"\nevm = 0.1\n").unwrap();

    ok(d, &["explicit", "--config", "run.toml"]);
    let m = manifest(&d.join("from-config"));
    assert_eq!(m["config"]["step"], 0.25);
    assert_eq!(m["config"]["evm"], 0.1);
    assert_eq!(m["config"]["grid_cap"], 5_000_000);
    assert_eq!(m["config"]["strict_pareto"], false);

    ok(d, &["explicit", "--config", "run.toml", "--step", "0.5", "--strict-pareto", "--out", "flags"]);
    let m = manifest(&d.join("flags"));
    assert_eq!(m["config"]["step"], 0.5);
    assert_eq!(m["config"]["evm"], 0.1);
    assert_eq!(m["config"]["strict_pareto"], true);
    let fp = m["inputs"][0]["scenario_fingerprint"].as_str().unwrap();
    assert_eq!(fp.len(), 64);
    // the EVM override changes the effective scenario
    assert_ne!(m["config"]["scenario_fingerprint"].as_str().unwrap(), fp);

    fs::write(d.join("typo.toml"), "stepp = 0.1\n").unwrap();
    assert_eq!(code(&run(d, &["explicit", "--config", "typo.toml", "--scenario", "s/scenario.json"])), 2);
    assert_eq!(code(&run(d, &["explicit", "--config", "missing.toml"])), 2);
}

#[test]
fn trace_profile_lists_and_strict_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "1,1;1,3", "--out", "list"]);
    let csv = fs::read_to_string(d.join("list/boundary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("implicit-trace")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",0.5,0.5,"), "{}", rows[0]);
    assert!(rows[1].contains(",0.25,0.75,"), "{}", rows[1]);

    // the axis rays of a two-user region end on flat segments unless the
    // channels are orthogonal
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "11", "--out", "all"]);
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "11", "--strict-pareto", "--out", "strict"]);
    let count = |p: &str| {
        fs::read_to_string(d.join(p)).unwrap().lines().filter(|l| l.starts_with("implicit-trace")).count()
    };
    let weak = fs::read_to_string(d.join("all/boundary.csv")).unwrap().matches("weakly-dominated").count();
    assert_eq!(count("all/boundary.csv"), 11);
    assert_eq!(count("strict/boundary.csv"), 11 - weak);

    assert_eq!(code(&run(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "1,2,3"])), 2);
    assert_eq!(code(&run(d, &["trace", "--scenario", "s/scenario.json", "--tol", "-1"])), 2);
    assert_eq!(code(&run(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "a,b"])), 2);
}

fn verify_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["verify", "--scenario", "s/scenario.json", "--samples", "500", "--power-grid", "16", "--profiles", "11"];
    v.extend_from_slice(extra);
    v
}

#[test]
fn verify_passes_on_a_traced_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    let o = run(d, &verify_args(&["--round-trips", "3", "--seed", "4", "--out", "v"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value = serde_json::from_slice(&fs::read(d.join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["bisection-contract", "oracle-dominance", "duality-round-trip"]);
    assert!(d.join("v/boundary.csv").exists());

    ok(d, &verify_args(&["--boundary", "v/boundary.csv", "--round-trips", "0", "--out", "v2"]));
    let report: Value = serde_json::from_slice(&fs::read(d.join("v2/verify.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["name"], "boundary-fingerprint");
    assert_eq!(report["checks"][1]["name"], "boundary-reproduces");
}

#[test]
fn verify_rejects_corrupted_boundaries() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "11", "--out", "t"]);
    let text = fs::read_to_string(d.join("t/boundary.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let header: Vec<&str> = lines[2].split(',').collect();
    let gs = header.iter().position(|h| *h == "g_sum").unwrap();

    // a value that parses but is wrong
    let mut inflated: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    let mut cells: Vec<String> = inflated[8].split(',').map(str::to_string).collect();
    cells[gs] = format!("{}", cells[gs].parse::<f64>().unwrap() * 1.2);
    inflated[8] = cells.join(",");
    fs::write(d.join("inflated.csv"), inflated.join("\n") + "\n").unwrap();
    let o = run(d, &verify_args(&["--boundary", "inflated.csv", "--round-trips", "0", "--out", "v1"]));
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value = serde_json::from_slice(&fs::read(d.join("v1/verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);

    // truncated mid-row
    fs::write(d.join("cut.csv"), &text[..text.len() - 40]).unwrap();
    assert_ne!(code(&run(d, &verify_args(&["--boundary", "cut.csv", "--out", "v2"]))), 0);

    // boundary of another scenario
    ok(d, &["scenario", "--kind", "network-mimo", "--n", "2", "--users", "2", "--seed", "6", "--out", "other"]);
    ok(d, &["trace", "--scenario", "other/scenario.json", "--profiles", "5", "--out", "other"]);
    let o = run(d, &verify_args(&["--boundary", "other/boundary.csv", "--out", "v3"]));
    assert_eq!(code(&o), 4);
    let report: Value = serde_json::from_slice(&fs::read(d.join("v3/verify.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["name"], "boundary-fingerprint");
    assert_eq!(report["checks"][0]["passed"], false);

    fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(code(&run(d, &verify_args(&["--boundary", "empty.csv", "--out", "v4"]))), 2);
    assert!(!d.join("v4").exists());
}

#[test]
fn plot_scripts_for_families_and_three_users() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_scenario(d);
    for k in ["0", "0.1"] {
        ok(d, &["trace", "--scenario", "s/scenario.json", "--profiles", "5", "--evm", k, "--out", &format!("k{k}")]);
    }
    ok(d, &["plot", "k0/boundary.csv", "k0.1/boundary.csv", "--label", "kappa 0", "--label", "kappa 0.1", "--out", "p"]);
    let gp = fs::read_to_string(d.join("p/plot.gp")).unwrap();
    assert!(gp.contains("'kappa_0.dat' using 1:2 with linespoints"));
    assert!(gp.contains("'kappa_0_1.dat'"));
    assert_eq!(fs::read_to_string(d.join("p/kappa_0.dat")).unwrap().lines().count(), 6);

    ok(d, &["scenario", "--kind", "miso-ic", "--kt", "3", "--n", "2", "--seed", "1", "--out", "s3"]);
    ok(d, &["explicit", "--scenario", "s3/scenario.json", "--step", "0.5", "--out", "s3"]);
    ok(d, &["plot", "s3/sweep.csv", "--out", "p3"]);
    let gp = fs::read_to_string(d.join("p3/plot.gp")).unwrap();
    assert!(gp.contains("splot 'sweep.dat' using 1:2:3:4"));
    let dat = fs::read_to_string(d.join("p3/sweep.dat")).unwrap();
    assert!(dat.lines().skip(1).all(|l| l.split(' ').count() == 4));

    assert_eq!(code(&run(d, &["plot", "k0/boundary.csv", "s3/sweep.csv", "--out", "mixed"])), 2);
    assert_eq!(code(&run(d, &["plot", "--out", "none"])), 2);
}
