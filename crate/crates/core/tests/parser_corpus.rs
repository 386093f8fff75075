//! Runs the fuzz targets' properties over the checked-in corpus seeds and a
//! deterministic set of mutations of them, so parser regressions show up
//! without a fuzzing toolchain.

use std::fs;
use std::path::{Path, PathBuf};

use pareto_region::region::RegionSample;
use pareto_region::Scenario;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

// truncations, byte flips and a duplicated line
fn mutations(bytes: &[u8]) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let n = bytes.len();
    for cut in (0..n).step_by((n / 40).max(1)) {
        out.push(bytes[..cut].to_vec());
    }
    for i in (0..n).step_by((n / 60).max(1)) {
        for b in [b'0', b'-', b',', b'"', b'\n', b'9', 0xff] {
            let mut m = bytes.to_vec();
            m[i] = b;
            out.push(m);
        }
    }
    if let Some(i) = bytes.iter().rposition(|&b| b == b'\n') {
        let mut m = bytes.to_vec();
        let start = bytes[..i].iter().rposition(|&b| b == b'\n').map_or(0, |j| j + 1);
        m.extend_from_slice(&bytes[start..=i]);
        out.push(m);
    }
    out
}

fn scenario_property(data: &[u8]) {
    if let Ok(s) = Scenario::from_json_slice(data) {
        let back = Scenario::from_json_str(&s.to_json_string()).expect("round trip");
        assert_eq!(back.fingerprint(), s.fingerprint());
    }
}

fn region_csv_property(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = RegionSample::from_csv_str(text) {
        let csv = s.to_csv_string().expect("valid sample writes");
        assert_eq!(RegionSample::from_csv_str(&csv).expect("round trip"), s);
    }
}

fn region_json_property(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = RegionSample::from_json_str(text) {
        let json = s.to_json_string().expect("valid sample writes");
        assert_eq!(RegionSample::from_json_str(&json).expect("round trip"), s);
    }
}

#[test]
fn scenario_seeds_parse_and_survive_mutation() {
    for (path, bytes) in seeds("scenario_json") {
        Scenario::from_json_slice(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        scenario_property(&bytes);
        mutations(&bytes).iter().for_each(|m| scenario_property(m));
    }
}

#[test]
fn region_csv_seeds_parse_and_survive_mutation() {
    for (path, bytes) in seeds("region_csv") {
        RegionSample::from_csv_str(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        region_csv_property(&bytes);
        mutations(&bytes).iter().for_each(|m| region_csv_property(m));
    }
}

#[test]
fn region_json_seeds_parse_and_survive_mutation() {
    for (path, bytes) in seeds("region_json") {
        RegionSample::from_json_str(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        region_json_property(&bytes);
        mutations(&bytes).iter().for_each(|m| region_json_property(m));
    }
}
