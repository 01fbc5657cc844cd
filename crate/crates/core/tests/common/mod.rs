#![allow(dead_code)]

use std::path::PathBuf;

use recurrent_causal::dgp::DgpConfig;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn preset() -> DgpConfig {
    let text = std::fs::read_to_string(repo_root().join("presets/sec7.toml")).expect("preset readable");
    DgpConfig::from_toml(&text).expect("preset valid")
}

pub fn fixture(name: &str) -> DgpConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    DgpConfig::from_toml(&std::fs::read_to_string(path).expect("fixture readable")).expect("fixture valid")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
