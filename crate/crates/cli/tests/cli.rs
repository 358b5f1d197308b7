use std::path::Path;
use std::process::{Command, Output};

use isf_cli::config::parse_with_overrides;
use proptest::prelude::*;

const SMALL: &str = "\
system.mass_u = 1.0
system.temperature_K = 300
grid.boundary = box
grid.length_A = 8
grid.points = 120
potential.kind = free
scattering.q_invA = 1.0
time.t_max_ps = 0.05
time.n_times = 201
ensemble.n_samples = 12
ensemble.seed = 5
";

fn isf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isf")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn csv_bytes_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    for (workers, out) in [("1", "w1"), ("3", "w3")] {
        let o = isf(&["simulate", "--config", "small.conf", "--workers", workers, "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["isf_ensemble.csv", "isf_exact.csv", "spectrum.csv"] {
        let a = std::fs::read(dir.path().join("w1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("w3").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn seed_flag_changes_ensemble_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    isf(&["simulate", "--config", "small.conf", "--out", "a"], dir.path());
    isf(&["simulate", "--config", "small.conf", "--seed", "6", "--out", "b"], dir.path());
    let a = std::fs::read_to_string(dir.path().join("a/isf_ensemble.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/isf_ensemble.csv")).unwrap();
    assert_ne!(a.lines().next(), b.lines().next());
    assert_ne!(a, b);
}

#[test]
fn ensemble_agrees_with_exact_trace_through_compare() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    isf(&["simulate", "--config", "small.conf", "--out", "r"], dir.path());
    let o = isf(&["compare", "r/isf_ensemble.csv", "r/isf_exact.csv"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("result = PASS"));
}

#[test]
fn oracle_fit_dsf_and_self_compare() {
    let dir = tempfile::tempdir().unwrap();
    let o = isf(&["oracle", "--t-max-ps", "2", "--n-times", "2001", "--out", "."], dir.path());
    assert_eq!(code(&o), 0);
    let o = isf(&["compare", "isf_oracle.csv", "isf_oracle.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("max_abs_deviation = 0.00000000000e0"));

    let o = isf(&["dsf", "isf_oracle.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dsf = std::fs::read_to_string(dir.path().join("isf_oracle_dsf.csv")).unwrap();
    assert!(dsf.lines().any(|l| l == "omega_radps,S"));

    let o = isf(&["fit", "isf_oracle.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("isf_oracle_fit.txt").exists());
    assert!(dir.path().join("isf_oracle_model.csv").exists());
}

#[test]
fn oracle_ratio_between_temperatures() {
    // −ln|I| of the free particle scales with kT/m at fixed t, up to recoil.
    let dir = tempfile::tempdir().unwrap();
    for (t, out) in [("300", "hot"), ("75", "cold")] {
        let o = isf(
            &["oracle", "--temperature", t, "--q", "0.1", "--t-max-ps", "1", "--n-times", "11", "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let read = |p: &str| isf_cli::io::read_trace(&dir.path().join(p).join("isf_oracle.csv")).unwrap().neg_ln_abs();
    let (hot, cold) = (read("hot"), read("cold"));
    for (h, c) in hot.iter().zip(&cold).skip(1) {
        assert!((h / c - 4.0).abs() < 1e-9, "ratio {}", h / c);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "system.temperature_K = 300\nnot a line\n").unwrap();
    let o = isf(&["simulate", "--config", "bad.conf"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("system.mass_u") && err.contains("line 2"), "{err}");

    let o = isf(&["fit", "missing.csv"], dir.path());
    assert_eq!(code(&o), 4);

    std::fs::write(dir.path().join("garbled.csv"), "t_ps,re_I\n0,1\n").unwrap();
    let o = isf(&["fit", "garbled.csv"], dir.path());
    assert_eq!(code(&o), 4);

    let o = Command::new(env!("CARGO_BIN_EXE_isf"))
        .args(["simulate", "--preset", "ballistic", "--out", "t"])
        .env("ISF_NUMERICS__WORKING_BASIS", "kick_energy")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let coarse = SMALL.replace("time.n_times = 201", "time.n_times = 3");
    std::fs::write(dir.path().join("coarse.conf"), coarse).unwrap();
    let o = isf(&["simulate", "--config", "coarse.conf", "--out", "c"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("time points"));

    let o = isf(&["oracle", "--temperature", "-1", "--out", "."], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn strict_q_rejects_incommensurate_ring() {
    let dir = tempfile::tempdir().unwrap();
    let ring = "\
system.mass_u = 4
system.temperature_K = 100
grid.boundary = periodic
grid.length_A = 10
grid.points = 64
potential.kind = free
scattering.q_invA = 1.0
time.t_max_ps = 0.1
time.n_times = 101
ensemble.n_samples = 2
";
    std::fs::write(dir.path().join("ring.conf"), ring).unwrap();
    let o = isf(&["simulate", "--config", "ring.conf", "--strict-q", "--out", "s"], dir.path());
    assert_eq!(code(&o), 2);
    let o = isf(&["simulate", "--config", "ring.conf", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("s/manifest.txt")).unwrap();
    assert!(manifest.contains("q_used_invA = 1.25663706144e0"), "{manifest}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn digest_ignores_order_spacing_and_output(perm in Just((0..11usize).collect::<Vec<_>>()).prop_shuffle(), pad in 0usize..4, dir in "[a-z]{1,8}") {
        let lines: Vec<&str> = SMALL.lines().collect();
        let spaced: Vec<String> = perm
            .iter()
            .map(|&i| lines[i].replace(" = ", &format!("{}={}", " ".repeat(pad), " ".repeat(pad))))
            .collect();
        let text = format!("{}\noutput.directory = {dir}\n", spaced.join("\n"));
        let none: Vec<(String, String)> = Vec::new();
        let a = parse_with_overrides(SMALL, none.clone()).unwrap();
        let b = parse_with_overrides(&text, none).unwrap();
        prop_assert_eq!(a.digest, b.digest);
    }

    #[test]
    fn env_override_matches_file_edit(seed in any::<u32>()) {
        let edited = SMALL.replace("ensemble.seed = 5", &format!("ensemble.seed = {seed}"));
        let a = parse_with_overrides(&edited, Vec::<(String, String)>::new()).unwrap();
        let b = parse_with_overrides(SMALL, vec![("ISF_ENSEMBLE__SEED".to_string(), seed.to_string())]).unwrap();
        prop_assert_eq!(a.seed, b.seed);
        prop_assert_eq!(a.digest, b.digest);
    }
}
