//! End-to-end runs of the compiled binary: output schemas, exit codes,
//! seeded determinism, and agreement with the library on small inputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::{tempdir, TempDir};
use varcarleson::fourier::Spectrum;
use varcarleson::signal::SampledSignal;
use varcarleson::varcar::var_carleson_function;
use varcarleson::Complex64;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varcarleson"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Smooth chirp-like fixture on the canonical grid (n = 64, dx = 1/16).
fn fixture_signal() -> SampledSignal {
    SampledSignal::from_fn(0.0, 1.0 / 16.0, 64, |x| {
        let env = (-((x - 2.0) / 0.7).powi(2)).exp();
        Complex64::from_polar(env, 1.7 * x) + Complex64::from_polar(0.4 * env, -0.9 * x)
    })
    .unwrap()
}

fn write_signal_csv(path: &Path, f: &SampledSignal) {
    let mut text = String::from("x,re,im\n");
    for k in 0..f.len() {
        let z = f.samples()[k];
        text.push_str(&format!("{},{},{}\n", f.x(k), z.re, z.im));
    }
    fs::write(path, text).unwrap();
}

fn write_zero_csv(path: &Path, n: usize, dx: f64) {
    let mut text = String::from("x,re,im\n");
    for k in 0..n {
        text.push_str(&format!("{},0.0,0.0\n", k as f64 * dx));
    }
    fs::write(path, text).unwrap();
}

/// Parses one numeric column (by index) from a headered CSV.
fn csv_column(path: &Path, idx: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn json_value(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Fixture {
    dir: TempDir,
}

fn fixture() -> Fixture {
    let dir = tempdir().unwrap();
    write_signal_csv(&dir.path().join("sig.csv"), &fixture_signal());
    Fixture { dir }
}

#[test]
fn defaults_emit_a_config_the_commands_accept() {
    let fx = fixture();
    let out = run_in(fx.dir.path(), &["defaults"]);
    assert_ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(value["exponents"]["r"].as_float(), Some(3.0));
    assert_eq!(value["frequency_grid"]["count"].as_integer(), Some(5));
    let cfg_path = fx.dir.path().join("run.toml");
    fs::write(&cfg_path, &text).unwrap();
    let out = run_in(fx.dir.path(), &["carleson", "--config", "run.toml", "--signal", "sig.csv", "--out-dir", "out"]);
    assert_ok(&out);
}

#[test]
fn carleson_zero_signal_emits_a_zero_column() {
    let fx = fixture();
    write_zero_csv(&fx.dir.path().join("zero.csv"), 64, 1.0 / 16.0);
    let out = run_in(fx.dir.path(), &["carleson", "--signal", "zero.csv", "--out-dir", "out"]);
    assert_ok(&out);
    let values = csv_column(&fx.dir.path().join("out/carleson.csv"), 1);
    assert_eq!(values.len(), 64);
    assert!(values.iter().all(|&v| v == 0.0));
}

#[test]
fn carleson_column_matches_the_library_on_the_fixture() {
    let fx = fixture();
    let out = run_in(fx.dir.path(), &["carleson", "--signal", "sig.csv", "--out-dir", "out"]);
    assert_ok(&out);
    let values = csv_column(&fx.dir.path().join("out/carleson.csv"), 1);
    let f = fixture_signal();
    let fgrid = varcarleson::fourier::FrequencyGrid::uniform(-3.0, 3.0, 5).unwrap();
    let expected = var_carleson_function(&f, &fgrid, 3.0).unwrap();
    assert_eq!(values.len(), expected.len());
    for (v, e) in values.iter().zip(&expected) {
        assert_eq!(*v, e.value, "CSV column diverged from the library");
    }
}

#[test]
fn two_point_grids_reduce_to_the_single_jump_formula() {
    let fx = fixture();
    fs::write(fx.dir.path().join("m2.toml"), "[frequency_grid]\nlo = -2.0\nhi = 2.0\ncount = 2\n").unwrap();
    let out = run_in(
        fx.dir.path(),
        &["carleson", "--config", "m2.toml", "--signal", "sig.csv", "--out-dir", "out"],
    );
    assert_ok(&out);
    let values = csv_column(&fx.dir.path().join("out/carleson.csv"), 1);
    let f = fixture_signal();
    // Only one partition exists, so the variation value is the modulus of
    // the single partial Fourier jump over the grid's full span.
    let spectrum = Spectrum::analyze(&f, 2);
    for (k, v) in values.iter().enumerate() {
        let jump = spectrum.partial_integral(-2.0, 2.0, f.x(k)).unwrap().norm();
        assert!((v - jump).abs() <= 1e-12 * jump.max(1.0), "sample {k}: {v} vs {jump}");
    }
}

#[test]
fn sparse_runs_are_byte_identical_under_a_fixed_seed() {
    let fx = fixture();
    for dir in ["a", "b"] {
        let out = run_in(fx.dir.path(), &["sparse", "--seed", "99", "--out-dir", dir]);
        assert_ok(&out);
    }
    for name in ["sparse.json", "verification.json", "f.csv", "g.csv"] {
        let a = fs::read(fx.dir.path().join("a").join(name)).unwrap();
        let b = fs::read(fx.dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically seeded runs");
    }
}

#[test]
fn sparse_with_a_zero_second_signal_reports_ratio_zero() {
    let fx = fixture();
    write_zero_csv(&fx.dir.path().join("zero.csv"), 64, 1.0 / 16.0);
    let out = run_in(
        fx.dir.path(),
        &["sparse", "--f", "sig.csv", "--g", "zero.csv", "--out-dir", "out"],
    );
    assert_ok(&out);
    let ver = json_value(&fx.dir.path().join("out/verification.json"));
    assert_eq!(ver["ratio"].as_f64(), Some(0.0));
    assert_eq!(ver["lhs"].as_f64(), Some(0.0));
}

#[test]
fn verify_recertifies_the_emitted_collection() {
    let fx = fixture();
    let out = run_in(fx.dir.path(), &["sparse", "--seed", "7", "--out-dir", "out"]);
    assert_ok(&out);
    let built = json_value(&fx.dir.path().join("out/verification.json"));
    // The sparse run wrote its generated pair next to the reports; feed
    // those files back in rather than relying on the seed.
    let out = run_in(
        fx.dir.path(),
        &[
            "verify",
            "--collection",
            "out/sparse.json",
            "--f",
            "out/f.csv",
            "--g",
            "out/g.csv",
            "--out-dir",
            "check",
        ],
    );
    assert_ok(&out);
    let checked = json_value(&fx.dir.path().join("check/verification.json"));
    assert_eq!(checked["ratio"], built["ratio"]);
    assert_eq!(checked["lhs"], built["lhs"]);
    assert_eq!(checked["rhs"], built["rhs"]);
}

#[test]
fn tampered_collections_fail_verification_with_the_assertion_code() {
    let fx = fixture();
    let out = run_in(fx.dir.path(), &["sparse", "--seed", "7", "--out-dir", "out"]);
    assert_ok(&out);
    let path = fx.dir.path().join("out/sparse.json");
    let mut sj = json_value(&path);
    // Claim a witness fraction the stored witnesses cannot deliver.
    sj["eta"] = serde_json::json!(0.99);
    fs::write(&path, serde_json::to_string_pretty(&sj).unwrap()).unwrap();
    let out = run_in(
        fx.dir.path(),
        &["verify", "--collection", "out/sparse.json", "--f", "out/f.csv", "--g", "out/g.csv", "--out-dir", "check"],
    );
    assert_eq!(exit_code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reconstruct_sweep_hits_the_plateaus() {
    let fx = fixture();
    let out = run_in(
        fx.dir.path(),
        &["reconstruct", "--xi-minus", "2", "--xi-plus", "4", "--out-dir", "out"],
    );
    assert_ok(&out);
    let zetas = csv_column(&fx.dir.path().join("out/reconstruct.csv"), 0);
    let values = csv_column(&fx.dir.path().join("out/reconstruct.csv"), 1);
    let mut middle = 0usize;
    let mut outside = 0usize;
    for (&z, &m) in zetas.iter().zip(&values) {
        if (2.5..=3.5).contains(&z) {
            assert!((m - 1.0).abs() <= 2e-2, "plateau miss at {z}: {m}");
            middle += 1;
        }
        if !(0.0..=6.0).contains(&z) {
            assert!(m.abs() <= 1e-3, "tail leak at {z}: {m}");
            outside += 1;
        }
    }
    assert!(middle > 20 && outside > 20, "sweep covered {middle} middle and {outside} outside points");
    let meta = json_value(&fx.dir.path().join("out/reconstruct.json"));
    assert_eq!(meta["low_confidence"].as_bool(), Some(false));
}

#[test]
fn reconstruction_is_translation_invariant() {
    let fx = fixture();
    for (tag, lo, hi) in [("a", "2", "4"), ("b", "66", "68")] {
        let out = run_in(fx.dir.path(), &["reconstruct", "--xi-minus", lo, "--xi-plus", hi, "--out-dir", tag]);
        assert_ok(&out);
    }
    // Dyadic endpoints shifted by a power of two keep every intermediate
    // exactly representable, so the sweeps agree bit for bit.
    let a = fs::read_to_string(fx.dir.path().join("a/reconstruct.csv")).unwrap();
    let b = fs::read_to_string(fx.dir.path().join("b/reconstruct.csv")).unwrap();
    let values = |text: &str| -> Vec<String> {
        text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect()
    };
    assert_eq!(values(&a), values(&b));
}

#[test]
fn narrow_intervals_are_flagged_low_confidence() {
    let fx = fixture();
    let out = run_in(
        fx.dir.path(),
        &["reconstruct", "--xi-minus", "2", "--xi-plus", "2.001", "--out-dir", "out"],
    );
    assert_ok(&out);
    let meta = json_value(&fx.dir.path().join("out/reconstruct.json"));
    assert_eq!(meta["low_confidence"].as_bool(), Some(true));
    assert!(String::from_utf8_lossy(&out.stdout).contains("low confidence"));
}

#[test]
fn weights_table_has_an_exact_constant_row_and_is_deterministic() {
    let fx = fixture();
    for dir in ["a", "b"] {
        let out = run_in(fx.dir.path(), &["weights", "--seed", "3", "--out-dir", dir]);
        assert_ok(&out);
    }
    let text = fs::read_to_string(fx.dir.path().join("a/weights.csv")).unwrap();
    let constant_row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(constant_row[0], "0");
    assert_eq!(constant_row[1], "1", "constant weight must have characteristic exactly 1");
    let a_t = csv_column(&fx.dir.path().join("a/weights.csv"), 1);
    assert!(a_t.windows(2).all(|w| w[0] <= w[1]), "characteristics grow with the power");
    let fit = json_value(&fx.dir.path().join("a/weights_fit.json"));
    assert_eq!(fit["bound"].as_f64(), Some(2.0));
    assert!(fit["slope"].as_f64().unwrap().is_finite());
    for name in ["weights.csv", "weights_fit.json"] {
        let a = fs::read(fx.dir.path().join("a").join(name)).unwrap();
        let b = fs::read(fx.dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically seeded runs");
    }
}

#[test]
fn invalid_weight_exponent_is_a_config_error() {
    let fx = fixture();
    fs::write(fx.dir.path().join("bad.toml"), "[exponents]\nt = 3.5\n").unwrap();
    let out = run_in(fx.dir.path(), &["weights", "--config", "bad.toml", "--out-dir", "out"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("weight exponent"));
}

#[test]
fn malformed_inputs_are_input_errors() {
    let fx = fixture();
    fs::write(fx.dir.path().join("bad.csv"), "x,re,im\n0.0,1.0,0.0\nnope\n").unwrap();
    let out = run_in(fx.dir.path(), &["carleson", "--signal", "bad.csv", "--out-dir", "out"]);
    assert_eq!(exit_code(&out), 3);

    fs::write(fx.dir.path().join("warped.csv"), "x,re,im\n0.0,1.0,0.0\n0.5,1.0,0.0\n1.7,1.0,0.0\n").unwrap();
    let out = run_in(fx.dir.path(), &["carleson", "--signal", "warped.csv", "--out-dir", "out"]);
    assert_eq!(exit_code(&out), 3);

    let out = run_in(fx.dir.path(), &["carleson", "--config", "missing.toml", "--signal", "sig.csv"]);
    assert_eq!(exit_code(&out), 3);

    let out = run_in(fx.dir.path(), &["sparse", "--f", "sig.csv", "--out-dir", "out"]);
    assert_eq!(exit_code(&out), 3, "one signal file without the other must be rejected");
}

#[test]
fn unknown_config_keys_are_config_errors() {
    let fx = fixture();
    fs::write(fx.dir.path().join("typo.toml"), "[sprase]\nc0 = 0.5\n").unwrap();
    let out = run_in(fx.dir.path(), &["carleson", "--config", "typo.toml", "--signal", "sig.csv"]);
    assert_eq!(exit_code(&out), 2);
}
