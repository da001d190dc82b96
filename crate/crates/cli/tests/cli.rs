use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn moyal(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moyal"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn harmonic_ground_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("harmonic.toml");
    let out = moyal(&["ground-energy", "--config", cfg.to_str().unwrap(), "--verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("summary.json"));
    assert!((s["e0"]["re"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert_eq!(s["status"], "converged");
    assert!(s["verify"]["abs_diff"].as_f64().unwrap() < 2e-3);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("tau,re_z,im_z,diagnostic\n"));
    assert_eq!(trace.lines().count(), 33);
    let verify = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert_eq!(verify.lines().next(), Some("n,oracle,engine,abs_diff"));
}

#[test]
fn summaries_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("harmonic.toml");
    for d in [&a, &b] {
        moyal(&["ground-energy", "--config", cfg.to_str().unwrap(), "--format", "json"], d.path());
    }
    let ra = fs::read(a.path().join("summary.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("summary.json")).unwrap());
    assert!(!a.path().join("trace.csv").exists());
}

#[test]
fn linear_potential_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("linear.toml");
    let out = moyal(&["ground-energy", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&dir.path().join("summary.json"))["status"], "unbounded_below");
}

#[test]
fn damped_complex_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("damped.toml");
    let out = moyal(&["ground-energy", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("summary.json"));
    assert!((s["e0"]["re"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!((s["e0"]["im"].as_f64().unwrap() - 0.05).abs() < 1e-3);
}

#[test]
fn spectrum_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("spectrum.toml");
    let out = moyal(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("peaks.json"));
    let res = s["resolution"].as_f64().unwrap();
    let energies: Vec<f64> = s["peaks"].as_array().unwrap().iter().map(|p| p["energy"].as_f64().unwrap()).collect();
    for target in [0.5, 1.5, 2.5] {
        assert!(energies.iter().any(|e| (e - target).abs() < res), "{energies:?}");
    }
    assert!(dir.path().join("peaks.csv").exists());
}

#[test]
fn spectrum_of_zero_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[hamiltonian]
family = "polynomial"
expr = "0"
[grid]
x_min = -4.0
x_max = 4.0
n_x = 16
[schedule]
mode = "real"
start = 0.0
end = 50.0
points = 1001
[spectrum]
energy_min = -2.0
energy_max = 2.0
"#,
    );
    let out = moyal(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("peaks.json"));
    let peaks = s["peaks"].as_array().unwrap();
    assert_eq!(peaks.len(), 1);
    assert!(peaks[0]["energy"].as_f64().unwrap().abs() < s["resolution"].as_f64().unwrap());
}

#[test]
fn spectrum_without_schedule_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("harmonic.toml");
    let text = fs::read_to_string(cfg).unwrap();
    let cut = text.find("[schedule]").unwrap();
    let rest = &text[cut..];
    let next = rest[1..].find('[').map_or(text.len(), |i| cut + 1 + i);
    let stripped = format!("{}{}", &text[..cut], &text[next..]);
    let p = write_config(dir.path(), &stripped);
    let out = moyal(&["spectrum", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule"));
}

#[test]
fn x_star_p_reports_constant_imaginary_part() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("star_prod.toml");
    let out = moyal(&["star-prod", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("star_prod.json"));
    for key in ["im_min", "im_max"] {
        assert!((r["correction"][key].as_f64().unwrap() - 0.5).abs() < 1e-10);
    }
    let csv = fs::read_to_string(dir.path().join("product.csv")).unwrap();
    assert!(csv.starts_with("x,p,re,im\n"));
    assert_eq!(csv.lines().count(), 1 + 16 * 16);
}

#[test]
fn unit_times_gaussian_is_the_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("star_prod.toml");
    let out = moyal(&["star-prod", "--config", cfg.to_str().unwrap(), "--f", "1", "--g", "gauss", "--verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for line in fs::read_to_string(dir.path().join("product.csv")).unwrap().lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let g = (-v[0] * v[0] - v[1] * v[1]).exp();
        assert!((v[2] - g).abs() < 1e-9 && v[3].abs() < 1e-9, "{line}");
    }
}

#[test]
fn malformed_expression() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("star_prod.toml");
    let out = moyal(&["star-prod", "--config", cfg.to_str().unwrap(), "--f", "x^", "--g", "p"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("position 2"), "{err}");
}

#[test]
fn unknown_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("harmonic.toml")).unwrap().replace("n_x = 64", "n_x = 64\nnx = 3");
    let p = write_config(dir.path(), &text);
    let out = moyal(&["ground-energy", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nx"));
}

#[test]
fn star_exp_with_kernel_dump_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("harmonic.toml")).unwrap().replace("[output]", "[star_exp]\ntau = 1.0\n\n[output]");
    let p = write_config(dir.path(), &text);
    let out = moyal(&["star-exp", "--config", p.to_str().unwrap(), "--dump-kernel", "--verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("star_exp.json"));
    assert!(s["closed_form_max_abs_diff"].as_f64().unwrap() < 1e-6);
    let exact = 0.5 / 0.5f64.sinh();
    assert!((s["trace"]["re"].as_f64().unwrap() - exact).abs() < 1e-6);
    let kernel = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(kernel.lines().count(), 1 + 64 * 64);
}

#[test]
fn damped_kernel_route_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("damped.toml");
    let out = moyal(&["ground-energy", "--config", cfg.to_str().unwrap(), "--route", "kernel"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
