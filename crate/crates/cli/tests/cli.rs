use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, command: &str, config: &str, env: Option<&str>) -> Output {
    let path = dir.join(format!("{command}.json"));
    fs::write(&path, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_svcheck"));
    cmd.arg(command).arg("--config").arg(&path).env_remove("SVCHECK_TOLERANCE_PROFILE");
    if let Some(profile) = env {
        cmd.env("SVCHECK_TOLERANCE_PROFILE", profile);
    }
    cmd.output().unwrap()
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_schwarzschild_passes() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "verify",
        r#"{"entry_keys":["schwarzschild:n=3:m=1","type4:n=5:a=0.5:b=-4:sigma=s2xs2"],"point_sampling":{"count":6,"seed":3}}"#,
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = summary(&out);
    assert_eq!(s["passed"], true);
    assert_eq!(s["schema_version"], 1);
}

#[test]
fn verify_perturbed_reports_named_failures() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "verify",
        r#"{"entry_keys":["perturbed:eps=0.001:schwarzschild:n=3:m=1"],"point_sampling":{"count":6,"seed":3}}"#,
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let s = summary(&out);
    let checks: Vec<&str> = s["failures"].as_array().unwrap().iter().map(|f| f["check"].as_str().unwrap()).collect();
    assert!(checks.contains(&"static_vacuum"), "{checks:?}");
    assert!(checks.contains(&"robinson_identity"), "{checks:?}");
}

#[test]
fn unknown_key_is_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "verify", r#"{"entry_keys":["reissner:n=3:m=1"]}"#, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_config_field_is_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "verify", r#"{"entry_keys":["schwarzschild:n=3:m=1"],"bogus":1}"#, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn trace_schwarzschild_is_constant_at_minus_f() {
    let dir = TempDir::new().unwrap();
    let outdir = dir.path().join("out");
    let cfg = format!(
        r#"{{"entry_keys":["schwarzschild:n=3:m=1"],"params_grid":{{"p":[1.5,2,3],"c":[0],"d":[1]}},
            "trace":{{"levels":12}},"output":{{"path":{:?}}}}}"#,
        outdir
    );
    let out = run(dir.path(), "trace", &cfg, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = summary(&out);
    let traces = s["results"].as_array().unwrap();
    assert_eq!(traces.len(), 3);
    for t in traces {
        assert_eq!(t["constant"], true);
        assert_eq!(t["monotone"], true);
        assert_eq!(t["direction"], "nondecreasing_in_f");
        assert!(t["limit"].as_f64().unwrap() < 0.0);
    }
    let csv = fs::read_to_string(outdir.join("trace_001.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version=1 "));
    assert_eq!(lines.next().unwrap(), "f,r,area,kappa_or_normgrad,H_pcd,U_p,U_p_prime");
    assert_eq!(lines.count(), 12);
    assert!(outdir.join("summary.json").exists());
}

#[test]
fn trace_rejects_inadmissible_parameters() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "trace",
        r#"{"entry_keys":["schwarzschild:n=3:m=1"],"params_grid":{"p":[2],"c":[-1],"d":[0]}}"#,
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("outside"), "{}", stderr(&out));
}

#[test]
fn trace_negative_mass_is_nonincreasing() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "trace",
        r#"{"entry_keys":["schwarzschild:n=3:m=-1"],"params_grid":{"p":[2],"c":[0],"d":[1]},"trace":{"levels":10}}"#,
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let t = &summary(&out)["results"][0];
    assert_eq!(t["direction"], "nonincreasing_in_f");
    assert_eq!(t["monotone"], true);
}

fn photon_sphere() -> String {
    let r: f64 = 3.0;
    let f0 = (1.0f64 - 2.0 / r).sqrt();
    let area = 4.0 * std::f64::consts::PI * r * r;
    format!(
        r#"{{"boundary":{{"n":3,"f0":{f0:?},"kappa":{:?},"area":{area:?},"total_scalar":{:?},"mean_curv":{:?}}}}}"#,
        1.0 / (r * r),
        2.0 / (r * r) * area,
        2.0 * f0 / r
    )
}

#[test]
fn photon_sphere_attains_every_equality() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "boundary", &photon_sphere(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let s = summary(&out);
    for r in s["results"][0]["reports"].as_array().unwrap() {
        let name = r["name"].as_str().unwrap();
        assert_eq!(r["satisfied"], true, "{name}");
        if name != "mass_sign" {
            assert_eq!(r["equality_within"], true, "{name}");
        }
    }
}

#[test]
fn zero_mass_boundary_is_out_of_scope() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "boundary",
        r#"{"boundary":{"n":3,"f0":1,"kappa":0,"area":1,"total_scalar":1,"mean_curv":0}}"#,
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("zero-mass case out of scope"), "{}", stderr(&out));
}

#[test]
fn missing_boundary_field_is_named() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "boundary", r#"{"boundary":{"n":3,"f0":0.5,"area":1,"total_scalar":1}}"#, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kappa"), "{}", stderr(&out));
}

#[test]
fn horizon_with_mean_curvature_warns() {
    let dir = TempDir::new().unwrap();
    let area = 16.0 * std::f64::consts::PI;
    let cfg = format!(
        r#"{{"boundary":{{"n":3,"f0":0,"kappa":0.25,"area":{area:?},"total_scalar":{:?},"mean_curv":0.3}}}}"#,
        8.0 * std::f64::consts::PI
    );
    let out = run(dir.path(), "boundary", &cfg, None);
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
    assert!(!summary(&out)["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"entry_keys":["type3:n=3:a=0.4:b=1"],"params_grid":{"p":[2],"c":[0,1],"d":[1]},"point_sampling":{"count":4,"seed":9}}"#;
    let a = run(dir.path(), "sweep", cfg, None);
    let b = run(dir.path(), "sweep", cfg, None);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tolerance_profile_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"entry_keys":["schwarzschild:n=3:m=1"],"point_sampling":{"count":2},"tolerances":{"sign":0.5}}"#;
    let loose = summary(&run(dir.path(), "verify", cfg, Some("loose")));
    let default = summary(&run(dir.path(), "verify", cfg, None));
    assert_eq!(loose["tolerances"]["vacuum"].as_f64().unwrap(), 100.0 * default["tolerances"]["vacuum"].as_f64().unwrap());
    assert_eq!(loose["tolerances"]["sign"], 0.5);
    let bad = run(dir.path(), "verify", cfg, Some("sloppy"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn catalog_confirms_flags() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "catalog", r#"{"point_sampling":{"count":3,"seed":1}}"#, None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
