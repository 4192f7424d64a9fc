//! End-to-end runs of the `dualfol` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dualfol(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualfol"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("DUALFOL_SEED")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn negative_curvature_is_inapplicable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "neg.toml", "[manifold]\nname = \"hyperbolic(2)\"\n[geodesic]\ndirection = [1.0, 0.0]\n");
    let o = dualfol(&["decompose", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hypothesis failure: negative curvature"));
}

#[test]
fn config_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[manifold]\nname = \"sphere(2,1)\"\n\n[tolerances]\nbogus = 1.0\n");
    let o = dualfol(&["geodesic", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 5, column 1"), "{}", stderr(&o));

    let cfg = write(dir.path(), "syntax.toml", "[geodesic]\nstep = = 1\n");
    let o = dualfol(&["geodesic", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualfol(&["geodesic", "--manifold", "torus(2)"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unknown manifold `torus`"));
    let o = dualfol(&["geodesic", "--bogus-flag"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = dualfol(&["geodesic", "--manifold", "sphere(2,1)", "--tol", "speed=-1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn non_self_adjoint_family_names_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "nsa.toml",
        "[manifold]\nname = \"euclidean(3)\"\n[geodesic]\ndirection = [1.0, 0.0, 0.0]\n[family]\nmethod = \"frame\"\ny0 = [[1.0, 0.0], [0.0, 1.0]]\ny0p = [[0.0, 0.0], [1.0, 0.0]]\n",
    );
    let o = dualfol(&["transversal", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Omega[0][1]"), "{}", stderr(&o));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualfol(&["dual-leaf", "--manifold", "sphere(2,1)", "--foliation", "so2_on_sphere", "--step", "0.01", "--tol", "covering=1e-6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("dual-leaf.report")).unwrap();
    assert!(report.contains("check covering_radius"));
    assert!(report.ends_with("summary FAIL 0/1\n"));
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    let cfg = "seed = 11\n[manifold]\nname = \"sphere(3,1)\"\n[geodesic]\nstart = [0.2, 0.1, 0.0]\ndirection = [0.0, 1.0, 1.0]\nstep = 0.002\n[family]\nmethod = \"random\"\nvanishing = 1\n";
    let mut reports = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "r.toml", cfg);
        let o = dualfol(&["transversal", "--config", &c], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        reports.push((fs::read(dir.path().join("transversal.report")).unwrap(), fs::read(dir.path().join("transversal.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].0.clone()).unwrap();
    assert!(text.starts_with("# dualfol "));
    assert!(text.contains("# config seed = 11"));
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "[geodesic]\ndirection = [1.0, 0.0]\nlength = 1.0\n");
    let o = Command::new(env!("CARGO_BIN_EXE_dualfol"))
        .args(["geodesic", "--config", &cfg, "--out"])
        .arg(dir.path())
        .env("DUALFOL_MANIFOLD", "sphere(2,1)")
        .env("DUALFOL_STEP", "0.01")
        .env("DUALFOL_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("geodesic.report")).unwrap();
    assert!(report.contains("# config seed = 5"));
    assert!(report.contains("# config geodesic.step = 1e-2"));
    assert_eq!(fs::read_to_string(dir.path().join("geodesic.csv")).unwrap().lines().count(), 102);
}
