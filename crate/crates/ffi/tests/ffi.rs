//! Calls through the C ABI, from Rust and from a compiled C program.

use dualfol_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn last_error() -> String {
    let p = df_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn manifold(spec: &str) -> *mut DfManifold {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { df_manifold_new(spec.as_ptr(), &mut m) }, DfStatus::Ok);
    m
}

#[test]
fn sectional_curvature_of_the_round_sphere() {
    let m = manifold("sphere(2,1)");
    unsafe {
        assert_eq!(df_manifold_dim(m), 2);
        let mut k = 0.0;
        assert_eq!(df_manifold_sectional(m, [0.3, -0.2].as_ptr(), [1.0, 0.0].as_ptr(), [0.2, 1.0].as_ptr(), &mut k), DfStatus::Ok);
        assert!((k - 1.0).abs() < 1e-10);
        df_manifold_free(m);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let spec = CString::new("torus(2)").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { df_manifold_new(spec.as_ptr(), &mut m) }, DfStatus::UnknownName);
    assert!(m.is_null());
    assert!(last_error().contains("torus"));
    assert_eq!(unsafe { df_manifold_new(ptr::null(), &mut m) }, DfStatus::InvalidArgument);
    let mut k = 0.0;
    assert_eq!(unsafe { df_manifold_sectional(ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut k) }, DfStatus::InvalidArgument);
    unsafe { df_manifold_free(ptr::null_mut()) };
}

#[test]
fn geodesic_family_and_decomposition() {
    let m = manifold("sphere(3,1)");
    unsafe {
        let mut g = ptr::null_mut();
        let pi = std::f64::consts::PI;
        assert_eq!(df_geodesic_new(m, [1.0, 0.0, 0.0].as_ptr(), [0.0, 2.0, 0.0].as_ptr(), -4.0 * pi, 4.0 * pi, 2e-3, &mut g), DfStatus::Ok);
        assert!(df_geodesic_len(g) > 1000);
        let (mut t, mut x, mut v) = (0.0, [0.0; 3], [0.0; 3]);
        assert_eq!(df_geodesic_sample(g, 0, &mut t, x.as_mut_ptr(), v.as_mut_ptr()), DfStatus::Ok);
        assert!(t <= -4.0 * pi + 1e-9);
        assert_eq!(df_geodesic_sample(g, usize::MAX, &mut t, ptr::null_mut(), ptr::null_mut()), DfStatus::InvalidArgument);

        let r = df_geodesic_normal_rank(g);
        assert_eq!(r, 2);
        let bad = [1.0, 0.0, 0.0, 1.0];
        let skew = [0.0, 1.0, 0.0, 0.0];
        let mut f = ptr::null_mut();
        assert_eq!(df_family_new(g, bad.as_ptr(), skew.as_ptr(), r, &mut f), DfStatus::NotSelfAdjoint);
        assert!(last_error().contains("Omega"));

        let zero = [0.0; 4];
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(df_family_new(g, zero.as_ptr(), id.as_ptr(), r, &mut f), DfStatus::Ok);
        let mut d = DfDecomposition::default();
        assert_eq!(df_family_decompose(f, 0, &mut d), DfStatus::Ok);
        assert_eq!((d.vanishing, d.parallel), (2, 0));
        assert!(d.passed);

        df_family_free(f);
        df_geodesic_free(g);
        df_manifold_free(m);
    }
}

#[test]
fn negative_curvature_is_inapplicable() {
    let m = manifold("hyperbolic(2)");
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(df_geodesic_new(m, [0.0, 0.0].as_ptr(), [1.0, 0.0].as_ptr(), -1.0, 1.0, 1e-2, &mut g), DfStatus::Ok);
        let mut f = ptr::null_mut();
        assert_eq!(df_family_new(g, [0.0].as_ptr(), [1.0].as_ptr(), 1, &mut f), DfStatus::Ok);
        let mut d = DfDecomposition::default();
        assert_eq!(df_family_decompose(f, 0, &mut d), DfStatus::Inapplicable);
        assert!(last_error().contains("negative curvature"));
        df_family_free(f);
        df_geodesic_free(g);
        df_manifold_free(m);
    }
}

#[test]
fn transversal_residual_is_small() {
    let m = manifold("berger_sphere(0.8)");
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(df_geodesic_new(m, [1.0, 0.0, 0.0, 0.0].as_ptr(), [0.0, 0.6, 0.8].as_ptr(), -1.0, 1.0, 1e-3, &mut g), DfStatus::Ok);
        let c = 0.6f64;
        let s = 0.8f64;
        // Rotation-scaled Lagrangian data: Y0 = Q cos θ, Y0' = Q sin θ.
        let (a, b) = (0.3f64.cos(), 0.3f64.sin());
        let y0 = [c * a, s * a, -s * a, c * a];
        let y0p = [c * b, s * b, -s * b, c * b];
        let mut f = ptr::null_mut();
        assert_eq!(df_family_new(g, y0.as_ptr(), y0p.as_ptr(), 2, &mut f), DfStatus::Ok);
        let (mut res, mut ctrl) = (0.0, 0.0);
        assert_eq!(df_family_transversal_residual(f, [1.0, 0.0].as_ptr(), 1, &mut res, &mut ctrl), DfStatus::Ok);
        assert!(res <= 1e-5, "residual {res}");
        assert!(ctrl > res);
        df_family_free(f);
        df_geodesic_free(g);
        df_manifold_free(m);
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(df_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/dualfol.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["df_manifold_new", "df_family_decompose", "DF_STATUS_INAPPLICABLE", "df_last_error"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let lib = profile_dir().join("libdualfol_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no cc or no static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "dualfol.h"
int main(void) {
    DfManifold *m = NULL;
    if (df_manifold_new("sphere(2,1)", &m) != DF_STATUS_OK) return 10;
    double x[2] = {0.1, 0.2}, u[2] = {1.0, 0.0}, v[2] = {0.0, 1.0}, k = 0.0;
    if (df_manifold_sectional(m, x, u, v, &k) != DF_STATUS_OK) return 11;
    df_manifold_free(m);
    if (df_manifold_new("nowhere(1)", &m) != DF_STATUS_UNKNOWN_NAME) return 12;
    printf("%.12f %s\n", k, df_last_error());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("1.000000000000 unknown manifold `nowhere`"), "{stdout}");
}
