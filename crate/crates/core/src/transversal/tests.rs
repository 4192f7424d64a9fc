use super::*;
use crate::foliation::VectorField;
use crate::jacobi::{family_from_killing, random_lagrangian_data, NormalFrame};
use crate::sampling::seeded;
use crate::testutil::{frame, manifold, path, v};

fn family(fr: &Arc<NormalFrame>, y0: DMatrix<f64>, y0p: DMatrix<f64>) -> Arc<JacobiFamily> {
    Arc::new(JacobiFamily::from_frame_data(fr, y0, y0p).unwrap())
}

fn hopf_split(t0: f64, t1: f64) -> TransversalSplit {
    let m = manifold("berger_sphere(1)");
    let fr = frame(&path(&m, v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.6, 0.8]), t0, t1));
    let fibre = VectorField::new("e1", |_| v(&[1.0, 0.0, 0.0]));
    let fam = Arc::new(family_from_killing(&fr, &[fibre]).unwrap());
    let spec = SubfamilySpec::members(&fam, &[0]).unwrap();
    build_split(fam, &spec, TransversalOptions::default()).unwrap()
}

#[test]
fn flat_parallel_family_has_zero_a() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0]), -1.0, 1.0));
    let fam = family(&fr, DMatrix::identity(2, 2), DMatrix::from_diagonal(&v(&[0.0, 0.5])));
    let spec = SubfamilySpec::members(&fam, &[0]).unwrap();
    let split = build_split(fam.clone(), &spec, TransversalOptions::default()).unwrap();
    assert!(split.windows().is_empty());
    for k in 0..split.len() {
        assert!(split.a_hat(k).amax() < 1e-14);
        assert_eq!(split.vertical(k).ncols(), 1);
        assert_eq!(split.transversal(k).ncols(), 1);
        assert!((split.vertical(k).column(0).dot(&split.transversal(k).column(0))).abs() < 1e-15);
    }
    assert!(split.invariant_report().passed);
    let eq1 = split.eq1_residual();
    assert!(eq1.max_residual < 1e-12, "{}", eq1.record());
    let r = split.transversal_residual(&fam.field(1)).unwrap();
    assert!(r.max_residual < 1e-10, "{}", r.record());
    assert!(r.trimmed > 0);
    let psd = split.oneill_psd_check();
    assert!(psd.passed && psd.max_residual.abs() < 1e-14);
}

#[test]
fn empty_subfamily_keeps_everything_transversal() {
    let m = manifold("sphere(3,1)");
    let fr = frame(&path(&m, v(&[0.1, 0.0, 0.0]), v(&[1.0, 0.2, 0.0]), -0.5, 0.5));
    let fam = family(&fr, DMatrix::identity(2, 2), DMatrix::zeros(2, 2));
    let spec = SubfamilySpec::new(&fam, DMatrix::zeros(2, 0)).unwrap();
    let split = build_split(fam.clone(), &spec, TransversalOptions::default()).unwrap();
    for k in 0..split.len() {
        assert_eq!(split.a_matrix(k).shape(), (2, 0));
        assert!(split.a_hat(k).amax() == 0.0);
        assert!((split.parallel_frame(k) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }
    let r = split.transversal_residual(&fam.field(0)).unwrap();
    assert!(r.max_residual < 1e-7, "{}", r.record());
    assert!(split.oneill_psd_check().passed);
}

#[test]
fn hopf_a_operator_has_unit_norm_and_curvature_four() {
    let split = hopf_split(-1.0, 2.0);
    assert!(split.windows().is_empty());
    for k in (0..split.len()).step_by(50) {
        let a = split.a_matrix(k);
        assert_eq!(a.shape(), (1, 1));
        assert!((a[(0, 0)].abs() - 1.0).abs() < 1e-8, "{a}");
        let kmod = split.modified_curvature(k);
        assert!((kmod[(0, 0)] - 4.0).abs() < 1e-8, "{kmod}");
    }
    let psd = split.oneill_psd_check();
    assert!(psd.passed);
    assert!((psd.max_residual).abs() < 1e-12);
    assert!((psd.components[0].1 - 3.0).abs() < 1e-8);
    let eq1 = split.eq1_residual();
    assert!(eq1.passed, "{}", eq1.record());
    let r = split.transversal_residual(&split.family().field(1)).unwrap();
    assert!(r.passed, "{}", r.record());
    assert!(r.control.unwrap() > 0.5, "{}", r.record());
    assert!(split.invariant_report().passed, "{}", split.invariant_report().record());
}

#[test]
fn sphere_vanishing_member_keeps_dimension_through_windows() {
    // {sin t E1, cos t E2} on the round 3-sphere, 𝕍 = first member.
    let m = manifold("sphere(3,1)");
    let fr = frame(&path(&m, v(&[-(1.0f64).tan(), 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), -0.5, 4.0));
    let y0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let y0p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let fam = family(&fr, y0, y0p);
    let spec = SubfamilySpec::members(&fam, &[0]).unwrap();
    let split = build_split(fam.clone(), &spec, TransversalOptions::default()).unwrap();
    let zeros: Vec<f64> = split.windows().iter().flat_map(|w| w.zeros.clone()).collect();
    assert_eq!(zeros.len(), 2, "{zeros:?}");
    assert!(zeros[0].abs() < 1e-9 && (zeros[1] - std::f64::consts::PI).abs() < 1e-6, "{zeros:?}");
    for w in split.windows() {
        assert!(w.k_hi - w.k_lo <= 11);
    }
    for k in 0..split.len() {
        assert!((split.vertical(k)[(0, 0)].abs() - 1.0).abs() < 1e-9, "t = {}", split.time(k));
        assert!(split.a_hat(k).amax() < 1e-6);
    }
    assert!(split.invariant_report().passed);
    assert!(split.eq1_residual().passed);
    let r = split.transversal_residual(&fam.field(1)).unwrap();
    assert!(r.passed, "{}", r.record());
    assert_eq!(r.excluded.len(), 2);
}

/// Closed-form `Â = P_⊥ Vd Vv⁺` for a constant curvature matrix `K`.
fn oracle_a(kmat: &DMatrix<f64>, y0: &DMatrix<f64>, y0p: &DMatrix<f64>, c: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let eig = kmat.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let (cs, sn, dcs, dsn) = {
        let n = eig.eigenvalues.len();
        let mut cs = DMatrix::zeros(n, n);
        let mut sn = DMatrix::zeros(n, n);
        let mut dcs = DMatrix::zeros(n, n);
        let mut dsn = DMatrix::zeros(n, n);
        for i in 0..n {
            let l = eig.eigenvalues[i];
            if l.abs() < 1e-12 {
                cs[(i, i)] = 1.0;
                sn[(i, i)] = t;
                dsn[(i, i)] = 1.0;
            } else {
                let w = l.sqrt();
                cs[(i, i)] = (w * t).cos();
                sn[(i, i)] = (w * t).sin() / w;
                dcs[(i, i)] = -w * (w * t).sin();
                dsn[(i, i)] = (w * t).cos();
            }
        }
        (q * cs * q.transpose(), q * sn * q.transpose(), q * dcs * q.transpose(), q * dsn * q.transpose())
    };
    let vv = (&cs * y0 + &sn * y0p) * c;
    let vd = (&dcs * y0 + &dsn * y0p) * c;
    local_a(&vv, &vd)
}

#[test]
fn continued_a_matches_closed_form_in_window() {
    let m = manifold("product(sphere(2,1),euclidean(2))");
    let beta: f64 = 0.5;
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0, 0.0]), v(&[0.5 * beta.cos(), 0.0, beta.sin(), 0.0]), -1.0, 1.0));
    let kmat = fr.curvature(0).clone();
    assert!((fr.curvature(fr.path().len() - 1) - &kmat).amax() < 1e-9);
    let (y0, y0p) = random_lagrangian_data(&mut seeded(11), 3, 1);
    let fam = family(&fr, y0.clone(), y0p.clone());
    let spec = SubfamilySpec::new(&fam, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0])).unwrap();
    let split = build_split(fam.clone(), &spec, TransversalOptions::default()).unwrap();
    assert_eq!(split.windows().len(), 1);
    let w = &split.windows()[0];
    assert!(w.zeros[0].abs() < 1e-9);
    let c = spec.coeffs().clone();
    let mut worst = 0.0f64;
    let mut size = 0.0f64;
    for k in w.k_lo..=w.k_hi {
        let t = split.time(k);
        let exact = if t.abs() < 1e-12 {
            (oracle_a(&kmat, &y0, &y0p, &c, 1e-6) + oracle_a(&kmat, &y0, &y0p, &c, -1e-6)) * 0.5
        } else {
            oracle_a(&kmat, &y0, &y0p, &c, t)
        };
        worst = worst.max((split.a_hat(k) - &exact).amax());
        size = size.max(exact.amax());
        assert_eq!(split.vertical(k).ncols(), 2);
        assert_eq!(split.transversal(k).ncols(), 1);
    }
    assert!(size > 0.05, "oracle A too small to be informative: {size}");
    assert!(worst <= 1e-4, "{worst}");
    assert!(split.invariant_report().passed);
    let eq1 = split.eq1_residual();
    assert!(eq1.passed, "{}", eq1.record());
    let r = split.transversal_residual(&fam.field(2)).unwrap();
    assert!(r.passed, "{}", r.record());
    let mut opts = TransversalOptions::default();
    opts.include_windows = true;
    let all = build_split(fam.clone(), &spec, opts).unwrap().transversal_residual(&fam.field(2)).unwrap();
    assert!(all.evaluated > r.evaluated && all.excluded.is_empty());
    assert!(all.max_residual < 1e-4, "{}", all.record());
}

#[test]
fn a_operator_off_grid_interpolates() {
    let split = hopf_split(-0.5, 0.5);
    let t = 0.123_456_7;
    let a = split.a_operator(t).unwrap();
    let k = split.family().path().index_at(t).unwrap();
    assert!((spectral_norm(&a) - 1.0).abs() < 1e-8);
    assert!((&a - split.a_hat(k)).amax() < 1e-2);
    assert!(split.a_operator(3.0).is_err());
}

#[test]
fn preconditions_are_enforced() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), 0.0, 0.03));
    let bad = family(&fr, DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    let spec = SubfamilySpec::members(&bad, &[0]).unwrap();
    assert!(matches!(build_split(bad, &spec, TransversalOptions::default()), Err(Error::NotSelfAdjoint { i: 0, j: 1, .. })));

    let fam = family(&fr, DMatrix::identity(2, 2), DMatrix::zeros(2, 2));
    let dup = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
    assert!(matches!(SubfamilySpec::new(&fam, dup), Err(Error::RankDeficient { .. })));
    assert!(matches!(SubfamilySpec::members(&fam, &[5]), Err(Error::Subfamily(_))));
    let spec = SubfamilySpec::members(&fam, &[0]).unwrap();
    let split = build_split(fam.clone(), &spec, TransversalOptions::default()).unwrap();
    assert!(matches!(split.transversal_residual(&fam.field(0)), Err(Error::Subfamily(_))));
    // 31 samples cannot hold a stencil of half-width 20.
    let wide = TransversalOptions { stencil_factor: 10, ..TransversalOptions::default() };
    let split = build_split(fam.clone(), &spec, wide).unwrap();
    assert!(matches!(split.transversal_residual(&fam.field(1)), Err(Error::InsufficientSamples(_))));
}

#[test]
fn random_cases_satisfy_the_transversal_equation() {
    let specs = ["sphere(3,1)", "product(sphere(2,1),euclidean(2))", "berger_sphere(0.8)"];
    let mut rng = seeded(5);
    for spec in specs {
        let m = manifold(spec);
        let stats = for_each_case(&m, &mut rng, 2, &CaseOptions::default(), |case| {
            let split = &case.split;
            assert!(split.invariant_report().passed, "{spec}");
            let eq1 = split.eq1_residual();
            assert!(eq1.passed, "{spec}: {}", eq1.record());
            assert!(split.oneill_psd_check().passed);
            let r = split.transversal_residual(&case.probe)?;
            assert!(r.passed, "{spec}: {}", r.record());
            Ok(())
        })
        .unwrap();
        assert_eq!(stats.accepted, 2);
    }
}
