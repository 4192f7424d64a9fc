use super::*;
use crate::foliation::{builtin_foliation, VectorField};
use crate::sampling::{gaussian_vector, seeded, uniform};
use crate::testutil::{frame, manifold, path, sphere_meridian, unit, v};
use std::f64::consts::PI;

fn origin_data(fr: &NormalFrame) -> (DVector<f64>, DVector<f64>) {
    let o = &fr.path().samples()[fr.path().origin()];
    (o.x.clone(), o.v.clone())
}

#[test]
fn sphere_field_is_sine_with_zero_at_pi() {
    let fr = frame(&sphere_meridian(-1.4, -0.2, 4.0));
    let (x0, _) = origin_data(&fr);
    let m = fr.path().manifold().clone();
    let e = unit(&m, &x0, v(&[0.0, 1.0]));
    let j = integrate_jacobi(&fr, &DVector::zeros(2), &e).unwrap();
    let y0p = fr.to_frame(fr.path().origin(), &e);
    for (k, s) in fr.path().samples().iter().enumerate() {
        assert!((&j.values[k] - &y0p * s.t.sin()).norm() < 1e-9, "t = {}", s.t);
        assert!((&j.derivs[k] - &y0p * s.t.cos()).norm() < 1e-9);
    }
    let zeros = j.zeros();
    assert_eq!(zeros.len(), 2, "{zeros:?}");
    assert!(zeros[0].abs() <= 1e-3);
    assert!((zeros[1] - PI).abs() <= 1e-3);
}

#[test]
fn flat_field_is_affine() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.1, 0.2, 0.3]), v(&[1.0, 0.0, 0.0]), -1.0, 2.0));
    let (a, b) = (v(&[0.0, 1.0, -0.5]), v(&[0.0, 2.0, 1.0]));
    let j = integrate_jacobi(&fr, &a, &b).unwrap();
    for (k, s) in fr.path().samples().iter().enumerate() {
        let ambient = fr.to_ambient(k, &j.values[k]);
        assert!((ambient - (&a + &b * s.t)).norm() < 1e-12);
    }
}

#[test]
fn product_line_factor_field_is_linear() {
    let m = manifold("product(sphere(2,1),euclidean(1))");
    let fr = frame(&path(&m, v(&[0.2, -0.1, 0.0]), v(&[1.0, 0.5, 0.0]), -1.0, 1.5));
    let b = v(&[0.0, 0.0, 1.0]);
    let j = integrate_jacobi(&fr, &DVector::zeros(3), &b).unwrap();
    for (k, s) in fr.path().samples().iter().enumerate() {
        let ambient = fr.to_ambient(k, &j.values[k]);
        assert!((ambient - &b * s.t).norm() < 1e-10);
    }
}

#[test]
fn rejects_non_normal_data() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), 0.0, 1.0));
    let err = integrate_jacobi(&fr, &v(&[1e-6, 1.0, 0.0]), &DVector::zeros(3)).unwrap_err();
    assert!(matches!(err, Error::NotNormal(_)));
}

#[test]
fn integration_is_linear() {
    let m = manifold("berger_sphere(0.7)");
    let x0 = v(&[1.0, 0.0, 0.0, 0.0]);
    let fr = frame(&path(&m, x0, v(&[0.3, 1.0, -0.4]), -1.0, 1.5));
    let mut rng = seeded(7);
    let o = fr.path().origin();
    let rand_normal = |rng: &mut crate::sampling::SeededRng| fr.to_ambient(o, &gaussian_vector(rng, 2));
    let (a0, a1, b0, b1) = (rand_normal(&mut rng), rand_normal(&mut rng), rand_normal(&mut rng), rand_normal(&mut rng));
    let (p, q) = (1.7, -0.6);
    let ja = integrate_jacobi(&fr, &a0, &a1).unwrap();
    let jb = integrate_jacobi(&fr, &b0, &b1).unwrap();
    let jc = integrate_jacobi(&fr, &(&a0 * p + &b0 * q), &(&a1 * p + &b1 * q)).unwrap();
    for k in 0..jc.values.len() {
        assert!((&jc.values[k] - (&ja.values[k] * p + &jb.values[k] * q)).amax() < 1e-9);
        assert!((&jc.derivs[k] - (&ja.derivs[k] * p + &jb.derivs[k] * q)).amax() < 1e-9);
    }
}

#[test]
fn family_pairing_and_flags() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0]), -1.0, 1.0));
    let (e1, e2, z) = (v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), DVector::zeros(3));
    let parallel = make_family(&fr, &[(e1.clone(), z.clone()), (e2.clone(), z.clone())]).unwrap();
    assert!(parallel.self_adjoint);
    assert_eq!(parallel.omega.amax(), 0.0);

    let twisted = make_family(&fr, &[(e1.clone(), e2.clone()), (e2.clone(), z.clone())]).unwrap();
    assert!(!twisted.self_adjoint);
    assert!((twisted.omega[(0, 1)] - 1.0).abs() < 1e-15);
    assert!((twisted.omega[(1, 0)] + 1.0).abs() < 1e-15);
    assert!(matches!(twisted.riccati_at(0.5), Err(Error::NotSelfAdjoint { .. })));

    assert!(matches!(make_family(&fr, &[(e1.clone(), z.clone())]), Err(Error::WrongCount { expected: 2, got: 1 })));
    assert!(matches!(make_family(&fr, &[(e1.clone(), z.clone()), (e1.clone() * 2.0, z.clone())]), Err(Error::RankDeficient { .. })));
    let off = v(&[0.0, 0.0, 1.0]);
    assert!(matches!(make_family(&fr, &[(off, z.clone()), (e2, z)]), Err(Error::NotNormal(_))));
}

#[test]
fn single_member_family_is_self_adjoint() {
    let fr = frame(&sphere_meridian(-1.4, 0.0, 1.0));
    let (x0, _) = origin_data(&fr);
    let e = unit(fr.path().manifold(), &x0, v(&[0.0, 1.0]));
    let fam = make_family(&fr, &[(DVector::zeros(2), e)]).unwrap();
    assert!(fam.self_adjoint);
}

#[test]
fn riccati_closed_forms() {
    let m = manifold("euclidean(3)");
    let fr = frame(&path(&m, v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), -1.0, 1.0));
    let z = DVector::zeros(3);
    let parallel = make_family(&fr, &[(v(&[0.0, 1.0, 0.0]), z.clone()), (v(&[0.0, 0.0, 1.0]), z)]).unwrap();
    for t in [-0.9, 0.0, 0.37, 1.0] {
        assert_eq!(parallel.riccati_at(t).unwrap().matrix.unwrap().amax(), 0.0);
    }

    let fr = frame(&sphere_meridian(-1.4, -0.2, 4.0));
    let (x0, _) = origin_data(&fr);
    let e = unit(fr.path().manifold(), &x0, v(&[0.0, 1.0]));
    let fam = make_family(&fr, &[(DVector::zeros(2), e)]).unwrap();
    for t in [0.3, 1.0, 1.2345, 2.5, 3.0] {
        let l = fam.riccati_at(t).unwrap();
        assert!((l.matrix.unwrap()[(0, 0)] - 1.0 / t.tan()).abs() < 1e-8, "t = {t}");
    }
    assert!(fam.riccati_at(0.0).unwrap().singular);
    assert!(fam.riccati_at(fr.path().time(fr.path().index_at(PI).unwrap())).unwrap().matrix.map_or(true, |l| l.amax() > 1e3));

    let m = manifold("euclidean(2)");
    let fr = frame(&path(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), -2.0, 2.0));
    let e = v(&[0.0, 1.0]);
    let fam = make_family(&fr, &[(e.clone(), e)]).unwrap();
    for t in [-1.7, -0.5, 0.0, 0.77, 2.0] {
        let l = fam.riccati_at(t).unwrap().matrix.unwrap();
        assert!((l[(0, 0)] - 1.0 / (1.0 + t)).abs() < 1e-9);
    }
    let at_minus_one = fam.riccati_at(-1.0).unwrap();
    assert!(at_minus_one.singular && at_minus_one.matrix.is_none());
}

fn random_family(spec: &str, seed: u64, vanishing: usize) -> JacobiFamily {
    let m = manifold(spec);
    let mut rng = seeded(seed);
    let x0 = m.sample_point(&mut rng);
    let x0 = if m.label().starts_with("sphere") { x0 / 3.0 } else { x0 };
    let dir = gaussian_vector(&mut rng, m.dim());
    let fr = frame(&path(&m, x0, dir, -1.0, 1.5));
    let (y0, y0p) = random_lagrangian_data(&mut rng, fr.rank(), vanishing);
    JacobiFamily::from_frame_data(&fr, y0, y0p).unwrap()
}

#[test]
fn pairing_is_conserved_and_riccati_symmetric() {
    let specs = ["euclidean(3)", "sphere(3,1)", "berger_sphere(0.8)", "product(sphere(2,1),euclidean(2))", "berger_sphere(1)"];
    for (i, spec) in specs.iter().enumerate() {
        let fam = random_family(spec, 100 + i as u64, i % 2);
        assert!(fam.self_adjoint, "{spec}");
        let mut rng = seeded(i as u64);
        for _ in 0..20 {
            let t = uniform(&mut rng, fam.path().t0(), fam.path().t1());
            let k = fam.path().index_at(t).unwrap();
            assert!((fam.omega_at(k) - &fam.omega).amax() <= 1e-8, "{spec} at {t}");
            let l = fam.riccati_at(t).unwrap();
            if let Some(l) = l.matrix {
                let (y, yp) = fam.value_at(t).unwrap();
                assert!((&l * &y - &yp).amax() <= 1e-7 * (1.0 + yp.amax()));
                assert!((&l - l.transpose()).norm() <= 1e-7 * l.norm().max(1.0), "{spec}: {l}");
            }
        }
    }
}

#[test]
fn off_grid_values_match_closed_form() {
    let fr = frame(&sphere_meridian(-1.4, -0.2, 4.0));
    let (x0, _) = origin_data(&fr);
    let e = unit(fr.path().manifold(), &x0, v(&[0.0, 1.0]));
    let fam = make_family(&fr, &[(DVector::zeros(2), e.clone())]).unwrap();
    let y0p = fr.to_frame(fr.path().origin(), &e);
    for t in [0.00037, 0.4567, 1.23456, 3.1, 3.9995] {
        let (y, yp) = fam.value_at(t).unwrap();
        assert!((y.column(0) - &y0p * t.sin()).norm() < 1e-10, "t = {t}");
        assert!((yp.column(0) - &y0p * t.cos()).norm() < 1e-9, "t = {t}");
    }
}

#[test]
fn killing_family_rotation_on_plane() {
    let m = manifold("euclidean(2)");
    let fr = frame(&path(&m, v(&[1.0, 0.0]), v(&[1.0, 0.0]), -0.5, 2.0));
    let rot = VectorField::new("rot", |x: &DVector<f64>| v(&[-x[1], x[0]]));
    let fam = family_from_killing(&fr, &[rot]).unwrap();
    for (k, s) in fr.path().samples().iter().enumerate() {
        assert!((fam.values[k].norm() - (1.0 + s.t)).abs() < 1e-9);
    }
}

#[test]
fn killing_family_latitude_on_sphere() {
    let m = manifold("sphere(2,1)");
    let r0: f64 = 0.6;
    let fr = frame(&path(&m, v(&[(0.5 * r0).tan(), 0.0]), v(&[1.0, 0.0]), -0.5, 2.0));
    let rot = VectorField::new("rot", |x: &DVector<f64>| v(&[-x[1], x[0]]));
    let fam = family_from_killing(&fr, &[rot]).unwrap();
    for (k, s) in fr.path().samples().iter().enumerate() {
        assert!((fam.values[k].norm() - (r0 + s.t).sin()).abs() < 1e-8, "t = {}", s.t);
    }
}

#[test]
fn killing_family_hopf_has_unit_norm() {
    let m = manifold("berger_sphere(1)");
    let fr = frame(&path(&m, v(&[0.5, 0.5, 0.5, 0.5]), v(&[0.0, 1.0, 0.0]), -2.0, 4.0));
    let hopf = VectorField::new("e1", |_| v(&[1.0, 0.0, 0.0]));
    let fam = family_from_killing(&fr, &[hopf]).unwrap();
    assert!(fam.self_adjoint);
    for y in &fam.values {
        assert!((y.column(0).norm() - 1.0).abs() < 1e-9);
    }
    // Completion is a vanishing field.
    assert!(fam.init_values.column(1).norm() < 1e-15);
}

#[test]
fn non_killing_field_is_rejected() {
    let m = manifold("euclidean(2)");
    let fr = frame(&path(&m, v(&[1.0, 0.0]), v(&[1.0, 0.0]), 0.0, 1.0));
    let dilation = VectorField::new("dil", |x: &DVector<f64>| x.clone());
    assert!(matches!(family_from_killing(&fr, &[dilation]), Err(Error::NotKilling(_))));
}

#[test]
fn foliation_family_hopf() {
    let m = manifold("berger_sphere(1)");
    let fol = builtin_foliation("hopf_on_s3", m.clone(), &[]).unwrap();
    let fr = frame(&path(&m, v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.6, 0.8]), -1.0, 2.0));
    let fam = family_from_foliation(&fr, &fol).unwrap();
    assert!(fam.self_adjoint);
    assert_eq!(fam.size(), 2);
    // One leaf field and one vanishing field.
    assert!(fam.init_values.column(0).norm() > 0.5);
    assert!(fam.init_values.column(1).norm() < 1e-15);
    // The Killing restriction of the fibre field lies in the span.
    let hopf = VectorField::new("e1", |_| v(&[1.0, 0.0, 0.0]));
    let kil = family_from_killing(&fr, &[hopf]).unwrap();
    let mut stacked = DMatrix::zeros(4, 3);
    stacked.view_mut((0, 0), (2, 2)).copy_from(&fam.init_values);
    stacked.view_mut((2, 0), (2, 2)).copy_from(&fam.init_derivs);
    stacked.view_mut((0, 2), (2, 1)).copy_from(&kil.init_values.column(0));
    stacked.view_mut((2, 2), (2, 1)).copy_from(&kil.init_derivs.column(0));
    let sv = stacked.svd(false, false).singular_values;
    assert!(sv.min() < 1e-7, "{sv}");
    // Vanishing members start with derivative normal to the leaf.
    let o = fr.path().origin();
    let x0 = &fr.path().samples()[o].x;
    let dp = fr.to_ambient(o, &fam.init_derivs.column(1).into_owned());
    assert!(fol.horizontality_defect(x0, &dp) < 1e-12);
}

#[test]
fn foliation_family_points_and_slices() {
    let m = manifold("sphere(3,1)");
    let fol = builtin_foliation("point_foliation", m.clone(), &[]).unwrap();
    let fr = frame(&path(&m, v(&[0.1, 0.2, 0.0]), v(&[1.0, 0.0, 0.3]), -1.0, 1.0));
    let fam = family_from_foliation(&fr, &fol).unwrap();
    assert_eq!(fam.init_values.amax(), 0.0);

    let m = manifold("product(sphere(2,1),euclidean(1))");
    let fol = builtin_foliation("slice_product", m.clone(), &[]).unwrap();
    let fr = frame(&path(&m, v(&[0.3, 0.2, 0.0]), v(&[0.0, 0.0, 1.0]), -2.0, 2.0));
    let fam = family_from_foliation(&fr, &fol).unwrap();
    assert!(fam.self_adjoint);
    assert!(fam.init_derivs.amax() < 1e-9);
    for yp in &fam.derivs {
        assert!(yp.amax() < 1e-9);
    }
}

#[test]
fn foliation_family_requires_horizontal_start() {
    let m = manifold("berger_sphere(1)");
    let fol = builtin_foliation("hopf_on_s3", m.clone(), &[]).unwrap();
    let fr = frame(&path(&m, v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.3, 1.0, 0.0]), 0.0, 1.0));
    assert!(matches!(family_from_foliation(&fr, &fol), Err(Error::NotHorizontal(_))));
}

#[test]
fn csv_export() {
    let m = manifold("euclidean(2)");
    let fr = frame(&path(&m, v(&[0.0, 0.0]), v(&[1.0, 0.0]), 0.0, 0.01));
    let e = v(&[0.0, 1.0]);
    let fam = make_family(&fr, &[(e.clone(), e)]).unwrap();
    let mut buf = Vec::new();
    fam.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "field,t,J_1,Jp_1");
    assert_eq!(lines.count(), fr.path().len());
}
