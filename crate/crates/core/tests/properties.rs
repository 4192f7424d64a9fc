//! Randomized invariants.

use dualfol::geodesic::integrate_geodesic;
use dualfol::jacobi::{random_lagrangian_data, JacobiFamily, NormalFrame};
use dualfol::linalg::svd_full;
use dualfol::manifold::parse_manifold_spec;
use dualfol::sampling::seeded;
use dualfol::transversal::{build_split, SubfamilySpec, TransversalOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::sync::Arc;

const SPECS: [&str; 5] = ["sphere(2,1)", "sphere(3,1)", "berger_sphere(0.7)", "product(sphere(2,1),euclidean(1))", "cylinder(1.2)"];

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sectional_ignores_the_plane_basis(idx in 0usize..SPECS.len(), seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0) {
        prop_assume!((a * d - b * c).abs() > 0.1);
        let m = parse_manifold_spec(SPECS[idx]).unwrap();
        let mut rng = seeded(seed);
        let x = m.sample_point(&mut rng);
        let n = m.dim();
        let u = dualfol::sampling::gaussian_vector(&mut rng, n);
        let v = dualfol::sampling::gaussian_vector(&mut rng, n);
        let k1 = m.sectional(&x, &u, &v).unwrap();
        let k2 = m.sectional(&x, &(&u * a + &v * b), &(&u * c + &v * d)).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-8 * k1.abs().max(1.0));
    }

    #[test]
    fn curvature_symmetries_hold(idx in 0usize..SPECS.len(), seed in any::<u64>()) {
        let m = parse_manifold_spec(SPECS[idx]).unwrap();
        let mut rng = seeded(seed);
        let x = m.sample_point(&mut rng);
        prop_assert!(m.curvature_symmetry_defect(&x, &mut rng).unwrap() <= 1e-7);
    }

    #[test]
    fn svd_reconstructs(r in 1usize..6, c in 1usize..6, data in vec_of(36)) {
        let a = DMatrix::from_fn(r, c, |i, j| data[i * 6 + j]);
        let (sv, u, v) = svd_full(&a);
        let k = sv.len();
        let s = DMatrix::from_fn(k, k, |i, j| if i == j { sv[i] } else { 0.0 });
        let back = u.columns(0, k) * s * v.columns(0, k).transpose();
        prop_assert!((back - &a).amax() <= 1e-12 * a.amax().max(1.0));
        prop_assert!((v.transpose() * &v - DMatrix::identity(c, c)).amax() <= 1e-12);
        prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn geodesics_keep_unit_speed(seed in any::<u64>(), dir in vec_of(3)) {
        let m = Arc::new(parse_manifold_spec("berger_sphere(0.7)").unwrap());
        prop_assume!(dir.iter().map(|x| x * x).sum::<f64>() > 0.01);
        let x0 = m.sample_point(&mut seeded(seed));
        let v = DVector::from_vec(dir);
        let v = &v / m.norm(&x0, &v);
        let path = integrate_geodesic(&m, &x0, &v, 2.0, 1e-2).unwrap();
        let worst = path.samples().iter().map(|s| (m.norm(&s.x, &s.v) - 1.0).abs()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lagrangian_data_is_self_adjoint_and_conserved(seed in any::<u64>(), vanishing in 0usize..4) {
        let m = Arc::new(parse_manifold_spec("sphere(3,1)").unwrap());
        let x0 = DVector::from_row_slice(&[0.1, -0.2, 0.3]);
        let v = DVector::from_row_slice(&[0.0, 1.0, 0.5]);
        let v = &v / m.norm(&x0, &v);
        let path = integrate_geodesic(&m, &x0, &v, 1.0, 1e-2).unwrap();
        let fr = Arc::new(NormalFrame::new(Arc::new(path)).unwrap());
        let (y0, y0p) = random_lagrangian_data(&mut seeded(seed), fr.rank(), vanishing.min(fr.rank()));
        let fam = JacobiFamily::from_frame_data(&fr, y0, y0p).unwrap();
        prop_assert!(fam.self_adjoint);
        let base = fam.omega_at(0);
        let drift = (0..fam.values.len()).map(|k| (fam.omega_at(k) - &base).amax()).fold(0.0, f64::max);
        prop_assert!(drift <= 1e-8 * fam.scale().max(1.0));
    }

    #[test]
    fn split_invariants_hold_for_any_subfamily(seed in any::<u64>(), coeffs in vec_of(2)) {
        prop_assume!(coeffs.iter().any(|c| c.abs() > 0.1));
        let m = Arc::new(parse_manifold_spec("sphere(3,1)").unwrap());
        let x0 = DVector::from_row_slice(&[0.1, -0.2, 0.3]);
        let v = DVector::from_row_slice(&[1.0, 0.0, 0.5]);
        let v = &v / m.norm(&x0, &v);
        let path = dualfol::geodesic::integrate_geodesic_window(&m, &x0, &v, -0.5, 0.5, 2e-3).unwrap();
        let fr = Arc::new(NormalFrame::new(Arc::new(path)).unwrap());
        let (y0, y0p) = random_lagrangian_data(&mut seeded(seed), fr.rank(), 0);
        let fam = Arc::new(JacobiFamily::from_frame_data(&fr, y0, y0p).unwrap());
        let spec = SubfamilySpec::new(&fam, DMatrix::from_column_slice(2, 1, &coeffs)).unwrap();
        let split = build_split(fam, &spec, TransversalOptions::default()).unwrap();
        prop_assert!(split.invariant_report().passed);
        prop_assert!(split.oneill_psd_check().passed);
    }
}
