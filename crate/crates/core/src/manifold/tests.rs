use super::*;
use crate::sampling::{gaussian_vector, seeded};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

fn catalog() -> Vec<Manifold> {
    [
        "euclidean(3)",
        "sphere(2,1)",
        "sphere(3,1)",
        "sphere(2,2.5)",
        "berger_sphere(1)",
        "berger_sphere(0.6)",
        "cylinder(1.5)",
        "product(sphere(2,1),euclidean(1))",
        "product(sphere(2,1),euclidean(2))",
    ]
    .iter()
    .map(|s| parse_manifold_spec(s).unwrap())
    .collect()
}

/// Sectional curvature of the sphere with radius `r` is `1/r²`, and the
/// stereographic metric is the pullback of the ambient metric. The pullback
/// is computed here by differentiating the embedding numerically.
#[test]
fn stereographic_metric_is_round_pullback() {
    let m = builtin_manifold("sphere", &[2.0, 1.0]).unwrap();
    let x = v(&[0.3, -0.7]);
    let h = 1e-6;
    let jac = DMatrix::from_fn(3, 2, |i, k| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        (stereographic_to_ambient(&xp, 1.0)[i] - stereographic_to_ambient(&xm, 1.0)[i]) / (2.0 * h)
    });
    let pullback = jac.transpose() * jac;
    assert!((pullback - m.metric(&x)).amax() < 1e-8);
    let expected = 4.0 / (1.0 + x.norm_squared()).powi(2);
    assert!((m.metric(&x)[(0, 0)] - expected).abs() < 1e-15);
}

#[test]
fn euclidean_is_flat() {
    let m = builtin_manifold("euclidean", &[3.0]).unwrap();
    let x = v(&[1.0, -2.0, 0.5]);
    let gamma = m.christoffel(&x).unwrap();
    assert!((0..27).all(|i| gamma.data[i] == 0.0));
    let r = m.riemann(&x, &v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &v(&[0.3, 0.2, 1.0])).unwrap();
    assert_eq!(r.norm(), 0.0);
    assert_eq!(m.metric(&x), DMatrix::identity(3, 3));
}

#[test]
fn stereographic_christoffel_vanishes_at_origin() {
    let m = builtin_manifold("sphere", &[2.0, 1.0]).unwrap();
    let gamma = m.christoffel(&v(&[0.0, 0.0])).unwrap();
    assert!(gamma.data.iter().all(|g| g.abs() < 1e-15));
}

/// Closed form for a conformal metric `e^{2f} δ`:
/// `Γ^k_ij = δ_ik ∂_j f + δ_jk ∂_i f − δ_ij ∂_k f`.
#[test]
fn stereographic_christoffel_matches_conformal_formula() {
    let r = 1.7;
    let m = builtin_manifold("sphere", &[3.0, r]).unwrap();
    let x = v(&[0.4, -1.1, 0.6]);
    let s = 1.0 + x.norm_squared() / (r * r);
    let df = |k: usize| -2.0 * x[k] / (r * r * s);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let gamma = m.christoffel(&x).unwrap();
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let expected = d(i, k) * df(j) + d(j, k) * df(i) - d(i, j) * df(k);
                assert!((gamma.get(k, i, j) - expected).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn sphere_curvature_is_constant_curvature_form() {
    for (n, r) in [(2usize, 1.0), (3, 1.0), (3, 0.5)] {
        let m = builtin_manifold("sphere", &[n as f64, r]).unwrap();
        let mut rng = seeded(7);
        for _ in 0..20 {
            let x = m.sample_point(&mut rng);
            let (a, b, c) = (gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n));
            let got = m.riemann(&x, &a, &b, &c).unwrap();
            let expected = (&a * m.inner(&x, &b, &c) - &b * m.inner(&x, &a, &c)) / (r * r);
            assert!((&got - &expected).norm() <= 1e-8 * expected.norm().max(1.0));
        }
    }
}

#[test]
fn product_mixed_curvature_vanishes() {
    let m = parse_manifold_spec("product(sphere(2,1),euclidean(1))").unwrap();
    let x = v(&[0.2, 0.1, 3.0]);
    let r = m.riemann(&x, &v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &v(&[0.0, 0.0, 1.0])).unwrap();
    assert_eq!(r.norm(), 0.0);
    let k = m.sectional(&x, &v(&[1.0, 0.5, 0.0]), &v(&[0.0, 0.0, 1.0])).unwrap();
    assert_eq!(k, 0.0);
}

/// Berger sphere with frame metric diag(ε², 1, 1) and `[e1,e2] = 2e3`:
/// `K(e1, e2) = ε²` and `K(e2, e3) = 4 − 3ε²` (hand-evaluated Koszul data).
#[test]
fn berger_sectional_curvatures() {
    for eps in [0.6_f64, 0.8, 1.0, 1.3] {
        let m = builtin_manifold("berger_sphere", &[eps]).unwrap();
        let q = v(&[1.0, 0.0, 0.0, 0.0]);
        let (e1, e2, e3) = (v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0]));
        assert!((m.sectional(&q, &e1, &e2).unwrap() - eps * eps).abs() < 1e-13);
        assert!((m.sectional(&q, &e1, &e3).unwrap() - eps * eps).abs() < 1e-13);
        assert!((m.sectional(&q, &e2, &e3).unwrap() - (4.0 - 3.0 * eps * eps)).abs() < 1e-13);
    }
}

/// `⟨∇_{e2} e1, e3⟩ = −ε²` and `⟨∇_{e1} e2, e3⟩ = 2 − ε²` by hand.
#[test]
fn berger_connection_by_hand() {
    let eps = 0.7_f64;
    let m = builtin_manifold("berger_sphere", &[eps]).unwrap();
    let gamma = m.christoffel(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
    assert!((gamma.get(2, 1, 0) + eps * eps).abs() < 1e-14);
    assert!((gamma.get(2, 0, 1) - (2.0 - eps * eps)).abs() < 1e-14);
    // torsion-free: Γ^k_ij − Γ^k_ji = c_ij^k
    assert!((gamma.get(2, 0, 1) - gamma.get(2, 1, 0) - 2.0).abs() < 1e-14);
}

#[test]
fn round_s3_realisations_agree() {
    let chart = builtin_manifold("sphere", &[3.0, 1.0]).unwrap();
    let frame = builtin_manifold("berger_sphere", &[1.0]).unwrap();
    let mut rng = seeded(11);
    for _ in 0..50 {
        let x = chart.sample_point(&mut rng);
        let q = frame.sample_point(&mut rng);
        let (a, b) = (gaussian_vector(&mut rng, 3), gaussian_vector(&mut rng, 3));
        let kc = chart.sectional(&x, &a, &b).unwrap();
        let kf = frame.sectional(&q, &a, &b).unwrap();
        assert!((kc - kf).abs() < 1e-6, "{kc} vs {kf}");
    }
}

fn symmetry_defects(m: &Manifold, x: &DVector<f64>, rng: &mut SeededRng) -> f64 {
    m.curvature_symmetry_defect(x, rng).unwrap()
}

#[test]
fn curvature_symmetries_on_catalog() {
    let mut rng = seeded(3);
    for m in catalog() {
        for _ in 0..100 {
            let x = m.sample_point(&mut rng);
            let defect = symmetry_defects(&m, &x, &mut rng);
            assert!(defect <= 1e-7, "{}: defect {defect}", m.label());
        }
    }
}

fn fd_sphere(n: usize) -> Manifold {
    builtin_manifold("sphere", &[n as f64, 1.0]).unwrap().finite_difference_variant()
}

#[test]
fn finite_difference_fallback_matches_analytic() {
    let analytic = builtin_manifold("sphere", &[3.0, 1.0]).unwrap();
    let fd = fd_sphere(3);
    let mut rng = seeded(5);
    for _ in 0..30 {
        let x = analytic.sample_point(&mut rng);
        if x.norm() > 3.0 {
            continue;
        }
        let defect = symmetry_defects(&fd, &x, &mut rng);
        assert!(defect <= 1e-4, "fd symmetry defect {defect}");
        let (a, b) = (gaussian_vector(&mut rng, 3), gaussian_vector(&mut rng, 3));
        let k = fd.sectional(&x, &a, &b).unwrap();
        assert!((k - 1.0).abs() < 1e-4, "fd sectional {k}");
    }
}

#[test]
fn analytic_derivatives_agree_with_finite_differences() {
    for spec in ["sphere(2,1)", "sphere(3,2)", "hyperbolic(2,1)"] {
        let Manifold::Chart(c) = parse_manifold_spec(spec).unwrap() else { unreachable!() };
        let fd = ChartManifold { metric_d1: None, metric_d2: None, ..c.clone() };
        let mut rng = seeded(17);
        for _ in 0..20 {
            let x = (c.sampler)(&mut rng);
            if x.norm() > 4.0 {
                continue;
            }
            let (a1, f1) = (c.metric_d1(&x), fd.metric_d1(&x));
            let (a2, f2) = (c.metric_d2(&x), fd.metric_d2(&x));
            for (a, f) in a1.iter().zip(&f1).chain(a2.iter().zip(&f2)) {
                let scale = a.amax().max(f.amax()).max(1e-3);
                assert!((a - f).amax() <= 1e-6 * scale, "{spec} at {x:?}: {}", (a - f).amax() / scale);
            }
        }
    }
}

#[test]
fn catalog_is_nonnegatively_curved() {
    let mut rng = seeded(19);
    for m in catalog() {
        assert!(m.advertised_nonnegative());
        for _ in 0..1000 {
            let x = m.sample_point(&mut rng);
            let n = m.dim();
            let (a, b) = (gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n));
            let k = m.sectional(&x, &a, &b).unwrap();
            assert!(k >= -1e-8, "{}: {k}", m.label());
        }
    }
}

#[test]
fn metric_positive_definite_at_samples() {
    let mut rng = seeded(23);
    for m in catalog() {
        for _ in 0..50 {
            assert!(m.metric_is_positive_definite(&m.sample_point(&mut rng)));
        }
    }
}

#[test]
fn sectional_is_basis_invariant() {
    let m = parse_manifold_spec("berger_sphere(0.8)").unwrap();
    let q = v(&[0.5, 0.5, 0.5, 0.5]);
    let (a, b) = (v(&[1.0, 0.2, -0.4]), v(&[0.3, 1.0, 0.7]));
    let k1 = m.sectional(&q, &a, &b).unwrap();
    let k2 = m.sectional(&q, &(&a * 2.0 + &b * 0.5), &(&b * -1.5 + &a * 0.25)).unwrap();
    assert!((k1 - k2).abs() <= 1e-8 * k1.abs());
}

#[test]
fn degenerate_plane_is_rejected() {
    let m = builtin_manifold("euclidean", &[2.0]).unwrap();
    let err = m.sectional(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]), &v(&[2.0, 2.0])).unwrap_err();
    assert!(matches!(err, Error::DegeneratePlane { .. }));
}

#[test]
fn catalog_errors() {
    assert!(matches!(builtin_manifold("torus", &[1.0]), Err(Error::UnknownManifold(_))));
    assert!(matches!(builtin_manifold("sphere", &[2.0, -1.0]), Err(Error::InvalidParameter(_))));
    assert!(matches!(builtin_manifold("berger_sphere", &[0.0]), Err(Error::InvalidParameter(_))));
    assert!(matches!(builtin_manifold("cylinder", &[-2.0]), Err(Error::InvalidParameter(_))));
    let sphere = builtin_manifold("sphere", &[2.0, 1.0]).unwrap();
    assert!(matches!(sphere.christoffel(&v(&[30.0, 0.0])), Err(Error::OutOfDomain { .. })));
}

#[test]
fn frame_manifold_rejects_bad_structure() {
    let mut c = su2_structure();
    c[5] = 1.0; // breaks antisymmetry
    assert!(FrameManifold::new("bad", FrameGroup::Su2, c, DMatrix::identity(3, 3)).is_err());
}
