//! Shared helpers for unit tests.

use crate::geodesic::{integrate_geodesic_window, GeodesicPath};
use crate::jacobi::NormalFrame;
use crate::manifold::{parse_manifold_spec, Manifold};
use nalgebra::DVector;
use std::sync::Arc;

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

pub fn manifold(spec: &str) -> Arc<Manifold> {
    Arc::new(parse_manifold_spec(spec).unwrap())
}

/// Rescales `w` to unit length at `x`.
pub fn unit(m: &Manifold, x: &DVector<f64>, w: DVector<f64>) -> DVector<f64> {
    let n = m.norm(x, &w);
    w / n
}

pub fn path(m: &Arc<Manifold>, x0: DVector<f64>, dir: DVector<f64>, t0: f64, t1: f64) -> Arc<GeodesicPath> {
    let d = unit(m, &x0, dir);
    Arc::new(integrate_geodesic_window(m, &x0, &d, t0, t1, 1e-3).unwrap())
}

pub fn frame(p: &Arc<GeodesicPath>) -> Arc<NormalFrame> {
    Arc::new(NormalFrame::new(p.clone()).unwrap())
}

/// Great circle of the unit 2-sphere through the south pole along the first
/// axis, parametrised so that `t = 0` sits at polar angle `φ0` from the pole.
pub fn sphere_meridian(phi0: f64, t0: f64, t1: f64) -> Arc<GeodesicPath> {
    let m = manifold("sphere(2,1)");
    let x0 = (0.5 * phi0).tan();
    path(&m, v(&[x0, 0.0]), v(&[1.0, 0.0]), t0, t1)
}
