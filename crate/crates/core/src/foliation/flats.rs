//! Numerical verification that a horizontal and a dual-horizontal direction
//! span a totally geodesic flat.

use super::{DualLeafCloud, FoliationSpec};
use crate::error::{Error, Result};
use crate::geodesic::shoot;
use crate::linalg::svd_full;
use crate::manifold::Manifold;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct FlatOptions {
    /// Side of the parameter square `[0, T]²`.
    pub extent: f64,
    pub step: f64,
    /// Samples per side for the curvature check.
    pub grid: usize,
    /// Launch directions per base point for the geodesy check.
    pub directions: usize,
    /// Length of the test geodesics.
    pub probe_length: f64,
    /// Radius of the cloud neighbourhood used for the tangent estimate.
    pub certificate_radius: f64,
    pub sectional_tol: f64,
    pub geodesy_tol: f64,
    pub certificate_tol: f64,
}

impl Default for FlatOptions {
    fn default() -> Self {
        Self {
            extent: 1.0,
            step: 1e-3,
            grid: 6,
            directions: 8,
            probe_length: 0.5,
            certificate_radius: 0.1,
            sectional_tol: 1e-8,
            geodesy_tol: 1e-5,
            certificate_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatReport {
    /// Norm of the component of `v` tangent to the estimated dual leaf.
    pub certificate_defect: f64,
    pub dual_tangent_dim: usize,
    /// Largest `|K|` over the surface samples, and the extreme values.
    pub max_sectional: f64,
    pub min_sectional_value: f64,
    pub max_sectional_value: f64,
    /// Largest distance between probe geodesics and the surface.
    pub max_geodesy: f64,
    pub certificate_ok: bool,
    pub sectional_ok: bool,
    pub geodesy_ok: bool,
}

impl FlatReport {
    pub fn passed(&self) -> bool {
        self.certificate_ok && self.sectional_ok && self.geodesy_ok
    }

    /// Surfaces a failed certificate as an error.
    pub fn require_certificate(&self) -> Result<()> {
        if self.certificate_ok {
            Ok(())
        } else {
            Err(Error::Certificate(self.certificate_defect))
        }
    }
}

/// `g`-orthonormal basis of the span of cloud points within `radius` of `p`,
/// estimated from first-order displacement vectors.
pub fn tangent_estimate(m: &Manifold, cloud: &DualLeafCloud, p: &DVector<f64>, radius: f64) -> Result<DMatrix<f64>> {
    let near: Vec<DVector<f64>> = cloud
        .points
        .iter()
        .filter(|y| {
            let d = m.distance(p, y).unwrap_or_else(|| (*y - p).norm());
            d > 1e-9 && d <= radius
        })
        .map(|y| m.log_approx(p, y))
        .collect();
    if near.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} cloud points near the base point", near.len())));
    }
    let g = m.metric(p);
    let lt = g.cholesky().ok_or_else(|| Error::SingularMetric(p.iter().copied().collect()))?.l().transpose();
    let mat = DMatrix::from_columns(&near.iter().map(|w| &lt * w).collect::<Vec<_>>());
    let (sv, u, _) = svd_full(&mat);
    let smax = sv.first().copied().unwrap_or(0.0);
    let dim = sv.iter().take(u.ncols()).filter(|&&s| s > 1e-6 * smax).count();
    Ok(lt.try_inverse().expect("cholesky factor is invertible") * u.columns(0, dim))
}

fn point_distance(m: &Manifold, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    m.distance(x, y).unwrap_or_else(|| (x - y).norm())
}

struct Surface<'a> {
    m: &'a Manifold,
    /// Nodes of the base geodesic with transported `v`: `(x, ċ, V)`.
    nodes: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)>,
    lo: f64,
    step: f64,
}

impl Surface<'_> {
    /// Base point, velocity and transported `v` at parameter `t`.
    fn base(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let k = (((t - self.lo) / self.step).floor() as isize).clamp(0, self.nodes.len() as isize - 1) as usize;
        let (x, c, v) = &self.nodes[k];
        let dt = t - (self.lo + k as f64 * self.step);
        if dt == 0.0 {
            return Ok((x.clone(), c.clone(), v.clone()));
        }
        let s = shoot(self.m, x, c, std::slice::from_ref(v), dt, self.step)?;
        Ok((s.x, s.v, s.ws[0].clone()))
    }

    /// `Φ(s, t) = exp_{c(t)}(s V(t))` with the transports of `ċ(t)` and `V(t)`.
    fn point(&self, s: f64, t: f64) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (x, c, v) = self.base(t)?;
        let st = shoot(self.m, &x, &v, std::slice::from_ref(&c), s, self.step)?;
        Ok((st.x, st.ws[0].clone(), st.v))
    }
}

/// Checks that the horizontal `x` and dual-horizontal `v` at `p` span a
/// totally geodesic flat. The certificate for `v` is computed from `cloud`.
pub fn flat_check(fol: &FoliationSpec, cloud: &DualLeafCloud, p: &DVector<f64>, x: &DVector<f64>, v: &DVector<f64>, opts: &FlatOptions) -> Result<FlatReport> {
    let m = fol.manifold.as_ref();
    m.check_domain(p)?;
    let (nx, nv, xv) = (m.norm(p, x), m.norm(p, v), m.inner(p, x, v));
    if (nx - 1.0).abs() > 1e-10 || (nv - 1.0).abs() > 1e-10 || xv.abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("x, v must be orthonormal (|x| = {nx}, |v| = {nv}, ⟨x,v⟩ = {xv:e})")));
    }
    let defect = fol.horizontality_defect(p, x);
    if defect > super::LAUNCH_TOL {
        return Err(Error::NotHorizontal(defect));
    }
    let tangent = tangent_estimate(m, cloud, p, opts.certificate_radius)?;
    let g = m.metric(p);
    let certificate_defect = (tangent.transpose() * (&g * v)).norm();

    let margin = opts.probe_length + opts.step;
    let (lo, hi) = (-margin, opts.extent + margin);
    let mut nodes = Vec::new();
    let start = shoot(m, p, x, std::slice::from_ref(v), lo, opts.step)?;
    let count = ((hi - lo) / opts.step).ceil() as usize;
    let (mut cx, mut cc, mut cv) = (start.x, start.v, start.ws[0].clone());
    for _ in 0..=count {
        nodes.push((cx.clone(), cc.clone(), cv.clone()));
        let s = shoot(m, &cx, &cc, std::slice::from_ref(&cv), opts.step, opts.step)?;
        (cx, cc, cv) = (s.x, s.v, s.ws[0].clone());
    }
    let surf = Surface { m, nodes, lo, step: opts.step };

    let grid: Vec<(f64, f64)> = (0..opts.grid)
        .flat_map(|i| (0..opts.grid).map(move |j| (i, j)))
        .map(|(i, j)| {
            let d = (opts.grid - 1).max(1) as f64;
            (opts.extent * i as f64 / d, opts.extent * j as f64 / d)
        })
        .collect();
    let curv: Vec<f64> = grid
        .par_iter()
        .map(|&(s, t)| {
            let (q, xs, vs) = surf.point(s, t)?;
            m.sectional(&q, &xs, &vs)
        })
        .collect::<Result<_>>()?;
    let max_sectional = curv.iter().map(|k| k.abs()).fold(0.0, f64::max);
    let min_sectional_value = curv.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sectional_value = curv.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let bases = [(0.25, 0.25), (0.5, 0.5), (0.75, 0.25)].map(|(a, b)| (a * opts.extent, b * opts.extent));
    let probes: Vec<(f64, f64, f64)> = bases
        .iter()
        .flat_map(|&(s0, t0)| (0..opts.directions).map(move |d| (s0, t0, 2.0 * PI * d as f64 / opts.directions as f64)))
        .collect();
    let geo: Vec<f64> = probes
        .par_iter()
        .map(|&(s0, t0, angle)| {
            let (q, xs, vs) = surf.point(s0, t0)?;
            let (a, b) = (angle.cos(), angle.sin());
            let dir = &xs * a + &vs * b;
            let tau = opts.probe_length;
            let end = shoot(m, &q, &dir, &[], tau, opts.step)?;
            let (target, _, _) = surf.point(s0 + b * tau, t0 + a * tau)?;
            Ok(point_distance(m, &end.x, &target))
        })
        .collect::<Result<_>>()?;
    let max_geodesy = geo.iter().copied().fold(0.0, f64::max);

    Ok(FlatReport {
        certificate_defect,
        dual_tangent_dim: tangent.ncols(),
        max_sectional,
        min_sectional_value,
        max_sectional_value,
        max_geodesy,
        certificate_ok: certificate_defect <= opts.certificate_tol,
        sectional_ok: max_sectional <= opts.sectional_tol,
        geodesy_ok: max_geodesy <= opts.geodesy_tol,
    })
}
