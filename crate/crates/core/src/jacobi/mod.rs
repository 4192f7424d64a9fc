//! Jacobi fields and self-adjoint Jacobi families.
//!
//! Everything is expressed in a parallel orthonormal frame `E_1..E_{n-1}` of
//! `ċ^⊥` along the geodesic, so the Jacobi equation becomes the linear matrix
//! ODE `Y'' + K(t) Y = 0` with `K_ab = ⟨R(E_a, ċ)ċ, E_b⟩`, and covariant
//! derivatives are plain derivatives of frame coefficients.

mod construct;

pub use construct::{covariant_derivative, family_from_foliation, family_from_killing, killing_defect, random_lagrangian_data};

use crate::error::{Error, Result};
use crate::geodesic::{coupled_step, GeodesicPath};
use crate::linalg::{gram_schmidt, singular_ratio};
use crate::ode::quintic_hermite;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Singular-value ratio below which initial data count as dependent.
pub const RANK_RATIO: f64 = 1e-8;
/// Relative tolerance on the symplectic pairing for self-adjointness.
pub const SELF_ADJOINT_TOL: f64 = 1e-9;
/// Relative zero threshold for zero detection along a field.
pub const ZERO_THRESHOLD: f64 = 1e-6;

/// Parallel orthonormal frame of the normal bundle along a path, with the
/// curvature matrices `K` sampled at nodes and step midpoints.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    path: Arc<GeodesicPath>,
    frame: Vec<DMatrix<f64>>,
    curv_nodes: Vec<DMatrix<f64>>,
    curv_mid: Vec<DMatrix<f64>>,
}

fn curvature_matrix(path: &GeodesicPath, x: &DVector<f64>, v: &DVector<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
    let m = path.manifold();
    let r = m.riemann_tensor(x).expect("curvature evaluation failed");
    let g = m.metric(x);
    let cols = e.ncols();
    let rv: Vec<DVector<f64>> = (0..cols).map(|a| g.clone() * r.apply(&e.column(a).into_owned(), v, v)).collect();
    let mut k = DMatrix::from_fn(cols, cols, |a, b| rv[a].dot(&e.column(b)));
    k = (&k + k.transpose()) * 0.5;
    k
}

impl NormalFrame {
    /// Transports an orthonormal basis of `ċ(0)^⊥` along the path.
    pub fn new(path: Arc<GeodesicPath>) -> Result<Self> {
        let man = path.manifold().clone();
        let n = man.dim();
        let o = &path.samples()[path.origin()];
        let g = man.metric(&o.x);
        let mut candidates = vec![o.v.clone()];
        candidates.extend((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
        let basis = gram_schmidt(&candidates, &g, 1e-8);
        if basis.len() != n {
            return Err(Error::SingularMetric(o.x.iter().copied().collect()));
        }
        let e0: Vec<DVector<f64>> = basis[1..].to_vec();
        let transported = path.propagate(&e0);
        let frame: Vec<DMatrix<f64>> = transported.iter().map(|ws| DMatrix::from_columns(ws)).collect();
        let samples = path.samples();
        let h = path.step();
        let curv_nodes: Vec<DMatrix<f64>> = samples
            .par_iter()
            .zip(frame.par_iter())
            .map(|(s, e)| curvature_matrix(&path, &s.x, &s.v, e))
            .collect();
        let curv_mid: Vec<DMatrix<f64>> = (0..samples.len().saturating_sub(1))
            .into_par_iter()
            .map(|k| {
                let s = &samples[k];
                let ws: Vec<DVector<f64>> = frame[k].column_iter().map(|c| c.into_owned()).collect();
                let mid = coupled_step(&man, &s.x, &s.v, &ws, 0.5 * h);
                curvature_matrix(&path, &mid.x, &mid.v, &DMatrix::from_columns(&mid.ws))
            })
            .collect();
        Ok(Self { path, frame, curv_nodes, curv_mid })
    }

    pub fn path(&self) -> &Arc<GeodesicPath> {
        &self.path
    }

    /// Rank of the normal bundle, `n − 1`.
    pub fn rank(&self) -> usize {
        self.path.manifold().dim() - 1
    }

    /// Frame vectors (columns, backend components) at sample `k`.
    pub fn frame(&self, k: usize) -> &DMatrix<f64> {
        &self.frame[k]
    }

    pub fn curvature(&self, k: usize) -> &DMatrix<f64> {
        &self.curv_nodes[k]
    }

    /// Frame coefficients of a normal tangent vector at sample `k`.
    pub fn to_frame(&self, k: usize, w: &DVector<f64>) -> DVector<f64> {
        let g = self.path.manifold().metric(&self.path.samples()[k].x);
        self.frame[k].transpose() * (g * w)
    }

    /// Backend components of frame coefficients at sample `k`.
    pub fn to_ambient(&self, k: usize, y: &DVector<f64>) -> DVector<f64> {
        &self.frame[k] * y
    }

    fn check_normal(&self, w: &DVector<f64>) -> Result<()> {
        let o = &self.path.samples()[self.path.origin()];
        let defect = self.path.manifold().inner(&o.x, w, &o.v).abs();
        if defect > 1e-10 * w.norm().max(1.0) {
            return Err(Error::NotNormal(defect));
        }
        Ok(())
    }

    /// Integrates `Y'' = −K Y` for all columns of the initial data given at
    /// `t = 0`, returning values and derivatives at every sample.
    pub fn integrate(&self, y0: &DMatrix<f64>, y0p: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let n_s = self.frame.len();
        let h = self.path.step();
        let origin = self.path.origin();
        let mut ys = vec![DMatrix::zeros(0, 0); n_s];
        let mut yps = vec![DMatrix::zeros(0, 0); n_s];
        ys[origin] = y0.clone();
        yps[origin] = y0p.clone();
        let step = |y: &DMatrix<f64>, yp: &DMatrix<f64>, k0: &DMatrix<f64>, km: &DMatrix<f64>, k1: &DMatrix<f64>, h: f64| {
            let a1 = yp.clone();
            let b1 = -(k0 * y);
            let y2 = y + &a1 * (0.5 * h);
            let a2 = yp + &b1 * (0.5 * h);
            let b2 = -(km * &y2);
            let y3 = y + &a2 * (0.5 * h);
            let a3 = yp + &b2 * (0.5 * h);
            let b3 = -(km * &y3);
            let y4 = y + &a3 * h;
            let a4 = yp + &b3 * h;
            let b4 = -(k1 * &y4);
            (
                y + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
                yp + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0),
            )
        };
        for k in origin..n_s - 1 {
            let (y, yp) = step(&ys[k], &yps[k], &self.curv_nodes[k], &self.curv_mid[k], &self.curv_nodes[k + 1], h);
            ys[k + 1] = y;
            yps[k + 1] = yp;
        }
        for k in (1..=origin).rev() {
            let (y, yp) = step(&ys[k], &yps[k], &self.curv_nodes[k], &self.curv_mid[k - 1], &self.curv_nodes[k - 1], -h);
            ys[k - 1] = y;
            yps[k - 1] = yp;
        }
        (ys, yps)
    }
}

/// A normal Jacobi field in frame coefficients.
#[derive(Debug, Clone)]
pub struct JacobiField {
    frame: Arc<NormalFrame>,
    pub values: Vec<DVector<f64>>,
    pub derivs: Vec<DVector<f64>>,
}

/// Integrates the Jacobi field with `J(0) = j0`, `J'(0) = j0p` (backend
/// components, both normal to `ċ(0)`).
pub fn integrate_jacobi(frame: &Arc<NormalFrame>, j0: &DVector<f64>, j0p: &DVector<f64>) -> Result<JacobiField> {
    frame.check_normal(j0)?;
    frame.check_normal(j0p)?;
    let o = frame.path.origin();
    let y0 = DMatrix::from_columns(&[frame.to_frame(o, j0)]);
    let y0p = DMatrix::from_columns(&[frame.to_frame(o, j0p)]);
    let (ys, yps) = frame.integrate(&y0, &y0p);
    Ok(JacobiField {
        frame: frame.clone(),
        values: ys.into_iter().map(|m| m.column(0).into_owned()).collect(),
        derivs: yps.into_iter().map(|m| m.column(0).into_owned()).collect(),
    })
}

fn interpolate<F>(frame: &NormalFrame, len: usize, node: F, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)>
where
    F: Fn(usize) -> (DMatrix<f64>, DMatrix<f64>),
{
    let path = frame.path();
    let k = path.index_at(t)?;
    let tk = path.time(k);
    let h = path.step();
    if (t - tk).abs() <= 1e-12 * (1.0 + t.abs()) || k + 1 == len {
        return Ok(node(k));
    }
    let ((y0, d0), (y1, d1)) = (node(k), node(k + 1));
    let (r, c) = y0.shape();
    let s = (t - tk) / h;
    let flat = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());
    let a0 = -(frame.curvature(k) * &y0);
    let a1 = -(frame.curvature(k + 1) * &y1);
    let (val, der) = quintic_hermite(s, h, &flat(&y0), &flat(&d0), &flat(&a0), &flat(&y1), &flat(&d1), &flat(&a1));
    Ok((DMatrix::from_column_slice(r, c, val.as_slice()), DMatrix::from_column_slice(r, c, der.as_slice())))
}

impl JacobiField {
    pub fn frame(&self) -> &Arc<NormalFrame> {
        &self.frame
    }

    /// Value and covariant derivative (frame coefficients) at `t`.
    pub fn value_at(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let node = |k: usize| (DMatrix::from_columns(&[self.values[k].clone()]), DMatrix::from_columns(&[self.derivs[k].clone()]));
        let (v, d) = interpolate(&self.frame, self.values.len(), node, t)?;
        Ok((v.column(0).into_owned(), d.column(0).into_owned()))
    }

    /// Largest frame norm over the samples.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|y| y.norm()).fold(0.0, f64::max)
    }

    /// Parameters where the field vanishes: grid minima of `|J|` refined by
    /// Newton steps on `⟨J, J'⟩`, kept when `|J| ≤ 1e-6 · max|J|`.
    pub fn zeros(&self) -> Vec<f64> {
        let scale = self.max_norm();
        if scale == 0.0 {
            return Vec::new();
        }
        let path = self.frame.path();
        let norms: Vec<f64> = self.values.iter().map(|y| y.norm()).collect();
        let mut out = Vec::new();
        for k in 0..norms.len() {
            let left = if k > 0 { norms[k - 1] } else { f64::INFINITY };
            let right = if k + 1 < norms.len() { norms[k + 1] } else { f64::INFINITY };
            if !(norms[k] <= left && norms[k] < right) {
                continue;
            }
            let (lo, hi) = (path.time(k.saturating_sub(1)), path.time((k + 1).min(norms.len() - 1)));
            let mut t = path.time(k);
            for _ in 0..8 {
                let Ok((y, yp)) = self.value_at(t) else { break };
                let ypp = {
                    let kk = path.index_at(t).unwrap_or(k);
                    -(self.frame.curvature(kk) * &y)
                };
                let f = y.dot(&yp);
                let df = yp.dot(&yp) + y.dot(&ypp);
                if df.abs() < 1e-300 {
                    break;
                }
                let next = (t - f / df).clamp(lo, hi);
                if (next - t).abs() < 1e-15 {
                    t = next;
                    break;
                }
                t = next;
            }
            if let Ok((y, _)) = self.value_at(t) {
                if y.norm() <= ZERO_THRESHOLD * scale {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// A basis of normal Jacobi fields along one path.
#[derive(Debug, Clone)]
pub struct JacobiFamily {
    frame: Arc<NormalFrame>,
    /// Initial values and derivatives (frame coefficients, one column per field).
    pub init_values: DMatrix<f64>,
    pub init_derivs: DMatrix<f64>,
    pub values: Vec<DMatrix<f64>>,
    pub derivs: Vec<DMatrix<f64>>,
    /// `Ω_ab = ⟨J_a'(0), J_b(0)⟩ − ⟨J_a(0), J_b'(0)⟩`.
    pub omega: DMatrix<f64>,
    pub self_adjoint: bool,
    scale: f64,
}

/// Riccati operator `L(t)` with `L J = J'`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiOperator {
    pub t: f64,
    pub matrix: Option<DMatrix<f64>>,
    pub singular: bool,
}

fn omega_of(y: &DMatrix<f64>, yp: &DMatrix<f64>) -> DMatrix<f64> {
    yp.transpose() * y - y.transpose() * yp
}

/// Builds a family from initial data in backend components.
pub fn make_family(frame: &Arc<NormalFrame>, inits: &[(DVector<f64>, DVector<f64>)]) -> Result<JacobiFamily> {
    let m = frame.rank();
    if inits.len() != m {
        return Err(Error::WrongCount { expected: m, got: inits.len() });
    }
    let o = frame.path().origin();
    let mut cols0 = Vec::with_capacity(m);
    let mut cols1 = Vec::with_capacity(m);
    for (j0, j0p) in inits {
        frame.check_normal(j0)?;
        frame.check_normal(j0p)?;
        cols0.push(frame.to_frame(o, j0));
        cols1.push(frame.to_frame(o, j0p));
    }
    JacobiFamily::from_frame_data(frame, DMatrix::from_columns(&cols0), DMatrix::from_columns(&cols1))
}

impl JacobiFamily {
    /// Builds a family from initial data given in frame coefficients.
    pub fn from_frame_data(frame: &Arc<NormalFrame>, y0: DMatrix<f64>, y0p: DMatrix<f64>) -> Result<Self> {
        let m = frame.rank();
        if y0.ncols() != m || y0p.ncols() != m || y0.nrows() != m || y0p.nrows() != m {
            return Err(Error::WrongCount { expected: m, got: y0.ncols() });
        }
        let mut stacked = DMatrix::zeros(2 * m, m);
        stacked.view_mut((0, 0), (m, m)).copy_from(&y0);
        stacked.view_mut((m, 0), (m, m)).copy_from(&y0p);
        let ratio = singular_ratio(&stacked);
        if m > 0 && ratio < RANK_RATIO {
            return Err(Error::RankDeficient { ratio });
        }
        let scale = (0..m)
            .map(|a| y0.column(a).norm_squared() + y0p.column(a).norm_squared())
            .fold(0.0, f64::max);
        let omega = omega_of(&y0, &y0p);
        let self_adjoint = omega.amax() <= SELF_ADJOINT_TOL * scale;
        let (values, derivs) = frame.integrate(&y0, &y0p);
        Ok(Self { frame: frame.clone(), init_values: y0, init_derivs: y0p, values, derivs, omega, self_adjoint, scale })
    }

    pub fn frame(&self) -> &Arc<NormalFrame> {
        &self.frame
    }

    pub fn path(&self) -> &Arc<GeodesicPath> {
        self.frame.path()
    }

    pub fn size(&self) -> usize {
        self.init_values.ncols()
    }

    /// Scale of the initial data: `max_a |J_a(0)|² + |J_a'(0)|²`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Returns an error naming the worst pairing entry unless self-adjoint.
    pub fn require_self_adjoint(&self) -> Result<()> {
        if self.self_adjoint {
            return Ok(());
        }
        let (mut bi, mut bj, mut bv) = (0, 0, 0.0);
        for i in 0..self.omega.nrows() {
            for j in 0..self.omega.ncols() {
                if self.omega[(i, j)].abs() > bv {
                    (bi, bj, bv) = (i, j, self.omega[(i, j)].abs());
                }
            }
        }
        Err(Error::NotSelfAdjoint { i: bi, j: bj, value: self.omega[(bi, bj)], tol: SELF_ADJOINT_TOL * self.scale })
    }

    /// Symplectic pairing recomputed at sample `k`.
    pub fn omega_at(&self, k: usize) -> DMatrix<f64> {
        omega_of(&self.values[k], &self.derivs[k])
    }

    /// Family member `a` as a standalone field.
    pub fn field(&self, a: usize) -> JacobiField {
        JacobiField {
            frame: self.frame.clone(),
            values: self.values.iter().map(|y| y.column(a).into_owned()).collect(),
            derivs: self.derivs.iter().map(|y| y.column(a).into_owned()).collect(),
        }
    }

    /// The member `Σ c_a J_a`.
    pub fn combination(&self, c: &DVector<f64>) -> JacobiField {
        JacobiField {
            frame: self.frame.clone(),
            values: self.values.iter().map(|y| y * c).collect(),
            derivs: self.derivs.iter().map(|y| y * c).collect(),
        }
    }

    /// Values and derivatives of all members at `t` (quintic Hermite between nodes).
    pub fn value_at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        interpolate(&self.frame, self.values.len(), |k| (self.values[k].clone(), self.derivs[k].clone()), t)
    }

    /// Riccati operator at `t`. The value matrix counts as singular when its
    /// smallest singular value is below `1e-8` times the larger of its largest
    /// singular value and the initial-data scale (a 1×1 family still has a
    /// meaningful zero).
    pub fn riccati_at(&self, t: f64) -> Result<RiccatiOperator> {
        self.require_self_adjoint()?;
        let (y, yp) = self.value_at(t)?;
        let sv = y.clone().svd(false, false).singular_values;
        let floor = RANK_RATIO * sv.max().max(self.scale.sqrt());
        if sv.min() < floor {
            return Ok(RiccatiOperator { t, matrix: None, singular: true });
        }
        let inv = y.try_inverse().ok_or(Error::RankDeficient { ratio: 0.0 })?;
        Ok(RiccatiOperator { t, matrix: Some(yp * inv), singular: false })
    }

    /// Writes per-field rows `field, t, J_1..J_m, Jp_1..Jp_m`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.frame.rank();
        let mut header = vec!["field".to_string(), "t".to_string()];
        header.extend((1..=m).map(|i| format!("J_{i}")));
        header.extend((1..=m).map(|i| format!("Jp_{i}")));
        w.write_record(&header)?;
        let path = self.path();
        for a in 0..self.size() {
            for k in 0..self.values.len() {
                let mut row = vec![a.to_string(), format!("{:.17e}", path.time(k))];
                row.extend(self.values[k].column(a).iter().map(|c| format!("{c:.17e}")));
                row.extend(self.derivs[k].column(a).iter().map(|c| format!("{c:.17e}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
