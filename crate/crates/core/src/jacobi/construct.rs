//! Families built from geometric data: foliation leaves, Killing fields and
//! random Lagrangian initial conditions.

use super::{JacobiFamily, NormalFrame};
use crate::error::{Error, Result};
use crate::foliation::{FoliationSpec, VectorField};
use crate::linalg::{complement, gram_schmidt, range_basis, stencil_d1};
use crate::manifold::Manifold;
use crate::sampling::{gaussian_vector, uniform, SeededRng};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;

/// Tolerance on the symmetrised covariant derivative of a Killing field.
pub const KILLING_TOL: f64 = 1e-6;
/// Tolerance on `⟨ċ(0), leaf⟩` for foliation families.
pub const HORIZONTAL_TOL: f64 = 1e-8;

fn fd_along<F>(m: &Manifold, x: &DVector<f64>, u: &DVector<f64>, h: f64, f: F) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let vals: Vec<DVector<f64>> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&s| f(&m.displace(x, u, s * h))).collect();
    DVector::from_fn(vals[0].len(), |i, _| stencil_d1([vals[0][i], vals[1][i], vals[2][i], vals[3][i], vals[4][i]], h))
}

/// `∇_u X` at `x` by a 5-point difference of the components of `X` along the
/// displacement curve plus the connection term.
pub fn covariant_derivative(m: &Manifold, x: &DVector<f64>, field: &VectorField, u: &DVector<f64>) -> Result<DVector<f64>> {
    let d = fd_along(m, x, u, 1e-3, |y| field.at(y));
    Ok(d + m.christoffel_unchecked(x)?.contract(u, &field.at(x)))
}

/// Largest entry of the symmetrised covariant derivative `⟨∇_a X, b⟩ + ⟨∇_b X, a⟩`
/// over an orthonormal basis, relative to `max(1, |∇X|)`.
pub fn killing_defect(m: &Manifold, x: &DVector<f64>, field: &VectorField) -> Result<f64> {
    let b = m.orthonormal_basis(x)?;
    let n = b.ncols();
    let g = m.metric(x);
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|i| covariant_derivative(m, x, field, &b.column(i).into_owned()))
        .collect::<Result<_>>()?;
    let mat = DMatrix::from_fn(n, n, |i, j| cols[i].dot(&(&g * b.column(j))));
    Ok((&mat + mat.transpose()).amax() / mat.amax().max(1.0))
}

/// Family spanned by the normal parts of Killing restrictions, completed by
/// vanishing fields `(0, w)` with `w` orthogonal to the Killing values at `t = 0`.
pub fn family_from_killing(frame: &Arc<NormalFrame>, fields: &[VectorField]) -> Result<JacobiFamily> {
    let path = frame.path();
    let m = path.manifold();
    let samples = path.samples();
    let checks = 20.min(samples.len().saturating_sub(1)).max(1);
    for field in fields {
        for c in 0..=checks {
            let k = c * (samples.len() - 1) / checks;
            let defect = killing_defect(m, &samples[k].x, field)?;
            if defect > KILLING_TOL {
                return Err(Error::NotKilling(defect));
            }
        }
    }
    let o = path.origin();
    let (x0, v0) = (&samples[o].x, &samples[o].v);
    let normal = |w: DVector<f64>| {
        let a = m.inner(x0, &w, v0);
        w - v0 * a
    };
    let dim = frame.rank();
    let mut cand0 = Vec::new();
    let mut cand1 = Vec::new();
    for field in fields {
        let j0 = normal(field.at(x0));
        let j0p = normal(covariant_derivative(m, x0, field, v0)?);
        cand0.push(frame.to_frame(o, &j0));
        cand1.push(frame.to_frame(o, &j0p));
    }
    let values = if cand0.is_empty() { DMatrix::zeros(dim, 0) } else { DMatrix::from_columns(&cand0) };
    let span = range_basis(&values, 1e-8, 1e-12);
    let completion = complement(&span, dim);
    for w in completion.column_iter() {
        cand0.push(DVector::zeros(dim));
        cand1.push(w.into_owned());
    }
    // Greedy selection of independent solutions, Killing data first.
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let (mut y0, mut y0p) = (Vec::new(), Vec::new());
    for (a, b) in cand0.iter().zip(&cand1) {
        if kept.len() == dim {
            break;
        }
        let stacked = DVector::from_iterator(2 * dim, a.iter().chain(b.iter()).copied());
        let scale = stacked.norm();
        let mut r = stacked.clone();
        for q in &kept {
            r -= q * q.dot(&r);
        }
        if r.norm() > 1e-8 * scale.max(1e-300) && scale > 1e-12 {
            kept.push(&r / r.norm());
            y0.push(a.clone());
            y0p.push(b.clone());
        }
    }
    if kept.len() != dim {
        return Err(Error::Completion(format!("{} independent fields, need {dim}", kept.len())));
    }
    let family = JacobiFamily::from_frame_data(frame, DMatrix::from_columns(&y0), DMatrix::from_columns(&y0p))?;
    family.require_self_adjoint()?;
    Ok(family)
}

/// Family of variations by geodesics leaving the leaf through `c(0)`
/// perpendicularly, plus the vanishing fields with `J'(0) ∈ ν ∩ ċ^⊥`.
pub fn family_from_foliation(frame: &Arc<NormalFrame>, fol: &FoliationSpec) -> Result<JacobiFamily> {
    let path = frame.path();
    let m = path.manifold();
    let o = path.origin();
    let (x0, v0) = (&path.samples()[o].x, &path.samples()[o].v);
    let leaf = fol.leaf_tangent(x0)?;
    let k = leaf.ncols();
    let dim = frame.rank();
    if k > dim {
        return Err(Error::ShapeOperator(format!("leaf dimension {k} exceeds normal rank {dim}")));
    }
    for c in leaf.column_iter() {
        let d = m.inner(x0, &c.into_owned(), v0).abs();
        if d > HORIZONTAL_TOL {
            return Err(Error::NotHorizontal(d));
        }
    }
    let normal = |w: DVector<f64>| {
        let a = m.inner(x0, &w, v0);
        w - v0 * a
    };
    let extension = |y: &DVector<f64>| -> DVector<f64> {
        let h = fol.horizontal_project(y, v0).unwrap_or_else(|_| v0.clone());
        let nrm = m.norm(y, &h);
        if nrm > 0.0 {
            h / nrm
        } else {
            h
        }
    };
    let spacing = 10.0 * path.step();
    let gamma = m.christoffel_unchecked(x0)?;
    let mut y0 = Vec::with_capacity(dim);
    let mut y0p = Vec::with_capacity(dim);
    for c in leaf.column_iter() {
        let v = c.into_owned();
        // Richardson combination of the stencil at spacings H and H/2.
        let coarse = fd_along(m, x0, &v, spacing, extension);
        let fine = fd_along(m, x0, &v, 0.5 * spacing, extension);
        let d = (fine * 16.0 - coarse) / 15.0;
        let s = d + gamma.contract(&v, v0);
        y0.push(frame.to_frame(o, &normal(v)));
        y0p.push(frame.to_frame(o, &normal(s)));
    }
    let g = m.metric(x0);
    let mut cands = vec![v0.clone()];
    cands.extend(leaf.column_iter().map(|c| c.into_owned()));
    let n = m.dim();
    cands.extend((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
    let basis = gram_schmidt(&cands, &g, 1e-8);
    if basis.len() != n {
        return Err(Error::ShapeOperator("could not complete the leaf basis".into()));
    }
    for w in &basis[1 + k..] {
        y0.push(DVector::zeros(dim));
        y0p.push(frame.to_frame(o, w));
    }
    let family = JacobiFamily::from_frame_data(frame, DMatrix::from_columns(&y0), DMatrix::from_columns(&y0p))
        .map_err(|e| Error::ShapeOperator(e.to_string()))?;
    family.require_self_adjoint().map_err(|e| Error::ShapeOperator(e.to_string()))?;
    Ok(family)
}

/// Random Lagrangian initial data `Y0 = U cos Θ`, `Y0' = U sin Θ` in frame
/// coefficients. The first `vanishing` columns have `θ = π/2`, so those
/// fields vanish at `t = 0`.
pub fn random_lagrangian_data(rng: &mut SeededRng, m: usize, vanishing: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let gauss = DMatrix::from_columns(&(0..m).map(|_| gaussian_vector(rng, m)).collect::<Vec<_>>());
    let u = gauss.qr().q();
    let thetas: Vec<f64> = (0..m).map(|i| if i < vanishing { 0.5 * PI } else { uniform(rng, 0.15, PI - 0.15) }).collect();
    let y0 = DMatrix::from_fn(m, m, |i, j| u[(i, j)] * thetas[j].cos());
    let y0p = DMatrix::from_fn(m, m, |i, j| u[(i, j)] * thetas[j].sin());
    (y0, y0p)
}
