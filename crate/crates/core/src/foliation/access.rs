//! Rank of the Lie algebra generated by a local horizontal frame.

use super::FoliationSpec;
use crate::error::{Error, Result};
use crate::linalg::svd_full;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Default central-difference step for brackets.
pub const BRACKET_STEP: f64 = 1e-5;
/// Relative singular-value threshold for the accessibility rank.
pub const ACCESS_RANK_TOL: f64 = 1e-6;

type Field = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct AccessReport {
    pub rank: usize,
    pub depth: usize,
    pub step: f64,
    pub fields: usize,
    pub singular_values: Vec<f64>,
}

fn bracket(fol: &FoliationSpec, x: Field, y: Field, h: f64) -> Field {
    let m = fol.manifold.clone();
    Arc::new(move |p: &DVector<f64>| {
        let (xp, yp) = (x(p), y(p));
        let dy = (y(&m.displace(p, &xp, h)) - y(&m.displace(p, &xp, -h))) / (2.0 * h);
        let dx = (x(&m.displace(p, &yp, h)) - x(&m.displace(p, &yp, -h))) / (2.0 * h);
        dy - dx + m.bracket_term(&xp, &yp)
    })
}

/// Rank at `x` of the horizontal frame and its left-normed brackets up to
/// `depth`, with the given difference step (no stability check).
pub fn accessibility_rank_with_step(fol: &FoliationSpec, x: &DVector<f64>, depth: usize, step: f64) -> Result<AccessReport> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let m = fol.manifold.clone();
    m.check_domain(x)?;
    let n = m.dim();
    check_regular(fol, x)?;
    // Horizontal projections of the constant component fields, keeping those
    // independent at x.
    let mut frame: Vec<Field> = Vec::new();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for a in 0..n {
        let f = fol.clone();
        let e = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
        let field: Field = Arc::new(move |p: &DVector<f64>| f.horizontal_project(p, &e).unwrap_or_else(|_| DVector::zeros(e.len())));
        let mut r = field(x);
        let scale = r.norm();
        for q in &kept {
            r -= q * q.dot(&r);
        }
        if scale > 1e-8 && r.norm() > 1e-6 * scale {
            kept.push(&r / r.norm());
            frame.push(field);
        }
    }
    let mut all = frame.clone();
    let mut level = frame.clone();
    for _ in 1..depth {
        let mut next = Vec::new();
        for a in &frame {
            for l in &level {
                next.push(bracket(fol, a.clone(), l.clone(), step));
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    let g = m.metric(x);
    let lt = g.cholesky().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?.l().transpose();
    let cols: Vec<DVector<f64>> = all.iter().map(|f| &lt * f(x)).collect();
    let mat = if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) };
    let (sv, _, _) = svd_full(&mat);
    let smax = sv.first().copied().unwrap_or(0.0);
    let thr = ACCESS_RANK_TOL * smax.max(1.0);
    let rank = sv.iter().take(n.min(mat.ncols())).filter(|&&s| s > thr).count();
    Ok(AccessReport { rank, depth, step, fields: all.len(), singular_values: sv })
}

/// Accessibility rank, required to agree at the default step and at half
/// of it.
pub fn accessibility_rank(fol: &FoliationSpec, x: &DVector<f64>, depth: usize) -> Result<usize> {
    let coarse = accessibility_rank_with_step(fol, x, depth, BRACKET_STEP)?;
    let fine = accessibility_rank_with_step(fol, x, depth, 0.5 * BRACKET_STEP)?;
    if coarse.rank != fine.rank {
        return Err(Error::Inconclusive { coarse: coarse.rank, fine: fine.rank });
    }
    Ok(coarse.rank)
}

/// Errors unless the leaf rank is constant on a small neighbourhood of `x`.
fn check_regular(fol: &FoliationSpec, x: &DVector<f64>) -> Result<()> {
    let m = &fol.manifold;
    let n = m.dim();
    let rank = fol.leaf_rank(x)?;
    for a in 0..n {
        for s in [-1e-3, 1e-3] {
            let e = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
            let y = m.displace(x, &e, s);
            if !m.in_domain(&y) {
                continue;
            }
            let r = fol.leaf_rank(&y)?;
            if r != rank {
                return Err(Error::NotRegular { rank, generic: r });
            }
        }
    }
    Ok(())
}
