//! Singular Riemannian foliations given by generating vector fields, their
//! horizontal geometry, dual-leaf exploration and flat verification.

mod access;
mod catalog;
mod dual;
mod flats;

pub use access::{accessibility_rank, accessibility_rank_with_step, AccessReport};
pub use catalog::{builtin_foliation, sphere_rotation, FOLIATION_NAMES};
pub use dual::{dual_leaf_trace, reference_net, DualLeafCloud, Segment, TraceOptions};
pub use flats::{flat_check, tangent_estimate, FlatOptions, FlatReport};

use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic, GeodesicPath};
use crate::linalg::range_basis;
use crate::manifold::Manifold;
use crate::sampling::SeededRng;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Relative singular-value threshold for the leaf rank.
pub const LEAF_RANK_TOL: f64 = 1e-8;
/// Tolerance on `⟨dir, X_i⟩` for launching horizontal geodesics.
pub const LAUNCH_TOL: f64 = 1e-8;

type FieldFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A vector field given by its tangent components (chart or frame) as a
/// function of the point representation.
#[derive(Clone)]
pub struct VectorField {
    pub label: String,
    eval: Arc<FieldFn>,
}

impl VectorField {
    pub fn new(label: impl Into<String>, eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { label: label.into(), eval: Arc::new(eval) }
    }

    pub fn at(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.eval)(x)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("label", &self.label).finish()
    }
}

/// A (possibly singular) foliation: leaves are the orbits of the generators.
#[derive(Debug, Clone)]
pub struct FoliationSpec {
    pub label: String,
    pub manifold: Arc<Manifold>,
    pub generators: Vec<VectorField>,
    /// Generators are Killing fields of an isometric action.
    pub killing: bool,
}

/// Per-sample horizontality of a geodesic, `max_i |⟨ċ, X_i⟩|`.
#[derive(Debug, Clone)]
pub struct HorizontalityReport {
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

impl FoliationSpec {
    pub fn new(label: impl Into<String>, manifold: Arc<Manifold>, generators: Vec<VectorField>, killing: bool) -> Self {
        Self { label: label.into(), manifold, generators, killing }
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    /// Generator values as columns.
    pub fn generator_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.manifold.dim();
        if self.generators.is_empty() {
            return DMatrix::zeros(n, 0);
        }
        DMatrix::from_columns(&self.generators.iter().map(|g| g.at(x)).collect::<Vec<_>>())
    }

    /// `g`-orthonormal basis (columns) of the leaf tangent space at `x`; the
    /// column count is the leaf rank.
    pub fn leaf_tangent(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.manifold.check_domain(x)?;
        let g = self.manifold.metric(x);
        let chol = g.cholesky().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        let lt = chol.l().transpose();
        let w = &lt * self.generator_matrix(x);
        let smax = if w.ncols() == 0 { 0.0 } else { w.clone().svd(false, false).singular_values.max() };
        let u = range_basis(&w, 0.0, LEAF_RANK_TOL * smax.max(1.0));
        let lt_inv = lt.try_inverse().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        Ok(lt_inv * u)
    }

    pub fn leaf_rank(&self, x: &DVector<f64>) -> Result<usize> {
        Ok(self.leaf_tangent(x)?.ncols())
    }

    /// Removes the leaf-tangent part of `w` (g-orthogonal projection).
    pub fn horizontal_project(&self, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.leaf_tangent(x)?;
        let g = self.manifold.metric(x);
        Ok(w - &t * (t.transpose() * (g * w)))
    }

    /// `max_i |⟨w, X_i⟩|` at `x`.
    pub fn horizontality_defect(&self, x: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.generators
            .iter()
            .map(|f| self.manifold.inner(x, w, &f.at(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Geodesic launched horizontally from `x`, with its horizontality report.
    pub fn horizontal_geodesic(&self, x: &DVector<f64>, dir: &DVector<f64>, len: f64, step: f64) -> Result<(GeodesicPath, HorizontalityReport)> {
        let d0 = self.horizontality_defect(x, dir);
        if d0 > LAUNCH_TOL {
            return Err(Error::NotHorizontal(d0));
        }
        let path = integrate_geodesic(&self.manifold, x, dir, len, step)?;
        let report = self.horizontality(&path);
        Ok((path, report))
    }

    pub fn horizontality(&self, path: &GeodesicPath) -> HorizontalityReport {
        let defects: Vec<f64> = path.samples().iter().map(|s| self.horizontality_defect(&s.x, &s.v)).collect();
        let max_defect = defects.iter().copied().fold(0.0, f64::max);
        HorizontalityReport { defects, max_defect }
    }

    /// Mode of the leaf rank over `samples` random points.
    pub fn generic_rank(&self, rng: &mut SeededRng, samples: usize) -> usize {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for _ in 0..samples {
            let x = self.manifold.sample_point(rng);
            if let Ok(r) = self.leaf_rank(&x) {
                *counts.entry(r).or_default() += 1;
            }
        }
        counts.into_iter().max_by_key(|&(r, c)| (c, r)).map(|(r, _)| r).unwrap_or(0)
    }

    /// Largest horizontality defect of geodesics launched perpendicular to the
    /// leaves at `count` random points, each of length `len`.
    pub fn transnormality_defect(&self, rng: &mut SeededRng, count: usize, len: f64, step: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut launched = 0;
        let mut attempts = 0;
        while launched < count {
            attempts += 1;
            if attempts > 20 * count + 100 {
                return Err(Error::InsufficientSamples(format!("only {launched} of {count} horizontal launches succeeded")));
            }
            let x = self.manifold.sample_point(rng);
            let w = crate::sampling::gaussian_vector(rng, self.manifold.dim());
            let h = self.horizontal_project(&x, &w)?;
            let norm = self.manifold.norm(&x, &h);
            if norm < 1e-6 {
                continue;
            }
            let dir = h / norm;
            let (path, _) = match crate::geodesic::integrate_partial(&self.manifold, &x, &dir, 0.0, len, step) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if path.len() < 2 {
                continue;
            }
            worst = worst.max(self.horizontality(&path).max_defect);
            launched += 1;
        }
        Ok(worst)
    }
}
