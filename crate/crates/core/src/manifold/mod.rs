//! Evaluatable Riemannian manifolds.
//!
//! Two backends are supported: coordinate charts ([`ChartManifold`]) whose
//! connection and curvature are assembled from metric derivatives, and
//! left-invariant frames on Lie groups ([`FrameManifold`]) with constant
//! structure coefficients. Products compose backends block-diagonally.
//!
//! Tangent vectors are always given by their components in the backend's
//! natural basis: coordinate vectors for charts, the global frame for frame
//! manifolds. Conventions: `Γ^k_ij` is the `k`-th component of `∇_{∂_i} ∂_j`,
//! and `R(u,v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w`, so that the sectional
//! curvature is `⟨R(u,v)v, u⟩ / |u∧v|²`.

mod catalog;
mod chart;
mod frame;

pub use catalog::{builtin_manifold, parse_manifold_spec, product, stereographic_from_ambient, stereographic_to_ambient, su2_structure, STEREO_MARGIN};
pub use chart::{ChartManifold, Chordal, DistanceFn, EmbedFn, DomainFn, MetricD1Fn, MetricD2Fn, MetricFn, SamplerFn};
pub use frame::{FrameGroup, FrameManifold};

use crate::error::{Error, Result};
use crate::sampling::{gaussian_vector, SeededRng};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Connection coefficients `Γ^k_ij`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.n + i) * self.n + j] = value;
    }

    /// Components of `Γ(u, w) = Γ^k_ij u^i w^j`.
    pub fn contract(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    acc += self.get(k, i, j) * u[i] * w[j];
                }
            }
            acc
        })
    }

    fn embed(&mut self, other: &Christoffel, offset: usize) {
        let m = other.n;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    self.set(k + offset, i + offset, j + offset, other.get(k, i, j));
                }
            }
        }
    }
}

/// Curvature tensor `R^l_ijk`: the `l`-th component of `R(∂_i, ∂_j)∂_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannTensor {
    n: usize,
    data: Vec<f64>,
}

impl RiemannTensor {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.data[((l * n + i) * n + j) * n + k]
    }

    #[inline]
    pub fn set(&mut self, l: usize, i: usize, j: usize, k: usize, value: f64) {
        let n = self.n;
        self.data[((l * n + i) * n + j) * n + k] = value;
    }

    /// `R(u, v)w` in components.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let uv = u[i] * v[j];
                if uv == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let c = uv * w[k];
                    if c == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        out[l] += self.get(l, i, j, k) * c;
                    }
                }
            }
        }
        out
    }

    fn embed(&mut self, other: &RiemannTensor, offset: usize) {
        let m = other.n;
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        self.set(l + offset, i + offset, j + offset, k + offset, other.get(l, i, j, k));
                    }
                }
            }
        }
    }
}

/// A Riemannian manifold backend.
#[derive(Debug, Clone)]
pub enum Manifold {
    Chart(ChartManifold),
    Frame(FrameManifold),
    Product { a: Box<Manifold>, b: Box<Manifold>, label: String },
}

impl Manifold {
    /// Intrinsic dimension `n` (length of tangent component vectors).
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Chart(c) => c.dim,
            Manifold::Frame(f) => f.dim,
            Manifold::Product { a, b, .. } => a.dim() + b.dim(),
        }
    }

    /// Length of the point representation (equals `dim` except for groups
    /// realised in an ambient space, e.g. unit quaternions).
    pub fn point_dim(&self) -> usize {
        match self {
            Manifold::Chart(c) => c.dim,
            Manifold::Frame(f) => f.group.point_dim(f.dim),
            Manifold::Product { a, b, .. } => a.point_dim() + b.point_dim(),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Manifold::Chart(c) => &c.label,
            Manifold::Frame(f) => &f.label,
            Manifold::Product { label, .. } => label,
        }
    }

    /// Copy whose chart curvature is assembled from finite-differenced metric
    /// derivatives instead of the analytic ones.
    pub fn finite_difference_variant(&self) -> Manifold {
        match self {
            Manifold::Chart(c) => {
                Manifold::Chart(ChartManifold { metric_d1: None, metric_d2: None, label: format!("{}-fd", c.label), ..c.clone() })
            }
            Manifold::Frame(_) => self.clone(),
            Manifold::Product { a, b, label } => Manifold::Product {
                a: Box::new(a.finite_difference_variant()),
                b: Box::new(b.finite_difference_variant()),
                label: format!("{label}-fd"),
            },
        }
    }

    /// Largest relative violation of the curvature symmetries (antisymmetry,
    /// first Bianchi identity, pair symmetry, skew-adjointness) on random
    /// vectors at `x`.
    pub fn curvature_symmetry_defect(&self, x: &DVector<f64>, rng: &mut SeededRng) -> Result<f64> {
        let n = self.dim();
        let r = self.riemann_tensor(x)?;
        let g = self.metric(x);
        let (a, b, c, d) = (gaussian_vector(rng, n), gaussian_vector(rng, n), gaussian_vector(rng, n), gaussian_vector(rng, n));
        let ip = |p: &DVector<f64>, q: &DVector<f64>| p.dot(&(&g * q));
        let rabc = r.apply(&a, &b, &c);
        let scale = r.data.iter().fold(1.0_f64, |s, x| s.max(x.abs())) * a.norm() * b.norm() * c.norm() * d.norm().max(1.0);
        let anti = (&rabc + r.apply(&b, &a, &c)).norm();
        let bianchi = (&rabc + r.apply(&b, &c, &a) + r.apply(&c, &a, &b)).norm();
        let pair = (ip(&rabc, &d) - ip(&r.apply(&c, &d, &a), &b)).abs();
        let skew = (ip(&rabc, &d) + ip(&r.apply(&a, &b, &d), &c)).abs();
        Ok([anti, bianchi, pair, skew].into_iter().fold(0.0, f64::max) / scale)
    }

    /// Whether the catalog advertises the manifold as nonnegatively curved.
    pub fn advertised_nonnegative(&self) -> bool {
        match self {
            Manifold::Chart(c) => c.nonnegative,
            Manifold::Frame(_) => true,
            Manifold::Product { a, b, .. } => a.advertised_nonnegative() && b.advertised_nonnegative(),
        }
    }

    fn split_point(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            Manifold::Product { a, .. } => {
                let pa = a.point_dim();
                Some((x.rows(0, pa).into_owned(), x.rows(pa, x.len() - pa).into_owned()))
            }
            _ => None,
        }
    }

    fn split_tangent(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self {
            Manifold::Product { a, .. } => {
                let na = a.dim();
                (v.rows(0, na).into_owned(), v.rows(na, v.len() - na).into_owned())
            }
            _ => unreachable!("split_tangent on a non-product"),
        }
    }

    pub fn in_domain(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.point_dim() || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            Manifold::Chart(c) => (c.domain)(x),
            Manifold::Frame(f) => f.in_domain(x),
            Manifold::Product { a, b, .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                a.in_domain(&xa) && b.in_domain(&xb)
            }
        }
    }

    pub fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { label: self.label().to_string(), point: x.iter().copied().collect() })
        }
    }

    /// Metric matrix `g_ij` at `x` in the backend basis.
    pub fn metric(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Manifold::Chart(c) => (c.metric)(x),
            Manifold::Frame(f) => f.frame_metric.clone(),
            Manifold::Product { a, b, .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                block_diag(&a.metric(&xa), &b.metric(&xb))
            }
        }
    }

    pub fn inner(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(self.metric(x) * v))
    }

    pub fn norm(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.inner(x, u, u).max(0.0).sqrt()
    }

    /// Levi-Civita connection coefficients at `x`.
    pub fn christoffel(&self, x: &DVector<f64>) -> Result<Christoffel> {
        self.check_domain(x)?;
        self.christoffel_unchecked(x)
    }

    pub(crate) fn christoffel_unchecked(&self, x: &DVector<f64>) -> Result<Christoffel> {
        match self {
            Manifold::Chart(c) => c.christoffel(x),
            Manifold::Frame(f) => Ok(f.christoffel.clone()),
            Manifold::Product { a, b, .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let mut out = Christoffel::zeros(self.dim());
                out.embed(&a.christoffel_unchecked(&xa)?, 0);
                out.embed(&b.christoffel_unchecked(&xb)?, a.dim());
                Ok(out)
            }
        }
    }

    /// Full curvature tensor at `x`.
    pub fn riemann_tensor(&self, x: &DVector<f64>) -> Result<RiemannTensor> {
        self.check_domain(x)?;
        self.riemann_unchecked(x)
    }

    fn riemann_unchecked(&self, x: &DVector<f64>) -> Result<RiemannTensor> {
        match self {
            Manifold::Chart(c) => c.riemann(x),
            Manifold::Frame(f) => Ok(f.riemann.clone()),
            Manifold::Product { a, b, .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let mut out = RiemannTensor::zeros(self.dim());
                out.embed(&a.riemann_unchecked(&xa)?, 0);
                out.embed(&b.riemann_unchecked(&xb)?, a.dim());
                Ok(out)
            }
        }
    }

    /// `R(u, v)w` at `x`.
    pub fn riemann(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.riemann_tensor(x)?.apply(u, v, w))
    }

    /// Sectional curvature of the plane spanned by `u` and `v`.
    pub fn sectional(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let r = self.riemann_tensor(x)?;
        let g = self.metric(x);
        sectional_from(&r, &g, u, v)
    }

    /// Velocity of the point representation when moving with tangent `v`.
    pub fn position_rate(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Manifold::Chart(_) => v.clone(),
            Manifold::Frame(f) => f.group.position_rate(x, v),
            Manifold::Product { .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let (va, vb) = self.split_tangent(v);
                let (a, b) = self.factors();
                concat(&a.position_rate(&xa, &va), &b.position_rate(&xb, &vb))
            }
        }
    }

    /// A smooth curve `s ↦ displace(x, v, s)` through `x` with initial
    /// velocity `v` (straight line in a chart, one-parameter subgroup
    /// translate in a group).
    pub fn displace(&self, x: &DVector<f64>, v: &DVector<f64>, s: f64) -> DVector<f64> {
        match self {
            Manifold::Chart(_) => x + v * s,
            Manifold::Frame(f) => f.group.displace(x, v, s),
            Manifold::Product { .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let (va, vb) = self.split_tangent(v);
                let (a, b) = self.factors();
                concat(&a.displace(&xa, &va, s), &b.displace(&xb, &vb, s))
            }
        }
    }

    /// Frame contribution to the Lie bracket, `c_ij^k u^i w^j` (zero in
    /// coordinate charts).
    pub fn bracket_term(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self {
            Manifold::Chart(c) => DVector::zeros(c.dim),
            Manifold::Frame(f) => f.bracket(u, w),
            Manifold::Product { .. } => {
                let (ua, ub) = self.split_tangent(u);
                let (wa, wb) = self.split_tangent(w);
                let (a, b) = self.factors();
                concat(&a.bracket_term(&ua, &wa), &b.bracket_term(&ub, &wb))
            }
        }
    }

    /// Re-projects a point onto its representation constraint (unit
    /// quaternions); identity for charts.
    pub fn normalize_point(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Manifold::Chart(_) => x.clone(),
            Manifold::Frame(f) => f.group.normalize(x),
            Manifold::Product { .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let (a, b) = self.factors();
                concat(&a.normalize_point(&xa), &b.normalize_point(&xb))
            }
        }
    }

    /// Approximate tangent vector at `x` pointing to the nearby point `y`
    /// (first-order inverse of [`Manifold::displace`]).
    pub fn log_approx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Manifold::Chart(_) => y - x,
            Manifold::Frame(f) => f.group.log_approx(x, y, f.dim),
            Manifold::Product { .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let (ya, yb) = self.split_point(y).unwrap();
                let (a, b) = self.factors();
                concat(&a.log_approx(&xa, &ya), &b.log_approx(&xb, &yb))
            }
        }
    }

    /// Uniformly distributed-ish sample point inside the domain.
    pub fn sample_point(&self, rng: &mut SeededRng) -> DVector<f64> {
        match self {
            Manifold::Chart(c) => (c.sampler)(rng),
            Manifold::Frame(f) => f.group.sample(rng, f.dim),
            Manifold::Product { a, b, .. } => concat(&a.sample_point(rng), &b.sample_point(rng)),
        }
    }

    /// Closed-form Riemannian distance where the catalog provides one.
    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        match self {
            Manifold::Chart(c) => c.distance.as_ref().map(|d| d(x, y)),
            Manifold::Frame(f) => f.distance(x, y),
            Manifold::Product { a, b, .. } => {
                let (xa, xb) = self.split_point(x).unwrap();
                let (ya, yb) = self.split_point(y).unwrap();
                let da = a.distance(&xa, &ya)?;
                let db = b.distance(&xb, &yb)?;
                Some((da * da + db * db).sqrt())
            }
        }
    }

    /// Chordal embedding (see [`Chordal`]) where the catalog provides one.
    pub fn chordal(&self) -> Option<Chordal> {
        match self {
            Manifold::Chart(c) => c.chordal.clone(),
            Manifold::Frame(f) => {
                let round = (&f.frame_metric - DMatrix::identity(f.dim, f.dim)).amax() < 1e-15;
                (round && f.group == FrameGroup::Su2).then(|| Chordal { embed: Arc::new(|x: &DVector<f64>| x.normalize()), radius: 1.0 })
            }
            Manifold::Product { .. } => None,
        }
    }

    /// Whether the manifold is compact (all factors compact).
    pub fn is_compact(&self) -> bool {
        match self {
            Manifold::Chart(c) => c.compact,
            Manifold::Frame(f) => matches!(f.group, FrameGroup::Su2),
            Manifold::Product { a, b, .. } => a.is_compact() && b.is_compact(),
        }
    }

    pub fn factors(&self) -> (&Manifold, &Manifold) {
        match self {
            Manifold::Product { a, b, .. } => (a, b),
            _ => panic!("factors() on a non-product manifold"),
        }
    }

    /// Covariant derivative of a vector field `w(s)` along a curve with
    /// velocity `v`, given the component derivative `dw`.
    pub fn covariant_rate(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>, dw: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(dw + self.christoffel_unchecked(x)?.contract(v, w))
    }

    /// Cholesky factor check of positive definiteness at `x`.
    pub fn metric_is_positive_definite(&self, x: &DVector<f64>) -> bool {
        let g = self.metric(x);
        (&g - g.transpose()).amax() <= 1e-12 * g.amax().max(1.0) && g.cholesky().is_some()
    }

    /// Orthonormal basis (columns) of `T_x M` with respect to `g`.
    pub fn orthonormal_basis(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = self.metric(x);
        let chol = g.clone().cholesky().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        // g = L Lᵀ, so the columns of L⁻ᵀ are g-orthonormal.
        let l_inv_t = chol.l().transpose().try_inverse().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?;
        Ok(l_inv_t)
    }
}

/// Sectional curvature from a curvature tensor and metric.
pub fn sectional_from(r: &RiemannTensor, g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let uu = u.dot(&(g * u));
    let vv = v.dot(&(g * v));
    let uv = u.dot(&(g * v));
    let gram = uu * vv - uv * uv;
    let threshold = 1e-12 * uu * vv;
    if !(gram > threshold) {
        return Err(Error::DegeneratePlane { gram, threshold });
    }
    let rvv = r.apply(u, v, v);
    Ok(rvv.dot(&(g * u)) / gram)
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

pub(crate) fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

#[cfg(test)]
mod tests;
