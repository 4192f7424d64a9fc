//! Vanishing ⊕ parallel decomposition of self-adjoint families in
//! nonnegative curvature.
//!
//! `V_span` is the span of all members with a zero in the search window and
//! `P_par` the span of the parallel members. Both are returned as orthonormal
//! coefficient bases (columns are combinations of the family members).

use crate::error::{Error, Result};
use crate::jacobi::JacobiFamily;
use crate::linalg::{complement, null_space, range_basis, spectral_norm, svd_full};
use crate::manifold::{sectional_from, Manifold};
use crate::report::ResidualReport;
use crate::sampling::{gaussian_vector, seeded};
use crate::transversal::{build_split, golden_min, sigma_min, SubfamilySpec, TransversalOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;

/// Singular values below this times the largest count as zero.
pub const NULL_THRESHOLD: f64 = 1e-7;
pub const DEFECT_TOL: f64 = 1e-6;
pub const RICCATI_TOL: f64 = 1e-5;
/// Sectional curvatures below this fail the hypothesis check.
pub const CURVATURE_FLOOR: f64 = -1e-8;
/// Local minima of `σ_min` above this fraction of the scale are not refined.
const CANDIDATE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct DecompositionOptions {
    /// Search window; `None` means the whole path.
    pub window: Option<(f64, f64)>,
    pub eps: f64,
    pub hypothesis_points: usize,
    pub hypothesis_planes: usize,
    pub seed: u64,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions { window: None, eps: NULL_THRESHOLD, hypothesis_points: 200, hypothesis_planes: 50, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub family: Arc<JacobiFamily>,
    pub window: (f64, f64),
    pub vanishing: DMatrix<f64>,
    pub parallel: DMatrix<f64>,
    /// `(dim V_span, dim P_par)`.
    pub dims: (usize, usize),
    /// `dim V_span + dim P_par − m`.
    pub dim_gap: i64,
    /// Cosine of the smallest principal angle between the two summands in the
    /// `L²` inner product of values over the window.
    pub direct_sum_defect: f64,
    pub orthogonality_defect: f64,
    /// `sup_t ‖L_{𝕁/𝕍}(t)‖`; `None` when `V_span` is the whole family.
    pub quotient_riccati: Option<f64>,
    pub min_sectional: f64,
}

fn node_range(family: &JacobiFamily, window: Option<(f64, f64)>) -> Result<(usize, usize)> {
    let path = family.path();
    let n_s = family.values.len();
    let Some((lo, hi)) = window else { return Ok((0, n_s - 1)) };
    if !(lo <= hi) || lo < path.t0() - 1e-12 || hi > path.t1() + 1e-12 {
        return Err(Error::OutOfRange { t: if lo < path.t0() { lo } else { hi }, t0: path.t0(), t1: path.t1() });
    }
    let k_lo = (0..n_s).find(|&k| path.time(k) >= lo - 1e-12).unwrap_or(n_s - 1);
    let k_hi = (0..n_s).rev().find(|&k| path.time(k) <= hi + 1e-12).unwrap_or(0);
    Ok((k_lo, k_hi.max(k_lo)))
}

fn value_scale(family: &JacobiFamily, lo: usize, hi: usize) -> f64 {
    family.values[lo..=hi].iter().map(spectral_norm).fold(0.0, f64::max)
}

/// Coefficient basis of the span of members vanishing somewhere in `window`.
///
/// Local minima of `σ_min(Y(t))` on the grid are refined on the interpolant;
/// at each refined zero the right singular vectors below `eps · scale` are
/// collected, `scale` being the largest singular value over the window.
pub fn vanishing_subfamily(family: &JacobiFamily, window: Option<(f64, f64)>, eps: f64) -> Result<DMatrix<f64>> {
    family.require_self_adjoint()?;
    let m = family.size();
    let (lo, hi) = node_range(family, window)?;
    let scale = value_scale(family, lo, hi);
    if scale == 0.0 {
        return Ok(DMatrix::identity(m, m));
    }
    let path = family.path();
    let smin: Vec<f64> = family.values.iter().map(sigma_min).collect();
    let f = |t: f64| family.value_at(t).map(|(y, _)| sigma_min(&y)).unwrap_or(f64::INFINITY);
    let mut found: Vec<nalgebra::DVector<f64>> = Vec::new();
    for k in lo..=hi {
        let left = if k > lo { smin[k - 1] } else { f64::INFINITY };
        let right = if k < hi { smin[k + 1] } else { f64::INFINITY };
        if !(smin[k] <= left && smin[k] < right && smin[k] <= CANDIDATE_LEVEL * scale) {
            continue;
        }
        let (t, val) = if k > lo && k < hi { golden_min(f, path.time(k - 1), path.time(k + 1)) } else { (path.time(k), smin[k]) };
        let (t, val) = if smin[k] <= val { (path.time(k), smin[k]) } else { (t, val) };
        if val > eps * scale {
            continue;
        }
        let (y, _) = family.value_at(t)?;
        let null = null_space(&y, eps * scale);
        found.extend(null.column_iter().map(|c| c.into_owned()));
    }
    if found.is_empty() {
        return Ok(DMatrix::zeros(m, 0));
    }
    Ok(range_basis(&DMatrix::from_columns(&found), 1e-6, 0.0))
}

/// Upper-triangular `R` with `Σ_k |Y_k c|² = |R c|²` over the node range.
fn value_metric(family: &JacobiFamily, lo: usize, hi: usize) -> DMatrix<f64> {
    let m = family.size();
    let rows = (hi - lo + 1) * m;
    let stacked = DMatrix::from_fn(rows, m, |r, c| family.values[lo + r / m][(r % m, c)]);
    stacked.qr().r()
}

/// Coefficient basis of the parallel members: the near-null space of the
/// stacked derivative samples relative to the stacked values, i.e.
/// combinations with `‖J'‖ ≤ eps · ‖J‖` in the `L²` sense over the window.
pub fn parallel_subfamily(family: &JacobiFamily, window: Option<(f64, f64)>, eps: f64) -> Result<DMatrix<f64>> {
    family.require_self_adjoint()?;
    let m = family.size();
    let (lo, hi) = node_range(family, window)?;
    let r = value_metric(family, lo, hi);
    let r_inv = r.clone().try_inverse().ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let rows = (hi - lo + 1) * m;
    let stacked = DMatrix::from_fn(rows, m, |i, c| family.derivs[lo + i / m][(i % m, c)]);
    let whitened = stacked * &r_inv;
    let null = null_space(&whitened, eps);
    if null.ncols() == 0 {
        return Ok(DMatrix::zeros(m, 0));
    }
    Ok(range_basis(&(r_inv * null), 1e-12, 0.0))
}

/// Orthonormal basis of `span(R b)` for a coefficient basis `b`.
fn whitened(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if b.ncols() == 0 {
        return DMatrix::zeros(r.nrows(), 0);
    }
    range_basis(&(r * b), 1e-12, 0.0)
}

fn principal_cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    svd_full(&(a.transpose() * b)).0.first().copied().unwrap_or(0.0)
}

fn orthogonality_defect(family: &JacobiFamily, v: &DMatrix<f64>, p: &DMatrix<f64>, lo: usize, hi: usize) -> f64 {
    if v.ncols() == 0 || p.ncols() == 0 {
        return 0.0;
    }
    let sup = |c: &DMatrix<f64>| -> Vec<f64> {
        (0..c.ncols())
            .map(|j| (lo..=hi).map(|k| (&family.values[k] * c.column(j)).norm()).fold(0.0, f64::max))
            .collect()
    };
    let (sv, sp) = (sup(v), sup(p));
    let mut worst = 0.0f64;
    for k in lo..=hi {
        let gram = (&family.values[k] * v).transpose() * (&family.values[k] * p);
        for i in 0..v.ncols() {
            for j in 0..p.ncols() {
                let denom = sv[i] * sp[j];
                if denom > 0.0 {
                    worst = worst.max(gram[(i, j)].abs() / denom);
                }
            }
        }
    }
    worst
}

/// `sup_t ‖L_{𝕁/𝕍}(t)‖` outside the singular windows of `𝕍`, with the
/// quotient represented by the transversal parts `Z = P_⊥ Y W` of an
/// `L²`-complement `W` and `∇^⊥ Z = P_⊥ Y' W − Â P_v Y W`.
fn quotient_riccati(family: &Arc<JacobiFamily>, v: &DMatrix<f64>, r: &DMatrix<f64>, lo: usize, hi: usize) -> Result<f64> {
    let m = family.size();
    let r_inv = r.clone().try_inverse().ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let w = r_inv * complement(&whitened(r, v), m);
    let spec = SubfamilySpec::new(family, v.clone())?;
    let split = build_split(family.clone(), &spec, TransversalOptions::default())?;
    let eye = DMatrix::<f64>::identity(m, m);
    let norms: Vec<f64> = (lo..=hi)
        .into_par_iter()
        .filter(|&k| !split.in_window(k))
        .map(|k| {
            let p_perp = split.projection(k);
            let p_v = &eye - &p_perp;
            let yw = &family.values[k] * &w;
            let z = &p_perp * &yw;
            let zd = &p_perp * (&family.derivs[k] * &w) - split.a_hat(k) * (&p_v * &yw);
            match z.clone().pseudo_inverse(1e-10 * spectral_norm(&z).max(1e-300)) {
                Ok(pinv) => spectral_norm(&(zd * pinv)),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Smallest sectional curvature over `planes` random planes at each of the
/// given points.
pub fn min_sectional_at(m: &Manifold, points: &[DVector<f64>], planes: usize, seed: u64) -> Result<f64> {
    let n = m.dim();
    let mut rng = seeded(seed);
    let pairs: Vec<Vec<_>> = points
        .iter()
        .map(|_| (0..planes).map(|_| (gaussian_vector(&mut rng, n), gaussian_vector(&mut rng, n))).collect())
        .collect();
    let mins = points
        .par_iter()
        .zip(pairs.par_iter())
        .map(|(x, planes)| -> Result<f64> {
            let r = m.riemann_tensor(x)?;
            let g = m.metric(x);
            let mut lo = f64::INFINITY;
            for (u, v) in planes {
                match sectional_from(&r, &g, u, v) {
                    Ok(s) => lo = lo.min(s),
                    Err(Error::DegeneratePlane { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(lo)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// [`min_sectional_at`] over `points` samples spread evenly along the path.
pub fn sample_min_sectional(family: &JacobiFamily, points: usize, planes: usize, seed: u64) -> Result<f64> {
    let path = family.path();
    let n_s = path.len();
    let xs: Vec<DVector<f64>> = (0..points.max(1))
        .map(|i| if points <= 1 { 0 } else { i * (n_s - 1) / (points - 1) })
        .map(|k| path.samples()[k].x.clone())
        .collect();
    min_sectional_at(path.manifold(), &xs, planes, seed)
}

/// Extracts both summands and measures how far they are from an orthogonal
/// direct sum with a parallel quotient. Negative sampled curvature is a
/// [`Error::NegativeCurvature`] (the statement does not apply).
pub fn verify_decomposition(family: &Arc<JacobiFamily>, opts: &DecompositionOptions) -> Result<DecompositionReport> {
    family.require_self_adjoint()?;
    let min_sectional = sample_min_sectional(family, opts.hypothesis_points, opts.hypothesis_planes, opts.seed)?;
    if min_sectional < CURVATURE_FLOOR {
        return Err(Error::NegativeCurvature { min_sectional });
    }
    let m = family.size();
    let (lo, hi) = node_range(family, opts.window)?;
    let vanishing = vanishing_subfamily(family, opts.window, opts.eps)?;
    let parallel = parallel_subfamily(family, opts.window, opts.eps)?;
    let r = value_metric(family, lo, hi);
    let dims = (vanishing.ncols(), parallel.ncols());
    let direct_sum_defect = principal_cosine(&whitened(&r, &vanishing), &whitened(&r, &parallel));
    let orthogonality_defect = orthogonality_defect(family, &vanishing, &parallel, lo, hi);
    let quotient_riccati = if dims.0 < m { Some(quotient_riccati(family, &vanishing, &r, lo, hi)?) } else { None };
    let path = family.path();
    Ok(DecompositionReport {
        family: family.clone(),
        window: (path.time(lo), path.time(hi)),
        vanishing,
        parallel,
        dims,
        dim_gap: (dims.0 + dims.1) as i64 - m as i64,
        direct_sum_defect,
        orthogonality_defect,
        quotient_riccati,
        min_sectional,
    })
}

impl DecompositionReport {
    pub fn checks(&self) -> Vec<ResidualReport> {
        let grid = format!("[{:.6},{:.6}] step {:e}", self.window.0, self.window.1, self.family.path().step());
        let mut out = Vec::new();
        let mut dims = ResidualReport::exact("dimension_sum", grid.clone(), self.dim_gap == 0);
        dims.max_residual = self.dim_gap.unsigned_abs() as f64;
        dims.components = vec![("vanishing".into(), self.dims.0 as f64), ("parallel".into(), self.dims.1 as f64)];
        out.push(dims);
        out.push(ResidualReport::at_most("direct_sum", grid.clone(), self.direct_sum_defect, DEFECT_TOL));
        out.push(ResidualReport::at_most("orthogonality", grid.clone(), self.orthogonality_defect, DEFECT_TOL));
        if let Some(q) = self.quotient_riccati {
            out.push(ResidualReport::at_most("quotient_riccati", grid, q, RICCATI_TOL));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    /// Structured text: dims, coefficient bases and the checks.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dims {} {}", self.dims.0, self.dims.1);
        let _ = writeln!(s, "min_sectional {:.6e}", self.min_sectional);
        for (name, b) in [("vanishing", &self.vanishing), ("parallel", &self.parallel)] {
            for c in b.column_iter() {
                let row: Vec<String> = c.iter().map(|x| format!("{x:.9e}")).collect();
                let _ = writeln!(s, "{name} {}", row.join(" "));
            }
        }
        for c in self.checks() {
            let _ = writeln!(s, "{}", c.record());
        }
        s
    }
}
