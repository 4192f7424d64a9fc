//! Vertical/transversal splitting of a self-adjoint family along a subfamily.
//!
//! Given a family `𝕁` and a subspace `𝕍 ⊆ 𝕁`, the vertical space at `t` is
//! spanned by the values of `𝕍` together with derivatives of the members that
//! vanish at `t`; the transversal space is its orthogonal complement inside
//! `ċ^⊥`. Everything is stored in normal-frame coefficients, where the
//! covariant derivative is the plain derivative.
//!
//! The A-operator is kept as the basis-free matrix `Â = P_⊥ V' V⁺` acting on
//! the whole normal space (it vanishes on the transversal space). Within a few
//! steps of a zero of a `𝕍`-field the pseudo-inverse is ill-conditioned, so
//! there `Â` is continued by polynomial interpolation from both sides.

use crate::error::{Error, Result};
use crate::jacobi::{JacobiFamily, JacobiField, RANK_RATIO};
use crate::linalg::{complement, procrustes_align, singular_ratio, spectral_norm, stencil_d1, stencil_d2, svd_full};
use crate::report::ResidualReport;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub mod cases;
pub use cases::{for_each_case, lagrangian_graph_data, CaseOptions, DrawStats, TransversalCase};

/// Relative level below which a local minimum of `σ_min` is refined as a
/// candidate zero.
const CANDIDATE_LEVEL: f64 = 0.05;
/// Relative level at which a refined minimum counts as a zero of a `𝕍`-field.
const ZERO_LEVEL: f64 = 1e-6;
/// Spacing of probe candidates in samples.
const PROBE_STRIDE: usize = 20;
/// Default tolerance of the transversal Jacobi residual.
pub const TRANSVERSAL_TOL: f64 = 1e-5;
/// Default tolerance of the value and frame identities.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Lower bound on the eigenvalues of `3AA*`.
pub const PSD_TOL: f64 = -1e-10;

/// A subspace `𝕍` of a family, given by coefficients of a basis of `𝕍` in the
/// family basis (one column per basis field).
#[derive(Debug, Clone, PartialEq)]
pub struct SubfamilySpec {
    coeffs: DMatrix<f64>,
}

impl SubfamilySpec {
    pub fn new(family: &JacobiFamily, coeffs: DMatrix<f64>) -> Result<Self> {
        let m = family.size();
        if coeffs.nrows() != m {
            return Err(Error::Subfamily(format!("coefficient matrix has {} rows, family has {m} members", coeffs.nrows())));
        }
        if coeffs.ncols() > m {
            return Err(Error::Subfamily(format!("subfamily of dimension {} exceeds family size {m}", coeffs.ncols())));
        }
        let ratio = singular_ratio(&coeffs);
        if coeffs.ncols() > 0 && ratio < RANK_RATIO {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(Self { coeffs })
    }

    /// The span of the listed family members.
    pub fn members(family: &JacobiFamily, indices: &[usize]) -> Result<Self> {
        let m = family.size();
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::Subfamily(format!("member index {bad} out of range for family of size {m}")));
        }
        let coeffs = DMatrix::from_fn(m, indices.len(), |i, j| if indices[j] == i { 1.0 } else { 0.0 });
        Self::new(family, coeffs)
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }
}

/// Tunable parameters of the split and its residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalOptions {
    /// Stencil spacing in units of the path step.
    pub stencil_factor: usize,
    /// Half-width of singular windows in units of the path step.
    pub window_half_width: usize,
    /// Also evaluate residuals at window nodes.
    pub include_windows: bool,
    /// `Â` is evaluated directly at parameters at least this many steps away
    /// from every zero and continued from neighbouring nodes closer in.
    pub continuation_gap: usize,
}

impl Default for TransversalOptions {
    fn default() -> Self {
        Self { stencil_factor: 2, window_half_width: 5, include_windows: false, continuation_gap: 2 }
    }
}

/// A run of samples around zeros of `𝕍`-fields, left out of residual maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularWindow {
    /// Parameters of the zeros inside the window.
    pub zeros: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub k_lo: usize,
    pub k_hi: usize,
}

/// One sample of [`TransversalSplit::residual_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub k: usize,
    pub t: f64,
    pub residual: f64,
    /// Residual with the `3AA*` term dropped.
    pub control: f64,
    /// Spectral norm of `Â` at the sample.
    pub a_norm: f64,
    pub in_window: bool,
}

/// Per-sample splitting `T^v ⊕ T^⊥` with the A-operator and a ⊥-parallel
/// frame.
#[derive(Debug, Clone)]
pub struct TransversalSplit {
    family: Arc<JacobiFamily>,
    coeffs: DMatrix<f64>,
    opts: TransversalOptions,
    vertical: Vec<DMatrix<f64>>,
    transversal: Vec<DMatrix<f64>>,
    a_nodes: Vec<DMatrix<f64>>,
    a_mid: Vec<DMatrix<f64>>,
    zeros: Vec<f64>,
    windows: Vec<SingularWindow>,
    window_of: Vec<Option<usize>>,
    parallel: Vec<DMatrix<f64>>,
    scale: f64,
}

/// `Â = P_⊥ Vd Vv⁺` from values and derivatives of a basis of `𝕍`.
fn local_a(vv: &DMatrix<f64>, vd: &DMatrix<f64>) -> DMatrix<f64> {
    let m = vv.nrows();
    if vv.ncols() == 0 {
        return DMatrix::zeros(m, m);
    }
    let (sv, u, w) = svd_full(vv);
    let d = vv.ncols();
    let u = u.columns(0, d).into_owned();
    let inv = DMatrix::from_fn(d, d, |i, j| if i == j && sv[i] > 0.0 { 1.0 / sv[i] } else { 0.0 });
    let pinv = &w * inv * u.transpose();
    let p_perp = DMatrix::identity(m, m) - &u * u.transpose();
    p_perp * vd * pinv
}

pub(crate) fn sigma_min(vv: &DMatrix<f64>) -> f64 {
    if vv.ncols() == 0 {
        return f64::INFINITY;
    }
    vv.singular_values().min()
}

/// Minimises `f` on `[a, b]` by golden-section search.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Lagrange polynomial through (t, matrix) anchors, evaluated at `t`.
fn lagrange(anchors: &[(f64, &DMatrix<f64>)], t: f64) -> DMatrix<f64> {
    let n = anchors.len();
    let mut out = DMatrix::zeros(anchors[0].1.nrows(), anchors[0].1.ncols());
    for i in 0..n {
        let mut w = 1.0;
        for j in 0..n {
            if i != j {
                w *= (t - anchors[j].0) / (anchors[i].0 - anchors[j].0);
            }
        }
        out += anchors[i].1 * w;
    }
    out
}

fn orthonormalize(cols: &[DVector<f64>], m: usize) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for c in cols {
        let mut w = c.clone();
        for _ in 0..2 {
            for e in &out {
                let p = e.dot(&w);
                w -= e * p;
            }
        }
        let n = w.norm();
        if n > 0.0 {
            out.push(w / n);
        }
    }
    if out.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

/// Builds the split of `family` along the subspace `spec`.
pub fn build_split(family: Arc<JacobiFamily>, spec: &SubfamilySpec, opts: TransversalOptions) -> Result<TransversalSplit> {
    family.require_self_adjoint()?;
    if spec.coeffs.nrows() != family.size() {
        return Err(Error::Subfamily(format!(
            "coefficient matrix has {} rows, family has {} members",
            spec.coeffs.nrows(),
            family.size()
        )));
    }
    let c = spec.coeffs.clone();
    let path = family.path().clone();
    let n_s = family.values.len();
    let m = family.size();
    let d = c.ncols();
    let h = path.step();

    let vv: Vec<DMatrix<f64>> = family.values.iter().map(|y| y * &c).collect();
    let vd: Vec<DMatrix<f64>> = family.derivs.iter().map(|y| y * &c).collect();
    let smin: Vec<f64> = vv.iter().map(sigma_min).collect();
    let scale = vv.iter().map(spectral_norm).fold(0.0, f64::max);

    // Zeros of 𝕍-fields: refined local minima of σ_min.
    let mut zeros = Vec::new();
    if d > 0 && scale > 0.0 {
        let f = |t: f64| family.value_at(t).map(|(y, _)| sigma_min(&(y * &c))).unwrap_or(f64::INFINITY);
        for k in 0..n_s {
            let left = if k > 0 { smin[k - 1] } else { f64::INFINITY };
            let right = if k + 1 < n_s { smin[k + 1] } else { f64::INFINITY };
            if !(smin[k] <= left && smin[k] < right && smin[k] <= CANDIDATE_LEVEL * scale) {
                continue;
            }
            let (a, b) = (path.time(k.saturating_sub(1)), path.time((k + 1).min(n_s - 1)));
            let (t, val) = golden_min(f, a, b);
            let (t, val) = if smin[k] <= val { (path.time(k), smin[k]) } else { (t, val) };
            if val <= ZERO_LEVEL * scale {
                zeros.push(t);
            }
        }
    }

    // Windows of half-width `window_half_width · h`, merged when they touch.
    let half = opts.window_half_width as f64 * h * (1.0 + 1e-9);
    let mut windows: Vec<SingularWindow> = Vec::new();
    for &z in &zeros {
        let k_lo = (0..n_s).find(|&k| path.time(k) >= z - half).unwrap_or(n_s - 1);
        let k_hi = (0..n_s).rev().find(|&k| path.time(k) <= z + half).unwrap_or(0).max(k_lo);
        match windows.last_mut() {
            Some(w) if k_lo <= w.k_hi + 1 => {
                w.k_hi = w.k_hi.max(k_hi);
                w.hi = path.time(w.k_hi);
                w.zeros.push(z);
            }
            _ => windows.push(SingularWindow { zeros: vec![z], lo: path.time(k_lo), hi: path.time(k_hi), k_lo, k_hi }),
        }
    }
    let mut window_of = vec![None; n_s];
    for (i, w) in windows.iter().enumerate() {
        for slot in &mut window_of[w.k_lo..=w.k_hi] {
            *slot = Some(i);
        }
    }
    if let Some(k) = (0..n_s).find(|&k| window_of[k].is_none() && smin[k] <= RANK_RATIO * scale) {
        return Err(Error::RankCollapse { t: path.time(k) });
    }

    // Vertical bases: values of 𝕍 plus derivatives along collapsed directions.
    let mut vertical = Vec::with_capacity(n_s);
    for k in 0..n_s {
        if d == 0 {
            vertical.push(DMatrix::zeros(m, 0));
            continue;
        }
        let (sv, u, w) = svd_full(&vv[k]);
        let cols: Vec<DVector<f64>> = (0..d)
            .map(|i| if sv[i] > RANK_RATIO * scale { u.column(i).into_owned() } else { &vd[k] * w.column(i) })
            .collect();
        vertical.push(orthonormalize(&cols, m));
    }
    let transversal_raw: Vec<DMatrix<f64>> = vertical.iter().map(|b| complement(b, m)).collect();
    let align = |raw: Vec<DMatrix<f64>>| -> Vec<DMatrix<f64>> {
        let o = path.origin();
        let mut out = raw.clone();
        for k in o + 1..n_s {
            out[k] = procrustes_align(&raw[k], &out[k - 1]);
        }
        for k in (0..o).rev() {
            out[k] = procrustes_align(&raw[k], &out[k + 1]);
        }
        out
    };
    let vertical = align(vertical);
    let transversal = align(transversal_raw);

    let mut split = TransversalSplit {
        family: family.clone(),
        coeffs: c.clone(),
        opts,
        vertical,
        transversal,
        a_nodes: Vec::new(),
        a_mid: Vec::new(),
        zeros,
        windows,
        window_of,
        parallel: Vec::new(),
        scale,
    };

    let mut a_nodes: Vec<DMatrix<f64>> = (0..n_s).map(|k| local_a(&vv[k], &vd[k])).collect();
    split.a_nodes = a_nodes.clone();
    for k in 0..n_s {
        if split.near_zero(path.time(k)).is_some() {
            a_nodes[k] = split.continued(path.time(k));
        }
    }
    let mut a_mid = Vec::with_capacity(n_s.saturating_sub(1));
    for k in 0..n_s.saturating_sub(1) {
        let t = 0.5 * (path.time(k) + path.time(k + 1));
        a_mid.push(if split.near_zero(t).is_some() {
            split.continued(t)
        } else {
            let (y, yp) = family.value_at(t)?;
            local_a(&(y * &c), &(yp * &c))
        });
    }
    split.a_nodes = a_nodes;
    split.a_mid = a_mid;
    split.parallel = split.integrate_parallel();
    Ok(split)
}

impl TransversalSplit {
    pub fn family(&self) -> &Arc<JacobiFamily> {
        &self.family
    }

    pub fn options(&self) -> &TransversalOptions {
        &self.opts
    }

    pub fn len(&self) -> usize {
        self.vertical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertical.is_empty()
    }

    /// Dimension of `𝕍`.
    pub fn subfamily_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Largest singular value of the `𝕍` value map over the path.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn time(&self, k: usize) -> f64 {
        self.family.path().time(k)
    }

    pub fn windows(&self) -> &[SingularWindow] {
        &self.windows
    }

    pub fn in_window(&self, k: usize) -> bool {
        self.window_of[k].is_some()
    }

    /// Orthonormal basis of `T^v` at sample `k` (frame coefficients).
    pub fn vertical(&self, k: usize) -> &DMatrix<f64> {
        &self.vertical[k]
    }

    /// Orthonormal basis of `T^⊥` at sample `k`.
    pub fn transversal(&self, k: usize) -> &DMatrix<f64> {
        &self.transversal[k]
    }

    /// `|P_⊥ y|` at sample `k`.
    pub fn transversal_norm(&self, k: usize, y: &DVector<f64>) -> f64 {
        (self.transversal[k].transpose() * y).norm()
    }

    /// Orthogonal projection onto `T^⊥` at sample `k`.
    pub fn projection(&self, k: usize) -> DMatrix<f64> {
        let b = &self.transversal[k];
        b * b.transpose()
    }

    /// `Â` at sample `k` acting on the whole normal space.
    pub fn a_hat(&self, k: usize) -> &DMatrix<f64> {
        &self.a_nodes[k]
    }

    /// Matrix of `A_{t_k}: T^v → T^⊥` in the stored bases.
    pub fn a_matrix(&self, k: usize) -> DMatrix<f64> {
        self.transversal[k].transpose() * &self.a_nodes[k] * &self.vertical[k]
    }

    /// `Â` at an arbitrary parameter; continued near zeros of `𝕍`-fields.
    pub fn a_operator(&self, t: f64) -> Result<DMatrix<f64>> {
        self.family.path().index_at(t)?;
        if self.near_zero(t).is_some() {
            return Ok(self.continued(t));
        }
        let (y, yp) = self.family.value_at(t)?;
        Ok(local_a(&(y * &self.coeffs), &(yp * &self.coeffs)))
    }

    /// ⊥-parallel orthonormal frame `X_1..X_q` at sample `k` (columns).
    pub fn parallel_frame(&self, k: usize) -> &DMatrix<f64> {
        &self.parallel[k]
    }

    /// Quadratic form `Xᵀ(K + 3ÂÂᵀ)X` of the modified curvature operator in
    /// the ⊥-parallel frame.
    pub fn modified_curvature(&self, k: usize) -> DMatrix<f64> {
        let x = &self.parallel[k];
        let a = &self.a_nodes[k];
        let op = self.family.frame().curvature(k) + a * a.transpose() * 3.0;
        x.transpose() * op * x
    }

    fn grid(&self) -> String {
        let p = self.family.path();
        format!("t in [{:.6},{:.6}] step {:.1e}", p.t0(), p.t1(), p.step())
    }

    /// Parameters where a `𝕍`-field vanishes.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// Index of a zero closer than `continuation_gap` steps to `t`.
    fn near_zero(&self, t: f64) -> Option<usize> {
        let reach = self.opts.continuation_gap as f64 * self.family.path().step() * (1.0 - 1e-9);
        self.zeros.iter().position(|&z| (t - z).abs() < reach)
    }

    /// `Â` near the zero cluster around `t`: degree-5 interpolation through
    /// three direct nodes on each side, or one-sided quadratic extrapolation
    /// when the cluster touches an end of the path.
    fn continued(&self, t: f64) -> DMatrix<f64> {
        let h = self.family.path().step();
        let gap = self.opts.continuation_gap as f64 * h;
        let link = (2.0 * gap + 6.0 * h) * (1.0 + 1e-9);
        let i = self.near_zero(t).unwrap_or(0);
        let (mut lo, mut hi) = (i, i);
        while lo > 0 && self.zeros[lo] - self.zeros[lo - 1] <= link {
            lo -= 1;
        }
        while hi + 1 < self.zeros.len() && self.zeros[hi + 1] - self.zeros[hi] <= link {
            hi += 1;
        }
        let (zmin, zmax) = (self.zeros[lo], self.zeros[hi]);
        let n_s = self.len();
        let tol = 1e-9 * h;
        let left: Vec<usize> = match (0..n_s).rev().find(|&k| self.time(k) <= zmin - gap + tol) {
            Some(k) if k >= 2 => vec![k - 2, k - 1, k],
            _ => Vec::new(),
        };
        let right: Vec<usize> = match (0..n_s).find(|&k| self.time(k) >= zmax + gap - tol) {
            Some(k) if k + 2 < n_s => vec![k, k + 1, k + 2],
            _ => Vec::new(),
        };
        let anchors: Vec<usize> = match (left.is_empty(), right.is_empty()) {
            (false, false) => left.into_iter().chain(right).collect(),
            (false, true) => left,
            (true, false) => right,
            (true, true) => {
                let m = self.family.size();
                return DMatrix::zeros(m, m);
            }
        };
        let pts: Vec<(f64, &DMatrix<f64>)> = anchors.iter().map(|&k| (self.time(k), &self.a_nodes[k])).collect();
        lagrange(&pts, t)
    }

    /// RK4 for `X' = −ÂᵀX` from the transversal basis at the origin.
    fn integrate_parallel(&self) -> Vec<DMatrix<f64>> {
        let path = self.family.path();
        let n_s = self.len();
        let o = path.origin();
        let h = path.step();
        let mut xs = vec![DMatrix::zeros(0, 0); n_s];
        xs[o] = self.transversal[o].clone();
        let rhs = |a: &DMatrix<f64>, x: &DMatrix<f64>| -(a.transpose() * x);
        let step = |x: &DMatrix<f64>, a0: &DMatrix<f64>, am: &DMatrix<f64>, a1: &DMatrix<f64>, h: f64| {
            let k1 = rhs(a0, x);
            let k2 = rhs(am, &(x + &k1 * (0.5 * h)));
            let k3 = rhs(am, &(x + &k2 * (0.5 * h)));
            let k4 = rhs(a1, &(x + &k3 * h));
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        };
        for k in o..n_s.saturating_sub(1) {
            xs[k + 1] = step(&xs[k], &self.a_nodes[k], &self.a_mid[k], &self.a_nodes[k + 1], h);
        }
        for k in (1..=o).rev() {
            xs[k - 1] = step(&xs[k], &self.a_nodes[k], &self.a_mid[k - 1], &self.a_nodes[k - 1], -h);
        }
        xs
    }

    fn evaluable(&self, k: usize) -> bool {
        self.opts.include_windows || !self.in_window(k)
    }

    fn excluded(&self) -> Vec<(f64, f64)> {
        if self.opts.include_windows {
            Vec::new()
        } else {
            self.windows.iter().map(|w| (w.lo, w.hi)).collect()
        }
    }

    /// Structural invariants: dimension count, orthonormality of both bases,
    /// their mutual orthogonality and the ⊥-parallel frame staying
    /// orthonormal and transversal.
    pub fn invariant_report(&self) -> ResidualReport {
        let m = self.family.size();
        let mut dims_ok = true;
        let (mut basis, mut mutual, mut frame_gram, mut frame_leak) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for k in 0..self.len() {
            let (v, t) = (&self.vertical[k], &self.transversal[k]);
            dims_ok &= v.ncols() + t.ncols() == m && v.ncols() == self.subfamily_dim();
            basis = basis
                .max((v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())).amax())
                .max((t.transpose() * t - DMatrix::identity(t.ncols(), t.ncols())).amax());
            if v.ncols() > 0 && t.ncols() > 0 {
                mutual = mutual.max((v.transpose() * t).amax());
            }
            let x = &self.parallel[k];
            if x.ncols() > 0 {
                frame_gram = frame_gram.max((x.transpose() * x - DMatrix::identity(x.ncols(), x.ncols())).amax());
                if v.ncols() > 0 {
                    frame_leak = frame_leak.max((v.transpose() * x).amax());
                }
            }
        }
        let value = basis.max(mutual);
        let mut r = ResidualReport::at_most("split_invariants", self.grid(), value, 1e-9);
        r.passed = dims_ok && value <= 1e-9 && frame_gram.max(frame_leak) <= IDENTITY_TOL;
        r.evaluated = self.len();
        r.components = vec![
            ("dims_ok".into(), if dims_ok { 1.0 } else { 0.0 }),
            ("basis_orthonormality".into(), basis),
            ("mutual_orthogonality".into(), mutual),
            ("frame_orthonormality".into(), frame_gram),
            ("frame_leak".into(), frame_leak),
        ];
        r
    }

    /// The value identity `(J̃')^v = Â* J̃` for Jacobi fields of `𝕁` horizontal
    /// at `t`, and the frame identity `X' = −Â*X`, as maxima over samples
    /// outside singular windows.
    pub fn eq1_residual(&self) -> ResidualReport {
        let n_s = self.len();
        let m = self.family.size();
        let d = self.subfamily_dim();
        let c = &self.coeffs;
        let comp = {
            let (_, u, _) = if d > 0 { svd_full(c) } else { (Vec::new(), DMatrix::zeros(m, 0), DMatrix::zeros(0, 0)) };
            complement(&u.columns(0, d).into_owned(), m)
        };
        let mut value_res = 0.0f64;
        let mut evaluated = 0;
        for j in 0..comp.ncols() {
            let cj = comp.column(j).into_owned();
            let norm = (0..n_s)
                .map(|k| (&self.family.values[k] * &cj).norm() + (&self.family.derivs[k] * &cj).norm())
                .fold(0.0, f64::max);
            if norm == 0.0 {
                continue;
            }
            for k in (0..n_s).filter(|&k| !self.in_window(k)) {
                let y = &self.family.values[k] * &cj;
                let yp = &self.family.derivs[k] * &cj;
                let vv = &self.family.values[k] * c;
                let vd = &self.family.derivs[k] * c;
                let bv = &self.vertical[k];
                let pv_y = bv * (bv.transpose() * &y);
                let coef = if d > 0 { pseudo_solve(&vv, &pv_y) } else { DVector::zeros(0) };
                let jt = &y - &pv_y;
                let jtp = &yp - &vd * coef;
                let lhs = bv * (bv.transpose() * &jtp);
                let rhs = self.a_nodes[k].transpose() * &jt;
                value_res = value_res.max((lhs - rhs).norm() / norm);
                evaluated += 1;
            }
        }
        // Spacing h for the frame derivative.
        let s = 1;
        let h = self.family.path().step();
        let mut frame_res = 0.0f64;
        let mut trimmed = 0;
        for k in 0..n_s {
            if k < 2 * s || k + 2 * s >= n_s {
                trimmed += 1;
                continue;
            }
            let ks = [k - 2 * s, k - s, k, k + s, k + 2 * s];
            if ks.iter().any(|&i| self.in_window(i)) {
                continue;
            }
            let x = &self.parallel[k];
            let rhs = -(self.a_nodes[k].transpose() * x);
            let fd = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| stencil_d1(ks.map(|q| self.parallel[q][(i, j)]), s as f64 * h));
            frame_res = frame_res.max((fd - rhs).amax());
            evaluated += 1;
        }
        let mut r = ResidualReport::at_most("eq1", self.grid(), value_res.max(frame_res), IDENTITY_TOL);
        r.evaluated = evaluated;
        r.trimmed = trimmed;
        r.excluded = self.windows.iter().map(|w| (w.lo, w.hi)).collect();
        r.components = vec![("value_identity".into(), value_res), ("frame_identity".into(), frame_res)];
        r
    }

    /// Pointwise residual of the transversal Jacobi equation
    /// `(∇^⊥)²Y + (R(Y,ċ)ċ)^⊥ + 3AA*Y = 0` for `Y = J^⊥`, relative to
    /// `max_t|Y|`, at every sample that admits the stencil.
    pub fn residual_profile(&self, field: &JacobiField) -> Result<Vec<ResidualSample>> {
        if !Arc::ptr_eq(field.frame(), self.family.frame()) {
            return Err(Error::Subfamily("field lives on a different normal frame than the family".into()));
        }
        self.check_independent(field)?;
        let n_s = self.len();
        let s = self.opts.stencil_factor.max(1);
        let h = self.family.path().step();
        let scale = (0..n_s).map(|k| self.transversal_norm(k, &field.values[k])).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::Subfamily("transversal part of the field vanishes identically".into()));
        }
        let coords: Vec<DVector<f64>> = (0..n_s).map(|k| self.parallel[k].transpose() * &field.values[k]).collect();
        let mut out = Vec::with_capacity(n_s);
        for k in 2 * s..n_s.saturating_sub(2 * s) {
            let x = &self.parallel[k];
            let q = x.ncols();
            let d2 = DVector::from_fn(q, |i, _| stencil_d2([k - 2 * s, k - s, k, k + s, k + 2 * s].map(|j| coords[j][i]), s as f64 * h));
            let y = self.projection(k) * &field.values[k];
            let a = &self.a_nodes[k];
            let curv = x.transpose() * (self.family.frame().curvature(k) * &y);
            let oneill = x.transpose() * (a * (a.transpose() * &y)) * 3.0;
            out.push(ResidualSample {
                k,
                t: self.time(k),
                residual: (&d2 + &curv + oneill).norm() / scale,
                control: (&d2 + &curv).norm() / scale,
                a_norm: spectral_norm(a),
                in_window: self.in_window(k),
            });
        }
        Ok(out)
    }

    /// Maximum of [`Self::residual_profile`] outside singular windows (or
    /// everywhere with `include_windows`), with the control maximum that
    /// drops the `3AA*` term.
    pub fn transversal_residual(&self, field: &JacobiField) -> Result<ResidualReport> {
        let profile = self.residual_profile(field)?;
        let s = self.opts.stencil_factor.max(1);
        let n_s = self.len();
        let trimmed = (0..n_s).filter(|&k| self.evaluable(k) && (k < 2 * s || k + 2 * s >= n_s)).count();
        let used: Vec<&ResidualSample> = profile.iter().filter(|p| self.opts.include_windows || !p.in_window).collect();
        if used.is_empty() {
            return Err(Error::InsufficientSamples(format!(
                "no sample admits a 5-point stencil of spacing {s}·step outside singular windows ({n_s} samples)"
            )));
        }
        let res = used.iter().map(|p| p.residual).fold(0.0, f64::max);
        let ctrl = used.iter().map(|p| p.control).fold(0.0, f64::max);
        let sup_a = used.iter().map(|p| p.a_norm).fold(0.0, f64::max);
        let mut r = ResidualReport::at_most("transversal_jacobi", self.grid(), res, TRANSVERSAL_TOL);
        r.evaluated = used.len();
        r.trimmed = trimmed;
        r.excluded = self.excluded();
        r.control = Some(ctrl);
        r.components = vec![("sup_a".into(), sup_a)];
        Ok(r)
    }

    /// A member of `𝕁` on which the `3AA*` term is prominent: among fields
    /// whose value at some sample `t_k` is the unit vector most amplified by
    /// `Â_k Â_kᵀ`, the one maximising `3σ_max(Â_k)² / max_t|J^⊥|`. Candidates
    /// are taken every `PROBE_STRIDE` samples where the residual is evaluated.
    /// Falls back to a member orthogonal to the subfamily coefficients when
    /// `Â` vanishes.
    pub fn oneill_probe(&self) -> JacobiField {
        let fam = &self.family;
        let m = fam.size();
        let mut best: Option<(f64, DVector<f64>)> = None;
        let n_s = self.len();
        let reach = 2 * self.opts.stencil_factor.max(1);
        for k in (reach..n_s.saturating_sub(reach)).step_by(PROBE_STRIDE).filter(|&k| !self.in_window(k)) {
            let a = &self.a_nodes[k];
            let (sv, u, _) = svd_full(a);
            let sigma = sv.first().copied().unwrap_or(0.0);
            if sigma <= 0.0 {
                continue;
            }
            let target = u.column(0).into_owned();
            let c = pseudo_solve(&fam.values[k], &target);
            if (&fam.values[k] * &c - &target).norm() > 1e-6 {
                continue;
            }
            let peak = (0..n_s).map(|j| self.transversal_norm(j, &(&fam.values[j] * &c))).fold(0.0, f64::max);
            if peak == 0.0 {
                continue;
            }
            let score = 3.0 * sigma * sigma / peak;
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, c));
            }
        }
        let c = best.map(|(_, c)| c).unwrap_or_else(|| {
            let d = self.subfamily_dim();
            let basis = if d > 0 { svd_full(&self.coeffs).1.columns(0, d).into_owned() } else { DMatrix::zeros(m, 0) };
            complement(&basis, m).column(0).into_owned()
        });
        fam.combination(&c)
    }

    /// `3AA*` is positive semidefinite at every sample.
    pub fn oneill_psd_check(&self) -> ResidualReport {
        let (mut min_eig, mut max_eig) = (f64::INFINITY, 0.0f64);
        for a in &self.a_nodes {
            let op = a * a.transpose() * 3.0;
            let sym = (&op + op.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            min_eig = min_eig.min(eig.min());
            max_eig = max_eig.max(eig.max());
        }
        if self.a_nodes.is_empty() || self.family.size() == 0 {
            min_eig = 0.0;
        }
        let mut r = ResidualReport::at_least("oneill_psd", self.grid(), min_eig, PSD_TOL);
        r.evaluated = self.len();
        r.components = vec![("max_eigenvalue".into(), max_eig)];
        r
    }

    fn check_independent(&self, field: &JacobiField) -> Result<()> {
        let fam = &self.family;
        let o = fam.path().origin();
        let m = fam.size();
        let d = self.subfamily_dim();
        let mut stacked = DMatrix::zeros(2 * m, d + 1);
        for j in 0..d {
            let c = self.coeffs.column(j);
            stacked.view_mut((0, j), (m, 1)).copy_from(&(&fam.values[o] * c));
            stacked.view_mut((m, j), (m, 1)).copy_from(&(&fam.derivs[o] * c));
        }
        stacked.view_mut((0, d), (m, 1)).copy_from(&field.values[o]);
        stacked.view_mut((m, d), (m, 1)).copy_from(&field.derivs[o]);
        let ratio = singular_ratio(&stacked);
        if ratio < RANK_RATIO {
            return Err(Error::Subfamily(format!("field lies in the subfamily (singular value ratio {ratio:e})")));
        }
        Ok(())
    }
}

/// Minimum-norm solution of `A x = b`.
fn pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (sv, u, w) = svd_full(a);
    let d = a.ncols();
    let smax = sv.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(d);
    for i in 0..d.min(u.ncols()) {
        if sv[i] > 1e-14 * smax {
            x += w.column(i) * (u.column(i).dot(b) / sv[i]);
        }
    }
    x
}

#[cfg(test)]
mod tests;
