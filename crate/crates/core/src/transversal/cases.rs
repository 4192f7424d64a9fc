//! Randomized (geodesic, family, subfamily) cases for the residual battery.

use super::{build_split, SubfamilySpec, TransversalOptions, TransversalSplit};
use crate::error::{Error, Result};
use crate::geodesic::integrate_geodesic_window;
use crate::jacobi::{JacobiFamily, JacobiField, NormalFrame};
use crate::manifold::Manifold;
use crate::sampling::{gaussian_vector, uniform, SeededRng};
use nalgebra::DMatrix;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct CaseOptions {
    /// Paths run over `[−half_length, half_length]`.
    pub half_length: f64,
    pub step: f64,
    /// Families drawn along each random geodesic.
    pub draws_per_path: usize,
    /// Cases with `sup |A|` above this (outside windows) are redrawn.
    pub a_max: f64,
    /// Give up after this many attempts per requested case.
    pub attempts_per_case: usize,
    pub transversal: TransversalOptions,
}

impl Default for CaseOptions {
    fn default() -> Self {
        CaseOptions { half_length: 1.0, step: 1e-3, draws_per_path: 5, a_max: 1.5, attempts_per_case: 20, transversal: TransversalOptions::default() }
    }
}

pub struct TransversalCase {
    pub split: TransversalSplit,
    pub probe: JacobiField,
    pub sup_a: f64,
    pub vanishing: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DrawStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Lagrangian graph data `Y0 = Q cos Θ`, `Y0' = Q sin Θ` with `|θ| ≤ π/4`,
/// except the first `vanishing` columns which get `θ = π/2`.
pub fn lagrangian_graph_data(rng: &mut SeededRng, m: usize, vanishing: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let gauss = DMatrix::from_columns(&(0..m).map(|_| gaussian_vector(rng, m)).collect::<Vec<_>>());
    let q = gauss.qr().q();
    let th: Vec<f64> = (0..m).map(|i| if i < vanishing { FRAC_PI_2 } else { uniform(rng, -FRAC_PI_4, FRAC_PI_4) }).collect();
    let y0 = DMatrix::from_fn(m, m, |i, j| q[(i, j)] * th[j].cos());
    let y0p = DMatrix::from_fn(m, m, |i, j| q[(i, j)] * th[j].sin());
    (y0, y0p)
}

fn pick(rng: &mut SeededRng, n: usize) -> usize {
    ((uniform(rng, 0.0, n as f64)) as usize).min(n - 1)
}

fn draw_one(fr: &Arc<NormalFrame>, rng: &mut SeededRng, opts: &CaseOptions) -> Result<Option<TransversalCase>> {
    let m = fr.rank();
    let vanishing = pick(rng, m + 1);
    let (y0, y0p) = lagrangian_graph_data(rng, m, vanishing);
    let fam = Arc::new(JacobiFamily::from_frame_data(fr, y0, y0p)?);
    let d = if m == 1 { 0 } else { 1 + pick(rng, m - 1) };
    let coeffs = DMatrix::from_fn(m, d, |_, _| gaussian_vector(rng, 1)[0]);
    let spec = SubfamilySpec::new(&fam, coeffs)?;
    let split = build_split(fam, &spec, opts.transversal)?;
    let sup_a = (0..split.len()).filter(|&k| !split.in_window(k)).map(|k| split.a_hat(k).norm()).fold(0.0, f64::max);
    if sup_a > opts.a_max {
        return Ok(None);
    }
    let probe = split.oneill_probe();
    Ok(Some(TransversalCase { split, probe, sup_a, vanishing }))
}

/// Draws `count` cases on `manifold` and hands each to `visit`. Geodesics start
/// at sampled points in random unit directions; cases whose `sup |A|` exceeds
/// `a_max` are rejected and redrawn.
pub fn for_each_case(
    manifold: &Arc<Manifold>,
    rng: &mut SeededRng,
    count: usize,
    opts: &CaseOptions,
    mut visit: impl FnMut(TransversalCase) -> Result<()>,
) -> Result<DrawStats> {
    let mut stats = DrawStats::default();
    let budget = count * opts.attempts_per_case.max(1);
    let mut attempts = 0;
    while stats.accepted < count {
        let x0 = manifold.sample_point(rng);
        let dir = gaussian_vector(rng, manifold.dim());
        let dir = &dir / manifold.norm(&x0, &dir);
        let path = integrate_geodesic_window(manifold, &x0, &dir, -opts.half_length, opts.half_length, opts.step)?;
        let fr = Arc::new(NormalFrame::new(Arc::new(path))?);
        for _ in 0..opts.draws_per_path {
            if stats.accepted == count {
                break;
            }
            attempts += 1;
            if attempts > budget {
                return Err(Error::InsufficientSamples(format!(
                    "only {} of {count} cases accepted after {budget} draws",
                    stats.accepted
                )));
            }
            match draw_one(&fr, rng, opts)? {
                Some(case) => {
                    stats.accepted += 1;
                    visit(case)?;
                }
                None => stats.rejected += 1,
            }
        }
    }
    Ok(stats)
}
