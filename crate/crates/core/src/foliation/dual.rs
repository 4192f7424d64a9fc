//! Breadth-first exploration of a dual leaf by piecewise horizontal geodesics.

use super::FoliationSpec;
use crate::error::{Error, Result};
use crate::geodesic::{integrate_partial, GeodesicPath};
use crate::linalg::gram_schmidt;
use crate::manifold::Manifold;
use crate::sampling::{gaussian_vector, seeded};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Seed of the fixed reference net used for covering radii.
pub const REFERENCE_SEED: u64 = 0x005e_ed0f_d0a1;

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Maximum number of geodesic segments.
    pub budget: usize,
    pub segment_length: f64,
    pub step: f64,
    /// Arc-length spacing of recorded cloud points.
    pub record_spacing: f64,
    pub max_generations: usize,
    /// Random samples used to estimate the generic leaf rank.
    pub generic_samples: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { budget: 10_000, segment_length: PI, step: 1e-3, record_spacing: 0.02, max_generations: 8, generic_samples: 1000 }
    }
}

/// One horizontal geodesic piece of an exploration.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: DVector<f64>,
    pub direction: DVector<f64>,
    /// Length actually integrated (shorter than requested on domain exit).
    pub length: f64,
    pub generation: usize,
    /// Segment that produced the start point (`None` for the base point).
    pub parent: Option<usize>,
    pub exited: bool,
    /// Horizontality defect at the start and the maximum along the segment.
    pub start_defect: f64,
    pub max_defect: f64,
}

#[derive(Debug, Clone)]
pub struct DualLeafCloud {
    pub base: DVector<f64>,
    pub points: Vec<DVector<f64>>,
    /// Index of the segment that reached each point.
    pub point_segment: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Points detected on lower-rank (singular) leaves.
    pub singular_points: Vec<DVector<f64>>,
    pub generic_rank: usize,
    pub budget_used: usize,
    pub exhausted: bool,
}

#[derive(Clone)]
struct FrontierPoint {
    x: DVector<f64>,
    parent: Option<usize>,
    singular: bool,
}

struct Traced {
    segment: Segment,
    points: Vec<DVector<f64>>,
    end: Option<DVector<f64>>,
    singular: Vec<DVector<f64>>,
}

/// Direction net of `count` unit vectors in `R^d`.
fn direction_net(d: usize, count: usize) -> Vec<DVector<f64>> {
    match d {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                DVector::from_row_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    DVector::from_row_slice(&[rho * a.cos(), rho * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = seeded(d as u64);
            (0..count).map(|_| gaussian_vector(&mut rng, d).normalize()).collect()
        }
    }
}

/// Net size: the smallest power of two at least `√budget`, and at least 8.
fn net_size(budget: usize) -> usize {
    let target = (budget as f64).sqrt().ceil() as usize;
    target.next_power_of_two().max(8)
}

fn normal_basis(fol: &FoliationSpec, x: &DVector<f64>, singular: bool) -> Result<Vec<DVector<f64>>> {
    let m = &fol.manifold;
    let leaf = if singular { leaf_tangent_loose(fol, x)? } else { fol.leaf_tangent(x)? };
    let g = m.metric(x);
    let n = m.dim();
    let mut cands: Vec<DVector<f64>> = leaf.column_iter().map(|c| c.into_owned()).collect();
    let k = cands.len();
    cands.extend((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
    let basis = gram_schmidt(&cands, &g, 1e-8);
    Ok(basis[k.min(basis.len())..].to_vec())
}

/// Leaf tangent with a looser rank threshold, used at detected singular points.
fn leaf_tangent_loose(fol: &FoliationSpec, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = &fol.manifold;
    let g = m.metric(x);
    let lt = g.cholesky().ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))?.l().transpose();
    let w = &lt * fol.generator_matrix(x);
    let u = crate::linalg::range_basis(&w, 0.0, 1e-6);
    Ok(lt.try_inverse().expect("cholesky factor is invertible") * u)
}

/// `r`-th singular value of the generators in orthonormal coordinates.
fn rank_margin(fol: &FoliationSpec, x: &DVector<f64>, r: usize) -> f64 {
    if r == 0 {
        return f64::INFINITY;
    }
    let g = fol.manifold.metric(x);
    let Some(chol) = g.cholesky() else { return 0.0 };
    let w = chol.l().transpose() * fol.generator_matrix(x);
    let mut sv: Vec<f64> = w.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.get(r - 1).copied().unwrap_or(0.0)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    0.5 * (a + b)
}

fn trace_segment(fol: &FoliationSpec, start: &FrontierPoint, dir: &DVector<f64>, generation: usize, generic: usize, opts: &TraceOptions) -> Option<Traced> {
    let m = &fol.manifold;
    let (path, exit) = integrate_partial(m, &start.x, dir, 0.0, opts.segment_length, opts.step).ok()?;
    let samples = path.samples();
    if samples.len() < 2 {
        return None;
    }
    let stride = ((opts.record_spacing / opts.step).round() as usize).max(1);
    let mut idx: Vec<usize> = (1..samples.len()).step_by(stride).collect();
    if *idx.last().unwrap() != samples.len() - 1 {
        idx.push(samples.len() - 1);
    }
    let points: Vec<DVector<f64>> = idx.iter().map(|&k| samples[k].x.clone()).collect();
    let defects = fol.horizontality(&path).defects;
    let singular = find_singular(fol, &path, &idx, generic);
    let length = path.t1();
    Some(Traced {
        segment: Segment {
            start: start.x.clone(),
            direction: dir.clone(),
            length,
            generation,
            parent: start.parent,
            exited: exit.is_some(),
            start_defect: defects[0],
            max_defect: defects.iter().copied().fold(0.0, f64::max),
        },
        points,
        end: if exit.is_none() { Some(samples.last().unwrap().x.clone()) } else { None },
        singular,
    })
}

fn find_singular(fol: &FoliationSpec, path: &GeodesicPath, idx: &[usize], generic: usize) -> Vec<DVector<f64>> {
    if generic == 0 {
        return Vec::new();
    }
    let samples = path.samples();
    let mut knots = vec![0usize];
    knots.extend_from_slice(idx);
    let vals: Vec<f64> = knots.iter().map(|&k| rank_margin(fol, &samples[k].x, generic)).collect();
    let scale = vals.iter().copied().fold(0.0, f64::max).max(1e-300);
    let mut out = Vec::new();
    for i in 1..knots.len() {
        let left = vals[i - 1];
        let right = vals.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if !(vals[i] <= left && vals[i] < right) || vals[i] > 0.1 * scale {
            continue;
        }
        let (a, b) = (path.time(knots[i - 1]), path.time(*knots.get(i + 1).unwrap_or(&knots[i])));
        let f = |t: f64| path.evaluate(t).map(|(x, _)| rank_margin(fol, &x, generic)).unwrap_or(f64::INFINITY);
        let t = golden_min(f, a, b);
        if let Ok((x, _)) = path.evaluate(t) {
            if rank_margin(fol, &x, generic) <= 1e-6 * scale.max(1.0) {
                out.push(x);
            }
        }
    }
    out
}

fn point_distance(m: &Manifold, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    m.distance(x, y).unwrap_or_else(|| (x - y).norm())
}

/// Explores the dual leaf through `p`.
pub fn dual_leaf_trace(fol: &FoliationSpec, p: &DVector<f64>, opts: &TraceOptions) -> Result<DualLeafCloud> {
    let m = fol.manifold.clone();
    m.check_domain(p)?;
    if opts.budget == 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let mut rng = seeded(REFERENCE_SEED);
    let generic = fol.generic_rank(&mut rng, opts.generic_samples);
    let net = net_size(opts.budget);
    let base_singular = fol.leaf_rank(p)? < generic;
    // Segment lengths are rounded up to the grid, so revisits land within a step.
    let merge = 2.0 * opts.step;
    let mut frontier = vec![FrontierPoint { x: p.clone(), parent: None, singular: base_singular }];
    let mut visited: Vec<DVector<f64>> = vec![p.clone()];
    let mut cloud = DualLeafCloud {
        base: p.clone(),
        points: vec![p.clone()],
        point_segment: vec![usize::MAX],
        segments: Vec::new(),
        singular_points: Vec::new(),
        generic_rank: generic,
        budget_used: 0,
        exhausted: false,
    };
    if base_singular {
        cloud.singular_points.push(p.clone());
    }
    for generation in 0..opts.max_generations {
        if frontier.is_empty() {
            break;
        }
        let mut tasks: Vec<(usize, DVector<f64>)> = Vec::new();
        for (fi, f) in frontier.iter().enumerate() {
            let basis = normal_basis(fol, &f.x, f.singular)?;
            for c in direction_net(basis.len(), net) {
                let dir = basis.iter().zip(c.iter()).fold(DVector::zeros(m.dim()), |acc, (b, &w)| acc + b * w);
                let norm = m.norm(&f.x, &dir);
                tasks.push((fi, dir / norm));
            }
        }
        let remaining = opts.budget - cloud.budget_used;
        if tasks.len() > remaining {
            tasks.truncate(remaining);
            cloud.exhausted = true;
        }
        cloud.budget_used += tasks.len();
        let traced: Vec<Option<Traced>> = tasks
            .par_iter()
            .map(|(fi, dir)| trace_segment(fol, &frontier[*fi], dir, generation, generic, opts))
            .collect();
        let mut next = Vec::new();
        for t in traced.into_iter().flatten() {
            let seg_idx = cloud.segments.len();
            for x in &t.points {
                cloud.points.push(x.clone());
                cloud.point_segment.push(seg_idx);
            }
            let mut candidates: Vec<(DVector<f64>, bool)> = t.singular.iter().map(|x| (x.clone(), true)).collect();
            if let Some(e) = &t.end {
                candidates.push((e.clone(), false));
            }
            for (x, singular) in candidates {
                if singular && !cloud.singular_points.iter().any(|s| point_distance(&m, s, &x) < merge) {
                    cloud.singular_points.push(x.clone());
                }
                if visited.iter().any(|v| point_distance(&m, v, &x) < merge) {
                    continue;
                }
                visited.push(x.clone());
                next.push(FrontierPoint { x, parent: Some(seg_idx), singular });
            }
            cloud.segments.push(t.segment);
        }
        if cloud.exhausted {
            break;
        }
        frontier = next;
    }
    Ok(cloud)
}

/// Fixed reference net of `count` points on the manifold.
pub fn reference_net(m: &Manifold, count: usize) -> Vec<DVector<f64>> {
    let mut rng = seeded(REFERENCE_SEED);
    (0..count).map(|_| m.sample_point(&mut rng)).collect()
}

impl DualLeafCloud {
    /// Largest distance from a reference point to its nearest cloud point.
    pub fn covering_radius(&self, m: &Manifold, net: &[DVector<f64>]) -> Result<f64> {
        if let Some(ch) = m.chordal() {
            let cloud: Vec<DVector<f64>> = self.points.iter().map(|x| (ch.embed)(x)).collect();
            let worst = net
                .par_iter()
                .map(|q| {
                    let e = (ch.embed)(q);
                    cloud.iter().map(|c| c.iter().zip(e.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).fold(f64::INFINITY, f64::min)
                })
                .reduce(|| 0.0, f64::max);
            return Ok(ch.distance_from_chord(worst.sqrt()));
        }
        if m.distance(&self.base, &self.base).is_none() {
            return Err(Error::InsufficientSamples(format!("no closed-form distance on {}", m.label())));
        }
        let worst = net
            .par_iter()
            .map(|q| self.points.iter().map(|x| m.distance(q, x).unwrap()).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max);
        Ok(worst)
    }

    /// Segments from the base point to the segment that reached point `i`.
    pub fn chain(&self, i: usize) -> Vec<&Segment> {
        let mut out = Vec::new();
        let mut cur = self.point_segment.get(i).copied().filter(|&s| s != usize::MAX);
        while let Some(s) = cur {
            out.push(&self.segments[s]);
            cur = self.segments[s].parent;
        }
        out.reverse();
        out
    }

    /// Writes `point, segment, generation, x_1..x_p`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.base.len();
        let mut header = vec!["point".to_string(), "segment".to_string(), "generation".to_string()];
        header.extend((1..=p).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (i, x) in self.points.iter().enumerate() {
            let seg = self.point_segment[i];
            let (s, g) = if seg == usize::MAX { (String::from("-1"), String::from("-1")) } else { (seg.to_string(), self.segments[seg].generation.to_string()) };
            let mut row = vec![i.to_string(), s, g];
            row.extend(x.iter().map(|c| format!("{c:.17e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
