//! The acceptance battery: seven criteria evaluated end to end.
//!
//! Every criterion yields a list of checks. Wall-clock times are kept out of
//! the rendered report so that a fixed seed gives identical bytes.

use crate::config::RunConfig;
use crate::decomposition::{verify_decomposition, DecompositionOptions};
use crate::error::{Error, Result};
use crate::foliation::{
    accessibility_rank, builtin_foliation, dual_leaf_trace, flat_check, reference_net, sphere_rotation, FlatOptions, TraceOptions,
    VectorField,
};
use crate::geodesic::{integrate_geodesic, integrate_geodesic_window};
use crate::jacobi::{family_from_foliation, family_from_killing, JacobiFamily, NormalFrame};
use crate::linalg::spectral_norm;
use crate::manifold::{parse_manifold_spec, Manifold};
use crate::report::{Report, ResidualReport};
use crate::sampling::seeded;
use crate::transversal::{build_split, for_each_case, lagrangian_graph_data, CaseOptions, SubfamilySpec, TransversalOptions, TransversalSplit};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Manifolds of the transversal battery.
pub const BATTERY: [&str; 6] = [
    "euclidean(3)",
    "sphere(2,1)",
    "sphere(3,1)",
    "product(sphere(2,1),euclidean(1))",
    "product(sphere(2,1),euclidean(2))",
    "berger_sphere(0.8)",
];

pub const CRITERIA: [(usize, &str); 7] = [
    (1, "transversal_residual"),
    (2, "eq1_identities"),
    (3, "hopf_oneill"),
    (4, "decomposition"),
    (5, "dual_leaf_consistency"),
    (6, "flats"),
    (7, "infrastructure"),
];

/// Wall-clock budget of the transversal battery.
pub const BATTERY_BUDGET: Duration = Duration::from_secs(60);
/// `sup |A|` from which the control residual must stay large.
pub const CONTROL_A_LEVEL: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub step: f64,
    pub cases_per_manifold: usize,
    pub config: RunConfig,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 2024, step: 1e-3, cases_per_manifold: 50, config: RunConfig::default() }
    }
}

impl SuiteOptions {
    pub fn from_config(config: &RunConfig) -> Self {
        let mut opts = SuiteOptions { config: config.clone(), ..SuiteOptions::default() };
        if let Some(seed) = config.seed {
            opts.seed = seed;
        }
        if let Some(step) = config.geodesic.step {
            opts.step = step;
        }
        opts
    }

    fn tol(&self, name: &str) -> f64 {
        self.config.tolerance(name)
    }
}

#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub checks: Vec<ResidualReport>,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl Criterion {
    fn new(id: usize) -> Self {
        let name = CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, n)| *n).unwrap_or("unknown");
        Criterion { id, name, checks: Vec::new(), notes: Vec::new(), elapsed: Duration::ZERO }
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// One-line verdict, e.g. `criterion 4 decomposition: pass (36/36 checks)`.
    pub fn line(&self) -> String {
        let ok = self.checks.iter().filter(|c| c.passed).count();
        format!(
            "criterion {} {}: {} ({ok}/{} checks)",
            self.id,
            self.name,
            if self.passed() { "pass" } else { "FAIL" },
            self.checks.len()
        )
    }

    fn push(&mut self, mut check: ResidualReport, label: &str) {
        check.check = format!("{}[{label}]", check.check);
        self.checks.push(check);
    }

    fn fail(&mut self, check: &str, label: &str, err: &Error) {
        self.push(ResidualReport::exact(check, "-", false), label);
        self.notes.push(format!("{check}[{label}] error: {err}"));
    }
}

fn arc(spec: &str) -> Result<Arc<Manifold>> {
    Ok(Arc::new(parse_manifold_spec(spec)?))
}

fn unit_dir(m: &Manifold, x: &DVector<f64>, w: &[f64]) -> DVector<f64> {
    let w = DVector::from_row_slice(w);
    let n = m.norm(x, &w);
    w / n
}

fn frame_on(m: &Arc<Manifold>, x0: &[f64], dir: &[f64], t0: f64, t1: f64, step: f64) -> Result<Arc<NormalFrame>> {
    let x0 = DVector::from_row_slice(x0);
    let d = unit_dir(m, &x0, dir);
    let path = integrate_geodesic_window(m, &x0, &d, t0, t1, step)?;
    Ok(Arc::new(NormalFrame::new(Arc::new(path))?))
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: randomized transversal battery.

#[derive(Debug, Clone, Default)]
struct Tally {
    worst_residual: f64,
    worst_eq1: f64,
    worst_invariant: f64,
    invariants_ok: bool,
    min_control: Option<f64>,
    qualified: usize,
    min_psd: f64,
    evaluated: usize,
    accepted: usize,
    rejected: usize,
    error: Option<Error>,
}

fn tally_manifold(spec: &str, seed: u64, count: usize, step: f64) -> Tally {
    let mut t = Tally { invariants_ok: true, min_psd: f64::INFINITY, ..Tally::default() };
    let m = match arc(spec) {
        Ok(m) => m,
        Err(e) => {
            t.error = Some(e);
            return t;
        }
    };
    let mut rng = seeded(seed);
    let opts = CaseOptions { step, ..CaseOptions::default() };
    let result = for_each_case(&m, &mut rng, count, &opts, |case| {
        let split = &case.split;
        let r = split.transversal_residual(&case.probe)?;
        t.worst_residual = t.worst_residual.max(r.max_residual);
        t.evaluated += r.evaluated;
        if case.sup_a >= CONTROL_A_LEVEL {
            t.qualified += 1;
            let c = r.control.unwrap_or(0.0);
            t.min_control = Some(t.min_control.map_or(c, |m: f64| m.min(c)));
        }
        t.worst_eq1 = t.worst_eq1.max(split.eq1_residual().max_residual);
        let inv = split.invariant_report();
        t.worst_invariant = t.worst_invariant.max(inv.max_residual);
        t.invariants_ok &= inv.passed;
        t.min_psd = t.min_psd.min(split.oneill_psd_check().max_residual);
        Ok(())
    });
    match result {
        Ok(stats) => {
            t.accepted = stats.accepted;
            t.rejected = stats.rejected;
        }
        Err(e) => t.error = Some(e),
    }
    t
}

/// Criteria 1 and 2 share one randomized battery.
pub fn transversal_battery(opts: &SuiteOptions) -> (Criterion, Criterion) {
    let start = Instant::now();
    let tallies: Vec<Tally> = BATTERY
        .par_iter()
        .enumerate()
        .map(|(i, spec)| tally_manifold(spec, opts.seed.wrapping_add(i as u64), opts.cases_per_manifold, opts.step))
        .collect();
    let elapsed = start.elapsed();
    let (mut c1, mut c2) = (Criterion::new(1), Criterion::new(2));
    let grid = format!("t in [-1,1] step {:.1e}", opts.step);
    for (spec, t) in BATTERY.iter().zip(&tallies) {
        if let Some(e) = &t.error {
            c1.fail("cases", spec, e);
            c2.fail("cases", spec, e);
            continue;
        }
        let mut r = ResidualReport::at_most("transversal", grid.clone(), t.worst_residual, opts.tol("transversal"));
        r.evaluated = t.evaluated;
        r.components = vec![("cases".into(), t.accepted as f64), ("rejected".into(), t.rejected as f64)];
        c1.push(r, spec);
        let mut ctrl = match t.min_control {
            Some(c) => ResidualReport::at_least("control", grid.clone(), c, opts.tol("control")),
            None => ResidualReport::exact("control", grid.clone(), true),
        };
        ctrl.components = vec![("qualified".into(), t.qualified as f64)];
        c1.push(ctrl, spec);
        c1.push(ResidualReport::at_least("oneill_psd", grid.clone(), t.min_psd, opts.tol("psd")), spec);
        c2.push(ResidualReport::at_most("eq1", grid.clone(), t.worst_eq1, opts.tol("identity")), spec);
        let mut inv = ResidualReport::exact("split_invariants", grid.clone(), t.invariants_ok);
        inv.max_residual = t.worst_invariant;
        c2.push(inv, spec);
        c1.notes.push(format!("{spec}: {} cases, {} redrawn with sup|A| > {}", t.accepted, t.rejected, CaseOptions::default().a_max));
    }
    c1.checks.push(ResidualReport::exact("runtime_within_60s", "battery", elapsed <= BATTERY_BUDGET));
    c1.elapsed = elapsed;
    c2.elapsed = elapsed;
    (c1, c2)
}

// ---------------------------------------------------------------------------
// Criterion 3: Hopf O'Neill cross-check.

/// Modified curvature `K(X, Y) + 3|A_X Y|²` of the horizontal plane of the
/// Berger sphere, computed from the structure constants alone: Milnor's
/// principal Ricci curvatures give the sectional curvature and
/// `A_X Y = ½ [X, Y]^v`.
pub fn berger_oracle(eps: f64) -> f64 {
    // Orthonormal frame f1 = e1/ε, f2 = e2, f3 = e3 with [f2, f3] = λ1 f1 etc.
    let (l1, l2, l3) = (2.0 * eps, 2.0 / eps, 2.0 / eps);
    let half = 0.5 * (l1 + l2 + l3);
    let (mu1, mu2, mu3) = (half - l1, half - l2, half - l3);
    let (r1, r2, r3) = (2.0 * mu2 * mu3, 2.0 * mu1 * mu3, 2.0 * mu1 * mu2);
    let k23 = 0.5 * (r2 + r3 - r1);
    let a = 0.5 * l1;
    k23 + 3.0 * a * a
}

fn killing_split(frame: Arc<NormalFrame>, field: VectorField) -> Result<TransversalSplit> {
    let fam = Arc::new(family_from_killing(&frame, &[field])?);
    let spec = SubfamilySpec::members(&fam, &[0])?;
    build_split(fam, &spec, TransversalOptions::default())
}

/// Hopf subspace on the stereographic round 3-sphere: the Hopf field is the
/// sum of the rotations in the ambient `(0,1)` and `(2,3)` planes, and the
/// geodesic runs along the chart's unit sphere.
pub fn hopf_chart_split(step: f64) -> Result<TransversalSplit> {
    let m = arc("sphere(3,1)")?;
    let (a, b) = (sphere_rotation(3, 1.0, 0, 1), sphere_rotation(3, 1.0, 2, 3));
    let hopf = VectorField::new("hopf", move |x: &DVector<f64>| a.at(x) + b.at(x));
    killing_split(frame_on(&m, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], -1.0, 1.0, step)?, hopf)
}

/// Fibre subspace on `berger_sphere(ε)` along a horizontal geodesic.
pub fn berger_split(eps: f64, step: f64) -> Result<TransversalSplit> {
    let m = arc(&format!("berger_sphere({eps})"))?;
    let fibre = VectorField::new("e1", |_| DVector::from_row_slice(&[1.0, 0.0, 0.0]));
    killing_split(frame_on(&m, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.6, 0.8], -1.0, 1.0, step)?, fibre)
}

/// Largest deviation of the quotient's modified curvature from `target`.
pub fn quotient_curvature_error(split: &TransversalSplit, target: f64) -> f64 {
    (0..split.len())
        .filter(|&k| !split.in_window(k))
        .map(|k| {
            let mc = split.modified_curvature(k);
            let n = mc.nrows();
            spectral_norm(&(mc - DMatrix::identity(n, n) * target))
        })
        .fold(0.0, f64::max)
}

pub fn hopf_criterion(opts: &SuiteOptions) -> Criterion {
    let start = Instant::now();
    let mut c = Criterion::new(3);
    let grid = format!("t in [-1,1] step {:.1e}", opts.step);
    match hopf_chart_split(opts.step) {
        Ok(split) => c.push(ResidualReport::at_most("modified_curvature", grid.clone(), quotient_curvature_error(&split, 4.0), 1e-5), "round_s3_chart"),
        Err(e) => c.fail("modified_curvature", "round_s3_chart", &e),
    }
    for eps in [0.6, 0.8, 1.0] {
        let label = format!("berger_sphere({eps})");
        let oracle = berger_oracle(eps);
        match berger_split(eps, opts.step) {
            Ok(split) => {
                let mut r = ResidualReport::at_most("modified_curvature", grid.clone(), quotient_curvature_error(&split, oracle), 1e-5);
                r.components = vec![("oracle".into(), oracle)];
                c.push(r, &label);
            }
            Err(e) => c.fail("modified_curvature", &label, &e),
        }
    }
    c.elapsed = start.elapsed();
    c
}

// ---------------------------------------------------------------------------
// Criterion 4: decomposition on foliation and Killing families.

/// A family over `[−4π, 4π]` built from a catalog foliation or from Killing fields.
#[derive(Debug, Clone)]
pub struct DecompositionCase {
    pub name: &'static str,
    pub manifold: &'static str,
    /// Catalog foliation, or `None` for the flat translation family.
    pub foliation: Option<&'static str>,
    pub start: &'static [f64],
    pub direction: &'static [f64],
    pub expected: Option<(usize, usize)>,
}

pub const DECOMPOSITION_CASES: [DecompositionCase; 9] = [
    DecompositionCase { name: "s2xr_fibres", manifold: "product(sphere(2,1),euclidean(1))", foliation: Some("fiber_product"), start: &[1.0, 0.0, 0.0], direction: &[0.0, 1.0, 0.0], expected: Some((1, 1)) },
    DecompositionCase { name: "s3_conjugate", manifold: "sphere(3,1)", foliation: Some("point_foliation"), start: &[1.0, 0.0, 0.0], direction: &[0.0, 1.0, 0.0], expected: Some((2, 0)) },
    DecompositionCase { name: "flat_translations", manifold: "euclidean(3)", foliation: None, start: &[0.0, 0.0, 0.0], direction: &[1.0, 0.0, 0.0], expected: Some((0, 2)) },
    DecompositionCase { name: "s2_rotation", manifold: "sphere(2,1)", foliation: Some("so2_on_sphere"), start: &[0.0, 1.0], direction: &[1.0, 0.0], expected: None },
    DecompositionCase { name: "s2xr2_fibres", manifold: "product(sphere(2,1),euclidean(2))", foliation: Some("fiber_product"), start: &[1.0, 0.0, 0.0, 0.0], direction: &[0.0, 1.0, 0.0, 0.0], expected: None },
    DecompositionCase { name: "s2xr_slices", manifold: "product(sphere(2,1),euclidean(1))", foliation: Some("slice_product"), start: &[0.3, -0.2, 0.0], direction: &[0.0, 0.0, 1.0], expected: None },
    DecompositionCase { name: "round_s3_hopf", manifold: "berger_sphere(1)", foliation: Some("hopf_on_s3"), start: &[1.0, 0.0, 0.0, 0.0], direction: &[0.0, 1.0, 0.0], expected: None },
    DecompositionCase { name: "berger_hopf", manifold: "berger_sphere(0.8)", foliation: Some("hopf_on_s3"), start: &[1.0, 0.0, 0.0, 0.0], direction: &[0.0, 1.0, 0.0], expected: None },
    DecompositionCase { name: "cylinder_lines", manifold: "cylinder(1.3)", foliation: Some("cylinder_lines"), start: &[0.4, 0.2], direction: &[1.0, 0.0], expected: None },
];

impl DecompositionCase {
    pub fn family(&self, half_length: f64, step: f64) -> Result<Arc<JacobiFamily>> {
        let m = arc(self.manifold)?;
        let fr = frame_on(&m, self.start, self.direction, -half_length, half_length, step)?;
        let fam = match self.foliation {
            Some(name) => family_from_foliation(&fr, &builtin_foliation(name, m, &[])?)?,
            None => {
                let n = m.dim();
                let fields: Vec<VectorField> = (1..n)
                    .map(|i| VectorField::new(format!("d{i}"), move |_| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })))
                    .collect();
                family_from_killing(&fr, &fields)?
            }
        };
        Ok(Arc::new(fam))
    }
}

pub fn decomposition_criterion(opts: &SuiteOptions) -> Criterion {
    let start = Instant::now();
    let mut c = Criterion::new(4);
    let results: Vec<_> = DECOMPOSITION_CASES
        .par_iter()
        .map(|case| {
            let fam = case.family(4.0 * PI, opts.step)?;
            let dopts = DecompositionOptions { seed: opts.seed, ..DecompositionOptions::default() };
            verify_decomposition(&fam, &dopts)
        })
        .collect();
    for (case, res) in DECOMPOSITION_CASES.iter().zip(results) {
        match res {
            Ok(rep) => {
                for mut check in rep.checks() {
                    match check.check.as_str() {
                        "direct_sum" | "orthogonality" => check.set_tolerance(opts.tol("defect")),
                        "quotient_riccati" => check.set_tolerance(opts.tol("riccati")),
                        _ => {}
                    }
                    c.push(check, case.name);
                }
                if let Some(expected) = case.expected {
                    let mut r = ResidualReport::exact("known_dims", "-", rep.dims == expected);
                    r.components = vec![("vanishing".into(), rep.dims.0 as f64), ("parallel".into(), rep.dims.1 as f64)];
                    c.push(r, case.name);
                }
                c.notes.push(format!("{}: dims ({}, {})", case.name, rep.dims.0, rep.dims.1));
            }
            Err(e) => c.fail("decomposition", case.name, &e),
        }
    }
    c.elapsed = start.elapsed();
    c
}

// ---------------------------------------------------------------------------
// Criterion 5: dual leaves and accessibility.

pub fn dual_leaf_criterion(opts: &SuiteOptions) -> Criterion {
    let start = Instant::now();
    let mut c = Criterion::new(5);
    let covering = || -> Result<ResidualReport> {
        let m = arc("sphere(2,1)")?;
        let fol = builtin_foliation("so2_on_sphere", m.clone(), &[])?;
        let topts = TraceOptions { budget: 10_000, ..TraceOptions::default() };
        let cloud = dual_leaf_trace(&fol, &DVector::zeros(2), &topts)?;
        let radius = cloud.covering_radius(&m, &reference_net(&m, 2000))?;
        let mut r = ResidualReport::at_most("covering_radius", "net 2000", radius, opts.tol("covering"));
        r.components = vec![("segments".into(), cloud.budget_used as f64), ("budget".into(), 10_000.0)];
        r.passed &= cloud.budget_used <= 10_000;
        Ok(r)
    };
    match covering() {
        Ok(r) => c.push(r, "so2_on_sphere"),
        Err(e) => c.fail("covering_radius", "so2_on_sphere", &e),
    }
    let access = || -> Result<ResidualReport> {
        let m = arc("berger_sphere(1)")?;
        let fol = builtin_foliation("hopf_on_s3", m.clone(), &[])?;
        let mut rng = seeded(opts.seed);
        let points: Vec<DVector<f64>> = (0..100).map(|_| m.sample_point(&mut rng)).collect();
        let ranks: Vec<Result<usize>> = points.par_iter().map(|x| accessibility_rank(&fol, x, 2)).collect();
        let good = ranks.iter().filter(|r| matches!(r, Ok(3))).count();
        let mut r = ResidualReport::exact("accessibility_rank_3", "100 points, step halving", good == points.len());
        r.components = vec![("rank_3".into(), good as f64)];
        Ok(r)
    };
    match access() {
        Ok(r) => c.push(r, "hopf_on_s3"),
        Err(e) => c.fail("accessibility_rank_3", "hopf_on_s3", &e),
    }
    let confined = || -> Result<ResidualReport> {
        let fol = builtin_foliation("fiber_product", arc("product(sphere(2,1),euclidean(1))")?, &[])?;
        let p = DVector::from_row_slice(&[0.2, -0.4, 0.75]);
        let topts = TraceOptions { budget: 64, generic_samples: 100, max_generations: 2, ..TraceOptions::default() };
        let cloud = dual_leaf_trace(&fol, &p, &topts)?;
        let drift = cloud.points.iter().map(|x| (x[2] - p[2]).abs()).fold(0.0, f64::max);
        let mut r = ResidualReport::at_most("slice_confinement", "budget 64", drift, opts.tol("confinement"));
        r.evaluated = cloud.points.len();
        Ok(r)
    };
    match confined() {
        Ok(r) => c.push(r, "fiber_product"),
        Err(e) => c.fail("slice_confinement", "fiber_product", &e),
    }
    c.elapsed = start.elapsed();
    c
}

// ---------------------------------------------------------------------------
// Criterion 6: totally geodesic flats.

fn flat_case(manifold: &str, foliation: &str, p: &[f64], x: &[f64], v: &[f64]) -> Result<crate::foliation::FlatReport> {
    let m = arc(manifold)?;
    let fol = builtin_foliation(foliation, m.clone(), &[])?;
    let p = DVector::from_row_slice(p);
    let topts = TraceOptions { budget: 64, generic_samples: 50, max_generations: 1, segment_length: 0.3, ..TraceOptions::default() };
    let cloud = dual_leaf_trace(&fol, &p, &topts)?;
    let (x, v) = (unit_dir(&m, &p, x), unit_dir(&m, &p, v));
    flat_check(&fol, &cloud, &p, &x, &v, &FlatOptions::default())
}

/// A horizontal vector `x` and a dual-leaf normal `v` at `point`.
pub struct FlatCase {
    pub name: &'static str,
    pub manifold: &'static str,
    pub foliation: &'static str,
    pub point: &'static [f64],
    pub x: &'static [f64],
    pub v: &'static [f64],
}

pub const FLAT_CASES: [FlatCase; 3] = [
    FlatCase { name: "s2xr2", manifold: "product(sphere(2,1),euclidean(2))", foliation: "fiber_product", point: &[0.1, 0.2, 0.0, 0.0], x: &[1.0, 0.0, 0.0, 0.0], v: &[0.0, 0.0, 0.6, 0.8] },
    FlatCase { name: "s2xr", manifold: "product(sphere(2,1),euclidean(1))", foliation: "fiber_product", point: &[0.1, 0.2, 0.0], x: &[1.0, 0.0, 0.0], v: &[0.0, 0.0, 1.0] },
    FlatCase { name: "cylinder", manifold: "cylinder(1.3)", foliation: "cylinder_lines", point: &[0.4, 0.2], x: &[1.0, 0.0], v: &[0.0, 1.0] },
];

pub fn flats_criterion(opts: &SuiteOptions) -> Criterion {
    let start = Instant::now();
    let mut c = Criterion::new(6);
    for case in FLAT_CASES {
        let label = case.name;
        match flat_case(case.manifold, case.foliation, case.point, case.x, case.v) {
            Ok(r) => {
                c.push(ResidualReport::at_most("sectional", "surface grid", r.max_sectional, opts.tol("sectional")), label);
                c.push(ResidualReport::at_most("total_geodesy", "probe geodesics", r.max_geodesy, opts.tol("geodesy")), label);
                let mut cert = ResidualReport::exact("certificate", "cloud tangent", r.certificate_ok);
                cert.max_residual = r.certificate_defect;
                c.push(cert, label);
            }
            Err(e) => c.fail("flat", label, &e),
        }
    }
    match flat_case("product(sphere(2,1),euclidean(2))", "fiber_product", &[0.1, 0.2, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]) {
        Ok(r) => {
            c.push(ResidualReport::exact("control_fails", "surface grid", !r.sectional_ok && !r.passed()), "sphere_direction");
            let off = (r.min_sectional_value - 1.0).abs().max((r.max_sectional_value - 1.0).abs());
            c.push(ResidualReport::at_most("control_sectional_is_one", "surface grid", off, 1e-6), "sphere_direction");
        }
        Err(e) => c.fail("control", "sphere_direction", &e),
    }
    c.elapsed = start.elapsed();
    c
}

// ---------------------------------------------------------------------------
// Criterion 7: infrastructure.

pub const SYMMETRY_CATALOG: [&str; 9] = [
    "euclidean(3)",
    "sphere(2,1)",
    "sphere(3,1)",
    "sphere(2,2.5)",
    "berger_sphere(1)",
    "berger_sphere(0.6)",
    "cylinder(1.5)",
    "product(sphere(2,1),euclidean(1))",
    "product(sphere(2,1),euclidean(2))",
];

fn symmetry_max(m: &Manifold, seed: u64, count: usize, max_norm: f64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let x = m.sample_point(&mut rng);
        if x.norm() > max_norm {
            continue;
        }
        worst = worst.max(m.curvature_symmetry_defect(&x, &mut rng)?);
    }
    Ok(worst)
}

/// Observed convergence orders of the geodesic integrator against the
/// stereographic great circle `x(t) = tan(t/2)` on the unit 2-sphere.
pub fn convergence_orders() -> Result<Vec<f64>> {
    let m = arc("sphere(2,1)")?;
    let t1 = 2.0;
    let err = |h: f64| -> Result<f64> {
        let path = integrate_geodesic(&m, &DVector::zeros(2), &DVector::from_row_slice(&[0.5, 0.0]), t1, h)?;
        let (x, _) = path.evaluate(t1)?;
        Ok((x[0] - (t1 / 2.0).tan()).abs())
    };
    let errs = [0.08, 0.04, 0.02].iter().map(|&h| err(h)).collect::<Result<Vec<_>>>()?;
    Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

fn omega_drift(spec: &str, seed: u64, step: f64) -> Result<f64> {
    let m = arc(spec)?;
    let mut rng = seeded(seed);
    let x0 = m.sample_point(&mut rng);
    let dir = crate::sampling::gaussian_vector(&mut rng, m.dim());
    let dir = &dir / m.norm(&x0, &dir);
    let path = integrate_geodesic_window(&m, &x0, &dir, -1.0, 1.0, step)?;
    let fr = Arc::new(NormalFrame::new(Arc::new(path))?);
    let size = fr.rank();
    let (y0, y0p) = lagrangian_graph_data(&mut rng, size, size / 2);
    let fam = JacobiFamily::from_frame_data(&fr, y0, y0p)?;
    let base = fam.omega_at(0);
    let scale = fam.scale().max(1e-300);
    Ok((0..fam.values.len()).map(|k| (fam.omega_at(k) - &base).amax() / scale).fold(0.0, f64::max))
}

fn reproducibility_sample(opts: &SuiteOptions) -> Result<String> {
    let fam = DECOMPOSITION_CASES[0].family(2.0, opts.step)?;
    let mut out = verify_decomposition(&fam, &DecompositionOptions { seed: opts.seed, ..DecompositionOptions::default() })?.render();
    let mini = SuiteOptions { cases_per_manifold: 2, ..opts.clone() };
    let t = tally_manifold(BATTERY[2], mini.seed, mini.cases_per_manifold, mini.step);
    if let Some(e) = t.error {
        return Err(e);
    }
    out.push_str(&format!("{:e} {:e} {:e} {:?}\n", t.worst_residual, t.worst_eq1, t.min_psd, t.min_control));
    Ok(out)
}

pub fn infrastructure_criterion(opts: &SuiteOptions) -> Criterion {
    let start = Instant::now();
    let mut c = Criterion::new(7);
    let analytic: Result<f64> = SYMMETRY_CATALOG
        .iter()
        .enumerate()
        .map(|(i, spec)| symmetry_max(&parse_manifold_spec(spec)?, opts.seed.wrapping_add(i as u64), 100, f64::INFINITY))
        .try_fold(0.0f64, |a, b| b.map(|b| a.max(b)));
    match analytic {
        Ok(d) => c.push(ResidualReport::at_most("curvature_symmetry", "100 points each", d, 1e-7), "analytic"),
        Err(e) => c.fail("curvature_symmetry", "analytic", &e),
    }
    let fd: Result<f64> = ["sphere(2,1)", "sphere(3,1)", "product(sphere(2,1),euclidean(1))"]
        .iter()
        .enumerate()
        .map(|(i, spec)| symmetry_max(&parse_manifold_spec(spec)?.finite_difference_variant(), opts.seed.wrapping_add(100 + i as u64), 30, 3.0))
        .try_fold(0.0f64, |a, b| b.map(|b| a.max(b)));
    match fd {
        Ok(d) => c.push(ResidualReport::at_most("curvature_symmetry", "30 points each", d, 1e-4), "finite_difference"),
        Err(e) => c.fail("curvature_symmetry", "finite_difference", &e),
    }
    match convergence_orders() {
        Ok(orders) => {
            let off = orders.iter().map(|p| (p - 4.0).abs()).fold(0.0, f64::max);
            let mut r = ResidualReport::at_most("order_minus_four", "h = 0.08, 0.04, 0.02", off, 0.25);
            r.components = orders.iter().enumerate().map(|(i, p)| (format!("order_{i}"), *p)).collect();
            c.push(r, "sphere_oracle");
        }
        Err(e) => c.fail("order_minus_four", "sphere_oracle", &e),
    }
    let drift: Result<f64> = BATTERY
        .iter()
        .enumerate()
        .map(|(i, spec)| omega_drift(spec, opts.seed.wrapping_add(200 + i as u64), opts.step))
        .try_fold(0.0f64, |a, b| b.map(|b| a.max(b)));
    match drift {
        Ok(d) => c.push(ResidualReport::at_most("omega_conservation", format!("t in [-1,1] step {:.1e}", opts.step), d, opts.tol("omega")), "battery"),
        Err(e) => c.fail("omega_conservation", "battery", &e),
    }
    match (reproducibility_sample(opts), reproducibility_sample(opts)) {
        (Ok(a), Ok(b)) => c.push(ResidualReport::exact("bit_reproducible", "two runs", a == b), "fixed_seed"),
        (Err(e), _) | (_, Err(e)) => c.fail("bit_reproducible", "fixed_seed", &e),
    }
    c.elapsed = start.elapsed();
    c
}

/// Runs all seven criteria. The transversal battery runs alone so that its
/// wall-clock budget is measured without contention.
pub fn run_suite(opts: &SuiteOptions) -> Vec<Criterion> {
    let (c1, c2) = transversal_battery(opts);
    let runners: [fn(&SuiteOptions) -> Criterion; 5] =
        [hopf_criterion, decomposition_criterion, dual_leaf_criterion, flats_criterion, infrastructure_criterion];
    let mut rest: Vec<Criterion> = runners.par_iter().map(|f| f(opts)).collect();
    let mut all = vec![c1, c2];
    all.append(&mut rest);
    all.sort_by_key(|c| c.id);
    all
}

/// Report with one record per check, prefixed by the criterion number.
pub fn suite_report(criteria: &[Criterion], config_echo: &str) -> Report {
    let mut report = Report::new("suite", config_echo);
    for c in criteria {
        report.note(&format!("criterion_{}", c.id), c.line());
        for n in &c.notes {
            report.note(&format!("criterion_{}", c.id), n);
        }
        for check in &c.checks {
            let mut check = check.clone();
            check.check = format!("c{}.{}", c.id, check.check);
            report.check(check);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn berger_oracle_is_four() {
        for eps in [0.3, 0.6, 0.8, 1.0, 1.1] {
            assert!((berger_oracle(eps) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn integrator_is_fourth_order() {
        let orders = convergence_orders().unwrap();
        assert!(orders.iter().all(|p| (p - 4.0).abs() <= 0.25));
    }

    #[test]
    fn criterion_lines() {
        let mut c = Criterion::new(6);
        assert!(!c.passed());
        c.push(ResidualReport::at_most("sectional", "-", 1e-9, 1e-8), "cylinder");
        assert_eq!(c.line(), "criterion 6 flats: pass (1/1 checks)");
        assert_eq!(c.checks[0].check, "sectional[cylinder]");
        c.push(ResidualReport::at_most("geodesy", "-", 1.0, 1e-5), "cylinder");
        assert!(c.line().contains("FAIL (1/2 checks)"));
    }

    #[test]
    fn hopf_chart_matches_frame_realisation() {
        let chart = hopf_chart_split(1e-3).unwrap();
        let frame = berger_split(1.0, 1e-3).unwrap();
        assert!(quotient_curvature_error(&chart, 4.0) <= 1e-5);
        assert!(quotient_curvature_error(&frame, 4.0) <= 1e-5);
    }
}
