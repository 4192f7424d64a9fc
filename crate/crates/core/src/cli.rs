//! Command-line surface: flags, config resolution, command dispatch and
//! report emission.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or a runtime
//! error, 2 when a hypothesis of the verifier does not hold, 3 on usage and
//! configuration errors.

use crate::config::RunConfig;
use crate::decomposition::{min_sectional_at, verify_decomposition, DecompositionOptions, CURVATURE_FLOOR};
use crate::error::{Error, Result};
use crate::foliation::{accessibility_rank, builtin_foliation, dual_leaf_trace, flat_check, reference_net, FlatOptions, FoliationSpec, TraceOptions};
use crate::geodesic::{integrate_geodesic_window, GeodesicPath, DEFAULT_STEP};
use crate::jacobi::{family_from_foliation, family_from_killing, random_lagrangian_data, JacobiFamily, NormalFrame};
use crate::manifold::{builtin_manifold, parse_manifold_spec, Manifold};
use crate::report::{Report, ResidualReport};
use crate::sampling::seeded;
use crate::suite::{run_suite, suite_report, SuiteOptions};
use crate::transversal::{build_split, SubfamilySpec, TransversalOptions};
use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INAPPLICABLE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dualfol", version, about = "Transversal Jacobi fields, Jacobi family decompositions and dual foliations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, env = "DUALFOL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long, global = true, env = "DUALFOL_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "DUALFOL_SEED")]
    pub seed: Option<u64>,
    /// Integrator step.
    #[arg(long, global = true, env = "DUALFOL_STEP")]
    pub step: Option<f64>,
    /// Tolerance override `name=value` (repeatable).
    #[arg(long = "tol", global = true, env = "DUALFOL_TOL", value_delimiter = ',')]
    pub tol: Vec<String>,
    /// Worker threads.
    #[arg(long, global = true, env = "DUALFOL_JOBS")]
    pub jobs: Option<usize>,
    /// Manifold spec, e.g. `sphere(2,1)`; overrides `manifold.name`.
    #[arg(long, global = true, env = "DUALFOL_MANIFOLD")]
    pub manifold: Option<String>,
    /// Catalog foliation; overrides `foliation.name`.
    #[arg(long, global = true, env = "DUALFOL_FOLIATION")]
    pub foliation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate a geodesic and export it.
    Geodesic,
    /// Build a Jacobi family and export it with its Riccati operator.
    Jacobi,
    /// Split a family along a subfamily and check the transversal equation.
    Transversal,
    /// Vanishing/parallel decomposition of a family.
    Decompose,
    /// Trace a dual leaf and measure its covering radius.
    DualLeaf,
    /// Rank of the horizontal bracket-generated distribution.
    AccessRank,
    /// Check a totally geodesic flat spanned by a horizontal and a dual-normal vector.
    Flats,
    /// Run the full acceptance battery.
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geodesic => "geodesic",
            Command::Jacobi => "jacobi",
            Command::Transversal => "transversal",
            Command::Decompose => "decompose",
            Command::DualLeaf => "dual-leaf",
            Command::AccessRank => "access-rank",
            Command::Flats => "flats",
            Command::Suite => "suite",
        }
    }
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NegativeCurvature { .. } => EXIT_INAPPLICABLE,
        Error::Config(_) | Error::UnknownManifold(_) | Error::UnknownFoliation(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub report_path: PathBuf,
    /// Extra lines for the terminal (criterion verdicts).
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Merges flags into the config file (flags win).
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(cli.command.name().to_string());
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(step) = cli.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("--step must be positive, got {step}")));
        }
        cfg.geodesic.step = Some(step);
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if let Some(m) = &cli.manifold {
        cfg.manifold.name = Some(m.clone());
        cfg.manifold.params.clear();
    }
    if let Some(f) = &cli.foliation {
        cfg.foliation.name = Some(f.clone());
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    cfg.apply_tolerances(&cli.tol)?;
    Ok(cfg)
}

/// Resolves the config, runs the command and writes its files.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    if let Some(j) = cfg.jobs {
        // A second initialisation in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let out = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "dualfol-out".into()));
    fs::create_dir_all(&out)?;
    let ctx = Context { cfg, out };
    let mut lines = Vec::new();
    let report = match cli.command {
        Command::Geodesic => ctx.geodesic()?,
        Command::Jacobi => ctx.jacobi()?,
        Command::Transversal => ctx.transversal()?,
        Command::Decompose => ctx.decompose()?,
        Command::DualLeaf => ctx.dual_leaf()?,
        Command::AccessRank => ctx.access_rank()?,
        Command::Flats => ctx.flats()?,
        Command::Suite => ctx.suite(&mut lines)?,
    };
    let report_path = ctx.out.join(format!("{}.report", cli.command.name()));
    fs::write(&report_path, report.render())?;
    Ok(Outcome { report, report_path, lines })
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

fn rows_to_matrix(rows: &[Vec<f64>], key: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{key} must be a non-empty rectangular array of rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

impl Context {
    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn step(&self) -> f64 {
        self.cfg.geodesic.step.unwrap_or(DEFAULT_STEP)
    }

    fn report(&self) -> Report {
        Report::new(self.cfg.command.as_deref().unwrap_or("-"), &self.cfg.echo())
    }

    fn manifold(&self) -> Result<Arc<Manifold>> {
        let name = self.cfg.manifold.name.as_deref().ok_or_else(|| Error::Config("manifold.name is required".into()))?;
        let m = if self.cfg.manifold.params.is_empty() { parse_manifold_spec(name)? } else { builtin_manifold(name, &self.cfg.manifold.params)? };
        Ok(Arc::new(m))
    }

    fn foliation(&self, m: &Arc<Manifold>) -> Result<FoliationSpec> {
        let name = self.cfg.foliation.name.as_deref().ok_or_else(|| Error::Config("foliation.name is required".into()))?;
        builtin_foliation(name, m.clone(), &self.cfg.foliation.params)
    }

    fn point(&self, m: &Manifold, given: Option<&Vec<f64>>, key: &str) -> Result<DVector<f64>> {
        let x = given.map(|v| vector(v)).unwrap_or_else(|| DVector::zeros(m.point_dim()));
        if x.len() != m.point_dim() {
            return Err(Error::Config(format!("{key} has {} entries, `{}` needs {}", x.len(), m.label(), m.point_dim())));
        }
        m.check_domain(&x)?;
        Ok(x)
    }

    fn unit(&self, m: &Manifold, x: &DVector<f64>, given: Option<&Vec<f64>>, key: &str) -> Result<DVector<f64>> {
        let v = given.map(|v| vector(v)).ok_or_else(|| Error::Config(format!("{key} is required")))?;
        if v.len() != m.dim() {
            return Err(Error::Config(format!("{key} has {} entries, `{}` needs {}", v.len(), m.label(), m.dim())));
        }
        let n = m.norm(x, &v);
        if !(n > 0.0) {
            return Err(Error::InvalidParameter(format!("{key} is the zero vector")));
        }
        Ok(v / n)
    }

    /// Parameter window of the path: `geodesic.t0/t1`, `geodesic.length`, or
    /// the given default.
    fn window(&self, default: (f64, f64)) -> (f64, f64) {
        let g = &self.cfg.geodesic;
        match (g.length, g.t0, g.t1) {
            (Some(l), _, _) => (0.0, l),
            (None, None, None) => default,
            (None, t0, t1) => (t0.unwrap_or(0.0), t1.unwrap_or(default.1)),
        }
    }

    fn path(&self, m: &Arc<Manifold>, window: (f64, f64)) -> Result<GeodesicPath> {
        let x0 = self.point(m, self.cfg.geodesic.start.as_ref(), "geodesic.start")?;
        let v0 = self.unit(m, &x0, self.cfg.geodesic.direction.as_ref(), "geodesic.direction")?;
        integrate_geodesic_window(m, &x0, &v0, window.0, window.1, self.step())
    }

    fn family(&self, m: &Arc<Manifold>, window: (f64, f64)) -> Result<Arc<JacobiFamily>> {
        let frame = Arc::new(NormalFrame::new(Arc::new(self.path(m, window)?))?);
        let r = frame.rank();
        let method = self.cfg.family.method.as_deref().unwrap_or(if self.cfg.foliation.name.is_some() { "foliation" } else { "conjugate" });
        let fam = match method {
            "foliation" => family_from_foliation(&frame, &self.foliation(m)?)?,
            "killing" => family_from_killing(&frame, &self.foliation(m)?.generators)?,
            "conjugate" => JacobiFamily::from_frame_data(&frame, DMatrix::zeros(r, r), DMatrix::identity(r, r))?,
            "frame" => {
                let y0 = rows_to_matrix(self.cfg.family.y0.as_deref().unwrap_or_default(), "family.y0")?;
                let y0p = rows_to_matrix(self.cfg.family.y0p.as_deref().unwrap_or_default(), "family.y0p")?;
                JacobiFamily::from_frame_data(&frame, y0, y0p)?
            }
            "random" => {
                let (y0, y0p) = random_lagrangian_data(&mut seeded(self.seed()), r, self.cfg.family.vanishing.unwrap_or(0).min(r));
                JacobiFamily::from_frame_data(&frame, y0, y0p)?
            }
            other => return Err(Error::Config(format!("unknown family method `{other}`"))),
        };
        Ok(Arc::new(fam))
    }

    fn subspace(&self, fam: &JacobiFamily) -> Result<SubfamilySpec> {
        match (&self.cfg.subspace.indices, &self.cfg.subspace.coeffs) {
            (_, Some(rows)) => SubfamilySpec::new(fam, rows_to_matrix(rows, "subspace.coeffs")?.transpose()),
            (Some(idx), None) => SubfamilySpec::members(fam, idx),
            (None, None) => SubfamilySpec::members(fam, &[0]),
        }
    }

    fn geodesic(&self) -> Result<Report> {
        let m = self.manifold()?;
        let path = self.path(&m, self.window((0.0, 1.0)))?;
        write_with(&self.out.join("geodesic.csv"), |b| path.write_csv(b))?;
        let mut rep = self.report();
        let speed = path.samples().iter().map(|s| (m.norm(&s.x, &s.v) - 1.0).abs()).fold(0.0, f64::max);
        let grid = format!("t in [{:.6},{:.6}] step {:e}", path.t0(), path.t1(), path.step());
        let mut r = ResidualReport::at_most("unit_speed", grid, speed, self.cfg.tolerance("speed"));
        r.evaluated = path.len();
        rep.note("samples", path.len());
        rep.check(r);
        Ok(rep)
    }

    fn jacobi(&self) -> Result<Report> {
        let m = self.manifold()?;
        let fam = self.family(&m, self.window((0.0, 1.0)))?;
        fam.require_self_adjoint()?;
        write_with(&self.out.join("jacobi.csv"), |b| fam.write_csv(b))?;
        let path = fam.path().clone();
        let r = fam.size();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string(), "singular".to_string()];
        header.extend((0..r).flat_map(|i| (0..r).map(move |j| format!("L_{}{}", i + 1, j + 1))));
        w.write_record(&header)?;
        for k in 0..path.len() {
            let op = fam.riccati_at(path.time(k))?;
            let mut row = vec![format!("{:.17e}", op.t), (op.singular as u8).to_string()];
            match &op.matrix {
                Some(l) => row.extend((0..r).flat_map(|i| (0..r).map(move |j| format!("{:.17e}", l[(i, j)])))),
                None => row.extend(std::iter::repeat_n(String::new(), r * r)),
            }
            w.write_record(&row)?;
        }
        fs::write(self.out.join("riccati.csv"), w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
        let mut rep = self.report();
        rep.note("fields", r);
        let base = fam.omega_at(0);
        let scale = fam.scale().max(1e-300);
        let drift = (0..fam.values.len()).map(|k| (fam.omega_at(k) - &base).amax() / scale).fold(0.0, f64::max);
        let grid = format!("t in [{:.6},{:.6}] step {:e}", path.t0(), path.t1(), path.step());
        rep.check(ResidualReport::at_most("omega_conservation", grid, drift, self.cfg.tolerance("omega")));
        Ok(rep)
    }

    fn transversal(&self) -> Result<Report> {
        let m = self.manifold()?;
        let fam = self.family(&m, self.window((-1.0, 1.0)))?;
        let spec = self.subspace(&fam)?;
        let opts = TransversalOptions {
            include_windows: self.cfg.transversal.include_windows.unwrap_or(false),
            ..TransversalOptions::default()
        };
        let split = build_split(fam.clone(), &spec, opts)?;
        let field = match self.cfg.transversal.field {
            Some(i) if i >= fam.size() => return Err(Error::Config(format!("transversal.field {i} out of range (family has {})", fam.size()))),
            Some(i) => fam.field(i),
            None => split.oneill_probe(),
        };
        let profile = split.residual_profile(&field)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "residual", "control", "a_norm", "in_window"])?;
        for p in &profile {
            w.write_record([format!("{:.17e}", p.t), format!("{:.17e}", p.residual), format!("{:.17e}", p.control), format!("{:.17e}", p.a_norm), (p.in_window as u8).to_string()])?;
        }
        fs::write(self.out.join("transversal.csv"), w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
        let mut rep = self.report();
        rep.note("subfamily_dim", split.subfamily_dim());
        rep.note("zeros", format!("{:?}", split.zeros()));
        let mut res = split.transversal_residual(&field)?;
        res.set_tolerance(self.cfg.tolerance("transversal"));
        let sup_a = res.components.iter().find(|(k, _)| k == "sup_a").map_or(0.0, |(_, v)| *v);
        let control = res.control.unwrap_or(0.0);
        let grid = res.grid.clone();
        rep.check(res);
        if sup_a >= crate::suite::CONTROL_A_LEVEL {
            rep.check(ResidualReport::at_least("control", grid, control, self.cfg.tolerance("control")));
        } else {
            rep.note("control", format!("{control:.6e} (sup|A| {sup_a:.3e} below {})", crate::suite::CONTROL_A_LEVEL));
        }
        let mut eq1 = split.eq1_residual();
        eq1.set_tolerance(self.cfg.tolerance("identity"));
        rep.check(eq1);
        rep.check(split.invariant_report());
        let mut psd = split.oneill_psd_check();
        psd.set_tolerance(self.cfg.tolerance("psd"));
        rep.check(psd);
        Ok(rep)
    }

    fn decompose(&self) -> Result<Report> {
        let m = self.manifold()?;
        let default = if m.is_compact() { (-4.0 * PI, 4.0 * PI) } else { (-50.0, 50.0) };
        let g = &self.cfg.geodesic;
        let explicit_path = g.length.is_some() || g.t0.is_some() || g.t1.is_some();
        let fallback = if explicit_path { self.window(default) } else { default };
        let window = self.cfg.decompose.window.map_or(fallback, |w| (w[0], w[1]));
        let path_window = if explicit_path { fallback } else { window };
        // Gate on the start point first: the path may leave the chart of a
        // negatively curved model before the full hypothesis check runs.
        let x0 = self.point(&m, self.cfg.geodesic.start.as_ref(), "geodesic.start")?;
        let min_sectional = min_sectional_at(&m, &[x0], DecompositionOptions::default().hypothesis_planes, self.seed())?;
        if min_sectional < CURVATURE_FLOOR {
            return Err(Error::NegativeCurvature { min_sectional });
        }
        let fam = self.family(&m, path_window)?;
        let opts = DecompositionOptions { window: Some(window), seed: self.seed(), ..DecompositionOptions::default() };
        let d = verify_decomposition(&fam, &opts)?;
        let mut rep = self.report();
        for line in d.render().lines().filter(|l| !l.starts_with("check ") && !l.starts_with("summary")) {
            rep.note("decomposition", line);
        }
        for mut c in d.checks() {
            match c.check.as_str() {
                "direct_sum" | "orthogonality" => c.set_tolerance(self.cfg.tolerance("defect")),
                "quotient_riccati" => c.set_tolerance(self.cfg.tolerance("riccati")),
                _ => {}
            }
            rep.check(c);
        }
        Ok(rep)
    }

    fn trace_options(&self, defaults: TraceOptions) -> TraceOptions {
        let d = &self.cfg.dual_leaf;
        TraceOptions {
            budget: d.budget.unwrap_or(defaults.budget),
            segment_length: d.segment_length.unwrap_or(defaults.segment_length),
            step: self.cfg.geodesic.step.unwrap_or(defaults.step),
            record_spacing: d.record_spacing.unwrap_or(defaults.record_spacing),
            max_generations: d.max_generations.unwrap_or(defaults.max_generations),
            ..defaults
        }
    }

    fn dual_leaf(&self) -> Result<Report> {
        let m = self.manifold()?;
        let fol = self.foliation(&m)?;
        let p = self.point(&m, self.cfg.dual_leaf.point.as_ref(), "dual_leaf.point")?;
        let opts = self.trace_options(TraceOptions::default());
        let cloud = dual_leaf_trace(&fol, &p, &opts)?;
        write_with(&self.out.join("dual_leaf.csv"), |b| cloud.write_csv(b))?;
        let mut rep = self.report();
        rep.note("points", cloud.points.len());
        rep.note("segments", cloud.budget_used);
        rep.note("exhausted", cloud.exhausted);
        rep.note("generic_rank", cloud.generic_rank);
        let max_defect = cloud.segments.iter().map(|s| s.max_defect).fold(0.0, f64::max);
        rep.note("max_horizontality_defect", format!("{max_defect:.6e}"));
        if m.is_compact() {
            let net = self.cfg.dual_leaf.net.unwrap_or(2000);
            let radius = cloud.covering_radius(&m, &reference_net(&m, net))?;
            rep.check(ResidualReport::at_most("covering_radius", format!("net {net}"), radius, self.cfg.tolerance("covering")));
        }
        Ok(rep)
    }

    fn access_rank(&self) -> Result<Report> {
        let m = self.manifold()?;
        let fol = self.foliation(&m)?;
        let a = &self.cfg.access;
        let points: Vec<DVector<f64>> = match &a.points {
            Some(rows) => rows.iter().map(|r| self.point(&m, Some(r), "access.points")).collect::<Result<_>>()?,
            None => {
                let mut rng = seeded(self.seed());
                (0..a.count.unwrap_or(100)).map(|_| m.sample_point(&mut rng)).collect()
            }
        };
        let depth = a.depth.unwrap_or(2);
        let expected = a.expected.unwrap_or(m.dim());
        let ranks: Vec<Result<usize>> = points.par_iter().map(|x| accessibility_rank(&fol, x, depth)).collect();
        let mut rep = self.report();
        let mut ok = 0;
        for (x, r) in points.iter().zip(&ranks) {
            match r {
                Ok(r) => {
                    ok += usize::from(*r == expected);
                    rep.note("rank", format!("{r} at {:?}", x.as_slice()));
                }
                Err(e) => rep.note("rank", format!("error at {:?}: {e}", x.as_slice())),
            }
        }
        let mut r = ResidualReport::exact(format!("rank_{expected}"), format!("{} points, depth {depth}, step halving", points.len()), ok == points.len());
        r.evaluated = points.len();
        r.components = vec![("matching".into(), ok as f64)];
        rep.check(r);
        Ok(rep)
    }

    fn flats(&self) -> Result<Report> {
        let m = self.manifold()?;
        let fol = self.foliation(&m)?;
        let f = &self.cfg.flats;
        let p = self.point(&m, f.point.as_ref(), "flats.point")?;
        let x = self.unit(&m, &p, f.x.as_ref(), "flats.x")?;
        let v = self.unit(&m, &p, f.v.as_ref(), "flats.v")?;
        let defaults = TraceOptions { budget: 64, generic_samples: 50, max_generations: 1, segment_length: 0.3, ..TraceOptions::default() };
        let cloud = dual_leaf_trace(&fol, &p, &self.trace_options(defaults))?;
        let opts = FlatOptions {
            extent: f.extent.unwrap_or(1.0),
            step: self.step(),
            sectional_tol: self.cfg.tolerance("sectional"),
            geodesy_tol: self.cfg.tolerance("geodesy"),
            ..FlatOptions::default()
        };
        let r = flat_check(&fol, &cloud, &p, &x, &v, &opts)?;
        r.require_certificate()?;
        let mut rep = self.report();
        rep.note("dual_tangent_dim", r.dual_tangent_dim);
        rep.note("sectional_range", format!("[{:.6e}, {:.6e}]", r.min_sectional_value, r.max_sectional_value));
        let mut cert = ResidualReport::exact("certificate", "cloud tangent", r.certificate_ok);
        cert.max_residual = r.certificate_defect;
        rep.check(cert);
        rep.check(ResidualReport::at_most("sectional", "surface grid", r.max_sectional, opts.sectional_tol));
        rep.check(ResidualReport::at_most("total_geodesy", "probe geodesics", r.max_geodesy, opts.geodesy_tol));
        Ok(rep)
    }

    fn suite(&self, lines: &mut Vec<String>) -> Result<Report> {
        let opts = SuiteOptions::from_config(&self.cfg);
        let criteria = run_suite(&opts);
        lines.extend(criteria.iter().map(|c| c.line()));
        Ok(suite_report(&criteria, &self.cfg.echo()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dualfol").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "seed = 3\n[manifold]\nname = \"sphere(2,1)\"\n[geodesic]\nstep = 0.01\n").unwrap();
        let cli = parse(&["geodesic", "--config", cfg.to_str().unwrap(), "--seed", "9", "--tol", "speed=1e-6"]);
        let c = resolve_config(&cli).unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.geodesic.step, Some(0.01));
        assert_eq!(c.tolerance("speed"), 1e-6);
        assert_eq!(c.command.as_deref(), Some("geodesic"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NegativeCurvature { min_sectional: -1.0 }), EXIT_INAPPLICABLE);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::UnknownManifold("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::NotSelfAdjoint { i: 0, j: 1, value: 1.0, tol: 1e-9 }), EXIT_FAIL);
    }

    #[test]
    fn geodesic_command_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse(&["geodesic", "--manifold", "sphere(2,1)", "--out", dir.path().to_str().unwrap(), "--step", "0.01"]);
        let err = run(&cli).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("geodesic.direction")));
        let cfg = dir.path().join("g.toml");
        fs::write(&cfg, "[geodesic]\ndirection = [1.0, 0.0]\nlength = 2.0\n").unwrap();
        let cli = parse(&["geodesic", "--manifold", "sphere(2,1)", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--step", "0.01"]);
        let outcome = run(&cli).unwrap();
        assert_eq!(outcome.exit_code(), EXIT_PASS);
        let csv = fs::read_to_string(dir.path().join("geodesic.csv")).unwrap();
        assert_eq!(csv.lines().count(), 202);
        assert!(fs::read_to_string(outcome.report_path).unwrap().contains("check unit_speed"));
    }

    #[test]
    fn decompose_window_follows_path_length() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("d.toml");
        fs::write(&cfg, "[foliation]\nname = \"slice_product\"\n[geodesic]\ndirection = [0.0, 0.0, 1.0]\nlength = 1.0\n[family]\nmethod = \"foliation\"\n").unwrap();
        let out = dir.path().to_str().unwrap();
        let cli = parse(&["decompose", "--manifold", "product(sphere(2,1),euclidean(1))", "--config", cfg.to_str().unwrap(), "--out", out, "--step", "0.01"]);
        assert_eq!(run(&cli).unwrap().exit_code(), EXIT_PASS);
    }
}
