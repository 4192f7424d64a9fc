//! Built-in manifolds addressable by name and parameters.

use super::{ChartManifold, Chordal, FrameGroup, FrameManifold, Manifold};
use crate::error::{Error, Result};
use crate::sampling::{uniform, unit_vector, SeededRng};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;

/// Stereographic charts are cut off at `|x| ≤ STEREO_MARGIN · r`.
pub const STEREO_MARGIN: f64 = 20.0;

fn positive(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

fn dimension(name: &str, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= 64.0 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be a positive integer, got {value}")))
    }
}

fn param(params: &[f64], idx: usize, what: &str) -> Result<f64> {
    params
        .get(idx)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{what}`")))
}

/// Looks up a catalog manifold.
///
/// Known names: `euclidean(n)`, `sphere(n, r)`, `berger_sphere(ε)`,
/// `cylinder(r)` and the negatively curved control `hyperbolic(n, r)`.
/// Products are built with [`product`] or [`parse_manifold_spec`].
pub fn builtin_manifold(name: &str, params: &[f64]) -> Result<Manifold> {
    match name {
        "euclidean" => Ok(euclidean(dimension("n", param(params, 0, "n")?)?)),
        "sphere" => {
            let n = dimension("n", param(params, 0, "n")?)?;
            let r = positive("radius", params.get(1).copied().unwrap_or(1.0))?;
            Ok(conformal_ball(n, r, 1.0))
        }
        "hyperbolic" => {
            let n = dimension("n", param(params, 0, "n")?)?;
            let r = positive("radius", params.get(1).copied().unwrap_or(1.0))?;
            Ok(conformal_ball(n, r, -1.0))
        }
        "berger_sphere" => berger_sphere(positive("epsilon", param(params, 0, "epsilon")?)?),
        "cylinder" => Ok(cylinder(positive("radius", param(params, 0, "radius")?)?)),
        "product" => Err(Error::InvalidParameter(
            "product takes two manifold specs, e.g. product(sphere(2,1),euclidean(1))".into(),
        )),
        other => Err(Error::UnknownManifold(other.to_string())),
    }
}

/// Block-diagonal product of two backends.
pub fn product(a: Manifold, b: Manifold) -> Manifold {
    let label = format!("product({},{})", a.label(), b.label());
    Manifold::Product { a: Box::new(a), b: Box::new(b), label }
}

/// Parses specs such as `sphere(2,1)` or `product(sphere(2,1),euclidean(2))`.
pub fn parse_manifold_spec(spec: &str) -> Result<Manifold> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(Error::Config(format!("unbalanced parentheses in manifold spec `{spec}`")));
            }
            (&spec[..open], &spec[open + 1..spec.len() - 1])
        }
        None => (spec, ""),
    };
    let name = name.trim();
    let parts = split_top_level(args)?;
    if name == "product" {
        if parts.len() != 2 {
            return Err(Error::Config(format!("product expects two factors, got {}", parts.len())));
        }
        return Ok(product(parse_manifold_spec(parts[0])?, parse_manifold_spec(parts[1])?));
    }
    let params = parts
        .iter()
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad numeric parameter `{}` in `{spec}`", p.trim()))))
        .collect::<Result<Vec<_>>>()?;
    builtin_manifold(name, &params)
}

fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Config(format!("unbalanced parentheses in `{s}`")));
                }
            }
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Config(format!("unbalanced parentheses in `{s}`")));
    }
    if !s.trim().is_empty() {
        parts.push(&s[start..]);
    }
    Ok(parts)
}

fn euclidean(n: usize) -> Manifold {
    Manifold::Chart(ChartManifold {
        dim: n,
        label: format!("euclidean({n})"),
        metric: Arc::new(move |_| DMatrix::identity(n, n)),
        metric_d1: Some(Arc::new(move |_| vec![DMatrix::zeros(n, n); n])),
        metric_d2: Some(Arc::new(move |_| vec![DMatrix::zeros(n, n); n * n])),
        domain: Arc::new(|_| true),
        sampler: Arc::new(move |rng| DVector::from_fn(n, |_, _| uniform(rng, -2.0, 2.0))),
        distance: Some(Arc::new(|x, y| (x - y).norm())),
        chordal: Some(Chordal { embed: Arc::new(|x| x.clone()), radius: 0.0 }),
        nonnegative: true,
        compact: false,
    })
}

/// Conformally flat model `4/(1 + κ|x|²/r²)² · δ`: the stereographic chart of
/// the round sphere of radius `r` for κ = 1, the Poincaré ball for κ = −1.
fn conformal_ball(n: usize, r: f64, kappa: f64) -> Manifold {
    let r2 = r * r;
    let s_of = move |x: &DVector<f64>| 1.0 + kappa * x.norm_squared() / r2;
    let metric = move |x: &DVector<f64>| DMatrix::identity(n, n) * (4.0 / s_of(x).powi(2));
    let d1 = move |x: &DVector<f64>| {
        let s = s_of(x);
        (0..n)
            .map(|k| DMatrix::identity(n, n) * (-16.0 * kappa * x[k] / (r2 * s.powi(3))))
            .collect::<Vec<_>>()
    };
    let d2 = move |x: &DVector<f64>| {
        let s = s_of(x);
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                let delta = if k == l { 1.0 } else { 0.0 };
                let c = -16.0 * kappa * delta / (r2 * s.powi(3)) + 96.0 * x[k] * x[l] / (r2 * r2 * s.powi(4));
                out.push(DMatrix::identity(n, n) * c);
            }
        }
        out
    };
    if kappa > 0.0 {
        let limit = STEREO_MARGIN * r;
        Manifold::Chart(ChartManifold {
            dim: n,
            label: format!("sphere({n},{r})"),
            metric: Arc::new(metric),
            metric_d1: Some(Arc::new(d1)),
            metric_d2: Some(Arc::new(d2)),
            domain: Arc::new(move |x| x.norm() <= limit),
            sampler: Arc::new(move |rng: &mut SeededRng| loop {
                let p = unit_vector(rng, n + 1);
                let x = stereographic_from_ambient(&p, r);
                if x.norm() <= limit {
                    return x;
                }
            }),
            distance: Some(Arc::new(move |x, y| {
                let (a, b) = (stereographic_to_ambient(x, r), stereographic_to_ambient(y, r));
                r * a.dot(&b).clamp(-1.0, 1.0).acos()
            })),
            chordal: Some(Chordal { embed: Arc::new(move |x| stereographic_to_ambient(x, r) * r), radius: r }),
            nonnegative: true,
            compact: true,
        })
    } else {
        let limit = 0.9 * r;
        Manifold::Chart(ChartManifold {
            dim: n,
            label: format!("hyperbolic({n},{r})"),
            metric: Arc::new(metric),
            metric_d1: Some(Arc::new(d1)),
            metric_d2: Some(Arc::new(d2)),
            domain: Arc::new(move |x| x.norm() <= limit),
            sampler: Arc::new(move |rng: &mut SeededRng| unit_vector(rng, n) * (0.8 * r * uniform(rng, 0.0, 1.0))),
            distance: Some(Arc::new(move |x, y| {
                let (xs, ys) = (x.norm_squared() / r2, y.norm_squared() / r2);
                let d = (x - y).norm_squared() / r2;
                r * (1.0 + 2.0 * d / ((1.0 - xs) * (1.0 - ys))).acosh()
            })),
            chordal: None,
            nonnegative: false,
            compact: false,
        })
    }
}

/// Unit vector of R^{n+1} (last coordinate = projection axis) for a chart
/// point of the sphere of radius `r`. The chart origin is the pole with last
/// coordinate −1.
pub fn stereographic_to_ambient(x: &DVector<f64>, r: f64) -> DVector<f64> {
    let xs = x / r;
    let rho2 = xs.norm_squared();
    let n = x.len();
    DVector::from_fn(n + 1, |i, _| if i < n { 2.0 * xs[i] / (1.0 + rho2) } else { (rho2 - 1.0) / (1.0 + rho2) })
}

/// Inverse of [`stereographic_to_ambient`].
pub fn stereographic_from_ambient(p: &DVector<f64>, r: f64) -> DVector<f64> {
    let n = p.len() - 1;
    let z = p[n];
    DVector::from_fn(n, |i, _| r * p[i] / (1.0 - z))
}

fn cylinder(r: f64) -> Manifold {
    let g = DMatrix::from_diagonal(&DVector::from_row_slice(&[r * r, 1.0]));
    Manifold::Chart(ChartManifold {
        dim: 2,
        label: format!("cylinder({r})"),
        metric: Arc::new(move |_| g.clone()),
        metric_d1: Some(Arc::new(|_| vec![DMatrix::zeros(2, 2); 2])),
        metric_d2: Some(Arc::new(|_| vec![DMatrix::zeros(2, 2); 4])),
        domain: Arc::new(|_| true),
        sampler: Arc::new(|rng| DVector::from_row_slice(&[uniform(rng, 0.0, 2.0 * PI), uniform(rng, -2.0, 2.0)])),
        distance: Some(Arc::new(move |x, y| {
            let dtheta = (x[0] - y[0]).rem_euclid(2.0 * PI);
            let dtheta = dtheta.min(2.0 * PI - dtheta);
            ((r * dtheta).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
        })),
        chordal: None,
        nonnegative: true,
        compact: false,
    })
}

/// Structure constants of the left-invariant frame `q·i, q·j, q·k` on the
/// unit quaternions: `[e1, e2] = 2 e3` and cyclic.
pub fn su2_structure() -> Vec<f64> {
    let mut c = vec![0.0; 27];
    let mut set = |i: usize, j: usize, k: usize, v: f64| {
        c[(i * 3 + j) * 3 + k] = v;
        c[(j * 3 + i) * 3 + k] = -v;
    };
    set(0, 1, 2, 2.0);
    set(1, 2, 0, 2.0);
    set(2, 0, 1, 2.0);
    c
}

/// Berger sphere: frame metric `diag(ε², 1, 1)`, the first frame direction
/// tangent to the Hopf fibres. `ε = 1` is the unit round 3-sphere.
fn berger_sphere(eps: f64) -> Result<Manifold> {
    let g = DMatrix::from_diagonal(&DVector::from_row_slice(&[eps * eps, 1.0, 1.0]));
    Ok(Manifold::Frame(FrameManifold::new(format!("berger_sphere({eps})"), FrameGroup::Su2, su2_structure(), g)?))
}
