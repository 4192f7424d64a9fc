//! Built-in foliations addressable by name.

use super::{FoliationSpec, VectorField};
use crate::error::{Error, Result};
use crate::manifold::{stereographic_to_ambient, FrameGroup, Manifold};
use nalgebra::DVector;
use std::sync::Arc;

pub const FOLIATION_NAMES: [&str; 6] = ["so2_on_sphere", "hopf_on_s3", "slice_product", "fiber_product", "point_foliation", "cylinder_lines"];

fn sphere_params(label: &str) -> Option<(usize, f64)> {
    let inner = label.strip_prefix("sphere(")?.strip_suffix(')')?;
    let mut it = inner.split(',');
    let n = it.next()?.trim().parse().ok()?;
    let r = it.next()?.trim().parse().ok()?;
    Some((n, r))
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
}

/// Chart components of the rotation in the ambient `(i, j)` plane of the
/// sphere of radius `r`; ambient index `n` is the projection axis.
pub fn sphere_rotation(n: usize, r: f64, i: usize, j: usize) -> VectorField {
    VectorField::new(format!("rot({i},{j})"), move |x: &DVector<f64>| {
        let p = stereographic_to_ambient(x, r);
        let z = p[n];
        let mut w: DVector<f64> = DVector::zeros(n + 1);
        w[j] += p[i];
        w[i] -= p[j];
        let d = 1.0 - z;
        DVector::from_fn(n, |k, _| r * (w[k] / d + p[k] * w[n] / (d * d)))
    })
}

/// Builds a catalog foliation on `manifold`.
///
/// * `so2_on_sphere(i, j)`: orbits of the rotation in the ambient `(i, j)`
///   plane (default `(1, n)`, whose fixed points `(±r, 0, …)` and horizontal
///   great circle `|x| = r` lie inside the chart).
/// * `hopf_on_s3`: fibres of the first frame direction on the unit quaternions.
/// * `slice_product`: leaves `A × {s}` of a product `A × B`.
/// * `fiber_product`: leaves `{p} × B` of a product `A × B`.
/// * `point_foliation`: every leaf is a point.
/// * `cylinder_lines`: vertical lines of the cylinder.
pub fn builtin_foliation(name: &str, manifold: Arc<Manifold>, params: &[f64]) -> Result<FoliationSpec> {
    let n = manifold.dim();
    let label = manifold.label().to_string();
    match name {
        "so2_on_sphere" => {
            let (sn, r) = sphere_params(&label)
                .ok_or_else(|| Error::InvalidParameter(format!("so2_on_sphere needs a sphere, got {label}")))?;
            let i = params.first().copied().unwrap_or(1.0);
            let j = params.get(1).copied().unwrap_or(sn as f64);
            let valid = |v: f64| v >= 0.0 && v.fract() == 0.0 && v <= sn as f64;
            if !valid(i) || !valid(j) || i == j {
                return Err(Error::InvalidParameter(format!("bad rotation plane ({i}, {j})")));
            }
            let field = sphere_rotation(sn, r, i as usize, j as usize);
            Ok(FoliationSpec::new(format!("so2_on_sphere({i},{j})"), manifold, vec![field], true))
        }
        "hopf_on_s3" => match &*manifold {
            Manifold::Frame(f) if f.group == FrameGroup::Su2 => {
                let field = VectorField::new("e1", |_| unit(3, 0));
                Ok(FoliationSpec::new("hopf_on_s3", manifold.clone(), vec![field], true))
            }
            _ => Err(Error::InvalidParameter(format!("hopf_on_s3 needs a berger_sphere, got {label}"))),
        },
        "slice_product" | "fiber_product" => {
            let Manifold::Product { a, b, .. } = &*manifold else {
                return Err(Error::InvalidParameter(format!("{name} needs a product manifold, got {label}")));
            };
            let da = a.dim();
            let range = if name == "slice_product" { 0..da } else { da..n };
            let gens = range.map(|i| VectorField::new(format!("d{i}"), move |_| unit(n, i))).collect();
            let killing = if name == "slice_product" { a.label().starts_with("euclidean") } else { b.label().starts_with("euclidean") };
            Ok(FoliationSpec::new(name, manifold.clone(), gens, killing))
        }
        "point_foliation" => Ok(FoliationSpec::new(name, manifold, Vec::new(), true)),
        "cylinder_lines" => {
            if !label.starts_with("cylinder") {
                return Err(Error::InvalidParameter(format!("cylinder_lines needs a cylinder, got {label}")));
            }
            let field = VectorField::new("dz", |_| unit(2, 1));
            Ok(FoliationSpec::new(name, manifold, vec![field], true))
        }
        other => Err(Error::UnknownFoliation(other.to_string())),
    }
}
