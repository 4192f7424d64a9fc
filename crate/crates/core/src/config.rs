//! Run configuration: flat TOML with one level of dotted sections
//! (`manifold.name`, `geodesic.step`, ...).

use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Tolerance names accepted by `[tolerances]` and `--tol`, with defaults.
pub const TOLERANCES: [(&str, f64); 12] = [
    ("speed", 1e-8),
    ("omega", 1e-8),
    ("transversal", 1e-5),
    ("control", 1e-2),
    ("identity", 1e-6),
    ("psd", -1e-10),
    ("defect", 1e-6),
    ("riccati", 1e-5),
    ("covering", 0.05),
    ("confinement", 1e-6),
    ("sectional", 1e-8),
    ("geodesy", 1e-5),
];

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    /// Catalog name, or a full spec such as `product(sphere(2,1),euclidean(1))`.
    pub name: Option<String>,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FoliationSection {
    pub name: Option<String>,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub start: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    /// Shorthand for `t0 = 0`, `t1 = length`.
    pub length: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    /// `foliation`, `killing`, `conjugate`, `frame` or `random`.
    pub method: Option<String>,
    /// Frame-coefficient initial data, one row per frame direction.
    pub y0: Option<Vec<Vec<f64>>>,
    pub y0p: Option<Vec<Vec<f64>>>,
    /// Members of a `random` family that vanish at `t = 0`.
    pub vanishing: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubspaceSection {
    pub indices: Option<Vec<usize>>,
    /// Coefficient rows: row `i` holds the weights of member `i`.
    pub coeffs: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransversalSection {
    /// Member index of the tested field; the O'Neill probe when absent.
    pub field: Option<usize>,
    pub include_windows: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DualLeafSection {
    pub point: Option<Vec<f64>>,
    pub budget: Option<usize>,
    pub segment_length: Option<f64>,
    pub record_spacing: Option<f64>,
    pub max_generations: Option<usize>,
    /// Size of the reference net for the covering radius.
    pub net: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AccessSection {
    pub points: Option<Vec<Vec<f64>>>,
    /// Random points drawn when `points` is absent.
    pub count: Option<usize>,
    pub depth: Option<usize>,
    pub expected: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlatsSection {
    pub point: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub manifold: ManifoldSection,
    #[serde(default)]
    pub foliation: FoliationSection,
    #[serde(default)]
    pub geodesic: GeodesicSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub subspace: SubspaceSection,
    #[serde(default)]
    pub transversal: TransversalSection,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub dual_leaf: DualLeafSection,
    #[serde(default)]
    pub access: AccessSection,
    #[serde(default)]
    pub flats: FlatsSection,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Line and column (1-based) of `key` inside `[section]`, or of a top-level
/// key when `section` is empty.
fn locate(src: &str, section: &str, key: &str) -> Option<(usize, usize)> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('[') {
            current = rest.split(']').next().unwrap_or("").trim().to_string();
            continue;
        }
        let (head, _) = trimmed.split_once('=').unwrap_or(("", ""));
        let head = head.trim().trim_matches('"');
        let dotted = format!("{section}.{key}");
        let hit = (current == section && head == key) || (current.is_empty() && !section.is_empty() && head == dotted);
        if hit || (section.is_empty() && current.is_empty() && head == key) {
            return Some((i + 1, line.len() - trimmed.len() + 1));
        }
    }
    None
}

impl RunConfig {
    /// Parses TOML text. Syntax and type errors carry the parser's line and
    /// column; semantic errors point at the offending key.
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate().map_err(|(section, key, msg)| match locate(src, section, &key) {
            Some((line, col)) => Error::Config(format!("line {line}, column {col}: {msg}")),
            None => Error::Config(msg),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String, String)> {
        for (name, value) in &self.tolerances {
            if !TOLERANCES.iter().any(|(n, _)| n == name) {
                let known: Vec<&str> = TOLERANCES.iter().map(|(n, _)| *n).collect();
                return Err(("tolerances", name.clone(), format!("unknown tolerance `{name}` (known: {})", known.join(", "))));
            }
            if !(value.is_finite() && (*value > 0.0 || name == "psd")) {
                return Err(("tolerances", name.clone(), format!("tolerance `{name}` must be positive, got {value}")));
            }
        }
        if let Some(step) = self.geodesic.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(("geodesic", "step".into(), format!("geodesic.step must be positive, got {step}")));
            }
        }
        if self.geodesic.length.is_some() && (self.geodesic.t0.is_some() || self.geodesic.t1.is_some()) {
            return Err(("geodesic", "length".into(), "geodesic.length conflicts with geodesic.t0/t1".into()));
        }
        if let Some(m) = &self.family.method {
            if !["foliation", "killing", "conjugate", "frame", "random"].contains(&m.as_str()) {
                return Err(("family", "method".into(), format!("unknown family method `{m}`")));
            }
            if m == "frame" && (self.family.y0.is_none() || self.family.y0p.is_none()) {
                return Err(("family", "method".into(), "family.method = \"frame\" needs family.y0 and family.y0p".into()));
            }
        }
        if self.subspace.indices.is_some() && self.subspace.coeffs.is_some() {
            return Err(("subspace", "coeffs".into(), "give subspace.indices or subspace.coeffs, not both".into()));
        }
        if self.jobs == Some(0) {
            return Err(("", "jobs".into(), "jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `name=value` tolerance overrides.
    pub fn apply_tolerances(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (name, value) =
                o.split_once('=').ok_or_else(|| Error::Config(format!("--tol expects name=value, got `{o}`")))?;
            let value: f64 = value.trim().parse().map_err(|_| Error::Config(format!("bad tolerance value in `{o}`")))?;
            self.tolerances.insert(name.trim().to_string(), value);
        }
        self.validate().map_err(|(_, _, msg)| Error::Config(msg))
    }

    /// Effective tolerance for a named check.
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .or_else(|| TOLERANCES.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
            .expect("tolerance name is in TOLERANCES")
    }

    /// Canonical `key = value` lines of every set field, in a fixed order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v}");
            }
        };
        let list = |v: &[f64]| format!("{v:?}");
        let rows = |v: &Vec<Vec<f64>>| format!("{v:?}");
        put("command", self.command.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("manifold.name", self.manifold.name.clone());
        put("manifold.params", (!self.manifold.params.is_empty()).then(|| list(&self.manifold.params)));
        put("foliation.name", self.foliation.name.clone());
        put("foliation.params", (!self.foliation.params.is_empty()).then(|| list(&self.foliation.params)));
        put("geodesic.start", self.geodesic.start.as_deref().map(list));
        put("geodesic.direction", self.geodesic.direction.as_deref().map(list));
        put("geodesic.t0", self.geodesic.t0.map(|v| format!("{v:e}")));
        put("geodesic.t1", self.geodesic.t1.map(|v| format!("{v:e}")));
        put("geodesic.length", self.geodesic.length.map(|v| format!("{v:e}")));
        put("geodesic.step", self.geodesic.step.map(|v| format!("{v:e}")));
        put("family.method", self.family.method.clone());
        put("family.y0", self.family.y0.as_ref().map(rows));
        put("family.y0p", self.family.y0p.as_ref().map(rows));
        put("family.vanishing", self.family.vanishing.map(|v| v.to_string()));
        put("subspace.indices", self.subspace.indices.as_ref().map(|v| format!("{v:?}")));
        put("subspace.coeffs", self.subspace.coeffs.as_ref().map(rows));
        put("transversal.field", self.transversal.field.map(|v| v.to_string()));
        put("transversal.include_windows", self.transversal.include_windows.map(|v| v.to_string()));
        put("decompose.window", self.decompose.window.map(|w| list(&w)));
        put("dual_leaf.point", self.dual_leaf.point.as_deref().map(list));
        put("dual_leaf.budget", self.dual_leaf.budget.map(|v| v.to_string()));
        put("dual_leaf.segment_length", self.dual_leaf.segment_length.map(|v| format!("{v:e}")));
        put("dual_leaf.record_spacing", self.dual_leaf.record_spacing.map(|v| format!("{v:e}")));
        put("dual_leaf.max_generations", self.dual_leaf.max_generations.map(|v| v.to_string()));
        put("dual_leaf.net", self.dual_leaf.net.map(|v| v.to_string()));
        put("access.points", self.access.points.as_ref().map(rows));
        put("access.count", self.access.count.map(|v| v.to_string()));
        put("access.depth", self.access.depth.map(|v| v.to_string()));
        put("access.expected", self.access.expected.map(|v| v.to_string()));
        put("flats.point", self.flats.point.as_deref().map(list));
        put("flats.x", self.flats.x.as_deref().map(list));
        put("flats.v", self.flats.v.as_deref().map(list));
        put("flats.extent", self.flats.extent.map(|v| format!("{v:e}")));
        for (k, v) in &self.tolerances {
            put(&format!("tolerances.{k}"), Some(format!("{v:e}")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_echoes_canonically() {
        let src = r#"
command = "geodesic"
seed = 7

[manifold]
name = "sphere"
params = [2, 1]

[geodesic]
start = [0.0, 0.0]
direction = [1.0, 0.0]
length = 3.0
step = 1e-3

[tolerances]
speed = 1e-9
"#;
        let cfg = RunConfig::parse(src).unwrap();
        assert_eq!(cfg.manifold.params, vec![2.0, 1.0]);
        assert_eq!(cfg.tolerance("speed"), 1e-9);
        assert_eq!(cfg.tolerance("transversal"), 1e-5);
        let echo = cfg.echo();
        assert!(echo.contains("manifold.name = sphere\n"));
        assert!(echo.contains("geodesic.length = 3e0\n"));
        assert_eq!(echo, RunConfig::parse(src).unwrap().echo());
    }

    #[test]
    fn dotted_keys_are_accepted() {
        let cfg = RunConfig::parse("manifold.name = \"euclidean\"\nmanifold.params = [3]\ngeodesic.step = 2e-3\n").unwrap();
        assert_eq!(cfg.manifold.name.as_deref(), Some("euclidean"));
        assert_eq!(cfg.geodesic.step, Some(2e-3));
    }

    #[test]
    fn errors_carry_positions() {
        let err = RunConfig::parse("[geodesic]\nstep = \"fast\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = RunConfig::parse("[manifold]\nname = \"sphere\"\nradius = 2\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("radius"), "{err}");
        let err = RunConfig::parse("[geodesic]\nstart = [0.0]\n\nstep = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 4, column 1") && err.contains("geodesic.step"), "{err}");
        let err = RunConfig::parse("[family]\nmethod = \"magic\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("magic"), "{err}");
        let err = RunConfig::parse("[tolerances]\nbogus = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("unknown tolerance `bogus`"), "{err}");
    }

    #[test]
    fn tolerance_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_tolerances(&["transversal=2e-5".into()]).unwrap();
        assert_eq!(cfg.tolerance("transversal"), 2e-5);
        assert!(cfg.apply_tolerances(&["transversal".into()]).is_err());
        assert!(cfg.apply_tolerances(&["nope=1".into()]).is_err());
        assert!(cfg.apply_tolerances(&["defect=-1".into()]).is_err());
    }
}
