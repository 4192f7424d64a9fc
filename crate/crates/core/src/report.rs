//! Line-oriented text reports.
//!
//! Every report starts with the tool version and the echoed configuration,
//! then one record per check. Numbers are printed in fixed scientific
//! notation so identical inputs give identical bytes.

use std::fmt::Write as _;

/// How a check compares its value against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
    Exact,
}

/// Outcome of one numerical check.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub check: String,
    pub bound: Bound,
    /// Human-readable description of the evaluation grid.
    pub grid: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Parameter intervals left out of the maximum.
    pub excluded: Vec<(f64, f64)>,
    pub evaluated: usize,
    /// Grid points dropped because a stencil did not fit.
    pub trimmed: usize,
    /// Reference value reported next to the residual (e.g. a control run).
    pub control: Option<f64>,
    /// Named sub-maxima contributing to `max_residual`.
    pub components: Vec<(String, f64)>,
}

impl ResidualReport {
    /// A check that passes when `max_residual ≤ tolerance`.
    pub fn at_most(check: impl Into<String>, grid: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            bound: Bound::AtMost,
            grid: grid.into(),
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
            excluded: Vec::new(),
            evaluated: 0,
            trimmed: 0,
            control: None,
            components: Vec::new(),
        }
    }

    /// A check that passes when `value ≥ tolerance` (lower bounds such as
    /// control residuals or minimum eigenvalues).
    pub fn at_least(check: impl Into<String>, grid: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let mut r = Self::at_most(check, grid, value, tolerance);
        r.passed = value >= tolerance;
        r.bound = Bound::AtLeast;
        r
    }

    /// A check on an exact integer or boolean outcome.
    pub fn exact(check: impl Into<String>, grid: impl Into<String>, passed: bool) -> Self {
        let mut r = Self::at_most(check, grid, if passed { 0.0 } else { 1.0 }, 0.0);
        r.passed = passed;
        r.bound = Bound::Exact;
        r
    }

    /// Re-evaluates the check against a new tolerance (exact checks ignore it).
    pub fn set_tolerance(&mut self, tolerance: f64) {
        match self.bound {
            Bound::AtMost => self.passed = self.max_residual <= tolerance,
            Bound::AtLeast => self.passed = self.max_residual >= tolerance,
            Bound::Exact => return,
        }
        self.tolerance = tolerance;
    }

    pub fn record(&self) -> String {
        let mut s = format!(
            "check {} | grid {} | value {:.6e} | tol {:.1e} | {}",
            self.check,
            self.grid,
            self.max_residual,
            self.tolerance,
            if self.passed { "pass" } else { "FAIL" }
        );
        if self.evaluated > 0 || self.trimmed > 0 {
            let _ = write!(s, " | evaluated {} | trimmed {}", self.evaluated, self.trimmed);
        }
        if let Some(c) = self.control {
            let _ = write!(s, " | control {c:.6e}");
        }
        for (name, v) in &self.components {
            let _ = write!(s, " | {name} {v:.6e}");
        }
        if !self.excluded.is_empty() {
            let parts: Vec<String> = self.excluded.iter().map(|(a, b)| format!("[{a:.6},{b:.6}]")).collect();
            let _ = write!(s, " | excluded {}", parts.join(","));
        }
        s
    }
}

/// Accumulates header lines, free-form records and checks.
#[derive(Debug, Clone, Default)]
pub struct Report {
    lines: Vec<String>,
    checks: Vec<ResidualReport>,
}

impl Report {
    pub fn new(command: &str, config_echo: &str) -> Self {
        let mut lines = vec![format!("# {}", crate::TOOL_VERSION), format!("# command {command}")];
        for l in config_echo.lines().filter(|l| !l.trim().is_empty()) {
            lines.push(format!("# config {l}"));
        }
        Self { lines, checks: Vec::new() }
    }

    /// Adds an informational record.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("info {key} {value}"));
    }

    pub fn check(&mut self, r: ResidualReport) {
        self.lines.push(r.record());
        self.checks.push(r);
    }

    pub fn checks(&self) -> &[ResidualReport] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let mut out = self.lines.join("\n");
        let _ = write!(out, "\nsummary {} {passed}/{}\n", if self.passed() { "pass" } else { "FAIL" }, self.checks.len());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_stable() {
        let mut r = ResidualReport::at_most("eq1", "t in [0,1] step 1e-3", 1.25e-9, 1e-6);
        r.evaluated = 10;
        r.excluded.push((0.5, 0.51));
        assert_eq!(r.record(), "check eq1 | grid t in [0,1] step 1e-3 | value 1.250000e-9 | tol 1.0e-6 | pass | evaluated 10 | trimmed 0 | excluded [0.500000,0.510000]");
        let low = ResidualReport::at_least("control", "-", 1e-3, 1e-2);
        assert!(!low.passed);
        let mut rep = Report::new("suite", "seed = 1\n");
        rep.check(r);
        rep.check(low);
        let text = rep.render();
        assert!(text.starts_with("# dualfol "));
        assert!(text.contains("# config seed = 1\n"));
        assert!(text.ends_with("summary FAIL 1/2\n"));
    }
}
