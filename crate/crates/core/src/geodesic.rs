//! Geodesic integration and parallel transport.
//!
//! Paths are integrated with fixed-step classical RK4 on a uniform grid
//! `t_k = k·h` that contains the initial parameter `t = 0`. A window
//! `[t_start, t_end]` is snapped outward to grid points.

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::ode::{cubic_hermite, rk4_step};
use nalgebra::DVector;
use std::io::Write;
use std::sync::Arc;

/// Default integrator step (unit-speed parameter).
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub v: DVector<f64>,
}

/// A discretised unit-speed geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    manifold: Arc<Manifold>,
    step: f64,
    samples: Vec<Sample>,
    origin: usize,
}

/// A vector field parallel along a path, one value per sample.
#[derive(Debug, Clone)]
pub struct TransportedFrame {
    pub values: Vec<DVector<f64>>,
}

fn geodesic_rhs(m: &Manifold, y: &DVector<f64>, extra: usize) -> DVector<f64> {
    let p = m.point_dim();
    let n = m.dim();
    let x = y.rows(0, p).into_owned();
    let v = y.rows(p, n).into_owned();
    let gamma = m.christoffel_unchecked(&x).expect("connection evaluation failed");
    let mut out = DVector::zeros(y.len());
    out.rows_mut(0, p).copy_from(&m.position_rate(&x, &v));
    out.rows_mut(p, n).copy_from(&(-gamma.contract(&v, &v)));
    for e in 0..extra {
        let off = p + n + e * n;
        let w = y.rows(off, n).into_owned();
        out.rows_mut(off, n).copy_from(&(-gamma.contract(&v, &w)));
    }
    out
}

fn pack(x: &DVector<f64>, v: &DVector<f64>, ws: &[DVector<f64>]) -> DVector<f64> {
    let mut data: Vec<f64> = x.iter().chain(v.iter()).copied().collect();
    for w in ws {
        data.extend(w.iter());
    }
    DVector::from_vec(data)
}

/// Result of advancing `(x, v, w_1..w_m)` by one RK4 step of the coupled
/// geodesic/transport system.
pub struct CoupledState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub ws: Vec<DVector<f64>>,
}

pub(crate) fn coupled_step(m: &Manifold, x: &DVector<f64>, v: &DVector<f64>, ws: &[DVector<f64>], h: f64) -> CoupledState {
    let p = m.point_dim();
    let n = m.dim();
    let y = pack(x, v, ws);
    let f = |_t: f64, y: &DVector<f64>| geodesic_rhs(m, y, ws.len());
    let y1 = rk4_step(&f, 0.0, &y, h);
    CoupledState {
        x: m.normalize_point(&y1.rows(0, p).into_owned()),
        v: y1.rows(p, n).into_owned(),
        ws: (0..ws.len()).map(|e| y1.rows(p + n + e * n, n).into_owned()).collect(),
    }
}

/// Follows the geodesic from `(x, v)` for parameter `s` (either sign),
/// transporting `ws` along it: whole steps of `step`, then one partial step.
/// Speed is not required to be 1.
pub fn shoot(m: &Manifold, x: &DVector<f64>, v: &DVector<f64>, ws: &[DVector<f64>], s: f64, step: f64) -> Result<CoupledState> {
    if !(step > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("bad shooting step {step} or length {s}")));
    }
    m.check_domain(x)?;
    let h = step.copysign(s);
    let whole = (s.abs() / step).floor() as usize;
    let mut state = CoupledState { x: x.clone(), v: v.clone(), ws: ws.to_vec() };
    for k in 0..=whole {
        let dh = if k < whole { h } else { s - whole as f64 * h };
        if dh == 0.0 {
            continue;
        }
        state = coupled_step(m, &state.x, &state.v, &state.ws, dh);
        if !m.in_domain(&state.x) {
            return Err(Error::DomainExit { t_exit: (k as f64 * h + dh).abs() });
        }
    }
    Ok(state)
}

fn check_unit_speed(m: &Manifold, x0: &DVector<f64>, v0: &DVector<f64>) -> Result<()> {
    let norm = m.norm(x0, v0);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitSpeed { norm });
    }
    Ok(())
}

fn grid_count(length: f64, step: f64) -> usize {
    if length <= 0.0 {
        0
    } else {
        (length / step - 1e-9).ceil().max(0.0) as usize
    }
}

/// Integrates in one direction; returns the samples after the start and the
/// exit parameter if the domain was left.
fn integrate_direction(m: &Manifold, x0: &DVector<f64>, v0: &DVector<f64>, count: usize, h: f64) -> (Vec<Sample>, Option<f64>) {
    let mut out = Vec::with_capacity(count);
    let (mut x, mut v) = (x0.clone(), v0.clone());
    for k in 1..=count {
        let s = coupled_step(m, &x, &v, &[], h);
        if !m.in_domain(&s.x) {
            return (out, Some(k as f64 * h));
        }
        x = s.x;
        v = s.v;
        out.push(Sample { t: k as f64 * h, x: x.clone(), v: v.clone() });
    }
    (out, None)
}

/// Integrates the geodesic with `c(0) = x0`, `ċ(0) = v0` on `[0, t1]`.
pub fn integrate_geodesic(m: &Arc<Manifold>, x0: &DVector<f64>, v0: &DVector<f64>, t1: f64, step: f64) -> Result<GeodesicPath> {
    integrate_geodesic_window(m, x0, v0, 0.0, t1, step)
}

/// Integrates the geodesic through `c(0) = x0` on `[t_start, t_end]`
/// (`t_start ≤ 0 ≤ t_end`).
pub fn integrate_geodesic_window(
    m: &Arc<Manifold>,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t_start: f64,
    t_end: f64,
    step: f64,
) -> Result<GeodesicPath> {
    let (path, exit) = integrate_partial(m, x0, v0, t_start, t_end, step)?;
    match exit {
        Some(t_exit) => Err(Error::DomainExit { t_exit }),
        None => Ok(path),
    }
}

/// Like [`integrate_geodesic_window`], but on a domain exit returns the
/// in-domain part of the path together with the exit parameter (the one
/// closest to the origin if both directions exit).
pub fn integrate_partial(
    m: &Arc<Manifold>,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t_start: f64,
    t_end: f64,
    step: f64,
) -> Result<(GeodesicPath, Option<f64>)> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if t_start > 0.0 || t_end < 0.0 {
        return Err(Error::InvalidParameter("window must contain t = 0".into()));
    }
    m.check_domain(x0)?;
    check_unit_speed(m, x0, v0)?;
    let (fwd, exit_f) = integrate_direction(m, x0, v0, grid_count(t_end, step), step);
    let (bwd, exit_b) = integrate_direction(m, x0, v0, grid_count(-t_start, step), -step);
    let origin = bwd.len();
    let mut samples: Vec<Sample> = bwd
        .into_iter()
        .rev()
        .map(|s| Sample { t: -s.t, ..s })
        .collect();
    samples.push(Sample { t: 0.0, x: x0.clone(), v: v0.clone() });
    samples.extend(fwd);
    // Times stay exact multiples of the step.
    for (k, s) in samples.iter_mut().enumerate() {
        s.t = (k as f64 - origin as f64) * step;
    }
    let exit = match (exit_f, exit_b) {
        (Some(a), Some(b)) => Some(if a <= b.abs() { a } else { b }),
        (a, b) => a.or(b),
    };
    Ok((GeodesicPath { manifold: m.clone(), step, samples, origin }, exit))
}

impl GeodesicPath {
    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the sample at `t = 0`.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn t0(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t1(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn time(&self, k: usize) -> f64 {
        self.samples[k].t
    }

    /// Grid index of the sample at or just below `t`.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let (t0, t1) = (self.t0(), self.t1());
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(Error::OutOfRange { t, t0, t1 });
        }
        let k = ((t - t0) / self.step + 1e-9).floor() as usize;
        Ok(k.min(self.samples.len() - 1))
    }

    fn acceleration(&self, s: &Sample) -> DVector<f64> {
        let gamma = self.manifold.christoffel_unchecked(&s.x).expect("connection evaluation failed");
        -gamma.contract(&s.v, &s.v)
    }

    /// Position and velocity at `t` by cubic Hermite interpolation (exact at
    /// sample nodes).
    pub fn evaluate(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.index_at(t)?;
        let a = &self.samples[k];
        if (t - a.t).abs() <= 1e-12 * (1.0 + t.abs()) || k + 1 == self.samples.len() {
            return Ok((a.x.clone(), a.v.clone()));
        }
        let b = &self.samples[k + 1];
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (w, _) = cubic_hermite(s);
        let m = &self.manifold;
        let (xa_dot, xb_dot) = (m.position_rate(&a.x, &a.v), m.position_rate(&b.x, &b.v));
        let x = &a.x * w[0] + xa_dot * (h * w[1]) + &b.x * w[2] + xb_dot * (h * w[3]);
        let v = &a.v * w[0] + self.acceleration(a) * (h * w[1]) + &b.v * w[2] + self.acceleration(b) * (h * w[3]);
        Ok((m.normalize_point(&x), v))
    }

    /// Geodesic-equation residual `ẍ + Γ(ẋ, ẋ)` of the Hermite interpolant at
    /// the midpoint between samples `k` and `k+1` (chart backends only).
    pub fn midpoint_residual(&self, k: usize) -> f64 {
        let a = &self.samples[k];
        let b = &self.samples[k + 1];
        let h = b.t - a.t;
        let x_mid = (&a.x + &b.x) * 0.5 + (&a.v - &b.v) * (h / 8.0);
        let xdd_mid = (&b.v - &a.v) / h;
        let xd_mid = (&b.x - &a.x) * (1.5 / h) - (&a.v + &b.v) * 0.25;
        let gamma = self.manifold.christoffel_unchecked(&x_mid).expect("connection evaluation failed");
        (xdd_mid + gamma.contract(&xd_mid, &xd_mid)).norm()
    }

    /// Integrates the coupled geodesic/transport system step by step from the
    /// origin, calling `visit(k, state_at_k)` for each node.
    pub(crate) fn propagate(&self, w0: &[DVector<f64>]) -> Vec<Vec<DVector<f64>>> {
        let n_s = self.samples.len();
        let mut out: Vec<Vec<DVector<f64>>> = vec![Vec::new(); n_s];
        out[self.origin] = w0.to_vec();
        for k in self.origin..n_s - 1 {
            let s = &self.samples[k];
            out[k + 1] = coupled_step(&self.manifold, &s.x, &s.v, &out[k], self.step).ws;
        }
        for k in (1..=self.origin).rev() {
            let s = &self.samples[k];
            out[k - 1] = coupled_step(&self.manifold, &s.x, &s.v, &out[k], -self.step).ws;
        }
        out
    }

    /// Parallel transport of `w0` (given at `t = 0`).
    pub fn parallel_transport(&self, w0: &DVector<f64>) -> TransportedFrame {
        let values = self.propagate(std::slice::from_ref(w0)).into_iter().map(|mut ws| ws.remove(0)).collect();
        TransportedFrame { values }
    }

    /// Writes `t, x_1..x_p, v_1..v_n` as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.manifold.point_dim();
        let n = self.manifold.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("v_{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![format!("{:.17e}", s.t)];
            row.extend(s.x.iter().map(|c| format!("{c:.17e}")));
            row.extend(s.v.iter().map(|c| format!("{c:.17e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
