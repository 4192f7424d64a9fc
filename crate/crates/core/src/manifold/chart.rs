use super::{Christoffel, RiemannTensor};
use crate::error::{Error, Result};
use crate::sampling::SeededRng;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

pub type MetricFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// First partials: element `k` is `∂_k g`.
pub type MetricD1Fn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;
/// Second partials: element `k * n + l` is `∂_k ∂_l g`.
pub type MetricD2Fn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut SeededRng) -> DVector<f64> + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
pub type EmbedFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Embedding in which Riemannian distance is a monotone function of the
/// chord: `2R·asin(c / 2R)` on a round sphere of radius `R`, the chord
/// itself when `R = 0`.
#[derive(Clone)]
pub struct Chordal {
    pub embed: EmbedFn,
    pub radius: f64,
}

impl Chordal {
    pub fn distance_from_chord(&self, chord: f64) -> f64 {
        if self.radius == 0.0 {
            chord
        } else {
            2.0 * self.radius * (chord / (2.0 * self.radius)).min(1.0).asin()
        }
    }
}

/// A manifold given by a single coordinate chart.
///
/// Missing metric derivatives fall back to fourth-order central differences
/// with step `1e-4 · (1 + |x|)`.
#[derive(Clone)]
pub struct ChartManifold {
    pub dim: usize,
    pub label: String,
    pub metric: MetricFn,
    pub metric_d1: Option<MetricD1Fn>,
    pub metric_d2: Option<MetricD2Fn>,
    pub domain: DomainFn,
    pub sampler: SamplerFn,
    pub distance: Option<DistanceFn>,
    pub chordal: Option<Chordal>,
    pub nonnegative: bool,
    pub compact: bool,
}

impl fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("analytic_d1", &self.metric_d1.is_some())
            .field("analytic_d2", &self.metric_d2.is_some())
            .finish()
    }
}

fn fd_step(x: &DVector<f64>) -> f64 {
    1e-4 * (1.0 + x.norm())
}

fn central4<T, F>(x: &DVector<f64>, k: usize, h: f64, f: F) -> T
where
    F: Fn(&DVector<f64>) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let at = |s: f64| {
        let mut y = x.clone();
        y[k] += s * h;
        f(&y)
    };
    (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) * (1.0 / (12.0 * h))
}

impl ChartManifold {
    /// Chart with only a metric; derivatives are finite-differenced.
    pub fn from_metric(dim: usize, label: impl Into<String>, metric: MetricFn, domain: DomainFn, sampler: SamplerFn) -> Self {
        Self {
            dim,
            label: label.into(),
            metric,
            metric_d1: None,
            metric_d2: None,
            domain,
            sampler,
            distance: None,
            chordal: None,
            nonnegative: false,
            compact: false,
        }
    }

    pub fn metric_d1(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match &self.metric_d1 {
            Some(d1) => d1(x),
            None => {
                let h = fd_step(x);
                (0..self.dim).map(|k| central4(x, k, h, |y| (self.metric)(y))).collect()
            }
        }
    }

    pub fn metric_d2(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        if let Some(d2) = &self.metric_d2 {
            return d2(x);
        }
        let n = self.dim;
        let h = fd_step(x);
        let mut out = vec![DMatrix::zeros(n, n); n * n];
        for k in 0..n {
            // ∂_k of the first-partials vector.
            let dk: Vec<DMatrix<f64>> = {
                let at = |s: f64| {
                    let mut y = x.clone();
                    y[k] += s * h;
                    self.metric_d1(&y)
                };
                let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
                (0..n).map(|l| (&m2[l] - &p2[l] + (&p1[l] - &m1[l]) * 8.0) / (12.0 * h)).collect()
            };
            for l in 0..n {
                out[k * n + l] = dk[l].clone();
            }
        }
        // Symmetrize mixed partials.
        for k in 0..n {
            for l in (k + 1)..n {
                let avg = (&out[k * n + l] + &out[l * n + k]) * 0.5;
                out[k * n + l] = avg.clone();
                out[l * n + k] = avg;
            }
        }
        out
    }

    fn inverse_metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = (self.metric)(x);
        g.cholesky().map(|c| c.inverse()).ok_or_else(|| Error::SingularMetric(x.iter().copied().collect()))
    }

    /// Lowered symbols `Γ_mjk = ½(∂_j g_mk + ∂_k g_mj − ∂_m g_jk)`.
    fn lowered(d1: &[DMatrix<f64>], n: usize) -> Vec<f64> {
        let mut low = vec![0.0; n * n * n];
        for m in 0..n {
            for j in 0..n {
                for k in 0..n {
                    low[(m * n + j) * n + k] = 0.5 * (d1[j][(m, k)] + d1[k][(m, j)] - d1[m][(j, k)]);
                }
            }
        }
        low
    }

    pub fn christoffel(&self, x: &DVector<f64>) -> Result<Christoffel> {
        let n = self.dim;
        let ginv = self.inverse_metric(x)?;
        let low = Self::lowered(&self.metric_d1(x), n);
        let mut out = Christoffel::zeros(n);
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += ginv[(l, m)] * low[(m * n + j) * n + k];
                    }
                    out.set(l, j, k, acc);
                }
            }
        }
        Ok(out)
    }

    pub fn riemann(&self, x: &DVector<f64>) -> Result<RiemannTensor> {
        let n = self.dim;
        let ginv = self.inverse_metric(x)?;
        let d1 = self.metric_d1(x);
        let d2 = self.metric_d2(x);
        let low = Self::lowered(&d1, n);
        let gamma = {
            let mut out = Christoffel::zeros(n);
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let acc: f64 = (0..n).map(|m| ginv[(l, m)] * low[(m * n + j) * n + k]).sum();
                        out.set(l, j, k, acc);
                    }
                }
            }
            out
        };
        // dgamma[i][l][j][k] = ∂_i Γ^l_jk
        let mut dgamma = vec![0.0; n * n * n * n];
        for i in 0..n {
            let dginv = -(&ginv * &d1[i] * &ginv);
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for m in 0..n {
                            let dlow = 0.5 * (d2[i * n + j][(m, k)] + d2[i * n + k][(m, j)] - d2[i * n + m][(j, k)]);
                            acc += dginv[(l, m)] * low[(m * n + j) * n + k] + ginv[(l, m)] * dlow;
                        }
                        dgamma[((i * n + l) * n + j) * n + k] = acc;
                    }
                }
            }
        }
        let mut r = RiemannTensor::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = dgamma[((i * n + l) * n + j) * n + k] - dgamma[((j * n + l) * n + i) * n + k];
                        for m in 0..n {
                            acc += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                        }
                        r.set(l, i, j, k, acc);
                    }
                }
            }
        }
        Ok(r)
    }
}
