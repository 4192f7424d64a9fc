use super::{Christoffel, RiemannTensor};
use crate::error::{Error, Result};
use crate::sampling::{unit_vector, SeededRng};
use nalgebra::{DMatrix, DVector};

/// How the global frame is realised on points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameGroup {
    /// Unit quaternions with the left-invariant frame `q·i, q·j, q·k`.
    Su2,
    /// Translations of R^n with the coordinate frame.
    Abelian,
}

fn qmul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn quat(x: &DVector<f64>) -> [f64; 4] {
    [x[0], x[1], x[2], x[3]]
}

fn pure(v: &DVector<f64>) -> [f64; 4] {
    [0.0, v[0], v[1], v[2]]
}

impl FrameGroup {
    pub fn point_dim(self, dim: usize) -> usize {
        match self {
            FrameGroup::Su2 => 4,
            FrameGroup::Abelian => dim,
        }
    }

    pub(crate) fn position_rate(self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            FrameGroup::Su2 => DVector::from_row_slice(&qmul(quat(x), pure(v))),
            FrameGroup::Abelian => v.clone(),
        }
    }

    pub(crate) fn displace(self, x: &DVector<f64>, v: &DVector<f64>, s: f64) -> DVector<f64> {
        match self {
            FrameGroup::Su2 => {
                let theta = s * v.norm();
                let e = if theta == 0.0 {
                    [1.0, 0.0, 0.0, 0.0]
                } else {
                    let k = theta.sin() / v.norm();
                    [theta.cos(), k * v[0], k * v[1], k * v[2]]
                };
                DVector::from_row_slice(&qmul(quat(x), e))
            }
            FrameGroup::Abelian => x + v * s,
        }
    }

    pub(crate) fn normalize(self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FrameGroup::Su2 => x / x.norm(),
            FrameGroup::Abelian => x.clone(),
        }
    }

    pub(crate) fn log_approx(self, x: &DVector<f64>, y: &DVector<f64>, _dim: usize) -> DVector<f64> {
        match self {
            FrameGroup::Su2 => {
                let xc = [x[0], -x[1], -x[2], -x[3]];
                let d = qmul(xc, quat(y));
                DVector::from_row_slice(&[d[1], d[2], d[3]])
            }
            FrameGroup::Abelian => y - x,
        }
    }

    pub(crate) fn sample(self, rng: &mut SeededRng, dim: usize) -> DVector<f64> {
        match self {
            FrameGroup::Su2 => unit_vector(rng, 4),
            FrameGroup::Abelian => unit_vector(rng, dim) * 2.0,
        }
    }
}

/// A Lie group with a left-invariant metric, described by constant structure
/// coefficients `[e_i, e_j] = c_ij^k e_k` and constant inner products
/// `⟨e_i, e_j⟩`.
#[derive(Debug, Clone)]
pub struct FrameManifold {
    pub dim: usize,
    pub label: String,
    pub group: FrameGroup,
    /// `structure[(i * n + j) * n + k] = c_ij^k`.
    pub structure: Vec<f64>,
    pub frame_metric: DMatrix<f64>,
    pub(crate) christoffel: Christoffel,
    pub(crate) riemann: RiemannTensor,
}

impl FrameManifold {
    pub fn new(label: impl Into<String>, group: FrameGroup, structure: Vec<f64>, frame_metric: DMatrix<f64>) -> Result<Self> {
        let n = frame_metric.nrows();
        if frame_metric.ncols() != n || structure.len() != n * n * n {
            return Err(Error::InvalidParameter("frame data has inconsistent dimensions".into()));
        }
        if (&frame_metric - frame_metric.transpose()).amax() > 1e-14 || frame_metric.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter("frame metric must be symmetric positive definite".into()));
        }
        if group == FrameGroup::Su2 && n != 3 {
            return Err(Error::InvalidParameter("SU(2) frame requires dimension 3".into()));
        }
        let c = |i: usize, j: usize, k: usize| structure[(i * n + j) * n + k];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if (c(i, j, k) + c(j, i, k)).abs() > 1e-14 {
                        return Err(Error::InvalidParameter(format!("structure constants not antisymmetric at ({i},{j},{k})")));
                    }
                }
            }
        }
        // Jacobi identity: Σ_m c_ij^m c_mk^l + cyclic = 0.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s: f64 = (0..n)
                            .map(|m| c(i, j, m) * c(m, k, l) + c(j, k, m) * c(m, i, l) + c(k, i, m) * c(m, j, l))
                            .sum();
                        if s.abs() > 1e-12 {
                            return Err(Error::InvalidParameter("structure constants violate the Jacobi identity".into()));
                        }
                    }
                }
            }
        }

        let g = &frame_metric;
        let ginv = g.clone().try_inverse().expect("positive definite");
        // Koszul: 2⟨∇_i e_j, e_k⟩ = ⟨[e_i,e_j],e_k⟩ − ⟨[e_j,e_k],e_i⟩ + ⟨[e_k,e_i],e_j⟩
        let br = |i: usize, j: usize, k: usize| -> f64 { (0..n).map(|m| c(i, j, m) * g[(m, k)]).sum() };
        let mut christoffel = Christoffel::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let val: f64 = (0..n)
                        .map(|k| ginv[(l, k)] * 0.5 * (br(i, j, k) - br(j, k, i) + br(k, i, j)))
                        .sum();
                    christoffel.set(l, i, j, val);
                }
            }
        }
        // R^l_ijk = Γ^m_jk Γ^l_im − Γ^m_ik Γ^l_jm − c_ij^m Γ^l_mk
        let mut riemann = RiemannTensor::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let val: f64 = (0..n)
                            .map(|m| {
                                christoffel.get(m, j, k) * christoffel.get(l, i, m)
                                    - christoffel.get(m, i, k) * christoffel.get(l, j, m)
                                    - c(i, j, m) * christoffel.get(l, m, k)
                            })
                            .sum();
                        riemann.set(l, i, j, k, val);
                    }
                }
            }
        }
        Ok(Self { dim: n, label: label.into(), group, structure, frame_metric, christoffel, riemann })
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub(crate) fn bracket(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.structure_constant(i, j, k) * u[i] * w[j];
                }
            }
            acc
        })
    }

    pub(crate) fn in_domain(&self, x: &DVector<f64>) -> bool {
        match self.group {
            FrameGroup::Su2 => (x.norm() - 1.0).abs() <= 1e-6,
            FrameGroup::Abelian => true,
        }
    }

    pub(crate) fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        let round = (&self.frame_metric - DMatrix::identity(self.dim, self.dim)).amax() < 1e-15;
        match self.group {
            FrameGroup::Su2 if round => Some((x.dot(y) / (x.norm() * y.norm())).clamp(-1.0, 1.0).acos()),
            FrameGroup::Abelian => Some(((x - y).transpose() * &self.frame_metric * (x - y))[(0, 0)].sqrt()),
            _ => None,
        }
    }
}
