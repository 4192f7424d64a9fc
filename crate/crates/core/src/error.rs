use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),
    #[error("unknown foliation `{0}`")]
    UnknownFoliation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point {point:?} is outside the domain of `{label}`")]
    OutOfDomain { label: String, point: Vec<f64> },
    #[error("metric is not positive definite at {0:?}")]
    SingularMetric(Vec<f64>),
    #[error("degenerate plane: Gram determinant {gram:e} below threshold {threshold:e}")]
    DegeneratePlane { gram: f64, threshold: f64 },
    #[error("geodesic left the domain at t = {t_exit}")]
    DomainExit { t_exit: f64 },
    #[error("initial velocity has norm {norm}, expected unit speed")]
    NotUnitSpeed { norm: f64 },
    #[error("parameter t = {t} outside [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("initial data not normal to the geodesic (defect {0:e})")]
    NotNormal(f64),
    #[error("expected {expected} Jacobi fields, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("family is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("family is not self-adjoint: Omega[{i}][{j}] = {value:e} exceeds {tol:e}")]
    NotSelfAdjoint { i: usize, j: usize, value: f64, tol: f64 },
    #[error("vector field is not Killing (defect {0:e})")]
    NotKilling(f64),
    #[error("{0}")]
    Completion(String),
    #[error("direction is not horizontal (defect {0:e})")]
    NotHorizontal(f64),
    #[error("shape operator estimation failed: {0}")]
    ShapeOperator(String),
    #[error("subfamily values collapse in rank at t = {t} outside singular windows")]
    RankCollapse { t: f64 },
    #[error("{0}")]
    Subfamily(String),
    #[error("hypothesis failure: negative curvature {min_sectional:e} detected")]
    NegativeCurvature { min_sectional: f64 },
    #[error("point is not regular for the foliation (leaf rank {rank}, generic {generic})")]
    NotRegular { rank: usize, generic: usize },
    #[error("accessibility rank inconclusive: {coarse} at step h, {fine} at step h/2")]
    Inconclusive { coarse: usize, fine: usize },
    #[error("dual-horizontal certificate failed (defect {0:e})")]
    Certificate(f64),
    #[error("insufficient samples for the stencil: {0}")]
    InsufficientSamples(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
