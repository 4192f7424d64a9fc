//! C ABI for dualfol.
//!
//! Objects cross the boundary as opaque handles created by `*_new` calls and
//! released by the matching `*_free`. Every fallible call returns a
//! [`DfStatus`]; on failure `df_last_error()` describes the cause until the
//! next failing call on the same thread. Matrices are column-major.

use dualfol::decomposition::{verify_decomposition, DecompositionOptions};
use dualfol::geodesic::{integrate_geodesic_window, GeodesicPath};
use dualfol::jacobi::{JacobiFamily, NormalFrame};
use dualfol::manifold::{parse_manifold_spec, Manifold};
use dualfol::transversal::{build_split, SubfamilySpec, TransversalOptions};
use dualfol::Error;
use nalgebra::{DMatrix, DVector};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

/// Status of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range index.
    InvalidArgument = 1,
    /// Unknown manifold or invalid catalog parameter.
    UnknownName = 2,
    /// A point or path left the manifold's domain.
    Domain = 3,
    /// The Jacobi family is not self-adjoint.
    NotSelfAdjoint = 4,
    /// A hypothesis of the verifier does not hold (negative curvature).
    Inapplicable = 5,
    /// Any other numerical failure.
    Numerical = 6,
    /// A panic was caught at the boundary.
    Internal = 7,
}

pub struct DfManifold(Arc<Manifold>);
pub struct DfGeodesic(Arc<GeodesicPath>);
pub struct DfFamily(Arc<JacobiFamily>);

/// Dimensions and defects of a decomposition.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfDecomposition {
    pub vanishing: usize,
    pub parallel: usize,
    pub direct_sum_defect: f64,
    pub orthogonality_defect: f64,
    /// Negative when the quotient is trivial.
    pub quotient_riccati: f64,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DfStatus {
    match err {
        Error::UnknownManifold(_) | Error::UnknownFoliation(_) | Error::InvalidParameter(_) => DfStatus::UnknownName,
        Error::OutOfDomain { .. } | Error::DomainExit { .. } | Error::OutOfRange { .. } => DfStatus::Domain,
        Error::NotSelfAdjoint { .. } => DfStatus::NotSelfAdjoint,
        Error::NegativeCurvature { .. } => DfStatus::Inapplicable,
        _ => DfStatus::Numerical,
    }
}

struct Fail(DfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(DfStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DfStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn df_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => panic!("version contains a nul byte"),
    };
    VERSION.as_ptr()
}

/// Parses a manifold spec such as `sphere(2,1)`.
///
/// # Safety
/// `spec` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn df_manifold_new(spec: *const c_char, out: *mut *mut DfManifold) -> DfStatus {
    guard(|| {
        if spec.is_null() {
            return Err(invalid("spec is null"));
        }
        let s = CStr::from_ptr(spec).to_str().map_err(|_| invalid("spec is not UTF-8"))?;
        let m = parse_manifold_spec(s)?;
        write(out, Box::into_raw(Box::new(DfManifold(Arc::new(m)))), "out")
    })
}

/// # Safety
/// `m` must come from `df_manifold_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_manifold_free(m: *mut DfManifold) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Intrinsic dimension, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_manifold_dim(m: *const DfManifold) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Length of a point representation, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_manifold_point_dim(m: *const DfManifold) -> usize {
    m.as_ref().map_or(0, |m| m.0.point_dim())
}

/// Sectional curvature of the plane spanned by `u` and `v` at `x`.
///
/// # Safety
/// `x` holds `point_dim` values, `u` and `v` hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn df_manifold_sectional(m: *const DfManifold, x: *const f64, u: *const f64, v: *const f64, out: *mut f64) -> DfStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.0;
        let x = DVector::from_row_slice(slice(x, m.point_dim(), "x")?);
        let u = DVector::from_row_slice(slice(u, m.dim(), "u")?);
        let v = DVector::from_row_slice(slice(v, m.dim(), "v")?);
        m.check_domain(&x)?;
        write(out, m.sectional(&x, &u, &v)?, "out")
    })
}

/// Integrates the geodesic through `x0` with direction `v0` (normalized
/// here) over `[t0, t1]`.
///
/// # Safety
/// `x0` holds `point_dim` values, `v0` holds `dim` values.
#[no_mangle]
pub unsafe extern "C" fn df_geodesic_new(
    m: *const DfManifold,
    x0: *const f64,
    v0: *const f64,
    t0: f64,
    t1: f64,
    step: f64,
    out: *mut *mut DfGeodesic,
) -> DfStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.0;
        let x0 = DVector::from_row_slice(slice(x0, m.point_dim(), "x0")?);
        let v0 = DVector::from_row_slice(slice(v0, m.dim(), "v0")?);
        m.check_domain(&x0)?;
        let n = m.norm(&x0, &v0);
        if !(n > 0.0) {
            return Err(invalid("v0 is the zero vector"));
        }
        let path = integrate_geodesic_window(m, &x0, &(v0 / n), t0, t1, step)?;
        write(out, Box::into_raw(Box::new(DfGeodesic(Arc::new(path)))), "out")
    })
}

/// # Safety
/// `g` must come from `df_geodesic_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_geodesic_free(g: *mut DfGeodesic) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_geodesic_len(g: *const DfGeodesic) -> usize {
    g.as_ref().map_or(0, |g| g.0.len())
}

/// Parameter, position and velocity of sample `k`. `x` and `v` may be null.
///
/// # Safety
/// Non-null `x` holds `point_dim` slots, non-null `v` holds `dim` slots.
#[no_mangle]
pub unsafe extern "C" fn df_geodesic_sample(g: *const DfGeodesic, k: usize, t: *mut f64, x: *mut f64, v: *mut f64) -> DfStatus {
    guard(|| {
        let g = &handle(g, "geodesic")?.0;
        let s = g.samples().get(k).ok_or_else(|| invalid(&format!("sample {k} out of range ({} samples)", g.len())))?;
        if !t.is_null() {
            t.write(s.t);
        }
        if !x.is_null() {
            ptr::copy_nonoverlapping(s.x.as_ptr(), x, s.x.len());
        }
        if !v.is_null() {
            ptr::copy_nonoverlapping(s.v.as_ptr(), v, s.v.len());
        }
        Ok(())
    })
}

/// Rank of the normal bundle along the geodesic (family size).
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn df_geodesic_normal_rank(g: *const DfGeodesic) -> usize {
    g.as_ref().map_or(0, |g| g.0.manifold().dim().saturating_sub(1))
}

/// Family with initial frame coefficients `y0`, `y0p` (both `r × r`,
/// column-major, `r` the normal rank). Fails with `NotSelfAdjoint` unless
/// the data are Lagrangian.
///
/// # Safety
/// `y0` and `y0p` hold `r·r` values.
#[no_mangle]
pub unsafe extern "C" fn df_family_new(g: *const DfGeodesic, y0: *const f64, y0p: *const f64, r: usize, out: *mut *mut DfFamily) -> DfStatus {
    guard(|| {
        let g = handle(g, "geodesic")?.0.clone();
        let frame = Arc::new(NormalFrame::new(g)?);
        if r != frame.rank() {
            return Err(invalid(&format!("r = {r}, normal rank is {}", frame.rank())));
        }
        let a = DMatrix::from_column_slice(r, r, slice(y0, r * r, "y0")?);
        let b = DMatrix::from_column_slice(r, r, slice(y0p, r * r, "y0p")?);
        let fam = JacobiFamily::from_frame_data(&frame, a, b)?;
        fam.require_self_adjoint()?;
        write(out, Box::into_raw(Box::new(DfFamily(Arc::new(fam)))), "out")
    })
}

/// # Safety
/// `f` must come from `df_family_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_family_free(f: *mut DfFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Vanishing/parallel decomposition over the whole path.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn df_family_decompose(f: *const DfFamily, seed: u64, out: *mut DfDecomposition) -> DfStatus {
    guard(|| {
        let fam = &handle(f, "family")?.0;
        let rep = verify_decomposition(fam, &DecompositionOptions { seed, ..DecompositionOptions::default() })?;
        let d = DfDecomposition {
            vanishing: rep.dims.0,
            parallel: rep.dims.1,
            direct_sum_defect: rep.direct_sum_defect,
            orthogonality_defect: rep.orthogonality_defect,
            quotient_riccati: rep.quotient_riccati.unwrap_or(-1.0),
            passed: rep.passed(),
        };
        write(out, d, "out")
    })
}

/// Transversal Jacobi residual of the subfamily spanned by the `d` columns
/// of `coeffs` (`r × d`, column-major), probed with the field on which the
/// O'Neill term is most prominent. `control` receives the residual with that
/// term dropped and may be null.
///
/// # Safety
/// `coeffs` holds `r·d` values.
#[no_mangle]
pub unsafe extern "C" fn df_family_transversal_residual(
    f: *const DfFamily,
    coeffs: *const f64,
    d: usize,
    residual: *mut f64,
    control: *mut f64,
) -> DfStatus {
    guard(|| {
        let fam = &handle(f, "family")?.0;
        let r = fam.size();
        let c = DMatrix::from_column_slice(r, d, slice(coeffs, r * d, "coeffs")?);
        let spec = SubfamilySpec::new(fam, c)?;
        let split = build_split(fam.clone(), &spec, TransversalOptions::default())?;
        let rep = split.transversal_residual(&split.oneill_probe())?;
        if !control.is_null() {
            control.write(rep.control.unwrap_or(0.0));
        }
        write(residual, rep.max_residual, "residual")
    })
}
