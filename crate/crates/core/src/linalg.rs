//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

/// Singular values of `m`, sorted descending, together with the left
/// singular vectors and the full right singular basis (columns).
///
/// Wide matrices are decomposed through their transpose and the right basis
/// is completed by Gram-Schmidt; zero-padding them to a square matrix trips
/// inaccurate SVD results.
pub fn svd_full(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let (sv, u, v) = if r < c {
        let svd = m.transpose().svd(true, true);
        (svd.singular_values, svd.v_t.expect("v_t requested").transpose(), svd.u.expect("u requested"))
    } else {
        let svd = m.clone().svd(true, true);
        (svd.singular_values, svd.u.expect("u requested"), svd.v_t.expect("v_t requested").transpose())
    };
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let sv_sorted: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let u_sorted = DMatrix::from_fn(r, order.len(), |i, j| u[(i, order[j])]);
    let mut cols: Vec<DVector<f64>> = order.iter().map(|&j| v.column(j).into_owned()).collect();
    complete_basis(&mut cols, c);
    (sv_sorted, u_sorted, DMatrix::from_columns(&cols))
}

/// Extends orthonormal `cols` to a basis of R^dim with coordinate vectors,
/// taking at each step the one with the largest residual.
fn complete_basis(cols: &mut Vec<DVector<f64>>, dim: usize) {
    while cols.len() < dim {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            for _ in 0..2 {
                for q in cols.iter() {
                    let a = q.dot(&e);
                    e -= q * a;
                }
            }
            let n = e.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(e / n);
            }
        }
        cols.push(best.expect("dim > 0"));
    }
}

/// Orthonormal basis (columns) of the column space of `m`, keeping singular
/// directions above `rel_tol * sigma_max` (and above `abs_floor`).
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let (sv, u, _) = svd_full(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let keep = sv
        .iter()
        .take(u.ncols())
        .filter(|&&s| s > rel_tol * smax && s > abs_floor)
        .count();
    u.columns(0, keep).into_owned()
}

/// Orthonormal basis of the (numerical) null space of `m`: right singular
/// vectors whose singular value is at most `threshold`.
pub fn null_space(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let (sv, _, v) = svd_full(m);
    let idx: Vec<usize> = (0..c).filter(|&i| sv.get(i).copied().unwrap_or(0.0) <= threshold).collect();
    DMatrix::from_fn(c, idx.len(), |i, j| v[(i, idx[j])])
}

/// Ratio of the smallest to the largest singular value (0 for empty or zero
/// matrices).
pub fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    let k = m.ncols().min(m.nrows());
    if k < m.ncols() {
        return 0.0;
    }
    sv.min() / max
}

/// Orthonormal basis of the orthogonal complement of the column span of the
/// orthonormal matrix `basis` inside R^dim.
pub fn complement(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::identity(dim, dim);
    }
    null_space(&basis.transpose(), 1e-10)
}

/// Rotates the orthonormal columns of `b` to best match `prev`
/// (orthogonal Procrustes). Both span subspaces of the same dimension.
pub fn procrustes_align(b: &DMatrix<f64>, prev: &DMatrix<f64>) -> DMatrix<f64> {
    if b.ncols() == 0 || b.ncols() != prev.ncols() {
        return b.clone();
    }
    let m = b.transpose() * prev;
    let svd = m.svd(true, true);
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    b * q
}

/// Gram-Schmidt orthonormalisation against the inner product `g`, dropping
/// vectors whose residual norm falls below `tol` times their original norm.
pub fn gram_schmidt(vectors: &[DVector<f64>], g: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let n0 = (v.dot(&(g * v))).max(0.0).sqrt();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = e.dot(&(g * &w));
                w -= e * c;
            }
        }
        let n = (w.dot(&(g * &w))).max(0.0).sqrt();
        if n > tol * n0 {
            out.push(w / n);
        }
    }
    out
}

/// Five-point central first derivative with spacing `h`.
pub fn stencil_d1(f: [f64; 5], h: f64) -> f64 {
    (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h)
}

/// Five-point central second derivative with spacing `h`.
pub fn stencil_d2(f: [f64; 5], h: f64) -> f64 {
    (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
}

/// Frobenius-style max absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let n = null_space(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((m * &n).norm() < 1e-14);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let prev = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let b = &prev * rot;
        let aligned = procrustes_align(&b, &prev);
        assert!((aligned - prev).norm() < 1e-14);
    }

    #[test]
    fn stencils_exact_on_quartics() {
        let h = 0.1;
        let f = |x: f64| x.powi(4) - 2.0 * x.powi(3) + x;
        let x0 = 0.7;
        let vals = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|k| f(x0 + k * h));
        let d1 = 4.0 * x0.powi(3) - 6.0 * x0 * x0 + 1.0;
        let d2 = 12.0 * x0 * x0 - 12.0 * x0;
        assert!((stencil_d1(vals, h) - d1).abs() < 1e-10);
        assert!((stencil_d2(vals, h) - d2).abs() < 1e-9);
    }
}
