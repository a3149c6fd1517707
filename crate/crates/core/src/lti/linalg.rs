//! Small dense linear-algebra helpers shared across modules.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Defective clusters can stall QR deflation at machine precision, so the
/// tolerance is relaxed step by step before giving up.
fn schur(a: &DMatrix<f64>) -> Result<Schur<f64, nalgebra::Dyn>> {
    [f64::EPSILON, 1e-14, 1e-12, 1e-10]
        .iter()
        .find_map(|&eps| Schur::try_new(a.clone(), eps, 10_000))
        .ok_or(Error::EigenFailure)
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(schur(a)?.complex_eigenvalues().iter().copied().collect())
}

/// Real Schur form `A = Q T Qᵀ`.
pub fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok(schur(a)?.unpack())
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn singular_values_c(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Numerical rank with threshold `tol * σ_max`.
pub fn rank_rel(sv: &[f64], tol: f64) -> usize {
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    if sv.is_empty() {
        return 1.0;
    }
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Solves `a x = b`; errors if `a` is singular.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_c(a: &DMatrix<C64>, b: &DMatrix<C64>, what: &str) -> Result<DMatrix<C64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Orthonormal bases `(range, null)` of the row space / null space of `m`
/// (`m` is r×n). Columns of `range` span `range(mᵀ)`, columns of `null`
/// span `ker(m)`. Rank threshold is `tol * σ_max`.
pub fn row_space_split(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.ncols();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let r = rank_rel(&sv, tol);
    // Singular values come sorted in descending order.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let range_idx: Vec<usize> = order[..r].to_vec();
    let null_idx: Vec<usize> = order[r..].to_vec();
    let range = vt.select_rows(&range_idx).transpose();
    let null = vt.select_rows(&null_idx).transpose();
    (range, null)
}

/// Column compression `m = basis * coeffs` with `basis` of full column rank.
pub fn column_compress(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (range, _) = row_space_split(&m.transpose(), tol);
    // range spans the column space of m (orthonormal columns).
    let coeffs = range.transpose() * m;
    (range, coeffs)
}

pub fn block_diag_mat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let smax = singular_values(m).into_iter().fold(0.0, f64::max);
    m.clone()
        .pseudo_inverse(tol * smax.max(f64::MIN_POSITIVE))
        .expect("pseudo-inverse with non-negative epsilon")
}
