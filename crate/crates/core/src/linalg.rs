//! Moore-Penrose pseudoinverse and minimum-norm least squares via the thin
//! singular value decomposition.
//!
//! The decomposition itself is delegated to `faer`, always run sequentially
//! so results are bit-reproducible. Singular values at or below
//! `max(m, n) * eps * sigma_max` are treated as zero.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{Accum, Mat, MatRef, Par};
use ndarray::Array2;

use crate::error::{Error, Result};

struct ThinSvd {
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
}

fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_ndarray(a: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

fn thin_svd(a: &Array2<f64>) -> Result<ThinSvd> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let a = to_faer(a);
    let mut u = Mat::zeros(m, k);
    let mut v = Mat::zeros(n, k);
    let mut s = Diag::zeros(k);
    let par = Par::Seq;
    let req = svd::svd_scratch::<f64>(
        m,
        n,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        Default::default(),
    );
    let mut buf = MemBuffer::new(req);
    svd::svd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let s = (0..k).map(|i| s[i]).collect();
    Ok(ThinSvd { u, s, v })
}

/// Cut-off below which a singular value is treated as zero.
pub fn rank_tolerance(nrows: usize, ncols: usize, sigma_max: f64) -> f64 {
    nrows.max(ncols) as f64 * f64::EPSILON * sigma_max
}

impl ThinSvd {
    fn inverted_values(&self, nrows: usize, ncols: usize) -> Vec<f64> {
        let sigma_max = self.s.iter().copied().fold(0.0, f64::max);
        let tol = rank_tolerance(nrows, ncols, sigma_max);
        self.s
            .iter()
            .map(|&s| if s > tol { 1.0 / s } else { 0.0 })
            .collect()
    }
}

fn check_non_empty(a: &Array2<f64>) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("pseudoinverse of an empty matrix".into()));
    }
    Ok(())
}

/// `A⁺ = V Σ⁺ Uᵀ`.
pub fn pseudoinverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    check_non_empty(a)?;
    let (m, n) = a.dim();
    let svd = thin_svd(a)?;
    let inv = svd.inverted_values(m, n);
    // V Σ⁺
    let mut vs = svd.v.clone();
    for (j, &w) in inv.iter().enumerate() {
        vs.col_mut(j).iter_mut().for_each(|x| *x *= w);
    }
    let mut out = Mat::zeros(n, m);
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, vs.as_ref(), svd.u.transpose(), 1.0, Par::Seq);
    Ok(to_ndarray(out.as_ref()))
}

/// `A⁺ B`, the minimum-norm minimizer of `‖A X − B‖_F`, computed without
/// forming `A⁺`.
pub fn pinv_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    check_non_empty(a)?;
    let (m, n) = a.dim();
    if b.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.nrows(),
        });
    }
    let svd = thin_svd(a)?;
    let inv = svd.inverted_values(m, n);
    let b = to_faer(b);
    // Σ⁺ Uᵀ B
    let mut ub = Mat::zeros(inv.len(), b.ncols());
    faer::linalg::matmul::matmul(ub.as_mut(), Accum::Replace, svd.u.transpose(), b.as_ref(), 1.0, Par::Seq);
    for (i, &w) in inv.iter().enumerate() {
        ub.row_mut(i).iter_mut().for_each(|x| *x *= w);
    }
    let mut out = Mat::zeros(n, b.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, svd.v.as_ref(), ub.as_ref(), 1.0, Par::Seq);
    Ok(to_ndarray(out.as_ref()))
}
