//! Dense measurement operators with a cached thin SVD.
//!
//! A [`DenseOperator`] wraps an `m x n` matrix `A` with `m <= n` and full row
//! rank. Construction factors `A = U diag(s) V^T` once; every derived map
//! (pseudoinverse, row/null-space projectors, inverse Gram) is applied as a
//! chain of matrix-vector products against those factors.

use faer::linalg::matmul::matmul;
use faer::{Accum, ColMut, ColRef, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// Default relative singular-value tolerance used by [`DenseOperator::new`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Which map [`DenseOperator::apply`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyMode {
    /// `A v`, takes an n-vector.
    Forward,
    /// `A^T v`, takes an m-vector.
    Adjoint,
    /// `A^+ v = A^T (A A^T)^{-1} v`, takes an m-vector.
    Pinv,
    /// `P_A v = A^+ A v`, takes an n-vector.
    RowProject,
    /// `Q_A v = v - P_A v`, takes an n-vector.
    NullProject,
}

/// Extreme eigenvalues of `A A^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_min / sigma_max`, in `(0, 1]`.
    pub condition_ratio: f64,
}

/// An `m x n` full-row-rank operator with cached factorizations.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    a: Mat<f64>,
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
    pinv: Mat<f64>,
    rank_tol: f64,
}

impl DenseOperator {
    /// Factor `matrix` with the default rank tolerance.
    pub fn new(matrix: Mat<f64>) -> Result<Self> {
        build_operator(matrix, DEFAULT_RANK_TOL)
    }

    /// Build from a row-major buffer.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "row-major buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        build_operator(
            Mat::from_fn(rows, cols, |i, j| data[i * cols + j]),
            DEFAULT_RANK_TOL,
        )
    }

    /// Assemble from a matrix whose thin SVD is already known.
    ///
    /// Used when the factors can be derived exactly from another operator,
    /// e.g. composition with an orthogonal basis.
    pub(crate) fn from_factors(
        a: Mat<f64>,
        u: Mat<f64>,
        s: Vec<f64>,
        v: Mat<f64>,
        rank_tol: f64,
    ) -> Self {
        let pinv = pseudoinverse(u.as_ref(), &s, v.as_ref());
        Self {
            a,
            u,
            s,
            v,
            pinv,
            rank_tol,
        }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.a.as_ref()
    }

    /// The materialized `n x m` pseudoinverse.
    pub fn pinv_matrix(&self) -> MatRef<'_, f64> {
        self.pinv.as_ref()
    }

    /// Left singular vectors, `m x m`.
    pub fn left_vectors(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }

    /// Right singular vectors of the row space, `n x m`.
    pub fn right_vectors(&self) -> MatRef<'_, f64> {
        self.v.as_ref()
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.a.col(j).iter().copied().collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols())
            .map(|j| self.a.col(j).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    pub fn apply(&self, mode: ApplyMode, v: &[f64]) -> Result<Vec<f64>> {
        match mode {
            ApplyMode::Forward => self.forward(v),
            ApplyMode::Adjoint => self.adjoint(v),
            ApplyMode::Pinv => self.pinv(v),
            ApplyMode::RowProject => self.row_project(v),
            ApplyMode::NullProject => self.null_project(v),
        }
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("forward", self.cols(), v)?;
        Ok(matvec(self.a.as_ref(), v))
    }

    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint", self.rows(), v)?;
        Ok(matvec(self.a.transpose(), v))
    }

    pub fn pinv(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("pinv", self.rows(), v)?;
        Ok(matvec(self.pinv.as_ref(), v))
    }

    pub fn row_project(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("row_project", self.cols(), v)?;
        let coords = matvec(self.v.transpose(), v);
        Ok(matvec(self.v.as_ref(), &coords))
    }

    pub fn null_project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let row = self.row_project(v)?;
        Ok(v.iter().zip(&row).map(|(a, b)| a - b).collect())
    }

    /// `(A A^T)^{-1} r` for an m-vector `r`.
    pub fn gram_inverse(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("gram_inverse", self.rows(), r)?;
        let mut c = matvec(self.u.transpose(), r);
        for (ci, si) in c.iter_mut().zip(&self.s) {
            *ci /= si * si;
        }
        Ok(matvec(self.u.as_ref(), &c))
    }

    /// `diag(s)^{-1} U^T r`, an isometric image of `(A A^T)^{-1/2} r`.
    ///
    /// `||whiten(r)|| = ||(A A^T)^{-1/2} r||` for every `r`.
    pub fn whiten(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("whiten", self.rows(), r)?;
        let mut c = matvec(self.u.transpose(), r);
        for (ci, si) in c.iter_mut().zip(&self.s) {
            *ci /= si;
        }
        Ok(c)
    }

    pub fn spectral_summary(&self) -> SpectralSummary {
        spectral_summary(self)
    }
}

/// Factor `matrix` and enforce full row rank relative to `rank_tol * s_max`.
pub fn build_operator(matrix: Mat<f64>, rank_tol: f64) -> Result<DenseOperator> {
    let (m, n) = (matrix.nrows(), matrix.ncols());
    if m == 0 || n == 0 || m > n {
        return Err(Error::WideShape { rows: m, cols: n });
    }
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(Error::NonFinite("rank tolerance"));
    }
    for j in 0..n {
        if matrix.col(j).iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
    }
    let svd = matrix
        .thin_svd()
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let (largest, smallest) = (s[0], s[m - 1]);
    let tol = rank_tol * largest;
    if !(smallest > tol) || largest == 0.0 {
        return Err(Error::RankDeficient {
            smallest,
            largest,
            tol,
        });
    }
    Ok(DenseOperator::from_factors(
        matrix,
        svd.U().to_owned(),
        s,
        svd.V().to_owned(),
        rank_tol,
    ))
}

pub fn apply(op: &DenseOperator, mode: ApplyMode, v: &[f64]) -> Result<Vec<f64>> {
    op.apply(mode, v)
}

pub fn spectral_summary(op: &DenseOperator) -> SpectralSummary {
    let s = op.singular_values();
    let sigma_max = s[0] * s[0];
    let sigma_min = s[s.len() - 1] * s[s.len() - 1];
    SpectralSummary {
        sigma_max,
        sigma_min,
        condition_ratio: sigma_min / sigma_max,
    }
}

fn pseudoinverse(u: MatRef<'_, f64>, s: &[f64], v: MatRef<'_, f64>) -> Mat<f64> {
    let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / s[j]);
    let mut out = Mat::zeros(v.nrows(), u.nrows());
    matmul(
        out.as_mut(),
        Accum::Replace,
        scaled.as_ref(),
        u.transpose(),
        1.0,
        Par::Seq,
    );
    out
}

fn check_len(context: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// `a x` for a dense matrix view and a slice.
pub(crate) fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    matmul(
        ColMut::from_slice_mut(&mut out).as_mat_mut(),
        Accum::Replace,
        a,
        ColRef::from_slice(x).as_mat(),
        1.0,
        Par::Seq,
    );
    out
}

/// `a b` for two dense views.
pub(crate) fn matmul_owned(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}
