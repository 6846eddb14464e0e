use std::os::raw::{c_char, c_int};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Laplacian;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

extern "C" {
    fn openblas_set_num_threads(n: c_int);
}

/// Caps the threads used by the BLAS/LAPACK backend.
pub fn set_blas_threads(n: usize) {
    let n = c_int::try_from(n.max(1)).unwrap_or(c_int::MAX);
    // SAFETY: plain setter in the linked OpenBLAS; takes no pointers.
    unsafe { openblas_set_num_threads(n) }
}

pub fn dense_eig(l: &Laplacian) -> Result<Eigen> {
    symmetric_eig(l.matrix.to_dense())
}

/// Symmetric eigendecomposition (LAPACK `dsyevd`), eigenvalues ascending.
/// Only the lower triangle of `a` is read.
pub fn symmetric_eig(a: DMatrix<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let dim = i32::try_from(n).map_err(|_| Error::TooLarge { n, limit: i32::MAX as usize })?;
    let mut data: Vec<f64> = a.as_slice().to_vec();
    let mut values = vec![0.0; n];
    let (jobz, uplo) = (b'V' as c_char, b'L' as c_char);
    let mut info = 0;
    let (mut work_query, mut iwork_query) = (0.0, 0);
    // SAFETY: every pointer refers to a live buffer of the size LAPACK
    // expects for an n×n column-major matrix with leading dimension n; the
    // first call is a workspace query (lwork = liwork = -1).
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &dim, data.as_mut_ptr(), &dim, values.as_mut_ptr(),
            &mut work_query, &-1, &mut iwork_query, &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::ConvergenceFailure(format!("dsyevd workspace query, info = {info}")));
    }
    let lwork = work_query as i32;
    let liwork = iwork_query;
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    // SAFETY: as above, with workspaces of the queried sizes.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &dim, data.as_mut_ptr(), &dim, values.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::ConvergenceFailure(format!("dsyevd, n = {n}, info = {info}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure(format!("dsyevd returned non-finite eigenvalues, n = {n}")));
    }
    Ok(Eigen {
        values,
        vectors: DMatrix::from_vec(n, n, data),
    })
}
