//! Dense and sparse linear algebra used throughout the crate.
//!
//! Dense Hermitian eigendecompositions, singular values and matrix products
//! are delegated to the system LAPACKE/CBLAS (zheevd, dsyevd, zgesdd, zgemm).
//! Everything here works on row-major `ndarray` containers; eigenvectors and
//! Takagi vectors are returned as matrix columns.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use std::os::raw::{c_char, c_double, c_int};

use crate::error::{Error, Result};

const ROW_MAJOR: c_int = 101;

extern "C" {
    fn LAPACKE_zheevd(
        layout: c_int,
        jobz: c_char,
        uplo: c_char,
        n: c_int,
        a: *mut C64,
        lda: c_int,
        w: *mut c_double,
    ) -> c_int;

    fn LAPACKE_dsyevd(
        layout: c_int,
        jobz: c_char,
        uplo: c_char,
        n: c_int,
        a: *mut c_double,
        lda: c_int,
        w: *mut c_double,
    ) -> c_int;

    fn LAPACKE_zgesdd(
        layout: c_int,
        jobz: c_char,
        m: c_int,
        n: c_int,
        a: *mut C64,
        lda: c_int,
        s: *mut c_double,
        u: *mut C64,
        ldu: c_int,
        vt: *mut C64,
        ldvt: c_int,
    ) -> c_int;

    fn cblas_zgemm(
        layout: c_int,
        transa: c_int,
        transb: c_int,
        m: c_int,
        n: c_int,
        k: c_int,
        alpha: *const C64,
        a: *const C64,
        lda: c_int,
        b: *const C64,
        ldb: c_int,
        beta: *const C64,
        c: *mut C64,
        ldc: c_int,
    );
}

/// How an operand enters a matrix product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    Transpose,
    Adjoint,
}

impl Trans {
    fn cblas(self) -> c_int {
        match self {
            Trans::No => 111,
            Trans::Transpose => 112,
            Trans::Adjoint => 113,
        }
    }

    fn op_dims(self, rows: usize, cols: usize) -> (usize, usize) {
        match self {
            Trans::No => (rows, cols),
            _ => (cols, rows),
        }
    }
}

/// `op(a) * op(b)` through BLAS zgemm.
pub fn zgemm(ta: Trans, a: &Array2<C64>, tb: Trans, b: &Array2<C64>) -> Array2<C64> {
    let (m, ka) = ta.op_dims(a.nrows(), a.ncols());
    let (kb, n) = tb.op_dims(b.nrows(), b.ncols());
    assert_eq!(
        ka, kb,
        "zgemm inner dimensions do not match: {ka} vs {kb}"
    );
    let a_std = a.as_standard_layout();
    let b_std = b.as_standard_layout();
    let mut out = Array2::<C64>::zeros((m, n));
    if m == 0 || n == 0 || ka == 0 {
        return out;
    }
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    unsafe {
        cblas_zgemm(
            ROW_MAJOR,
            ta.cblas(),
            tb.cblas(),
            m as c_int,
            n as c_int,
            ka as c_int,
            &one,
            a_std.as_ptr(),
            a.ncols().max(1) as c_int,
            b_std.as_ptr(),
            b.ncols().max(1) as c_int,
            &zero,
            out.as_mut_ptr(),
            n.max(1) as c_int,
        );
    }
    out
}

/// `a * b`.
pub fn mm(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    zgemm(Trans::No, a, Trans::No, b)
}

/// Eigendecomposition of a Hermitian matrix (zheevd).
///
/// Returns eigenvalues in ascending order and the corresponding orthonormal
/// eigenvectors as the columns of the second array.  Only the lower triangle
/// of the input is referenced.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigh expects a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut a = h.as_standard_layout().into_owned();
    let mut w = Array1::<f64>::zeros(n);
    let info = unsafe {
        LAPACKE_zheevd(
            ROW_MAJOR,
            b'V' as c_char,
            b'L' as c_char,
            n as c_int,
            a.as_mut_ptr(),
            n.max(1) as c_int,
            w.as_mut_ptr(),
        )
    };
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    Ok((w, a))
}

/// Eigendecomposition of a real symmetric matrix (dsyevd), same conventions
/// as [`eigh`].
pub fn eigh_real(h: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigh_real expects a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut a = h.as_standard_layout().into_owned();
    let mut w = Array1::<f64>::zeros(n);
    let info = unsafe {
        LAPACKE_dsyevd(
            ROW_MAJOR,
            b'V' as c_char,
            b'L' as c_char,
            n as c_int,
            a.as_mut_ptr(),
            n.max(1) as c_int,
            w.as_mut_ptr(),
        )
    };
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevd",
            info,
        });
    }
    Ok((w, a))
}

/// Singular values of a complex matrix, descending (zgesdd, values only).
pub fn singular_values(a: &Array2<C64>) -> Result<Array1<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut work = a.as_standard_layout().into_owned();
    let mut s = Array1::<f64>::zeros(m.min(n));
    if m == 0 || n == 0 {
        return Ok(s);
    }
    // u and vt are not referenced with jobz = 'N' but LAPACKE still
    // validates the leading dimensions.
    let mut dummy = [C64::new(0.0, 0.0)];
    let info = unsafe {
        LAPACKE_zgesdd(
            ROW_MAJOR,
            b'N' as c_char,
            m as c_int,
            n as c_int,
            work.as_mut_ptr(),
            n as c_int,
            s.as_mut_ptr(),
            dummy.as_mut_ptr(),
            m as c_int,
            dummy.as_mut_ptr(),
            n as c_int,
        )
    };
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgesdd",
            info,
        });
    }
    Ok(s)
}

/// Takagi factorization of a complex symmetric matrix: `a = Q diag(s) Q^T`
/// with orthonormal columns `Q` and `s >= 0` descending.
///
/// Uses the real embedding `[[X, Y], [Y, -X]]` of `a = X + iY`, whose
/// eigenpairs `(s, (u; v))` with `s > 0` give Takagi vectors `q = u + iv`.
/// Columns with `s <= tol * s_max` are dropped, so the returned rank equals
/// the numerical rank of `a`.
pub fn takagi_symmetric(a: &Array2<C64>, tol: f64) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "takagi expects a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let asym = a
        .iter()
        .zip(a.t().iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    let scale = a.iter().map(|x| x.norm()).fold(0.0_f64, f64::max);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::Dimension(format!(
            "takagi input is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    let mut embed = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let x = 0.5 * (a[(i, j)].re + a[(j, i)].re);
            let y = 0.5 * (a[(i, j)].im + a[(j, i)].im);
            embed[(i, j)] = x;
            embed[(i, j + n)] = y;
            embed[(i + n, j)] = y;
            embed[(i + n, j + n)] = -x;
        }
    }
    let (w, vecs) = eigh_real(&embed)?;
    let s_max = w.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let cut = tol * s_max;
    // Positive eigenvalues descending = Takagi values.
    let mut kept: Vec<usize> = (0..2 * n).filter(|&i| w[i] > cut).collect();
    kept.sort_by(|&i, &j| w[j].partial_cmp(&w[i]).unwrap());
    let mut q = Array2::<C64>::zeros((n, kept.len()));
    let mut s = Vec::with_capacity(kept.len());
    for (col, &idx) in kept.iter().enumerate() {
        s.push(w[idx]);
        for row in 0..n {
            q[(row, col)] = C64::new(vecs[(row, idx)], vecs[(row + n, idx)]);
        }
    }
    Ok((s, q))
}

/// Sparse Hermitian matrix in CSR form.
///
/// Stores every nonzero (both triangles); used by the polynomial propagator
/// where repeated sparse times dense-block products dominate.
#[derive(Debug, Clone)]
pub struct SparseHermitian {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<C64>,
}

impl SparseHermitian {
    /// Build from an upper-triangle entry list (`i <= j`); the conjugate
    /// entries are filled in automatically.  Duplicate positions are summed.
    pub fn from_upper_triangle(n: usize, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, C64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) outside {n}x{n} matrix"
                )));
            }
            if i > j {
                return Err(Error::Dimension(format!(
                    "expected upper-triangle entries, got ({i}, {j})"
                )));
            }
            if i == j {
                if v.im.abs() > 1e-14 * v.re.abs().max(1.0) {
                    return Err(Error::Dimension(format!(
                        "diagonal entry ({i}, {i}) is not real: {v}"
                    )));
                }
                rows[i].push((j as u32, C64::new(v.re, 0.0)));
            } else {
                rows[i].push((j as u32, v));
                rows[j].push((i as u32, v.conj()));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(u32, C64)> = Vec::with_capacity(r.len());
            for &(c, v) in r.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Ok(SparseHermitian {
            n,
            row_ptr,
            col,
            val,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// `out = self * x` for a dense block of column vectors.
    pub fn spmm(&self, x: &Array2<C64>, out: &mut Array2<C64>) {
        assert_eq!(x.nrows(), self.n, "spmm dimension mismatch");
        assert_eq!(out.nrows(), self.n, "spmm dimension mismatch");
        assert_eq!(out.ncols(), x.ncols(), "spmm dimension mismatch");
        let w = x.ncols();
        let xs = x.as_slice().expect("spmm input must be standard layout");
        let os = out
            .as_slice_mut()
            .expect("spmm output must be standard layout");
        for i in 0..self.n {
            let row = &mut os[i * w..(i + 1) * w];
            row.fill(C64::new(0.0, 0.0));
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.val[k];
                let src = &xs[self.col[k] as usize * w..self.col[k] as usize * w + w];
                for (r, s) in row.iter_mut().zip(src.iter()) {
                    *r += a * s;
                }
            }
        }
    }

    /// Interval `[lo, hi]` guaranteed to contain every eigenvalue
    /// (Gershgorin discs).
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut center = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col[k] as usize == i {
                    center = self.val[k].re;
                } else {
                    radius += self.val[k].norm();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Add `delta[i]` to each diagonal entry, inserting missing diagonals.
    pub fn shift_diagonal(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.n, "diagonal shift length mismatch");
        // The builders always emit a full diagonal, so insertion is not
        // expected; fall back to a rebuild if an entry is missing.
        let mut missing = Vec::new();
        for i in 0..self.n {
            let mut found = false;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col[k] as usize == i {
                    self.val[k] += C64::new(delta[i], 0.0);
                    found = true;
                    break;
                }
            }
            if !found && delta[i] != 0.0 {
                missing.push(i);
            }
        }
        if !missing.is_empty() {
            let mut entries: Vec<(usize, usize, C64)> = Vec::with_capacity(self.nnz());
            for i in 0..self.n {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.col[k] as usize;
                    if j >= i {
                        entries.push((i, j, self.val[k]));
                    }
                }
            }
            for &i in &missing {
                entries.push((i, i, C64::new(delta[i], 0.0)));
            }
            *self = SparseHermitian::from_upper_triangle(self.n, &entries)
                .expect("rebuild from existing entries cannot fail");
        }
    }

    /// Scale all entries by `1/rho` and shift the diagonal by `-center/rho`,
    /// mapping the spectrum interval `[center-rho, center+rho]` onto `[-1, 1]`.
    pub fn scaled_shifted(&self, center: f64, rho: f64) -> SparseHermitian {
        let mut out = self.clone();
        let inv = 1.0 / rho;
        for v in out.val.iter_mut() {
            *v *= inv;
        }
        let shift = vec![-center * inv; self.n];
        out.shift_diagonal(&shift);
        out
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[(i, self.col[k] as usize)] = self.val[k];
            }
        }
        out
    }

    /// Iterate stored entries of the upper triangle (`i <= j`).
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).filter_map(move |k| {
                let j = self.col[k] as usize;
                (j >= i).then_some((i, j, self.val[k]))
            })
        })
    }

    /// Value at `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col[k] as usize == j {
                return self.val[k];
            }
        }
        C64::new(0.0, 0.0)
    }
}

/// Frobenius norm squared.
pub fn frob2(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Flat (elementwise) inner product `sum conj(a) * b`.
pub fn flat_inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    assert_eq!(a.dim(), b.dim(), "flat_inner shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}
