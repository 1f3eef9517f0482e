//! Thin LAPACK wrappers for the dense decompositions used throughout.
//!
//! Hermitian eigendecomposition goes through the divide-and-conquer
//! routines (`zheevd`/`dsyevd`), which are considerably faster than the
//! QR-iteration drivers at the matrix sizes produced by Fock-space
//! truncation. A matrix whose imaginary part is exactly zero is routed
//! to the real-symmetric solver.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(values, vectors)` with column `j` of `vectors` the
/// eigenvector of `values[j]`, so `h = V diag(w) V^dag`.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Numerical("empty matrix".into()));
    }
    if h.iter().all(|c| c.im == 0.0) {
        let (w, v) = dsyevd(h)?;
        Ok((w, v.mapv(|x| C64::new(x, 0.0))))
    } else {
        zheevd(h)
    }
}

fn zheevd(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = h.nrows();
    let nn = n as i32;
    // Column-major copy; for Hermitian input the transpose just swaps
    // which triangle LAPACK reads.
    let mut a: Vec<C64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            a.push(h[(i, j)]);
        }
    }
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let jobz = b'V' as i8;
    let uplo = b'L' as i8;
    unsafe {
        let mut lwork_q = C64::new(0.0, 0.0);
        let mut lrwork_q = 0.0f64;
        let mut liwork_q = 0i32;
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            &mut lwork_q as *mut _ as *mut _,
            &(-1i32),
            &mut lrwork_q,
            &(-1i32),
            &mut liwork_q,
            &(-1i32),
            &mut info,
        );
        if info != 0 {
            return Err(Error::Lapack {
                routine: "zheevd(query)",
                info,
            });
        }
        let lwork = lwork_q.re as i32;
        let lrwork = lrwork_q as i32;
        let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
        let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork_q.max(1) as usize];
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr() as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork_q,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    // `a` now holds eigenvectors column-major: entry (i,j) at a[j*n+i].
    let mut v = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            v[(i, j)] = a[j * n + i];
        }
    }
    Ok((Array1::from(w), v))
}

fn dsyevd(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = h.nrows();
    let nn = n as i32;
    let mut a: Vec<f64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            a.push(h[(i, j)].re);
        }
    }
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let jobz = b'V' as i8;
    let uplo = b'L' as i8;
    unsafe {
        let mut lwork_q = 0.0f64;
        let mut liwork_q = 0i32;
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            &mut lwork_q,
            &(-1i32),
            &mut liwork_q,
            &(-1i32),
            &mut info,
        );
        if info != 0 {
            return Err(Error::Lapack {
                routine: "dsyevd(query)",
                info,
            });
        }
        let lwork = lwork_q as i32;
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork_q.max(1) as usize];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork_q,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevd",
            info,
        });
    }
    let mut v = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            v[(i, j)] = a[j * n + i];
        }
    }
    Ok((Array1::from(w), v))
}

/// Singular values of a general complex matrix, descending.
pub fn singular_values(a: &Array2<C64>) -> Result<Array1<f64>> {
    use ndarray_linalg::SVD;
    let (_, s, _) = a
        .svd(false, false)
        .map_err(|e| Error::Numerical(format!("svd failed: {e}")))?;
    Ok(s)
}

/// Full thin SVD `a = u diag(s) vt`.
pub fn svd(a: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    use ndarray_linalg::SVD;
    let (u, s, vt) = a
        .svd(true, true)
        .map_err(|e| Error::Numerical(format!("svd failed: {e}")))?;
    Ok((u.expect("svd u requested"), s, vt.expect("svd vt requested")))
}

/// Max entrywise deviation from hermiticity.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Symmetrize `(m + m^dag)/2` in place.
pub fn hermitize(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::{Eigh, UPLO};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha12Rng, complex: bool) -> Array2<C64> {
        let mut m = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = if complex { rng.random::<f64>() - 0.5 } else { 0.0 };
                m[(i, j)] = C64::new(re, im);
            }
        }
        let mt = m.t().mapv(|c| c.conj());
        &m + &mt
    }

    #[test]
    fn eigh_matches_reference_solver() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &complex in &[false, true] {
            let h = random_hermitian(24, &mut rng, complex);
            let (w, v) = eigh(&h).unwrap();
            let (w_ref, _) = h.eigh(UPLO::Lower).unwrap();
            for (a, b) in w.iter().zip(w_ref.iter()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            // Reconstruction h = V diag(w) V^dag.
            let mut rec = Array2::<C64>::zeros((24, 24));
            for k in 0..24 {
                let col = v.column(k);
                for i in 0..24 {
                    for j in 0..24 {
                        rec[(i, j)] += col[i] * col[j].conj() * w[k];
                    }
                }
            }
            let err = (&rec - &h).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "reconstruction error {err}");
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut a = Array2::<C64>::zeros((3, 3));
        a[(0, 0)] = C64::new(3.0, 0.0);
        a[(1, 1)] = C64::new(0.0, -2.0);
        a[(2, 2)] = C64::new(1.0, 0.0);
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12);
        assert!((s[1] - 2.0).abs() < 1e-12);
        assert!((s[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitize_removes_defect() {
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 1)] = C64::new(1.0, 2.0);
        m[(1, 0)] = C64::new(1.0, 1.0);
        assert!(hermiticity_defect(&m) > 0.0);
        hermitize(&mut m);
        assert!(hermiticity_defect(&m) < 1e-15);
    }
}
