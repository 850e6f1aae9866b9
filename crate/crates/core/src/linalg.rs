//! Dense complex linear algebra helpers shared by the kernels and solvers.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn fro_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Thin singular value decomposition `a = u * diag(s) * v_h`.
pub struct ThinSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_h: CMatrix,
}

pub fn thin_svd(a: &CMatrix) -> Result<ThinSvd> {
    if !all_finite(a.iter()) {
        return Err(Error::numerical("SVD input contains non-finite entries"));
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(ThinSvd {
            u: CMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            v_h: CMatrix::zeros(0, n),
        });
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical(format!("SVD of {m}x{n} matrix did not converge")))?;
    let u = svd.u.ok_or_else(|| Error::numerical("SVD returned no left vectors"))?;
    let v_h = svd
        .v_t
        .ok_or_else(|| Error::numerical("SVD returned no right vectors"))?;
    Ok(ThinSvd {
        u,
        singular_values: svd.singular_values.iter().copied().collect(),
        v_h,
    })
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> Result<usize> {
    let svd = thin_svd(a)?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(svd.singular_values.iter().filter(|&&s| s > rel_tol * smax).count())
}

/// Column-major reshape of a vector into an `rows x cols` matrix.
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    debug_assert_eq!(v.len(), rows * cols);
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn vec_of(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// `sum_i conj(a_i) * b_i`.
pub fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    c(re, im)
}

/// Largest eigenvalue of the Hermitian PSD operator `x -> apply(x)` on vectors
/// of length `dim`, by power iteration from a fixed pseudo-random start.
pub fn power_iteration<F>(dim: usize, tol: f64, max_iter: usize, mut apply: F) -> Result<f64>
where
    F: FnMut(&CVector) -> CVector,
{
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_9a11);
    let mut v = CVector::from_fn(dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let n0 = vec_norm(&v);
    v /= c(n0, 0.0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        let next = vec_norm(&w);
        if !next.is_finite() {
            return Err(Error::numerical("power iteration produced a non-finite iterate"));
        }
        if next == 0.0 {
            return Ok(0.0);
        }
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        v = w / c(next, 0.0);
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Hermitian Gram matrix `a^H a`, column-parallel with a fixed summation order
/// per entry so that results do not depend on the thread count.
pub fn gram(a: &CMatrix) -> CMatrix {
    use rayon::prelude::*;
    let d = a.ncols();
    let cols: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let cj = col_slice(a, j);
            (0..=j).map(|i| dot_h(col_slice(a, i), cj)).collect()
        })
        .collect();
    let mut g = CMatrix::zeros(d, d);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    for i in 0..d {
        g[(i, i)].im = 0.0;
    }
    g
}

pub fn col_slice(a: &CMatrix, j: usize) -> &[C64] {
    let m = a.nrows();
    &a.as_slice()[j * m..(j + 1) * m]
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn real_matrix_to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| c(x, 0.0))
}
