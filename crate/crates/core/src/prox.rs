//! Closed-form proximal operators and the Huber loss family.
//!
//! Every operator here is a pure function of its inputs. Matrix variants apply
//! the scalar, row or block rule independently per element, row or block.

use crate::error::{Error, Result};
use crate::linalg::{c, fro_norm, thin_svd, CMatrix, C64, ZERO};

/// Huber threshold `c` together with the proximal weight `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParams {
    threshold: f64,
    scale: f64,
}

impl HuberParams {
    pub fn new(threshold: f64, scale: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::input(format!(
                "Huber threshold must be positive, got {threshold}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::input(format!("proximal weight must be positive, got {scale}")));
        }
        Ok(Self { threshold, scale })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Complex soft-thresholding `sgn(x) (|x| - lambda)_+` with `sgn(0) = 0`.
pub fn soft_threshold(x: C64, lambda: f64) -> C64 {
    let mag = x.norm();
    if mag <= lambda || mag == 0.0 {
        ZERO
    } else {
        x * ((mag - lambda) / mag)
    }
}

pub fn soft_threshold_matrix(a: &CMatrix, lambda: f64) -> CMatrix {
    a.map(|x| soft_threshold(x, lambda))
}

/// Singular value thresholding, the proximal operator of `lambda * ||.||_*`.
pub fn svt(a: &CMatrix, lambda: f64) -> Result<CMatrix> {
    svt_with_nuclear_norm(a, lambda).map(|(m, _)| m)
}

/// As [`svt`], also returning the nuclear norm of the output.
pub fn svt_with_nuclear_norm(a: &CMatrix, lambda: f64) -> Result<(CMatrix, f64)> {
    let svd = thin_svd(a)?;
    let (m, n) = a.shape();
    let mut out = CMatrix::zeros(m, n);
    let mut nuclear = 0.0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - lambda;
        if shrunk <= 0.0 {
            continue;
        }
        nuclear += shrunk;
        let u = svd.u.column(k);
        let vh = svd.v_h.row(k);
        out.ger(c(shrunk, 0.0), &u, &vh.transpose(), c(1.0, 0.0));
    }
    Ok((out, nuclear))
}

/// Row-wise group shrinkage, the proximal operator of `lambda * ||.||_{2,1}`.
pub fn row_threshold(a: &CMatrix, lambda: f64) -> CMatrix {
    let mut out = a.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let factor = if norm > lambda { 1.0 - lambda / norm } else { 0.0 };
        row *= c(factor, 0.0);
    }
    out
}

/// Sum of row Euclidean norms.
pub fn l21_norm(a: &CMatrix) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .sum()
}

pub fn huber(x: f64, c: f64) -> f64 {
    let ax = x.abs();
    if ax <= c {
        0.5 * x * x
    } else {
        c * (ax - 0.5 * c)
    }
}

pub fn huber_grad(x: f64, c: f64) -> f64 {
    if x.abs() <= c {
        x
    } else {
        c * x.signum()
    }
}

/// Proximal operator of `a * H_c` on the real line.
pub fn prox_huber(x: f64, params: HuberParams) -> f64 {
    let a = params.scale;
    let denom = (x / params.threshold).abs().max(a + 1.0);
    (1.0 - a / denom) * x
}

/// Proximal operator of `a * H_c(||.||_F)`: radial Huber shrinkage.
pub fn prox_huber_frobenius(x: &CMatrix, params: HuberParams) -> CMatrix {
    let norm = fro_norm(x);
    if norm == 0.0 {
        return CMatrix::zeros(x.nrows(), x.ncols());
    }
    x * c(prox_huber(norm, params) / norm, 0.0)
}

/// Squared weight of the sharpest quadratic majorizer of `H_c` at residual
/// norm `e`: 1 in the quadratic branch (including `e = 0`), `c / e` beyond.
pub fn huber_majorizer_weight(e: f64, c: f64) -> f64 {
    if e <= c {
        1.0
    } else {
        c / e
    }
}

/// Quadratic majorizer `G_c(x | x_t)` of the Huber loss, tangent at `x_t`.
pub fn huber_majorizer(x: f64, x_t: f64, c: f64) -> f64 {
    let w2 = huber_majorizer_weight(x_t.abs(), c);
    0.5 * w2 * (x * x - x_t * x_t) + huber(x_t, c)
}
