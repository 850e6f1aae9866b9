//! Building blocks shared by the solvers.

use super::partition::Partition;
use crate::error::{Error, Result};
use crate::forward::Dictionary;
use crate::linalg::{c, thin_svd, CMatrix, CVector};
use crate::prox::{huber, huber_grad, prox_huber, HuberParams};

/// `Psi (I_N (x) r) = vec^-1(Psi_A r)`, never forming the Kronecker product.
pub fn apply_dictionary(dict: &Dictionary, r: &CVector) -> Result<CMatrix> {
    dict.apply(r)
}

/// Removes the span of the top-`q` left singular vectors of `y`.
pub fn wall_subspace_removal(y: &CMatrix, q: usize) -> Result<CMatrix> {
    let (m, n) = y.shape();
    if q > m.min(n) {
        return Err(Error::input(format!("wall rank {q} exceeds min({m}, {n})")));
    }
    if q == 0 {
        return Ok(y.clone());
    }
    let svd = thin_svd(y)?;
    let uq = svd.u.columns(0, q);
    let coeffs = uq.ad_mul(y);
    Ok(y - uq * coeffs)
}

/// `sum_i H_c(||E_{p_i}||_F)`.
pub fn huber_loss(e: &CMatrix, partition: &Partition, c_thr: f64) -> f64 {
    partition.block_norms(e).iter().map(|&v| huber(v, c_thr)).sum()
}

/// Per-block factor `H'_c(e_i) / e_i`, 1 for an all-zero block.
pub(crate) fn huber_block_factors(norms: &[f64], c_thr: f64) -> Vec<f64> {
    norms
        .iter()
        .map(|&v| if v == 0.0 { 1.0 } else { huber_grad(v, c_thr) / v })
        .collect()
}

/// Gradient (Wirtinger convention, `2 d/dr*`) of `sum_i H_c(||[E]_{p_i}||_F)`
/// with respect to the scene vector, where `E = Y - L - Psi (I_N (x) r)`.
///
/// Scales each residual entry by its block factor and applies `-Psi_A^H`.
pub fn huber_residual_gradient(e: &CMatrix, dict: &Dictionary, partition: &Partition, c_thr: f64) -> Result<CVector> {
    partition.check_shape(e)?;
    let factors = huber_block_factors(&partition.block_norms(e), c_thr);
    let mut weighted = e.clone();
    for (z, &b) in weighted.iter_mut().zip(partition.assignment()) {
        *z *= -factors[b];
    }
    dict.adjoint(&weighted)
}

/// Block-wise radial Huber proximal operator of `a H_c(||.||_F)`.
pub fn prox_huber_blocks(x: &CMatrix, partition: &Partition, params: HuberParams) -> Result<CMatrix> {
    partition.check_shape(x)?;
    let norms = partition.block_norms(x);
    let scale: Vec<f64> = norms
        .iter()
        .map(|&v| if v == 0.0 { 0.0 } else { prox_huber(v, params) / v })
        .collect();
    let mut out = x.clone();
    for (z, &b) in out.iter_mut().zip(partition.assignment()) {
        *z *= c(scale[b], 0.0);
    }
    Ok(out)
}
