//! Two-step baseline: subspace removal of the wall, then group-sparse
//! recovery of the scene by proximal gradient descent.

use super::ops::wall_subspace_removal;
use super::{check_problem, rel_change, run_outer, DecompositionResult, Diagnostics, SolverConfig, StepInfo};
use crate::error::{Error, Result};
use crate::forward::Dictionary;
use crate::linalg::{c, fro_norm, vec_norm, vec_of, CMatrix, CVector};
use crate::prox::{l21_norm, row_threshold};

const DIVERGENCE_RTOL: f64 = 1e-6;
const DIVERGENCE_STREAK: usize = 10;

/// Removes the top-`wall_rank` subspace, then minimises
/// `1/2 ||vec(Y') - Psi_A r||^2 + lambda ||R||_{2,1}` with step `1/lambda_max(P)`.
pub fn srcs_solve(y: &CMatrix, dict: &Dictionary, cfg: &SolverConfig, wall_rank: usize) -> Result<DecompositionResult> {
    check_problem(y, dict, cfg)?;
    let cleaned = wall_subspace_removal(y, wall_rank)?;
    let l = y - &cleaned;
    let step = match cfg.pgd_step {
        Some(s) => s,
        None => {
            let lmax = dict.gram_lambda_max()?;
            if lmax == 0.0 {
                return Err(Error::numerical("dictionary Gram matrix is zero"));
            }
            1.0 / lmax
        }
    };

    let mut r = CVector::zeros(dict.n_atoms());
    let mut prev_objective = f64::INFINITY;
    let mut streak = 0;
    let mut diagnostics = Diagnostics {
        objective_label: "1/2*||Y' - Psi r||^2 + lambda*l21(R)",
        ..Default::default()
    };
    let status = run_outer(cfg, &mut diagnostics, |iteration, _| {
        let resid = dict.apply(&r)? - &cleaned;
        let grad = dict.adjoint(&resid)?;
        let moved = &r - grad * c(step, 0.0);
        let next = vec_of(&row_threshold(&dict.scene_matrix(&moved), cfg.lambda * step));
        let fit = &cleaned - dict.apply(&next)?;
        let objective = 0.5 * fro_norm(&fit).powi(2) + cfg.lambda * l21_norm(&dict.scene_matrix(&next));
        if objective > prev_objective * (1.0 + DIVERGENCE_RTOL) {
            streak += 1;
            if streak >= DIVERGENCE_STREAK {
                return Err(Error::numerical(format!(
                    "SR-CS objective increased for {streak} consecutive iterations (iteration {iteration}, objective {objective})"
                )));
            }
        } else {
            streak = 0;
        }
        prev_objective = objective;
        let dr = vec_norm(&(&next - &r));
        let change = rel_change(dr * dr, vec_norm(&next).powi(2));
        r = next;
        Ok(StepInfo {
            objective,
            primal_residual: fro_norm(&fit),
            dual_residual: dr / step,
            rel_change: change,
            rel_feasibility: 0.0,
        })
    })?;
    Ok(DecompositionResult {
        l,
        r,
        n_pixels: dict.n_pixels(),
        n_schemes: dict.n_schemes(),
        u: None,
        v: None,
        m_split: None,
        s_split: None,
        diagnostics,
        status,
    })
}
