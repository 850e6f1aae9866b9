//! HKRPCA with a semi split (`M = L`): closed-form block Huber proximal step
//! for L, proximal gradient for r.

use super::ops::{huber_loss, huber_residual_gradient, prox_huber_blocks};
use super::partition::Partition;
use super::{check_problem, rel_change, relative, run_outer, DecompositionResult, Diagnostics, SolverConfig, StepInfo};
use crate::error::{Error, Result};
use crate::forward::Dictionary;
use crate::linalg::{c, fro_norm, vec_norm, vec_of, CMatrix, CVector};
use crate::prox::{l21_norm, row_threshold, svt_with_nuclear_norm, HuberParams};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct HkrpcaSdState {
    pub l: CMatrix,
    pub r: CVector,
    pub m: CMatrix,
    pub u: CMatrix,
    /// Current proximal gradient step; halved whenever sufficient decrease fails.
    pub step: f64,
}

pub struct HkrpcaSd<'a> {
    y: &'a CMatrix,
    dict: &'a Dictionary,
    partition: &'a Partition,
    cfg: SolverConfig,
    initial_step: f64,
    y_norm: f64,
}

impl<'a> HkrpcaSd<'a> {
    pub fn new(y: &'a CMatrix, dict: &'a Dictionary, partition: &'a Partition, cfg: &SolverConfig) -> Result<Self> {
        check_problem(y, dict, cfg)?;
        partition.check_shape(y)?;
        let initial_step = match cfg.pgd_step {
            Some(s) => s,
            None => 1.0 / (0.5 * cfg.mu * dict.gram_lambda_max()?),
        };
        Ok(Self {
            y,
            dict,
            partition,
            cfg: cfg.clone(),
            initial_step,
            y_norm: fro_norm(y),
        })
    }

    pub fn zero_state(&self) -> HkrpcaSdState {
        let (m, n) = self.y.shape();
        HkrpcaSdState {
            l: CMatrix::zeros(m, n),
            r: CVector::zeros(self.dict.n_atoms()),
            m: CMatrix::zeros(m, n),
            u: CMatrix::zeros(m, n),
            step: self.initial_step,
        }
    }

    fn huber_params(&self) -> Result<HuberParams> {
        HuberParams::new(self.cfg.huber_c, self.cfg.mu / (2.0 * self.cfg.nu))
    }

    /// Block-wise minimiser of `mu/2 sum H_c(||[Y - L - Psi r]_p||) + nu/2 ||M - L + U/nu||^2`.
    pub fn l_update(&self, r: &CVector, m: &CMatrix, u: &CMatrix) -> Result<CMatrix> {
        let base = self.y - self.dict.apply(r)?;
        let shifted = m + u / c(self.cfg.nu, 0.0) - &base;
        Ok(prox_huber_blocks(&shifted, self.partition, self.huber_params()?)? + base)
    }

    fn smooth_part(&self, l: &CMatrix, r: &CVector) -> Result<f64> {
        let e = self.y - l - self.dict.apply(r)?;
        Ok(0.5 * self.cfg.mu * huber_loss(&e, self.partition, self.cfg.huber_c))
    }

    /// `K` proximal gradient steps on `mu/2 sum H_c(...) + lambda ||R||_{2,1}`
    /// with backtracking. Returns the new r and the number of step halvings.
    pub fn r_update(&self, l: &CMatrix, r: &CVector, step: &mut f64) -> Result<(CVector, usize)> {
        let half_mu = 0.5 * self.cfg.mu;
        let mut r = r.clone();
        let mut halvings = 0;
        for _ in 0..self.cfg.inner_iters {
            let e = self.y - l - self.dict.apply(&r)?;
            let f0 = half_mu * huber_loss(&e, self.partition, self.cfg.huber_c);
            let grad = huber_residual_gradient(&e, self.dict, self.partition, self.cfg.huber_c)? * c(half_mu, 0.0);
            loop {
                let s = *step;
                let moved = &r - &grad * c(s, 0.0);
                let cand = vec_of(&row_threshold(&self.dict.scene_matrix(&moved), self.cfg.lambda * s));
                let delta = &cand - &r;
                let lin: f64 = grad.iter().zip(delta.iter()).map(|(g, d)| (g.conj() * d).re).sum();
                let bound = f0 + lin + vec_norm(&delta).powi(2) / (2.0 * s);
                let f1 = self.smooth_part(l, &cand)?;
                if f1 <= bound + 1e-12 * f0.abs().max(1e-300) {
                    r = cand;
                    break;
                }
                if halvings >= MAX_HALVINGS {
                    return Err(Error::numerical("proximal gradient step collapsed during backtracking"));
                }
                *step *= 0.5;
                halvings += 1;
            }
        }
        Ok((r, halvings))
    }

    /// One outer iteration: L, r, then M by singular value thresholding and
    /// dual ascent on U.
    pub fn step(&self, state: &mut HkrpcaSdState, diagnostics: &mut Diagnostics) -> Result<StepInfo> {
        let nu = self.cfg.nu;
        let l = self.l_update(&state.r, &state.m, &state.u)?;
        let mut step = state.step;
        let (r, halvings) = self.r_update(&l, &state.r, &mut step)?;
        diagnostics.step_halvings += halvings;
        let (m, nuclear) = svt_with_nuclear_norm(&(&l - &state.u / c(nu, 0.0)), 1.0 / nu)?;
        let split = &m - &l;
        let u = &state.u + &split * c(nu, 0.0);

        let dl = fro_norm(&(&l - &state.l));
        let dr = vec_norm(&(&r - &state.r));
        let norm_sq = fro_norm(&l).powi(2) + vec_norm(&r).powi(2);
        let primal = fro_norm(&split);
        let info = StepInfo {
            objective: nuclear + self.cfg.lambda * l21_norm(&self.dict.scene_matrix(&r)) + self.smooth_part(&l, &r)?,
            primal_residual: primal,
            dual_residual: nu * fro_norm(&(&m - &state.m)),
            rel_change: rel_change(dl * dl + dr * dr, norm_sq),
            rel_feasibility: relative(primal, self.y_norm),
        };
        *state = HkrpcaSdState { l, r, m, u, step };
        Ok(info)
    }

    pub fn solve_from(&self, mut state: HkrpcaSdState) -> Result<DecompositionResult> {
        let mut diagnostics = Diagnostics {
            objective_label: "nuclear(M) + lambda*l21(R) + mu/2*sum Huber",
            ..Default::default()
        };
        let status = run_outer(&self.cfg, &mut diagnostics, |_, d| self.step(&mut state, d))?;
        Ok(DecompositionResult {
            l: state.l,
            r: state.r,
            n_pixels: self.dict.n_pixels(),
            n_schemes: self.dict.n_schemes(),
            u: Some(state.u),
            v: None,
            m_split: Some(state.m),
            s_split: None,
            diagnostics,
            status,
        })
    }

    pub fn solve(&self) -> Result<DecompositionResult> {
        self.solve_from(self.zero_state())
    }
}

pub fn hkrpca_sd_solve(
    y: &CMatrix,
    dict: &Dictionary,
    partition: &Partition,
    cfg: &SolverConfig,
) -> Result<DecompositionResult> {
    HkrpcaSd::new(y, dict, partition, cfg)?.solve()
}
