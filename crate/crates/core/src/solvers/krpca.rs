//! KRPCA: nuclear norm plus row-sparse scene under the exact data constraint
//! `Y = L + Psi (I_N (x) r)`, solved by ADMM with a proximal-gradient r-step.

use super::{check_problem, rel_change, relative, run_outer, DecompositionResult, Diagnostics, SolverConfig, StepInfo};
use crate::error::Result;
use crate::forward::Dictionary;
use crate::linalg::{c, fro_norm, unvec, vec_of, CMatrix, CVector};
use crate::prox::{l21_norm, row_threshold, svt_with_nuclear_norm};

#[derive(Debug, Clone, PartialEq)]
pub struct KrpcaState {
    pub l: CMatrix,
    pub r: CVector,
    pub u: CMatrix,
}

impl KrpcaState {
    pub fn zeros(dict: &Dictionary) -> Self {
        Self {
            l: CMatrix::zeros(dict.n_freqs(), dict.n_positions()),
            r: CVector::zeros(dict.n_atoms()),
            u: CMatrix::zeros(dict.n_freqs(), dict.n_positions()),
        }
    }
}

pub struct Krpca<'a> {
    y: &'a CMatrix,
    dict: &'a Dictionary,
    cfg: SolverConfig,
    step: f64,
    y_norm: f64,
}

impl<'a> Krpca<'a> {
    pub fn new(y: &'a CMatrix, dict: &'a Dictionary, cfg: &SolverConfig) -> Result<Self> {
        check_problem(y, dict, cfg)?;
        let step = match cfg.pgd_step {
            Some(s) => s,
            None => 1.0 / (cfg.mu * dict.gram_lambda_max()?),
        };
        Ok(Self {
            y,
            dict,
            cfg: cfg.clone(),
            step,
            y_norm: fro_norm(y),
        })
    }

    /// Proximal gradient step size `1 / lambda_max(mu P)`.
    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// `K` proximal-gradient steps on `lambda ||R||_{2,1} + mu/2 ||Y - L - Psi(I (x) r) + U/mu||^2`.
    pub fn r_update(&self, l: &CMatrix, r: &CVector, u: &CMatrix) -> Result<CVector> {
        let mu = self.cfg.mu;
        let t = self.step;
        let offset = l - self.y - u / c(mu, 0.0);
        let mut r = r.clone();
        for _ in 0..self.cfg.inner_iters {
            let resid = &offset + self.dict.apply(&r)?;
            let grad = self.dict.adjoint(&resid)? * c(mu, 0.0);
            let moved = &r - grad * c(t, 0.0);
            let shrunk = row_threshold(&self.dict.scene_matrix(&moved), self.cfg.lambda * t);
            r = vec_of(&shrunk);
        }
        Ok(r)
    }

    /// One outer ADMM iteration: L by singular value thresholding, r by
    /// proximal gradient, then dual ascent on U.
    pub fn step(&self, state: &mut KrpcaState) -> Result<StepInfo> {
        let mu = self.cfg.mu;
        let psi_r_prev = self.dict.apply(&state.r)?;
        let target = self.y - &psi_r_prev + &state.u / c(mu, 0.0);
        let (l, nuclear) = svt_with_nuclear_norm(&target, 1.0 / mu)?;
        let r = self.r_update(&l, &state.r, &state.u)?;
        let psi_r = self.dict.apply(&r)?;
        let resid = self.y - &l - &psi_r;
        let u = &state.u + &resid * c(mu, 0.0);

        let dl = fro_norm(&(&l - &state.l));
        let dr = crate::linalg::vec_norm(&(&r - &state.r));
        let norm_sq = fro_norm(&l).powi(2) + crate::linalg::vec_norm(&r).powi(2);
        let primal = fro_norm(&resid);
        let info = StepInfo {
            objective: nuclear + self.cfg.lambda * l21_norm(&unvec(&r, self.dict.n_pixels(), self.dict.n_schemes())),
            primal_residual: primal,
            dual_residual: mu * fro_norm(&(&psi_r - &psi_r_prev)),
            rel_change: rel_change(dl * dl + dr * dr, norm_sq),
            rel_feasibility: relative(primal, self.y_norm),
        };
        *state = KrpcaState { l, r, u };
        Ok(info)
    }

    pub fn solve_from(&self, mut state: KrpcaState) -> Result<DecompositionResult> {
        let mut diagnostics = Diagnostics {
            objective_label: "nuclear(L) + lambda*l21(R)",
            ..Default::default()
        };
        let status = run_outer(&self.cfg, &mut diagnostics, |_, _| self.step(&mut state))?;
        Ok(DecompositionResult {
            l: state.l,
            r: state.r,
            n_pixels: self.dict.n_pixels(),
            n_schemes: self.dict.n_schemes(),
            u: Some(state.u),
            v: None,
            m_split: None,
            s_split: None,
            diagnostics,
            status,
        })
    }

    pub fn solve(&self) -> Result<DecompositionResult> {
        self.solve_from(KrpcaState::zeros(self.dict))
    }
}

pub fn krpca_solve(y: &CMatrix, dict: &Dictionary, cfg: &SolverConfig) -> Result<DecompositionResult> {
    Krpca::new(y, dict, cfg)?.solve()
}
