//! HKRPCA with a full split (`M = L`, `S = R`): the r-step becomes a smooth
//! Huber problem solved by majorization-minimization, each step an
//! iteratively reweighted regularised least-squares solve.

use nalgebra::Cholesky;

use super::ops::{huber_loss, prox_huber_blocks};
use super::partition::{Partition, PartitionKind};
use super::{check_problem, rel_change, relative, run_outer, DecompositionResult, Diagnostics, SolverConfig, StepInfo};
use crate::error::{Error, Result};
use crate::forward::Dictionary;
use crate::linalg::{c, fro_norm, gram, vec_norm, vec_of, CMatrix, CVector};
use crate::prox::{huber_majorizer_weight, l21_norm, row_threshold, svt_with_nuclear_norm, HuberParams};

const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HkrpcaFdState {
    pub l: CMatrix,
    pub r: CVector,
    pub m: CMatrix,
    pub s: CVector,
    pub u: CMatrix,
    pub v: CVector,
    pub nu: f64,
    pub eta: f64,
}

/// One majorization-minimization step, with what is needed to audit it.
#[derive(Debug, Clone)]
pub struct MmStep {
    pub r: CVector,
    /// Squared majorizer weight of each residual entry (column-major).
    pub weights_sq: Vec<f64>,
    pub system: CMatrix,
    pub rhs: CVector,
}

pub struct HkrpcaFd<'a> {
    y: &'a CMatrix,
    dict: &'a Dictionary,
    partition: &'a Partition,
    cfg: SolverConfig,
    y_norm: f64,
    /// Unweighted Gram matrix `Psi_A^H Psi_A`.
    gram0: CMatrix,
    /// Per-position Gram matrices `Psi_n^H Psi_n`, kept for column partitions
    /// where the weight is constant down each column.
    column_grams: Option<Vec<CMatrix>>,
}

impl<'a> HkrpcaFd<'a> {
    pub fn new(y: &'a CMatrix, dict: &'a Dictionary, partition: &'a Partition, cfg: &SolverConfig) -> Result<Self> {
        check_problem(y, dict, cfg)?;
        partition.check_shape(y)?;
        Ok(Self {
            y,
            dict,
            partition,
            cfg: cfg.clone(),
            y_norm: fro_norm(y),
            gram0: gram(dict.tall()),
            column_grams: (partition.kind() == PartitionKind::Columnwise)
                .then(|| (0..dict.n_positions()).map(|n| gram(&dict.block(n))).collect()),
        })
    }

    /// `Psi_A^H diag(w2) Psi_A`, as a downdate of the unweighted Gram matrix
    /// when few weights differ from one.
    fn weighted_gram(&self, weights_sq: &[f64]) -> CMatrix {
        let tall = self.dict.tall();
        let down: Vec<usize> = (0..weights_sq.len()).filter(|&k| weights_sq[k] != 1.0).collect();
        if down.is_empty() {
            return self.gram0.clone();
        }
        if let Some(grams) = &self.column_grams {
            let m = self.dict.n_freqs();
            let mut out = CMatrix::zeros(tall.ncols(), tall.ncols());
            for (n, g) in grams.iter().enumerate() {
                let w2 = weights_sq[n * m];
                for (o, &x) in out.iter_mut().zip(g.iter()) {
                    *o += x * w2;
                }
            }
            return out;
        }
        if 2 * down.len() < weights_sq.len() {
            let mut b = CMatrix::zeros(down.len(), tall.ncols());
            for (i, &k) in down.iter().enumerate() {
                b.row_mut(i)
                    .copy_from(&(tall.row(k) * c((1.0 - weights_sq[k]).sqrt(), 0.0)));
            }
            &self.gram0 - gram(&b)
        } else {
            let mut weighted = tall.clone();
            for (k, &w2) in weights_sq.iter().enumerate() {
                if w2 != 1.0 {
                    weighted.row_mut(k).scale_mut(w2.sqrt());
                }
            }
            gram(&weighted)
        }
    }

    pub fn zero_state(&self) -> HkrpcaFdState {
        let (m, n) = self.y.shape();
        let d = self.dict.n_atoms();
        HkrpcaFdState {
            l: CMatrix::zeros(m, n),
            r: CVector::zeros(d),
            m: CMatrix::zeros(m, n),
            s: CVector::zeros(d),
            u: CMatrix::zeros(m, n),
            v: CVector::zeros(d),
            nu: self.cfg.nu,
            eta: self.cfg.eta,
        }
    }

    pub fn l_update(&self, r: &CVector, m: &CMatrix, u: &CMatrix, nu: f64) -> Result<CMatrix> {
        let base = self.y - self.dict.apply(r)?;
        let shifted = m + u / c(nu, 0.0) - &base;
        let params = HuberParams::new(self.cfg.huber_c, self.cfg.mu / (2.0 * nu))?;
        Ok(prox_huber_blocks(&shifted, self.partition, params)? + base)
    }

    /// Objective of the r-subproblem:
    /// `mu/2 sum H_c(||[Y - L - Psi r]_p||) + eta/2 ||r - (s + v/eta)||^2`.
    pub fn mm_objective(&self, l: &CMatrix, r: &CVector, s: &CVector, v: &CVector, eta: f64) -> Result<f64> {
        let e = self.y - l - self.dict.apply(r)?;
        let anchor = s + v / c(eta, 0.0);
        Ok(0.5 * self.cfg.mu * huber_loss(&e, self.partition, self.cfg.huber_c)
            + 0.5 * eta * vec_norm(&(r - anchor)).powi(2))
    }

    /// Minimiser of the quadratic majorizer built at `r_t`:
    /// `(mu/2 Psi_AW^H Psi_AW + eta I) r = mu/2 Psi_AW^H vec(W o (Y - L)) + eta s + v`.
    pub fn mm_step(&self, l: &CMatrix, r_t: &CVector, s: &CVector, v: &CVector, eta: f64) -> Result<MmStep> {
        let half_mu = 0.5 * self.cfg.mu;
        let data = self.y - l;
        let e = &data - self.dict.apply(r_t)?;
        let block_w2: Vec<f64> = self
            .partition
            .block_norms(&e)
            .iter()
            .map(|&n| huber_majorizer_weight(n, self.cfg.huber_c))
            .collect();
        let weights_sq: Vec<f64> = self.partition.assignment().iter().map(|&b| block_w2[b]).collect();

        let mut system = self.weighted_gram(&weights_sq) * c(half_mu, 0.0);
        for i in 0..system.nrows() {
            system[(i, i)] += c(eta, 0.0);
        }
        let mut data_w2 = data;
        for (z, &w2) in data_w2.iter_mut().zip(&weights_sq) {
            *z *= w2;
        }
        let rhs = self.dict.adjoint(&data_w2)? * c(half_mu, 0.0) + s * c(eta, 0.0) + v;
        let chol = Cholesky::new(system.clone())
            .ok_or_else(|| Error::numerical("MM system is not numerically positive definite (Cholesky failed)"))?;
        let r = chol.solve(&rhs);
        if !crate::linalg::all_finite(r.iter()) {
            return Err(Error::numerical("MM solve produced non-finite values"));
        }
        Ok(MmStep {
            r,
            weights_sq,
            system,
            rhs,
        })
    }

    /// One outer iteration: L, `K` MM steps on r, then M, S and dual updates,
    /// optionally followed by residual balancing of `nu` and `eta`.
    pub fn step(&self, state: &mut HkrpcaFdState, diagnostics: &mut Diagnostics) -> Result<StepInfo> {
        let (nu, eta) = (state.nu, state.eta);
        let l = self.l_update(&state.r, &state.m, &state.u, nu)?;

        let mut r = state.r.clone();
        let mut trace = vec![self.mm_objective(&l, &r, &state.s, &state.v, eta)?];
        for _ in 0..self.cfg.inner_iters {
            let mm = self.mm_step(&l, &r, &state.s, &state.v, eta)?;
            let resid = &mm.system * &mm.r - &mm.rhs;
            diagnostics
                .mm_normal_residuals
                .push(relative(vec_norm(&resid), vec_norm(&mm.rhs)));
            r = mm.r;
            trace.push(self.mm_objective(&l, &r, &state.s, &state.v, eta)?);
        }
        diagnostics.mm_objectives.push(trace);

        let (m, nuclear) = svt_with_nuclear_norm(&(&l - &state.u / c(nu, 0.0)), 1.0 / nu)?;
        let shifted = &r - &state.v / c(eta, 0.0);
        let s = vec_of(&row_threshold(&self.dict.scene_matrix(&shifted), self.cfg.lambda / eta));
        let split_l = &m - &l;
        let split_r = &s - &r;
        let u = &state.u + &split_l * c(nu, 0.0);
        let v = &state.v + &split_r * c(eta, 0.0);

        let primal_l = fro_norm(&split_l);
        let primal_r = vec_norm(&split_r);
        let dual_l = nu * fro_norm(&(&m - &state.m));
        let dual_r = eta * vec_norm(&(&s - &state.s));

        let (mut next_nu, mut next_eta) = (nu, eta);
        if self.cfg.dual_balancing {
            next_nu = balance(nu, primal_l, dual_l);
            next_eta = balance(eta, primal_r, dual_r);
        }

        let e = self.y - &l - self.dict.apply(&r)?;
        let objective = nuclear
            + self.cfg.lambda * l21_norm(&self.dict.scene_matrix(&s))
            + 0.5 * self.cfg.mu * huber_loss(&e, self.partition, self.cfg.huber_c);

        let dl = fro_norm(&(&l - &state.l));
        let dr = vec_norm(&(&r - &state.r));
        let norm_sq = fro_norm(&l).powi(2) + vec_norm(&r).powi(2);
        let feas = relative(primal_l, self.y_norm).max(relative(primal_r, vec_norm(&r).max(vec_norm(&s))));
        let info = StepInfo {
            objective,
            primal_residual: primal_l.hypot(primal_r),
            dual_residual: dual_l.hypot(dual_r),
            rel_change: rel_change(dl * dl + dr * dr, norm_sq),
            rel_feasibility: feas,
        };
        *state = HkrpcaFdState {
            l,
            r,
            m,
            s,
            u,
            v,
            nu: next_nu,
            eta: next_eta,
        };
        Ok(info)
    }

    pub fn solve_from(&self, mut state: HkrpcaFdState) -> Result<DecompositionResult> {
        let mut diagnostics = Diagnostics {
            objective_label: "nuclear(M) + lambda*l21(S) + mu/2*sum Huber",
            ..Default::default()
        };
        let status = run_outer(&self.cfg, &mut diagnostics, |_, d| self.step(&mut state, d))?;
        Ok(DecompositionResult {
            l: state.l,
            r: state.r,
            n_pixels: self.dict.n_pixels(),
            n_schemes: self.dict.n_schemes(),
            u: Some(state.u),
            v: Some(state.v),
            m_split: Some(state.m),
            s_split: Some(state.s),
            diagnostics,
            status,
        })
    }

    pub fn solve(&self) -> Result<DecompositionResult> {
        self.solve_from(self.zero_state())
    }
}

/// Residual balancing: grow the penalty when the primal residual dominates,
/// shrink it when the dual residual does. Duals are kept unscaled, so they
/// need no rescaling when the penalty changes.
fn balance(penalty: f64, primal: f64, dual: f64) -> f64 {
    if primal > BALANCE_RATIO * dual {
        penalty * BALANCE_FACTOR
    } else if dual > BALANCE_RATIO * primal {
        penalty / BALANCE_FACTOR
    } else {
        penalty
    }
}

pub fn hkrpca_fd_solve(
    y: &CMatrix,
    dict: &Dictionary,
    partition: &Partition,
    cfg: &SolverConfig,
) -> Result<DecompositionResult> {
    HkrpcaFd::new(y, dict, partition, cfg)?.solve()
}

#[cfg(test)]
mod tests {
    use super::super::fixture::{problem, pseudo, top_pixels};
    use super::*;
    use crate::linalg::max_abs_diff;

    fn dense_weighted_gram(dict: &Dictionary, w2: &[f64]) -> CMatrix {
        let mut t = dict.tall().clone();
        for (k, &w) in w2.iter().enumerate() {
            t.row_mut(k).scale_mut(w.sqrt());
        }
        t.ad_mul(&t)
    }

    #[test]
    fn zero_data() {
        let p = problem(1.0);
        let y = CMatrix::zeros(16, 12);
        let part = Partition::pointwise(16, 12);
        let res = hkrpca_fd_solve(&y, &p.dict, &part, &SolverConfig::default()).unwrap();
        assert_eq!(fro_norm(&res.l), 0.0);
        assert_eq!(vec_norm(&res.r), 0.0);
        assert_eq!(vec_norm(res.s_split.as_ref().unwrap()), 0.0);
    }

    #[test]
    fn weighted_gram_paths_agree() {
        let p = problem(1.0);
        let n = 16 * 12;
        for part in [Partition::pointwise(16, 12), Partition::columnwise(16, 12)] {
            let fd = HkrpcaFd::new(&p.y, &p.dict, &part, &SolverConfig::default()).unwrap();
            let block_w: Vec<f64> = (0..part.n_blocks()).map(|b| 1.0 / (1.0 + (b % 5) as f64)).collect();
            let dense: Vec<f64> = part.assignment().iter().map(|&b| block_w[b]).collect();
            let sparse: Vec<f64> = (0..n).map(|k| if k % 7 == 0 { 0.25 } else { 1.0 }).collect();
            for w2 in [dense, sparse, vec![1.0; n]] {
                if part.kind() == PartitionKind::Columnwise && w2.chunks(16).any(|c| c.iter().any(|&w| w != c[0])) {
                    continue;
                }
                let scale = fro_norm(&p.dict.tall().ad_mul(p.dict.tall()));
                assert!(max_abs_diff(&fd.weighted_gram(&w2), &dense_weighted_gram(&p.dict, &w2)) < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn all_inlier_step_is_regularised_least_squares() {
        let p = problem(1.0);
        let part = Partition::pointwise(16, 12);
        let cfg = SolverConfig {
            huber_c: 1e9,
            mu: 4.0,
            ..Default::default()
        };
        let fd = HkrpcaFd::new(&p.y, &p.dict, &part, &cfg).unwrap();
        let l = pseudo(16, 12, 4) * c(0.2, 0.0);
        let r_t = pseudo(36, 1, 5).column(0).into_owned();
        let s = pseudo(36, 1, 6).column(0).into_owned();
        let v = pseudo(36, 1, 7).column(0).into_owned();
        let eta = 3.0;
        let mm = fd.mm_step(&l, &r_t, &s, &v, eta).unwrap();
        assert!(mm.weights_sq.iter().all(|&w| w == 1.0));

        let a = p.dict.tall();
        let mut sys = a.ad_mul(a) * c(2.0, 0.0);
        for i in 0..36 {
            sys[(i, i)] += c(eta, 0.0);
        }
        let rhs = a.ad_mul(&vec_of(&(&p.y - &l))) * c(2.0, 0.0) + &s * c(eta, 0.0) + &v;
        let expect = sys.lu().solve(&rhs).unwrap();
        assert!((&mm.r - &expect).norm() < 1e-9 * expect.norm());
    }

    #[test]
    fn mm_inner_loop_is_monotone() {
        let p = problem(1.0);
        for part in [Partition::pointwise(16, 12), Partition::columnwise(16, 12)] {
            let cfg = SolverConfig {
                inner_iters: 5,
                outer_iters: 15,
                huber_c: 0.05,
                ..Default::default()
            };
            let y = &p.y + pseudo(16, 12, 9) * c(0.3, 0.0);
            let res = hkrpca_fd_solve(&y, &p.dict, &part, &cfg).unwrap();
            for trace in &res.diagnostics.mm_objectives {
                for w in trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0), "{trace:?}");
                }
            }
            assert!(res.diagnostics.mm_normal_residuals.iter().all(|&r| r < 1e-8));
        }
    }

    #[test]
    fn noiseless_recovery_and_split_consistency() {
        let p = problem(1.0);
        let part = Partition::pointwise(16, 12);
        let cfg = SolverConfig {
            outer_iters: 500,
            ..Default::default()
        };
        let res = hkrpca_fd_solve(&p.y, &p.dict, &part, &cfg).unwrap();
        let y_norm = fro_norm(&p.y);
        assert!(fro_norm(&(res.m_split.as_ref().unwrap() - &res.l)) < 1e-3 * y_norm);
        assert!(vec_norm(&(res.s_split.as_ref().unwrap() - &res.r)) < 1e-3 * y_norm);
        assert_eq!(top_pixels(&res, &p.grid, 2), vec![(1, 4), (4, 1)]);
    }
}
