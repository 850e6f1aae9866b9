//! Reconstruction algorithms: the two-step SR-CS baseline, KRPCA, and the
//! Huber-type HKRPCA in its semi-split (proximal gradient) and full-split
//! (majorization-minimization) forms.
//!
//! Each solver reports its own objective in the diagnostics. The objectives of
//! different methods are different functionals and are not comparable.

mod hkrpca_fd;
mod hkrpca_sd;
mod krpca;
mod ops;
mod partition;
mod srcs;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use hkrpca_fd::{hkrpca_fd_solve, HkrpcaFd, HkrpcaFdState, MmStep};
pub use hkrpca_sd::{hkrpca_sd_solve, HkrpcaSd, HkrpcaSdState};
pub use krpca::{krpca_solve, Krpca, KrpcaState};
pub use ops::{apply_dictionary, huber_loss, huber_residual_gradient, prox_huber_blocks, wall_subspace_removal};
pub use partition::{Partition, PartitionKind};
pub use srcs::srcs_solve;

use crate::error::{Error, Result};
use crate::forward::Dictionary;
use crate::linalg::{CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Row-sparsity weight.
    pub lambda: f64,
    /// Data-fidelity weight; augmented-Lagrangian penalty for KRPCA.
    pub mu: f64,
    /// Penalty of the `M = L` split.
    pub nu: f64,
    /// Penalty of the `S = R` split.
    pub eta: f64,
    pub huber_c: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Proximal gradient step; derived from the dictionary when `None`.
    pub pgd_step: Option<f64>,
    pub tol: f64,
    /// Residual balancing of `nu` and `eta` (full-split solver).
    pub dual_balancing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 10.0,
            nu: 1.0,
            eta: 1e10,
            huber_c: 0.1,
            outer_iters: 200,
            inner_iters: 1,
            pgd_step: None,
            tol: 1e-6,
            dual_balancing: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("nu", self.nu),
            ("eta", self.eta),
            ("huber_c", self.huber_c),
            ("tol", self.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input(format!(
                    "solver parameter {name} must be positive, got {v}"
                )));
            }
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::input("iteration budgets must be at least 1"));
        }
        if let Some(s) = self.pgd_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::input(format!("pgd_step must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_change: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Which functional `objective` refers to.
    pub objective_label: &'static str,
    pub iterations: Vec<IterationRecord>,
    /// Proximal-gradient step halvings triggered by the sufficient-decrease test.
    pub step_halvings: usize,
    /// Majorization-minimization objective before and after each inner step,
    /// one list per outer iteration.
    pub mm_objectives: Vec<Vec<f64>>,
    /// Relative residual of the weighted normal equations at each MM solve.
    pub mm_normal_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged { iteration: usize },
    BudgetExhausted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged { iteration } => write!(f, "converged at iteration {iteration}"),
            Status::BudgetExhausted => write!(f, "iteration budget exhausted"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// Low-rank wall component, `M x N`.
    pub l: CMatrix,
    /// Scene vector, all multipath schemes stacked.
    pub r: CVector,
    pub n_pixels: usize,
    pub n_schemes: usize,
    /// Dual of the data constraint (KRPCA) or of the `M = L` split.
    pub u: Option<CMatrix>,
    /// Dual of the `S = R` split.
    pub v: Option<CVector>,
    pub m_split: Option<CMatrix>,
    pub s_split: Option<CVector>,
    pub diagnostics: Diagnostics,
    pub status: Status,
}

impl DecompositionResult {
    /// Scene vector as an `n_pixels x n_schemes` matrix.
    pub fn scene_matrix(&self) -> CMatrix {
        crate::linalg::unvec(&self.r, self.n_pixels, self.n_schemes)
    }

    pub fn iterations_run(&self) -> usize {
        self.diagnostics.iterations.len()
    }
}

/// Summary of one outer iteration, produced by each solver's `step`.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_change: f64,
    /// Feasibility measure that must also fall below `tol` to stop.
    pub rel_feasibility: f64,
}

pub(crate) fn rel_change(diff_sq: f64, norm_sq: f64) -> f64 {
    if diff_sq == 0.0 {
        0.0
    } else if norm_sq == 0.0 {
        f64::INFINITY
    } else {
        (diff_sq / norm_sq).sqrt()
    }
}

pub(crate) fn relative(value: f64, scale: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        value / scale
    }
}

/// Runs `step` until both the relative change and the feasibility measure are
/// below `tol`, or the outer budget is spent.
pub(crate) fn run_outer<F>(cfg: &SolverConfig, diagnostics: &mut Diagnostics, mut step: F) -> Result<Status>
where
    F: FnMut(usize, &mut Diagnostics) -> Result<StepInfo>,
{
    for iteration in 1..=cfg.outer_iters {
        let start = Instant::now();
        let info = step(iteration, diagnostics)?;
        let seconds = start.elapsed().as_secs_f64();
        if !(info.objective.is_finite() && info.primal_residual.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite iterate at iteration {iteration} (objective {}, primal residual {})",
                info.objective, info.primal_residual
            )));
        }
        diagnostics.iterations.push(IterationRecord {
            iteration,
            objective: info.objective,
            primal_residual: info.primal_residual,
            dual_residual: info.dual_residual,
            rel_change: info.rel_change,
            seconds,
        });
        if info.rel_change < cfg.tol && info.rel_feasibility < cfg.tol {
            return Ok(Status::Converged { iteration });
        }
    }
    Ok(Status::BudgetExhausted)
}

pub(crate) fn check_problem(y: &CMatrix, dict: &Dictionary, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if y.shape() != (dict.n_freqs(), dict.n_positions()) {
        return Err(Error::shape(format!(
            "data is {:?}, dictionary expects {}x{}",
            y.shape(),
            dict.n_freqs(),
            dict.n_positions()
        )));
    }
    if !crate::linalg::all_finite(y.iter()) {
        return Err(Error::input("data matrix contains non-finite entries"));
    }
    Ok(())
}

/// Solver selection by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Subspace wall removal of the given rank, then group-sparse recovery.
    Srcs {
        wall_rank: usize,
    },
    Krpca,
    HkrpcaSd(PartitionKind),
    HkrpcaFd(PartitionKind),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Srcs { wall_rank: 1 } => "srcs".into(),
            Method::Srcs { wall_rank } => format!("srcs-q{wall_rank}"),
            Method::Krpca => "krpca".into(),
            Method::HkrpcaSd(k) => format!("hkrpca-sd-{}", k.short_name()),
            Method::HkrpcaFd(k) => format!("hkrpca-fd-{}", k.short_name()),
        }
    }

    pub fn all() -> Vec<Method> {
        vec![
            Method::Srcs { wall_rank: 1 },
            Method::Krpca,
            Method::HkrpcaSd(PartitionKind::Pointwise),
            Method::HkrpcaSd(PartitionKind::Columnwise),
            Method::HkrpcaFd(PartitionKind::Pointwise),
            Method::HkrpcaFd(PartitionKind::Columnwise),
        ]
    }

    pub fn solve(&self, y: &CMatrix, dict: &Dictionary, cfg: &SolverConfig) -> Result<DecompositionResult> {
        let (m, n) = y.shape();
        match *self {
            Method::Srcs { wall_rank } => srcs_solve(y, dict, cfg, wall_rank),
            Method::Krpca => krpca_solve(y, dict, cfg),
            Method::HkrpcaSd(kind) => hkrpca_sd_solve(y, dict, &Partition::of_kind(kind, m, n)?, cfg),
            Method::HkrpcaFd(kind) => hkrpca_fd_solve(y, dict, &Partition::of_kind(kind, m, n)?, cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s {
            "srcs" => Method::Srcs { wall_rank: 1 },
            "krpca" => Method::Krpca,
            "hkrpca-sd-pt" => Method::HkrpcaSd(PartitionKind::Pointwise),
            "hkrpca-sd-col" => Method::HkrpcaSd(PartitionKind::Columnwise),
            "hkrpca-fd-pt" => Method::HkrpcaFd(PartitionKind::Pointwise),
            "hkrpca-fd-col" => Method::HkrpcaFd(PartitionKind::Columnwise),
            other => {
                if let Some(q) = other.strip_prefix("srcs-q") {
                    let wall_rank = q
                        .parse()
                        .map_err(|_| Error::input(format!("unknown solver '{other}'")))?;
                    Method::Srcs { wall_rank }
                } else {
                    return Err(Error::input(format!(
                        "unknown solver '{other}' (expected one of srcs, srcs-q<rank>, krpca, \
                         hkrpca-sd-pt, hkrpca-sd-col, hkrpca-fd-pt, hkrpca-fd-col)"
                    )));
                }
            }
        };
        Ok(m)
    }
}
