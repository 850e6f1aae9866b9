//! Seeded Monte Carlo trials: every trial regenerates the corruption from a
//! seed derived from `(base_seed, trial)`, runs every solver on the same data
//! and scores the detection maps.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{detection_map, roc_curve, DetectionMap, RocCurve};
use crate::forward::{Dictionary, SceneGrid};
use crate::linalg::CMatrix;
use crate::noise::{corrupt, derive_seed, NoiseSpec};
use crate::solvers::{Method, SolverConfig, Status};

/// Clean data, dictionary, ground truth and corruption model of one experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub y_clean: CMatrix,
    pub dict: Dictionary,
    pub grid: SceneGrid,
    /// Target pixels `(ix, iz)`.
    pub truth: Vec<(usize, usize)>,
    /// Noise model, `None` for noiseless trials; its `seed` is replaced per trial.
    pub noise: Option<NoiseSpec>,
    /// Detection disc radius in pixels.
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct SolverEntry {
    pub label: String,
    pub method: Method,
    pub config: SolverConfig,
}

impl SolverEntry {
    pub fn new(method: Method, config: SolverConfig) -> Self {
        Self {
            label: method.name(),
            method,
            config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub solver: String,
    /// `None` when the solver failed.
    pub auc: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub status: String,
    pub error: Option<String>,
    pub map: Option<DetectionMap>,
    pub roc: Option<RocCurve>,
}

/// Seed of trial `t`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    derive_seed(base_seed, trial as u64)
}

fn run_trial(scenario: &Scenario, solvers: &[SolverEntry], trial: usize, base_seed: u64) -> Result<Vec<TrialRecord>> {
    let seed = trial_seed(base_seed, trial);
    let y = match &scenario.noise {
        Some(spec) => corrupt(&scenario.y_clean, &NoiseSpec { seed, ..*spec })?.y,
        None => scenario.y_clean.clone(),
    };
    let mut records = Vec::with_capacity(solvers.len());
    for entry in solvers {
        let start = Instant::now();
        let outcome = entry.method.solve(&y, &scenario.dict, &entry.config).and_then(|res| {
            let map = detection_map(&res.scene_matrix(), &scenario.grid)?;
            let roc = roc_curve(&map, &scenario.truth, scenario.radius)?;
            Ok((res, map, roc))
        });
        let seconds = start.elapsed().as_secs_f64();
        let record = match outcome {
            Ok((res, map, roc)) => TrialRecord {
                trial,
                seed,
                solver: entry.label.clone(),
                auc: Some(roc.auc),
                seconds,
                iterations: res.iterations_run(),
                status: match res.status {
                    Status::Converged { .. } => "converged".into(),
                    Status::BudgetExhausted => "budget".into(),
                },
                error: None,
                map: Some(map),
                roc: Some(roc),
            },
            Err(e) => {
                log::warn!("trial {trial}, solver {}: {e}", entry.label);
                TrialRecord {
                    trial,
                    seed,
                    solver: entry.label.clone(),
                    auc: None,
                    seconds,
                    iterations: 0,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    map: None,
                    roc: None,
                }
            }
        };
        records.push(record);
    }
    Ok(records)
}

/// Runs `trials` trials, in parallel on `threads` workers (rayon's global
/// pool when `None`). Records are sorted by trial, then by solver position
/// in `solvers`; results do not depend on the number of workers. A solver
/// failure is recorded in its trial; corruption failures are errors.
pub fn run_monte_carlo(
    scenario: &Scenario,
    solvers: &[SolverEntry],
    trials: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    if solvers.is_empty() {
        return Err(Error::input("no solvers to run"));
    }
    let work = || -> Result<Vec<TrialRecord>> {
        let per_trial: Vec<Vec<TrialRecord>> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(scenario, solvers, t, base_seed))
            .collect::<Result<_>>()?;
        Ok(per_trial.into_iter().flatten().collect())
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::input(format!("cannot build a pool of {n} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub solver: String,
    pub trials: usize,
    pub failures: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
}

/// Mean and sample standard deviation of the AUC per solver, over the
/// successful trials, in order of first appearance.
pub fn aggregate(records: &[TrialRecord]) -> Vec<SolverSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.solver.as_str()) {
            order.push(&r.solver);
        }
    }
    order
        .into_iter()
        .map(|name| {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.solver == name).collect();
            let aucs: Vec<f64> = mine.iter().filter_map(|r| r.auc).collect();
            let (mean, std) = mean_std(&aucs);
            SolverSummary {
                solver: name.to_string(),
                trials: mine.len(),
                failures: mine.len() - aucs.len(),
                mean_auc: mean,
                std_auc: std,
            }
        })
        .collect()
}

/// Mean and sample standard deviation; NaN mean for an empty slice, zero
/// deviation below two samples.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `trial,seed,solver,auc,seconds,iterations,status` rows.
pub fn write_trials_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "trial,seed,solver,auc,seconds,iterations,status")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.solver,
            fmt_opt(r.auc),
            r.seconds,
            r.iterations,
            r.status
        )?;
    }
    f.flush()?;
    Ok(())
}

/// `solver,trials,failures,mean_auc,std_auc` rows. Contains no timings, so
/// it is reproducible byte for byte.
pub fn write_summary_csv(summary: &[SolverSummary], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "solver,trials,failures,mean_auc,std_auc")?;
    for s in summary {
        writeln!(
            f,
            "{},{},{},{},{}",
            s.solver, s.trials, s.failures, s.mean_auc, s.std_auc
        )?;
    }
    f.flush()?;
    Ok(())
}
