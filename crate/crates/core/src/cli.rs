//! The `generate`, `solve` and `sweep` commands behind the `kronrpca` binary.
//!
//! A data directory written by `generate` holds:
//!
//! - `dictionary.twrm`: tall dictionary, `(M N) x D`
//! - `wall.twrm`, `y_clean.twrm`, `y_noisy.twrm`: `M x N`
//! - `scene_truth.twrm`: `n_pixels x n_schemes`
//! - `targets.csv`, `outliers.csv`
//! - `manifest.json`

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::{detection_map, roc_curve, write_map_csv, write_map_pgm, write_roc_csv};
use crate::forward::{
    build_dictionary, refraction_delay, synthesize_scene, synthesize_wall_returns, Dictionary, RadarConfig, SceneGrid,
    SceneTruth, WallSpec, SPEED_OF_LIGHT,
};
use crate::linalg::{fro_norm, CMatrix};
use crate::manifest::Manifest;
use crate::matrix_file::{read_matrix, write_matrix};
use crate::montecarlo::{mean_std, run_monte_carlo, trial_seed, Scenario, SolverEntry};
use crate::noise::{corrupt, derive_seed, empirical_snr_db, OutlierSupport};
use crate::solvers::{Method, Status};

const WALL_STREAM: u64 = 0x7761_6c6c;

/// Process exit code for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

/// Everything derived deterministically from a configuration and a seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub grid: SceneGrid,
    pub radar: RadarConfig,
    pub wall: WallSpec,
    pub dict: Dictionary,
    pub wall_returns: CMatrix,
    pub truth: SceneTruth,
    pub y_clean: CMatrix,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let grid = cfg.grid()?;
        let radar = cfg.radar_config();
        let wall = cfg.wall_spec();
        let dict = build_dictionary(&grid, &radar, &wall)?;
        let wall_returns = synthesize_wall_returns(&wall, &radar, cfg.wall.jitter, derive_seed(seed, WALL_STREAM));
        let truth = synthesize_scene(&cfg.target_spec(), &grid, &dict)?;
        let y_clean = &wall_returns + &truth.y_targets;
        Ok(Self {
            grid,
            radar,
            wall,
            dict,
            wall_returns,
            truth,
            y_clean,
        })
    }

    /// The Monte Carlo scenario of this experiment under the configured noise.
    pub fn scenario(&self, cfg: &ExperimentConfig) -> Scenario {
        Scenario {
            name: "config".into(),
            y_clean: self.y_clean.clone(),
            dict: self.dict.clone(),
            grid: self.grid.clone(),
            truth: self.truth.pixels.clone(),
            noise: cfg.noise_spec(0),
            radius: cfg.eval.radius_px,
        }
    }
}

fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config {
        line: 0,
        msg: "configuration is not valid UTF-8".into(),
    })?;
    Ok((ExperimentConfig::from_toml_str(&text)?, bytes))
}

/// `--out` if given, else `<out_dir>/<name>` from the config, else `<name>`.
fn out_dir(explicit: Option<&Path>, cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    let dir = match (explicit, &cfg.out_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(base)) => base.join(name),
        (None, None) => PathBuf::from(name),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Debug, Clone, Serialize)]
struct DelayRecord {
    target: usize,
    position: usize,
    delay_s: f64,
    free_space_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Builds the dictionary, the clean and noisy data and the ground truth, and
/// writes them with a manifest. The noisy data is trial 0 of the seed.
pub fn cmd_generate(opts: &GenerateOptions) -> Result<Manifest> {
    let (cfg, raw) = load(&opts.config)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let dir = out_dir(opts.out.as_deref(), &cfg, "data")?;
    let exp = Experiment::build(&cfg, seed)?;

    let (y_noisy, sigma, support) = match cfg.noise_spec(trial_seed(seed, 0)) {
        Some(spec) => {
            let d = corrupt(&exp.y_clean, &spec)?;
            let snr = empirical_snr_db(&exp.y_clean, &d.noise);
            (d.y, Some((d.sigma, snr)), d.support)
        }
        None => (exp.y_clean.clone(), None, OutlierSupport::Entries(Vec::new())),
    };

    let mut manifest = Manifest::new("generate", seed, &raw);
    let files: [(&str, &CMatrix); 4] = [
        ("wall", &exp.wall_returns),
        ("y_clean", &exp.y_clean),
        ("y_noisy", &y_noisy),
        ("scene_truth", &exp.dict.scene_matrix(&exp.truth.r)),
    ];
    write_matrix(&dir.join("dictionary.twrm"), exp.dict.tall())?;
    manifest.add_file("dictionary", &dir, "dictionary.twrm")?;
    for (name, m) in files {
        let rel = format!("{name}.twrm");
        write_matrix(&dir.join(&rel), m)?;
        manifest.add_file(name, &dir, &rel)?;
    }

    let mut targets = String::from("target,ix,iz,x_m,z_m\n");
    for (t, &(ix, iz)) in exp.truth.pixels.iter().enumerate() {
        let p = exp.grid.center(ix, iz);
        writeln!(targets, "{t},{ix},{iz},{},{}", p.x, p.z).unwrap();
    }
    std::fs::write(dir.join("targets.csv"), targets)?;
    manifest.add_file("targets", &dir, "targets.csv")?;

    let mut outliers = String::from("row,col\n");
    match &support {
        OutlierSupport::Entries(e) => e.iter().for_each(|(i, j)| writeln!(outliers, "{i},{j}").unwrap()),
        OutlierSupport::Columns(cs) => {
            for &j in cs {
                for i in 0..exp.radar.n_freqs {
                    writeln!(outliers, "{i},{j}").unwrap();
                }
            }
        }
    }
    std::fs::write(dir.join("outliers.csv"), outliers)?;
    manifest.add_file("outliers", &dir, "outliers.csv")?;

    let mut delays = Vec::new();
    for (t, &(ix, iz)) in exp.truth.pixels.iter().enumerate() {
        let pixel = exp.grid.center(ix, iz);
        for n in 0..exp.radar.n_positions {
            let tx = exp.radar.position(n);
            delays.push(DelayRecord {
                target: t,
                position: n,
                delay_s: refraction_delay(tx, pixel, &exp.wall)?,
                free_space_s: 2.0 * tx.dist(&pixel) / SPEED_OF_LIGHT,
            });
        }
    }
    manifest.set_debug("target_direct_delays", delays)?;
    manifest.set_debug("shape", [exp.radar.n_freqs, exp.radar.n_positions, exp.dict.n_atoms()])?;
    if let Some((sigma, snr)) = sigma {
        manifest.set_debug("noise_sigma", sigma)?;
        manifest.set_debug("empirical_snr_db", snr)?;
    }
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub config: PathBuf,
    /// Directory written by `generate`.
    pub data: PathBuf,
    pub out: Option<PathBuf>,
    /// Overrides `solver.name` of the configuration.
    pub solver: Option<String>,
}

/// Summary returned by [`cmd_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solver: String,
    pub status: String,
    pub iterations: usize,
    pub auc: f64,
    pub final_relative_residual: f64,
}

fn dictionary_from_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<Dictionary> {
    let grid = cfg.grid()?;
    let tall = read_matrix(&dir.join("dictionary.twrm"))?;
    Dictionary::from_tall(
        tall,
        cfg.radar.n_freqs,
        cfg.radar.n_positions,
        grid.n_pixels(),
        grid.n_schemes(),
    )
}

/// Target pixels of the configuration.
fn truth_pixels(cfg: &ExperimentConfig, grid: &SceneGrid) -> Result<Vec<(usize, usize)>> {
    cfg.target_spec()
        .targets
        .iter()
        .map(|t| {
            grid.nearest_pixel(t.position)
                .ok_or_else(|| Error::input(format!("target at {:?} lies outside the grid", t.position)))
        })
        .collect()
}

/// Runs one solver on `y_noisy.twrm` and writes `L.twrm`, `R.twrm`, the
/// detection map (CSV, PGM and sidecar), `roc.csv`, `diagnostics.csv` and a
/// manifest. The diagnostics carry wall-clock timings, so the manifest
/// names that file without hashing it.
pub fn cmd_solve(opts: &SolveOptions) -> Result<(Manifest, SolveReport)> {
    let (cfg, raw) = load(&opts.config)?;
    let method: Method = opts.solver.as_deref().unwrap_or(&cfg.solver.name).parse()?;
    let solver_cfg = cfg.solver.to_config();
    let grid = cfg.grid()?;
    let dict = dictionary_from_dir(&cfg, &opts.data)?;
    let y = read_matrix(&opts.data.join("y_noisy.twrm"))?;
    let dir = out_dir(opts.out.as_deref(), &cfg, "results")?;

    let res = method.solve(&y, &dict, &solver_cfg)?;
    let scene = res.scene_matrix();
    let map = detection_map(&scene, &grid)?;
    let truth = truth_pixels(&cfg, &grid)?;
    let auc = if truth.is_empty() {
        f64::NAN
    } else {
        let roc = roc_curve(&map, &truth, cfg.eval.radius_px)?;
        write_roc_csv(&roc, &dir.join("roc.csv"))?;
        roc.auc
    };

    let y_norm = fro_norm(&y);
    let residual = fro_norm(&(&y - &res.l - dict.apply(&res.r)?)) / y_norm;

    let mut manifest = Manifest::new("solve", cfg.seed, &raw);
    write_matrix(&dir.join("L.twrm"), &res.l)?;
    write_matrix(&dir.join("R.twrm"), &scene)?;
    write_map_csv(&map, &dir.join("detection_map.csv"))?;
    write_map_pgm(&map, &dir.join("detection_map.pgm"))?;
    for (name, rel) in [
        ("L", "L.twrm"),
        ("R", "R.twrm"),
        ("detection_map_csv", "detection_map.csv"),
        ("detection_map_pgm", "detection_map.pgm"),
        ("detection_map_sidecar", "detection_map.json"),
    ] {
        manifest.add_file(name, &dir, rel)?;
    }
    if !truth.is_empty() {
        manifest.add_file("roc", &dir, "roc.csv")?;
    }

    let mut diag = String::from("iteration,objective,primal_residual,dual_residual,rel_change,rel_primal,seconds\n");
    for it in &res.diagnostics.iterations {
        writeln!(
            diag,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            it.iteration,
            it.objective,
            it.primal_residual,
            it.dual_residual,
            it.rel_change,
            it.primal_residual / y_norm,
            it.seconds
        )
        .unwrap();
    }
    std::fs::write(dir.join("diagnostics.csv"), diag)?;
    manifest.set_debug("unhashed", ["diagnostics.csv"])?;

    let report = SolveReport {
        solver: method.name(),
        status: match res.status {
            Status::Converged { .. } => "converged".into(),
            Status::BudgetExhausted => "budget_exhausted".into(),
        },
        iterations: res.iterations_run(),
        auc,
        final_relative_residual: residual,
    };
    manifest.set_debug("report", &report)?;
    manifest.set_debug("objective", res.diagnostics.objective_label)?;
    manifest.set_debug("step_halvings", res.diagnostics.step_halvings)?;
    manifest.write(&dir.join("manifest.json"))?;
    Ok((manifest, report))
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub solver: Option<String>,
    /// Overrides `sweep.trials`.
    pub trials: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mu: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub trials: usize,
}

/// Mean AUC over seeded trials at every `(lambda, mu)` of the `[sweep]`
/// grid, lambda-major. Writes `sweep.csv`, the timed per-trial log
/// `sweep_trials.csv` (named in the manifest without a hash) and a manifest.
pub fn cmd_sweep(opts: &SweepOptions) -> Result<(Manifest, Vec<SweepRow>)> {
    let (cfg, raw) = load(&opts.config)?;
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config {
        line: 0,
        msg: "a [sweep] section with lambda and mu lists is required".into(),
    })?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let trials = opts.trials.unwrap_or(sweep.trials);
    if trials == 0 {
        return Err(Error::input("--trials must be at least 1"));
    }
    let method: Method = opts.solver.as_deref().unwrap_or(&cfg.solver.name).parse()?;
    let dir = out_dir(opts.out.as_deref(), &cfg, "sweep")?;
    let exp = Experiment::build(&cfg, seed)?;
    let scenario = exp.scenario(&cfg);

    let mut rows = Vec::new();
    let mut all_trials = String::from("lambda,mu,trial,seed,auc,iterations,status,seconds\n");
    for &lambda in &sweep.lambda {
        for &mu in &sweep.mu {
            let entry = SolverEntry::new(
                method,
                crate::solvers::SolverConfig {
                    lambda,
                    mu,
                    ..cfg.solver.to_config()
                },
            );
            let records = run_monte_carlo(&scenario, &[entry], trials, seed, opts.threads)?;
            let aucs: Vec<f64> = records.iter().filter_map(|r| r.auc).collect();
            let (mean, std) = mean_std(&aucs);
            for r in &records {
                writeln!(
                    all_trials,
                    "{lambda},{mu},{},{},{},{},{},{}",
                    r.trial,
                    r.seed,
                    r.auc.map(|a| a.to_string()).unwrap_or_default(),
                    r.iterations,
                    r.status,
                    r.seconds
                )
                .unwrap();
            }
            rows.push(SweepRow {
                lambda,
                mu,
                mean_auc: mean,
                std_auc: std,
                trials: aucs.len(),
            });
        }
    }

    let mut csv = String::from("lambda,mu,mean_auc,std_auc,trials\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.lambda, r.mu, r.mean_auc, r.std_auc, r.trials).unwrap();
    }
    std::fs::write(dir.join("sweep.csv"), csv)?;
    std::fs::write(dir.join("sweep_trials.csv"), all_trials)?;
    let mut manifest = Manifest::new("sweep", seed, &raw);
    manifest.add_file("sweep", &dir, "sweep.csv")?;
    manifest.set_debug("solver", method.name())?;
    manifest.set_debug("trials", trials)?;
    manifest.set_debug("unhashed", ["sweep_trials.csv"])?;
    manifest.write(&dir.join("manifest.json"))?;
    Ok((manifest, rows))
}
