//! The `generate`, `solve` and `sweep` commands driven from the library, on
//! the shipped demo configuration with a smaller grid and budget.
//!
//!     cargo run --release --example hyperparameter_sweep

use std::path::Path;

use kronrpca::cli::*;
use kronrpca::config::ExperimentConfig;

fn main() -> kronrpca::Result<()> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let mut cfg = ExperimentConfig::load(&demo)?;
    cfg.scene.n_x = 10;
    cfg.scene.n_z = 10;
    cfg.solver.outer_iters = 60;
    let sweep = cfg.sweep.as_mut().expect("demo config has a sweep section");
    sweep.trials = 3;

    let out = std::env::temp_dir().join("kronrpca-sweep-example");
    std::fs::create_dir_all(&out)?;
    let config = out.join("experiment.toml");
    std::fs::write(&config, cfg.to_toml_string()?)?;

    let manifest = cmd_generate(&GenerateOptions {
        config: config.clone(),
        out: Some(out.join("data")),
        seed: None,
    })?;
    println!("generated {} artifacts", manifest.artifacts.len());

    let (_, report) = cmd_solve(&SolveOptions {
        config: config.clone(),
        data: out.join("data"),
        out: Some(out.join("solve")),
        solver: None,
    })?;
    println!(
        "{}: AUC {:.3} after {} iterations",
        cfg.solver.name, report.auc, report.iterations
    );

    let (_, rows) = cmd_sweep(&SweepOptions {
        config,
        out: Some(out.join("sweep")),
        ..Default::default()
    })?;
    println!("lambda     mu   mean AUC");
    for r in &rows {
        println!("{:6} {:6} {:10.3} +- {:.3}", r.lambda, r.mu, r.mean_auc, r.std_auc);
    }
    println!("outputs under {}", out.display());
    Ok(())
}
