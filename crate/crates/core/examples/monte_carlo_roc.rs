//! Seeded Monte Carlo comparison of all six solvers with averaged ROC curves.
//!
//!     cargo run --release --example monte_carlo_roc [trials]

use kronrpca::eval::average_rocs;
use kronrpca::forward::*;
use kronrpca::linalg::c;
use kronrpca::montecarlo::*;
use kronrpca::noise::*;
use kronrpca::solvers::{Method, PartitionKind, SolverConfig};

fn main() -> kronrpca::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let grid = SceneGrid {
        n_x: 12,
        n_z: 12,
        crossrange: (1.5, 3.6),
        downrange: (2.0, 4.1),
        schemes: vec![MultipathScheme::Direct],
    };
    let radar = RadarConfig::with_band_hz(16, 1.05, 0.2, 32, 1e9, 3e9);
    let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
    let dict = build_dictionary(&grid, &radar, &wall)?;
    let target = |x, z| Target {
        position: Point::new(x, z),
        amplitudes: vec![c(0.005, 0.0)],
    };
    let truth = synthesize_scene(
        &TargetSpec {
            targets: vec![target(2.6, 3.5), target(2.0, 2.6)],
        },
        &grid,
        &dict,
    )?;
    let scenario = Scenario {
        name: "pointwise-t".into(),
        y_clean: &synthesize_wall_returns(&wall, &radar, 0.0, 0) + &truth.y_targets,
        dict,
        grid,
        truth: truth.pixels,
        noise: Some(NoiseSpec {
            structure: NoiseStructure::Pointwise,
            dof: 2.01,
            snr_db: 10.0,
            outliers: OutlierSpec::none(),
            seed: 0,
        }),
        radius: 1.0,
    };

    let cfg = SolverConfig {
        lambda: 3.0,
        mu: 10.0,
        huber_c: 0.03,
        outer_iters: 100,
        ..Default::default()
    };
    let solvers: Vec<SolverEntry> = Method::all()
        .into_iter()
        .map(|m| match m {
            Method::Srcs { .. } => SolverEntry::new(
                m,
                SolverConfig {
                    lambda: 1.0,
                    mu: 1.0,
                    ..cfg.clone()
                },
            ),
            Method::Krpca => SolverEntry::new(m, SolverConfig { mu: 1.0, ..cfg.clone() }),
            // A column block norm is ~sqrt(M) times an entry's.
            Method::HkrpcaSd(PartitionKind::Columnwise) | Method::HkrpcaFd(PartitionKind::Columnwise) => {
                SolverEntry::new(
                    m,
                    SolverConfig {
                        huber_c: cfg.huber_c * 32f64.sqrt(),
                        ..cfg.clone()
                    },
                )
            }
            _ => SolverEntry::new(m, cfg.clone()),
        })
        .collect();

    let records = run_monte_carlo(&scenario, &solvers, trials, 2024, None)?;
    for s in aggregate(&records) {
        let curves: Vec<_> = records
            .iter()
            .filter(|r| r.solver == s.solver)
            .filter_map(|r| r.roc.clone())
            .collect();
        let avg = average_rocs(&curves)?;
        println!(
            "{:14} AUC {:.3} +- {:.3}  TPR at 10% FPR {:.2}  failures {}",
            s.solver,
            s.mean_auc,
            s.std_auc,
            avg.tpr_at(0.1),
            s.failures
        );
    }
    Ok(())
}
