//! Noiseless wall/target separation with KRPCA, then the detection map.
//!
//!     cargo run --release --example krpca_recovery

use kronrpca::eval::{auc, detection_map, roc_curve};
use kronrpca::forward::*;
use kronrpca::linalg::{fro_norm, numerical_rank};
use kronrpca::solvers::{krpca_solve, SolverConfig, Status};

fn main() -> kronrpca::Result<()> {
    let grid = SceneGrid {
        n_x: 16,
        n_z: 16,
        crossrange: (1.5, 3.6),
        downrange: (2.0, 4.1),
        schemes: vec![MultipathScheme::Direct],
    };
    let radar = RadarConfig::with_band_hz(16, 1.05, 0.2, 64, 1e9, 3e9);
    let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
    let dict = build_dictionary(&grid, &radar, &wall)?;
    let walls = synthesize_wall_returns(&wall, &radar, 0.0, 0);
    let targets = TargetSpec {
        targets: vec![Target::unit(2.6, 3.5), Target::unit(2.0, 2.6)],
    };
    let truth = synthesize_scene(&targets, &grid, &dict)?;
    let y = &walls + &truth.y_targets;
    println!(
        "wall-to-target energy ratio {:.1}",
        fro_norm(&walls) / fro_norm(&truth.y_targets)
    );

    let cfg = SolverConfig {
        lambda: 1.0,
        mu: 1.0,
        outer_iters: 500,
        ..Default::default()
    };
    let res = krpca_solve(&y, &dict, &cfg)?;
    match res.status {
        Status::Converged { iteration } => println!("converged at iteration {iteration}"),
        s => println!("stopped: {s:?}"),
    }
    for rec in res.diagnostics.iterations.iter().step_by(50) {
        println!(
            "  it {:4}  objective {:10.4}  residual {:.2e}  rel change {:.2e}",
            rec.iteration, rec.objective, rec.primal_residual, rec.rel_change
        );
    }
    let resid = fro_norm(&(&y - &res.l - dict.apply(&res.r)?)) / fro_norm(&y);
    println!(
        "relative constraint residual {resid:.2e}, wall error {:.2e}, rank(L) = {}",
        fro_norm(&(&res.l - &walls)) / fro_norm(&walls),
        numerical_rank(&res.l, 1e-6)?
    );

    let map = detection_map(&res.scene_matrix(), &grid)?;
    let top: Vec<_> = map.ranked_pixels().into_iter().take(2).collect();
    println!("brightest pixels {top:?}, true targets {:?}", truth.pixels);
    println!("AUC {:.4}", auc(&roc_curve(&map, &truth.pixels, 1.0)?));
    Ok(())
}
