//! Heavy-tailed noise plus outliers: KRPCA against the two Huber solvers on
//! one noisy draw.
//!
//!     cargo run --release --example hkrpca_heavy_tailed

use kronrpca::eval::{auc, detection_map, roc_curve};
use kronrpca::forward::*;
use kronrpca::linalg::c;
use kronrpca::noise::*;
use kronrpca::solvers::{Method, PartitionKind, SolverConfig};

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
    let weak = |x, z| Target {
        position: Point::new(x, z),
        amplitudes: vec![c(0.005, 0.0)],
    };
    let truth = synthesize_scene(
        &TargetSpec {
            targets: vec![weak(2.6, 3.5), weak(2.0, 2.6)],
        },
        &grid,
        &dict,
    )?;
    let y_clean = &walls + &truth.y_targets;

    let noisy = corrupt(
        &y_clean,
        &NoiseSpec {
            structure: NoiseStructure::Pointwise,
            dof: 2.01,
            snr_db: 10.0,
            outliers: OutlierSpec {
                count: 20,
                structure: OutlierStructure::Point,
            },
            seed: 11,
        },
    )?;
    println!(
        "empirical SNR {:.2} dB, {} outlier entries",
        empirical_snr_db(&y_clean, &noisy.noise),
        noisy.support.len()
    );

    let base = SolverConfig {
        outer_iters: 200,
        ..Default::default()
    };
    let huber = SolverConfig {
        lambda: 3.0,
        mu: 10.0,
        huber_c: 0.03,
        ..base.clone()
    };
    let runs = [
        (Method::Krpca, SolverConfig { lambda: 3.0, ..base }),
        (Method::HkrpcaSd(PartitionKind::Pointwise), huber.clone()),
        (Method::HkrpcaFd(PartitionKind::Pointwise), huber),
    ];
    for (method, cfg) in runs {
        let res = method.solve(&noisy.y, &dict, &cfg)?;
        let map = detection_map(&res.scene_matrix(), &grid)?;
        let score = auc(&roc_curve(&map, &truth.pixels, 1.0)?);
        let top: Vec<_> = map.ranked_pixels().into_iter().take(2).collect();
        println!(
            "{:14} AUC {score:.4}  top pixels {top:?}  ({} iterations, {} step halvings)",
            method.name(),
            res.iterations_run(),
            res.diagnostics.step_halvings
        );
    }
    println!("true target pixels {:?}", truth.pixels);
    Ok(())
}
