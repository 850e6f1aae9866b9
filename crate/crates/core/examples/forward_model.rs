//! Build a multipath dictionary and synthesise wall and target returns.
//!
//!     cargo run --example forward_model

use kronrpca::forward::*;
use kronrpca::linalg::{fro_norm, numerical_rank};

fn main() -> kronrpca::Result<()> {
    let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
    let radar = RadarConfig::with_band_hz(16, 1.05, 0.2, 32, 1e9, 3e9);

    let tx = radar.position(0);
    let pixel = Point::new(2.5, 3.0);
    let path = refraction_path(tx, pixel, &wall)?;
    let free = 2.0 * tx.dist(&pixel) / SPEED_OF_LIGHT;
    println!(
        "through-wall delay {:.4} ns (free space {:.4} ns), enters at x = {:.4}, leaves at x = {:.4}",
        path.delay * 1e9,
        free * 1e9,
        path.entry_x,
        path.exit_x
    );
    let reverbs: Vec<String> = reverb_delays(&wall).iter().map(|t| format!("{:.4}", t * 1e9)).collect();
    println!("wall reverberations at [{}] ns", reverbs.join(", "));

    let grid = SceneGrid {
        n_x: 12,
        n_z: 12,
        crossrange: (1.5, 3.6),
        downrange: (2.0, 4.1),
        schemes: vec![
            MultipathScheme::Direct,
            MultipathScheme::InteriorBounce(MirrorPlane::Crossrange(4.5)),
            MultipathScheme::WallRinging(1),
        ],
    };
    let dict = build_dictionary(&grid, &radar, &wall)?;
    println!(
        "dictionary: {} freqs x {} positions x {} atoms ({} pixels x {} schemes), lambda_max = {:.1}",
        dict.n_freqs(),
        dict.n_positions(),
        dict.n_atoms(),
        dict.n_pixels(),
        dict.n_schemes(),
        dict.gram_lambda_max()?
    );

    let walls = synthesize_wall_returns(&wall, &radar, 0.0, 0);
    let targets = TargetSpec {
        targets: vec![Target::unit(2.6, 3.5), Target::unit(2.0, 2.6)],
    };
    let truth = synthesize_scene(&targets, &grid, &dict)?;
    println!(
        "wall returns: rank {}, norm {:.2}; targets at pixels {:?}, norm {:.2}",
        numerical_rank(&walls, 1e-8)?,
        fro_norm(&walls),
        truth.pixels,
        fro_norm(&truth.y_targets)
    );
    Ok(())
}
