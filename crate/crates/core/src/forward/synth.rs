//! Noiseless synthetic measurements: front-wall returns and point targets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dictionary::Dictionary;
use super::geometry::{reverb_delays, Point, RadarConfig, SceneGrid, WallSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64};

/// Point target with one complex amplitude per multipath scheme. A single
/// amplitude is broadcast to every scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub position: Point,
    pub amplitudes: Vec<C64>,
}

impl Target {
    pub fn unit(x: f64, z: f64) -> Self {
        Self {
            position: Point::new(x, z),
            amplitudes: vec![c(1.0, 0.0)],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetSpec {
    pub targets: Vec<Target>,
}

/// Ground truth produced by [`synthesize_scene`].
#[derive(Debug, Clone)]
pub struct SceneTruth {
    /// Scene vector, all schemes stacked.
    pub r: CVector,
    /// Target contribution to the data, `M x N`, wall excluded.
    pub y_targets: CMatrix,
    /// Grid pixel of each target after snapping.
    pub pixels: Vec<(usize, usize)>,
}

/// Front-wall returns, one column per array position.
///
/// With `jitter = 0` every column is the same reverberation sum (rank one).
/// Otherwise column `n` is scaled by `1 + jitter * g_n`, `g_n ~ N(0, 1)`.
pub fn synthesize_wall_returns(wall: &WallSpec, radar: &RadarConfig, jitter: f64, seed: u64) -> CMatrix {
    let delays = reverb_delays(wall);
    let column: Vec<C64> = radar
        .omegas()
        .iter()
        .map(|&w| {
            wall.reverb_amplitudes
                .iter()
                .zip(&delays)
                .map(|(&amp, &tau)| amp * C64::from_polar(1.0, -w * tau))
                .sum()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CMatrix::zeros(radar.n_freqs, radar.n_positions);
    for n in 0..radar.n_positions {
        let scale = if jitter > 0.0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            1.0 + jitter * g
        } else {
            1.0
        };
        for (m, &v) in column.iter().enumerate() {
            out[(m, n)] = v * scale;
        }
    }
    out
}

/// Places the targets on the grid and returns the scene vector together with
/// the noiseless target returns `vec^-1(Psi_A r)`.
pub fn synthesize_scene(targets: &TargetSpec, grid: &SceneGrid, dict: &Dictionary) -> Result<SceneTruth> {
    if dict.n_pixels() != grid.n_pixels() || dict.n_schemes() != grid.n_schemes() {
        return Err(Error::shape("dictionary does not match the scene grid"));
    }
    let n_pix = grid.n_pixels();
    let n_schemes = grid.n_schemes();
    let mut r = CVector::zeros(dict.n_atoms());
    let mut pixels = Vec::with_capacity(targets.targets.len());
    for (p, t) in targets.targets.iter().enumerate() {
        let (ix, iz) = grid
            .nearest_pixel(t.position)
            .ok_or_else(|| Error::input(format!("target {p} at {:?} lies outside the scene grid", t.position)))?;
        let snapped = grid.center(ix, iz);
        if snapped.dist(&t.position) > 1e-9 {
            log::warn!(
                "target {p} at ({}, {}) snapped to pixel center ({}, {})",
                t.position.x,
                t.position.z,
                snapped.x,
                snapped.z
            );
        }
        if t.amplitudes.len() != 1 && t.amplitudes.len() != n_schemes {
            return Err(Error::input(format!(
                "target {p} has {} amplitudes, expected 1 or {n_schemes}",
                t.amplitudes.len()
            )));
        }
        let j = grid.index(ix, iz);
        for s in 0..n_schemes {
            let amp = if t.amplitudes.len() == 1 {
                t.amplitudes[0]
            } else {
                t.amplitudes[s]
            };
            r[s * n_pix + j] += amp;
        }
        pixels.push((ix, iz));
    }
    let y_targets = dict.apply(&r)?;
    Ok(SceneTruth { r, y_targets, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::dictionary::build_dictionary;
    use crate::forward::geometry::MultipathScheme;
    use crate::linalg::{fro_norm, numerical_rank, vec_norm};

    fn setup() -> (SceneGrid, RadarConfig, WallSpec, Dictionary) {
        let grid = SceneGrid {
            n_x: 4,
            n_z: 4,
            crossrange: (1.5, 3.0),
            downrange: (2.0, 3.5),
            schemes: vec![MultipathScheme::Direct],
        };
        let radar = RadarConfig::with_band_hz(16, 1.2, 0.1, 12, 1e9, 3e9);
        let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        (grid, radar, wall, dict)
    }

    #[test]
    fn wall_rank() {
        let (_, radar, wall, _) = setup();
        let l = synthesize_wall_returns(&wall, &radar, 0.0, 1);
        assert_eq!(numerical_rank(&l, 1e-10).unwrap(), 1);
        let jittered = synthesize_wall_returns(&wall, &radar, 0.1, 1);
        assert_eq!(numerical_rank(&jittered, 1e-10).unwrap(), 1);
        assert_eq!(jittered, synthesize_wall_returns(&wall, &radar, 0.1, 1));
        assert_ne!(jittered, l);
    }

    #[test]
    fn single_reverb_is_a_pure_phase() {
        let (_, radar, _, _) = setup();
        let wall = WallSpec {
            reverb_amplitudes: vec![c(1.0, 0.0)],
            ..WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 1)
        };
        let l = synthesize_wall_returns(&wall, &radar, 0.0, 0);
        let tau = 2.0 * 1.2 / crate::forward::SPEED_OF_LIGHT;
        for n in 0..radar.n_positions {
            for m in 0..radar.n_freqs {
                assert!((l[(m, n)] - C64::from_polar(1.0, -radar.omega(m) * tau)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn scenes() {
        let (grid, _, _, dict) = setup();
        let empty = synthesize_scene(&TargetSpec::default(), &grid, &dict).unwrap();
        assert_eq!(vec_norm(&empty.r), 0.0);
        assert_eq!(fro_norm(&empty.y_targets), 0.0);

        let p = grid.center(2, 1);
        let one = synthesize_scene(
            &TargetSpec {
                targets: vec![Target::unit(p.x, p.z)],
            },
            &grid,
            &dict,
        )
        .unwrap();
        assert_eq!(one.pixels, vec![(2, 1)]);
        let j = grid.index(2, 1);
        for n in 0..dict.n_positions() {
            assert!((one.y_targets.column(n) - dict.block(n).column(j)).norm() < 1e-12);
        }

        let two = TargetSpec {
            targets: vec![Target::unit(p.x + 0.01, p.z), Target::unit(1.5, 3.5)],
        };
        let s = synthesize_scene(&two, &grid, &dict).unwrap();
        let wide_product: f64 = (0..dict.n_positions())
            .map(|n| (dict.wide().columns(n * dict.n_atoms(), dict.n_atoms()) * &s.r).norm_squared())
            .sum();
        assert!((fro_norm(&s.y_targets).powi(2) - wide_product).abs() < 1e-10 * wide_product);

        let outside = TargetSpec {
            targets: vec![Target::unit(9.0, 3.0)],
        };
        assert!(synthesize_scene(&outside, &grid, &dict).is_err());
        let bad_amps = TargetSpec {
            targets: vec![Target {
                position: p,
                amplitudes: vec![c(1.0, 0.0); 2],
            }],
        };
        assert!(synthesize_scene(&bad_amps, &grid, &dict).is_err());
    }
}
