//! Kronecker-structured steering dictionary.

use std::sync::OnceLock;

use rayon::prelude::*;

use super::geometry::{PathDelay, RadarConfig, SceneGrid, WallSpec};
use crate::error::{Error, Result};
use crate::linalg::{power_iteration, unvec, vec_of, CMatrix, CVector, C64};

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 500;

/// Stacked per-position dictionary blocks.
///
/// Stored in tall form: rows `n * M .. (n + 1) * M` hold block `n`, which maps
/// the scene vector (all multipath schemes stacked, `D` entries) to the `M`
/// frequency samples at position `n`.
#[derive(Debug)]
pub struct Dictionary {
    n_freqs: usize,
    n_positions: usize,
    n_pixels: usize,
    n_schemes: usize,
    tall: CMatrix,
    lambda_max: OnceLock<f64>,
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        let lambda_max = OnceLock::new();
        if let Some(&v) = self.lambda_max.get() {
            let _ = lambda_max.set(v);
        }
        Self {
            n_freqs: self.n_freqs,
            n_positions: self.n_positions,
            n_pixels: self.n_pixels,
            n_schemes: self.n_schemes,
            tall: self.tall.clone(),
            lambda_max,
        }
    }
}

impl Dictionary {
    /// Builds a dictionary from its tall form `(M N) x (n_pixels n_schemes)`.
    pub fn from_tall(
        tall: CMatrix,
        n_freqs: usize,
        n_positions: usize,
        n_pixels: usize,
        n_schemes: usize,
    ) -> Result<Self> {
        if tall.nrows() != n_freqs * n_positions || tall.ncols() != n_pixels * n_schemes {
            return Err(Error::shape(format!(
                "tall dictionary is {}x{}, expected {}x{}",
                tall.nrows(),
                tall.ncols(),
                n_freqs * n_positions,
                n_pixels * n_schemes
            )));
        }
        Ok(Self {
            n_freqs,
            n_positions,
            n_pixels,
            n_schemes,
            tall,
            lambda_max: OnceLock::new(),
        })
    }

    /// Builds a dictionary from its per-position blocks, each `M x D`.
    pub fn from_blocks(blocks: &[CMatrix], n_pixels: usize, n_schemes: usize) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::input("no dictionary blocks"))?;
        let (m, d) = first.shape();
        if blocks.iter().any(|b| b.shape() != (m, d)) {
            return Err(Error::shape("dictionary blocks differ in shape"));
        }
        let mut tall = CMatrix::zeros(m * blocks.len(), d);
        for (n, b) in blocks.iter().enumerate() {
            tall.rows_mut(n * m, m).copy_from(b);
        }
        Self::from_tall(tall, m, blocks.len(), n_pixels, n_schemes)
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    pub fn n_positions(&self) -> usize {
        self.n_positions
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_schemes(&self) -> usize {
        self.n_schemes
    }

    /// Scene vector length `D = n_pixels * n_schemes`.
    pub fn n_atoms(&self) -> usize {
        self.tall.ncols()
    }

    pub fn tall(&self) -> &CMatrix {
        &self.tall
    }

    pub fn block(&self, n: usize) -> CMatrix {
        self.tall.rows(n * self.n_freqs, self.n_freqs).into_owned()
    }

    /// Wide form `[Psi_1 ... Psi_N]`, `M x (D N)`.
    pub fn wide(&self) -> CMatrix {
        let d = self.n_atoms();
        let mut wide = CMatrix::zeros(self.n_freqs, d * self.n_positions);
        for n in 0..self.n_positions {
            wide.columns_mut(n * d, d)
                .copy_from(&self.tall.rows(n * self.n_freqs, self.n_freqs));
        }
        wide
    }

    /// `Psi (I_N (x) r)`, computed as the reshaped tall product.
    pub fn apply(&self, r: &CVector) -> Result<CMatrix> {
        if r.len() != self.n_atoms() {
            return Err(Error::shape(format!(
                "scene vector has length {}, dictionary expects {}",
                r.len(),
                self.n_atoms()
            )));
        }
        Ok(unvec(&(&self.tall * r), self.n_freqs, self.n_positions))
    }

    /// `Psi_A^H vec(e)` for an `M x N` matrix `e`.
    pub fn adjoint(&self, e: &CMatrix) -> Result<CVector> {
        if e.shape() != (self.n_freqs, self.n_positions) {
            return Err(Error::shape(format!(
                "residual is {:?}, dictionary expects {}x{}",
                e.shape(),
                self.n_freqs,
                self.n_positions
            )));
        }
        Ok(self.tall.ad_mul(&vec_of(e)))
    }

    /// Largest eigenvalue of `Psi_A^H Psi_A`, by power iteration; cached.
    pub fn gram_lambda_max(&self) -> Result<f64> {
        if let Some(&v) = self.lambda_max.get() {
            return Ok(v);
        }
        let tall = &self.tall;
        let v = power_iteration(self.n_atoms(), POWER_TOL, POWER_MAX_ITERS, |x| tall.ad_mul(&(tall * x)))?;
        Ok(*self.lambda_max.get_or_init(|| v))
    }

    /// Scene vector reshaped to `n_pixels x n_schemes`.
    pub fn scene_matrix(&self, r: &CVector) -> CMatrix {
        unvec(r, self.n_pixels, self.n_schemes)
    }
}

/// Two-way delays for every (position, scheme, pixel), laid out like the
/// dictionary columns: `delays[n][scheme * n_pixels + pixel]`.
pub fn path_delays(
    grid: &SceneGrid,
    radar: &RadarConfig,
    wall: &WallSpec,
    models: &[&dyn PathDelay],
) -> Result<Vec<Vec<f64>>> {
    let n_pix = grid.n_pixels();
    (0..radar.n_positions)
        .into_par_iter()
        .map(|n| {
            let tx = radar.position(n);
            let mut out = Vec::with_capacity(n_pix * models.len());
            for (s, model) in models.iter().enumerate() {
                for j in 0..n_pix {
                    let (ix, iz) = grid.coords(j);
                    let px = grid.center(ix, iz);
                    let tau = model.delay(tx, px, wall).map_err(|e| match e {
                        Error::Numerical(msg) => {
                            Error::Numerical(format!("delay for position {n}, scheme {s}, pixel ({ix}, {iz}): {msg}"))
                        }
                        Error::Input(msg) => {
                            Error::Input(format!("delay for position {n}, scheme {s}, pixel ({ix}, {iz}): {msg}"))
                        }
                        other => other,
                    })?;
                    out.push(tau);
                }
            }
            Ok(out)
        })
        .collect()
}

/// Dictionary for the grid's own multipath schemes.
pub fn build_dictionary(grid: &SceneGrid, radar: &RadarConfig, wall: &WallSpec) -> Result<Dictionary> {
    let models: Vec<&dyn PathDelay> = grid.schemes.iter().map(|s| s as &dyn PathDelay).collect();
    build_dictionary_with(grid, radar, wall, &models)
}

/// Dictionary for arbitrary delay models, one block column group per model.
pub fn build_dictionary_with(
    grid: &SceneGrid,
    radar: &RadarConfig,
    wall: &WallSpec,
    models: &[&dyn PathDelay],
) -> Result<Dictionary> {
    radar.validate()?;
    wall.validate()?;
    if grid.n_pixels() == 0 || models.is_empty() {
        return Err(Error::input("dictionary needs at least one pixel and one delay model"));
    }
    if grid.downrange.0 <= wall.back_face() {
        return Err(Error::input("pixel centers must lie behind the wall back face"));
    }
    let delays = path_delays(grid, radar, wall, models)?;
    let m = radar.n_freqs;
    let d = grid.n_pixels() * models.len();
    let omegas = radar.omegas();
    let mut tall = CMatrix::zeros(m * radar.n_positions, d);
    // column-major: fill each column (atom) for all positions
    tall.as_mut_slice()
        .par_chunks_mut(m * radar.n_positions)
        .enumerate()
        .for_each(|(atom, col)| {
            for (n, taus) in delays.iter().enumerate() {
                let tau = taus[atom];
                for (k, &w) in omegas.iter().enumerate() {
                    col[n * m + k] = C64::from_polar(1.0, -w * tau);
                }
            }
        });
    Dictionary::from_tall(tall, m, radar.n_positions, grid.n_pixels(), models.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::geometry::{refraction_delay, MultipathScheme, Point};
    use crate::linalg::{c, fro_norm, vec_norm};

    fn small() -> (SceneGrid, RadarConfig, WallSpec) {
        let grid = SceneGrid {
            n_x: 3,
            n_z: 2,
            crossrange: (1.0, 2.0),
            downrange: (2.0, 2.5),
            schemes: vec![MultipathScheme::Direct, MultipathScheme::WallRinging(1)],
        };
        let radar = RadarConfig::with_band_hz(4, 1.2, 0.2, 5, 1e9, 3e9);
        let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
        (grid, radar, wall)
    }

    #[test]
    fn entries_are_pure_phases_of_the_delays() {
        let (grid, radar, wall) = small();
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        assert_eq!(dict.tall().shape(), (20, 12));
        assert!(dict.tall().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let (n, m, ix, iz) = (2, 3, 1, 1);
        let j = grid.index(ix, iz);
        let tau = refraction_delay(radar.position(n), grid.center(ix, iz), &wall).unwrap();
        let expect = C64::from_polar(1.0, -radar.omega(m) * tau);
        assert!((dict.block(n)[(m, j)] - expect).norm() < 1e-9);
        let ring = C64::from_polar(1.0, -radar.omega(m) * (tau + wall.two_way_transit()));
        assert!((dict.block(n)[(m, grid.n_pixels() + j)] - ring).norm() < 1e-9);
    }

    #[test]
    fn single_entry_dictionary() {
        let grid = SceneGrid {
            n_x: 1,
            n_z: 1,
            crossrange: (2.0, 2.0),
            downrange: (3.0, 3.0),
            schemes: vec![MultipathScheme::Direct],
        };
        let radar = RadarConfig {
            n_positions: 1,
            position_start: 1.5,
            position_step: 0.1,
            n_freqs: 1,
            freq_start: 1.3e10,
            freq_step: 1.0,
        };
        let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 1);
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        let tau = refraction_delay(Point::new(1.5, 0.0), Point::new(2.0, 3.0), &wall).unwrap();
        assert!((dict.tall()[(0, 0)] - C64::from_polar(1.0, -1.3e10 * tau)).norm() < 1e-9);
    }

    #[test]
    fn mirror_symmetric_pixels_share_columns() {
        // Pixels at x = 1.6 and x = 2.4 are equidistant from the antenna at x = 2.0.
        let grid = SceneGrid {
            n_x: 2,
            n_z: 1,
            crossrange: (1.6, 2.4),
            downrange: (3.0, 3.0),
            schemes: vec![MultipathScheme::Direct],
        };
        let radar = RadarConfig::with_band_hz(1, 2.0, 0.1, 8, 1e9, 3e9);
        let wall = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 1);
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        let a = dict.tall().column(0);
        let b = dict.tall().column(1);
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn forms_agree() {
        let (grid, radar, wall) = small();
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        let r = CVector::from_fn(12, |i, _| c(i as f64 * 0.3 - 1.0, 0.5 - i as f64 * 0.1));
        let y = dict.apply(&r).unwrap();
        let wide = dict.wide();
        for n in 0..4 {
            let col = wide.columns(n * 12, 12) * &r;
            assert!((y.column(n) - col).norm() < 1e-12);
        }
        let blocks: Vec<CMatrix> = (0..4).map(|n| dict.block(n)).collect();
        let again = Dictionary::from_blocks(&blocks, 6, 2).unwrap();
        assert_eq!(again.tall(), dict.tall());
        // <Psi r, E> = <r, Psi^H E>
        let e = CMatrix::from_fn(5, 4, |i, j| c((i + 2 * j) as f64, 1.0 - j as f64));
        let lhs: C64 = y.iter().zip(e.iter()).map(|(a, b)| a.conj() * b).sum();
        let rhs: C64 = r
            .iter()
            .zip(dict.adjoint(&e).unwrap().iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
        assert!(dict.apply(&CVector::zeros(11)).is_err());
        assert!(dict.adjoint(&CMatrix::zeros(4, 5)).is_err());
        assert!(fro_norm(&dict.apply(&CVector::zeros(12)).unwrap()) == 0.0);
        assert!(vec_norm(&r) > 0.0);
    }

    #[test]
    fn lambda_max_matches_dense_eigenvalue() {
        let (grid, radar, wall) = small();
        let dict = build_dictionary(&grid, &radar, &wall).unwrap();
        let g = dict.tall().ad_mul(dict.tall());
        let eig = g.symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max);
        let lm = dict.gram_lambda_max().unwrap();
        assert!((lm - eig).abs() < 1e-5 * eig, "{lm} vs {eig}");
        assert_eq!(dict.clone().gram_lambda_max().unwrap(), lm);
    }

    #[test]
    fn rejects_pixels_inside_the_wall() {
        let (mut grid, radar, wall) = small();
        grid.downrange = (1.3, 2.0);
        assert!(build_dictionary(&grid, &radar, &wall).is_err());
    }
}
