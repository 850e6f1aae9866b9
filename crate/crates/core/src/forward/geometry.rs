//! Scene geometry, wall physics and through-wall propagation delays.
//!
//! Coordinates are `(x, z)` in meters: `x` is crossrange (parallel to the wall
//! and to the synthetic array), `z` is downrange. The array sits on `z = 0`,
//! the front face of the wall at `z = standoff` and its back face at
//! `z = standoff + thickness`.

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const GOLDEN_MAX_ITERS: usize = 200;
const GOLDEN_TIME_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub z: f64,
}

impl Point {
    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }
}

/// Homogeneous, non-dispersive dielectric slab parallel to the array.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSpec {
    pub thickness: f64,
    pub relative_permittivity: f64,
    pub standoff: f64,
    /// Complex attenuation of each front-wall reverberation, strongest first.
    pub reverb_amplitudes: Vec<C64>,
}

impl WallSpec {
    /// Wall with `reverb_count` reverberations of amplitude `0.7^k`.
    pub fn with_default_reverbs(
        thickness: f64,
        relative_permittivity: f64,
        standoff: f64,
        reverb_count: usize,
    ) -> Self {
        let reverb_amplitudes = (1..=reverb_count)
            .map(|k| C64::new(0.7f64.powi(k as i32), 0.0))
            .collect();
        Self {
            thickness,
            relative_permittivity,
            standoff,
            reverb_amplitudes,
        }
    }

    pub fn reverb_count(&self) -> usize {
        self.reverb_amplitudes.len()
    }

    pub fn refractive_index(&self) -> f64 {
        self.relative_permittivity.sqrt()
    }

    pub fn back_face(&self) -> f64 {
        self.standoff + self.thickness
    }

    /// Two-way transit time through the slab at normal incidence.
    pub fn two_way_transit(&self) -> f64 {
        2.0 * self.thickness * self.refractive_index() / SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness >= 0.0 && self.thickness.is_finite()) {
            return Err(Error::input(format!(
                "wall thickness must be >= 0, got {}",
                self.thickness
            )));
        }
        if !(self.relative_permittivity >= 1.0 && self.relative_permittivity.is_finite()) {
            return Err(Error::input(format!(
                "relative permittivity must be >= 1, got {}",
                self.relative_permittivity
            )));
        }
        if !(self.standoff > 0.0 && self.standoff.is_finite()) {
            return Err(Error::input(format!(
                "wall standoff must be > 0, got {}",
                self.standoff
            )));
        }
        if self.reverb_amplitudes.is_empty() {
            return Err(Error::input("wall needs at least one reverberation"));
        }
        for pair in self.reverb_amplitudes.windows(2) {
            if pair[1].norm() >= pair[0].norm() {
                return Err(Error::input(
                    "reverberation amplitudes must strictly decrease in magnitude",
                ));
            }
        }
        Ok(())
    }
}

/// Stepped-frequency synthetic array along `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    pub n_positions: usize,
    pub position_start: f64,
    pub position_step: f64,
    pub n_freqs: usize,
    /// First angular frequency, rad/s.
    pub freq_start: f64,
    /// Angular frequency step, rad/s.
    pub freq_step: f64,
}

impl RadarConfig {
    /// `n_freqs` frequencies spread uniformly over `[f_lo, f_hi]` Hz.
    pub fn with_band_hz(
        n_positions: usize,
        position_start: f64,
        position_step: f64,
        n_freqs: usize,
        f_lo: f64,
        f_hi: f64,
    ) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let step = if n_freqs > 1 {
            (f_hi - f_lo) / (n_freqs - 1) as f64
        } else {
            1.0
        };
        Self {
            n_positions,
            position_start,
            position_step,
            n_freqs,
            freq_start: two_pi * f_lo,
            freq_step: two_pi * step,
        }
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.freq_start + m as f64 * self.freq_step
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_freqs).map(|m| self.omega(m)).collect()
    }

    pub fn position(&self, n: usize) -> Point {
        Point::new(self.position_start + n as f64 * self.position_step, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_positions == 0 || self.n_freqs == 0 {
            return Err(Error::input("radar needs at least one position and one frequency"));
        }
        if !(self.position_step > 0.0) || !(self.freq_step > 0.0) {
            return Err(Error::input("position and frequency steps must be positive"));
        }
        if !(self.freq_start >= 0.0) {
            return Err(Error::input("start frequency must be non-negative"));
        }
        Ok(())
    }
}

/// Plane of an interior wall used for image-source multipath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MirrorPlane {
    /// Side wall `x = const`.
    Crossrange(f64),
    /// Back wall `z = const`.
    Downrange(f64),
}

impl MirrorPlane {
    pub fn mirror(&self, p: Point) -> Point {
        match *self {
            MirrorPlane::Crossrange(x) => Point::new(2.0 * x - p.x, p.z),
            MirrorPlane::Downrange(z) => Point::new(p.x, 2.0 * z - p.z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultipathScheme {
    Direct,
    /// Specular bounce off an interior wall, modelled by the mirror image of the pixel.
    InteriorBounce(MirrorPlane),
    /// Direct path plus `order` extra two-way transits inside the front wall.
    WallRinging(usize),
}

/// Maps a transceiver position and a pixel to a two-way delay. New multipath
/// models plug into the dictionary builder through this trait.
pub trait PathDelay: Sync {
    fn delay(&self, tx: Point, pixel: Point, wall: &WallSpec) -> Result<f64>;
}

impl PathDelay for MultipathScheme {
    fn delay(&self, tx: Point, pixel: Point, wall: &WallSpec) -> Result<f64> {
        match *self {
            MultipathScheme::Direct => refraction_delay(tx, pixel, wall),
            MultipathScheme::InteriorBounce(plane) => refraction_delay(tx, plane.mirror(pixel), wall),
            MultipathScheme::WallRinging(order) => {
                Ok(refraction_delay(tx, pixel, wall)? + order as f64 * wall.two_way_transit())
            }
        }
    }
}

/// Regular grid of pixel centers behind the wall.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    pub n_x: usize,
    pub n_z: usize,
    /// First and last pixel-center crossrange, meters.
    pub crossrange: (f64, f64),
    /// First and last pixel-center downrange, meters.
    pub downrange: (f64, f64),
    pub schemes: Vec<MultipathScheme>,
}

impl SceneGrid {
    pub fn n_pixels(&self) -> usize {
        self.n_x * self.n_z
    }

    pub fn n_schemes(&self) -> usize {
        self.schemes.len()
    }

    fn step(range: (f64, f64), n: usize) -> f64 {
        if n > 1 {
            (range.1 - range.0) / (n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn dx(&self) -> f64 {
        Self::step(self.crossrange, self.n_x)
    }

    pub fn dz(&self) -> f64 {
        Self::step(self.downrange, self.n_z)
    }

    /// Linear pixel index, crossrange-major: `ix * n_z + iz`.
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        ix * self.n_z + iz
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.n_z, index % self.n_z)
    }

    pub fn center(&self, ix: usize, iz: usize) -> Point {
        Point::new(
            self.crossrange.0 + ix as f64 * self.dx(),
            self.downrange.0 + iz as f64 * self.dz(),
        )
    }

    /// Nearest pixel to `p`, or `None` when `p` lies more than half a pixel
    /// outside the grid.
    pub fn nearest_pixel(&self, p: Point) -> Option<(usize, usize)> {
        fn axis(v: f64, range: (f64, f64), step: f64, n: usize) -> Option<usize> {
            if n == 1 || step == 0.0 {
                let half = 0.5 * step.max(1e-9);
                return ((v - range.0).abs() <= half.max(1e-9)).then_some(0);
            }
            let pos = (v - range.0) / step;
            if pos < -0.5 - 1e-9 || pos > (n - 1) as f64 + 0.5 + 1e-9 {
                return None;
            }
            Some(pos.round().clamp(0.0, (n - 1) as f64) as usize)
        }
        Some((
            axis(p.x, self.crossrange, self.dx(), self.n_x)?,
            axis(p.z, self.downrange, self.dz(), self.n_z)?,
        ))
    }

    pub fn validate(&self, wall: &WallSpec) -> Result<()> {
        if self.n_pixels() == 0 {
            return Err(Error::input("scene grid must have at least one pixel"));
        }
        if self.schemes.is_empty() {
            return Err(Error::input("scene grid needs at least one multipath scheme"));
        }
        if self.downrange.0 <= wall.back_face() {
            return Err(Error::input(format!(
                "pixel centers must lie behind the wall back face at z = {}",
                wall.back_face()
            )));
        }
        if self.crossrange.1 < self.crossrange.0 || self.downrange.1 < self.downrange.0 {
            return Err(Error::input("grid extents must be increasing"));
        }
        Ok(())
    }
}

/// Refracted path found by [`refraction_path`].
#[derive(Debug, Clone, Copy)]
pub struct RefractionPath {
    /// Two-way delay, seconds.
    pub delay: f64,
    /// Crossrange where the path enters the front face.
    pub entry_x: f64,
    /// Crossrange where the path leaves the back face.
    pub exit_x: f64,
    pub iterations: usize,
}

/// Two-way direct through-wall delay from `tx` to `pixel`.
pub fn refraction_delay(tx: Point, pixel: Point, wall: &WallSpec) -> Result<f64> {
    refraction_path(tx, pixel, wall).map(|p| p.delay)
}

/// One-way path through the slab parameterised by the entry abscissa, with
/// the exit abscissa fixed by Snell's law at the front face.
struct Slab {
    tx: Point,
    pixel: Point,
    n: f64,
    h_front: f64,
    d: f64,
    h_back: f64,
}

impl Slab {
    fn exit_x(&self, entry_x: f64) -> f64 {
        let dx = entry_x - self.tx.x;
        let sin_air = dx / dx.hypot(self.h_front);
        let sin_wall = sin_air / self.n;
        entry_x + self.d * sin_wall / (1.0 - sin_wall * sin_wall).sqrt()
    }

    fn travel_time(&self, entry_x: f64) -> f64 {
        let exit_x = self.exit_x(entry_x);
        let l1 = (entry_x - self.tx.x).hypot(self.h_front);
        let lw = (exit_x - entry_x).hypot(self.d);
        let l2 = (self.pixel.x - exit_x).hypot(self.h_back);
        (l1 + self.n * lw + l2) / SPEED_OF_LIGHT
    }

    /// Sine mismatch at the back face; increasing in the entry abscissa and
    /// zero on the Fermat path.
    fn snell_mismatch(&self, entry_x: f64) -> f64 {
        let exit_x = self.exit_x(entry_x);
        let dx1 = entry_x - self.tx.x;
        let sin_in = dx1 / dx1.hypot(self.h_front);
        let dx2 = self.pixel.x - exit_x;
        let sin_out = dx2 / dx2.hypot(self.h_back);
        sin_in - sin_out
    }
}

/// Fermat path between `tx` and `pixel` across the wall: golden-section
/// search of the travel time over the entry abscissa, then bisection on the
/// Snell mismatch inside the final bracket.
pub fn refraction_path(tx: Point, pixel: Point, wall: &WallSpec) -> Result<RefractionPath> {
    if tx.z >= wall.standoff {
        return Err(Error::input(format!(
            "transceiver at z = {} is not in front of the wall face at z = {}",
            tx.z, wall.standoff
        )));
    }
    let behind = if wall.thickness > 0.0 {
        pixel.z > wall.back_face()
    } else {
        pixel.z >= wall.back_face()
    };
    if !behind {
        return Err(Error::input(format!(
            "pixel at z = {} is not behind the wall back face at z = {}",
            pixel.z,
            wall.back_face()
        )));
    }

    let n = wall.refractive_index();
    if wall.thickness == 0.0 || n == 1.0 {
        let delay = 2.0 * tx.dist(&pixel) / SPEED_OF_LIGHT;
        let t = (wall.standoff - tx.z) / (pixel.z - tx.z);
        let cross = tx.x + t * (pixel.x - tx.x);
        let t_back = (wall.back_face() - tx.z) / (pixel.z - tx.z);
        return Ok(RefractionPath {
            delay,
            entry_x: cross,
            exit_x: tx.x + t_back * (pixel.x - tx.x),
            iterations: 0,
        });
    }

    let slab = Slab {
        tx,
        pixel,
        n,
        h_front: wall.standoff - tx.z,
        d: wall.thickness,
        h_back: pixel.z - wall.back_face(),
    };

    if pixel.x == tx.x {
        return Ok(RefractionPath {
            delay: 2.0 * slab.travel_time(tx.x),
            entry_x: tx.x,
            exit_x: tx.x,
            iterations: 0,
        });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = if tx.x < pixel.x {
        (tx.x, pixel.x)
    } else {
        (pixel.x, tx.x)
    };
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = slab.travel_time(x1);
    let mut f2 = slab.travel_time(x2);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < GOLDEN_MAX_ITERS {
        iterations += 1;
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = slab.travel_time(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = slab.travel_time(x2);
        }
        let fa = slab.travel_time(a);
        let fb = slab.travel_time(b);
        if (fa - fb).abs().max((fa - f1.min(f2)).abs()) < GOLDEN_TIME_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "refraction delay search did not converge after {iterations} iterations \
             (tx = {tx:?}, pixel = {pixel:?}, bracket = [{a}, {b}])"
        )));
    }

    // The golden bracket resolves the time to tolerance but the abscissa only
    // to about sqrt(eps); polish on the monotone Snell mismatch.
    let width = (b - a).max(1e-9);
    let (lo_lim, hi_lim) = if tx.x < pixel.x {
        (tx.x, pixel.x)
    } else {
        (pixel.x, tx.x)
    };
    let mut lo = (a - width).max(lo_lim);
    let mut hi = (b + width).min(hi_lim);
    if slab.snell_mismatch(lo) > 0.0 {
        lo = lo_lim;
    }
    if slab.snell_mismatch(hi) < 0.0 {
        hi = hi_lim;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slab.snell_mismatch(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let entry_x = 0.5 * (lo + hi);
    let delay = 2.0 * slab.travel_time(entry_x);
    if !delay.is_finite() || delay <= 0.0 {
        return Err(Error::numerical(format!(
            "non-finite refraction delay for tx = {tx:?}, pixel = {pixel:?}"
        )));
    }
    Ok(RefractionPath {
        delay,
        entry_x,
        exit_x: slab.exit_x(entry_x),
        iterations,
    })
}

/// Two-way delays of the front-wall reverberations, first return first.
pub fn reverb_delays(wall: &WallSpec) -> Vec<f64> {
    let first = 2.0 * wall.standoff / SPEED_OF_LIGHT;
    (0..wall.reverb_count())
        .map(|k| first + k as f64 * wall.two_way_transit())
        .collect()
}
