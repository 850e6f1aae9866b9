//! Heavy-tailed complex noise, outlier injection and SNR calibration.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, fro_norm, CMatrix, C64};

/// How the chi-square divisor of the t construction is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseStructure {
    /// One divisor per entry: i.i.d. univariate complex t.
    Pointwise,
    /// One divisor per column: columns are i.i.d. multivariate t.
    Columnwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierStructure {
    Point,
    Column,
}

/// `count` standard complex normal outliers on a uniformly drawn support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub count: usize,
    pub structure: OutlierStructure,
}

impl OutlierSpec {
    pub fn none() -> Self {
        Self {
            count: 0,
            structure: OutlierStructure::Point,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub structure: NoiseStructure,
    /// Degrees of freedom `f` of the t distribution; must exceed 2.
    pub dof: f64,
    pub snr_db: f64,
    pub outliers: OutlierSpec,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        check_dof(self.dof)?;
        if !self.snr_db.is_finite() {
            return Err(Error::input(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        Ok(())
    }
}

fn check_dof(f: f64) -> Result<()> {
    if f.is_nan() || f <= 2.0 {
        return Err(Error::input(format!(
            "degrees of freedom must exceed 2 for a finite noise variance, got {f}"
        )));
    }
    Ok(())
}

/// Outlier positions, kept for ground-truth bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutlierSupport {
    /// `(row, col)` pairs.
    Entries(Vec<(usize, usize)>),
    Columns(Vec<usize>),
}

impl OutlierSupport {
    pub fn len(&self) -> usize {
        match self {
            OutlierSupport::Entries(v) => v.len(),
            OutlierSupport::Columns(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scale `sigma` of the complex t noise giving `snr_db` relative to the mean
/// per-entry power of `y_clean`, with the SNR defined on the expected noise
/// power `E|t|^2 = sigma^2 f / (f - 2)`.
pub fn calibrate_sigma_for_snr(y_clean: &CMatrix, f: f64, snr_db: f64) -> Result<f64> {
    check_dof(f)?;
    let power = fro_norm(y_clean).powi(2) / y_clean.len().max(1) as f64;
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::input(
            "clean data must be nonzero and finite to calibrate the SNR",
        ));
    }
    let noise_power = power / 10f64.powf(snr_db / 10.0);
    Ok((noise_power * (f - 2.0) / f).sqrt())
}

/// Expected `E|t|^2` of the complex t variable with scale `sigma`.
pub fn complex_t_power(sigma: f64, f: f64) -> f64 {
    sigma * sigma * f / (f - 2.0)
}

/// The Gaussian numerators and the divisors `sqrt(q / f)` behind a complex t
/// draw: one divisor per entry (column-major) or one per column.
#[derive(Debug, Clone)]
pub struct ComplexTParts {
    pub gaussian: CMatrix,
    pub divisors: Vec<f64>,
    pub structure: NoiseStructure,
}

impl ComplexTParts {
    pub fn assemble(&self) -> CMatrix {
        let rows = self.gaussian.nrows();
        let mut out = self.gaussian.clone();
        for (k, z) in out.iter_mut().enumerate() {
            let d = match self.structure {
                NoiseStructure::Pointwise => self.divisors[k],
                NoiseStructure::Columnwise => self.divisors[k / rows],
            };
            *z /= d;
        }
        out
    }
}

fn complex_normal(rng: &mut ChaCha8Rng, sigma: f64) -> C64 {
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(s * re, s * im)
}

/// Draws the parts of an `m x n` complex t matrix. The Gaussian matrix is
/// drawn first from the seed, the divisors after it, so `gaussian` is the
/// same for both structures.
pub fn sample_complex_t_parts(
    m: usize,
    n: usize,
    f: f64,
    sigma: f64,
    structure: NoiseStructure,
    seed: u64,
) -> Result<ComplexTParts> {
    if f.is_nan() || f <= 0.0 {
        return Err(Error::input(format!("degrees of freedom must be positive, got {f}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::input(format!("noise scale must be nonnegative, got {sigma}")));
    }
    let chi = ChiSquared::new(f).map_err(|e| Error::input(format!("chi-square({f}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = CMatrix::zeros(m, n);
    for z in gaussian.iter_mut() {
        *z = complex_normal(&mut rng, sigma);
    }
    let count = match structure {
        NoiseStructure::Pointwise => m * n,
        NoiseStructure::Columnwise => n,
    };
    let divisors = (0..count).map(|_| (chi.sample(&mut rng) / f).sqrt()).collect();
    Ok(ComplexTParts {
        gaussian,
        divisors,
        structure,
    })
}

/// i.i.d. entries `g / sqrt(q / f)`, `g ~ CN(0, sigma^2)`, `q ~ chi^2_f`.
pub fn sample_complex_t_pointwise(m: usize, n: usize, f: f64, sigma: f64, seed: u64) -> Result<CMatrix> {
    Ok(sample_complex_t_parts(m, n, f, sigma, NoiseStructure::Pointwise, seed)?.assemble())
}

/// Columns `g / sqrt(q / f)` with one chi-square draw `q` per column.
pub fn sample_complex_t_columnwise(m: usize, n: usize, f: f64, sigma: f64, seed: u64) -> Result<CMatrix> {
    Ok(sample_complex_t_parts(m, n, f, sigma, NoiseStructure::Columnwise, seed)?.assemble())
}

/// Adds `CN(0, 1)` outliers on `spec.count` entries or columns drawn
/// uniformly without replacement. Entries off the support are untouched.
pub fn inject_outliers(y: &CMatrix, spec: &OutlierSpec, seed: u64) -> Result<(CMatrix, OutlierSupport)> {
    let (m, n) = y.shape();
    let population = match spec.structure {
        OutlierStructure::Point => m * n,
        OutlierStructure::Column => n,
    };
    if spec.count > population {
        return Err(Error::input(format!(
            "{} outliers requested but only {population} {} available",
            spec.count,
            match spec.structure {
                OutlierStructure::Point => "entries",
                OutlierStructure::Column => "columns",
            }
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, population, spec.count).into_vec();
    picked.sort_unstable();
    let mut out = y.clone();
    let support = match spec.structure {
        OutlierStructure::Point => {
            let entries: Vec<(usize, usize)> = picked.iter().map(|&k| (k % m, k / m)).collect();
            for &(i, j) in &entries {
                out[(i, j)] += complex_normal(&mut rng, 1.0);
            }
            OutlierSupport::Entries(entries)
        }
        OutlierStructure::Column => {
            for &j in &picked {
                for i in 0..m {
                    out[(i, j)] += complex_normal(&mut rng, 1.0);
                }
            }
            OutlierSupport::Columns(picked)
        }
    };
    Ok((out, support))
}

/// splitmix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` derived from `base`; independent of evaluation order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

const NOISE_STREAM: u64 = 0x006e_6f69_7365;
const OUTLIER_STREAM: u64 = 0x006f_7574_6c69_6572;

/// A corrupted data matrix and everything needed to audit it.
#[derive(Debug, Clone)]
pub struct NoisyData {
    pub y: CMatrix,
    pub noise: CMatrix,
    pub sigma: f64,
    pub support: OutlierSupport,
}

/// `Y = Y_clean + T + O` with `T` calibrated to `spec.snr_db` against `y_clean`.
/// A pure function of `(y_clean, spec)`.
pub fn corrupt(y_clean: &CMatrix, spec: &NoiseSpec) -> Result<NoisyData> {
    spec.validate()?;
    let (m, n) = y_clean.shape();
    let sigma = calibrate_sigma_for_snr(y_clean, spec.dof, spec.snr_db)?;
    let noise = sample_complex_t_parts(
        m,
        n,
        spec.dof,
        sigma,
        spec.structure,
        derive_seed(spec.seed, NOISE_STREAM),
    )?
    .assemble();
    let (y, support) = inject_outliers(
        &(y_clean + &noise),
        &spec.outliers,
        derive_seed(spec.seed, OUTLIER_STREAM),
    )?;
    Ok(NoisyData {
        y,
        noise,
        sigma,
        support,
    })
}

/// Realised `10 log10(||Y_clean||^2 / ||T||^2)`.
pub fn empirical_snr_db(y_clean: &CMatrix, noise: &CMatrix) -> f64 {
    10.0 * (fro_norm(y_clean).powi(2) / fro_norm(noise).powi(2)).log10()
}
