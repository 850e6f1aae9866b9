//! Detection maps and ROC / AUC / F1 scoring.
//!
//! A target counts as detected at threshold `tau` when some pixel within
//! `rho` pixels of it (Euclidean distance in grid units) scores `>= tau`.
//! False positives are counted over the pixels outside every target disc.
//! Ties at `tau` count as positive.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::SceneGrid;
use crate::linalg::CMatrix;

/// Default detection disc radius, in pixels.
pub const DEFAULT_RADIUS: f64 = 2.0;

/// Number of FPR abscissae used when averaging curves.
pub const AVERAGE_GRID: usize = 101;

/// Per-pixel scores, `n_x x n_z`, indexed `(ix, iz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    pub values: DMatrix<f64>,
}

impl DetectionMap {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("detection map values must be finite and nonnegative"));
        }
        Ok(Self { values })
    }

    pub fn n_x(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_z(&self) -> usize {
        self.values.ncols()
    }

    /// Pixels sorted by decreasing score (ties by pixel order).
    pub fn ranked_pixels(&self) -> Vec<(usize, usize)> {
        let mut px: Vec<(usize, usize)> = (0..self.n_x())
            .flat_map(|ix| (0..self.n_z()).map(move |iz| (ix, iz)))
            .collect();
        px.sort_by(|a, b| self.values[*b].total_cmp(&self.values[*a]));
        px
    }
}

/// Row l2 norms of the `n_pixels x n_schemes` scene matrix, reshaped to the
/// grid with the crossrange-major pixel order `ix * n_z + iz`.
pub fn detection_map(r: &CMatrix, grid: &SceneGrid) -> Result<DetectionMap> {
    if r.nrows() != grid.n_pixels() {
        return Err(Error::shape(format!(
            "scene matrix has {} rows, grid has {} pixels",
            r.nrows(),
            grid.n_pixels()
        )));
    }
    let values = DMatrix::from_fn(grid.n_x, grid.n_z, |ix, iz| r.row(grid.index(ix, iz)).norm());
    DetectionMap::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// `None` for points of an averaged curve.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// Points ordered by decreasing threshold, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn from_points(points: Vec<RocPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::input("a ROC curve needs at least two points"));
        }
        let auc = auc_of(&points);
        Ok(Self { points, auc })
    }

    /// TPR at `fpr`, interpolating linearly and taking the upper value on
    /// vertical segments.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if fpr < a.fpr || fpr > b.fpr {
                continue;
            }
            let v = if b.fpr == a.fpr {
                a.tpr.max(b.tpr)
            } else {
                a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
            };
            best = best.max(v);
        }
        if best.is_finite() {
            best
        } else {
            self.points.last().map_or(0.0, |p| p.tpr)
        }
    }
}

fn auc_of(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    auc_of(&curve.points)
}

struct DiscSplit {
    /// Best score inside each target disc.
    target_scores: Vec<f64>,
    /// Scores of pixels outside all discs.
    background: Vec<f64>,
    /// Whether each pixel (column-major over `n_x x n_z`) lies in some disc.
    in_disc: Vec<bool>,
}

fn split_by_discs(map: &DetectionMap, truth: &[(usize, usize)], rho: f64) -> Result<DiscSplit> {
    if truth.is_empty() {
        return Err(Error::input("ROC needs at least one target (TPR undefined)"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::input(format!("disc radius must be nonnegative, got {rho}")));
    }
    let (nx, nz) = (map.n_x(), map.n_z());
    for &(ix, iz) in truth {
        if ix >= nx || iz >= nz {
            return Err(Error::input(format!("target pixel ({ix}, {iz}) outside {nx}x{nz} map")));
        }
    }
    let mut target_scores = vec![f64::NEG_INFINITY; truth.len()];
    let mut background = Vec::new();
    let mut in_disc = vec![false; nx * nz];
    for iz in 0..nz {
        for ix in 0..nx {
            let v = map.values[(ix, iz)];
            let mut inside = false;
            for (t, &(tx, tz)) in truth.iter().enumerate() {
                let d = (ix as f64 - tx as f64).hypot(iz as f64 - tz as f64);
                if d <= rho + 1e-12 {
                    inside = true;
                    target_scores[t] = target_scores[t].max(v);
                }
            }
            in_disc[ix + iz * nx] = inside;
            if !inside {
                background.push(v);
            }
        }
    }
    if background.is_empty() {
        return Err(Error::input("every pixel lies within a target disc; FPR undefined"));
    }
    Ok(DiscSplit {
        target_scores,
        background,
        in_disc,
    })
}

fn count_at_least(sorted_desc: &[f64], tau: f64) -> usize {
    sorted_desc.partition_point(|&v| v >= tau)
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

/// ROC swept over every distinct map value plus a `+inf` sentinel giving `(0, 0)`.
pub fn roc_curve(map: &DetectionMap, truth: &[(usize, usize)], rho: f64) -> Result<RocCurve> {
    let mut split = split_by_discs(map, truth, rho)?;
    sort_desc(&mut split.target_scores);
    sort_desc(&mut split.background);
    let mut thresholds: Vec<f64> = map.values.iter().copied().collect();
    sort_desc(&mut thresholds);
    thresholds.dedup();
    let n_t = split.target_scores.len() as f64;
    let n_b = split.background.len() as f64;
    let mut points = vec![RocPoint {
        threshold: Some(f64::INFINITY),
        fpr: 0.0,
        tpr: 0.0,
    }];
    for tau in thresholds {
        points.push(RocPoint {
            threshold: Some(tau),
            fpr: count_at_least(&split.background, tau) as f64 / n_b,
            tpr: count_at_least(&split.target_scores, tau) as f64 / n_t,
        });
    }
    RocCurve::from_points(points)
}

/// Vertical average of the curves on a uniform grid of [`AVERAGE_GRID`] FPR
/// values, preceded by the `(0, 0)` point.
pub fn average_rocs(curves: &[RocCurve]) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::input("cannot average an empty list of ROC curves"));
    }
    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    for k in 0..AVERAGE_GRID {
        let x = k as f64 / (AVERAGE_GRID - 1) as f64;
        let tpr = curves.iter().map(|c| c.tpr_at(x)).sum::<f64>() / curves.len() as f64;
        points.push(RocPoint {
            threshold: None,
            fpr: x,
            tpr,
        });
    }
    RocCurve::from_points(points)
}

/// F1 score at threshold `tau` under the disc rule: precision is the share of
/// pixels scoring `>= tau` that fall inside some disc, recall is the TPR.
pub fn f1_at_threshold(map: &DetectionMap, truth: &[(usize, usize)], rho: f64, tau: f64) -> Result<f64> {
    let split = split_by_discs(map, truth, rho)?;
    let mut predicted = 0usize;
    let mut hits = 0usize;
    for (k, &v) in map.values.iter().enumerate() {
        if v >= tau {
            predicted += 1;
            if split.in_disc[k] {
                hits += 1;
            }
        }
    }
    let recall = split.target_scores.iter().filter(|&&s| s >= tau).count() as f64 / truth.len() as f64;
    let precision = if predicted == 0 {
        0.0
    } else {
        hits as f64 / predicted as f64
    };
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// `ix,iz,value` rows.
pub fn write_map_csv(map: &DetectionMap, path: &Path) -> Result<()> {
    let mut out = String::from("ix,iz,value\n");
    for ix in 0..map.n_x() {
        for iz in 0..map.n_z() {
            out.push_str(&format!("{ix},{iz},{:e}\n", map.values[(ix, iz)]));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Normalisation constants of a PGM export: `value = min + pixel / 65535 * (max - min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
    /// Image columns run along crossrange, rows along downrange.
    pub layout: &'static str,
}

/// 16-bit binary PGM, min-max normalised, plus a JSON sidecar at
/// `path.with_extension("json")`.
pub fn write_map_pgm(map: &DetectionMap, path: &Path) -> Result<PgmSidecar> {
    let min = map.values.min();
    let max = map.values.max();
    let span = max - min;
    let (w, h) = (map.n_x(), map.n_z());
    let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for iz in 0..h {
        for ix in 0..w {
            let v = if span > 0.0 {
                ((map.values[(ix, iz)] - min) / span * 65535.0).round() as u16
            } else {
                0
            };
            bytes.extend_from_slice(&v.to_be_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    let sidecar = PgmSidecar {
        min,
        max,
        width: w,
        height: h,
        layout: "x=crossrange,y=downrange",
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path.with_extension("json"), json + "\n")?;
    Ok(sidecar)
}

/// `threshold,fpr,tpr` rows; averaged points leave the threshold empty.
pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "threshold,fpr,tpr")?;
    for p in &curve.points {
        let t = p.threshold.map(|t| format!("{t:e}")).unwrap_or_default();
        writeln!(f, "{t},{},{}", p.fpr, p.tpr)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::MultipathScheme;
    use crate::linalg::c;

    fn grid(nx: usize, nz: usize, schemes: usize) -> SceneGrid {
        SceneGrid {
            n_x: nx,
            n_z: nz,
            crossrange: (0.0, 1.0),
            downrange: (1.0, 2.0),
            schemes: vec![MultipathScheme::Direct; schemes],
        }
    }

    fn map_from(nx: usize, nz: usize, f: impl FnMut(usize, usize) -> f64) -> DetectionMap {
        DetectionMap::new(DMatrix::from_fn(nx, nz, f)).unwrap()
    }

    #[test]
    fn detection_map_values() {
        let g = grid(3, 4, 1);
        let zero = detection_map(&CMatrix::zeros(12, 1), &g).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));

        let mut r = CMatrix::zeros(12, 1);
        r[(g.index(2, 1), 0)] = c(3.0, 4.0);
        let m = detection_map(&r, &g).unwrap();
        assert_eq!(m.values[(2, 1)], 5.0);
        assert_eq!(m.values.iter().filter(|&&v| v > 0.0).count(), 1);

        let g2 = grid(3, 4, 2);
        let mut r = CMatrix::zeros(12, 2);
        r[(5, 0)] = c(1.0, 0.0);
        r[(5, 1)] = c(1.0, 0.0);
        let m = detection_map(&r, &g2).unwrap();
        let (ix, iz) = g2.coords(5);
        assert!((m.values[(ix, iz)] - 2f64.sqrt()).abs() < 1e-15);

        assert!(detection_map(&CMatrix::zeros(11, 1), &g).is_err());
    }

    #[test]
    fn indicator_and_constant_maps() {
        let ind = map_from(10, 10, |ix, iz| if (ix, iz) == (4, 6) { 1.0 } else { 0.0 });
        let roc = roc_curve(&ind, &[(4, 6)], 0.0).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc_curve(&ind, &[(4, 6)], 2.0).unwrap().auc, 1.0);
        for tau in [0.01, 0.5, 0.99] {
            assert_eq!(f1_at_threshold(&ind, &[(4, 6)], 0.0, tau).unwrap(), 1.0);
        }
        let flat = map_from(10, 10, |_, _| 0.3);
        let roc = roc_curve(&flat, &[(4, 6)], 2.0).unwrap();
        assert_eq!(roc.auc, 0.5);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr, last.fpr, last.tpr), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn trapezoid_examples() {
        let pts = |v: &[(f64, f64)]| {
            RocCurve::from_points(
                v.iter()
                    .map(|&(fpr, tpr)| RocPoint {
                        threshold: None,
                        fpr,
                        tpr,
                    })
                    .collect(),
            )
            .unwrap()
        };
        assert_eq!(auc(&pts(&[(0.0, 0.0), (1.0, 1.0)])), 0.5);
        assert_eq!(auc(&pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)])), 1.0);
        assert_eq!(auc(&pts(&[(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)])), 0.75);
    }

    #[test]
    fn averaging() {
        let perfect = RocCurve::from_points(vec![
            RocPoint {
                threshold: None,
                fpr: 0.0,
                tpr: 0.0,
            },
            RocPoint {
                threshold: None,
                fpr: 0.0,
                tpr: 1.0,
            },
            RocPoint {
                threshold: None,
                fpr: 1.0,
                tpr: 1.0,
            },
        ])
        .unwrap();
        let diag = RocCurve::from_points(vec![
            RocPoint {
                threshold: None,
                fpr: 0.0,
                tpr: 0.0,
            },
            RocPoint {
                threshold: None,
                fpr: 1.0,
                tpr: 1.0,
            },
        ])
        .unwrap();
        let avg = average_rocs(&[perfect.clone(), diag.clone()]).unwrap();
        assert!((avg.auc - 0.75).abs() < 0.01);
        let self_avg = average_rocs(&[diag.clone(), diag.clone()]).unwrap();
        assert!((self_avg.auc - 0.5).abs() < 1e-12);
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((self_avg.tpr_at(x) - x).abs() < 1e-12);
        }
        assert!(average_rocs(&[]).is_err());
    }

    #[test]
    fn roc_errors() {
        let m = map_from(3, 3, |_, _| 1.0);
        assert!(roc_curve(&m, &[], 1.0).is_err());
        assert!(roc_curve(&m, &[(3, 0)], 1.0).is_err());
        assert!(roc_curve(&m, &[(1, 1)], 5.0).is_err());
        assert!(DetectionMap::new(DMatrix::from_element(2, 2, -1.0)).is_err());
    }

    #[test]
    fn random_maps_average_half() {
        use rand::{Rng, SeedableRng};
        let mut total = 0.0;
        for seed in 0..200 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = map_from(16, 16, |_, _| rng.random::<f64>());
            total += roc_curve(&m, &[(7, 9)], 0.0).unwrap().auc;
        }
        let mean = total / 200.0;
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn f1_partial() {
        // Two pixels predicted at tau = 0.5, one of them in the disc.
        let m = map_from(5, 5, |ix, iz| match (ix, iz) {
            (1, 1) => 1.0,
            (4, 4) => 0.8,
            _ => 0.0,
        });
        let f1 = f1_at_threshold(&m, &[(1, 1)], 0.0, 0.5).unwrap();
        assert!((f1 - 2.0 * 0.5 / 1.5).abs() < 1e-12);
        assert_eq!(f1_at_threshold(&m, &[(1, 1)], 0.0, 2.0).unwrap(), 0.0);
    }
}
