//! Helpers shared by the integration tests: brute-force minimisers used as
//! oracles, random instances, and a small synthetic scene.
#![allow(dead_code)]

use kronrpca::forward::*;
use kronrpca::linalg::{c, CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(m, n, |_, _| {
        c(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVector {
    random_matrix(rng, n, 1, scale).column(0).into_owned()
}

/// Dictionary with uniformly random unit-modulus entries.
pub fn random_phase_dictionary(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> Dictionary {
    let tall = CMatrix::from_fn(m * n, d, |_, _| {
        C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    });
    Dictionary::from_tall(tall, m, n, d, 1).unwrap()
}

/// Minimises a convex function of one variable on `[lo, hi]`: a dense grid,
/// then repeated zooming onto the best grid cell.
pub fn argmin_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let n = 2001;
    let mut best = lo;
    for _ in 0..40 {
        let h = (hi - lo) / (n - 1) as f64;
        let mut best_v = f64::INFINITY;
        for i in 0..n {
            let x = lo + h * i as f64;
            let v = f(x);
            if v < best_v {
                best_v = v;
                best = x;
            }
        }
        lo = best - 2.0 * h;
        hi = best + 2.0 * h;
        if h < 1e-14 * (1.0 + best.abs()) {
            break;
        }
    }
    best
}

/// Two-dimensional counterpart of [`argmin_1d`] on a square box. The origin
/// is a candidate in every round: the penalties tested here are kinked there,
/// and a nearly flat cone can hide the kink from a coarse grid.
pub fn argmin_2d(f: impl Fn(f64, f64) -> f64, center: (f64, f64), half_width: f64) -> (f64, f64) {
    let n = 101;
    let mut center = center;
    let mut w = half_width;
    for _ in 0..60 {
        let h = 2.0 * w / (n - 1) as f64;
        let mut best = (f(0.0, 0.0), (0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let p = (center.0 - w + h * i as f64, center.1 - w + h * j as f64);
                let v = f(p.0, p.1);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
        center = best.1;
        w = 2.0 * h;
        if h < 1e-14 {
            break;
        }
    }
    center
}

pub struct Scene {
    pub grid: SceneGrid,
    pub radar: RadarConfig,
    pub wall_spec: WallSpec,
    pub dict: Dictionary,
    pub wall: CMatrix,
    pub truth: SceneTruth,
    pub y: CMatrix,
}

/// 8x8 scene behind a 20 cm wall, 12 positions, 16 frequencies, two targets.
pub fn small_scene() -> Scene {
    let grid = SceneGrid {
        n_x: 8,
        n_z: 8,
        crossrange: (1.5, 3.5),
        downrange: (2.2, 3.9),
        schemes: vec![MultipathScheme::Direct],
    };
    let radar = RadarConfig::with_band_hz(12, 1.4, 0.2, 16, 1e9, 3e9);
    let wall_spec = WallSpec::with_default_reverbs(0.2, 4.5, 1.2, 3);
    let dict = build_dictionary(&grid, &radar, &wall_spec).unwrap();
    let wall = synthesize_wall_returns(&wall_spec, &radar, 0.0, 0);
    let targets = TargetSpec {
        targets: [(2, 6), (5, 2)]
            .iter()
            .map(|&(ix, iz)| {
                let p = grid.center(ix, iz);
                Target::unit(p.x, p.z)
            })
            .collect(),
    };
    let truth = synthesize_scene(&targets, &grid, &dict).unwrap();
    let y = &wall + &truth.y_targets;
    Scene {
        grid,
        radar,
        wall_spec,
        dict,
        wall,
        truth,
        y,
    }
}

pub fn dense_lambda_max(dict: &Dictionary) -> f64 {
    dict.tall()
        .ad_mul(dict.tall())
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::MIN, f64::max)
}

pub fn partition_of(kind: usize, m: usize, n: usize) -> kronrpca::solvers::Partition {
    use kronrpca::solvers::Partition;
    match kind % 3 {
        0 => Partition::pointwise(m, n),
        1 => Partition::columnwise(m, n),
        _ => {
            // 2x2 tiles (ragged at the edges)
            let mut blocks = std::collections::BTreeMap::new();
            for j in 0..n {
                for i in 0..m {
                    blocks.entry((i / 2, j / 2)).or_insert_with(Vec::new).push((i, j));
                }
            }
            Partition::custom(m, n, &blocks.into_values().collect::<Vec<_>>()).unwrap()
        }
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Relative error between `huber_residual_gradient` and central differences
/// of `sum_i H_c(||[Y - L - Psi r]_{p_i}||)` over the real and imaginary
/// parts of r.
pub fn gradient_check(seed: u64, m: usize, n: usize, d: usize, kind: usize) -> f64 {
    use kronrpca::solvers::{huber_loss, huber_residual_gradient};
    let mut g = rng(seed);
    let dict = random_phase_dictionary(&mut g, m, n, d);
    let data = random_matrix(&mut g, m, n, 1.0);
    let r = random_vector(&mut g, d, 0.3);
    let part = partition_of(kind, m, n);
    let resid = |r: &CVector| &data - dict.apply(r).unwrap();
    let c_thr = median(part.block_norms(&resid(&r)));
    let f = |r: &CVector| huber_loss(&resid(r), &part, c_thr);
    let grad = huber_residual_gradient(&resid(&r), &dict, &part, c_thr).unwrap();
    let h = 1e-6;
    let mut fd = CVector::zeros(d);
    for k in 0..d {
        let mut parts = [0.0; 2];
        for (slot, dir) in [c(1.0, 0.0), c(0.0, 1.0)].into_iter().enumerate() {
            let (mut plus, mut minus) = (r.clone(), r.clone());
            plus[k] += dir * h;
            minus[k] -= dir * h;
            parts[slot] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        fd[k] = c(parts[0], parts[1]);
    }
    (&fd - &grad).norm() / grad.norm()
}

pub struct MmCheck {
    /// Largest `F(r) - Q(r | r_t)` over the probes (should be <= 0).
    pub majorizer_violation: f64,
    /// Gap between majorizer and objective at the anchor.
    pub anchor_gap: f64,
    /// Largest increase of the MM objective across inner steps.
    pub max_increase: f64,
    /// Largest relative residual of the weighted normal equations.
    pub normal_residual: f64,
    /// Largest `Q(r_mm) - Q(probe)` (should be <= 0).
    pub minimiser_violation: f64,
}

/// Random full-split inner problem checked against independently written
/// majorizer and normal equations.
pub fn mm_check(seed: u64, kind: usize) -> MmCheck {
    use kronrpca::prox::huber_majorizer;
    use kronrpca::solvers::{HkrpcaFd, SolverConfig};
    let (m, n, d) = (8, 4, 12);
    let mut g = rng(seed);
    let dict = random_phase_dictionary(&mut g, m, n, d);
    let y = random_matrix(&mut g, m, n, 1.0);
    let l = random_matrix(&mut g, m, n, 0.2);
    let s = random_vector(&mut g, d, 0.3);
    let v = random_vector(&mut g, d, 0.3);
    let mut r_t = random_vector(&mut g, d, 0.3);
    let eta: f64 = g.random_range(0.5..5.0);
    let part = partition_of(kind, m, n);
    let c_thr = median(part.block_norms(&(&y - &l - dict.apply(&r_t).unwrap())));
    let cfg = SolverConfig {
        mu: 10.0,
        huber_c: c_thr,
        ..Default::default()
    };
    let fd = HkrpcaFd::new(&y, &dict, &part, &cfg).unwrap();
    let norms = |r: &CVector| part.block_norms(&(&y - &l - dict.apply(r).unwrap()));
    let prox_term = |r: &CVector| 0.5 * eta * (r - &s - &v / c(eta, 0.0)).norm_squared();
    let anchor_norms = norms(&r_t);
    let q = |r: &CVector| {
        let e = norms(r);
        0.5 * cfg.mu
            * e.iter()
                .zip(&anchor_norms)
                .map(|(&x, &xt)| huber_majorizer(x, xt, c_thr))
                .sum::<f64>()
            + prox_term(r)
    };
    let f = |r: &CVector| fd.mm_objective(&l, r, &s, &v, eta).unwrap();

    let step = fd.mm_step(&l, &r_t, &s, &v, eta).unwrap();
    let mut out = MmCheck {
        majorizer_violation: f64::MIN,
        anchor_gap: (q(&r_t) - f(&r_t)).abs(),
        max_increase: f64::MIN,
        normal_residual: 0.0,
        minimiser_violation: f64::MIN,
    };
    let q_mm = q(&step.r);
    for _ in 0..100 {
        let probe = &r_t + random_vector(&mut g, d, 1.0);
        out.majorizer_violation = out.majorizer_violation.max(f(&probe) - q(&probe));
        out.minimiser_violation = out.minimiser_violation.max(q_mm - q(&probe));
    }

    let mut prev = f(&r_t);
    for _ in 0..10 {
        let step = fd.mm_step(&l, &r_t, &s, &v, eta).unwrap();
        // (mu/2) Psi_A^H W^2 (Psi_A r - vec(Y - L)) + eta (r - s) - v = 0
        let w2: Vec<f64> = {
            let block_w: Vec<f64> = norms(&r_t)
                .iter()
                .map(|&e| if e <= c_thr { 1.0 } else { c_thr / e })
                .collect();
            part.assignment().iter().map(|&b| block_w[b]).collect()
        };
        let mut fit = dict.apply(&step.r).unwrap() - (&y - &l);
        for (z, &w) in fit.iter_mut().zip(&w2) {
            *z *= w;
        }
        let resid = dict.adjoint(&fit).unwrap() * c(0.5 * cfg.mu, 0.0) + (&step.r - &s) * c(eta, 0.0) - &v;
        let scale = (&s * c(eta, 0.0) + &v).norm() + 0.5 * cfg.mu * dict.adjoint(&(&y - &l)).unwrap().norm();
        out.normal_residual = out.normal_residual.max(resid.norm() / scale);
        let next = f(&step.r);
        out.max_increase = out.max_increase.max((next - prev) / prev.abs().max(1.0));
        prev = next;
        r_t = step.r;
    }
    out
}

pub struct QuadraticLimitCheck {
    /// Max over (L, r, M, U) of the componentwise relative difference between
    /// one semi-split iteration at huge `c` and the quadratic reference.
    pub iteration_error: f64,
    /// Same for the semi-split r-update against the KRPCA r-update.
    pub krpca_r_error: f64,
}

fn rel_max(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

pub fn quadratic_limit_check(seed: u64) -> QuadraticLimitCheck {
    use kronrpca::prox::{row_threshold, svt};
    use kronrpca::solvers::{Diagnostics, HkrpcaSd, HkrpcaSdState, Krpca, Partition, SolverConfig};
    let (m, n, d) = (8, 6, 10);
    let mut g = rng(seed);
    let dict = random_phase_dictionary(&mut g, m, n, d);
    let y = random_matrix(&mut g, m, n, 1.0);
    let (mu, nu, lambda) = (3.0, 1.5, 0.4);
    let step = 1.0 / (0.5 * mu * dense_lambda_max(&dict));
    let cfg = SolverConfig {
        lambda,
        mu,
        nu,
        huber_c: 1e9,
        pgd_step: Some(step),
        ..Default::default()
    };
    let part = Partition::pointwise(m, n);
    let sd = HkrpcaSd::new(&y, &dict, &part, &cfg).unwrap();
    let start = HkrpcaSdState {
        l: random_matrix(&mut g, m, n, 0.5),
        r: random_vector(&mut g, d, 0.3),
        m: random_matrix(&mut g, m, n, 0.5),
        u: random_matrix(&mut g, m, n, 0.5),
        step,
    };
    let mut state = start.clone();
    sd.step(&mut state, &mut Diagnostics::default()).unwrap();

    // Quadratic semi-split: mu/4 ||Y - L - Psi r||^2 + nu/2 ||M - L + U/nu||^2.
    let half_mu = 0.5 * mu;
    let base = &y - dict.apply(&start.r).unwrap();
    let l = (&base * c(half_mu, 0.0) + &start.m * c(nu, 0.0) + &start.u) / c(half_mu + nu, 0.0);
    let grad = dict.adjoint(&(dict.apply(&start.r).unwrap() - (&y - &l))).unwrap() * c(half_mu, 0.0);
    let moved = &start.r - grad * c(step, 0.0);
    let r = row_threshold(&dict.scene_matrix(&moved), lambda * step)
        .column(0)
        .into_owned();
    let m_split = svt(&(&l - &start.u / c(nu, 0.0)), 1.0 / nu).unwrap();
    let u = &start.u + (&m_split - &l) * c(nu, 0.0);

    let iteration_error = [
        rel_max(&state.l, &l),
        rel_max(
            &CMatrix::from_column_slice(d, 1, state.r.as_slice()),
            &CMatrix::from_column_slice(d, 1, r.as_slice()),
        ),
        rel_max(&state.m, &m_split),
        rel_max(&state.u, &u),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let kcfg = SolverConfig {
        mu: half_mu,
        ..cfg.clone()
    };
    let k = Krpca::new(&y, &dict, &kcfg).unwrap();
    let zero_u = CMatrix::zeros(m, n);
    let r_k = k.r_update(&start.l, &start.r, &zero_u).unwrap();
    let mut s = step;
    let (r_sd, _) = sd.r_update(&start.l, &start.r, &mut s).unwrap();
    let krpca_r_error = rel_max(
        &CMatrix::from_column_slice(d, 1, r_sd.as_slice()),
        &CMatrix::from_column_slice(d, 1, r_k.as_slice()),
    );
    QuadraticLimitCheck {
        iteration_error,
        krpca_r_error,
    }
}
