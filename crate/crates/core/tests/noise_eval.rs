mod common;

use common::small_scene;
use kronrpca::eval::*;
use kronrpca::montecarlo::*;
use kronrpca::noise::*;
use kronrpca::solvers::{Method, PartitionKind, SolverConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn scenario(noise: NoiseSpec) -> Scenario {
    let sc = small_scene();
    Scenario {
        name: "small".into(),
        y_clean: sc.y,
        dict: sc.dict,
        grid: sc.grid,
        truth: sc.truth.pixels,
        noise: Some(noise),
        radius: 1.0,
    }
}

fn heavy(structure: NoiseStructure) -> NoiseSpec {
    NoiseSpec {
        structure,
        dof: 2.5,
        snr_db: 5.0,
        outliers: OutlierSpec {
            count: 3,
            structure: OutlierStructure::Point,
        },
        seed: 0,
    }
}

fn solvers() -> Vec<SolverEntry> {
    let cfg = SolverConfig {
        outer_iters: 20,
        ..Default::default()
    };
    vec![
        SolverEntry::new(Method::Srcs { wall_rank: 1 }, cfg.clone()),
        SolverEntry::new(Method::Krpca, cfg.clone()),
        SolverEntry::new(Method::HkrpcaSd(PartitionKind::Pointwise), cfg.clone()),
        SolverEntry::new(Method::HkrpcaFd(PartitionKind::Columnwise), cfg),
    ]
}

fn summary_csv(records: &[TrialRecord]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary_csv(&aggregate(records), &path).unwrap();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn monte_carlo_is_independent_of_workers_and_solver_order() {
    let sc = scenario(heavy(NoiseStructure::Pointwise));
    let entries = solvers();
    let one = run_monte_carlo(&sc, &entries, 4, 99, Some(1)).unwrap();
    let two = run_monte_carlo(&sc, &entries, 4, 99, Some(2)).unwrap();
    assert_eq!(summary_csv(&one), summary_csv(&two));
    let key = |r: &TrialRecord| {
        (
            r.trial,
            r.solver.clone(),
            r.seed,
            r.auc.map(f64::to_bits),
            r.map.clone(),
        )
    };
    assert_eq!(
        one.iter().map(key).collect::<Vec<_>>(),
        two.iter().map(key).collect::<Vec<_>>()
    );

    let mut reversed = entries.clone();
    reversed.reverse();
    let rev = run_monte_carlo(&sc, &reversed, 4, 99, Some(1)).unwrap();
    for r in &one {
        let twin = rev.iter().find(|x| x.trial == r.trial && x.solver == r.solver).unwrap();
        assert_eq!(key(r), key(twin));
    }
    assert_eq!(one.len(), 16);
    assert!(one.iter().all(|r| r.seed == trial_seed(99, r.trial)));
}

#[test]
fn single_trial_reproduces_from_seed() {
    let sc = scenario(heavy(NoiseStructure::Columnwise));
    let entries = &solvers()[1..2];
    let a = run_monte_carlo(&sc, entries, 1, 3, None).unwrap();
    assert_eq!(a.len(), 1);
    let y = corrupt(
        &sc.y_clean,
        &NoiseSpec {
            seed: trial_seed(3, 0),
            ..sc.noise.unwrap()
        },
    )
    .unwrap()
    .y;
    let res = entries[0].method.solve(&y, &sc.dict, &entries[0].config).unwrap();
    let map = detection_map(&res.scene_matrix(), &sc.grid).unwrap();
    assert_eq!(a[0].map.as_ref().unwrap(), &map);
}

#[test]
fn achieved_snr_tracks_the_request() {
    let sc = small_scene();
    for structure in [NoiseStructure::Pointwise, NoiseStructure::Columnwise] {
        let snrs: Vec<f64> = (0..40)
            .map(|t| {
                let spec = NoiseSpec {
                    structure,
                    dof: 4.0,
                    snr_db: 10.0,
                    outliers: OutlierSpec::none(),
                    seed: trial_seed(17, t),
                };
                let d = corrupt(&sc.y, &spec).unwrap();
                empirical_snr_db(&sc.y, &d.noise)
            })
            .collect();
        let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
        assert!((mean - 10.0).abs() < 1.0, "{structure:?}: {mean}");
    }
}

#[test]
fn noise_has_zero_mean() {
    let (m, n, draws) = (16, 12, 200);
    let mut total = kronrpca::linalg::c(0.0, 0.0);
    for s in 0..draws {
        let t = sample_complex_t_pointwise(m, n, 4.0, 1.0, s).unwrap();
        total += t.iter().sum::<kronrpca::linalg::C64>();
    }
    let mean = total / (m * n * draws as usize) as f64;
    // E|t|^2 = 4, so the standard error of the mean is 2 / sqrt(count).
    assert!(mean.norm() < 4.0 * 2.0 / ((m * n * draws as usize) as f64).sqrt());
}

#[test]
fn averaging_perfect_and_chance_curves() {
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
    let chance = RocCurve::from_points(vec![
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
    let avg = average_rocs(&[perfect.clone(), chance]).unwrap();
    assert!((avg.auc - 0.75).abs() < 0.01, "{}", avg.auc);
    let same = average_rocs(&[perfect.clone(), perfect.clone()]).unwrap();
    assert!((same.auc - 1.0).abs() < 1e-12);
}

fn map_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(0.0..10.0f64, 36).prop_map(|v| DMatrix::from_vec(6, 6, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roc_is_scale_invariant_and_monotone(values in map_strategy(), alpha in 0.01..100.0f64, rho in 0.0..2.0f64) {
        let truth = [(1, 1), (4, 3)];
        let a = roc_curve(&DetectionMap::new(values.clone()).unwrap(), &truth, rho).unwrap();
        let b = roc_curve(&DetectionMap::new(values * alpha).unwrap(), &truth, rho).unwrap();
        prop_assert_eq!(a.auc, b.auc);
        prop_assert!((0.0..=1.0).contains(&a.auc));
        for w in a.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn f1_agrees_with_the_roc_counts(values in map_strategy(), k in 0usize..36) {
        let truth = [(2, 2)];
        let map = DetectionMap::new(values.clone()).unwrap();
        let tau = values.as_slice()[k];
        let roc = roc_curve(&map, &truth, 0.0).unwrap();
        let point = roc.points.iter().find(|p| p.threshold == Some(tau)).unwrap();
        // One target pixel, rho = 0: tp in {0, 1}, fp = fpr * 35.
        let tp = point.tpr;
        let fp = (point.fpr * 35.0).round();
        let expect = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp) };
        let got = f1_at_threshold(&map, &truth, 0.0, tau).unwrap();
        prop_assert!((got - expect).abs() < 1e-12, "{} vs {}", got, expect);
    }
}

#[test]
fn random_maps_have_chance_auc() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let aucs: Vec<f64> = (0..200)
        .map(|_| {
            let v = DMatrix::from_fn(10, 10, |_, _| rng.random::<f64>());
            roc_curve(&DetectionMap::new(v).unwrap(), &[(5, 5)], 0.0).unwrap().auc
        })
        .collect();
    let mean = aucs.iter().sum::<f64>() / 200.0;
    assert!((mean - 0.5).abs() < 0.05, "{mean}");
}
