mod common;

use common::gbm_oracle;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wflab::gbm::{fit_gbm, permutation_importance, GbmConfig, Node};

fn small_instance() -> impl Strategy<Value = (Array2<f64>, Vec<u8>)> {
    (12usize..40, 1usize..4).prop_flat_map(|(n, p)| {
        (prop::collection::vec(0u8..6, n * p), prop::collection::vec(0u8..2, n)).prop_filter_map(
            "needs both classes",
            move |(xs, y)| {
                let pos = y.iter().filter(|v| **v == 1).count();
                (pos > 0 && pos < n).then(|| {
                    (Array2::from_shape_vec((n, p), xs.into_iter().map(f64::from).collect()).unwrap(), y)
                })
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn splits_and_leaves_match_exhaustive_search((x, y) in small_instance(), leaves in 2usize..6, min_leaf in 1usize..5) {
        let cfg = GbmConfig {
            max_leaf_nodes: leaves,
            min_samples_leaf: min_leaf,
            learning_rate: 0.3,
            max_iter: 4,
            l2_regularization: 1.0,
            ..GbmConfig::default()
        };
        prop_assume!(y.len() >= 2 * min_leaf);
        let model = fit_gbm(x.view(), &y, &cfg).unwrap();
        let (init, trees) = gbm_oracle::boost(x.view(), &y, &cfg);
        prop_assert_eq!(model.initial_log_odds.to_bits(), init.to_bits());
        prop_assert_eq!(model.trees.len(), trees.len());
        for (k, (a, b)) in model.trees.iter().zip(&trees).enumerate() {
            if let Err(e) = gbm_oracle::same_tree(a, 0, b) {
                return Err(TestCaseError::fail(format!("tree {k}: {e}")));
            }
        }
    }

    #[test]
    fn training_loss_never_increases((x, y) in small_instance(), lr in 0.01f64..2.0) {
        let cfg = GbmConfig { learning_rate: lr, min_samples_leaf: 2, max_iter: 30, ..GbmConfig::default() };
        let m = fit_gbm(x.view(), &y, &cfg).unwrap();
        let mut prev = m.initial_loss;
        for l in &m.loss_trace {
            prop_assert!(*l <= prev + 1e-9);
            prev = *l;
        }
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval((x, y) in small_instance(), probe in prop::collection::vec(-1e6f64..1e6, 3)) {
        let cfg = GbmConfig { learning_rate: 1.0, min_samples_leaf: 1, max_iter: 50, ..GbmConfig::default() };
        let m = fit_gbm(x.view(), &y, &cfg).unwrap();
        let row = Array2::from_shape_fn((1, x.ncols()), |(_, j)| probe[j % 3]);
        for p in m.predict_proba(row.view()).unwrap().into_iter().chain(m.predict_proba(x.view()).unwrap()) {
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}

fn separable(n_per_class: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<u8>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n_per_class {
        xs.push(-rng.gen_range(0.01..3.0));
        ys.push(0);
        xs.push(rng.gen_range(0.01..3.0));
        ys.push(1);
    }
    (Array2::from_shape_vec((xs.len(), 1), xs).unwrap(), ys)
}

fn accuracy(p: &[f64], y: &[u8]) -> f64 {
    p.iter().zip(y).filter(|(p, y)| (**p >= 0.5) == (**y == 1)).count() as f64 / y.len() as f64
}

#[test]
fn separable_one_dimensional_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (x, y) = separable(1000, &mut rng);
    let m = fit_gbm(x.view(), &y, &GbmConfig::default()).unwrap();
    match &m.trees[0].nodes[0] {
        Node::Split { threshold, .. } => assert!(threshold.abs() < 0.05, "first split at {threshold}"),
        n => panic!("first tree did not split: {n:?}"),
    }
    let (xt, yt) = separable(1000, &mut rng);
    assert!(accuracy(&m.predict_proba(xt.view()).unwrap(), &yt) >= 0.99);

    let sweep = Array2::from_shape_fn((601, 1), |(i, _)| -3.0 + i as f64 * 0.01);
    let p = m.predict_proba(sweep.view()).unwrap();
    assert!(p.windows(2).all(|w| w[1] >= w[0]), "probability not monotone in x");
}

#[test]
fn pure_noise_stays_at_base_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut draw = |n: usize| {
        let x = Array2::from_shape_fn((n, 5), |_| rng.gen::<f64>());
        let y: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.5) as u8).collect();
        (x, y)
    };
    let (x, y) = draw(2000);
    let (xt, yt) = draw(2000);
    let m = fit_gbm(x.view(), &y, &GbmConfig::default()).unwrap();
    let acc = accuracy(&m.predict_proba(xt.view()).unwrap(), &yt);
    let rate = yt.iter().map(|v| *v as f64).sum::<f64>() / yt.len() as f64;
    let majority = rate.max(1.0 - rate);
    assert!((acc - majority).abs() <= 0.03, "accuracy {acc}, base rate {majority}");
}

#[test]
fn constant_features_predict_base_rate() {
    let x = Array2::from_elem((200, 3), 4.2);
    let y: Vec<u8> = (0..200).map(|i| (i % 4 == 0) as u8).collect();
    let m = fit_gbm(x.view(), &y, &GbmConfig::default()).unwrap();
    for p in m.predict_proba(x.view()).unwrap() {
        assert!((p - 0.25).abs() < 1e-12);
    }
    assert!(m.trees.iter().all(|t| t.n_leaves() == 1));
}

#[test]
fn fit_is_deterministic_and_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let x = Array2::from_shape_fn((500, 4), |_| rng.gen::<f64>());
    let y: Vec<u8> = (0..500).map(|i| ((x[[i, 0]] + 0.3 * rng.gen::<f64>()) > 0.6) as u8).collect();
    let cfg = GbmConfig::default();
    let a = fit_gbm(x.view(), &y, &cfg).unwrap();
    let b = fit_gbm(x.view(), &y, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let back = wflab::gbm::GbmModel::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(a.predict_proba(x.view()).unwrap(), back.predict_proba(x.view()).unwrap());
}

#[test]
fn signal_feature_ranks_first_in_importance() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let n = 1000;
    let x = Array2::from_shape_fn((n, 2), |_| rng.gen::<f64>() * 2.0 - 1.0);
    let y: Vec<u8> = (0..n).map(|i| (x[[i, 0]] + 0.2 * (rng.gen::<f64>() - 0.5) > 0.0) as u8).collect();
    let m = fit_gbm(x.view(), &y, &GbmConfig::default()).unwrap();
    let imp = permutation_importance(&m, x.view(), &y, 20, 1).unwrap();
    assert!(imp[0] > 0.3 && imp[0] > 5.0 * imp[1].abs(), "{imp:?}");
    assert!(permutation_importance(&m, x.view(), &y, 0, 1).is_err());
}
