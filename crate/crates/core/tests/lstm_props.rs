use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wflab::evaluation::classification_metrics;
use wflab::lstm::{dropout_mask, fit_lstm, gradient_check, LstmConfig, LstmModel};

const LEN: usize = 12;

fn gaussian_batch(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, LEN), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Sequences whose sum clears `margin` standard deviations of the sum;
/// label is the sign of the sum.
fn planted(n: usize, margin: f64, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<u8>) {
    let sd_sum = (LEN as f64).sqrt() * 0.002;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    while y.len() < n {
        let r: Vec<f64> = (0..LEN).map(|_| 0.002 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s: f64 = r.iter().sum();
        if s.abs() >= margin * sd_sum {
            y.push((s > 0.0) as u8);
            rows.extend(r);
        }
    }
    (Array2::from_shape_vec((n, LEN), rows).unwrap(), y)
}

fn split(x: &Array2<f64>, y: &[u8], n_train: usize) -> (Array2<f64>, Vec<u8>, Array2<f64>, Vec<u8>) {
    (
        x.slice(ndarray::s![..n_train, ..]).to_owned(),
        y[..n_train].to_vec(),
        x.slice(ndarray::s![n_train.., ..]).to_owned(),
        y[n_train..].to_vec(),
    )
}

#[test]
fn bptt_matches_finite_differences_on_ten_batches() {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = gaussian_batch(8, &mut rng, 1.0);
        let y: Vec<u8> = (0..8).map(|_| rng.gen_bool(0.5) as u8).collect();
        let cfg = LstmConfig { seed, ..LstmConfig::default() };
        worst = worst.max(gradient_check(&cfg, x.view(), &y, 1e-3).unwrap());
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn zero_inputs_and_coarse_epsilon() {
    let x = Array2::zeros((8, LEN));
    let y = vec![0, 1, 0, 1, 1, 0, 0, 1];
    let cfg = LstmConfig::default();
    let fine = gradient_check(&cfg, x.view(), &y, 1e-3).unwrap();
    assert!(fine < 1e-4, "{fine}");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = gaussian_batch(8, &mut rng, 1.0);
    let a = gradient_check(&cfg, x.view(), &y, 1e-3).unwrap();
    let coarse = gradient_check(&cfg, x.view(), &y, 0.1).unwrap();
    let tiny = gradient_check(&cfg, x.view(), &y, 1e-7).unwrap();
    assert!(coarse.is_finite() && coarse > a, "eps 0.1: {coarse}, eps 1e-3: {a}");
    assert!(tiny.is_finite() && tiny > a, "eps 1e-7: {tiny}, eps 1e-3: {a}");
}

#[test]
fn dropout_keeps_expected_fraction_and_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = dropout_mask(&mut rng, 100_000, 0.3);
    let kept = m.iter().filter(|v| **v > 0.0).count() as f64 / m.len() as f64;
    assert!((kept - 0.7).abs() < 0.02 * 0.7, "{kept}");
    assert!(m.iter().all(|v| *v == 0.0 || (*v - 1.0 / 0.7).abs() < 1e-15));
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    assert!((mean - 1.0).abs() < 0.02);
}

#[test]
fn learns_planted_sum_sign_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (x, y) = planted(2000, 0.5, &mut rng);
    let (xtr, ytr, xte, yte) = split(&x, &y, 1600);
    let m = fit_lstm(xtr.view(), &ytr, &LstmConfig { seed: 1, ..LstmConfig::default() }).unwrap();
    let p = m.predict_proba(xte.view()).unwrap();
    let acc = classification_metrics(&p, &yte, 0.5).unwrap().accuracy;
    assert!(acc >= 0.90, "held-out accuracy {acc}");

    // sweep the sum across two sd of its training distribution
    let sweep = Array2::from_shape_fn((41, LEN), |(i, _)| (i as f64 - 20.0) * 0.00004);
    let ps = m.predict_proba(sweep.view()).unwrap();
    assert!(ps.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{ps:?}");
    assert!(ps[40] - ps[0] > 0.5);
}

#[test]
fn null_labels_give_flat_uninformative_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = gaussian_batch(2000, &mut rng, 0.002);
    let y: Vec<u8> = (0..2000).map(|_| rng.gen_bool(0.5) as u8).collect();
    let (xtr, ytr, xte, yte) = split(&x, &y, 1600);
    let m = fit_lstm(xtr.view(), &ytr, &LstmConfig { seed: 2, ..LstmConfig::default() }).unwrap();
    let p = m.predict_proba(xte.view()).unwrap();
    let metrics = classification_metrics(&p, &yte, 0.5).unwrap();
    let rate = yte.iter().map(|v| *v as f64).sum::<f64>() / yte.len() as f64;
    let majority = rate.max(1.0 - rate);
    assert!((metrics.accuracy - majority).abs() <= 0.04, "acc {} base {majority}", metrics.accuracy);
    let gap = metrics.mean_prob_actual_pos.unwrap() - metrics.mean_prob_actual_neg.unwrap();
    assert!(gap.abs() <= 0.03, "gap {gap}");
    let mean_p = p.iter().sum::<f64>() / p.len() as f64;
    assert!((mean_p - rate).abs() <= 0.03, "mean prob {mean_p} base {rate}");
}

#[test]
fn identical_seed_gives_identical_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (x, y) = planted(300, 0.0, &mut rng);
    let cfg = LstmConfig { max_epochs: 6, seed: 9, ..LstmConfig::default() };
    let a = fit_lstm(x.view(), &y, &cfg).unwrap();
    let b = fit_lstm(x.view(), &y, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.parameters(), b.parameters());
    let c = fit_lstm(x.view(), &y, &LstmConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.parameters(), c.parameters());
    let back = LstmModel::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(a.predict_proba(x.view()).unwrap(), back.predict_proba(x.view()).unwrap());
}

#[test]
fn early_stopping_restores_best_epoch() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let x = gaussian_batch(400, &mut rng, 1.0);
    let y: Vec<u8> = (0..400).map(|_| rng.gen_bool(0.5) as u8).collect();
    let cfg = LstmConfig { max_epochs: 60, early_stop_patience: 3, learning_rate: 0.01, seed: 3, ..LstmConfig::default() };
    let m = fit_lstm(x.view(), &y, &cfg).unwrap();
    let h = &m.history;
    let best = h
        .iter()
        .min_by(|a, b| a.validation_loss.total_cmp(&b.validation_loss))
        .unwrap();
    assert_eq!(m.best_epoch, best.epoch);
    let stopped_early = h.len() < cfg.max_epochs;
    if stopped_early {
        assert_eq!(h.len(), m.best_epoch + cfg.early_stop_patience + 1);
    }
    // the restored weights reproduce the best validation loss
    let n_val = 40;
    let xv = x.slice(ndarray::s![400 - n_val.., ..]).to_owned();
    let p = m.predict_proba(xv.view()).unwrap();
    let bce: f64 = p
        .iter()
        .zip(&y[400 - n_val..])
        .map(|(p, y)| if *y == 1 { -p.ln() } else { -(1.0 - p).ln() })
        .sum::<f64>()
        / n_val as f64;
    assert!((bce - best.validation_loss).abs() < 1e-9, "{bce} vs {}", best.validation_loss);
}

#[test]
fn averaged_dropout_passes_match_inference() {
    let m = LstmModel::initialized(LstmConfig { seed: 11, ..LstmConfig::default() });
    let cfg = LstmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = gaussian_batch(5, &mut rng, 1.0);
    let plain = m.logits(x.view()).unwrap();
    for (row, want) in x.rows().into_iter().zip(plain) {
        let seq = row.to_vec();
        let n = 10_000;
        let avg = (0..n)
            .map(|_| m.logit_with_mask(&seq, &dropout_mask(&mut rng, cfg.hidden_units, cfg.dropout_rate)))
            .sum::<f64>()
            / n as f64;
        assert!((avg - want).abs() <= 0.02 * want.abs().max(0.05), "avg {avg} vs {want}");
    }
}

#[test]
fn default_parameter_count() {
    assert_eq!(LstmModel::initialized(LstmConfig::default()).parameter_count(), 1169);
    let x = Array2::from_elem((2, LEN), 0.3);
    assert_eq!(LstmModel::zeros(LstmConfig::default()).predict_proba(x.view()).unwrap(), vec![0.5, 0.5]);
}
