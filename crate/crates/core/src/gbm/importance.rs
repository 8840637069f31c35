use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::GbmModel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

fn accuracy(probs: &[f64], y: &[u8]) -> f64 {
    let hits = probs
        .iter()
        .zip(y)
        .filter(|(p, l)| ((**p >= 0.5) as u8) == **l)
        .count();
    hits as f64 / y.len() as f64
}

/// Mean accuracy drop when one column is shuffled, per feature in column
/// order. Repeat `r` of feature `j` uses its own derived seed, so the
/// result is independent of scheduling.
pub fn permutation_importance(
    model: &GbmModel,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_repeats == 0 {
        return Err(Error::InvalidConfig("n_repeats must be positive".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    let baseline = accuracy(&model.predict_proba(x)?, y);
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let feature_seed = derive_seed(seed, j as u64);
            let mut work = x.to_owned();
            let mut drop = 0.0;
            for r in 0..n_repeats {
                let mut column: Vec<f64> = x.column(j).to_vec();
                column.shuffle(&mut seeded(derive_seed(feature_seed, r as u64)));
                work.column_mut(j).iter_mut().zip(&column).for_each(|(dst, v)| *dst = *v);
                drop += baseline - accuracy(&model.predict_proba(work.view())?, y);
            }
            Ok(drop / n_repeats as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbm::{fit_gbm, GbmConfig};
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn planted_signal_ranks_first_and_unused_is_zero() {
        let mut rng = seeded(11);
        let n = 1000;
        let mut x = Array2::zeros((n, 3));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let s: f64 = rng.sample(StandardNormal);
            x[[i, 0]] = rng.sample(StandardNormal);
            x[[i, 1]] = s;
            // constant column: no split can use it
            x[[i, 2]] = 1.0;
            let noise: f64 = rng.sample(StandardNormal);
            y.push((s + 0.3 * noise > 0.0) as u8);
        }
        let m = fit_gbm(x.view(), &y, &GbmConfig { max_iter: 50, ..Default::default() }).unwrap();
        let imp = permutation_importance(&m, x.view(), &y, 20, 3).unwrap();
        assert!(imp[1] > imp[0] && imp[1] > imp[2], "{imp:?}");
        assert!(imp[1] > 0.2);
        assert!(imp[2].abs() <= 0.01);
        assert!(m.trees.iter().all(|t| t.split_features().all(|f| f != 2)));

        let again = permutation_importance(&m, x.view(), &y, 20, 3).unwrap();
        assert_eq!(imp, again);
        assert!(permutation_importance(&m, x.view(), &y, 0, 3).is_err());
    }
}
