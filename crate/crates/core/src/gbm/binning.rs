use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::stats::quantile_sorted;

/// Per-feature bin edges fit on training data.
///
/// Bin index of `x` is the number of edges strictly below `x`, so bin `b`
/// covers `(edges[b - 1], edges[b]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub edges: Vec<Vec<f64>>,
}

/// Column-major binned training matrix.
pub(crate) struct Binned {
    pub columns: Vec<Vec<u16>>,
    pub n_bins: Vec<usize>,
}

fn feature_edges(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    }
    let mut edges: Vec<f64> = (1..max_bins)
        .map(|k| quantile_sorted(&values, k as f64 / max_bins as f64))
        .collect();
    edges.dedup();
    // the top edge must leave something above it
    let top = *distinct.last().unwrap();
    edges.retain(|e| *e < top);
    edges
}

impl BinMapper {
    pub fn fit(x: ArrayView2<'_, f64>, max_bins: usize) -> Self {
        let edges = x
            .columns()
            .into_iter()
            .map(|c| feature_edges(c.to_vec(), max_bins))
            .collect();
        Self { edges }
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        self.edges[feature].partition_point(|e| *e < value) as u16
    }

    pub(crate) fn transform(&self, x: ArrayView2<'_, f64>) -> Binned {
        let columns = x
            .columns()
            .into_iter()
            .enumerate()
            .map(|(f, c)| c.iter().map(|v| self.bin(f, *v)).collect())
            .collect();
        Binned {
            columns,
            n_bins: (0..self.n_features()).map(|f| self.n_bins(f)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn few_distinct_values_use_midpoints() {
        let x = Array2::from_shape_vec((6, 1), vec![0.0, 1.0, 1.0, 2.0, 9.0, 0.0]).unwrap();
        let m = BinMapper::fit(x.view(), 256);
        assert_eq!(m.edges[0], vec![0.5, 1.5, 5.5]);
        assert_eq!(m.bin(0, 0.5), 0);
        assert_eq!(m.bin(0, 0.6), 1);
        assert_eq!(m.bin(0, 100.0), 3);
    }

    #[test]
    fn many_values_are_capped_and_roughly_equal_count() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7).sin() * 10.0 + i as f64 * 1e-3).collect();
        let x = Array2::from_shape_vec((1000, 1), v).unwrap();
        let m = BinMapper::fit(x.view(), 16);
        assert!(m.n_bins(0) <= 16);
        let b = m.transform(x.view());
        let mut counts = vec![0usize; m.n_bins(0)];
        for k in &b.columns[0] {
            counts[*k as usize] += 1;
        }
        assert!(counts.iter().all(|c| (50..=80).contains(c)), "{counts:?}");
    }

    #[test]
    fn constant_column_has_one_bin() {
        let x = Array2::from_elem((10, 1), 3.0);
        let m = BinMapper::fit(x.view(), 256);
        assert_eq!(m.n_bins(0), 1);
    }
}
