use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-fold ranks (1 = most important) for the union of every fold's top-k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub features: Vec<String>,
    /// `ranks[i][f]` is feature `features[i]`'s rank in fold `f`.
    pub ranks: Vec<Vec<usize>>,
    pub top_k: usize,
    /// Features ranked in the top 5 of every fold.
    pub in_all_top5: Vec<String>,
    pub top1: Vec<String>,
    pub top1_stable: bool,
}

fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // descending score; equal scores keep feature order
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut rank = vec![0; scores.len()];
    for (pos, &f) in order.iter().enumerate() {
        rank[f] = pos + 1;
    }
    rank
}

/// `per_fold[f][j]` is fold `f`'s importance for feature `names[j]`.
pub fn importance_rank_matrix(names: &[String], per_fold: &[Vec<f64>], top_k: usize) -> Result<RankMatrix> {
    if names.is_empty() || per_fold.is_empty() {
        return Err(Error::InvalidInput("importances are empty".into()));
    }
    if per_fold.len() < 2 {
        return Err(Error::InvalidInput("rank stability needs at least two folds".into()));
    }
    if per_fold.iter().any(|f| f.len() != names.len()) {
        return Err(Error::ShapeMismatch("every fold must score every feature".into()));
    }
    let fold_ranks: Vec<Vec<usize>> = per_fold.iter().map(|s| ranks(s)).collect();
    let mut by_rank: Vec<usize> = (0..names.len()).collect();
    by_rank.sort_by_key(|&j| (fold_ranks.iter().map(|r| r[j]).sum::<usize>(), j));
    let chosen: Vec<usize> = by_rank
        .iter()
        .copied()
        .filter(|&j| fold_ranks.iter().any(|r| r[j] <= top_k))
        .collect();

    let top1: Vec<String> = fold_ranks
        .iter()
        .map(|r| names[r.iter().position(|&k| k == 1).expect("rank 1 exists")].clone())
        .collect();
    Ok(RankMatrix {
        ranks: chosen.iter().map(|&j| fold_ranks.iter().map(|r| r[j]).collect()).collect(),
        in_all_top5: by_rank
            .iter()
            .filter(|&&j| fold_ranks.iter().all(|r| r[j] <= 5))
            .map(|&j| names[j].clone())
            .collect(),
        features: chosen.iter().map(|&j| names[j].clone()).collect(),
        top1_stable: top1.iter().all(|t| *t == top1[0]),
        top1,
        top_k,
    })
}
