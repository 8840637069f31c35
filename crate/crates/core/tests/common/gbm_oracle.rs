//! Naive best-first boosting on raw values: every midpoint between
//! consecutive distinct values of every feature is tried at every leaf.

use ndarray::ArrayView2;
use wflab::gbm::{GbmConfig, Node, Tree};

#[derive(Debug)]
pub enum T {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<T>, right: Box<T> },
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn loss(raw: &[f64], y: &[f64]) -> f64 {
    raw.iter().zip(y).map(|(z, t)| z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z).sum::<f64>() / raw.len() as f64
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    g * g / (h + l2)
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn best_split(x: ArrayView2<f64>, rows: &[usize], g: &[f64], h: &[f64], cfg: &GbmConfig) -> Option<Best> {
    if rows.len() < 2 * cfg.min_samples_leaf {
        return None;
    }
    let gt: f64 = rows.iter().fold(0.0, |a, &r| a + g[r]);
    let ht: f64 = rows.iter().fold(0.0, |a, &r| a + h[r]);
    let mut best: Option<Best> = None;
    for f in 0..x.ncols() {
        let mut all: Vec<f64> = x.column(f).to_vec();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0);
        for w in all.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            // sums for the rows sitting exactly at w[0], in row order
            let (mut bg, mut bh, mut bn) = (0.0, 0.0, 0);
            for &r in rows {
                if x[[r, f]] == w[0] {
                    bg += g[r];
                    bh += h[r];
                    bn += 1;
                }
            }
            gl += bg;
            hl += bh;
            nl += bn;
            if nl < cfg.min_samples_leaf || rows.len() - nl < cfg.min_samples_leaf {
                continue;
            }
            let l2 = cfg.l2_regularization;
            let gain = 0.5 * (score(gl, hl, l2) + score(gt - gl, ht - hl, l2) - score(gt, ht, l2));
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                best = Some(Best { gain, feature: f, threshold: t });
            }
        }
    }
    best
}

pub fn grow(x: ArrayView2<f64>, g: &[f64], h: &[f64], cfg: &GbmConfig) -> (T, Vec<(f64, Vec<usize>)>) {
    // leaves as (creation order, rows, path), expanded best-first
    struct Open {
        id: usize,
        rows: Vec<usize>,
        best: Option<Best>,
    }
    let all: Vec<usize> = (0..g.len()).collect();
    let mut open = vec![Open { id: 0, best: best_split(x, &all, g, h, cfg), rows: all }];
    let mut splits: Vec<(usize, usize, f64, usize, usize)> = Vec::new();
    let mut next_id = 1;
    let mut leaves = 1;
    while leaves < cfg.max_leaf_nodes {
        let mut pick: Option<usize> = None;
        for (i, o) in open.iter().enumerate() {
            if let Some(b) = &o.best {
                let better = match pick {
                    None => true,
                    Some(p) => {
                        let pb = open[p].best.as_ref().unwrap();
                        b.gain > pb.gain || (b.gain == pb.gain && o.id < open[p].id)
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
        }
        let Some(p) = pick else { break };
        let o = open.remove(p);
        let b = o.best.unwrap();
        let (l, r): (Vec<usize>, Vec<usize>) = o.rows.iter().partition(|&&i| x[[i, b.feature]] <= b.threshold);
        splits.push((o.id, b.feature, b.threshold, next_id, next_id + 1));
        for (id, rows) in [(next_id, l), (next_id + 1, r)] {
            open.push(Open { id, best: best_split(x, &rows, g, h, cfg), rows });
        }
        next_id += 2;
        leaves += 1;
    }
    let mut leaf_vals = std::collections::BTreeMap::new();
    let mut leaf_rows = Vec::new();
    open.sort_by_key(|o| o.id);
    for o in &open {
        let gs = o.rows.iter().fold(0.0, |a, &r| a + g[r]);
        let hs = o.rows.iter().fold(0.0, |a, &r| a + h[r]);
        let v = -gs / (hs + cfg.l2_regularization) * cfg.learning_rate;
        leaf_vals.insert(o.id, v);
        leaf_rows.push((v, o.rows.clone()));
    }
    fn build(id: usize, splits: &[(usize, usize, f64, usize, usize)], leaves: &std::collections::BTreeMap<usize, f64>) -> T {
        match splits.iter().find(|s| s.0 == id) {
            Some(&(_, feature, threshold, l, r)) => T::Split {
                feature,
                threshold,
                left: Box::new(build(l, splits, leaves)),
                right: Box::new(build(r, splits, leaves)),
            },
            None => T::Leaf(leaves[&id]),
        }
    }
    (build(0, &splits, &leaf_vals), leaf_rows)
}

pub fn boost(x: ArrayView2<f64>, y: &[u8], cfg: &GbmConfig) -> (f64, Vec<T>) {
    let t: Vec<f64> = y.iter().map(|v| *v as f64).collect();
    let rate = t.iter().sum::<f64>() / t.len() as f64;
    let init = (rate / (1.0 - rate)).ln();
    let mut raw = vec![init; y.len()];
    let mut cur = loss(&raw, &t);
    let mut trees = Vec::new();
    for _ in 0..cfg.max_iter {
        let g: Vec<f64> = raw.iter().zip(&t).map(|(z, y)| sigmoid(*z) - y).collect();
        let h: Vec<f64> = raw.iter().map(|z| sigmoid(*z) * (1.0 - sigmoid(*z))).collect();
        let (tree, leaf_rows) = grow(x, &g, &h, cfg);
        let mut next = raw.clone();
        for (v, rows) in &leaf_rows {
            for &r in rows {
                next[r] += v;
            }
        }
        let l = loss(&next, &t);
        if l <= cur {
            raw = next;
            cur = l;
            trees.push(tree);
        } else {
            trees.push(T::Leaf(0.0));
        }
    }
    (init, trees)
}

pub fn same_tree(a: &Tree, at: usize, b: &T) -> Result<(), String> {
    match (&a.nodes[at], b) {
        (Node::Leaf { value, .. }, T::Leaf(v)) if value.to_bits() == v.to_bits() => Ok(()),
        (
            Node::Split { feature, threshold, left, right, .. },
            T::Split { feature: f, threshold: t, left: l, right: r },
        ) if feature == f && threshold.to_bits() == t.to_bits() => {
            same_tree(a, *left, l)?;
            same_tree(a, *right, r)
        }
        (x, _) => Err(format!("node {at} differs: {x:?}")),
    }
}
