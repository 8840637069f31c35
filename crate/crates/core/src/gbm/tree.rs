//! Regression trees grown best-first on gradient/hessian histograms.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::binning::Binned;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `bin(feature) <= bin`, equivalently `x <= threshold`, go left.
    Split {
        feature: usize,
        bin: u16,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    /// `value` is already scaled by the learning rate.
    Leaf { value: f64, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64, count: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, count }],
        }
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, count } => Some((*value, *count)),
            _ => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitCandidate {
    pub feature: usize,
    pub bin: u16,
    pub gain: f64,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    best: Option<SplitCandidate>,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    g * g / (h + l2)
}

/// Split gain `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]`, with the
/// parent term `G²/(H+λ)` passed in so it is identical for every candidate.
pub(crate) fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, parent: f64, l2: f64) -> f64 {
    0.5 * (score(gl, hl, l2) + score(gr, hr, l2) - parent)
}

fn best_split(binned: &Binned, grad: &[f64], hess: &[f64], rows: &[u32], p: &GrowParams) -> Option<SplitCandidate> {
    if rows.len() < 2 * p.min_samples_leaf {
        return None;
    }
    let (g_tot, h_tot) = rows
        .iter()
        .fold((0.0, 0.0), |(g, h), &r| (g + grad[r as usize], h + hess[r as usize]));
    let parent = score(g_tot, h_tot, p.l2);
    let n_tot = rows.len();
    let mut best: Option<SplitCandidate> = None;
    let mut hist: Vec<BinStat> = Vec::new();
    for (f, column) in binned.columns.iter().enumerate() {
        let nb = binned.n_bins[f];
        if nb < 2 {
            continue;
        }
        hist.clear();
        hist.resize(nb, BinStat::default());
        for &r in rows {
            let s = &mut hist[column[r as usize] as usize];
            s.g += grad[r as usize];
            s.h += hess[r as usize];
            s.n += 1;
        }
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for (b, s) in hist[..nb - 1].iter().enumerate() {
            gl += s.g;
            hl += s.h;
            nl += s.n;
            if nl < p.min_samples_leaf {
                continue;
            }
            if n_tot - nl < p.min_samples_leaf {
                break;
            }
            let gain = split_gain(gl, hl, g_tot - gl, h_tot - hl, parent, p.l2);
            if gain > best.map_or(0.0, |c| c.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin: b as u16,
                    gain,
                });
            }
        }
    }
    best
}

/// A grown tree and, for each of its leaves, the training rows it holds.
pub(crate) struct Grown {
    pub tree: Tree,
    pub leaf_rows: Vec<(f64, Vec<u32>)>,
}

/// Grows one tree leaf-wise: repeatedly split the open leaf with the largest
/// gain (ties to the earliest leaf) until `max_leaf_nodes` or no positive gain.
pub(crate) fn grow_tree(
    binned: &Binned,
    edges: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> Grown {
    let all: Vec<u32> = (0..grad.len() as u32).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0, count: all.len() }];
    let mut open = vec![OpenLeaf {
        node: 0,
        best: best_split(binned, grad, hess, &all, p),
        rows: all,
    }];
    let mut n_leaves = 1;

    while n_leaves < p.max_leaf_nodes {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|b| (i, l.node, b.gain)))
            .fold(None::<(usize, usize, f64)>, |acc, cur| match acc {
                Some(a) if a.2 > cur.2 || (a.2 == cur.2 && a.1 < cur.1) => Some(a),
                _ => Some(cur),
            });
        let Some((idx, _, _)) = pick else { break };
        let leaf = open.swap_remove(idx);
        let split = leaf.best.expect("picked leaf has a split");
        let column = &binned.columns[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            leaf.rows.iter().partition(|&&r| column[r as usize] <= split.bin);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0, count: left_rows.len() });
        nodes.push(Node::Leaf { value: 0.0, count: right_rows.len() });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            bin: split.bin,
            threshold: edges[split.feature][split.bin as usize],
            gain: split.gain,
            left,
            right,
        };
        n_leaves += 1;
        for (node, rows) in [(left, left_rows), (right, right_rows)] {
            open.push(OpenLeaf {
                node,
                best: best_split(binned, grad, hess, &rows, p),
                rows,
            });
        }
    }

    open.sort_by_key(|l| l.node);
    let mut leaf_rows = Vec::with_capacity(open.len());
    for leaf in open {
        let (g, h) = leaf
            .rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &r| (g + grad[r as usize], h + hess[r as usize]));
        let value = -g / (h + p.l2) * p.learning_rate;
        nodes[leaf.node] = Node::Leaf {
            value,
            count: leaf.rows.len(),
        };
        leaf_rows.push((value, leaf.rows));
    }
    Grown {
        tree: Tree { nodes },
        leaf_rows,
    }
}
