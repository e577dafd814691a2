//! Single CART classification tree grown with Gini impurity.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// `[feature, threshold, left, right]`; `x[feature] <= threshold` goes left.
    Split(usize, f64, usize, usize),
    /// Training-sample count per class.
    Leaf(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

/// Row-major feature matrix with class indices.
pub(crate) struct TrainData<'a> {
    pub rows: &'a [&'a [f64]],
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub n_features: usize,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split(f, t, l, r) => i = if x[*f] <= *t { *l } else { *r },
                Node::Leaf(c) => return c,
            }
        }
    }

    pub(crate) fn grow(data: &TrainData<'_>, sample_idx: Vec<usize>, params: &GrowParams, rng: &mut impl Rng) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, sample_idx, 0usize)];
        tree.nodes.push(Node::Leaf(Vec::new()));
        let mut scratch = Vec::new();
        while let Some((slot, idx, depth)) = stack.pop() {
            let counts = class_counts(data, &idx);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_ok = params.max_depth.is_none_or(|m| depth < m);
            let split = if !pure && depth_ok && idx.len() >= 2 * params.min_leaf {
                best_split(data, &idx, &counts, params, rng, &mut scratch)
            } else {
                None
            };
            match split {
                Some((feature, threshold)) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        idx.into_iter().partition(|&i| data.rows[i][feature] <= threshold);
                    let l = tree.nodes.len();
                    tree.nodes.push(Node::Leaf(Vec::new()));
                    tree.nodes.push(Node::Leaf(Vec::new()));
                    tree.nodes[slot] = Node::Split(feature, threshold, l, l + 1);
                    stack.push((l + 1, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
                None => tree.nodes[slot] = Node::Leaf(counts),
            }
        }
        tree
    }
}

fn class_counts(data: &TrainData<'_>, idx: &[usize]) -> Vec<u32> {
    let mut c = vec![0u32; data.n_classes];
    for &i in idx {
        c[data.labels[i]] += 1;
    }
    c
}

/// Best (feature, threshold) over a random feature subset, falling back to
/// the remaining features when the subset offers no valid split.
fn best_split(
    data: &TrainData<'_>,
    idx: &[usize],
    counts: &[u32],
    params: &GrowParams,
    rng: &mut impl Rng,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<(usize, f64)> {
    let d = data.n_features;
    let m = params.features_per_split.clamp(1, d);
    let chosen = sample(rng, d, m).into_vec();
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in &chosen {
        scan_feature(data, idx, counts, f, params.min_leaf, scratch, &mut best);
    }
    if best.is_none() && m < d {
        let mut rest: Vec<usize> = (0..d).filter(|f| !chosen.contains(f)).collect();
        rest.sort_unstable();
        for f in rest {
            scan_feature(data, idx, counts, f, params.min_leaf, scratch, &mut best);
            if best.is_some() {
                break;
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn scan_feature(
    data: &TrainData<'_>,
    idx: &[usize],
    counts: &[u32],
    feature: usize,
    min_leaf: usize,
    scratch: &mut Vec<(f64, usize)>,
    best: &mut Option<(f64, usize, f64)>,
) {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| (data.rows[i][feature], data.labels[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = scratch.len();
    if scratch[0].0 == scratch[n - 1].0 {
        return;
    }

    let mut left = vec![0f64; counts.len()];
    let mut right: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut sq_left = 0.0;
    let mut sq_right: f64 = right.iter().map(|c| c * c).sum();
    for k in 0..n - 1 {
        let c = scratch[k].1;
        sq_left += 2.0 * left[c] + 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        left[c] += 1.0;
        right[c] -= 1.0;
        let (lo, hi) = (scratch[k].0, scratch[k + 1].0);
        let n_left = k + 1;
        if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
            continue;
        }
        // Weighted Gini, scaled by n: n_l(1 - Σp_l²) + n_r(1 - Σp_r²).
        let (nl, nr) = (n_left as f64, (n - n_left) as f64);
        let impurity = (nl - sq_left / nl) + (nr - sq_right / nr);
        if best.is_none_or(|(b, _, _)| impurity < b) {
            let mut t = lo + (hi - lo) / 2.0;
            if t >= hi {
                t = lo;
            }
            *best = Some((impurity, feature, t));
        }
    }
}
