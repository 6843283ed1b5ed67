//! Extremely randomized decision trees for binary fall/ADL classification.

use rand::Rng;

/// A node in the flattened tree. Children always have larger indices than
/// their parent, so every tree is acyclic by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        fall_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraTree {
    pub(crate) nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_features: usize,
    pub min_samples_split: usize,
}

/// Row-major feature matrix with binary labels.
pub(crate) struct Samples<'a> {
    pub features: &'a [f64],
    pub n_features: usize,
    pub labels: &'a [bool],
}

impl Samples<'_> {
    #[inline]
    fn value(&self, row: u32, feature: usize) -> f64 {
        self.features[row as usize * self.n_features + feature]
    }
}

impl ExtraTree {
    pub(crate) fn fit<R: Rng>(data: &Samples<'_>, params: TreeParams, rng: &mut R) -> Self {
        let n_rows = data.labels.len();
        let mut rows: Vec<u32> = (0..n_rows as u32).collect();
        let mut feature_order: Vec<u32> = (0..data.n_features as u32).collect();
        let mut nodes = vec![Node::Leaf { fall_fraction: 0.0 }];
        let mut stack = vec![(0usize, 0usize, n_rows)];

        while let Some((id, lo, hi)) = stack.pop() {
            let part = &mut rows[lo..hi];
            let n = part.len();
            let falls = part.iter().filter(|&&r| data.labels[r as usize]).count();
            let leaf = Node::Leaf {
                fall_fraction: if n == 0 { 0.0 } else { falls as f64 / n as f64 },
            };
            if falls == 0 || falls == n || n < params.min_samples_split {
                nodes[id] = leaf;
                continue;
            }
            match best_random_split(data, part, falls, &mut feature_order, params.max_features, rng) {
                None => nodes[id] = leaf,
                Some((feature, threshold)) => {
                    let mid = partition(part, |r| data.value(r, feature) <= threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { fall_fraction: 0.0 });
                    nodes.push(Node::Leaf { fall_fraction: 0.0 });
                    nodes[id] = Node::Split {
                        feature: feature as u32,
                        threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    stack.push((left + 1, lo + mid, hi));
                    stack.push((left, lo, lo + mid));
                }
            }
        }
        Self { nodes }
    }

    /// Fall frequency of the leaf `features` lands in.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Leaf { fall_fraction } => return fall_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if features[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Draws features in random order, skipping ones constant on this node, until
/// `max_features` usable candidates have each been given one uniform random
/// threshold. Returns the candidate with the lowest weighted Gini impurity.
fn best_random_split<R: Rng>(
    data: &Samples<'_>,
    rows: &[u32],
    falls: usize,
    order: &mut [u32],
    max_features: usize,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let n = rows.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut tried = 0;
    for i in 0..order.len() {
        if tried == max_features {
            break;
        }
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
        let feature = order[i] as usize;

        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let v = data.value(r, feature);
            min = min.min(v);
            max = max.max(v);
        }
        if min >= max {
            continue;
        }
        tried += 1;
        let threshold = rng.random_range(min..max);

        let (mut n_left, mut falls_left) = (0usize, 0usize);
        for &r in rows {
            if data.value(r, feature) <= threshold {
                n_left += 1;
                falls_left += data.labels[r as usize] as usize;
            }
        }
        let n_right = rows.len() - n_left;
        let falls_right = falls - falls_left;
        let impurity = (n_left as f64 * gini(falls_left, n_left) + n_right as f64 * gini(falls_right, n_right)) / n;
        if best.is_none_or(|(_, _, b)| impurity < b) {
            best = Some((feature, threshold, impurity));
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn gini(positives: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = positives as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Moves rows satisfying `pred` to the front; returns how many there are.
fn partition(rows: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}
