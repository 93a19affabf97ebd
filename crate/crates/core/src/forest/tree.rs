//! CART regression trees grown on (possibly repeated) row indices.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

pub(crate) struct TreeParams {
    pub mtry: usize,
    pub min_node_size: usize,
}

/// Column-major training predictors plus the response, with each column's
/// sorted distinct values and every row's rank among them.
pub(crate) struct TrainingData<'a> {
    pub columns: &'a [Vec<f64>],
    pub response: &'a [f64],
    uniques: Vec<Vec<f64>>,
    ranks: Vec<Vec<u32>>,
}

impl<'a> TrainingData<'a> {
    pub fn new(columns: &'a [Vec<f64>], response: &'a [f64]) -> Self {
        let mut uniques = Vec::with_capacity(columns.len());
        let mut ranks = Vec::with_capacity(columns.len());
        for col in columns {
            let mut u = col.clone();
            u.sort_by(f64::total_cmp);
            u.dedup();
            let r = col
                .iter()
                .map(|v| u.partition_point(|x| x < v) as u32)
                .collect();
            uniques.push(u);
            ranks.push(r);
        }
        TrainingData {
            columns,
            response,
            uniques,
            ranks,
        }
    }
}

/// Margin, relative to the node's sum of squared responses, a candidate
/// needs to beat the incumbent, so rounding noise in the running sums cannot
/// break exact ties.
const SCORE_TOL: f64 = 1e-12;

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

/// Reusable per-tree buffers for split search.
struct Scratch {
    pairs: Vec<(u32, f64)>,
    counts: Vec<u32>,
    sums: Vec<f64>,
}

/// Best split of `node_rows` on feature `f`, scanning distinct values in
/// ascending order. Large nodes accumulate per-value buckets; small nodes
/// sort (rank, response) pairs.
fn best_split_on(data: &TrainingData<'_>, f: usize, node_rows: &[usize], sum: f64, margin: f64, scratch: &mut Scratch, best: &mut Option<Candidate>) {
    let m = node_rows.len();
    let ranks = &data.ranks[f];
    let uniq = &data.uniques[f];
    let consider = |left_sum: f64, nl: usize, lo: u32, hi: u32, best: &mut Option<Candidate>| {
        let right_sum = sum - left_sum;
        let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / (m - nl) as f64;
        if best.as_ref().is_none_or(|b| score > b.score + margin) {
            *best = Some(Candidate {
                feature: f,
                threshold: midpoint(uniq[lo as usize], uniq[hi as usize]),
                score,
            });
        }
    };

    if m * (usize::BITS - m.leading_zeros()) as usize >= uniq.len() {
        let (counts, sums) = (&mut scratch.counts, &mut scratch.sums);
        for &r in node_rows {
            let k = ranks[r] as usize;
            counts[k] += 1;
            sums[k] += data.response[r];
        }
        let (mut left_sum, mut nl) = (0.0, 0usize);
        let mut prev: Option<u32> = None;
        for k in 0..uniq.len() {
            if counts[k] == 0 {
                continue;
            }
            if let Some(lo) = prev {
                consider(left_sum, nl, lo, k as u32, best);
            }
            left_sum += sums[k];
            nl += counts[k] as usize;
            counts[k] = 0;
            sums[k] = 0.0;
            prev = Some(k as u32);
        }
    } else {
        let pairs = &mut scratch.pairs;
        pairs.clear();
        pairs.extend(node_rows.iter().map(|&r| (ranks[r], data.response[r])));
        pairs.sort_unstable_by_key(|p| p.0);
        let mut left_sum = 0.0;
        for k in 0..m - 1 {
            left_sum += pairs[k].1;
            let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
            if lo != hi {
                consider(left_sum, k + 1, lo, hi, best);
            }
        }
    }
}

/// Grows one tree on `rows` (duplicates allowed, as in a bootstrap sample).
pub(crate) fn grow(data: &TrainingData<'_>, mut rows: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> RegressionTree {
    let p = data.columns.len();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // (node slot, start, end) into `rows`
    let mut stack = vec![(0usize, 0usize, rows.len())];
    let max_unique = data.uniques.iter().map(Vec::len).max().unwrap_or(0);
    let mut scratch = Scratch {
        pairs: Vec::with_capacity(rows.len()),
        counts: vec![0; max_unique],
        sums: vec![0.0; max_unique],
    };

    while let Some((slot, start, end)) = stack.pop() {
        let node_rows = &rows[start..end];
        let m = node_rows.len();
        let sum: f64 = node_rows.iter().map(|&r| data.response[r]).sum();
        let mean = sum / m as f64;
        let first = data.response[node_rows[0]];
        let pure = node_rows.iter().all(|&r| data.response[r] == first);
        if pure || m < 2 * params.min_node_size {
            nodes[slot] = Node::Leaf { value: if pure { first } else { mean } };
            continue;
        }

        let mut features = index::sample(rng, p, params.mtry.min(p)).into_vec();
        features.sort_unstable();

        let parent_score = sum * sum / m as f64;
        let margin = SCORE_TOL * node_rows.iter().map(|&r| data.response[r] * data.response[r]).sum::<f64>();
        let mut best: Option<Candidate> = None;
        for &f in &features {
            best_split_on(data, f, node_rows, sum, margin, &mut scratch, &mut best);
        }

        match best {
            Some(c) if c.score > parent_score + margin => {
                let col = &data.columns[c.feature];
                let slice = &mut rows[start..end];
                let mut split = 0;
                for i in 0..slice.len() {
                    if col[slice[i]] <= c.threshold {
                        slice.swap(i, split);
                        split += 1;
                    }
                }
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                stack.push((right, start + split, end));
                stack.push((left, start, start + split));
            }
            _ => nodes[slot] = Node::Leaf { value: mean },
        }
    }
    RegressionTree { nodes }
}
