use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { value: f64 },
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub n_samples: usize,
    /// Sum of squared deviations from the node mean.
    pub sse: f64,
    /// `sse` minus the children's `sse`; zero for leaves.
    pub decrease: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

fn mean_sse(y: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, sse)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Exact search over midpoints between distinct sorted values. Maximises
/// `S_l^2/n_l + S_r^2/n_r`, which is the variance reduction up to a
/// constant.
fn best_split(x: &Array2<f64>, y: &[f64], idx: &[usize], features: &[usize], min_leaf: usize) -> Option<Candidate> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<Candidate> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let mut left = 0.0;
        for pos in 1..n {
            left += y[order[pos - 1]];
            if pos < min_leaf || n - pos < min_leaf {
                continue;
            }
            let (lo, hi) = (x[[order[pos - 1], f]], x[[order[pos], f]]);
            if lo >= hi {
                continue;
            }
            let right = total - left;
            let score = left * left / pos as f64 + right * right / (n - pos) as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Candidate { feature: f, threshold, score });
            }
        }
    }
    best
}

impl RegressionTree {
    /// Fit on the rows listed in `sample` (repeats allowed).
    pub(crate) fn fit(x: &Array2<f64>, y: &[f64], sample: Vec<usize>, params: TreeParams, rng: &mut impl Rng) -> Self {
        let d = x.ncols();
        let mut nodes = Vec::new();
        let (value, sse) = mean_sse(y, &sample);
        nodes.push(Node { kind: NodeKind::Leaf { value }, n_samples: sample.len(), sse, decrease: 0.0 });
        let mut stack = vec![(0usize, sample, 0usize)];
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((id, idx, depth)) = stack.pop() {
            let n = idx.len();
            let constant = idx.iter().all(|&i| y[i] == y[idx[0]]);
            if constant || n < 2 * params.min_samples_leaf || params.max_depth.is_some_and(|m| depth >= m) {
                continue;
            }
            if params.max_features < d {
                features.shuffle(rng);
            }
            let mut candidates = features[..params.max_features].to_vec();
            candidates.sort_unstable();
            let Some(split) = best_split(x, y, &idx, &candidates, params.min_samples_leaf) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[[i, split.feature]] <= split.threshold);
            let (lv, lsse) = mean_sse(y, &l);
            let (rv, rsse) = mean_sse(y, &r);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node { kind: NodeKind::Leaf { value: lv }, n_samples: l.len(), sse: lsse, decrease: 0.0 });
            nodes.push(Node { kind: NodeKind::Leaf { value: rv }, n_samples: r.len(), sse: rsse, decrease: 0.0 });
            let node = &mut nodes[id];
            node.kind = NodeKind::Split { feature: split.feature, threshold: split.threshold, left, right };
            node.decrease = node.sse - lsse - rsse;
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Self { nodes, n_features: d }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. })).count()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { value } => return value,
                NodeKind::Split { feature, threshold, left, right } => {
                    id = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Summed SSE decrease per feature.
    pub fn raw_importances(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for n in &self.nodes {
            if let NodeKind::Split { feature, .. } = n.kind {
                out[feature] += n.decrease;
            }
        }
        out
    }
}
