use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{GbdtConfig, LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitTest {
    /// Left iff value < threshold.
    Numeric { threshold: f64 },
    /// Left iff code equals `code`.
    Categorical { code: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        test: SplitTest,
        left: usize,
        right: usize,
        /// Branch for unseen categories: the side that held more training rows.
        unseen_left: bool,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, test, left, right, unseen_left } => {
                    let v = x(*feature);
                    let go_left = match test {
                        SplitTest::Numeric { threshold } => v < *threshold,
                        SplitTest::Categorical { code } => {
                            if v == super::UNSEEN {
                                *unseen_left
                            } else {
                                v == *code
                            }
                        }
                    };
                    k = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match &nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Row indices of each feature sorted by value (ties by row index).
pub(super) fn presort(x: &[Vec<f64>]) -> Vec<Vec<usize>> {
    x.iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

struct Candidate {
    gain: f64,
    feature: usize,
    test: SplitTest,
    left_count: usize,
}

/// Zero-gain splits are admitted so that interactions invisible to any
/// single split (XOR) can still be reached one level further down.
fn better(gain: f64, best: &Option<Candidate>) -> bool {
    match best {
        None => gain > -1e-12,
        Some(b) => gain > b.gain + 1e-10 * (1.0 + b.gain.abs()),
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    categorical: &'a [bool],
    order: &'a [Vec<usize>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbdtConfig,
    /// Node id each row currently sits in.
    owner: Vec<usize>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn best_split(&self, node: usize, rows: &[usize]) -> Option<Candidate> {
        let min_leaf = self.config.min_leaf;
        let n = rows.len();
        let g_tot: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_tot: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let parent = score(g_tot, h_tot);
        let mut best: Option<Candidate> = None;
        for f in 0..self.x.len() {
            let col = &self.x[f];
            let sorted: Vec<usize> = self.order[f].iter().copied().filter(|&i| self.owner[i] == node).collect();
            if self.categorical[f] {
                // one-vs-rest over codes, ascending
                let mut k = 0;
                while k < n {
                    let code = col[sorted[k]];
                    let (mut g, mut h, start) = (0.0, 0.0, k);
                    while k < n && col[sorted[k]] == code {
                        g += self.grad[sorted[k]];
                        h += self.hess[sorted[k]];
                        k += 1;
                    }
                    let cnt = k - start;
                    if cnt < min_leaf || n - cnt < min_leaf {
                        continue;
                    }
                    let gain = score(g, h) + score(g_tot - g, h_tot - h) - parent;
                    if better(gain, &best) {
                        best = Some(Candidate { gain, feature: f, test: SplitTest::Categorical { code }, left_count: cnt });
                    }
                }
            } else {
                let (mut g, mut h) = (0.0, 0.0);
                for k in 0..n - 1 {
                    g += self.grad[sorted[k]];
                    h += self.hess[sorted[k]];
                    let (a, b) = (col[sorted[k]], col[sorted[k + 1]]);
                    if a == b || k + 1 < min_leaf || n - k - 1 < min_leaf {
                        continue;
                    }
                    let gain = score(g, h) + score(g_tot - g, h_tot - h) - parent;
                    if better(gain, &best) {
                        let threshold = a + (b - a) / 2.0;
                        best = Some(Candidate { gain, feature: f, test: SplitTest::Numeric { threshold }, left_count: k + 1 });
                    }
                }
            }
        }
        best
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        Node::Leaf { value: -g / (h + LAMBDA) }
    }

    fn build(&mut self, node: usize, rows: Vec<usize>, depth: usize) {
        let split = if depth < self.config.max_depth && rows.len() >= 2 * self.config.min_leaf {
            self.best_split(node, &rows)
        } else {
            None
        };
        let Some(c) = split else {
            self.nodes[node] = self.leaf(&rows);
            return;
        };
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Leaf { value: 0.0 });
        self.nodes.push(Node::Leaf { value: 0.0 });
        let col = &self.x[c.feature];
        let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
        for &i in &rows {
            let go_left = match c.test {
                SplitTest::Numeric { threshold } => col[i] < threshold,
                SplitTest::Categorical { code } => col[i] == code,
            };
            if go_left {
                self.owner[i] = left;
                lrows.push(i);
            } else {
                self.owner[i] = right;
                rrows.push(i);
            }
        }
        self.nodes[node] = Node::Split {
            feature: c.feature,
            test: c.test,
            left,
            right,
            unseen_left: 2 * c.left_count > rows.len(),
        };
        self.build(left, lrows, depth + 1);
        self.build(right, rrows, depth + 1);
    }
}

pub(super) fn grow(
    x: &[Vec<f64>],
    categorical: &[bool],
    order: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    config: &GbdtConfig,
) -> Tree {
    let n = grad.len();
    let mut g = Grower { x, categorical, order, grad, hess, config, owner: vec![0; n], nodes: vec![Node::Leaf { value: 0.0 }] };
    g.build(0, (0..n).collect(), 0);
    Tree { nodes: g.nodes }
}
