//! Leaf-wise tree growth with exact split enumeration over sparse columns.
//!
//! Every leaf keeps the nonzero entries of its rows sorted by `(feature, value, row)`.
//! Absent entries are zeros, so each feature's candidate thresholds are the midpoints
//! between consecutive distinct values of the merged sequence
//! `negatives ++ [0 if any row lacks the feature] ++ positives`.

use rayon::prelude::*;

use super::tree::{Tree, TreeNode};
use super::GbdtParams;
use crate::sparse::FeatureMatrix;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Entry {
    feature: u32,
    row: u32,
    value: f64,
}

/// Column-sorted nonzero entries of a training matrix.
pub(crate) struct SortedColumns {
    entries: Vec<Entry>,
}

impl SortedColumns {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let mut entries: Vec<Entry> = x
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter().map(move |(f, v)| Entry {
                    feature: f as u32,
                    row: r as u32,
                    value: v,
                })
            })
            .collect();
        entries.par_sort_unstable_by(|a, b| {
            a.feature
                .cmp(&b.feature)
                .then(a.value.total_cmp(&b.value))
                .then(a.row.cmp(&b.row))
        });
        SortedColumns { entries }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    grad: f64,
    hess: f64,
    cover: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64, w: f64) {
        self.grad += g;
        self.hess += h;
        self.cover += w;
        self.count += 1;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
            cover: self.cover + o.cover,
            count: self.count + o.count,
        }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
            cover: self.cover - o.cover,
            count: self.count - o.count,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    default_left: bool,
}

impl Candidate {
    /// Higher gain wins; equal gains prefer the lower feature, then the lower threshold.
    fn better_than(&self, other: &Candidate) -> bool {
        self.gain > other.gain
            || (self.gain == other.gain
                && (self.feature, self.threshold) < (other.feature, other.threshold))
    }
}

struct Leaf {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    entries: Vec<Entry>,
    stats: Stats,
    best: Option<Candidate>,
}

pub(crate) struct Grower<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub weight: &'a [f64],
    pub params: &'a GbdtParams,
}

fn score(s: Stats, lambda: f64) -> Option<f64> {
    let d = s.hess + lambda;
    (d > 0.0).then(|| s.grad * s.grad / d)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

impl Grower<'_> {
    fn stats_of(&self, rows: &[u32]) -> Stats {
        let mut s = Stats::default();
        for &r in rows {
            let r = r as usize;
            s.add(self.grad[r], self.hess[r], self.weight[r]);
        }
        s
    }

    fn best_for_feature(&self, entries: &[Entry], total: Stats) -> Option<Candidate> {
        let p = self.params;
        let parent = score(total, p.lambda_l2)?;
        let mut nonzero = Stats::default();
        for e in entries {
            let r = e.row as usize;
            nonzero.add(self.grad[r], self.hess[r], self.weight[r]);
        }
        let zero = total.minus(nonzero);
        let mut zero_pending = zero.count > 0;
        let feature = entries[0].feature as usize;

        let mut best: Option<Candidate> = None;
        let mut left = Stats::default();
        let mut prev: Option<f64> = None;
        let mut i = 0;
        loop {
            let (value, group) = if zero_pending && (i == entries.len() || entries[i].value > 0.0) {
                zero_pending = false;
                (0.0, zero)
            } else if i < entries.len() {
                let v = entries[i].value;
                let mut g = Stats::default();
                while i < entries.len() && entries[i].value == v {
                    let r = entries[i].row as usize;
                    g.add(self.grad[r], self.hess[r], self.weight[r]);
                    i += 1;
                }
                (v, g)
            } else {
                break;
            };
            if let Some(pv) = prev {
                let right = total.minus(left);
                if left.count >= p.min_samples_leaf && right.count >= p.min_samples_leaf {
                    if let (Some(sl), Some(sr)) = (score(left, p.lambda_l2), score(right, p.lambda_l2)) {
                        let c = Candidate {
                            feature,
                            threshold: midpoint(pv, value),
                            gain: 0.5 * (sl + sr - parent),
                            default_left: left.cover >= right.cover,
                        };
                        if best.as_ref().is_none_or(|b| c.better_than(b)) {
                            best = Some(c);
                        }
                    }
                }
            }
            left = left.plus(group);
            prev = Some(value);
        }
        best
    }

    fn find_split(&self, leaf: &Leaf) -> Option<Candidate> {
        let p = self.params;
        if p.max_depth > 0 && leaf.depth >= p.max_depth {
            return None;
        }
        if leaf.stats.count < 2 * p.min_samples_leaf {
            return None;
        }
        let groups: Vec<&[Entry]> = leaf
            .entries
            .chunk_by(|a, b| a.feature == b.feature)
            .collect();
        let pick = |a: Option<Candidate>, b: Option<Candidate>| match (a, b) {
            (Some(x), Some(y)) => Some(if y.better_than(&x) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        };
        let best = if leaf.entries.len() > 200_000 {
            groups
                .par_iter()
                .map(|g| self.best_for_feature(g, leaf.stats))
                .reduce(|| None, pick)
        } else {
            groups
                .iter()
                .map(|g| self.best_for_feature(g, leaf.stats))
                .fold(None, pick)
        };
        best.filter(|c| c.gain > p.min_gain)
    }

    fn split(&self, leaf: Leaf, c: &Candidate, left_node: usize, right_node: usize, go_left: &mut [bool]) -> (Leaf, Leaf) {
        let zero_left = 0.0 < c.threshold;
        for &r in &leaf.rows {
            go_left[r as usize] = zero_left;
        }
        let f = c.feature as u32;
        let start = leaf.entries.partition_point(|e| e.feature < f);
        for e in leaf.entries[start..].iter().take_while(|e| e.feature == f) {
            go_left[e.row as usize] = e.value < c.threshold;
        }
        let (lrows, rrows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| go_left[r as usize]);
        let (lent, rent): (Vec<Entry>, Vec<Entry>) =
            leaf.entries.into_iter().partition(|e| go_left[e.row as usize]);
        let make = |node, rows: Vec<u32>, entries| Leaf {
            node,
            depth: leaf.depth + 1,
            stats: self.stats_of(&rows),
            rows,
            entries,
            best: None,
        };
        (make(left_node, lrows, lent), make(right_node, rrows, rent))
    }

    /// Grows one tree over `rows`. Returns `None` when the root has no admissible split.
    /// The second element maps each leaf node to the rows it holds.
    pub(crate) fn grow(
        &self,
        columns: &SortedColumns,
        rows: Vec<u32>,
        allowed: Option<&[bool]>,
    ) -> Option<(Tree, Vec<(usize, Vec<u32>)>)> {
        let p = self.params;
        let n = self.grad.len();
        let mut in_rows = vec![false; n];
        for &r in &rows {
            in_rows[r as usize] = true;
        }
        let entries: Vec<Entry> = columns
            .entries
            .iter()
            .filter(|e| in_rows[e.row as usize] && allowed.is_none_or(|a| a[e.feature as usize]))
            .copied()
            .collect();
        drop(in_rows);

        let mut root = Leaf {
            node: 0,
            depth: 0,
            stats: self.stats_of(&rows),
            rows,
            entries,
            best: None,
        };
        root.best = self.find_split(&root);
        root.best?;

        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut covers = vec![root.stats.cover];
        let mut leaves = vec![root];
        let mut go_left = vec![false; n];

        while leaves.len() < p.max_leaves {
            let mut pick: Option<usize> = None;
            for (i, l) in leaves.iter().enumerate() {
                if let Some(b) = &l.best {
                    let better = pick.is_none_or(|j| {
                        let o = leaves[j].best.as_ref().unwrap();
                        b.gain > o.gain || (b.gain == o.gain && l.node < leaves[j].node)
                    });
                    if better {
                        pick = Some(i);
                    }
                }
            }
            let Some(i) = pick else { break };
            let leaf = leaves.remove(i);
            let c = leaf.best.unwrap();
            let (ln, rn) = (nodes.len(), nodes.len() + 1);
            nodes[leaf.node] = TreeNode::Internal {
                feature: c.feature,
                threshold: c.threshold,
                left: ln,
                right: rn,
                default_left: c.default_left,
            };
            let (mut l, mut r) = self.split(leaf, &c, ln, rn, &mut go_left);
            nodes.push(TreeNode::Leaf { value: 0.0 });
            nodes.push(TreeNode::Leaf { value: 0.0 });
            covers.push(l.stats.cover);
            covers.push(r.stats.cover);
            l.best = self.find_split(&l);
            r.best = self.find_split(&r);
            leaves.push(l);
            leaves.push(r);
        }

        let mut leaf_rows = Vec::with_capacity(leaves.len());
        for leaf in leaves {
            let value = -leaf.stats.grad / (leaf.stats.hess + p.lambda_l2);
            nodes[leaf.node] = TreeNode::Leaf {
                value: if value.is_finite() { value } else { 0.0 },
            };
            leaf_rows.push((leaf.node, leaf.rows));
        }
        Some((Tree { nodes, covers }, leaf_rows))
    }
}
