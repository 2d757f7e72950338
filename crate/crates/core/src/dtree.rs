//! Greedy entropy decision trees.
//!
//! Split conditions have the form `x[f] < t`; rows satisfying it go to the
//! true child. Candidate thresholds are the distinct values of each feature
//! observed at the node (the smallest one is skipped because it would leave
//! the true side empty). The search minimizes the weighted child entropy and
//! breaks ties by feature index, then threshold.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::tabular::{Dataset, LabelVector};
use crate::{Error, Result};

pub type NodeId = usize;

/// `x[feature] < threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCondition {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitCondition {
    #[inline]
    pub fn goes_true(&self, row: &[f64]) -> bool {
        row[self.feature] < self.threshold
    }
}

/// A split found by [`best_split`] or a joint search, with its objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSplit {
    pub condition: SplitCondition,
    pub impurity: f64,
}

// n·log2(n) − Σ c·log2(c), with the sum taken over counts in ascending order so
// the result depends only on the multiset of counts. Equals n·entropy(hist).
fn info_mass(hist: &[usize]) -> f64 {
    fn xlogx(c: usize) -> f64 {
        if c <= 1 {
            0.0
        } else {
            let c = c as f64;
            c * c.log2()
        }
    }
    let mut buf = [0usize; 16];
    let mut heap;
    let counts: &mut [usize] = if hist.len() <= buf.len() {
        buf[..hist.len()].copy_from_slice(hist);
        &mut buf[..hist.len()]
    } else {
        heap = hist.to_vec();
        &mut heap
    };
    counts.sort_unstable();
    let n: usize = counts.iter().sum();
    let mut s = 0.0;
    for &c in counts.iter() {
        s += xlogx(c);
    }
    (xlogx(n) - s).max(0.0)
}

/// Shannon entropy, in bits, of the class distribution given by `hist`.
pub fn entropy(hist: &[usize]) -> Result<f64> {
    let n: usize = hist.iter().sum();
    if n == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(info_mass(hist) / n as f64)
}

/// Weighted child entropy `(n_L/n)·H(L) + (n_R/n)·H(R)` from the two
/// histograms. Both sides must be non-empty.
pub fn objective_from_histograms(left: &[usize], right: &[usize]) -> f64 {
    let n: usize = left.iter().sum::<usize>() + right.iter().sum::<usize>();
    (info_mass(left) + info_mass(right)) / n as f64
}

pub fn histogram(rows: &[usize], y: &[usize], num_classes: usize) -> Vec<usize> {
    let mut h = vec![0; num_classes];
    for &r in rows {
        h[y[r]] += 1;
    }
    h
}

/// Most frequent class; ties go to the smallest class id.
pub fn majority(hist: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in hist.iter().enumerate() {
        if count > hist[best] {
            best = c;
        }
    }
    best
}

pub fn is_pure(hist: &[usize]) -> bool {
    hist.iter().filter(|&&c| c > 0).count() <= 1
}

/// Objective of the split `x[feature] < threshold` over `rows`, computed by
/// partitioning the rows directly.
pub fn split_objective(
    feature: usize,
    threshold: f64,
    ds: &Dataset,
    rows: &[usize],
    y: &LabelVector,
) -> Result<f64> {
    let k = y.num_classes();
    let labels = y.labels();
    let mut left = vec![0; k];
    let mut right = vec![0; k];
    for &r in rows {
        if ds.value(r, feature) < threshold {
            left[labels[r]] += 1;
        } else {
            right[labels[r]] += 1;
        }
    }
    if left.iter().all(|&c| c == 0) || right.iter().all(|&c| c == 0) {
        return Err(Error::EmptySide { feature, threshold });
    }
    Ok(objective_from_histograms(&left, &right))
}

/// Exhaustive search minimizing the sum of the per-target split objectives
/// over the same candidate set. With one target this is the ordinary best
/// split; with two it is the joint split used by the joint surrogate tree.
pub(crate) fn search_split(ds: &Dataset, rows: &[usize], targets: &[&LabelVector]) -> Option<ScoredSplit> {
    if rows.len() < 2 {
        return None;
    }
    let totals: Vec<Vec<usize>> = targets
        .iter()
        .map(|y| histogram(rows, y.labels(), y.num_classes()))
        .collect();
    let mut sorted = rows.to_vec();
    let mut left: Vec<Vec<usize>> = totals.iter().map(|t| vec![0; t.len()]).collect();
    let mut right: Vec<Vec<usize>> = totals.clone();
    let mut best: Option<ScoredSplit> = None;

    for f in 0..ds.n_cols() {
        sorted.sort_unstable_by(|&a, &b| {
            ds.value(a, f)
                .partial_cmp(&ds.value(b, f))
                .unwrap_or(Ordering::Equal)
        });
        for (l, (r, t)) in left.iter_mut().zip(right.iter_mut().zip(&totals)) {
            l.iter_mut().for_each(|c| *c = 0);
            r.copy_from_slice(t);
        }
        for i in 0..sorted.len() {
            let row = sorted[i];
            let v = ds.value(row, f);
            if i > 0 && v > ds.value(sorted[i - 1], f) {
                let mut total = 0.0;
                for (l, r) in left.iter().zip(&right) {
                    total += objective_from_histograms(l, r);
                }
                if best.is_none_or(|b| total < b.impurity) {
                    best = Some(ScoredSplit {
                        condition: SplitCondition {
                            feature: f,
                            threshold: v,
                        },
                        impurity: total,
                    });
                }
            }
            for (t, y) in targets.iter().enumerate() {
                let c = y.labels()[row];
                left[t][c] += 1;
                right[t][c] -= 1;
            }
        }
    }
    best
}

/// Best single-target split over `rows`, or `None` when every row has the
/// same feature vector.
pub fn best_split(ds: &Dataset, rows: &[usize], y: &LabelVector) -> Option<ScoredSplit> {
    search_split(ds, rows, &[y])
}

pub fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// A node of a [`DecisionTree`]. `histogram` counts training labels reaching
/// the node; `n_samples` is its total.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        condition: SplitCondition,
        /// `[true_child, false_child]`.
        children: [NodeId; 2],
        histogram: Vec<usize>,
        n_samples: usize,
    },
    Leaf {
        label: usize,
        histogram: Vec<usize>,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn histogram(&self) -> &[usize] {
        match self {
            TreeNode::Split { histogram, .. } | TreeNode::Leaf { histogram, .. } => histogram,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } | TreeNode::Leaf { n_samples, .. } => *n_samples,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// Binary classification tree stored as a preorder arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
    num_classes: usize,
    max_depth: usize,
}

/// Fits a tree on every row of `ds`.
pub fn fit(ds: &Dataset, y: &LabelVector, max_depth: usize) -> Result<DecisionTree> {
    fit_rows(ds, &all_rows(ds.n_rows()), y, max_depth)
}

/// Fits a tree on a subset of rows of `ds`.
///
/// A node becomes a majority leaf when its labels are pure, when it sits at
/// depth `max_depth`, or when no split separates its rows. Empty children never
/// arise because candidate thresholds are observed values strictly above the
/// node minimum.
pub fn fit_rows(ds: &Dataset, rows: &[usize], y: &LabelVector, max_depth: usize) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != ds.n_rows() {
        return Err(Error::LengthMismatch {
            left: ds.n_rows(),
            right: y.len(),
        });
    }
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        n_features: ds.n_cols(),
        num_classes: y.num_classes(),
        max_depth,
    };
    tree.grow(ds, rows.to_vec(), y, 0);
    Ok(tree)
}

/// Splits `rows` by `cond` into (true side, false side).
pub(crate) fn partition(ds: &Dataset, rows: &[usize], cond: &SplitCondition) -> (Vec<usize>, Vec<usize>) {
    rows.iter()
        .partition(|&&r| ds.value(r, cond.feature) < cond.threshold)
}

impl DecisionTree {
    fn grow(&mut self, ds: &Dataset, rows: Vec<usize>, y: &LabelVector, depth: usize) -> NodeId {
        let hist = histogram(&rows, y.labels(), self.num_classes);
        let id = self.nodes.len();
        let n = rows.len();
        let split = if is_pure(&hist) || depth >= self.max_depth {
            None
        } else {
            best_split(ds, &rows, y)
        };
        let Some(split) = split else {
            self.nodes.push(TreeNode::Leaf {
                label: majority(&hist),
                histogram: hist,
                n_samples: n,
            });
            return id;
        };
        // Placeholder; overwritten once the children ids are known.
        self.nodes.push(TreeNode::Leaf {
            label: 0,
            histogram: Vec::new(),
            n_samples: 0,
        });
        let (t_rows, f_rows) = partition(ds, &rows, &split.condition);
        drop(rows);
        let t = self.grow(ds, t_rows, y, depth + 1);
        let f = self.grow(ds, f_rows, y, depth + 1);
        self.nodes[id] = TreeNode::Split {
            condition: split.condition,
            children: [t, f],
            histogram: hist,
            n_samples: n,
        };
        id
    }

    /// Assembles a tree from parts. The arena must be a preorder layout rooted
    /// at node 0 with consistent children.
    pub fn from_nodes(
        nodes: Vec<TreeNode>,
        n_features: usize,
        num_classes: usize,
        max_depth: usize,
    ) -> Result<Self> {
        let tree = Self {
            nodes,
            n_features,
            num_classes,
            max_depth,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return Err(Error::Schema(format!("bad child reference {id}")));
            }
            seen[id] = true;
            match &self.nodes[id] {
                TreeNode::Split {
                    condition,
                    children,
                    ..
                } => {
                    if condition.feature >= self.n_features {
                        return Err(Error::Schema(format!(
                            "feature {} out of range",
                            condition.feature
                        )));
                    }
                    stack.push(children[1]);
                    stack.push(children[0]);
                }
                TreeNode::Leaf { label, .. } => {
                    if *label >= self.num_classes.max(1) {
                        return Err(Error::Schema(format!("label {label} out of range")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Schema("unreachable nodes in tree".into()));
        }
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// The depth bound the tree was fitted with.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, id: NodeId) -> usize {
            match &t.nodes[id] {
                TreeNode::Split { children, .. } => 1 + go(t, children[0]).max(go(t, children[1])),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    /// Leaf ids in preorder.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_leaf())
            .collect()
    }

    /// Leaf reached by `row`.
    pub fn leaf_of(&self, row: &[f64]) -> Result<NodeId> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let mut id = 0;
        while let TreeNode::Split {
            condition,
            children,
            ..
        } = &self.nodes[id]
        {
            id = if condition.goes_true(row) {
                children[0]
            } else {
                children[1]
            };
        }
        Ok(id)
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        let id = self.leaf_of(row)?;
        match &self.nodes[id] {
            TreeNode::Leaf { label, .. } => Ok(*label),
            TreeNode::Split { .. } => unreachable!("leaf_of stops at a leaf"),
        }
    }

    fn parents(&self) -> Vec<Option<(NodeId, bool)>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split { children, .. } = node {
                parents[children[0]] = Some((id, true));
                parents[children[1]] = Some((id, false));
            }
        }
        parents
    }

    /// Conjunction of the edge conditions from the root to `id`.
    pub fn path_condition(&self, id: NodeId) -> Result<PathCondition> {
        if id >= self.nodes.len() {
            return Err(Error::UnknownNode(id));
        }
        let parents = self.parents();
        let mut pc = PathCondition::unconstrained();
        let mut cur = id;
        while let Some((p, took_true)) = parents[cur] {
            if let TreeNode::Split { condition, .. } = &self.nodes[p] {
                pc.constrain(condition, took_true);
            }
            cur = p;
        }
        Ok(pc)
    }

    /// Number of rows whose label differs from their leaf's prediction.
    pub fn training_errors(&self, ds: &Dataset, rows: &[usize], y: &LabelVector) -> Result<usize> {
        let mut errors = 0;
        for &r in rows {
            if self.predict(ds.row(r))? != y.labels()[r] {
                errors += 1;
            }
        }
        Ok(errors)
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            schema_version: crate::SCHEMA_VERSION,
            n_features: self.n_features,
            num_classes: self.num_classes,
            max_depth: self.max_depth,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, node)| match node {
                    TreeNode::Split {
                        condition,
                        children,
                        histogram,
                        n_samples,
                    } => TreeNodeRecord {
                        id,
                        kind: "split",
                        feature: Some(condition.feature),
                        threshold: Some(condition.threshold),
                        children: Some(children.to_vec()),
                        label: None,
                        histogram: histogram.clone(),
                        n: *n_samples,
                    },
                    TreeNode::Leaf {
                        label,
                        histogram,
                        n_samples,
                    } => TreeNodeRecord {
                        id,
                        kind: "leaf",
                        feature: None,
                        threshold: None,
                        children: None,
                        label: Some(*label),
                        histogram: histogram.clone(),
                        n: *n_samples,
                    },
                })
                .collect(),
        }
    }
}

/// Per-feature importance: the sample-weighted entropy decrease of every split
/// on that feature, normalized to sum to one when any decrease is positive.
pub fn feature_importance(tree: &DecisionTree) -> Vec<f64> {
    let mut imp = vec![0.0; tree.n_features];
    let total = tree.nodes[0].n_samples();
    if total == 0 {
        return imp;
    }
    for node in &tree.nodes {
        if let TreeNode::Split {
            condition,
            children,
            histogram,
            n_samples,
        } = node
        {
            let parent = info_mass(histogram) / *n_samples as f64;
            let after = objective_from_histograms(
                tree.nodes[children[0]].histogram(),
                tree.nodes[children[1]].histogram(),
            );
            imp[condition.feature] += (*n_samples as f64 / total as f64) * (parent - after);
        }
    }
    let sum: f64 = imp.iter().sum();
    if sum > 0.0 {
        imp.iter_mut().for_each(|v| *v /= sum);
    }
    imp
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeDocument {
    pub schema_version: u32,
    pub n_features: usize,
    pub num_classes: usize,
    pub max_depth: usize,
    pub nodes: Vec<TreeNodeRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeNodeRecord {
    pub id: usize,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub histogram: Vec<usize>,
    pub n: usize,
}

/// Half-open interval `[lower, upper)`; infinite ends mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v < self.upper
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lower: self.lower.max(other.lower),
            upper: self.upper.min(other.upper),
        }
    }
}

/// Axis-aligned box: one [`Interval`] per constrained feature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathCondition {
    bounds: BTreeMap<usize, Interval>,
}

impl PathCondition {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn bounds(&self) -> &BTreeMap<usize, Interval> {
        &self.bounds
    }

    pub fn interval(&self, feature: usize) -> Interval {
        self.bounds.get(&feature).copied().unwrap_or(Interval::FULL)
    }

    /// Adds `x[f] < t` (`took_true`) or `x[f] >= t`.
    pub fn constrain(&mut self, cond: &SplitCondition, took_true: bool) {
        let iv = self.bounds.entry(cond.feature).or_insert(Interval::FULL);
        if took_true {
            iv.upper = iv.upper.min(cond.threshold);
        } else {
            iv.lower = iv.lower.max(cond.threshold);
        }
    }

    pub fn with(mut self, cond: &SplitCondition, took_true: bool) -> Self {
        self.constrain(cond, took_true);
        self
    }

    pub fn is_satisfiable(&self) -> bool {
        self.bounds.values().all(|iv| !iv.is_empty())
    }

    pub fn contains(&self, row: &[f64]) -> bool {
        self.bounds.iter().all(|(&f, iv)| iv.contains(row[f]))
    }

    /// Feature-wise intersection, or `None` if any interval becomes empty.
    pub fn intersect(&self, other: &PathCondition) -> Option<PathCondition> {
        let mut bounds = self.bounds.clone();
        for (&f, iv) in &other.bounds {
            let e = bounds.entry(f).or_insert(Interval::FULL);
            *e = e.intersect(iv);
        }
        let pc = PathCondition { bounds };
        pc.is_satisfiable().then_some(pc)
    }
}
