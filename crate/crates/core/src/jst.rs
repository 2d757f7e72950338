//! Joint surrogate trees.
//!
//! A joint surrogate tree (JST) is two decision-tree surrogates, one per
//! model, that share split conditions from the root down until a divergence
//! test fires. At that point an *or-node* hands each model its own subtree.
//!
//! The tree is one preorder arena. Shared decision nodes, or-nodes and shared
//! leaves form the common prefix; model-specific split and leaf nodes only
//! appear below or-nodes. A shared leaf is reached when neither model needs a
//! further split (both pure, or depth exhausted) and stores one label per
//! model, so a disagreement there is still representable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dtree::{
    self, best_split, histogram, is_pure, majority, partition, DecisionTree, NodeId,
    PathCondition, ScoredSplit, SplitCondition, TreeNode,
};
use crate::tabular::{Dataset, LabelVector};
use crate::{Error, Result};

/// Which of the two models a branch belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    First,
    Second,
}

impl Model {
    pub const BOTH: [Model; 2] = [Model::First, Model::Second];

    /// 1-based index as used on the command line.
    pub fn from_index(i: usize) -> Result<Model> {
        match i {
            1 => Ok(Model::First),
            2 => Ok(Model::Second),
            other => Err(Error::InvalidModel(other)),
        }
    }

    /// 0-based slot in per-model arrays.
    pub fn slot(self) -> usize {
        match self {
            Model::First => 0,
            Model::Second => 1,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Model::First => "m1",
            Model::Second => "m2",
        }
    }
}

/// Divergence test used while growing the shared prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceMode {
    /// Diverge as soon as either model's best split has zero impurity.
    Simplified,
    /// Diverge when `imp1 + imp2 <= alpha * joint_imp`.
    Alpha { alpha: f64 },
}

impl std::fmt::Display for DivergenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceMode::Simplified => f.write_str("simplified"),
            DivergenceMode::Alpha { alpha } => write!(f, "alpha={alpha}"),
        }
    }
}

/// Decides between an or-node and a shared split.
///
/// `joint_imp` is only consulted in alpha mode, where it must be present.
/// The inequality is evaluated literally; with `alpha = 1` it always holds
/// because each separate impurity is a minimum of one term of the joint sum.
///
/// # Panics
///
/// In alpha mode when `joint_imp` is `None`.
pub fn should_diverge(imp1: f64, imp2: f64, joint_imp: Option<f64>, mode: DivergenceMode) -> bool {
    match mode {
        DivergenceMode::Simplified => imp1 == 0.0 || imp2 == 0.0,
        DivergenceMode::Alpha { alpha } => {
            let joint = joint_imp.expect("alpha divergence needs the joint impurity");
            imp1 + imp2 <= alpha * joint
        }
    }
}

/// Best common split for both label vectors: minimizes
/// `H(f,t,X,y1) + H(f,t,X,y2)` over the same candidates and tie-break order as
/// [`dtree::best_split`].
pub fn joint_best_split(
    ds: &Dataset,
    rows: &[usize],
    y1: &LabelVector,
    y2: &LabelVector,
) -> Option<ScoredSplit> {
    dtree::search_split(ds, rows, &[y1, y2])
}

#[derive(Debug, Clone, PartialEq)]
pub enum JstNode {
    /// Split used by both surrogates. `children` is `[true, false]`.
    Shared {
        condition: SplitCondition,
        children: [NodeId; 2],
        histograms: [Vec<usize>; 2],
        n_samples: usize,
    },
    /// Divergence point; `children[m]` roots model `m`'s subtree.
    Or {
        children: [NodeId; 2],
        histograms: [Vec<usize>; 2],
        n_samples: usize,
    },
    /// Terminal node of the shared prefix with one label per model.
    SharedLeaf {
        labels: [usize; 2],
        histograms: [Vec<usize>; 2],
        n_samples: usize,
    },
    ModelSplit {
        model: Model,
        condition: SplitCondition,
        children: [NodeId; 2],
        histogram: Vec<usize>,
        n_samples: usize,
    },
    ModelLeaf {
        model: Model,
        label: usize,
        histogram: Vec<usize>,
        n_samples: usize,
    },
}

impl JstNode {
    pub fn n_samples(&self) -> usize {
        match self {
            JstNode::Shared { n_samples, .. }
            | JstNode::Or { n_samples, .. }
            | JstNode::SharedLeaf { n_samples, .. }
            | JstNode::ModelSplit { n_samples, .. }
            | JstNode::ModelLeaf { n_samples, .. } => *n_samples,
        }
    }

    /// Training histogram of `model` at this node, if the node belongs to it.
    pub fn histogram(&self, model: Model) -> Option<&[usize]> {
        match self {
            JstNode::Shared { histograms, .. }
            | JstNode::Or { histograms, .. }
            | JstNode::SharedLeaf { histograms, .. } => Some(&histograms[model.slot()]),
            JstNode::ModelSplit {
                model: m,
                histogram,
                ..
            }
            | JstNode::ModelLeaf {
                model: m,
                histogram,
                ..
            } => (*m == model).then_some(histogram.as_slice()),
        }
    }

    fn children(&self) -> &[NodeId] {
        match self {
            JstNode::Shared { children, .. }
            | JstNode::Or { children, .. }
            | JstNode::ModelSplit { children, .. } => children,
            JstNode::SharedLeaf { .. } | JstNode::ModelLeaf { .. } => &[],
        }
    }

    fn children_mut(&mut self) -> &mut [NodeId] {
        match self {
            JstNode::Shared { children, .. }
            | JstNode::Or { children, .. }
            | JstNode::ModelSplit { children, .. } => children,
            JstNode::SharedLeaf { .. } | JstNode::ModelLeaf { .. } => &mut [],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JstNode::Shared { .. } => "shared",
            JstNode::Or { .. } => "or",
            JstNode::SharedLeaf { .. } => "shared_leaf",
            JstNode::ModelSplit {
                model: Model::First,
                ..
            } => "m1_split",
            JstNode::ModelSplit {
                model: Model::Second,
                ..
            } => "m2_split",
            JstNode::ModelLeaf {
                model: Model::First,
                ..
            } => "m1_leaf",
            JstNode::ModelLeaf {
                model: Model::Second,
                ..
            } => "m2_leaf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Fingerprint of the training features and both label vectors.
    pub fingerprint: String,
    pub prediction_columns: [String; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSurrogateTree {
    nodes: Vec<JstNode>,
    columns: Vec<String>,
    classes: Vec<String>,
    max_depth: usize,
    mode: DivergenceMode,
    provenance: Provenance,
    refinement_steps: usize,
}

/// SHA-256 over the feature matrix and both label vectors (ids and class
/// names), hex encoded.
pub fn training_fingerprint(ds: &Dataset, y1: &LabelVector, y2: &LabelVector) -> String {
    let mut h = Sha256::new();
    ds.hash_into(&mut h);
    for y in [y1, y2] {
        h.update((y.len() as u64).to_le_bytes());
        for &l in y.labels() {
            h.update((l as u64).to_le_bytes());
        }
        for c in y.classes() {
            h.update((c.len() as u64).to_le_bytes());
            h.update(c.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Brings two label vectors onto one class list. One list must extend the
/// other, which holds for vectors loaded together from one CSV.
pub(crate) fn align_classes(y1: &LabelVector, y2: &LabelVector) -> Result<(LabelVector, LabelVector)> {
    let (long, short) = if y1.num_classes() >= y2.num_classes() {
        (y1.classes(), y2.classes())
    } else {
        (y2.classes(), y1.classes())
    };
    if long[..short.len()] != *short {
        return Err(Error::Schema(
            "the two label vectors use different class encodings".into(),
        ));
    }
    let classes = long.to_vec();
    Ok((
        LabelVector::with_classes(y1.labels().to_vec(), classes.clone())?,
        LabelVector::with_classes(y2.labels().to_vec(), classes)?,
    ))
}

pub(crate) fn check_inputs(ds: &Dataset, y1: &LabelVector, y2: &LabelVector) -> Result<()> {
    if ds.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    for y in [y1, y2] {
        if y.len() != ds.n_rows() {
            return Err(Error::LengthMismatch {
                left: ds.n_rows(),
                right: y.len(),
            });
        }
    }
    Ok(())
}

struct Builder<'a> {
    ds: &'a Dataset,
    ys: [&'a LabelVector; 2],
    max_depth: usize,
    mode: DivergenceMode,
    num_classes: usize,
    nodes: Vec<JstNode>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> NodeId {
        let [y1, y2] = self.ys;
        let h1 = histogram(&rows, y1.labels(), self.num_classes);
        let h2 = histogram(&rows, y2.labels(), self.num_classes);
        let n = rows.len();

        if !(is_pure(&h1) || is_pure(&h2) || depth >= self.max_depth) {
            if let (Some(s1), Some(s2)) = (
                best_split(self.ds, &rows, y1),
                best_split(self.ds, &rows, y2),
            ) {
                let mut joint = None;
                let diverge = match self.mode {
                    DivergenceMode::Simplified => {
                        should_diverge(s1.impurity, s2.impurity, None, self.mode)
                    }
                    // At zero joint impurity the inequality holds for any alpha, but the
                    // joint minimizer already separates both models, so with a negative
                    // alpha the split stays shared.
                    DivergenceMode::Alpha { alpha } => {
                        joint = joint_best_split(self.ds, &rows, y1, y2);
                        let j = joint.map(|s| s.impurity);
                        !(alpha < 0.0 && j == Some(0.0))
                            && should_diverge(s1.impurity, s2.impurity, j, self.mode)
                    }
                };
                log::debug!(
                    "depth {depth}, {n} rows: imp1={} imp2={} joint={:?} -> {}",
                    s1.impurity,
                    s2.impurity,
                    joint.map(|s| s.impurity),
                    if diverge { "or-node" } else { "shared" }
                );
                if !diverge {
                    let joint = joint
                        .or_else(|| joint_best_split(self.ds, &rows, y1, y2))
                        .expect("a separate split exists, so a joint one does");
                    let id = self.push_placeholder();
                    let (t_rows, f_rows) = partition(self.ds, &rows, &joint.condition);
                    drop(rows);
                    let t = self.grow(t_rows, depth + 1);
                    let f = self.grow(f_rows, depth + 1);
                    self.nodes[id] = JstNode::Shared {
                        condition: joint.condition,
                        children: [t, f],
                        histograms: [h1, h2],
                        n_samples: n,
                    };
                    return id;
                }
            }
        }
        self.diverge(rows, depth, h1, h2)
    }

    fn diverge(&mut self, rows: Vec<usize>, depth: usize, h1: Vec<usize>, h2: Vec<usize>) -> NodeId {
        let budget = self.max_depth.saturating_sub(depth);
        let fit = |y: &LabelVector| {
            dtree::fit_rows(self.ds, &rows, y, budget).expect("rows are non-empty and aligned")
        };
        let t1 = fit(self.ys[0]);
        let t2 = fit(self.ys[1]);
        let n = rows.len();
        if t1.nodes().len() == 1 && t2.nodes().len() == 1 {
            let id = self.nodes.len();
            self.nodes.push(JstNode::SharedLeaf {
                labels: [majority(&h1), majority(&h2)],
                histograms: [h1, h2],
                n_samples: n,
            });
            return id;
        }
        let id = self.push_placeholder();
        let c1 = graft(&mut self.nodes, &t1, 0, Model::First);
        let c2 = graft(&mut self.nodes, &t2, 0, Model::Second);
        self.nodes[id] = JstNode::Or {
            children: [c1, c2],
            histograms: [h1, h2],
            n_samples: n,
        };
        id
    }

    fn push_placeholder(&mut self) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(JstNode::ModelLeaf {
            model: Model::First,
            label: 0,
            histogram: Vec::new(),
            n_samples: 0,
        });
        id
    }
}

/// Copies the subtree of `tree` rooted at `id` into `nodes` in preorder.
pub(crate) fn graft(nodes: &mut Vec<JstNode>, tree: &DecisionTree, id: NodeId, model: Model) -> NodeId {
    let at = nodes.len();
    match &tree.nodes()[id] {
        TreeNode::Leaf {
            label,
            histogram,
            n_samples,
        } => nodes.push(JstNode::ModelLeaf {
            model,
            label: *label,
            histogram: histogram.clone(),
            n_samples: *n_samples,
        }),
        TreeNode::Split {
            condition,
            children,
            histogram,
            n_samples,
        } => {
            nodes.push(JstNode::ModelSplit {
                model,
                condition: *condition,
                children: [0, 0],
                histogram: histogram.clone(),
                n_samples: *n_samples,
            });
            let t = graft(nodes, tree, children[0], model);
            let f = graft(nodes, tree, children[1], model);
            nodes[at].children_mut().copy_from_slice(&[t, f]);
        }
    }
    at
}

/// Grows a joint surrogate tree over all rows of `ds`.
///
/// At each node of the shared prefix: if either label vector is pure, the
/// depth bound is reached, or no split exists, both models get independently
/// fitted subtrees under the remaining depth budget (a shared leaf when both
/// are single leaves). Otherwise [`should_diverge`] picks between an or-node
/// whose subtrees start with each model's own best split and a shared node on
/// [`joint_best_split`].
pub fn build(
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
    max_depth: usize,
    mode: DivergenceMode,
) -> Result<JointSurrogateTree> {
    check_inputs(ds, y1, y2)?;
    let (y1, y2) = align_classes(y1, y2)?;
    let mut b = Builder {
        ds,
        ys: [&y1, &y2],
        max_depth,
        mode,
        num_classes: y1.num_classes(),
        nodes: Vec::new(),
    };
    b.grow(dtree::all_rows(ds.n_rows()), 0);
    Ok(JointSurrogateTree {
        nodes: b.nodes,
        columns: ds.columns().to_vec(),
        classes: y1.classes().to_vec(),
        max_depth,
        mode,
        provenance: Provenance {
            fingerprint: training_fingerprint(ds, &y1, &y2),
            prediction_columns: ["pred1".into(), "pred2".into()],
        },
        refinement_steps: 0,
    })
}

impl JointSurrogateTree {
    pub(crate) fn from_parts(
        nodes: Vec<JstNode>,
        template: &JointSurrogateTree,
        refinement_steps: usize,
    ) -> Self {
        let mut out = JointSurrogateTree {
            nodes,
            refinement_steps,
            ..template.clone()
        };
        out.renumber();
        out
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[JstNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&JstNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn mode(&self) -> DivergenceMode {
        self.mode
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn refinement_steps(&self) -> usize {
        self.refinement_steps
    }

    pub fn set_prediction_columns(&mut self, first: &str, second: &str) {
        self.provenance.prediction_columns = [first.to_owned(), second.to_owned()];
    }

    /// Maximum number of decision edges (shared or model splits) on any
    /// root-to-leaf path; or-node edges do not count.
    pub fn depth(&self) -> usize {
        fn go(t: &JointSurrogateTree, id: NodeId) -> usize {
            match &t.nodes[id] {
                JstNode::Shared { children, .. } | JstNode::ModelSplit { children, .. } => {
                    1 + go(t, children[0]).max(go(t, children[1]))
                }
                JstNode::Or { children, .. } => go(t, children[0]).max(go(t, children[1])),
                JstNode::SharedLeaf { .. } | JstNode::ModelLeaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn or_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], JstNode::Or { .. }))
            .collect()
    }

    /// Leaf reached by `row` when following `model`'s branches.
    pub fn leaf_for(&self, model: Model, row: &[f64]) -> Result<NodeId> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let mut id = 0;
        loop {
            id = match &self.nodes[id] {
                JstNode::Shared {
                    condition,
                    children,
                    ..
                }
                | JstNode::ModelSplit {
                    condition,
                    children,
                    ..
                } => {
                    if condition.goes_true(row) {
                        children[0]
                    } else {
                        children[1]
                    }
                }
                JstNode::Or { children, .. } => children[model.slot()],
                JstNode::SharedLeaf { .. } | JstNode::ModelLeaf { .. } => return Ok(id),
            };
        }
    }

    /// Label predicted by `model`'s surrogate.
    pub fn surrogate_predict(&self, model: Model, row: &[f64]) -> Result<usize> {
        let leaf = self.leaf_for(model, row)?;
        Ok(match &self.nodes[leaf] {
            JstNode::SharedLeaf { labels, .. } => labels[model.slot()],
            JstNode::ModelLeaf { label, .. } => *label,
            _ => unreachable!("leaf_for stops at a leaf"),
        })
    }

    /// `model`'s surrogate as a standalone tree: shared nodes kept, or-nodes
    /// replaced by that model's subtree, shared leaves by that model's label.
    pub fn surrogate(&self, model: Model) -> DecisionTree {
        fn go(t: &JointSurrogateTree, id: NodeId, m: Model, out: &mut Vec<TreeNode>) -> NodeId {
            if let JstNode::Or { children, .. } = &t.nodes[id] {
                return go(t, children[m.slot()], m, out);
            }
            let at = out.len();
            match &t.nodes[id] {
                JstNode::Shared {
                    condition,
                    children,
                    histograms,
                    n_samples,
                } => {
                    out.push(TreeNode::Leaf {
                        label: 0,
                        histogram: Vec::new(),
                        n_samples: 0,
                    });
                    let tc = go(t, children[0], m, out);
                    let fc = go(t, children[1], m, out);
                    out[at] = TreeNode::Split {
                        condition: *condition,
                        children: [tc, fc],
                        histogram: histograms[m.slot()].clone(),
                        n_samples: *n_samples,
                    };
                }
                JstNode::ModelSplit {
                    condition,
                    children,
                    histogram,
                    n_samples,
                    ..
                } => {
                    out.push(TreeNode::Leaf {
                        label: 0,
                        histogram: Vec::new(),
                        n_samples: 0,
                    });
                    let tc = go(t, children[0], m, out);
                    let fc = go(t, children[1], m, out);
                    out[at] = TreeNode::Split {
                        condition: *condition,
                        children: [tc, fc],
                        histogram: histogram.clone(),
                        n_samples: *n_samples,
                    };
                }
                JstNode::SharedLeaf {
                    labels,
                    histograms,
                    n_samples,
                } => out.push(TreeNode::Leaf {
                    label: labels[m.slot()],
                    histogram: histograms[m.slot()].clone(),
                    n_samples: *n_samples,
                }),
                JstNode::ModelLeaf {
                    label,
                    histogram,
                    n_samples,
                    ..
                } => out.push(TreeNode::Leaf {
                    label: *label,
                    histogram: histogram.clone(),
                    n_samples: *n_samples,
                }),
                JstNode::Or { .. } => unreachable!(),
            }
            at
        }
        let mut out = Vec::new();
        go(self, 0, model, &mut out);
        let tree = DecisionTree::from_nodes(
            out,
            self.n_features(),
            self.num_classes(),
            self.max_depth,
        )
        .expect("restriction of a valid JST is a valid tree");
        let depth = tree.depth();
        if depth > self.max_depth {
            DecisionTree::from_nodes(
                tree.nodes().to_vec(),
                self.n_features(),
                self.num_classes(),
                depth,
            )
            .expect("same nodes")
        } else {
            tree
        }
    }

    /// Parent of each node with the edge taken: `Some(true)` / `Some(false)`
    /// for decision edges, `None` for or-edges.
    pub fn parents(&self) -> Vec<Option<(NodeId, Option<bool>)>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                JstNode::Shared { children, .. } | JstNode::ModelSplit { children, .. } => {
                    parents[children[0]] = Some((id, Some(true)));
                    parents[children[1]] = Some((id, Some(false)));
                }
                JstNode::Or { children, .. } => {
                    parents[children[0]] = Some((id, None));
                    parents[children[1]] = Some((id, None));
                }
                _ => {}
            }
        }
        parents
    }

    /// Conjunction of all decision-edge conditions from the root to `id`.
    pub fn path_condition(&self, id: NodeId) -> Result<PathCondition> {
        if id >= self.nodes.len() {
            return Err(Error::UnknownNode(id));
        }
        let parents = self.parents();
        let mut pc = PathCondition::unconstrained();
        let mut cur = id;
        while let Some((p, edge)) = parents[cur] {
            if let (Some(took_true), Some(cond)) = (edge, self.condition(p)) {
                pc.constrain(&cond, took_true);
            }
            cur = p;
        }
        Ok(pc)
    }

    pub(crate) fn condition(&self, id: NodeId) -> Option<SplitCondition> {
        match &self.nodes[id] {
            JstNode::Shared { condition, .. } | JstNode::ModelSplit { condition, .. } => {
                Some(*condition)
            }
            _ => None,
        }
    }

    /// Rewrites the arena into preorder, dropping unreachable nodes.
    pub(crate) fn renumber(&mut self) {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            order.push(id);
            for &c in self.nodes[id].children().iter().rev() {
                stack.push(c);
            }
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let mut nodes: Vec<JstNode> = order.iter().map(|&old| self.nodes[old].clone()).collect();
        for n in &mut nodes {
            for c in n.children_mut() {
                *c = new_id[*c];
            }
        }
        self.nodes = nodes;
    }

    /// Serializable form: a flat node array in preorder.
    pub fn to_document(&self) -> JstDocument {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, node)| {
                let mut rec = JstNodeRecord {
                    id,
                    kind: node.kind().to_owned(),
                    n: node.n_samples(),
                    ..Default::default()
                };
                match node {
                    JstNode::Shared {
                        condition,
                        children,
                        histograms,
                        ..
                    } => {
                        rec.feature = Some(condition.feature);
                        rec.threshold = Some(condition.threshold);
                        rec.children = Some(children.to_vec());
                        rec.histograms = Some(histograms.clone());
                    }
                    JstNode::Or {
                        children,
                        histograms,
                        ..
                    } => {
                        rec.children = Some(children.to_vec());
                        rec.histograms = Some(histograms.clone());
                    }
                    JstNode::SharedLeaf {
                        labels, histograms, ..
                    } => {
                        rec.labels = Some(*labels);
                        rec.histograms = Some(histograms.clone());
                    }
                    JstNode::ModelSplit {
                        condition,
                        children,
                        histogram,
                        ..
                    } => {
                        rec.feature = Some(condition.feature);
                        rec.threshold = Some(condition.threshold);
                        rec.children = Some(children.to_vec());
                        rec.histogram = Some(histogram.clone());
                    }
                    JstNode::ModelLeaf {
                        label, histogram, ..
                    } => {
                        rec.label = Some(*label);
                        rec.histogram = Some(histogram.clone());
                    }
                }
                rec
            })
            .collect();
        JstDocument {
            schema_version: crate::SCHEMA_VERSION,
            max_depth: self.max_depth,
            mode: self.mode,
            refinement_steps: self.refinement_steps,
            provenance: self.provenance.clone(),
            columns: self.columns.clone(),
            classes: self.classes.clone(),
            nodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JstDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Rebuilds a tree from its document, checking structure: ids in order,
    /// children in range and each node reached exactly once, no shared node
    /// below an or-node, model nodes only below the matching or-branch.
    pub fn from_document(doc: JstDocument) -> Result<Self> {
        let schema = |msg: String| Error::Schema(msg);
        if doc.schema_version != crate::SCHEMA_VERSION {
            return Err(schema(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        if doc.nodes.is_empty() {
            return Err(schema("no nodes".into()));
        }
        let d = doc.columns.len();
        let k = doc.classes.len();
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (i, rec) in doc.nodes.into_iter().enumerate() {
            if rec.id != i {
                return Err(schema(format!("node {i} carries id {}", rec.id)));
            }
            let missing = |field: &str| schema(format!("node {i} ({}) lacks `{field}`", rec.kind));
            let condition = || -> Result<SplitCondition> {
                let feature = rec.feature.ok_or_else(|| missing("feature"))?;
                let threshold = rec.threshold.ok_or_else(|| missing("threshold"))?;
                if feature >= d {
                    return Err(schema(format!("node {i}: feature {feature} out of range")));
                }
                Ok(SplitCondition { feature, threshold })
            };
            let children = || -> Result<[NodeId; 2]> {
                match rec.children.as_deref() {
                    Some(&[a, b]) => Ok([a, b]),
                    _ => Err(missing("children")),
                }
            };
            let hist = || -> Result<Vec<usize>> {
                let h = rec.histogram.clone().ok_or_else(|| missing("histogram"))?;
                (h.len() == k).then_some(h).ok_or_else(|| schema(format!("node {i}: histogram length")))
            };
            let hists = || -> Result<[Vec<usize>; 2]> {
                let h = rec.histograms.clone().ok_or_else(|| missing("histograms"))?;
                if h.iter().any(|x| x.len() != k) {
                    return Err(schema(format!("node {i}: histogram length")));
                }
                Ok(h)
            };
            let label_ok = |l: usize| {
                if l < k {
                    Ok(l)
                } else {
                    Err(schema(format!("node {i}: label {l} out of range")))
                }
            };
            let n_samples = rec.n;
            let node = match rec.kind.as_str() {
                "shared" => JstNode::Shared {
                    condition: condition()?,
                    children: children()?,
                    histograms: hists()?,
                    n_samples,
                },
                "or" => JstNode::Or {
                    children: children()?,
                    histograms: hists()?,
                    n_samples,
                },
                "shared_leaf" => {
                    let labels = rec.labels.ok_or_else(|| missing("labels"))?;
                    JstNode::SharedLeaf {
                        labels: [label_ok(labels[0])?, label_ok(labels[1])?],
                        histograms: hists()?,
                        n_samples,
                    }
                }
                "m1_split" | "m2_split" => JstNode::ModelSplit {
                    model: if rec.kind == "m1_split" { Model::First } else { Model::Second },
                    condition: condition()?,
                    children: children()?,
                    histogram: hist()?,
                    n_samples,
                },
                "m1_leaf" | "m2_leaf" => JstNode::ModelLeaf {
                    model: if rec.kind == "m1_leaf" { Model::First } else { Model::Second },
                    label: label_ok(rec.label.ok_or_else(|| missing("label"))?)?,
                    histogram: hist()?,
                    n_samples,
                },
                other => return Err(schema(format!("node {i}: unknown kind `{other}`"))),
            };
            nodes.push(node);
        }

        // Structural walk: (node, Some(model) once below an or-node).
        let mut seen = vec![false; nodes.len()];
        let mut stack: Vec<(NodeId, Option<Model>)> = vec![(0, None)];
        while let Some((id, under)) = stack.pop() {
            if id >= nodes.len() || seen[id] {
                return Err(schema(format!("bad child reference {id}")));
            }
            seen[id] = true;
            let node = &nodes[id];
            match (node, under) {
                (JstNode::Shared { children, .. }, None) => {
                    stack.push((children[1], None));
                    stack.push((children[0], None));
                }
                (JstNode::Or { children, .. }, None) => {
                    stack.push((children[1], Some(Model::Second)));
                    stack.push((children[0], Some(Model::First)));
                }
                (JstNode::SharedLeaf { .. }, None) => {}
                (JstNode::ModelSplit { model, children, .. }, Some(m)) if *model == m => {
                    stack.push((children[1], Some(m)));
                    stack.push((children[0], Some(m)));
                }
                (JstNode::ModelLeaf { model, .. }, Some(m)) if *model == m => {}
                _ => {
                    return Err(schema(format!(
                        "node {id} ({}) is not allowed at this position",
                        node.kind()
                    )))
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(schema("unreachable nodes".into()));
        }
        Ok(JointSurrogateTree {
            nodes,
            columns: doc.columns,
            classes: doc.classes,
            max_depth: doc.max_depth,
            mode: doc.mode,
            provenance: doc.provenance,
            refinement_steps: doc.refinement_steps,
        })
    }

    /// The single label shared by every leaf (both models) below `id`, if any.
    fn uniform_label(&self, id: NodeId) -> Option<usize> {
        match &self.nodes[id] {
            JstNode::SharedLeaf { labels, .. } => (labels[0] == labels[1]).then_some(labels[0]),
            JstNode::ModelLeaf { label, .. } => Some(*label),
            node => {
                let mut it = node.children().iter().map(|&c| self.uniform_label(c));
                let first = it.next()??;
                it.all(|l| l == Some(first)).then_some(first)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JstDocument {
    pub schema_version: u32,
    pub max_depth: usize,
    pub mode: DivergenceMode,
    pub refinement_steps: usize,
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub classes: Vec<String>,
    pub nodes: Vec<JstNodeRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JstNodeRecord {
    pub id: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histograms: Option<[Vec<usize>; 2]>,
    pub n: usize,
}

const SHARED_FILL: &str = "white";
const MODEL_FILL: [&str; 2] = ["#ffb6c1", "#ffa07a"];
const LABEL_FILL: [&str; 8] = [
    "#faebd7", "#e0ffff", "#98fb98", "#dda0dd", "#f0e68c", "#add8e6", "#ffdab9", "#d3d3d3",
];

fn label_fill(label: usize) -> &'static str {
    LABEL_FILL[label % LABEL_FILL.len()]
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Graphviz rendering.
///
/// Shared decision nodes are white ovals, or-nodes dashed circles with dashed
/// edges to the two subtrees, model-1 and model-2 split nodes pink and orange
/// ovals, leaves rectangles filled by label. A shared leaf whose labels differ
/// is drawn striped with both label colors. With `hide_agreeing`, any
/// non-root part of the shared prefix below which both models predict one
/// single label is omitted.
pub fn export_dot(jst: &JointSurrogateTree, names: &[String], hide_agreeing: bool) -> String {
    let name = |f: usize| names.get(f).cloned().unwrap_or_else(|| format!("X[{f}]"));
    let class = |l: usize| {
        jst.classes
            .get(l)
            .cloned()
            .unwrap_or_else(|| l.to_string())
    };
    let mut out = String::new();
    out.push_str("digraph jst {\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");

    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        let node = &jst.nodes[id];
        let hist = |h: &[usize]| {
            h.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let (label, attrs) = match node {
            JstNode::Shared { condition, .. } => (
                format!("{} < {}", name(condition.feature), condition.threshold),
                format!("shape=ellipse, style=filled, fillcolor=\"{SHARED_FILL}\""),
            ),
            JstNode::Or { .. } => (
                String::new(),
                "shape=circle, style=dashed, width=0.3".to_owned(),
            ),
            JstNode::SharedLeaf {
                labels, histograms, ..
            } => {
                let text = format!(
                    "M1: {} [{}]\nM2: {} [{}]",
                    class(labels[0]),
                    hist(&histograms[0]),
                    class(labels[1]),
                    hist(&histograms[1])
                );
                let attrs = if labels[0] == labels[1] {
                    format!("shape=box, style=filled, fillcolor=\"{}\"", label_fill(labels[0]))
                } else {
                    format!(
                        "shape=box, style=striped, fillcolor=\"{}:{}\"",
                        label_fill(labels[0]),
                        label_fill(labels[1])
                    )
                };
                (text, attrs)
            }
            JstNode::ModelSplit {
                model, condition, ..
            } => (
                format!("{} < {}", name(condition.feature), condition.threshold),
                format!(
                    "shape=ellipse, style=filled, fillcolor=\"{}\"",
                    MODEL_FILL[model.slot()]
                ),
            ),
            JstNode::ModelLeaf {
                model,
                label,
                histogram,
                ..
            } => (
                format!(
                    "{}: {} [{}]",
                    model.tag().to_uppercase(),
                    class(*label),
                    hist(histogram)
                ),
                format!(
                    "shape=box, style=filled, fillcolor=\"{}\", color=\"{}\", penwidth=2",
                    label_fill(*label),
                    MODEL_FILL[model.slot()]
                ),
            ),
        };
        let _ = writeln!(out, "  n{id} [label=\"{}\", {attrs}];", dot_escape(&label));

        // Only children of shared decision nodes can be hidden; everything
        // below an or-node is a disagreement region or part of one.
        let visible: Vec<(usize, NodeId)> = node
            .children()
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, c)| {
                !(hide_agreeing
                    && matches!(node, JstNode::Shared { .. })
                    && jst.uniform_label(c).is_some())
            })
            .collect();
        for &(k, c) in &visible {
            let edge = match node {
                JstNode::Or { .. } => format!("style=dashed, label=\"M{}\"", k + 1),
                _ => format!("label=\"{}\"", if k == 0 { "true" } else { "false" }),
            };
            let _ = writeln!(out, "  n{id} -> n{c} [{edge}];");
        }
        stack.extend(visible.iter().rev().map(|&(_, c)| c));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        Dataset::new((0..d).map(|i| format!("f{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn simplified_divergence() {
        assert!(should_diverge(0.0, 0.8, None, DivergenceMode::Simplified));
        assert!(!should_diverge(0.1, 0.8, None, DivergenceMode::Simplified));
    }

    #[test]
    fn negative_alpha_with_positive_joint_never_diverges() {
        let m = DivergenceMode::Alpha { alpha: -0.1 };
        assert!(!should_diverge(0.2, 0.3, Some(0.7), m));
        assert!(!should_diverge(0.0, 0.3, Some(0.7), m));
    }

    #[test]
    fn negative_alpha_shares_a_perfect_joint_split() {
        let x = ds((0..4).map(|i| vec![i as f64]).collect());
        let y1 = LabelVector::from_ids(vec![0, 0, 1, 1]);
        let y2 = LabelVector::from_ids(vec![1, 1, 0, 0]);
        assert!(should_diverge(0.0, 0.0, Some(0.0), DivergenceMode::Alpha { alpha: -1.0 }));
        let jst = build(&x, &y1, &y2, 3, DivergenceMode::Alpha { alpha: -1.0 }).unwrap();
        assert!(matches!(jst.node(jst.root()).unwrap(), JstNode::Shared { .. }));
        let jst = build(&x, &y1, &y2, 3, DivergenceMode::Alpha { alpha: 0.5 }).unwrap();
        assert!(matches!(jst.node(jst.root()).unwrap(), JstNode::Or { .. }));
    }

    #[test]
    fn alpha_one_diverges_on_real_minimizations() {
        let x = ds((0..8).map(|i| vec![i as f64, ((i * 5) % 8) as f64]).collect());
        let y1 = LabelVector::from_ids(vec![0, 1, 0, 1, 1, 0, 0, 1]);
        let y2 = LabelVector::from_ids(vec![1, 1, 0, 0, 1, 0, 1, 0]);
        let rows = dtree::all_rows(8);
        let i1 = best_split(&x, &rows, &y1).unwrap().impurity;
        let i2 = best_split(&x, &rows, &y2).unwrap().impurity;
        let j = joint_best_split(&x, &rows, &y1, &y2).unwrap().impurity;
        assert!(should_diverge(i1, i2, Some(j), DivergenceMode::Alpha { alpha: 1.0 }));
    }

    #[test]
    fn joint_split_of_identical_labels_matches_single() {
        let x = ds(vec![
            vec![1.0, 5.0],
            vec![2.0, 3.0],
            vec![3.0, 4.0],
            vec![4.0, 1.0],
            vec![5.0, 2.0],
        ]);
        let y = LabelVector::from_ids(vec![0, 1, 1, 0, 0]);
        let rows = dtree::all_rows(5);
        let single = best_split(&x, &rows, &y).unwrap();
        let joint = joint_best_split(&x, &rows, &y, &y).unwrap();
        assert_eq!(single.condition, joint.condition);
        assert_eq!(joint.impurity, 2.0 * single.impurity);
    }

    #[test]
    fn identical_labels_produce_no_disagreement() {
        let x = ds((0..12).map(|i| vec![(i % 4) as f64, (i / 4) as f64]).collect());
        let y = LabelVector::from_ids((0..12).map(|i| usize::from(i % 3 == 0)).collect());
        let jst = build(&x, &y, &y, 4, DivergenceMode::Simplified).unwrap();
        for r in x.rows() {
            assert_eq!(
                jst.surrogate_predict(Model::First, r).unwrap(),
                jst.surrogate_predict(Model::Second, r).unwrap()
            );
        }
    }

    #[test]
    fn alpha_one_is_separate_trees() {
        let x = ds((0..16).map(|i| vec![i as f64, ((i * 7) % 16) as f64]).collect());
        let y1 = LabelVector::from_ids((0..16).map(|i| usize::from(i % 5 < 2)).collect());
        let y2 = LabelVector::from_ids((0..16).map(|i| usize::from((i * 7) % 16 > 9)).collect());
        let jst = build(&x, &y1, &y2, 3, DivergenceMode::Alpha { alpha: 1.0 }).unwrap();
        assert!(matches!(jst.nodes()[0], JstNode::Or { .. }));
        let t1 = dtree::fit(&x, &y1, 3).unwrap();
        let t2 = dtree::fit(&x, &y2, 3).unwrap();
        assert_eq!(jst.surrogate(Model::First).nodes(), t1.nodes());
        assert_eq!(jst.surrogate(Model::Second).nodes(), t2.nodes());
    }

    #[test]
    fn shared_leaf_when_both_pure() {
        let x = ds(vec![vec![0.0], vec![1.0]]);
        let y1 = LabelVector::from_ids(vec![0, 0]);
        let y2 = LabelVector::from_ids(vec![1, 1]);
        let jst = build(&x, &y1, &y2, 6, DivergenceMode::Simplified).unwrap();
        assert_eq!(jst.nodes().len(), 1);
        assert!(matches!(jst.nodes()[0], JstNode::SharedLeaf { labels: [0, 1], .. }));
        let dot = export_dot(&jst, jst.columns(), false);
        assert_eq!(dot.matches("shape=box").count(), 1);
    }

    #[test]
    fn length_mismatch_and_empty_input() {
        let x = ds(vec![vec![0.0], vec![1.0]]);
        let y1 = LabelVector::from_ids(vec![0, 0]);
        let y2 = LabelVector::from_ids(vec![1]);
        assert!(matches!(
            build(&x, &y1, &y2, 2, DivergenceMode::Simplified),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let x = ds((0..20).map(|i| vec![(i % 5) as f64, (i % 7) as f64]).collect());
        let y1 = LabelVector::from_ids((0..20).map(|i| usize::from(i % 5 > 2)).collect());
        let y2 = LabelVector::from_ids((0..20).map(|i| usize::from(i % 7 > 3 || i % 5 == 4)).collect());
        let jst = build(&x, &y1, &y2, 4, DivergenceMode::Simplified).unwrap();
        let text = jst.to_json();
        let back = JointSurrogateTree::from_json(&text).unwrap();
        assert_eq!(back, jst);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn from_document_rejects_shared_below_or() {
        let x = ds(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let y1 = LabelVector::from_ids(vec![0, 1, 1]);
        let y2 = LabelVector::from_ids(vec![0, 0, 1]);
        let jst = build(&x, &y1, &y2, 2, DivergenceMode::Alpha { alpha: 1.0 }).unwrap();
        let mut doc = jst.to_document();
        assert_eq!(doc.nodes[0].kind, "or");
        doc.nodes[1].kind = "shared".into();
        doc.nodes[1].histograms = Some([vec![1, 2], vec![2, 1]]);
        assert!(matches!(
            JointSurrogateTree::from_document(doc),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn invalid_model_index() {
        assert!(Model::from_index(0).is_err());
        assert_eq!(Model::from_index(2).unwrap(), Model::Second);
    }
}
