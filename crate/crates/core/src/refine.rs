//! Refinement of difference regions.
//!
//! One iteration takes every leaf that contributes to a difference rule and,
//! if its training rows are impure for the owning model, splits it once more
//! on that model's best split. Leaves outside all rules are left alone, so
//! the agreement regions keep their shape while the disagreement regions get
//! sharper.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diffrules::extract;
use crate::dtree::{best_split, histogram, is_pure, majority, partition, NodeId};
use crate::jst::{align_classes, check_inputs, training_fingerprint, JointSurrogateTree, JstNode, Model};
use crate::tabular::{Dataset, LabelVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementReport {
    /// 1-based number of the attempted iteration.
    pub iteration: usize,
    pub leaves_split: usize,
    pub rules_before: usize,
    pub rules_after: usize,
}

/// Leaves referenced by at least one rule, keyed by the model whose
/// prediction they carry.
fn diff_leaves(jst: &JointSurrogateTree) -> BTreeSet<(NodeId, Model)> {
    let mut out = BTreeSet::new();
    for r in extract(jst).rules {
        out.insert((r.provenance.leaves[0], Model::First));
        out.insert((r.provenance.leaves[1], Model::Second));
    }
    out
}

/// A one-level subtree for `model` over `rows`, or `None` if the rows are
/// pure or cannot be separated.
fn split_leaf(
    ds: &Dataset,
    rows: &[usize],
    y: &LabelVector,
    model: Model,
    nodes: &mut Vec<JstNode>,
) -> Option<JstNode> {
    let k = y.num_classes();
    let hist = histogram(rows, y.labels(), k);
    if is_pure(&hist) {
        return None;
    }
    let split = best_split(ds, rows, y)?;
    let (t, f) = partition(ds, rows, &split.condition);
    let mut leaf = |side: &[usize]| {
        let h = histogram(side, y.labels(), k);
        nodes.push(JstNode::ModelLeaf {
            model,
            label: majority(&h),
            histogram: h,
            n_samples: side.len(),
        });
        nodes.len() - 1
    };
    let children = [leaf(&t), leaf(&f)];
    Some(JstNode::ModelSplit {
        model,
        condition: split.condition,
        children,
        histogram: hist,
        n_samples: rows.len(),
    })
}

fn leaf_node(model: Model, rows: &[usize], y: &LabelVector) -> JstNode {
    let h = histogram(rows, y.labels(), y.num_classes());
    JstNode::ModelLeaf {
        model,
        label: majority(&h),
        histogram: h,
        n_samples: rows.len(),
    }
}

/// One refinement iteration.
///
/// `ds`, `y1` and `y2` must be the data the tree was built from; anything
/// else is rejected as stale.
pub fn refine_once(
    jst: &JointSurrogateTree,
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
) -> Result<(JointSurrogateTree, RefinementReport)> {
    check_inputs(ds, y1, y2)?;
    let (y1, y2) = align_classes(y1, y2)?;
    let found = training_fingerprint(ds, &y1, &y2);
    if found != jst.provenance().fingerprint {
        return Err(Error::StaleInputs {
            expected: jst.provenance().fingerprint.clone(),
            found,
        });
    }
    let ys = [&y1, &y2];
    let rules_before = extract(jst).rules.len();
    let targets = diff_leaves(jst);

    // Training rows reaching each leaf, per model.
    let mut reach: [Vec<Vec<usize>>; 2] = [
        vec![Vec::new(); jst.nodes().len()],
        vec![Vec::new(); jst.nodes().len()],
    ];
    for (i, row) in ds.rows().enumerate() {
        for m in Model::BOTH {
            reach[m.slot()][jst.leaf_for(m, row)?].push(i);
        }
    }

    let mut nodes = jst.nodes().to_vec();
    let mut leaves_split = 0;
    for id in 0..jst.nodes().len() {
        match &jst.nodes()[id] {
            JstNode::ModelLeaf { model, .. } if targets.contains(&(id, *model)) => {
                let m = *model;
                if let Some(node) = split_leaf(ds, &reach[m.slot()][id], ys[m.slot()], m, &mut nodes) {
                    nodes[id] = node;
                    leaves_split += 1;
                }
            }
            JstNode::SharedLeaf { histograms, n_samples, .. }
                if targets.contains(&(id, Model::First)) =>
            {
                let rows = &reach[0][id];
                let mut subtrees = Vec::with_capacity(2);
                let mut any = false;
                for m in Model::BOTH {
                    let y = ys[m.slot()];
                    let node = match split_leaf(ds, rows, y, m, &mut nodes) {
                        Some(n) => {
                            any = true;
                            leaves_split += 1;
                            n
                        }
                        None => leaf_node(m, rows, y),
                    };
                    nodes.push(node);
                    subtrees.push(nodes.len() - 1);
                }
                if any {
                    nodes[id] = JstNode::Or {
                        children: [subtrees[0], subtrees[1]],
                        histograms: histograms.clone(),
                        n_samples: *n_samples,
                    };
                }
            }
            _ => {}
        }
    }

    log::debug!("refinement split {leaves_split} of {} diff leaves", targets.len());
    let steps = jst.refinement_steps() + usize::from(leaves_split > 0);
    let refined = JointSurrogateTree::from_parts(nodes, jst, steps);
    let rules_after = extract(&refined).rules.len();
    Ok((
        refined,
        RefinementReport {
            iteration: jst.refinement_steps() + 1,
            leaves_split,
            rules_before,
            rules_after,
        },
    ))
}

/// Up to `iterations` rounds of [`refine_once`], stopping early once no leaf
/// can be split.
pub fn refine(
    jst: &JointSurrogateTree,
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
    iterations: usize,
) -> Result<(JointSurrogateTree, Vec<RefinementReport>)> {
    let mut current = jst.clone();
    let mut reports = Vec::new();
    for _ in 0..iterations {
        let (next, report) = refine_once(&current, ds, y1, y2)?;
        reports.push(report);
        current = next;
        if report.leaves_split == 0 {
            break;
        }
    }
    Ok((current, reports))
}
