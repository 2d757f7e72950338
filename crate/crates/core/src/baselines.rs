//! Reference methods for comparison with the joint tree.
//!
//! `direct_dt_rules` fits one tree on the disagreement indicator and reads a
//! rule off every leaf that predicts "differ". `separate_rules` fits one tree
//! per model and intersects every pair of leaves with different labels.

use std::collections::BTreeMap;

use crate::diffrules::{intersect, DiffRule, DiffRuleset, RuleProvenance, RuleSource};
use crate::dtree::{self, DecisionTree, TreeNode};
use crate::jst::{align_classes, check_inputs, training_fingerprint};
use crate::metrics::true_differences;
use crate::tabular::{Dataset, LabelVector};
use crate::Result;

fn source(method: &str, ds: &Dataset, y1: &LabelVector, y2: &LabelVector, max_depth: usize) -> RuleSource {
    RuleSource {
        method: method.into(),
        fingerprint: training_fingerprint(ds, y1, y2),
        prediction_columns: ["pred1".into(), "pred2".into()],
        mode: None,
        max_depth,
        refinement_steps: 0,
    }
}

fn leaf_label(tree: &DecisionTree, id: usize) -> usize {
    match &tree.nodes()[id] {
        TreeNode::Leaf { label, .. } => *label,
        TreeNode::Split { .. } => unreachable!("not a leaf"),
    }
}

/// Rules from a single tree trained on `y1 != y2`.
///
/// Each rule's labels are the most frequent disagreeing `(y1, y2)` pair among
/// its training rows (smallest pair on ties).
pub fn direct_dt_rules(
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
    max_depth: usize,
) -> Result<DiffRuleset> {
    check_inputs(ds, y1, y2)?;
    let (y1, y2) = align_classes(y1, y2)?;
    let truth = true_differences(&y1, &y2)?;
    let z = LabelVector::with_classes(
        truth.iter().map(|&d| usize::from(d)).collect(),
        vec!["agree".into(), "differ".into()],
    )?;
    let tree = dtree::fit(ds, &z, max_depth)?;

    let mut pairs: BTreeMap<usize, BTreeMap<[usize; 2], usize>> = BTreeMap::new();
    for (i, row) in ds.rows().enumerate() {
        if truth[i] {
            let leaf = tree.leaf_of(row)?;
            *pairs
                .entry(leaf)
                .or_default()
                .entry([y1.labels()[i], y2.labels()[i]])
                .or_default() += 1;
        }
    }

    let mut rules = Vec::new();
    for leaf in tree.leaves() {
        if leaf_label(&tree, leaf) != 1 {
            continue;
        }
        let labels = pairs
            .get(&leaf)
            .and_then(|m| m.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))))
            .map(|(p, _)| *p)
            .expect("a leaf predicting `differ` holds disagreeing rows");
        rules.push(DiffRule::from_condition(
            &tree.path_condition(leaf)?,
            labels,
            RuleProvenance {
                or_node: 0,
                leaves: [leaf, leaf],
            },
        ));
    }
    Ok(DiffRuleset {
        rules,
        columns: ds.columns().to_vec(),
        classes: y1.classes().to_vec(),
        source: source("direct_dt", ds, &y1, &y2, max_depth),
    })
}

/// Rules from two independently fitted trees: every pair of leaves with
/// different labels whose regions overlap.
///
/// Provenance ids follow the layout of a joint tree whose root is an
/// or-node: 0 for the root, then the first tree's nodes, then the second's.
pub fn separate_rules(
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
    max_depth: usize,
) -> Result<DiffRuleset> {
    check_inputs(ds, y1, y2)?;
    let (y1, y2) = align_classes(y1, y2)?;
    let t1 = dtree::fit(ds, &y1, max_depth)?;
    let t2 = dtree::fit(ds, &y2, max_depth)?;
    let offset2 = 1 + t1.nodes().len();

    let mut rules = Vec::new();
    for l1 in t1.leaves() {
        let pc1 = t1.path_condition(l1)?;
        let a = leaf_label(&t1, l1);
        for l2 in t2.leaves() {
            let b = leaf_label(&t2, l2);
            if a == b {
                continue;
            }
            if let Some(c) = intersect(&pc1, &t2.path_condition(l2)?) {
                rules.push(DiffRule::from_condition(
                    &c,
                    [a, b],
                    RuleProvenance {
                        or_node: 0,
                        leaves: [1 + l1, offset2 + l2],
                    },
                ));
            }
        }
    }
    Ok(DiffRuleset {
        rules,
        columns: ds.columns().to_vec(),
        classes: y1.classes().to_vec(),
        source: source("separate", ds, &y1, &y2, max_depth),
    })
}
