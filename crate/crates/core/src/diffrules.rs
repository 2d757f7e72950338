//! Difference rules extracted from a joint surrogate tree.
//!
//! A rule is a conjunction of axis-aligned predicates describing a region
//! where the two surrogates predict different labels. Rules come from pairs
//! of leaves below the same or-node whose path conditions overlap, and from
//! shared leaves whose two labels differ.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dtree::{NodeId, PathCondition};
use crate::jst::{DivergenceMode, JointSurrogateTree, JstNode};
use crate::tabular::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Ge => ">=",
            Op::Lt => "<",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predicate {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Predicate {
    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.op {
            Op::Ge => v >= self.threshold,
            Op::Lt => v < self.threshold,
        }
    }

    fn key(&self) -> (usize, Op, u64) {
        (self.feature, self.op, self.threshold.to_bits())
    }
}

/// Where a rule came from. For a shared leaf, `or_node` and both `leaves`
/// are the leaf itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleProvenance {
    pub or_node: NodeId,
    pub leaves: [NodeId; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffRule {
    /// Sorted by feature, `>=` before `<` on the same feature.
    pub predicates: Vec<Predicate>,
    /// Label of the first and second surrogate inside the region.
    pub labels: [usize; 2],
    pub provenance: RuleProvenance,
}

impl DiffRule {
    pub fn from_condition(pc: &PathCondition, labels: [usize; 2], provenance: RuleProvenance) -> Self {
        DiffRule {
            predicates: predicates_of(pc),
            labels,
            provenance,
        }
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.holds(x))
    }

    /// `name >= t AND name < u => M1: a, M2: b`
    pub fn describe(&self, columns: &[String], classes: &[String]) -> String {
        let body = if self.predicates.is_empty() {
            "TRUE".to_owned()
        } else {
            self.predicates
                .iter()
                .map(|p| format!("{} {} {}", column_name(columns, p.feature), p.op, p.threshold))
                .collect::<Vec<_>>()
                .join(" AND ")
        };
        let class = |l: usize| classes.get(l).cloned().unwrap_or_else(|| l.to_string());
        format!(
            "{body} => M1: {}, M2: {}",
            class(self.labels[0]),
            class(self.labels[1])
        )
    }
}

fn column_name(columns: &[String], f: usize) -> String {
    columns.get(f).cloned().unwrap_or_else(|| format!("X[{f}]"))
}

/// Canonical predicate list of a box: one `>=` per finite lower bound and one
/// `<` per finite upper bound, features ascending.
pub fn predicates_of(pc: &PathCondition) -> Vec<Predicate> {
    let mut out = Vec::new();
    for (&feature, iv) in pc.bounds() {
        if iv.lower > f64::NEG_INFINITY {
            out.push(Predicate {
                feature,
                op: Op::Ge,
                threshold: iv.lower,
            });
        }
        if iv.upper < f64::INFINITY {
            out.push(Predicate {
                feature,
                op: Op::Lt,
                threshold: iv.upper,
            });
        }
    }
    out
}

/// Conjunction of two path conditions; `None` when no point satisfies both.
pub fn intersect(a: &PathCondition, b: &PathCondition) -> Option<PathCondition> {
    a.intersect(b)
}

/// Metadata about the tree a ruleset was extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSource {
    pub method: String,
    pub fingerprint: String,
    pub prediction_columns: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DivergenceMode>,
    pub max_depth: usize,
    pub refinement_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffRuleset {
    pub rules: Vec<DiffRule>,
    pub columns: Vec<String>,
    pub classes: Vec<String>,
    pub source: RuleSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCounts {
    pub num_rules: usize,
    /// Distinct `(feature, op, threshold)` triples across all rules.
    pub num_predicates_global: usize,
    pub num_predicates_per_rule_sum: usize,
}

pub fn count_rules_and_predicates(rules: &[DiffRule]) -> RuleCounts {
    let distinct: BTreeSet<_> = rules
        .iter()
        .flat_map(|r| r.predicates.iter().map(Predicate::key))
        .collect();
    RuleCounts {
        num_rules: rules.len(),
        num_predicates_global: distinct.len(),
        num_predicates_per_rule_sum: rules.iter().map(|r| r.predicates.len()).sum(),
    }
}

pub fn rule_satisfied(rule: &DiffRule, x: &[f64]) -> bool {
    rule.satisfied(x)
}

/// True when some rule covers `x`.
pub fn ruleset_predict(rules: &[DiffRule], x: &[f64]) -> bool {
    rules.iter().any(|r| r.satisfied(x))
}

/// Leaves of the subtree at `id` with their path conditions relative to it,
/// in preorder.
fn local_leaves(jst: &JointSurrogateTree, id: NodeId) -> Vec<(NodeId, usize, PathCondition)> {
    let mut out = Vec::new();
    let mut stack = vec![(id, PathCondition::unconstrained())];
    while let Some((id, pc)) = stack.pop() {
        match &jst.nodes()[id] {
            JstNode::ModelSplit {
                condition,
                children,
                ..
            } => {
                stack.push((children[1], pc.clone().with(condition, false)));
                stack.push((children[0], pc.with(condition, true)));
            }
            JstNode::ModelLeaf { label, .. } => out.push((id, *label, pc)),
            other => unreachable!("{} below an or-node", other.kind()),
        }
    }
    out
}

/// All difference rules of `jst`, ordered by or-node (preorder), then by the
/// first model's leaf, then the second's.
pub fn extract(jst: &JointSurrogateTree) -> DiffRuleset {
    let mut rules = Vec::new();
    let mut stack = vec![(jst.root(), PathCondition::unconstrained())];
    while let Some((id, path)) = stack.pop() {
        match &jst.nodes()[id] {
            JstNode::Shared {
                condition,
                children,
                ..
            } => {
                stack.push((children[1], path.clone().with(condition, false)));
                stack.push((children[0], path.with(condition, true)));
            }
            JstNode::SharedLeaf { labels, .. } => {
                if labels[0] != labels[1] {
                    rules.push(DiffRule::from_condition(
                        &path,
                        *labels,
                        RuleProvenance {
                            or_node: id,
                            leaves: [id, id],
                        },
                    ));
                }
            }
            JstNode::Or { children, .. } => {
                let first = local_leaves(jst, children[0]);
                let second = local_leaves(jst, children[1]);
                for (l1, a, pc1) in &first {
                    let Some(p1) = intersect(&path, pc1) else {
                        continue;
                    };
                    for (l2, b, pc2) in &second {
                        if a == b {
                            continue;
                        }
                        if let Some(c) = intersect(&p1, pc2) {
                            rules.push(DiffRule::from_condition(
                                &c,
                                [*a, *b],
                                RuleProvenance {
                                    or_node: id,
                                    leaves: [*l1, *l2],
                                },
                            ));
                        }
                    }
                }
            }
            JstNode::ModelSplit { .. } | JstNode::ModelLeaf { .. } => {
                unreachable!("model nodes only occur below or-nodes")
            }
        }
    }
    let prov = jst.provenance();
    DiffRuleset {
        rules,
        columns: jst.columns().to_vec(),
        classes: jst.classes().to_vec(),
        source: RuleSource {
            method: "jst".into(),
            fingerprint: prov.fingerprint.clone(),
            prediction_columns: prov.prediction_columns.clone(),
            mode: Some(jst.mode()),
            max_depth: jst.max_depth(),
            refinement_steps: jst.refinement_steps(),
        },
    }
}

impl DiffRuleset {
    pub fn counts(&self) -> RuleCounts {
        count_rules_and_predicates(&self.rules)
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        ruleset_predict(&self.rules, x)
    }

    /// Drops rules that cover no row of `ds`. Off by default in extraction;
    /// pointwise equivalence with the surrogates only holds without it.
    pub fn retain_supported(&mut self, ds: &Dataset) {
        self.rules.retain(|r| ds.rows().any(|x| r.satisfied(x)));
    }

    /// Rules with their predicates re-indexed to `columns` by name.
    pub fn remap(&self, columns: &[String]) -> Result<DiffRuleset> {
        let mut rules = self.rules.clone();
        for r in &mut rules {
            for p in &mut r.predicates {
                let name = column_name(&self.columns, p.feature);
                p.feature = columns
                    .iter()
                    .position(|c| *c == name)
                    .ok_or(Error::MissingColumn(name))?;
            }
        }
        Ok(DiffRuleset {
            rules,
            columns: columns.to_vec(),
            ..self.clone()
        })
    }

    pub fn describe(&self) -> Vec<String> {
        self.rules
            .iter()
            .map(|r| r.describe(&self.columns, &self.classes))
            .collect()
    }

    pub fn to_document(&self) -> RulesetDocument {
        RulesetDocument {
            schema_version: crate::SCHEMA_VERSION,
            source: self.source.clone(),
            columns: self.columns.clone(),
            classes: self.classes.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleRecord {
                    predicates: r
                        .predicates
                        .iter()
                        .map(|p| PredicateRecord {
                            feature: p.feature,
                            name: column_name(&self.columns, p.feature),
                            op: p.op,
                            threshold: p.threshold,
                        })
                        .collect(),
                    labels: r.labels,
                    text: r.describe(&self.columns, &self.classes),
                    provenance: r.provenance,
                })
                .collect(),
            counts: self.counts(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RulesetDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: RulesetDocument) -> Result<Self> {
        if doc.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let d = doc.columns.len();
        let k = doc.classes.len();
        let mut rules = Vec::with_capacity(doc.rules.len());
        for (i, r) in doc.rules.into_iter().enumerate() {
            let mut predicates = Vec::with_capacity(r.predicates.len());
            for p in r.predicates {
                if p.feature >= d || doc.columns[p.feature] != p.name {
                    return Err(Error::Schema(format!(
                        "rule {i}: predicate on `{}` does not match the column list",
                        p.name
                    )));
                }
                if !p.threshold.is_finite() {
                    return Err(Error::Schema(format!("rule {i}: non-finite threshold")));
                }
                predicates.push(Predicate {
                    feature: p.feature,
                    op: p.op,
                    threshold: p.threshold,
                });
            }
            if r.labels.iter().any(|&l| l >= k) {
                return Err(Error::Schema(format!("rule {i}: label out of range")));
            }
            rules.push(DiffRule {
                predicates,
                labels: r.labels,
                provenance: r.provenance,
            });
        }
        Ok(DiffRuleset {
            rules,
            columns: doc.columns,
            classes: doc.classes,
            source: doc.source,
        })
    }

    /// The ruleset with provenance and source stripped, for comparing
    /// rulesets produced by different methods.
    pub fn payload(&self) -> RulesetPayload {
        RulesetPayload {
            rules: self
                .rules
                .iter()
                .map(|r| {
                    (
                        r.predicates.iter().map(Predicate::key).collect(),
                        r.labels,
                    )
                })
                .collect(),
            counts: self.counts(),
        }
    }
}

/// Comparable content of a ruleset: predicates (by bit pattern), labels and
/// counts, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulesetPayload {
    pub rules: Vec<(Vec<(usize, Op, u64)>, [usize; 2])>,
    pub counts: RuleCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulesetDocument {
    pub schema_version: u32,
    pub source: RuleSource,
    pub columns: Vec<String>,
    pub classes: Vec<String>,
    pub rules: Vec<RuleRecord>,
    pub counts: RuleCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleRecord {
    pub predicates: Vec<PredicateRecord>,
    pub labels: [usize; 2],
    #[serde(default)]
    pub text: String,
    pub provenance: RuleProvenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub feature: usize,
    pub name: String,
    pub op: Op,
    pub threshold: f64,
}
