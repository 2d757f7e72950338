mod common;

use std::collections::HashSet;

use common::{instance_strategy, sample};
use jstdiff::baselines::{direct_dt_rules, separate_rules};
use jstdiff::diffrules::{
    count_rules_and_predicates, extract, intersect, rule_satisfied, ruleset_predict, DiffRule, Op, Predicate,
    RuleProvenance,
};
use jstdiff::dtree::{fit, Interval, PathCondition, SplitCondition};
use jstdiff::jst::{build, DivergenceMode, JointSurrogateTree, JstDocument, JstNodeRecord, Model, Provenance};
use jstdiff::tabular::{Dataset, LabelVector};
use jstdiff::SCHEMA_VERSION;

fn band(feature: usize, lower: f64, upper: f64) -> PathCondition {
    let mut pc = PathCondition::unconstrained();
    if lower > f64::NEG_INFINITY {
        pc.constrain(&SplitCondition { feature, threshold: lower }, false);
    }
    if upper < f64::INFINITY {
        pc.constrain(&SplitCondition { feature, threshold: upper }, true);
    }
    pc
}

fn pred(feature: usize, op: Op, threshold: f64) -> Predicate {
    Predicate { feature, op, threshold }
}

fn rule(predicates: Vec<Predicate>) -> DiffRule {
    DiffRule { predicates, labels: [0, 1], provenance: RuleProvenance { or_node: 0, leaves: [0, 0] } }
}

#[test]
fn interval_intersections() {
    let pc = band(0, 2.0, 5.0);
    assert_eq!(intersect(&PathCondition::unconstrained(), &pc), Some(pc.clone()));
    assert_eq!(intersect(&band(0, 2.0, 5.0), &band(0, 5.0, 7.0)), None);
    let c = intersect(&band(0, 2.0, 5.0), &band(0, 3.0, 9.0)).unwrap();
    assert_eq!(c.interval(0), Interval { lower: 3.0, upper: 5.0 });
}

#[test]
fn rule_satisfaction_examples() {
    assert!(rule_satisfied(&rule(vec![]), &[123.0]));
    assert!(!rule_satisfied(&rule(vec![pred(0, Op::Lt, 5.0)]), &[5.0]));
    assert!(rule_satisfied(&rule(vec![pred(0, Op::Ge, 2.0), pred(0, Op::Lt, 5.0)]), &[3.7]));
    assert!(!ruleset_predict(&[], &[0.0]));
    assert!(ruleset_predict(&[rule(vec![pred(0, Op::Lt, 1.0)]), rule(vec![])], &[4.0]));
}

#[test]
fn counting_examples() {
    let c = count_rules_and_predicates(&[]);
    assert_eq!((c.num_rules, c.num_predicates_global), (0, 0));
    let rules = [
        rule(vec![pred(0, Op::Lt, 5.0), pred(1, Op::Ge, 1.0)]),
        rule(vec![pred(0, Op::Lt, 5.0), pred(2, Op::Lt, 3.0)]),
    ];
    let c = count_rules_and_predicates(&rules);
    assert_eq!((c.num_rules, c.num_predicates_global, c.num_predicates_per_rule_sum), (2, 3, 4));
}

#[test]
fn counts_and_membership_match_naive_recount() {
    for (i, inst) in sample(instance_strategy(40, 3, 3), 200, 21).into_iter().enumerate() {
        let ds = inst.dataset();
        let (y1, y2) = inst.labels();
        let mode = if i % 2 == 0 { DivergenceMode::Simplified } else { DivergenceMode::Alpha { alpha: 0.5 } };
        let rs = extract(&build(&ds, &y1, &y2, 1 + i % 4, mode).unwrap());
        let mut seen = HashSet::new();
        let mut total = 0;
        for r in &rs.rules {
            for p in &r.predicates {
                seen.insert(format!("{}|{}|{:?}", p.feature, p.op, p.threshold.to_bits()));
                total += 1;
            }
        }
        let c = rs.counts();
        assert_eq!((c.num_rules, c.num_predicates_global, c.num_predicates_per_rule_sum), (rs.rules.len(), seen.len(), total));
        for x in ds.rows() {
            let mut any = false;
            for r in &rs.rules {
                let mut all = true;
                for p in &r.predicates {
                    let v = x[p.feature];
                    let ok = if p.op == Op::Ge { v >= p.threshold } else { v < p.threshold };
                    all = all && ok;
                }
                any = any || all;
            }
            assert_eq!(rs.predict(x), any);
        }
    }
}

fn leaf(id: usize, kind: &str, label: usize, n: usize) -> JstNodeRecord {
    JstNodeRecord { id, kind: kind.into(), label: Some(label), histogram: Some(vec![n, 0]), n, ..Default::default() }
}

fn split(id: usize, kind: &str, feature: usize, threshold: f64, children: [usize; 2]) -> JstNodeRecord {
    JstNodeRecord {
        id,
        kind: kind.into(),
        feature: Some(feature),
        threshold: Some(threshold),
        children: Some(children.to_vec()),
        histogram: Some(vec![1, 1]),
        histograms: Some([vec![1, 1], vec![1, 1]]),
        n: 2,
        ..Default::default()
    }
}

#[test]
fn figure_two_rightmost_or_node() {
    // Root X[22] < 116.05. Its false branch holds an or-node: model 1 splits
    // on X[22] < 118.85 and then X[29] < 0.1 (label 1 on the true side);
    // model 2 predicts 0 everywhere.
    let mut shared_root = split(0, "shared", 22, 116.05, [1, 2]);
    shared_root.histogram = None;
    shared_root.histograms = Some([vec![1, 1], vec![2, 0]]);
    let shared_leaf = JstNodeRecord {
        id: 1,
        kind: "shared_leaf".into(),
        labels: Some([0, 0]),
        histograms: Some([vec![1, 0], vec![1, 0]]),
        n: 1,
        ..Default::default()
    };
    let or = JstNodeRecord {
        id: 2,
        kind: "or".into(),
        children: Some(vec![3, 8]),
        histograms: Some([vec![1, 1], vec![2, 0]]),
        n: 2,
        ..Default::default()
    };
    let mut m1_root = split(3, "m1_split", 22, 118.85, [4, 7]);
    m1_root.histograms = None;
    let mut m1_inner = split(4, "m1_split", 29, 0.1, [5, 6]);
    m1_inner.histograms = None;
    let mut m1_positive = leaf(5, "m1_leaf", 1, 1);
    m1_positive.histogram = Some(vec![0, 1]);
    let nodes = vec![
        shared_root,
        shared_leaf,
        or,
        m1_root,
        m1_inner,
        m1_positive,
        leaf(6, "m1_leaf", 0, 1),
        leaf(7, "m1_leaf", 0, 1),
        leaf(8, "m2_leaf", 0, 2),
    ];
    let doc = JstDocument {
        schema_version: SCHEMA_VERSION,
        max_depth: 3,
        mode: DivergenceMode::Simplified,
        refinement_steps: 0,
        provenance: Provenance { fingerprint: String::new(), prediction_columns: ["m1".into(), "m2".into()] },
        columns: (0..30).map(|i| format!("X[{i}]")).collect(),
        classes: vec!["0".into(), "1".into()],
        nodes,
    };
    let jst = JointSurrogateTree::from_document(doc).unwrap();
    let rs = extract(&jst);
    assert_eq!(rs.rules.len(), 1);
    assert_eq!(
        rs.rules[0].predicates,
        vec![pred(22, Op::Ge, 116.05), pred(22, Op::Lt, 118.85), pred(29, Op::Lt, 0.1)]
    );
    assert_eq!(rs.rules[0].labels, [1, 0]);
    assert_eq!(rs.rules[0].provenance, RuleProvenance { or_node: 2, leaves: [5, 8] });
    assert_eq!(rs.describe()[0], "X[22] >= 116.05 AND X[22] < 118.85 AND X[29] < 0.1 => M1: 1, M2: 0");
}

fn grid_points(ds: &Dataset, steps: usize) -> Vec<Vec<f64>> {
    let range = |f: usize| {
        let vals: Vec<f64> = ds.rows().map(|r| r[f]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 0.5, hi + 0.5)
    };
    let (a, b) = (range(0), range(1));
    let mut out = Vec::new();
    for i in 0..steps {
        for j in 0..steps {
            let t = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (steps - 1) as f64;
            out.push(vec![t(a.0, a.1, i), t(b.0, b.1, j)]);
        }
    }
    out
}

#[test]
fn grid_membership_equals_surrogate_disagreement() {
    let two_d = instance_strategy(40, 2, 3);
    let mut checked = 0;
    for (i, inst) in sample(two_d, 120, 22).into_iter().enumerate() {
        if inst.rows[0].len() != 2 {
            continue;
        }
        checked += 1;
        let ds = inst.dataset();
        let (y1, y2) = inst.labels();
        let mode = [DivergenceMode::Simplified, DivergenceMode::Alpha { alpha: 0.3 }, DivergenceMode::Alpha { alpha: 1.0 }][i % 3];
        let jst = build(&ds, &y1, &y2, 1 + i % 5, mode).unwrap();
        let rs = extract(&jst);
        for p in grid_points(&ds, 50).iter().map(Vec::as_slice).chain(ds.rows()) {
            let differ = jst.surrogate_predict(Model::First, p).unwrap() != jst.surrogate_predict(Model::Second, p).unwrap();
            assert_eq!(rs.predict(p), differ, "at {p:?}");
        }
    }
    assert!(checked > 30);
}

#[test]
fn separate_depth_one_trees_with_opposite_labels() {
    // Tree 1: x < 3 -> 0, else 1. Tree 2: x < 5 -> 1, else 0. Of the four
    // leaf pairs, (x<3, x<5) differs on (-inf, 3), (x>=3, x>=5) on [5, inf),
    // (x<3, x>=5) is empty and (x>=3, x<5) agrees.
    let ds = Dataset::new(vec!["x".into()], (0..8).map(|i| vec![i as f64]).collect()).unwrap();
    let y1 = LabelVector::from_ids((0..8).map(|i| usize::from(i >= 3)).collect());
    let y2 = LabelVector::from_ids((0..8).map(|i| usize::from(i < 5)).collect());
    let t1 = fit(&ds, &y1, 1).unwrap();
    let t2 = fit(&ds, &y2, 1).unwrap();
    assert_eq!(t1.nodes().len(), 3);
    assert_eq!(t2.nodes().len(), 3);
    let rs = separate_rules(&ds, &y1, &y2, 1).unwrap();
    let got: Vec<_> = rs.rules.iter().map(|r| (r.predicates.clone(), r.labels)).collect();
    assert_eq!(
        got,
        vec![
            (vec![pred(0, Op::Lt, 3.0)], [0, 1]),
            (vec![pred(0, Op::Ge, 5.0)], [1, 0]),
        ]
    );
    for x in ds.rows() {
        assert_eq!(rs.predict(x), !(3.0..5.0).contains(&x[0]));
    }
}

#[test]
fn direct_rules_cover_exactly_the_positive_leaves() {
    for (i, inst) in sample(instance_strategy(40, 3, 3), 150, 23).into_iter().enumerate() {
        let ds = inst.dataset();
        let (y1, y2) = inst.labels();
        let k = i % 5;
        let rs = direct_dt_rules(&ds, &y1, &y2, k).unwrap();
        let z = LabelVector::with_classes(
            y1.labels().iter().zip(y2.labels()).map(|(a, b)| usize::from(a != b)).collect(),
            vec!["agree".into(), "differ".into()],
        )
        .unwrap();
        let tree = fit(&ds, &z, k).unwrap();
        for x in ds.rows() {
            assert_eq!(rs.predict(x), tree.predict(x).unwrap() == 1);
        }
    }
}

#[test]
fn direct_rules_single_threshold() {
    let ds = Dataset::new(vec!["x".into()], (0..10).map(|i| vec![i as f64]).collect()).unwrap();
    let y1 = LabelVector::from_ids(vec![0; 10]);
    let y2 = LabelVector::from_ids((0..10).map(|i| usize::from(i >= 6)).collect());
    let rs = direct_dt_rules(&ds, &y1, &y2, 3).unwrap();
    assert_eq!(rs.rules.len(), 1);
    assert_eq!(rs.rules[0].predicates, vec![pred(0, Op::Ge, 6.0)]);
    assert!(direct_dt_rules(&ds, &y1, &y1, 3).unwrap().rules.is_empty());
    assert!(separate_rules(&ds, &y2, &y2, 3).unwrap().rules.is_empty());
}
