#![allow(dead_code)]

pub mod dot;

use jstdiff::dtree::split_objective;
use jstdiff::tabular::{Dataset, LabelVector};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// A small labelled instance: rows plus two label vectors.
#[derive(Debug, Clone)]
pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub y1: Vec<usize>,
    pub y2: Vec<usize>,
}

impl Instance {
    pub fn dataset(&self) -> Dataset {
        let d = self.rows[0].len();
        Dataset::new((0..d).map(|i| format!("x{i}")).collect(), self.rows.clone()).unwrap()
    }

    pub fn labels(&self) -> (LabelVector, LabelVector) {
        (
            LabelVector::from_ids(self.y1.clone()),
            LabelVector::from_ids(self.y2.clone()),
        )
    }
}

/// Instances with `n in 1..=max_n` rows, `d in 1..=max_d` features and up to
/// `max_classes` classes. Feature values come from a coarse grid so that ties
/// between rows are frequent.
pub fn instance_strategy(max_n: usize, max_d: usize, max_classes: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n, 1..=max_d, 2..=max_classes, 2..=8usize).prop_flat_map(move |(n, d, k, levels)| {
        let value = (0..levels as i32).prop_map(|v| v as f64 * 0.5 - 1.0);
        (
            proptest::collection::vec(proptest::collection::vec(value, d), n),
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(0..k, n),
        )
            .prop_map(|(rows, y1, y2)| Instance { rows, y1, y2 })
    })
}

/// `count` deterministic draws from `strategy`.
pub fn sample<S: Strategy>(strategy: S, count: usize, seed: u8) -> Vec<S::Value> {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    );
    (0..count)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}

/// Exhaustive argmin of the summed split objective over every
/// `(feature, observed value)` candidate with both sides non-empty. Features
/// and thresholds are visited in ascending order and only a strictly smaller
/// objective replaces the incumbent.
pub fn brute_force_split(ds: &Dataset, rows: &[usize], ys: &[&LabelVector]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..ds.n_cols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| ds.value(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &t in &values {
            let mut total = 0.0;
            let mut ok = true;
            for y in ys {
                match split_objective(f, t, ds, rows, y) {
                    Ok(v) => total += v,
                    Err(_) => ok = false,
                }
            }
            if ok && best.is_none_or(|(_, _, b)| total < b) {
                best = Some((f, t, total));
            }
        }
    }
    best
}
