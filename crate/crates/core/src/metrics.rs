//! Evaluation of difference rules against observed disagreements.
//!
//! The ground truth set `T` holds rows where the two models' labels differ;
//! the predicted set `P` holds rows covered by some rule.

use serde::{Deserialize, Serialize};

use crate::diffrules::{DiffRuleset, RuleCounts};
use crate::jst::{JointSurrogateTree, Model};
use crate::tabular::{Dataset, LabelVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffMetrics {
    pub n: usize,
    pub true_diffs: usize,
    pub predicted_diffs: usize,
    pub hits: usize,
    /// `|T ∩ P| / |P|`, 0 when nothing is predicted.
    pub precision: f64,
    /// `|T ∩ P| / |T|`, 1 when there is nothing to find.
    pub recall: f64,
    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub f1: f64,
    /// `|T| / n`.
    pub diff_rate: f64,
    pub no_predictions: bool,
    pub no_true_diffs: bool,
    pub f1_degenerate: bool,
}

/// Precision, recall and F1 of `predicted` against `truth`.
pub fn evaluate(truth: &[bool], predicted: &[bool]) -> Result<DiffMetrics> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = truth.len();
    let t = truth.iter().filter(|&&b| b).count();
    let p = predicted.iter().filter(|&&b| b).count();
    let hits = truth.iter().zip(predicted).filter(|(&a, &b)| a && b).count();
    let precision = if p == 0 { 0.0 } else { hits as f64 / p as f64 };
    let recall = if t == 0 { 1.0 } else { hits as f64 / t as f64 };
    let f1_degenerate = precision + recall == 0.0;
    let f1 = if f1_degenerate {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(DiffMetrics {
        n,
        true_diffs: t,
        predicted_diffs: p,
        hits,
        precision,
        recall,
        f1,
        diff_rate: t as f64 / n as f64,
        no_predictions: p == 0,
        no_true_diffs: t == 0,
        f1_degenerate,
    })
}

/// Fraction of positions where the two label sequences agree.
pub fn fidelity(surrogate: &[usize], model: &[usize]) -> Result<f64> {
    if surrogate.len() != model.len() {
        return Err(Error::LengthMismatch {
            left: surrogate.len(),
            right: model.len(),
        });
    }
    if surrogate.is_empty() {
        return Err(Error::EmptyInput);
    }
    let same = surrogate.iter().zip(model).filter(|(a, b)| a == b).count();
    Ok(same as f64 / surrogate.len() as f64)
}

pub fn true_differences(y1: &LabelVector, y2: &LabelVector) -> Result<Vec<bool>> {
    if y1.len() != y2.len() {
        return Err(Error::LengthMismatch {
            left: y1.len(),
            right: y2.len(),
        });
    }
    Ok(y1
        .labels()
        .iter()
        .zip(y2.labels())
        .map(|(a, b)| a != b)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFidelity {
    pub model1: f64,
    pub model2: f64,
}

/// Fidelity of each surrogate in `jst` to the corresponding model labels.
pub fn surrogate_fidelity(
    jst: &JointSurrogateTree,
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
) -> Result<SurrogateFidelity> {
    let per = |m: Model, y: &LabelVector| -> Result<f64> {
        let preds = ds
            .rows()
            .map(|r| jst.surrogate_predict(m, r))
            .collect::<Result<Vec<_>>>()?;
        fidelity(&preds, y.labels())
    };
    Ok(SurrogateFidelity {
        model1: per(Model::First, y1)?,
        model2: per(Model::Second, y2)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    #[serde(flatten)]
    pub metrics: DiffMetrics,
    pub counts: RuleCounts,
    pub fidelity: Option<SurrogateFidelity>,
}

/// Scores `rules` on `ds` where the models predicted `y1` and `y2`. Rule
/// predicates must index the columns of `ds`.
pub fn evaluate_ruleset(
    rules: &DiffRuleset,
    ds: &Dataset,
    y1: &LabelVector,
    y2: &LabelVector,
) -> Result<MetricsReport> {
    if rules.columns.len() != ds.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: rules.columns.len(),
            found: ds.n_cols(),
        });
    }
    let truth = true_differences(y1, y2)?;
    if truth.len() != ds.n_rows() {
        return Err(Error::LengthMismatch {
            left: ds.n_rows(),
            right: truth.len(),
        });
    }
    let predicted: Vec<bool> = ds.rows().map(|r| rules.predict(r)).collect();
    Ok(MetricsReport {
        method: rules.source.method.clone(),
        metrics: evaluate(&truth, &predicted)?,
        counts: rules.counts(),
        fidelity: None,
    })
}
