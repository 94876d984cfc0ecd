//! Progressive ablation: for each label fraction, train the supervised
//! baseline, the adversarial variant, and the full semi-supervised model
//! from identical seeds and score them on one shared held-out set.

use super::{train, TrainConfig};
use crate::data::{split_labeled, Dataset};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::metrics::MetricReport;
use crate::tensor::Real;

/// Row labels, in emission order.
pub const ABLATION_MODELS: [&str; 3] = ["baseline", "+adv", "+adv+semi"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentRow {
    pub model: &'static str,
    pub label_fraction: f64,
    pub report: MetricReport,
}

fn variants(full: LossWeights<f64>) -> [(&'static str, LossWeights<f64>); 3] {
    let mut baseline = full;
    baseline.lambda_adv = 0.0;
    baseline.lambda_semi_adv = 0.0;
    baseline.lambda_semi_bce = 0.0;
    let mut adv = full;
    adv.lambda_semi_adv = 0.0;
    adv.lambda_semi_bce = 0.0;
    [
        (ABLATION_MODELS[0], baseline),
        (ABLATION_MODELS[1], adv),
        (ABLATION_MODELS[2], full),
    ]
}

/// Trains 3 configurations per fraction and reports their metrics; exactly
/// three rows per fraction, in `ABLATION_MODELS` order. `data` must be
/// fully labeled: each fraction applies its own split, so all variants of
/// one fraction see the same labeled subset.
pub fn ablation<T: Real>(
    base: &TrainConfig,
    data: &Dataset<T>,
    eval_data: &Dataset<T>,
    fractions: &[f64],
) -> Result<Vec<ExperimentRow>> {
    base.validate()?;
    data.validate()?;
    if fractions.is_empty() {
        return Err(Error::InvalidArgument(
            "ablation needs at least one label fraction".into(),
        ));
    }
    if !data.unlabeled_indices.is_empty() {
        return Err(Error::InvalidArgument(
            "ablation expects a fully labeled dataset and splits it per fraction".into(),
        ));
    }
    let mut rows = Vec::with_capacity(3 * fractions.len());
    for &fraction in fractions {
        let split = split_labeled(data.clone(), fraction, base.seed)?;
        for (model, weights) in variants(base.weights) {
            let mut c = *base;
            c.weights = weights;
            c.label_fraction = fraction;
            c.eval_every = 0;
            let out = train::<T>(&c, &split, Some(eval_data))?;
            let report = out.evals.last().expect("final evaluation always runs").1;
            rows.push(ExperimentRow {
                model,
                label_fraction: fraction,
                report,
            });
        }
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("model,fraction,roc_auc,pr_auc,score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model, r.label_fraction, r.report.roc_auc, r.report.pr_auc, r.report.score
        ));
    }
    out
}
