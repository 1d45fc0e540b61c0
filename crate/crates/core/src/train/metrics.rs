//! Threshold-free ranking metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// ROC and precision-recall curves with their areas.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)`, starting at `(0, 1)`.
    pub pr: Vec<(f64, f64)>,
    pub auc_roc: f64,
    /// Average precision.
    pub auc_pr: f64,
    /// Fraction of positive labels.
    pub prevalence: f64,
}

/// Sweeps every distinct score as a threshold (higher score = more
/// positive). Tied scores move together, so a tie group contributes one
/// diagonal ROC segment and one PR step.
pub fn roc_pr_curves(scores: &[f64], labels: &[bool]) -> Result<EvalResult> {
    if scores.len() != labels.len() {
        return Err(crate::error::invalid!("{} scores for {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC/PR need both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (pos as f64, neg as f64);
    let mut roc = vec![(0.0, 0.0)];
    let mut pr = vec![(0.0, 1.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut auc_roc, mut auc_pr) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = (fp0 as f64 / n, tp0 as f64 / p);
        let (x1, y1) = (fp as f64 / n, tp as f64 / p);
        auc_roc += (x1 - x0) * (y0 + y1) / 2.0;
        let precision = tp as f64 / (tp + fp) as f64;
        auc_pr += (y1 - y0) * precision;
        roc.push((x1, y1));
        pr.push((y1, precision));
    }
    Ok(EvalResult { roc, pr, auc_roc, auc_pr, prevalence: p / (p + n) })
}
