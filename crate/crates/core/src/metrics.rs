//! Acc-7 / Acc-5 / Acc-2, MAE, per-class F1, weighted F1 and confusion matrices.
//!
//! Sentiment scores are binned by rounding to the nearest integer after
//! clamping (`[-3, 3]` for seven bins, `[-2, 2]` for five). Binary accuracy
//! counts a score of exactly zero as positive.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::shape;
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bins {
    Seven,
    Five,
    Two,
}

/// Maps a continuous sentiment score to a class index.
pub fn bin_sentiment(score: f64, bins: Bins) -> Result<usize> {
    if score.is_nan() {
        return Err(Error::Value("cannot bin NaN sentiment".into()));
    }
    Ok(match bins {
        Bins::Seven => (math::round(score.clamp(-3.0, 3.0)) + 3.0) as usize,
        Bins::Five => (math::round(score.clamp(-2.0, 2.0)) + 2.0) as usize,
        Bins::Two => usize::from(score >= 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub acc7: f64,
    pub acc5: f64,
    pub acc2: f64,
}

/// MAE and binned accuracies (percentages) of sentiment predictions.
pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> Result<RegressionMetrics> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(shape(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    let n = preds.len() as f64;
    let mae = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n;
    let acc = |bins: Bins| -> Result<f64> {
        let mut hits = 0usize;
        for (&p, &y) in preds.iter().zip(labels) {
            hits += usize::from(bin_sentiment(p, bins)? == bin_sentiment(y, bins)?);
        }
        Ok(100.0 * hits as f64 / n)
    };
    Ok(RegressionMetrics { mae, acc7: acc(Bins::Seven)?, acc5: acc(Bins::Five)?, acc2: acc(Bins::Two)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub per_class_f1: Vec<f64>,
    /// Support-weighted mean F1, as a percentage.
    pub weighted_f1: f64,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Per-class F1 (0 when precision + recall is 0), support-weighted F1 and the
/// confusion matrix.
pub fn f1_metrics(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ClassificationMetrics> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(shape(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &y) in preds.iter().zip(labels) {
        for c in [p, y] {
            if c >= num_classes {
                return Err(Error::Label { label: c, num_classes });
            }
        }
        confusion[y][p] += 1;
    }
    let n = preds.len() as f64;
    let mut per_class_f1 = Vec::with_capacity(num_classes);
    let mut weighted = 0.0;
    for c in 0..num_classes {
        let tp = confusion[c][c] as f64;
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        per_class_f1.push(f1);
        weighted += support as f64 / n * f1;
    }
    Ok(ClassificationMetrics { per_class_f1, weighted_f1: 100.0 * weighted, confusion })
}

/// Everything reported for one evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc7: f64,
    pub acc5: f64,
    pub acc2: f64,
    pub mae: f64,
    pub per_class_f1: Vec<f64>,
    pub weighted_f1: f64,
    pub confusion: Vec<Vec<u64>>,
    pub n: usize,
}

impl MetricsReport {
    /// Combines sentiment-score metrics with emotion-classification metrics.
    pub fn compute(
        sentiment_preds: &[f64],
        sentiment_labels: &[f64],
        class_preds: &[usize],
        class_labels: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        let r = regression_metrics(sentiment_preds, sentiment_labels)?;
        let c = f1_metrics(class_preds, class_labels, num_classes)?;
        if class_preds.len() != sentiment_preds.len() {
            return Err(shape("sentiment and class predictions differ in count"));
        }
        Ok(Self {
            acc7: r.acc7,
            acc5: r.acc5,
            acc2: r.acc2,
            mae: r.mae,
            per_class_f1: c.per_class_f1,
            weighted_f1: c.weighted_f1,
            confusion: c.confusion,
            n: sentiment_preds.len(),
        })
    }
}
