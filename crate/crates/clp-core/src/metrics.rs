//! Streaming and batch evaluation metrics: accuracy, confusion, ROC/AUROC,
//! PR/AUPRC and the threshold-persistent operating point.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("need at least one known and one novel example")]
    SingleClass,
    #[error("no novel examples")]
    NoNovel,
    #[error("non-finite score")]
    NonFiniteScore,
}

/// One test sample scored for novelty detection. Higher scores mean
/// "more known"; the truth marks whether the sample really was novel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBinary {
    pub score: f64,
    pub is_novel: bool,
}

/// A point on a ROC curve (x = FPR, y = TPR) or a PR curve
/// (x = recall, y = precision). The threshold applies to the novelty
/// score, i.e. the negated known-class score.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OperatingPoint {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn accuracy(predictions: &[i64], truths: &[i64]) -> Result<f64, MetricsError> {
    check_lengths(predictions, truths)?;
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Accuracy plus per-class breakdown and confusion counts
/// (`confusion[truth][prediction]`).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<i64, f64>,
    pub confusion: BTreeMap<i64, BTreeMap<i64, usize>>,
}

pub fn classification_report(
    predictions: &[i64],
    truths: &[i64],
) -> Result<ClassificationReport, MetricsError> {
    check_lengths(predictions, truths)?;
    let mut confusion: BTreeMap<i64, BTreeMap<i64, usize>> = BTreeMap::new();
    for (&p, &t) in predictions.iter().zip(truths) {
        *confusion.entry(t).or_default().entry(p).or_default() += 1;
    }
    let per_class = confusion
        .iter()
        .map(|(&t, row)| {
            let total: usize = row.values().sum();
            let hit = row.get(&t).copied().unwrap_or(0);
            (t, hit as f64 / total as f64)
        })
        .collect();
    Ok(ClassificationReport {
        accuracy: accuracy(predictions, truths)?,
        per_class,
        confusion,
    })
}

fn check_lengths(predictions: &[i64], truths: &[i64]) -> Result<(), MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Sort by ascending known-score (descending novelty score), ties broken
/// by truth so output is deterministic regardless of input order.
fn sorted_by_novelty(scored: &[ScoredBinary]) -> Result<Vec<ScoredBinary>, MetricsError> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(MetricsError::NonFiniteScore);
    }
    let mut v = scored.to_vec();
    v.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap()
            .then(b.is_novel.cmp(&a.is_novel))
    });
    Ok(v)
}

fn count_classes(scored: &[ScoredBinary]) -> (usize, usize) {
    let novel = scored.iter().filter(|s| s.is_novel).count();
    (scored.len() - novel, novel)
}

/// ROC over novelty detection: positives are novel samples, classified
/// novel when the novelty score (-score) reaches the threshold. Scores are
/// tie-grouped; the curve starts at (0, 0) and ends at (1, 1).
pub fn roc_curve(scored: &[ScoredBinary]) -> Result<Vec<CurvePoint>, MetricsError> {
    let (known, novel) = count_classes(scored);
    if known == 0 || novel == 0 {
        return Err(MetricsError::SingleClass);
    }
    let sorted = sorted_by_novelty(scored)?;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].score;
        while i < sorted.len() && sorted[i].score == score {
            if sorted[i].is_novel {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(CurvePoint {
            threshold: -score,
            x: fp as f64 / known as f64,
            y: tp as f64 / novel as f64,
        });
    }
    Ok(points)
}

/// Area under the ROC curve by the trapezoidal rule; with tie-grouped
/// thresholds this equals the tie-aware pairwise probability
/// P(novel outranks known) + P(tie)/2.
pub fn auroc(scored: &[ScoredBinary]) -> Result<f64, MetricsError> {
    let curve = roc_curve(scored)?;
    let mut area = 0.0;
    for w in curve.windows(2) {
        area += (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0;
    }
    Ok(area)
}

/// Precision-recall of the novel class over descending novelty-score
/// thresholds.
pub fn pr_curve(scored: &[ScoredBinary]) -> Result<Vec<CurvePoint>, MetricsError> {
    let (_, novel) = count_classes(scored);
    if novel == 0 {
        return Err(MetricsError::NoNovel);
    }
    let sorted = sorted_by_novelty(scored)?;
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut detected = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].score;
        while i < sorted.len() && sorted[i].score == score {
            if sorted[i].is_novel {
                tp += 1;
            }
            detected += 1;
            i += 1;
        }
        points.push(CurvePoint {
            threshold: -score,
            x: tp as f64 / novel as f64,
            y: tp as f64 / detected as f64,
        });
    }
    Ok(points)
}

/// Step-wise average precision: sum of precision at each threshold times
/// the recall gained there (no linear interpolation).
pub fn auprc(scored: &[ScoredBinary]) -> Result<f64, MetricsError> {
    let curve = pr_curve(scored)?;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for p in &curve {
        area += (p.x - prev_recall) * p.y;
        prev_recall = p.x;
    }
    Ok(area)
}

/// Precision/recall/F1 of novelty detection at the learning threshold:
/// a sample is declared novel iff its known-score is strictly below tau.
pub fn operating_point(scored: &[ScoredBinary], tau: f64) -> OperatingPoint {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for s in scored {
        let declared_novel = s.score < tau;
        match (declared_novel, s.is_novel) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    OperatingPoint {
        precision,
        recall,
        f1,
    }
}

/// CSV rendering of a curve for external plotting.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,x,y\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.x, p.y));
    }
    out
}
