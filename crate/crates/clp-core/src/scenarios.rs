//! Experiment protocol runners: fully supervised one-pass learning,
//! open-set novelty evaluation, three-phase semi-supervised few-shot
//! learning, and the threshold size sweep.

use std::collections::BTreeMap;

use serde_json::Value;
use thiserror::Error;

use crate::data::{build_stream, DataError, Sample, StreamSpec};
use crate::metrics::{
    self, CurvePoint, MetricsError, OperatingPoint, ScoredBinary,
};
use crate::pool::{PoolConfig, PoolError, PrototypePool, StepEvent};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("unlabeled sample encountered in a supervised stream")]
    UnlabeledSample,
    #[error("labeled sample leaked into the unsupervised phase")]
    LabeledLeak,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("mixed test set must contain both known and novel samples")]
    MissingPopulation,
    #[error("novel ground truth length {truth} does not match stream length {stream}")]
    TruthLengthMismatch { truth: usize, stream: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SupervisedOcl,
    OpensetEval,
    SemisupervisedFewshot,
    SizeSweep,
}

/// Allocation accounting over one run.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrototypeCounts {
    /// Allocated prototypes by final label.
    pub per_class: BTreeMap<i64, usize>,
    pub total: usize,
    pub allocation_attempts: usize,
    pub allocation_failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurveSet {
    pub roc: Vec<CurvePoint>,
    pub pr: Vec<CurvePoint>,
    pub auroc: f64,
    pub auprc: f64,
    pub operating_point: OperatingPoint,
}

/// Aggregated outcome of one protocol run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: ScenarioKind,
    pub accuracies: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curves: Option<CurveSet>,
    pub prototype_counts: PrototypeCounts,
    /// Phase-2 unsupervised updates that landed on a prototype holding a
    /// real (positive) label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_contamination: Option<u64>,
    pub config_echo: Value,
}

impl ScenarioReport {
    fn new(scenario: ScenarioKind, config_echo: Value) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario,
            accuracies: BTreeMap::new(),
            curves: None,
            prototype_counts: PrototypeCounts::default(),
            cross_contamination: None,
            config_echo,
        }
    }
}

#[derive(Debug, Default)]
struct Tally {
    attempts: usize,
    failed: usize,
}

impl Tally {
    fn record(&mut self, event: &StepEvent) {
        match event {
            StepEvent::Allocated(_) => self.attempts += 1,
            StepEvent::AllocationFailed => {
                self.attempts += 1;
                self.failed += 1;
            }
            _ => {}
        }
    }
}

fn counts_from(pool: &PrototypePool, tally: &Tally) -> PrototypeCounts {
    let mut per_class: BTreeMap<i64, usize> = BTreeMap::new();
    for p in pool.prototypes() {
        *per_class.entry(p.label).or_default() += 1;
    }
    PrototypeCounts {
        per_class,
        total: pool.len(),
        allocation_attempts: tally.attempts,
        allocation_failed: tally.failed,
    }
}

fn train_supervised(
    pool: &mut PrototypePool,
    stream: &[Sample],
    tally: &mut Tally,
) -> Result<(), ScenarioError> {
    for s in stream {
        let y = s.label.ok_or(ScenarioError::UnlabeledSample)?;
        let out = pool.train_step(&s.features, Some(y))?;
        tally.record(&out.event);
    }
    Ok(())
}

/// Closed-set accuracy of the pool on a labeled test set. Evaluation is
/// inference-only: predictions come from the nearest prototype without
/// the novelty gate, and pseudo-label predictions count as wrong.
fn closed_set_accuracy(pool: &PrototypePool, test: &[Sample]) -> Result<f64, ScenarioError> {
    if test.is_empty() {
        return Err(ScenarioError::EmptyTestSet);
    }
    let mut predictions = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    for s in test {
        let y = s.label.ok_or(ScenarioError::UnlabeledSample)?;
        predictions.push(pool.predict_closed_set(&s.features)?);
        truths.push(y);
    }
    Ok(metrics::accuracy(&predictions, &truths)?)
}

/// Fully supervised online continual learning: one pass over the stream,
/// then closed-set accuracy on the held-out test set.
pub fn run_supervised_ocl(
    stream: &[Sample],
    test: &[Sample],
    pool_config: &PoolConfig,
    config_echo: Value,
) -> Result<(ScenarioReport, PrototypePool), ScenarioError> {
    let mut pool = PrototypePool::new(pool_config.clone())?;
    let mut tally = Tally::default();
    train_supervised(&mut pool, stream, &mut tally)?;
    let mut report = ScenarioReport::new(ScenarioKind::SupervisedOcl, config_echo);
    report
        .accuracies
        .insert("overall".into(), closed_set_accuracy(&pool, test)?);
    report.prototype_counts = counts_from(&pool, &tally);
    Ok((report, pool))
}

/// Open-set recognition: train on labeled base classes, then score every
/// mixed-test sample by its top similarity and evaluate the novelty
/// detector as a binary classifier.
pub fn run_openset_eval(
    base_stream: &[Sample],
    mixed_test: &[(Sample, bool)],
    pool_config: &PoolConfig,
    config_echo: Value,
) -> Result<(ScenarioReport, PrototypePool), ScenarioError> {
    let has_known = mixed_test.iter().any(|(_, novel)| !novel);
    let has_novel = mixed_test.iter().any(|(_, novel)| *novel);
    if !has_known || !has_novel {
        return Err(ScenarioError::MissingPopulation);
    }
    let mut pool = PrototypePool::new(pool_config.clone())?;
    let mut tally = Tally::default();
    train_supervised(&mut pool, base_stream, &mut tally)?;
    let mut scored = Vec::with_capacity(mixed_test.len());
    for (s, is_novel) in mixed_test {
        let p = pool.predict(&s.features)?;
        scored.push(ScoredBinary {
            score: p.top_similarity,
            is_novel: *is_novel,
        });
    }
    let mut report = ScenarioReport::new(ScenarioKind::OpensetEval, config_echo);
    report.curves = Some(CurveSet {
        roc: metrics::roc_curve(&scored)?,
        pr: metrics::pr_curve(&scored)?,
        auroc: metrics::auroc(&scored)?,
        auprc: metrics::auprc(&scored)?,
        operating_point: metrics::operating_point(&scored, pool_config.tau),
    });
    report.prototype_counts = counts_from(&pool, &tally);
    Ok((report, pool))
}

/// Restrict a labeled novel-class sample set to `shots` videos per class
/// and strip the labels, returning the hidden ground truth alongside.
/// `shots = 0` yields an empty stream.
pub fn kshot_unlabeled(
    novel_samples: &[Sample],
    shots: usize,
) -> Result<(Vec<Sample>, Vec<i64>), ScenarioError> {
    if shots == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let ordered = build_stream(novel_samples, &StreamSpec::low_shot(shots))?;
    let truth: Vec<i64> = ordered
        .iter()
        .map(|s| s.label.ok_or(ScenarioError::UnlabeledSample))
        .collect::<Result<_, _>>()?;
    let stream = ordered
        .into_iter()
        .map(|mut s| {
            s.label = None;
            s
        })
        .collect();
    Ok((stream, truth))
}

/// The three-phase semi-supervised protocol: (1) supervised base
/// training, (2) unsupervised streaming of novel-class samples with
/// novelty-triggered allocation, (3) each pseudo-labeled prototype
/// inherits the true class of the sample that triggered its allocation.
pub fn run_semisupervised_fewshot(
    base_stream: &[Sample],
    base_test: &[Sample],
    novel_stream: &[Sample],
    novel_truth: &[i64],
    novel_test: &[Sample],
    pool_config: &PoolConfig,
    config_echo: Value,
) -> Result<(ScenarioReport, PrototypePool), ScenarioError> {
    if novel_truth.len() != novel_stream.len() {
        return Err(ScenarioError::TruthLengthMismatch {
            truth: novel_truth.len(),
            stream: novel_stream.len(),
        });
    }
    let mut pool = PrototypePool::new(pool_config.clone())?;
    let mut tally = Tally::default();

    // phase 1: supervised base training
    train_supervised(&mut pool, base_stream, &mut tally)?;
    let base_before = closed_set_accuracy(&pool, base_test)?;

    // phase 2: unsupervised novel-class streaming
    let mut allocation_truth: Vec<(usize, i64)> = Vec::new();
    let mut cross_contamination: u64 = 0;
    for (s, &truth) in novel_stream.iter().zip(novel_truth) {
        if s.label.is_some() {
            return Err(ScenarioError::LabeledLeak);
        }
        let out = pool.train_step(&s.features, None)?;
        tally.record(&out.event);
        match out.event {
            StepEvent::Allocated(i) => allocation_truth.push((i, truth)),
            StepEvent::UpdatedUnsupervised(i) => {
                if pool.get(i).map_or(false, |p| p.label > 0) {
                    cross_contamination += 1;
                }
            }
            _ => {}
        }
    }

    // phase 3: label each new prototype from its allocating instance
    for &(index, truth) in &allocation_truth {
        pool.assign_label(index, truth)?;
    }

    let base_after = closed_set_accuracy(&pool, base_test)?;
    let novel_acc = closed_set_accuracy(&pool, novel_test)?;
    let all_test: Vec<Sample> = base_test.iter().chain(novel_test).cloned().collect();
    let overall = closed_set_accuracy(&pool, &all_test)?;

    let mut report = ScenarioReport::new(ScenarioKind::SemisupervisedFewshot, config_echo);
    report.accuracies.insert("base_before".into(), base_before);
    report.accuracies.insert("base_after".into(), base_after);
    report.accuracies.insert("novel".into(), novel_acc);
    report.accuracies.insert("overall".into(), overall);
    report
        .accuracies
        .insert("forgetting".into(), base_before - base_after);
    report.prototype_counts = counts_from(&pool, &tally);
    report.cross_contamination = Some(cross_contamination);
    Ok((report, pool))
}

/// Repeat the semi-supervised protocol per threshold, reporting accuracy
/// triplets and prototype counts for each tau.
pub fn run_size_sweep(
    base_stream: &[Sample],
    base_test: &[Sample],
    novel_stream: &[Sample],
    novel_truth: &[i64],
    novel_test: &[Sample],
    tau_grid: &[f64],
    pool_config: &PoolConfig,
    config_echo: Value,
) -> Result<Vec<ScenarioReport>, ScenarioError> {
    if tau_grid.is_empty() {
        return Err(ScenarioError::Data(DataError::InvalidSpec(
            "tau grid must be non-empty".into(),
        )));
    }
    let mut reports = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let mut config = pool_config.clone();
        config.tau = tau;
        let mut echo = config_echo.clone();
        if let Value::Object(map) = &mut echo {
            map.insert("tau".into(), tau.into());
        }
        let (mut report, _) = run_semisupervised_fewshot(
            base_stream,
            base_test,
            novel_stream,
            novel_truth,
            novel_test,
            &config,
            echo,
        )?;
        report.scenario = ScenarioKind::SizeSweep;
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::CapacityPolicy;
    use crate::synthetic::{generate_synthetic, SyntheticSpec};
    use serde_json::json;

    fn pool_config(d: usize, tau: f64) -> PoolConfig {
        PoolConfig {
            dimension: d,
            capacity: 512,
            tau,
            cascade_width: 5,
            alpha_min: 0.01,
            capacity_policy: CapacityPolicy::Skip,
        }
    }

    #[test]
    fn antipodal_two_class_stream_separates_perfectly() {
        let mut spec = SyntheticSpec::new(2, 1, 16);
        spec.samples_per_cluster = 60;
        spec.concentration = 0.05;
        spec.same_class_dot = None;
        spec.seed = 5;
        let data = generate_synthetic(&spec).unwrap();
        let (report, pool) =
            run_supervised_ocl(&data.train, &data.test, &pool_config(16, 0.7), json!({}))
                .unwrap();
        assert_eq!(report.accuracies["overall"], 1.0);
        assert!(pool.len() >= 2);
    }

    #[test]
    fn supervised_rejects_unlabeled_and_empty_test() {
        let mut spec = SyntheticSpec::new(2, 1, 8);
        spec.samples_per_cluster = 10;
        let data = generate_synthetic(&spec).unwrap();
        let mut stream = data.train.clone();
        stream[3].label = None;
        assert!(matches!(
            run_supervised_ocl(&stream, &data.test, &pool_config(8, 0.7), json!({})),
            Err(ScenarioError::UnlabeledSample)
        ));
        assert!(matches!(
            run_supervised_ocl(&data.train, &[], &pool_config(8, 0.7), json!({})),
            Err(ScenarioError::EmptyTestSet)
        ));
    }

    #[test]
    fn openset_requires_both_populations() {
        let mut spec = SyntheticSpec::new(2, 1, 8);
        spec.samples_per_cluster = 10;
        let data = generate_synthetic(&spec).unwrap();
        let mixed: Vec<(Sample, bool)> =
            data.test.iter().map(|s| (s.clone(), false)).collect();
        assert!(matches!(
            run_openset_eval(&data.train, &mixed, &pool_config(8, 0.7), json!({})),
            Err(ScenarioError::MissingPopulation)
        ));
    }

    #[test]
    fn identical_base_and_novel_classes_score_near_chance() {
        let mut spec = SyntheticSpec::new(3, 1, 16);
        spec.samples_per_cluster = 120;
        spec.seed = 11;
        let data = generate_synthetic(&spec).unwrap();
        // "novel" samples drawn from the same base classes
        let mixed: Vec<(Sample, bool)> = data
            .test
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i % 2 == 0))
            .collect();
        let (report, _) =
            run_openset_eval(&data.train, &mixed, &pool_config(16, 0.7), json!({})).unwrap();
        let auroc = report.curves.unwrap().auroc;
        assert!((auroc - 0.5).abs() < 0.1, "auroc = {auroc}");
    }

    #[test]
    fn zero_shots_leave_base_accuracy_untouched() {
        let mut spec = SyntheticSpec::new(4, 1, 16);
        spec.samples_per_cluster = 60;
        spec.seed = 3;
        let data = generate_synthetic(&spec).unwrap();
        let (stream, truth) = kshot_unlabeled(&data.train, 0).unwrap();
        assert!(stream.is_empty());
        let (report, _) = run_semisupervised_fewshot(
            &data.train,
            &data.test,
            &stream,
            &truth,
            &data.test,
            &pool_config(16, 0.7),
            json!({}),
        )
        .unwrap();
        assert_eq!(
            report.accuracies["base_before"],
            report.accuracies["base_after"]
        );
        assert_eq!(report.accuracies["forgetting"], 0.0);
    }

    #[test]
    fn labeled_leak_is_rejected() {
        let mut spec = SyntheticSpec::new(2, 1, 8);
        spec.samples_per_cluster = 10;
        let data = generate_synthetic(&spec).unwrap();
        let truth: Vec<i64> = data.train.iter().map(|s| s.label.unwrap()).collect();
        assert!(matches!(
            run_semisupervised_fewshot(
                &data.train,
                &data.test,
                &data.train, // still labeled
                &truth,
                &data.test,
                &pool_config(8, 0.7),
                json!({}),
            ),
            Err(ScenarioError::LabeledLeak)
        ));
    }

    #[test]
    fn report_is_deterministic_and_round_trips_as_json() {
        let mut spec = SyntheticSpec::new(3, 1, 16);
        spec.samples_per_cluster = 60;
        spec.seed = 21;
        let data = generate_synthetic(&spec).unwrap();
        let cfg = pool_config(16, 0.7);
        let (a, _) =
            run_supervised_ocl(&data.train, &data.test, &cfg, json!({"seed": 21})).unwrap();
        let (b, _) =
            run_supervised_ocl(&data.train, &data.test, &cfg, json!({"seed": 21})).unwrap();
        assert_eq!(a, b);
        let text = serde_json::to_string(&a).unwrap();
        let back: ScenarioReport = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }
}
