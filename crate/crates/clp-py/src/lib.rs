//! Python bindings: the prototype pool, novelty metrics and the
//! synthetic stream generator.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use clp_core::metrics::{self, ScoredBinary};
use clp_core::pool::{CapacityPolicy, PoolConfig, PoolError, PrototypePool, StepEvent};
use clp_core::synthetic::{generate_synthetic, DriftSpec, SyntheticSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Prediction", skip_from_py_object)]
#[derive(Clone)]
struct PyPrediction {
    #[pyo3(get)]
    label: i64,
    #[pyo3(get)]
    is_novel: bool,
    #[pyo3(get)]
    top_similarity: f64,
    #[pyo3(get)]
    winner_index: Option<usize>,
}

#[pymethods]
impl PyPrediction {
    fn __repr__(&self) -> String {
        format!(
            "Prediction(label={}, is_novel={}, top_similarity={:.6})",
            self.label, self.is_novel, self.top_similarity
        )
    }
}

fn event_name(event: &StepEvent) -> &'static str {
    match event {
        StepEvent::Allocated(_) => "allocated",
        StepEvent::UpdatedPositive(_) => "updated_positive",
        StepEvent::UpdatedNegative(_) => "updated_negative",
        StepEvent::UpdatedUnsupervised(_) => "updated_unsupervised",
        StepEvent::AllocationFailed => "allocation_failed",
    }
}

/// The CLP model: fixed-capacity prototype pool with novelty detection,
/// metaplastic updates and pseudo-labeling.
#[pyclass(name = "PrototypePool")]
struct PyPool {
    inner: PrototypePool,
}

#[pymethods]
impl PyPool {
    #[new]
    #[pyo3(signature = (dimension, capacity=512, tau=0.7, cascade_width=5, alpha_min=0.01, strict_capacity=false))]
    fn new(
        dimension: usize,
        capacity: usize,
        tau: f64,
        cascade_width: usize,
        alpha_min: f64,
        strict_capacity: bool,
    ) -> PyResult<Self> {
        let config = PoolConfig {
            dimension,
            capacity,
            tau,
            cascade_width,
            alpha_min,
            capacity_policy: if strict_capacity {
                CapacityPolicy::Strict
            } else {
                CapacityPolicy::Skip
            },
        };
        Ok(Self {
            inner: PrototypePool::new(config).map_err(value_err)?,
        })
    }

    /// One online training step; returns (prediction, event_name).
    #[pyo3(signature = (x, label=None))]
    fn train_step(&mut self, x: Vec<f64>, label: Option<i64>) -> PyResult<(PyPrediction, String)> {
        let out = self.inner.train_step(&x, label).map_err(value_err)?;
        Ok((
            PyPrediction {
                label: out.prediction.label,
                is_novel: out.prediction.is_novel,
                top_similarity: out.prediction.top_similarity,
                winner_index: out.prediction.winner_index,
            },
            event_name(&out.event).to_string(),
        ))
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<PyPrediction> {
        let p = self.inner.predict(&x).map_err(value_err)?;
        Ok(PyPrediction {
            label: p.label,
            is_novel: p.is_novel,
            top_similarity: p.top_similarity,
            winner_index: p.winner_index,
        })
    }

    /// Nearest-prototype label ignoring the novelty gate.
    fn predict_closed_set(&self, x: Vec<f64>) -> PyResult<i64> {
        self.inner.predict_closed_set(&x).map_err(value_err)
    }

    #[pyo3(signature = (x, label=None))]
    fn allocate(&mut self, x: Vec<f64>, label: Option<i64>) -> PyResult<Option<usize>> {
        self.inner.allocate(&x, label).map_err(value_err)
    }

    /// Replace a pseudo-label with a real class label.
    fn assign_label(&mut self, index: usize, label: i64) -> PyResult<()> {
        self.inner.assign_label(index, label).map_err(value_err)
    }

    /// (center, goodness, label) of one prototype.
    fn prototype(&self, index: usize) -> PyResult<(Vec<f64>, f64, i64)> {
        self.inner
            .get(index)
            .map(|p| (p.center.clone(), p.goodness, p.label))
            .ok_or_else(|| value_err(PoolError::UnallocatedIndex(index)))
    }

    /// Prototype counts keyed by label.
    fn counts(&self) -> BTreeMap<i64, usize> {
        let mut counts = BTreeMap::new();
        for p in self.inner.prototypes() {
            *counts.entry(p.label).or_insert(0) += 1;
        }
        counts
    }

    fn save(&self, path: String) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: String) -> PyResult<Self> {
        Ok(Self {
            inner: PrototypePool::load(&path).map_err(value_err)?,
        })
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    #[staticmethod]
    fn from_bytes(bytes: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: PrototypePool::from_bytes(&bytes).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.config().capacity
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.config().tau
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.config().dimension
    }
}

fn to_scored(scored: Vec<(f64, bool)>) -> Vec<ScoredBinary> {
    scored
        .into_iter()
        .map(|(score, is_novel)| ScoredBinary { score, is_novel })
        .collect()
}

/// Area under the ROC curve of novelty detection; input is a list of
/// (known_score, is_novel) pairs.
#[pyfunction]
fn auroc(scored: Vec<(f64, bool)>) -> PyResult<f64> {
    metrics::auroc(&to_scored(scored)).map_err(value_err)
}

/// Average-precision area under the precision-recall curve.
#[pyfunction]
fn auprc(scored: Vec<(f64, bool)>) -> PyResult<f64> {
    metrics::auprc(&to_scored(scored)).map_err(value_err)
}

/// (precision, recall, f1) of declaring novel below tau.
#[pyfunction]
fn operating_point(scored: Vec<(f64, bool)>, tau: f64) -> (f64, f64, f64) {
    let op = metrics::operating_point(&to_scored(scored), tau);
    (op.precision, op.recall, op.f1)
}

/// Deterministic synthetic train/test streams of unit vectors.
/// Samples are (features, label, instance_id, video_id, frame_index).
#[pyfunction]
#[pyo3(signature = (
    num_classes,
    clusters_per_class=2,
    dimension=16,
    samples_per_cluster=120,
    concentration=0.1,
    seed=0,
    max_mean_dot=0.5,
    same_class_dot=None,
    drift_angular_velocity=None,
))]
#[allow(clippy::too_many_arguments)]
fn synthetic_streams(
    num_classes: usize,
    clusters_per_class: usize,
    dimension: usize,
    samples_per_cluster: usize,
    concentration: f64,
    seed: u64,
    max_mean_dot: f64,
    same_class_dot: Option<f64>,
    drift_angular_velocity: Option<f64>,
) -> PyResult<(SampleList, SampleList)> {
    let mut spec = SyntheticSpec::new(num_classes, clusters_per_class, dimension);
    spec.samples_per_cluster = samples_per_cluster;
    spec.concentration = concentration;
    spec.seed = seed;
    spec.max_mean_dot = max_mean_dot;
    spec.same_class_dot = same_class_dot;
    if let Some(velocity) = drift_angular_velocity {
        spec.drift = Some(DriftSpec {
            angular_velocity: velocity,
            target_clusters: (0..num_classes * clusters_per_class).collect(),
        });
    }
    let data = generate_synthetic(&spec).map_err(value_err)?;
    let convert = |samples: Vec<clp_core::data::Sample>| -> SampleList {
        samples
            .into_iter()
            .map(|s| (s.features, s.label, s.instance_id, s.video_id, s.frame_index))
            .collect()
    };
    Ok((convert(data.train), convert(data.test)))
}

type SampleList = Vec<(Vec<f64>, Option<i64>, i64, i64, i64)>;

#[pymodule]
fn clp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPool>()?;
    m.add_class::<PyPrediction>()?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    m.add_function(wrap_pyfunction!(operating_point, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_streams, m)?)?;
    Ok(())
}
