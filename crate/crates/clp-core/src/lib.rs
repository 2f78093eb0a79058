//! Rehearsal-free, prototype-based online continual learning on unit
//! feature vectors: novelty-gated prediction, on-demand multi-prototype
//! allocation, per-prototype metaplastic learning rates, semi-supervised
//! labeling, plus the data tooling and evaluation harness around it.

pub mod baseline;
pub mod data;
pub mod metrics;
pub mod persist;
pub mod pool;
pub mod scenarios;
pub mod synthetic;

pub use baseline::NcmModel;
pub use data::{build_stream, ingest, Sample, StreamOrdering, StreamSpec};
pub use metrics::{auprc, auroc, operating_point, ScoredBinary};
pub use pool::{
    apply_update, similarity, CapacityPolicy, PoolConfig, PoolError, Prediction, Prototype,
    PrototypePool, StepEvent, StepOutcome,
};
pub use scenarios::{ScenarioKind, ScenarioReport};
pub use synthetic::{generate_synthetic, SyntheticSpec};
