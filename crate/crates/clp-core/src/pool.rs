//! The prototype pool: similarity ranking, novelty detection, allocation
//! and the metaplastic update rules driving online training.

use thiserror::Error;

/// Tolerance used when checking that an input vector is unit-norm.
pub const UNIT_NORM_TOL: f64 = 1e-4;

/// Norm below which an update result is considered degenerate and the
/// center is left unchanged.
pub const DEGENERATE_NORM: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input vector is not unit-norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("invalid label {0}: class labels must be positive")]
    InvalidLabel(i64),
    #[error("prototype pool is at capacity")]
    CapacityExhausted,
    #[error("prototype {index} already holds real label {label}")]
    LabelAlreadyAssigned { index: usize, label: i64 },
    #[error("no allocated prototype at index {0}")]
    UnallocatedIndex(usize),
    #[error("invalid pool configuration: {0}")]
    InvalidConfig(String),
    #[error("bad model payload: {0}")]
    Format(String),
}

/// What happens when an allocation is requested on a full pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityPolicy {
    /// Record the failure, leave the pool unchanged, treat the sample as
    /// predicted-novel.
    Skip,
    /// Raise `PoolError::CapacityExhausted`.
    Strict,
}

impl Default for CapacityPolicy {
    fn default() -> Self {
        CapacityPolicy::Skip
    }
}

/// Hyperparameters of a [`PrototypePool`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoolConfig {
    pub dimension: usize,
    /// Maximum number of prototypes (N).
    pub capacity: usize,
    /// Similarity threshold for novelty detection; strictly below it a
    /// sample is novel.
    pub tau: f64,
    /// Number of next-most-similar prototypes visited on a wrong
    /// supervised prediction (m).
    pub cascade_width: usize,
    /// Baseline plasticity floor on the learning rate.
    pub alpha_min: f64,
    #[serde(default)]
    pub capacity_policy: CapacityPolicy,
}

impl PoolConfig {
    pub fn validate(&self) -> Result<(), PoolError> {
        if self.dimension == 0 {
            return Err(PoolError::InvalidConfig("dimension must be positive".into()));
        }
        if self.capacity == 0 {
            return Err(PoolError::InvalidConfig("capacity must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) && self.tau != 1.0 {
            // tau = 1.0 is allowed as a degenerate ceiling; anything outside
            // (0, 1] is rejected.
            return Err(PoolError::InvalidConfig(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.cascade_width == 0 {
            return Err(PoolError::InvalidConfig("cascade_width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha_min) {
            return Err(PoolError::InvalidConfig(format!(
                "alpha_min must lie in [0, 1), got {}",
                self.alpha_min
            )));
        }
        Ok(())
    }
}

/// One class-cluster representative.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    /// Unit-norm direction in feature space.
    pub center: Vec<f64>,
    /// Performance-history counter, always >= 1. Fractional values come
    /// from half-strength unsupervised updates.
    pub goodness: f64,
    /// Positive = real class id, negative = pseudo-label.
    pub label: i64,
}

impl Prototype {
    /// Effective learning rate, derived from goodness.
    pub fn alpha(&self, alpha_min: f64) -> f64 {
        (1.0 / self.goodness).max(alpha_min)
    }
}

/// Outcome of the novelty-gated nearest-prototype decision.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prediction {
    /// 0 when novel, otherwise the winner's (real or pseudo) label.
    pub label: i64,
    pub winner_index: Option<usize>,
    /// Top similarity over allocated prototypes; -1.0 for an empty pool.
    pub top_similarity: f64,
    pub is_novel: bool,
}

/// What a single training step did to the pool.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Allocated(usize),
    UpdatedPositive(usize),
    /// Winner pushed away plus the cascade prototypes visited, in rank order.
    UpdatedNegative(Vec<usize>),
    UpdatedUnsupervised(usize),
    AllocationFailed,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepOutcome {
    /// Prediction against the pool state before any update.
    pub prediction: Prediction,
    pub event: StepEvent,
    /// True when the negative cascade found no positive match and fell
    /// back to allocation.
    pub cascade_allocated: bool,
}

/// Dot product of two same-dimension vectors, accumulated in f64.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64, PoolError> {
    if a.len() != b.len() {
        return Err(PoolError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dot(a, b))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    if n < DEGENERATE_NORM || !n.is_finite() {
        return None;
    }
    Some(v.iter().map(|&x| x / n).collect())
}

/// Apply one metaplastic update to a prototype in place:
/// center <- normalize(center + psi * alpha * x), goodness <- max(1, g + psi),
/// with alpha = max(1/g, alpha_min). A degenerate result keeps the old
/// center but still updates goodness.
pub fn apply_update(proto: &mut Prototype, x: &[f64], psi: f64, alpha_min: f64) {
    let alpha = proto.alpha(alpha_min);
    let step = psi * alpha;
    let moved: Vec<f64> = proto
        .center
        .iter()
        .zip(x)
        .map(|(&c, &xi)| c + step * xi)
        .collect();
    if let Some(unit) = normalized(&moved) {
        proto.center = unit;
    }
    proto.goodness = (proto.goodness + psi).max(1.0);
}

/// The CLP model: a fixed-capacity population of prototypes plus its
/// hyperparameters and the pseudo-label counter.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypePool {
    config: PoolConfig,
    prototypes: Vec<Prototype>,
    next_pseudo_label: i64,
}

impl PrototypePool {
    pub fn new(config: PoolConfig) -> Result<Self, PoolError> {
        config.validate()?;
        Ok(Self {
            config,
            prototypes: Vec::new(),
            next_pseudo_label: -1,
        })
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    /// Number of allocated prototypes.
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn get(&self, index: usize) -> Option<&Prototype> {
        self.prototypes.get(index)
    }

    pub fn next_pseudo_label(&self) -> i64 {
        self.next_pseudo_label
    }

    fn check_input(&self, x: &[f64]) -> Result<(), PoolError> {
        if x.len() != self.config.dimension {
            return Err(PoolError::DimensionMismatch {
                expected: self.config.dimension,
                got: x.len(),
            });
        }
        let n = norm(x);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(PoolError::NotUnitNorm { norm: n });
        }
        Ok(())
    }

    /// All allocated prototypes ranked by similarity to `x`, descending,
    /// ties broken by lowest index.
    pub fn rank(&self, x: &[f64]) -> Result<Vec<(usize, f64)>, PoolError> {
        self.check_input(x)?;
        Ok(self.rank_unchecked(x))
    }

    fn rank_unchecked(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .prototypes
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dot(&p.center, x)))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked
    }

    /// Novelty per the strict-threshold rule: novel iff the pool is empty
    /// or every similarity is below tau.
    pub fn detect_novelty(&self, x: &[f64]) -> Result<(bool, f64), PoolError> {
        self.check_input(x)?;
        let ranked = self.rank_unchecked(x);
        let p = self.prediction_from_ranked(&ranked);
        Ok((p.is_novel, p.top_similarity))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, PoolError> {
        self.check_input(x)?;
        let ranked = self.rank_unchecked(x);
        Ok(self.prediction_from_ranked(&ranked))
    }

    fn prediction_from_ranked(&self, ranked: &[(usize, f64)]) -> Prediction {
        match ranked.first() {
            None => Prediction {
                label: 0,
                winner_index: None,
                top_similarity: -1.0,
                is_novel: true,
            },
            Some(&(winner, top)) => {
                if top < self.config.tau {
                    Prediction {
                        label: 0,
                        winner_index: None,
                        top_similarity: top,
                        is_novel: true,
                    }
                } else {
                    Prediction {
                        label: self.prototypes[winner].label,
                        winner_index: Some(winner),
                        top_similarity: top,
                        is_novel: false,
                    }
                }
            }
        }
    }

    /// Closed-set winner label, ignoring the novelty gate. Returns 0 only
    /// for an empty pool.
    pub fn predict_closed_set(&self, x: &[f64]) -> Result<i64, PoolError> {
        self.check_input(x)?;
        let ranked = self.rank_unchecked(x);
        Ok(ranked.first().map_or(0, |&(i, _)| self.prototypes[i].label))
    }

    /// Allocate a prototype memorizing `x`. Returns the slot index, or
    /// `None` when the pool is full under the `Skip` policy.
    pub fn allocate(&mut self, x: &[f64], label: Option<i64>) -> Result<Option<usize>, PoolError> {
        self.check_input(x)?;
        if let Some(y) = label {
            if y < 1 {
                return Err(PoolError::InvalidLabel(y));
            }
        }
        self.allocate_unchecked(x, label)
    }

    fn allocate_unchecked(
        &mut self,
        x: &[f64],
        label: Option<i64>,
    ) -> Result<Option<usize>, PoolError> {
        if self.prototypes.len() >= self.config.capacity {
            return match self.config.capacity_policy {
                CapacityPolicy::Skip => Ok(None),
                CapacityPolicy::Strict => Err(PoolError::CapacityExhausted),
            };
        }
        let center = normalized(x).ok_or(PoolError::NotUnitNorm { norm: norm(x) })?;
        let label = match label {
            Some(y) => y,
            None => {
                let pseudo = self.next_pseudo_label;
                self.next_pseudo_label -= 1;
                pseudo
            }
        };
        // Goodness starts at 1 and is incremented by the allocation itself,
        // so the first update after allocation runs at alpha = 1/2.
        self.prototypes.push(Prototype {
            center,
            goodness: 2.0,
            label,
        });
        Ok(Some(self.prototypes.len() - 1))
    }

    /// One step of the online training loop: novelty check, then either
    /// allocation, a supervised update (with negative cascade), or a
    /// half-strength unsupervised update of the winner.
    pub fn train_step(&mut self, x: &[f64], label: Option<i64>) -> Result<StepOutcome, PoolError> {
        self.check_input(x)?;
        if let Some(y) = label {
            if y < 1 {
                return Err(PoolError::InvalidLabel(y));
            }
        }
        let ranked = self.rank_unchecked(x);
        let prediction = self.prediction_from_ranked(&ranked);
        if prediction.is_novel {
            return Ok(match self.allocate_unchecked(x, label)? {
                Some(i) => StepOutcome {
                    prediction,
                    event: StepEvent::Allocated(i),
                    cascade_allocated: false,
                },
                None => StepOutcome {
                    prediction,
                    event: StepEvent::AllocationFailed,
                    cascade_allocated: false,
                },
            });
        }
        match label {
            Some(y) => self.update_on_label(&ranked, x, y, prediction),
            None => {
                let winner = prediction.winner_index.expect("non-novel prediction has winner");
                apply_update(&mut self.prototypes[winner], x, 0.5, self.config.alpha_min);
                Ok(StepOutcome {
                    prediction,
                    event: StepEvent::UpdatedUnsupervised(winner),
                    cascade_allocated: false,
                })
            }
        }
    }

    /// Supervised update of a recognized sample: label assignment on a
    /// pseudo-labeled winner, then the evaluator-driven update, with the
    /// negative cascade on a wrong prediction.
    fn update_on_label(
        &mut self,
        ranked: &[(usize, f64)],
        x: &[f64],
        y: i64,
        prediction: Prediction,
    ) -> Result<StepOutcome, PoolError> {
        let winner = ranked[0].0;
        if self.prototypes[winner].label < 0 {
            self.prototypes[winner].label = y;
        }
        let correct = self.prototypes[winner].label == y;
        let psi = if correct { 1.0 } else { -1.0 };
        let alpha_min = self.config.alpha_min;
        apply_update(&mut self.prototypes[winner], x, psi, alpha_min);
        if correct {
            return Ok(StepOutcome {
                prediction,
                event: StepEvent::UpdatedPositive(winner),
                cascade_allocated: false,
            });
        }
        let mut visited = vec![winner];
        let mut positive_match = false;
        for &(k, _) in ranked[1..].iter().take(self.config.cascade_width) {
            let psi_k = if self.prototypes[k].label == y {
                positive_match = true;
                1.0
            } else {
                -1.0
            };
            apply_update(&mut self.prototypes[k], x, psi_k, alpha_min);
            visited.push(k);
        }
        if positive_match {
            Ok(StepOutcome {
                prediction,
                event: StepEvent::UpdatedNegative(visited),
                cascade_allocated: false,
            })
        } else {
            Ok(match self.allocate_unchecked(x, Some(y))? {
                Some(i) => StepOutcome {
                    prediction,
                    event: StepEvent::Allocated(i),
                    cascade_allocated: true,
                },
                None => StepOutcome {
                    prediction,
                    event: StepEvent::AllocationFailed,
                    cascade_allocated: true,
                },
            })
        }
    }

    /// Replace a pseudo-label with a real class label. The only legal
    /// label transition besides allocation.
    pub fn assign_label(&mut self, index: usize, real_label: i64) -> Result<(), PoolError> {
        if real_label < 1 {
            return Err(PoolError::InvalidLabel(real_label));
        }
        let proto = self
            .prototypes
            .get_mut(index)
            .ok_or(PoolError::UnallocatedIndex(index))?;
        if proto.label > 0 {
            return Err(PoolError::LabelAlreadyAssigned {
                index,
                label: proto.label,
            });
        }
        proto.label = real_label;
        Ok(())
    }

    /// Deep, independent copy for concurrent read-only prediction.
    pub fn snapshot(&self) -> Self {
        self.clone()
    }

    pub(crate) fn from_parts(
        config: PoolConfig,
        prototypes: Vec<Prototype>,
        next_pseudo_label: i64,
    ) -> Result<Self, PoolError> {
        config.validate()?;
        if prototypes.len() > config.capacity {
            return Err(PoolError::Format(format!(
                "{} prototypes exceed capacity {}",
                prototypes.len(),
                config.capacity
            )));
        }
        for p in &prototypes {
            if p.center.len() != config.dimension {
                return Err(PoolError::Format("prototype dimension mismatch".into()));
            }
        }
        Ok(Self {
            config,
            prototypes,
            next_pseudo_label,
        })
    }
}
