//! Seeded synthetic stream generator: separable spherical clusters with
//! optional slow rotation of designated cluster means.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{normalize, DataError, Sample};

/// Frames per synthetic "video" block.
pub const FRAMES_PER_VIDEO: i64 = 60;

const MEAN_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Slow rotation of selected cluster means within a fixed 2-D subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    /// Radians advanced per emitted training sample (global step count).
    pub angular_velocity: f64,
    /// Global cluster indices that drift.
    pub target_clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// Cluster count per class; a single entry is broadcast to all classes.
    pub clusters_per_class: Vec<usize>,
    pub dimension: usize,
    /// Samples per cluster, for the train and test split each.
    pub samples_per_cluster: usize,
    /// Gaussian noise scale around the cluster mean.
    pub concentration: f64,
    pub drift: Option<DriftSpec>,
    pub seed: u64,
    /// Separability guard: pairwise dot of means from different classes
    /// stays at or below this value.
    pub max_mean_dot: f64,
    /// When set, cluster means within a class are placed at exactly this
    /// dot product to the class's first cluster mean.
    pub same_class_dot: Option<f64>,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, clusters_per_class: usize, dimension: usize) -> Self {
        Self {
            num_classes,
            clusters_per_class: vec![clusters_per_class],
            dimension,
            samples_per_cluster: 120,
            concentration: 0.1,
            drift: None,
            seed: 0,
            max_mean_dot: 0.5,
            same_class_dot: None,
        }
    }

    fn validate(&self) -> Result<Vec<usize>, DataError> {
        if self.num_classes == 0 || self.dimension == 0 || self.samples_per_cluster == 0 {
            return Err(DataError::InvalidSpec("all counts must be positive".into()));
        }
        if self.concentration < 0.0 {
            return Err(DataError::InvalidSpec("concentration must be >= 0".into()));
        }
        let clusters = match self.clusters_per_class.len() {
            1 => vec![self.clusters_per_class[0]; self.num_classes],
            n if n == self.num_classes => self.clusters_per_class.clone(),
            _ => {
                return Err(DataError::InvalidSpec(
                    "clusters_per_class must have one entry or one per class".into(),
                ))
            }
        };
        if clusters.iter().any(|&k| k == 0) {
            return Err(DataError::InvalidSpec("cluster counts must be positive".into()));
        }
        Ok(clusters)
    }
}

/// Generating truth for evaluating against the synthetic stream.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Initial cluster means, in global cluster order.
    pub cluster_means: Vec<Vec<f64>>,
    /// Means after all train-stream drift has been applied.
    pub final_means: Vec<Vec<f64>>,
    /// Class id (1..C) owning each global cluster.
    pub cluster_class: Vec<i64>,
    /// Generating global cluster index per train sample (pre-ordering).
    pub train_assignments: Vec<usize>,
    pub test_assignments: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub truth: GroundTruth,
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random unit vector orthogonal to `base`.
fn orthogonal_unit(rng: &mut ChaCha8Rng, base: &[f64]) -> Vec<f64> {
    loop {
        let mut v = unit_gaussian(rng, base.len());
        let proj = dot64(&v, base);
        for (vi, bi) in v.iter_mut().zip(base) {
            *vi -= proj * bi;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn place_means(
    spec: &SyntheticSpec,
    clusters: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<i64>), DataError> {
    let mut means: Vec<Vec<f64>> = Vec::new();
    let mut classes: Vec<i64> = Vec::new();
    for (ci, &k) in clusters.iter().enumerate() {
        let class = ci as i64 + 1;
        let class_start = means.len();
        for j in 0..k {
            let mut placed = false;
            for _ in 0..MEAN_PLACEMENT_ATTEMPTS {
                let candidate = match (j, spec.same_class_dot) {
                    (0, _) | (_, None) => unit_gaussian(rng, spec.dimension),
                    (_, Some(t)) => {
                        let base = &means[class_start];
                        let orth = orthogonal_unit(rng, base);
                        let (c, s) = (t, (1.0 - t * t).max(0.0).sqrt());
                        base.iter().zip(&orth).map(|(b, o)| c * b + s * o).collect()
                    }
                };
                let separable = means.iter().enumerate().all(|(mi, m)| {
                    let same_class = mi >= class_start;
                    same_class && spec.same_class_dot.is_some()
                        || dot64(&candidate, m) <= spec.max_mean_dot
                });
                if separable {
                    means.push(candidate);
                    classes.push(class);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(DataError::MeanPlacement);
            }
        }
    }
    Ok((means, classes))
}



struct DriftState {
    /// (cluster, plane u, plane v) for each drifting cluster.
    planes: Vec<(usize, Vec<f64>, Vec<f64>)>,
    angular_velocity: f64,
}

impl DriftState {
    fn mean_at(&self, cluster: usize, initial: &[f64], step: u64) -> Vec<f64> {
        for (c, u, v) in &self.planes {
            if *c == cluster {
                let theta = self.angular_velocity * step as f64;
                let (ct, st) = (theta.cos(), theta.sin());
                return u.iter().zip(v).map(|(ui, vi)| ct * ui + st * vi).collect();
            }
        }
        initial.to_vec()
    }
}

/// Generate a fully deterministic train/test pair of sample sets.
///
/// Samples come out grouped by class, then cluster, in video blocks of
/// 60 frames; `instance_id` is the cluster index within its class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    let clusters = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (means, cluster_class) = place_means(spec, &clusters, &mut rng)?;

    let drift = spec.drift.as_ref().map(|d| DriftState {
        planes: d
            .target_clusters
            .iter()
            .map(|&c| {
                let u = means[c].clone();
                let v = orthogonal_unit(&mut rng, &u);
                (c, u, v)
            })
            .collect(),
        angular_velocity: d.angular_velocity,
    });

    let mut step: u64 = 0;
    let mut train = Vec::new();
    let mut train_assignments = Vec::new();
    for (cluster, mean) in means.iter().enumerate() {
        let class = cluster_class[cluster];
        let instance = cluster_class[..cluster].iter().filter(|&&c| c == class).count() as i64;
        for i in 0..spec.samples_per_cluster {
            let current = match &drift {
                Some(d) => d.mean_at(cluster, mean, step),
                None => mean.clone(),
            };
            let sample = noisy_sample(&current, spec.concentration, &mut rng)?;
            train.push(Sample {
                features: sample,
                label: Some(class),
                instance_id: instance,
                video_id: i as i64 / FRAMES_PER_VIDEO,
                frame_index: i as i64 % FRAMES_PER_VIDEO,
            });
            train_assignments.push(cluster);
            step += 1;
        }
    }

    let final_means: Vec<Vec<f64>> = means
        .iter()
        .enumerate()
        .map(|(cluster, mean)| match &drift {
            Some(d) => d.mean_at(cluster, mean, step),
            None => mean.clone(),
        })
        .collect();

    let mut test = Vec::new();
    let mut test_assignments = Vec::new();
    for (cluster, mean) in final_means.iter().enumerate() {
        let class = cluster_class[cluster];
        let instance = cluster_class[..cluster].iter().filter(|&&c| c == class).count() as i64;
        for i in 0..spec.samples_per_cluster {
            let sample = noisy_sample(mean, spec.concentration, &mut rng)?;
            test.push(Sample {
                features: sample,
                label: Some(class),
                instance_id: instance,
                video_id: i as i64 / FRAMES_PER_VIDEO,
                frame_index: i as i64 % FRAMES_PER_VIDEO,
            });
            test_assignments.push(cluster);
        }
    }

    Ok(SyntheticData {
        train,
        test,
        truth: GroundTruth {
            cluster_means: means,
            final_means,
            cluster_class,
            train_assignments,
            test_assignments,
        },
    })
}

fn noisy_sample(
    mean: &[f64],
    concentration: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, DataError> {
    let noisy: Vec<f64> = mean
        .iter()
        .map(|&m| {
            let n: f64 = rng.sample(StandardNormal);
            m + concentration * n
        })
        .collect();
    normalize(&noisy).ok_or(DataError::ZeroNorm { row: 0 })
}
