//! Feature-vector ingestion, normalization and stream ordering.
//!
//! CSV convention: header row required, feature columns first, then
//! `label` (may be empty), `instance_id`, `video_id`, `frame_index`.
//!
//! Binary feature file, little-endian: magic `CLPD`, u32 dimension,
//! u64 row count, then per row: dimension x f32 features and four i64
//! metadata fields (label, instance_id, video_id, frame_index) where a
//! label of -1 encodes "absent" on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const FEATURE_MAGIC: &[u8; 4] = b"CLPD";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: zero-norm feature vector")]
    ZeroNorm { row: usize },
    #[error("row {row}: expected {expected} columns, got {got}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}: bad value in column {column}: {message}")]
    BadField {
        row: usize,
        column: String,
        message: String,
    },
    #[error("header must end with label,instance_id,video_id,frame_index")]
    BadHeader,
    #[error("bad feature file: {0}")]
    Format(String),
    #[error("class {class}: requested {requested} videos but only {available} exist")]
    ShotsExceedVideos {
        class: i64,
        requested: usize,
        available: usize,
    },
    #[error("sample without a class label cannot be ordered by instance")]
    UnlabeledSample,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("could not place separable cluster means (dimension too small for the requested cluster count?)")]
    MeanPlacement,
}

/// One stream element: a unit feature vector plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Positive class id, already remapped to 1..C; `None` = unlabeled.
    pub label: Option<i64>,
    pub instance_id: i64,
    pub video_id: i64,
    pub frame_index: i64,
}

/// L2-normalize a feature vector, rejecting (near-)zero vectors.
pub fn normalize(features: &[f64]) -> Option<Vec<f64>> {
    let n = features
        .iter()
        .map(|&v| v * v)
        .sum::<f64>()
        .sqrt();
    if n < 1e-12 || !n.is_finite() {
        return None;
    }
    Some(features.iter().map(|&v| v / n).collect())
}

/// Ingestion result: normalized samples plus the raw-label remapping
/// (`label_map[c - 1]` is the raw label that became class `c`).
#[derive(Debug, Clone)]
pub struct Ingested {
    pub samples: Vec<Sample>,
    pub label_map: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Binary,
}

pub fn ingest(path: impl AsRef<Path>, format: FileFormat) -> Result<Ingested, DataError> {
    match format {
        FileFormat::Csv => ingest_csv(path),
        FileFormat::Binary => ingest_binary(path),
    }
}

struct Remapper {
    map: BTreeMap<i64, i64>,
    order: Vec<i64>,
}

impl Remapper {
    fn new() -> Self {
        Self {
            map: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    /// First-appearance-order remapping into 1..C.
    fn remap(&mut self, raw: i64) -> i64 {
        if let Some(&c) = self.map.get(&raw) {
            return c;
        }
        let c = self.order.len() as i64 + 1;
        self.map.insert(raw, c);
        self.order.push(raw);
        c
    }
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let ncols = headers.len();
    if ncols < 5 {
        return Err(DataError::BadHeader);
    }
    let meta_names = ["label", "instance_id", "video_id", "frame_index"];
    for (i, name) in meta_names.iter().enumerate() {
        if headers.get(ncols - 4 + i) != Some(name) {
            return Err(DataError::BadHeader);
        }
    }
    let dim = ncols - 4;
    let mut remapper = Remapper::new();
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record?;
        if record.len() != ncols {
            return Err(DataError::Ragged {
                row,
                expected: ncols,
                got: record.len(),
            });
        }
        let mut features = Vec::with_capacity(dim);
        for i in 0..dim {
            let raw = record.get(i).unwrap();
            let v: f64 = raw.trim().parse().map_err(|e| DataError::BadField {
                row,
                column: headers.get(i).unwrap_or("?").to_string(),
                message: format!("{e}"),
            })?;
            features.push(v);
        }
        let parse_meta = |i: usize| -> Result<i64, DataError> {
            let raw = record.get(dim + i).unwrap();
            raw.trim().parse().map_err(|e| DataError::BadField {
                row,
                column: meta_names[i].to_string(),
                message: format!("{e}"),
            })
        };
        let label_field = record.get(dim).unwrap().trim();
        let label = if label_field.is_empty() {
            None
        } else {
            Some(remapper.remap(parse_meta(0)?))
        };
        let features = normalize(&features).ok_or(DataError::ZeroNorm { row })?;
        samples.push(Sample {
            features,
            label,
            instance_id: parse_meta(1)?,
            video_id: parse_meta(2)?,
            frame_index: parse_meta(3)?,
        });
    }
    Ok(Ingested {
        samples,
        label_map: remapper.order,
    })
}

pub fn ingest_binary(path: impl AsRef<Path>) -> Result<Ingested, DataError> {
    let bytes = fs::read(path.as_ref())?;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], DataError> {
        if *pos + n > bytes.len() {
            return Err(DataError::Format("truncated feature file".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let mut pos = 0usize;
    if take(&mut pos, 4)? != FEATURE_MAGIC {
        return Err(DataError::Format("bad magic, expected CLPD".into()));
    }
    let dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let rows = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let mut remapper = Remapper::new();
    let mut samples = Vec::with_capacity(rows);
    for row in 0..rows {
        let mut features = Vec::with_capacity(dim);
        for _ in 0..dim {
            features.push(f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as f64);
        }
        let mut meta = [0i64; 4];
        for m in &mut meta {
            *m = i64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
        let label = if meta[0] == -1 {
            None
        } else {
            Some(remapper.remap(meta[0]))
        };
        let features = normalize(&features).ok_or(DataError::ZeroNorm { row: row + 1 })?;
        samples.push(Sample {
            features,
            label,
            instance_id: meta[1],
            video_id: meta[2],
            frame_index: meta[3],
        });
    }
    if pos != bytes.len() {
        return Err(DataError::Format("trailing bytes in feature file".into()));
    }
    Ok(Ingested {
        samples,
        label_map: remapper.order,
    })
}

pub fn write_binary(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DataError> {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut out = Vec::with_capacity(16 + samples.len() * (dim * 4 + 32));
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        for &v in &s.features {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&s.label.unwrap_or(-1).to_le_bytes());
        out.extend_from_slice(&s.instance_id.to_le_bytes());
        out.extend_from_slice(&s.video_id.to_le_bytes());
        out.extend_from_slice(&s.frame_index.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DataError> {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut f = fs::File::create(path)?;
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    header.extend(["label", "instance_id", "video_id", "frame_index"].map(String::from));
    writeln!(f, "{}", header.join(","))?;
    for s in samples {
        let mut cols: Vec<String> = s.features.iter().map(|v| format!("{v}")).collect();
        cols.push(s.label.map_or(String::new(), |l| l.to_string()));
        cols.push(s.instance_id.to_string());
        cols.push(s.video_id.to_string());
        cols.push(s.frame_index.to_string());
        writeln!(f, "{}", cols.join(","))?;
    }
    Ok(())
}

/// How a stream is ordered for one-pass training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamOrdering {
    /// All videos, grouped per class instance in sequence.
    Instance,
    /// A limited number of training videos per class (default 1), picked
    /// round-robin across the class's instances.
    LowShotInstance,
    /// Deterministic shuffle of the whole stream.
    InterleavedRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelVisibility {
    All,
    None,
    BaseOnly(BTreeSet<i64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSpec {
    pub ordering: StreamOrdering,
    /// Videos per class for `LowShotInstance`; defaults to 1.
    pub shots_per_class: Option<usize>,
    pub label_visibility: LabelVisibility,
}

impl StreamSpec {
    pub fn instance() -> Self {
        Self {
            ordering: StreamOrdering::Instance,
            shots_per_class: None,
            label_visibility: LabelVisibility::All,
        }
    }

    pub fn low_shot(shots: usize) -> Self {
        Self {
            ordering: StreamOrdering::LowShotInstance,
            shots_per_class: Some(shots),
            label_visibility: LabelVisibility::All,
        }
    }
}

/// Order (and label-filter) samples into a training stream.
pub fn build_stream(samples: &[Sample], spec: &StreamSpec) -> Result<Vec<Sample>, DataError> {
    let mut stream: Vec<Sample> = match &spec.ordering {
        StreamOrdering::Instance => {
            let mut ordered = samples.to_vec();
            sort_by_provenance(&mut ordered)?;
            ordered
        }
        StreamOrdering::LowShotInstance => {
            let shots = spec.shots_per_class.unwrap_or(1);
            if shots == 0 {
                return Err(DataError::InvalidSpec("shots_per_class must be >= 1".into()));
            }
            let mut ordered = samples.to_vec();
            sort_by_provenance(&mut ordered)?;
            select_shots(&ordered, shots)?
        }
        StreamOrdering::InterleavedRandom { seed } => {
            let mut ordered = samples.to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            ordered.shuffle(&mut rng);
            ordered
        }
    };
    match &spec.label_visibility {
        LabelVisibility::All => {}
        LabelVisibility::None => {
            for s in &mut stream {
                s.label = None;
            }
        }
        LabelVisibility::BaseOnly(base) => {
            for s in &mut stream {
                if let Some(l) = s.label {
                    if !base.contains(&l) {
                        s.label = None;
                    }
                }
            }
        }
    }
    Ok(stream)
}

fn sort_by_provenance(samples: &mut [Sample]) -> Result<(), DataError> {
    if samples.iter().any(|s| s.label.is_none()) {
        return Err(DataError::UnlabeledSample);
    }
    samples.sort_by_key(|s| (s.label.unwrap(), s.instance_id, s.video_id, s.frame_index));
    Ok(())
}

/// Pick `shots` videos per class, round-robin over the class's instances,
/// keeping every frame of each selected video.
fn select_shots(ordered: &[Sample], shots: usize) -> Result<Vec<Sample>, DataError> {
    // class -> instance -> videos in order
    let mut videos: BTreeMap<i64, BTreeMap<i64, Vec<i64>>> = BTreeMap::new();
    for s in ordered {
        let class = s.label.unwrap();
        let vids = videos.entry(class).or_default().entry(s.instance_id).or_default();
        if vids.last() != Some(&s.video_id) && !vids.contains(&s.video_id) {
            vids.push(s.video_id);
        }
    }
    let mut selected: BTreeMap<i64, BTreeSet<(i64, i64)>> = BTreeMap::new();
    for (&class, instances) in &videos {
        let available: usize = instances.values().map(|v| v.len()).sum();
        if shots > available {
            return Err(DataError::ShotsExceedVideos {
                class,
                requested: shots,
                available,
            });
        }
        let keys: Vec<i64> = instances.keys().copied().collect();
        let chosen = selected.entry(class).or_default();
        let mut round = 0usize;
        while chosen.len() < shots {
            for &inst in &keys {
                if chosen.len() >= shots {
                    break;
                }
                if let Some(&vid) = instances[&inst].get(round) {
                    chosen.insert((inst, vid));
                }
            }
            round += 1;
        }
    }
    Ok(ordered
        .iter()
        .filter(|s| selected[&s.label.unwrap()].contains(&(s.instance_id, s.video_id)))
        .cloned()
        .collect())
}
