//! CSV ingestion and synthetic drifting streams.
//!
//! Streams are numeric CSV: one row per instance, features then the class
//! label (the label column is configurable). Labels may be any string and
//! are mapped to dense ids in first-appearance order.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassId, ClassSet, LabeledInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    RectilinearTranslation,
    Rotation,
    Surround,
    Expansion,
    MultiModal,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_instances: usize,
    /// Instances between drift steps; unknown for ingested files.
    pub drift_interval: Option<usize>,
    pub drift_kind: Option<DriftKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Last,
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "last" {
            return Ok(LabelColumn::Last);
        }
        s.parse()
            .map(LabelColumn::Index)
            .map_err(|_| Error::InvalidParameter(format!("label column must be `last` or an index, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: LabelColumn,
    pub has_header: bool,
    /// Fraction of leading rows whose per-feature range drives min-max
    /// scaling of the whole stream. `None` leaves features untouched.
    pub normalize_prefix: Option<f64>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { label_column: LabelColumn::Last, has_header: false, normalize_prefix: Some(0.05) }
    }
}

/// Per-feature min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit(instances: &[LabeledInstance]) -> Result<Self> {
        let first = instances.first().ok_or(Error::EmptyInput("normalisation sample"))?;
        let mut min = first.features.clone();
        let mut max = first.features.clone();
        for inst in instances {
            for (j, &v) in inst.features.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Maps `[min, max]` to `[0, 1]`. Constant features are shifted only.
    pub fn apply(&self, instances: &mut [LabeledInstance]) {
        for inst in instances {
            for (j, v) in inst.features.iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                let scale = if range > 0.0 { range } else { 1.0 };
                *v = (*v - self.min[j]) / scale;
            }
        }
    }
}

/// Scales the whole stream with statistics of its first
/// `floor(fraction * len)` instances (at least one).
pub fn normalize_by_prefix(instances: &mut [LabeledInstance], fraction: f64) -> Result<MinMax> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("normalisation prefix {fraction} must lie in (0,1]")));
    }
    let n = ((fraction * instances.len() as f64).floor() as usize).max(1);
    let mm = MinMax::fit(&instances[..n.min(instances.len())])?;
    mm.apply(instances);
    Ok(mm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub instances: Vec<LabeledInstance>,
    pub classes: ClassSet,
    /// Original label text for each dense class id.
    pub class_names: Vec<String>,
    pub normalization: Option<MinMax>,
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    read_csv(file, &name, schema)
}

pub fn read_csv<R: Read>(reader: R, name: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut width: Option<usize> = None;
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, ClassId> = HashMap::new();
    let mut instances = Vec::new();

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1 + usize::from(schema.has_header);
        let rec = rec.map_err(|e| Error::Csv { row, message: e.to_string() })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Csv { row, message: format!("expected {w} columns, found {}", rec.len()) });
        }
        if w < 2 {
            return Err(Error::Csv { row, message: "need at least one feature and a label".into() });
        }
        let label_at = match schema.label_column {
            LabelColumn::Last => w - 1,
            LabelColumn::Index(k) if k < w => k,
            LabelColumn::Index(k) => {
                return Err(Error::Csv { row, message: format!("label column {k} out of range") });
            }
        };

        let mut features = Vec::with_capacity(w - 1);
        for (j, field) in rec.iter().enumerate() {
            if j == label_at {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Csv { row, message: format!("non-numeric feature `{field}` in column {j}") })?;
            if !v.is_finite() {
                return Err(Error::Csv { row, message: format!("non-finite feature `{field}` in column {j}") });
            }
            features.push(v);
        }

        let text = &rec[label_at];
        let label = *ids.entry(text.to_string()).or_insert_with(|| {
            names.push(text.to_string());
            ClassId(names.len() as u32 - 1)
        });
        instances.push(LabeledInstance::new(features, label));
    }

    if instances.is_empty() {
        return Err(Error::EmptyInput("csv file"));
    }

    let normalization = match schema.normalize_prefix {
        Some(f) => Some(normalize_by_prefix(&mut instances, f)?),
        None => None,
    };

    let spec = DatasetSpec {
        name: name.to_string(),
        n_features: instances[0].dim(),
        n_classes: names.len(),
        n_instances: instances.len(),
        drift_interval: None,
        drift_kind: None,
    };
    Ok(Dataset { spec, instances, classes: ClassSet::new(names.len())?, class_names: names, normalization })
}

/// Writes features then the label name, one row per instance, no header.
/// Reading the output back with [`read_csv`] and no normalisation yields
/// the same features and, for names in first-appearance order, the same ids.
pub fn write_csv<W: Write>(writer: W, instances: &[LabeledInstance], class_names: &[String]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for (i, inst) in instances.iter().enumerate() {
        let label = inst.label.ok_or(Error::MissingLabel { index: i })?;
        let name = class_names
            .get(label.index())
            .ok_or(Error::UnknownLabel { label: label.0, n_classes: class_names.len() })?;
        let mut row: Vec<String> = inst.features.iter().map(|v| format!("{v:?}")).collect();
        row.push(name.clone());
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One Gaussian mode of a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub class: ClassId,
    pub center: Vec<f64>,
    /// Per-feature standard deviation (diagonal covariance).
    pub std: Vec<f64>,
    /// Displacement per drift step for translating kinds; for surround, its
    /// norm is the distance travelled per step and a zero vector means the
    /// concept stays put.
    pub velocity: Vec<f64>,
}

/// How concept centres evolve between drift steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Motion {
    Static,
    RectilinearTranslation,
    /// Rotation of the first two coordinates about `pivot`.
    Rotation { pivot: Vec<f64>, angle_step: f64 },
    /// Moving concepts walk counter-clockwise around the axis-aligned
    /// rectangle centred on `pivot` that has their initial centre as a corner.
    Surround { pivot: Vec<f64> },
    /// Rotation plus a periodic radial scale `1 + amplitude sin(2π s / period)`.
    Expansion { pivot: Vec<f64>, angle_step: f64, amplitude: f64, period: f64 },
    /// Several concepts per class, each translating with its own velocity.
    MultiModal,
}

impl Motion {
    pub fn kind(&self) -> DriftKind {
        match self {
            Motion::Static => DriftKind::Static,
            Motion::RectilinearTranslation => DriftKind::RectilinearTranslation,
            Motion::Rotation { .. } => DriftKind::Rotation,
            Motion::Surround { .. } => DriftKind::Surround,
            Motion::Expansion { .. } => DriftKind::Expansion,
            Motion::MultiModal => DriftKind::MultiModal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub name: String,
    pub n_instances: usize,
    pub drift_interval: usize,
    pub n_classes: usize,
    pub concepts: Vec<Concept>,
    pub motion: Motion,
    pub seed: u64,
}

fn rotate_about(p: &[f64], pivot: &[f64], angle: f64, scale: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    let dx = p[0] - pivot[0];
    let dy = p[1] - pivot[1];
    let mut out = p.to_vec();
    out[0] = pivot[0] + scale * (c * dx - s * dy);
    out[1] = pivot[1] + scale * (s * dx + c * dy);
    out
}

/// Point at arc length `arc` along the counter-clockwise rectangle walk
/// from `start`, a corner of the rectangle centred on `pivot`.
fn rectangle_walk(start: &[f64], pivot: &[f64], arc: f64) -> Vec<f64> {
    let hx = (start[0] - pivot[0]).abs();
    let hy = (start[1] - pivot[1]).abs();
    let corners = [
        [pivot[0] + hx, pivot[1] + hy],
        [pivot[0] - hx, pivot[1] + hy],
        [pivot[0] - hx, pivot[1] - hy],
        [pivot[0] + hx, pivot[1] - hy],
    ];
    let first = match (start[0] >= pivot[0], start[1] >= pivot[1]) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    };
    let perimeter = 4.0 * (hx + hy);
    let mut rest = arc.rem_euclid(perimeter);
    let mut out = start.to_vec();
    for k in 0..4 {
        let a = corners[(first + k) % 4];
        let b = corners[(first + k + 1) % 4];
        let len = (b[0] - a[0]).abs() + (b[1] - a[1]).abs();
        if rest <= len || k == 3 {
            let f = if len > 0.0 { (rest / len).min(1.0) } else { 0.0 };
            out[0] = a[0] + f * (b[0] - a[0]);
            out[1] = a[1] + f * (b[1] - a[1]);
            return out;
        }
        rest -= len;
    }
    out
}

impl GeneratorParams {
    pub fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            name: self.name.clone(),
            n_features: self.concepts.first().map_or(0, |c| c.center.len()),
            n_classes: self.n_classes,
            n_instances: self.n_instances,
            drift_interval: Some(self.drift_interval),
            drift_kind: Some(self.motion.kind()),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.n_classes).map(|c| c.to_string()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_classes < 2 {
            return bad("need at least two classes".into());
        }
        if self.n_instances == 0 || self.drift_interval == 0 {
            return bad("instance count and drift interval must be positive".into());
        }
        let dim = match self.concepts.first() {
            Some(c) => c.center.len(),
            None => return bad("no concepts".into()),
        };
        if dim == 0 {
            return bad("concepts need at least one feature".into());
        }
        for c in &self.concepts {
            if c.center.len() != dim || c.std.len() != dim || c.velocity.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.center.len() });
            }
            if c.class.index() >= self.n_classes {
                return Err(Error::UnknownLabel { label: c.class.0, n_classes: self.n_classes });
            }
            if c.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad(format!("class {} has a non-positive standard deviation", c.class));
            }
            if c.center.iter().chain(&c.velocity).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: 0 });
            }
        }
        for k in 0..self.n_classes as u32 {
            if !self.concepts.iter().any(|c| c.class == ClassId(k)) {
                return Err(Error::AbsentClass(k));
            }
        }
        let pivot = match &self.motion {
            Motion::Rotation { pivot, .. } | Motion::Surround { pivot } | Motion::Expansion { pivot, .. } => {
                Some(pivot)
            }
            _ => None,
        };
        if let Some(p) = pivot {
            if dim < 2 {
                return bad("planar motions need at least two features".into());
            }
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
        }
        if let Motion::Expansion { period, amplitude, .. } = self.motion {
            if period.is_nan() || period <= 0.0 || amplitude.is_nan() || amplitude.abs() >= 1.0 {
                return bad("expansion needs period > 0 and |amplitude| < 1".into());
            }
        }
        if let Motion::Surround { pivot } = &self.motion {
            for c in self.concepts.iter().filter(|c| c.velocity.iter().any(|v| *v != 0.0)) {
                if c.center[0] == pivot[0] || c.center[1] == pivot[1] {
                    return bad("surround concepts must start off the pivot axes".into());
                }
            }
        }
        Ok(())
    }

    /// Centre of `concept` during drift step `step` (step 0 is the start).
    pub fn center_at(&self, concept: &Concept, step: usize) -> Vec<f64> {
        let s = step as f64;
        match &self.motion {
            Motion::Static => concept.center.clone(),
            Motion::RectilinearTranslation | Motion::MultiModal => {
                concept.center.iter().zip(&concept.velocity).map(|(c, v)| c + s * v).collect()
            }
            Motion::Rotation { pivot, angle_step } => rotate_about(&concept.center, pivot, s * angle_step, 1.0),
            Motion::Expansion { pivot, angle_step, amplitude, period } => {
                let scale = 1.0 + amplitude * (TAU * s / period).sin();
                rotate_about(&concept.center, pivot, s * angle_step, scale)
            }
            Motion::Surround { pivot } => {
                let speed = concept.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
                if speed == 0.0 {
                    concept.center.clone()
                } else {
                    rectangle_walk(&concept.center, pivot, s * speed)
                }
            }
        }
    }

    /// Samples the stream. Classes take turns; each class cycles through its
    /// concepts.
    pub fn generate(&self) -> Result<Vec<LabeledInstance>> {
        self.validate()?;
        let by_class: Vec<Vec<&Concept>> = (0..self.n_classes as u32)
            .map(|k| self.concepts.iter().filter(|c| c.class == ClassId(k)).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.n_instances);
        for i in 0..self.n_instances {
            let class = i % self.n_classes;
            let turn = i / self.n_classes;
            let concept = by_class[class][turn % by_class[class].len()];
            let center = self.center_at(concept, i / self.drift_interval);
            let features = center
                .iter()
                .zip(&concept.std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect();
            out.push(LabeledInstance::new(features, ClassId(class as u32)));
        }
        Ok(out)
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "static-2c",
    "rectilinear-1c",
    "rectilinear-2c",
    "rotation-4c",
    "expansion-4c",
    "surround-2c",
    "multimodal-2c",
];

fn concept(class: u32, center: [f64; 2], std: f64, velocity: [f64; 2]) -> Concept {
    Concept { class: ClassId(class), center: center.to_vec(), std: vec![std; 2], velocity: velocity.to_vec() }
}

/// Desk-scale analogs of common drifting-stream benchmarks.
///
/// * `static-2c`: two fixed Gaussians.
/// * `rectilinear-1c`: one class translates diagonally, the other stays.
/// * `rectilinear-2c`: both classes translate diagonally in parallel.
/// * `rotation-4c`: four classes rotating about a common centre.
/// * `expansion-4c`: rotation with periodic radial expansion.
/// * `surround-2c`: one class circles the other along a rectangle.
/// * `multimodal-2c`: two concepts per class with distinct velocities.
pub fn preset(name: &str, seed: u64) -> Option<GeneratorParams> {
    let p = |n_instances, drift_interval, n_classes, concepts, motion| GeneratorParams {
        name: name.to_string(),
        n_instances,
        drift_interval,
        n_classes,
        concepts,
        motion,
        seed,
    };
    let still = [0.0, 0.0];
    let params = match name {
        "static-2c" => p(
            16_000,
            400,
            2,
            vec![concept(0, [0.0, 0.0], 0.1, still), concept(1, [1.0, 0.0], 0.1, still)],
            Motion::Static,
        ),
        "rectilinear-1c" => p(
            16_000,
            400,
            2,
            vec![concept(0, [0.0, 0.0], 0.1, still), concept(1, [1.0, 0.0], 0.1, [0.05, 0.05])],
            Motion::RectilinearTranslation,
        ),
        "rectilinear-2c" => p(
            16_000,
            400,
            2,
            vec![concept(0, [0.0, 0.0], 0.1, [0.05, 0.05]), concept(1, [1.0, 0.0], 0.1, [0.05, 0.05])],
            Motion::RectilinearTranslation,
        ),
        "rotation-4c" => p(
            40_000,
            400,
            4,
            (0..4)
                .map(|k| {
                    let (s, c) = (k as f64 * TAU / 4.0).sin_cos();
                    concept(k, [c, s], 0.1, still)
                })
                .collect(),
            Motion::Rotation { pivot: vec![0.0, 0.0], angle_step: TAU / 100.0 },
        ),
        "expansion-4c" => p(
            40_000,
            400,
            4,
            (0..4)
                .map(|k| {
                    let (s, c) = (k as f64 * TAU / 4.0).sin_cos();
                    concept(k, [c, s], 0.1, still)
                })
                .collect(),
            Motion::Expansion { pivot: vec![0.0, 0.0], angle_step: TAU / 100.0, amplitude: 0.4, period: 50.0 },
        ),
        "surround-2c" => p(
            60_000,
            600,
            2,
            vec![concept(0, [0.0, 0.0], 0.1, still), concept(1, [1.5, 1.0], 0.1, [0.1, 0.0])],
            Motion::Surround { pivot: vec![0.0, 0.0] },
        ),
        "multimodal-2c" => p(
            20_000,
            500,
            2,
            vec![
                concept(0, [0.0, 0.0], 0.08, [0.03, 0.0]),
                concept(0, [0.0, 1.5], 0.08, [0.03, -0.01]),
                concept(1, [1.0, 0.0], 0.08, [0.03, 0.01]),
                concept(1, [1.0, 1.5], 0.08, [0.03, 0.0]),
            ],
            Motion::MultiModal,
        ),
        _ => return None,
    };
    Some(params)
}
