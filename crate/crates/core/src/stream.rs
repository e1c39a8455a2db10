//! Stream data model: instances, the supervised/unsupervised split and batching.
//!
//! Ground-truth labels of the unsupervised suffix live in a separate
//! evaluation channel. Model-facing code only ever sees [`Batch`], which
//! carries feature vectors and nothing else.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gng::GngParams;

/// Dense class identifier in `0..n_classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The declared label set `Y = {0, .., n_classes - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    n_classes: usize,
}

impl ClassSet {
    pub fn new(n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidParameter("class set must be non-empty".into()));
        }
        Ok(Self { n_classes })
    }

    pub fn len(&self) -> usize {
        self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.n_classes == 0
    }

    pub fn contains(&self, c: ClassId) -> bool {
        c.index() < self.n_classes
    }

    pub fn iter(&self) -> impl Iterator<Item = ClassId> {
        (0..self.n_classes as u32).map(ClassId)
    }

    pub fn check(&self, c: ClassId) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::UnknownLabel { label: c.0, n_classes: self.n_classes })
        }
    }
}

/// One stream sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub features: Vec<f64>,
    pub label: Option<ClassId>,
}

impl LabeledInstance {
    pub fn new(features: Vec<f64>, label: ClassId) -> Self {
        Self { features, label: Some(label) }
    }

    pub fn unlabeled(features: Vec<f64>) -> Self {
        Self { features, label: None }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Checks that every instance has finite features of one common dimension
/// and, when labeled, a label inside `classes`. Returns the dimension.
pub fn validate_instances(instances: &[LabeledInstance], classes: &ClassSet) -> Result<usize> {
    let first = instances.first().ok_or(Error::EmptyInput("instances"))?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter("feature vectors must be non-empty".into()));
    }
    for (index, inst) in instances.iter().enumerate() {
        if inst.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: inst.dim() });
        }
        if inst.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(label) = inst.label {
            classes.check(label)?;
        }
    }
    Ok(dim)
}

/// Supervised prefix plus unsupervised suffix of a stream.
///
/// Suffix labels are kept apart from the suffix features and are only
/// reachable through [`StreamSplit::ground_truth`].
#[derive(Debug, Clone)]
pub struct StreamSplit {
    supervised: Vec<LabeledInstance>,
    unsupervised: Vec<Vec<f64>>,
    truth: Vec<ClassId>,
    classes: ClassSet,
}

impl StreamSplit {
    pub fn supervised(&self) -> &[LabeledInstance] {
        &self.supervised
    }

    /// Feature vectors of the unsupervised suffix, labels stripped.
    pub fn unsupervised_features(&self) -> &[Vec<f64>] {
        &self.unsupervised
    }

    /// Evaluation channel: true labels of the unsupervised suffix.
    pub fn ground_truth(&self) -> &[ClassId] {
        &self.truth
    }

    pub fn classes(&self) -> ClassSet {
        self.classes
    }

    /// Size of the supervised prefix (`T_s`).
    pub fn t_s(&self) -> usize {
        self.supervised.len()
    }

    pub fn suffix_len(&self) -> usize {
        self.unsupervised.len()
    }

    pub fn dim(&self) -> usize {
        self.supervised[0].dim()
    }

    /// Replaces the evaluation channel. Used to check that nothing on the
    /// prediction path reads it.
    pub fn with_ground_truth(mut self, truth: Vec<ClassId>) -> Result<Self> {
        if truth.len() != self.truth.len() {
            return Err(Error::LengthMismatch { left: truth.len(), right: self.truth.len() });
        }
        for &c in &truth {
            self.classes.check(c)?;
        }
        self.truth = truth;
        Ok(self)
    }

    /// Reassembles the suffix as labeled instances (evaluation use only).
    pub fn unsupervised_instances(&self) -> Vec<LabeledInstance> {
        self.unsupervised
            .iter()
            .zip(&self.truth)
            .map(|(x, &y)| LabeledInstance::new(x.clone(), y))
            .collect()
    }
}

/// Splits a fully labeled stream into its first `floor(fraction * len)`
/// instances (supervised) and the remainder.
pub fn split_stream(
    instances: &[LabeledInstance],
    labeled_fraction: f64,
    classes: ClassSet,
) -> Result<StreamSplit> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("stream"));
    }
    if !(labeled_fraction > 0.0 && labeled_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "labeled fraction must lie in (0,1), got {labeled_fraction}"
        )));
    }
    validate_instances(instances, &classes)?;
    if let Some(index) = instances.iter().position(|i| i.label.is_none()) {
        return Err(Error::MissingLabel { index });
    }

    let t_s = (labeled_fraction * instances.len() as f64).floor() as usize;
    if t_s == 0 {
        return Err(Error::Degenerate("labeled fraction yields an empty supervised prefix".into()));
    }
    if t_s >= instances.len() {
        return Err(Error::Degenerate("labeled fraction yields an empty unsupervised suffix".into()));
    }

    let (head, tail) = instances.split_at(t_s);
    Ok(StreamSplit {
        supervised: head.to_vec(),
        unsupervised: tail.iter().map(|i| i.features.clone()).collect(),
        truth: tail.iter().map(|i| i.label.expect("checked above")).collect(),
        classes,
    })
}

/// A contiguous group of unsupervised feature vectors.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    /// Batch counter, starting at 1.
    pub index: usize,
    /// Position of the first instance within the unsupervised suffix.
    pub offset: usize,
    pub instances: &'a [Vec<f64>],
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Batch size for `num_batches` batches over `suffix_len` instances.
pub fn batch_size(suffix_len: usize, num_batches: usize) -> Result<usize> {
    if num_batches == 0 {
        return Err(Error::InvalidParameter("number of batches must be at least 1".into()));
    }
    if suffix_len == 0 {
        return Err(Error::EmptyInput("unsupervised suffix"));
    }
    Ok(suffix_len.div_ceil(num_batches))
}

/// Cuts the unsupervised suffix into batches of `ceil(len / num_batches)`.
/// The last batch may be shorter, and there may be fewer than
/// `num_batches` batches when the ceiling leaves nothing for the tail.
pub fn batch_iter(split: &StreamSplit, num_batches: usize) -> Result<impl Iterator<Item = Batch<'_>>> {
    let size = batch_size(split.suffix_len(), num_batches)?;
    Ok(split
        .unsupervised_features()
        .chunks(size)
        .enumerate()
        .map(move |(i, chunk)| Batch { index: i + 1, offset: i * size, instances: chunk }))
}

/// Ratio between the most and the least populated class among labeled
/// instances. Every class in `classes` must occur at least once.
pub fn class_imbalance_ratio(supervised: &[LabeledInstance], classes: &ClassSet) -> Result<f64> {
    let counts = class_counts(supervised, classes)?;
    let mut max = 0usize;
    let mut min = usize::MAX;
    for c in classes.iter() {
        let n = counts.get(&c).copied().unwrap_or(0);
        if n == 0 {
            return Err(Error::AbsentClass(c.0));
        }
        max = max.max(n);
        min = min.min(n);
    }
    Ok(max as f64 / min as f64)
}

pub fn class_counts(
    instances: &[LabeledInstance],
    classes: &ClassSet,
) -> Result<BTreeMap<ClassId, usize>> {
    let mut counts = BTreeMap::new();
    for (index, inst) in instances.iter().enumerate() {
        let label = inst.label.ok_or(Error::MissingLabel { index })?;
        classes.check(label)?;
        *counts.entry(label).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Parameters of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub labeled_fraction: f64,
    pub num_batches: usize,
    /// Base prototype budget `G`, scaled by class imbalance.
    pub g_base: usize,
    /// Neighbours voting on stream instances.
    pub k_predict: usize,
    /// Neighbours voting on new prototype labels.
    pub k_gng: usize,
    /// Presentations of each batch to the neural gas.
    pub passes: usize,
    pub seed: u64,
    /// Reference window of the sliding baseline; `None` means the size of
    /// the supervised prefix.
    pub sld_window: Option<usize>,
    /// `max_nodes` is overwritten with the imbalance-scaled budget.
    pub gng: GngParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            labeled_fraction: 0.05,
            num_batches: 100,
            g_base: 100,
            k_predict: 5,
            k_gng: 3,
            passes: 3,
            seed: 0,
            sld_window: None,
            gng: GngParams::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction < 1.0) {
            return bad("labeled_fraction must lie in (0,1)");
        }
        if self.num_batches == 0 {
            return bad("num_batches must be positive");
        }
        if self.g_base == 0 {
            return bad("g_base must be positive");
        }
        if self.k_predict == 0 || self.k_gng == 0 {
            return bad("k values must be positive");
        }
        if self.passes == 0 {
            return bad("passes must be positive");
        }
        if self.sld_window == Some(0) {
            return bad("sld_window must be positive");
        }
        self.gng.validate_rates()
    }
}
