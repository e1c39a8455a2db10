//! Batch-wise stream classification: the prototype-tracking model and the
//! static, sliding-window and incremental k-NN baselines.
//!
//! All models consume [`Batch`] values, which carry feature vectors only.
//! True labels are attached to the trace afterwards from the split's
//! evaluation channel.

use std::collections::VecDeque;
use std::time::Instant;

use log::debug;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{pairwise_distances, solve_assignment};
use crate::error::{Error, Result};
use crate::gng::{GngModel, GngSnapshot};
use crate::knn::{predict_batch, ReferenceSet};
use crate::registration::{fit_rigid, project, RigidTransform, TransformRecord};
use crate::stream::{batch_iter, class_imbalance_ratio, validate_instances, Batch, ClassId, ClassSet, LabeledInstance, RunConfig, StreamSplit};

/// Labeled prototypes of one batch together with their projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub batch_index: usize,
    pub node_ids: Vec<u64>,
    pub positions: Vec<Vec<f64>>,
    pub labels: Vec<ClassId>,
    pub projected_positions: Vec<Vec<f64>>,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Projected prototypes with their labels, the reference set for the
    /// next batch.
    pub fn projected_refs(&self) -> Result<ReferenceSet> {
        ReferenceSet::new(self.projected_positions.clone(), self.labels.clone())
    }
}

/// Per-batch outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_index: usize,
    /// Offset of the batch within the unsupervised suffix.
    pub offset: usize,
    pub predictions: Vec<ClassId>,
    /// Evaluation channel; filled in after prediction.
    pub truth: Vec<ClassId>,
    /// Registration used to project this batch's prototypes.
    pub transform: Option<TransformRecord>,
    /// True when the rigid fit failed and the identity was used instead.
    pub identity_fallback: bool,
    pub prototype_count: usize,
    pub matched_pairs: usize,
    pub assignment_cost: Option<f64>,
    /// Excluded from serialisation so that traces are reproducible.
    #[serde(skip)]
    pub wall_time_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub method: Method,
    /// Imbalance-scaled prototype budget; `aigas` runs only.
    pub node_budget: Option<usize>,
    pub records: Vec<BatchRecord>,
}

impl PredictionTrace {
    pub fn predictions(&self) -> Vec<ClassId> {
        self.records.iter().flat_map(|r| r.predictions.iter().copied()).collect()
    }

    pub fn truth(&self) -> Vec<ClassId> {
        self.records.iter().flat_map(|r| r.truth.iter().copied()).collect()
    }

    pub fn wall_time_us(&self) -> u64 {
        self.records.iter().map(|r| r.wall_time_us).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Aigas,
    Stc,
    Sld,
    Inc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Aigas, Method::Stc, Method::Sld, Method::Inc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Aigas => "aigas",
            Method::Stc => "stc",
            Method::Sld => "sld",
            Method::Inc => "inc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// Prototype budget `round((1 + ξ) G)`.
pub fn node_budget(imbalance: f64, g_base: usize) -> usize {
    ((1.0 + imbalance) * g_base as f64).round() as usize
}

/// Per-batch output of [`AigasState::step`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub predictions: Vec<ClassId>,
    pub transform: RigidTransform,
    pub identity_fallback: bool,
    pub matched_pairs: usize,
    pub assignment_cost: f64,
}

/// Running state of the prototype-tracking classifier.
#[derive(Debug, Clone)]
pub struct AigasState {
    gng: GngModel,
    prototypes: PrototypeSet,
    classes: ClassSet,
    k_predict: usize,
    k_gng: usize,
    passes: usize,
    rng: ChaCha8Rng,
}

impl AigasState {
    /// Supervised phase: size the budget from class imbalance, grow the gas
    /// over the labeled prefix and label its nodes by k-NN against the
    /// labeled instances. The initial projection is the identity.
    pub fn init(supervised: &[LabeledInstance], classes: ClassSet, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        validate_instances(supervised, &classes)?;
        let imbalance = class_imbalance_ratio(supervised, &classes)?;
        let budget = node_budget(imbalance, cfg.g_base).max(2);
        let params = cfg.gng.clone().with_max_nodes(budget);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let features: Vec<Vec<f64>> = supervised.iter().map(|i| i.features.clone()).collect();
        let (a, b) = pick_distinct_pair(&features, &mut rng)?;
        let mut gng = GngModel::new(a, b, params)?;
        gng.fit_batch(&features, cfg.passes, &mut rng)?;

        let refs = ReferenceSet::from_pairs(
            supervised.iter().map(|i| (i.features.clone(), i.label.expect("validated by imbalance ratio"))),
        )?;
        let GngSnapshot { ids, positions } = gng.snapshot();
        let labels = predict_batch(&positions, &refs, cfg.k_predict)?;
        let prototypes = PrototypeSet {
            batch_index: 0,
            node_ids: ids,
            projected_positions: positions.clone(),
            positions,
            labels,
        };

        Ok(Self {
            gng,
            prototypes,
            classes,
            k_predict: cfg.k_predict,
            k_gng: cfg.k_gng,
            passes: cfg.passes,
            rng,
        })
    }

    pub fn prototypes(&self) -> &PrototypeSet {
        &self.prototypes
    }

    pub fn gng(&self) -> &GngModel {
        &self.gng
    }

    pub fn classes(&self) -> ClassSet {
        self.classes
    }

    pub fn node_budget(&self) -> usize {
        self.gng.params().max_nodes
    }

    /// Overrides the current prototype labels; used to probe which state a
    /// step depends on.
    pub fn set_prototype_labels(&mut self, labels: Vec<ClassId>) -> Result<()> {
        if labels.len() != self.prototypes.len() {
            return Err(Error::LengthMismatch { left: labels.len(), right: self.prototypes.len() });
        }
        for &l in &labels {
            self.classes.check(l)?;
        }
        self.prototypes.labels = labels;
        Ok(())
    }

    /// Processes one unlabeled batch: predict with the previous projected
    /// prototypes, adapt the gas, relabel, match, register and project.
    pub fn step(&mut self, batch: &Batch<'_>) -> Result<StepOutput> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let prev = &self.prototypes;
        let prev_refs = prev.projected_refs()?;
        let predictions = predict_batch(batch.instances, &prev_refs, self.k_predict)?;

        self.gng.fit_batch(batch.instances, self.passes, &mut self.rng)?;
        let GngSnapshot { ids, positions } = self.gng.snapshot();
        let labels = predict_batch(&positions, &prev_refs, self.k_gng)?;

        let cost = pairwise_distances(&prev.positions, &positions)?;
        let mapping = solve_assignment(&cost);
        let (transform, identity_fallback) = match fit_rigid(&prev.positions, &positions, &mapping) {
            Ok(x) => (x, false),
            Err(e) => {
                debug!("batch {}: rigid fit skipped ({e}), using identity", batch.index);
                (RigidTransform::identity(self.gng.dim()), true)
            }
        };
        let projected_positions = project(&positions, &transform)?;

        let out = StepOutput {
            predictions,
            transform,
            identity_fallback,
            matched_pairs: mapping.len(),
            assignment_cost: mapping.total_cost,
        };
        self.prototypes = PrototypeSet {
            batch_index: batch.index,
            node_ids: ids,
            positions,
            labels,
            projected_positions,
        };
        Ok(out)
    }
}

fn pick_distinct_pair<'a>(xs: &'a [Vec<f64>], rng: &mut ChaCha8Rng) -> Result<(&'a [f64], &'a [f64])> {
    let a = xs.choose(rng).ok_or(Error::EmptyInput("supervised prefix"))?;
    let others: Vec<&Vec<f64>> = xs.iter().filter(|x| *x != a).collect();
    let b = others
        .choose(rng)
        .ok_or_else(|| Error::Degenerate("supervised prefix has fewer than two distinct points".into()))?;
    Ok((a, b))
}

/// Attaches the evaluation channel to per-batch predictions.
fn attach_truth(records: &mut [BatchRecord], truth: &[ClassId]) {
    for r in records {
        r.truth = truth[r.offset..r.offset + r.predictions.len()].to_vec();
    }
}

/// Runs the prototype-tracking classifier over the unsupervised suffix.
pub fn run_aigas(split: &StreamSplit, cfg: &RunConfig) -> Result<PredictionTrace> {
    run_aigas_with_state(split, cfg).map(|(trace, _)| trace)
}

/// [`run_aigas`], also returning the model state after the last batch.
pub fn run_aigas_with_state(split: &StreamSplit, cfg: &RunConfig) -> Result<(PredictionTrace, AigasState)> {
    let mut state = AigasState::init(split.supervised(), split.classes(), cfg)?;
    let mut records = Vec::new();
    for batch in batch_iter(split, cfg.num_batches)? {
        let start = Instant::now();
        let out = state.step(&batch)?;
        records.push(BatchRecord {
            batch_index: batch.index,
            offset: batch.offset,
            predictions: out.predictions,
            truth: Vec::new(),
            transform: Some(TransformRecord::from(&out.transform)),
            identity_fallback: out.identity_fallback,
            prototype_count: state.prototypes().len(),
            matched_pairs: out.matched_pairs,
            assignment_cost: Some(out.assignment_cost),
            wall_time_us: start.elapsed().as_micros() as u64,
        });
    }
    attach_truth(&mut records, split.ground_truth());
    let trace = PredictionTrace { method: Method::Aigas, node_budget: Some(state.node_budget()), records };
    Ok((trace, state))
}

/// k-NN reference memory of the naive baselines.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    method: Method,
    positions: VecDeque<Vec<f64>>,
    labels: VecDeque<ClassId>,
    /// Maximum retained reference points; `None` is unbounded.
    window: Option<usize>,
    k: usize,
}

impl BaselineModel {
    pub fn new(method: Method, supervised: &[LabeledInstance], classes: ClassSet, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        validate_instances(supervised, &classes)?;
        let window = match method {
            Method::Stc | Method::Inc => None,
            Method::Sld => Some(cfg.sld_window.unwrap_or(supervised.len())),
            Method::Aigas => {
                return Err(Error::InvalidParameter("aigas is not a baseline".into()));
            }
        };
        let mut positions = VecDeque::with_capacity(supervised.len());
        let mut labels = VecDeque::with_capacity(supervised.len());
        for (index, inst) in supervised.iter().enumerate() {
            positions.push_back(inst.features.clone());
            labels.push_back(inst.label.ok_or(Error::MissingLabel { index })?);
        }
        let mut model = Self { method, positions, labels, window, k: cfg.k_predict };
        model.evict();
        Ok(model)
    }

    /// Sliding baseline with an explicit window (`None` = unbounded).
    pub fn with_window(mut self, window: Option<usize>) -> Self {
        self.window = window;
        self.evict();
        self
    }

    fn evict(&mut self) {
        if let Some(w) = self.window {
            while self.positions.len() > w {
                self.positions.pop_front();
                self.labels.pop_front();
            }
        }
    }

    pub fn reference_count(&self) -> usize {
        self.positions.len()
    }

    /// Predicts a batch, then (SLD/INC) absorbs it with its own predictions.
    pub fn step(&mut self, batch: &Batch<'_>) -> Result<Vec<ClassId>> {
        let refs = ReferenceSet::new(
            self.positions.iter().cloned().collect(),
            self.labels.iter().copied().collect(),
        )?;
        let predictions = predict_batch(batch.instances, &refs, self.k)?;
        if self.method != Method::Stc {
            self.positions.extend(batch.instances.iter().cloned());
            self.labels.extend(predictions.iter().copied());
            self.evict();
        }
        Ok(predictions)
    }
}

fn run_baseline_model(mut model: BaselineModel, split: &StreamSplit, cfg: &RunConfig) -> Result<PredictionTrace> {
    let mut records = Vec::new();
    for batch in batch_iter(split, cfg.num_batches)? {
        let start = Instant::now();
        let predictions = model.step(&batch)?;
        records.push(BatchRecord {
            batch_index: batch.index,
            offset: batch.offset,
            predictions,
            truth: Vec::new(),
            transform: None,
            identity_fallback: false,
            prototype_count: model.reference_count(),
            matched_pairs: 0,
            assignment_cost: None,
            wall_time_us: start.elapsed().as_micros() as u64,
        });
    }
    attach_truth(&mut records, split.ground_truth());
    Ok(PredictionTrace { method: model.method, node_budget: None, records })
}

pub fn run_baseline(method: Method, split: &StreamSplit, cfg: &RunConfig) -> Result<PredictionTrace> {
    let model = BaselineModel::new(method, split.supervised(), split.classes(), cfg)?;
    run_baseline_model(model, split, cfg)
}

/// Sliding-window baseline with an explicit window; `None` never forgets.
pub fn run_sliding(split: &StreamSplit, cfg: &RunConfig, window: Option<usize>) -> Result<PredictionTrace> {
    let model = BaselineModel::new(Method::Sld, split.supervised(), split.classes(), cfg)?.with_window(window);
    run_baseline_model(model, split, cfg)
}

/// Dispatches to [`run_aigas`] or [`run_baseline`].
pub fn run_method(method: Method, split: &StreamSplit, cfg: &RunConfig) -> Result<PredictionTrace> {
    match method {
        Method::Aigas => run_aigas(split, cfg),
        m => run_baseline(m, split, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::split_stream;

    fn blobs(n: usize) -> (Vec<LabeledInstance>, ClassSet) {
        let xs = (0..n)
            .map(|i| {
                let c = (i % 2) as u32;
                let jitter = ((i * 7919) % 100) as f64 / 1000.0;
                LabeledInstance::new(vec![c as f64 * 3.0 + jitter, jitter * 2.0], ClassId(c))
            })
            .collect();
        (xs, ClassSet::new(2).unwrap())
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(node_budget(1.0, 100), 200);
        assert_eq!(node_budget(9.0, 100), 1000);
        assert_eq!(node_budget(4.0 / 3.0, 100), 233);
        assert_eq!(node_budget(1.125, 4), 9);
        assert_eq!(node_budget(1.5, 1), 3);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("x".parse::<Method>().is_err());
    }

    #[test]
    fn init_labels_every_node() {
        let (xs, cs) = blobs(200);
        let cfg = RunConfig { g_base: 10, ..RunConfig::default() };
        let state = AigasState::init(&xs, cs, &cfg).unwrap();
        assert_eq!(state.node_budget(), 20);
        let p = state.prototypes();
        assert_eq!(p.labels.len(), p.len());
        assert_eq!(p.positions, p.projected_positions);
        assert!(p.labels.iter().all(|l| cs.contains(*l)));
    }

    #[test]
    fn init_rejects_missing_class() {
        let (xs, _) = blobs(50);
        let cs = ClassSet::new(3).unwrap();
        assert_eq!(AigasState::init(&xs, cs, &RunConfig::default()).unwrap_err(), Error::AbsentClass(2));
    }

    #[test]
    fn single_batch_stream() {
        let (xs, cs) = blobs(100);
        let split = split_stream(&xs, 0.5, cs).unwrap();
        let cfg = RunConfig { num_batches: 1, g_base: 5, ..RunConfig::default() };
        let trace = run_aigas(&split, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].predictions.len(), 50);
        assert_eq!(trace.truth(), split.ground_truth());
    }

    #[test]
    fn baselines_reference_memory() {
        let (xs, cs) = blobs(100);
        let split = split_stream(&xs, 0.2, cs).unwrap();
        let cfg = RunConfig { num_batches: 4, ..RunConfig::default() };
        let mut stc = BaselineModel::new(Method::Stc, split.supervised(), cs, &cfg).unwrap();
        let mut sld = BaselineModel::new(Method::Sld, split.supervised(), cs, &cfg).unwrap();
        let mut inc = BaselineModel::new(Method::Inc, split.supervised(), cs, &cfg).unwrap();
        for b in batch_iter(&split, 4).unwrap() {
            stc.step(&b).unwrap();
            sld.step(&b).unwrap();
            inc.step(&b).unwrap();
        }
        assert_eq!(stc.reference_count(), 20);
        assert_eq!(sld.reference_count(), 20);
        assert_eq!(inc.reference_count(), 100);
        assert!(BaselineModel::new(Method::Aigas, split.supervised(), cs, &cfg).is_err());
    }
}
