//! Mini-batch cross-entropy training with a from-scratch Adam optimizer.
//!
//! The loop is single-threaded and fully deterministic: one seed drives
//! both parameter initialization (done by the caller) and the per-epoch
//! Fisher-Yates shuffle, batches are visited in shuffle order, and
//! gradient reduction order is fixed, so two runs with the same seed
//! produce bitwise-identical parameters.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, TripletType};
use crate::embed::{encode_pair, encode_pair_strict, EmbeddingStore};
use crate::error::{Error, Result};
use crate::features::{spatial_feature, FeatureMap, FeatureMapSource};
use crate::model::{backward, forward_pair, ComboTable, ModelGrads, ModelInput, ModelKind, ModelParams};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Learning rate for the newly introduced layers (all tensors here).
    pub lr_new: f64,
    /// Learning rate reserved for pretrained backbone tensors; no such
    /// tensors exist in this artifact, so it is carried but unused.
    pub lr_backbone: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_new: 0.001,
            lr_backbone: 0.0001,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 32,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Zero learning rates are tolerated (they freeze the parameters);
    /// negative rates, out-of-range moment decays and empty batches are
    /// rejected.
    pub fn validate(&self) -> Result<()> {
        if self.lr_new < 0.0 || self.lr_backbone < 0.0 {
            return Err(Error::InvalidConfig(
                "learning rates must be nonnegative".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig(
                "beta1 and beta2 must lie in [0, 1)".to_string(),
            ));
        }
        if !(self.eps_adam > 0.0) {
            return Err(Error::InvalidConfig("eps_adam must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// First and second moment accumulators, one flat buffer per tensor, plus
/// the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params.tensor_views().iter().map(|t| t.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`, bias-corrected by
/// `1 - b^t` with `t` incremented first, then
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelGrads,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    let gviews = grads.tensor_views();
    let mut pviews = params.tensor_views_mut();
    if gviews.len() != pviews.len() || gviews.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            op: "adam_step",
            left: format!("{} parameter tensors", pviews.len()),
            right: format!(
                "{} gradient tensors / {} state tensors",
                gviews.len(),
                state.m.len()
            ),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (ti, theta) in pviews.iter_mut().enumerate() {
        let g = gviews[ti];
        if g.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                op: "adam_step",
                left: format!("parameter tensor of length {}", theta.len()),
                right: format!("gradient tensor of length {}", g.len()),
            });
        }
        let m = &mut state.m[ti];
        let v = &mut state.v[ti];
        for i in 0..theta.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= cfg.lr_new * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
    Ok(())
}

/// Owned per-instance feature, mirroring [`ModelInput`].
#[derive(Debug, Clone)]
pub enum TrainFeature {
    Spatial(Vec<f64>),
    Map(FeatureMap),
}

impl TrainFeature {
    pub fn as_input(&self) -> ModelInput<'_> {
        match self {
            TrainFeature::Spatial(v) => ModelInput::Spatial(v),
            TrainFeature::Map(fm) => ModelInput::Map(fm),
        }
    }
}

/// One labelled training example. `label` is a predicate index, except for
/// Baseline2 kinds where it indexes the combination table.
#[derive(Debug, Clone)]
pub struct TrainInstance {
    pub input: TrainFeature,
    /// Pair embedding (length 2e) for context-aware kinds.
    pub z: Option<Vec<f64>>,
    pub label: usize,
}

/// Inputs needed to turn annotations into training instances.
#[derive(Default)]
pub struct InstanceOptions<'a> {
    /// Word embeddings; required by context-aware kinds.
    pub store: Option<&'a EmbeddingStore>,
    /// Error on labels missing from the embedding table instead of using
    /// the fallback vector.
    pub strict_embeddings: bool,
    /// Combination table; required by Baseline2 kinds, whose labels are
    /// combination indices.
    pub combos: Option<&'a ComboTable>,
    /// Feature-map source; required by appearance kinds. Relationships
    /// whose reference cannot be resolved are skipped.
    pub fmaps: Option<&'a dyn FeatureMapSource>,
    /// Keep only relationships whose triplet type is in this set (used to
    /// carve out zero-shot subsets).
    pub type_filter: Option<&'a BTreeSet<TripletType>>,
}

/// Convert every usable relationship of a dataset into a training
/// instance for the given kind. Instance order follows annotation order.
pub fn build_instances(
    dataset: &Dataset,
    kind: ModelKind,
    opts: &InstanceOptions<'_>,
) -> Result<Vec<TrainInstance>> {
    if kind.uses_context() && opts.store.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs word embeddings"
        )));
    }
    if kind.is_baseline2() && opts.combos.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs a combination table"
        )));
    }
    if !kind.takes_spatial() && opts.fmaps.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs a feature-map source"
        )));
    }
    let mut out = Vec::new();
    for img in &dataset.images {
        let size = img.size();
        for rel in &img.relationships {
            let subj = &img.objects[rel.s];
            let obj = &img.objects[rel.o];
            if let Some(filter) = opts.type_filter {
                let t = (
                    subj.label.clone(),
                    dataset.predicates[rel.p].clone(),
                    obj.label.clone(),
                );
                if !filter.contains(&t) {
                    continue;
                }
            }
            let input = if kind.takes_spatial() {
                TrainFeature::Spatial(spatial_feature(&subj.bbox(), &obj.bbox(), &size)?)
            } else {
                let source = opts.fmaps.expect("checked above");
                let fm = match &rel.fmap {
                    Some(key) => source.get(key)?,
                    None => None,
                };
                match fm {
                    Some(fm) => TrainFeature::Map(fm),
                    // No appearance feature for this pair; skip it.
                    None => continue,
                }
            };
            let z = if kind.uses_context() {
                let store = opts.store.expect("checked above");
                Some(if opts.strict_embeddings {
                    encode_pair_strict(store, &subj.label, &obj.label)?
                } else {
                    encode_pair(store, &subj.label, &obj.label)
                })
            } else {
                None
            };
            let label = if kind.is_baseline2() {
                let combos = opts.combos.expect("checked above");
                combos
                    .index_of(&subj.label, rel.p, &obj.label)
                    .ok_or_else(|| {
                        Error::UnknownCombo(format!(
                            "({}, {}, {})",
                            subj.label, dataset.predicates[rel.p], obj.label
                        ))
                    })?
            } else {
                rel.p
            };
            out.push(TrainInstance { input, z, label });
        }
    }
    Ok(out)
}

/// Per-epoch training log entry. Accuracy is measured over the training
/// set with the parameters as they stand at the end of the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Render the log as a tab-separated table with a header line.
pub fn render_log(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\tmean_loss\ttrain_accuracy\n");
    for r in records {
        s.push_str(&format!(
            "{}\t{:.6}\t{:.6}\n",
            r.epoch, r.mean_loss, r.train_accuracy
        ));
    }
    s
}

/// Train in place for the configured number of epochs and return the
/// per-epoch log.
pub fn train(
    params: &mut ModelParams,
    data: &[TrainInstance],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let mut state = AdamState::new(params);
    let mut grads = ModelGrads::zeros_like(params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &idx in batch {
                let inst = &data[idx];
                loss_sum += backward(
                    params,
                    &inst.input.as_input(),
                    inst.z.as_deref(),
                    inst.label,
                    &mut grads,
                )?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(params, &grads, &mut state, cfg)?;
        }
        let train_accuracy = evaluate_accuracy(params, data)?;
        log.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            train_accuracy,
        });
    }
    Ok(log)
}

/// Fraction of instances whose top-1 class matches the label.
pub fn evaluate_accuracy(params: &ModelParams, data: &[TrainInstance]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut correct = 0usize;
    for inst in data {
        let scores = forward_pair(params, &inst.input.as_input(), inst.z.as_deref())?;
        if scores.argmax() == inst.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mean cross-entropy loss over a set of instances (no updates).
pub fn evaluate_loss(params: &ModelParams, data: &[TrainInstance]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut total = 0.0;
    for inst in data {
        let scores = forward_pair(params, &inst.input.as_input(), inst.z.as_deref())?;
        let (loss, _) = crate::numcore::cross_entropy_with_grad(&scores.scores, inst.label)?;
        total += loss;
    }
    Ok(total / data.len() as f64)
}
