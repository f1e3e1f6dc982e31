//! Retrieval-style evaluation of relationship predictions.
//!
//! Candidate triplets are ranked per image by the product of the two
//! objectness confidences and the predicate probability, then the top k
//! are matched one-to-one against ground-truth relationship instances.
//! Three tasks share the machinery and differ only in the match
//! criterion: predicate detection requires the exact object pair,
//! phrase detection requires the union box to overlap, and relationship
//! detection requires both boxes to overlap individually.

mod report;

pub use report::{render_report, MethodMetrics, ReportOptions, NON_REPRODUCIBILITY_NOTE};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ImageRecord, TripletType};
use crate::embed::{encode_pair, EmbeddingStore};
use crate::error::{Error, Result};
use crate::features::{spatial_feature, BoundingBox, FeatureMapSource, ImageSize};
use crate::model::{forward_pair, ComboTable, ModelInput, ModelParams};

/// Default overlap threshold for the box-matching tasks.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Cap used when ranking proposals per image with the `top50` option.
pub const PROPOSAL_CAP: usize = 50;

/// Intersection-over-union of two boxes; 0 when they are disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = (a.x + a.w).min(b.x + b.w);
    let y1 = (a.y + a.h).min(b.y + b.h);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let inter = (x1 - x0) * (y1 - y0);
    inter / (a.area() + b.area() - inter)
}

/// Minimal axis-aligned box covering both inputs.
pub fn union_box(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    let x = a.x.min(b.x);
    let y = a.y.min(b.y);
    let x1 = (a.x + a.w).max(b.x + b.w);
    let y1 = (a.y + a.h).max(b.y + b.h);
    BoundingBox {
        x,
        y,
        w: x1 - x,
        h: y1 - y,
    }
}

/// A localized, labelled object with a detector confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub bbox: BoundingBox,
    pub objectness: f64,
}

impl Detection {
    pub fn new(label: impl Into<String>, bbox: BoundingBox, objectness: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&objectness) {
            return Err(Error::InvalidConfig(format!(
                "objectness {objectness} outside [0, 1]"
            )));
        }
        Ok(Detection {
            label: label.into(),
            bbox,
            objectness,
        })
    }

    /// Ground-truth objects carry full confidence.
    pub fn ground_truth(label: impl Into<String>, bbox: BoundingBox) -> Self {
        Detection {
            label: label.into(),
            bbox,
            objectness: 1.0,
        }
    }
}

/// One scored candidate triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub subject: Detection,
    pub object: Detection,
    pub predicate: usize,
    /// objectness(subject) * objectness(object) * predicate probability,
    /// further multiplied by the language prior when one is supplied.
    pub score: f64,
}

/// Matching criterion applied between a prediction and a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    /// Exact object pair (labels and boxes) plus the predicate.
    Predicate,
    /// Triplet labels plus union-box overlap at the threshold.
    Phrase,
    /// Triplet labels plus per-box overlap at the threshold.
    Relationship,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Predicate, Task::Phrase, Task::Relationship];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Predicate => "predicate det.",
            Task::Phrase => "phrase det.",
            Task::Relationship => "relationship det.",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "predicate" => Ok(Task::Predicate),
            "phrase" => Ok(Task::Phrase),
            "relationship" => Ok(Task::Relationship),
            other => Err(Error::InvalidConfig(format!(
                "unknown task {other:?}; expected predicate, phrase or relationship"
            ))),
        }
    }
}

/// One ground-truth relationship instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRel {
    pub subject_label: String,
    pub subject_box: BoundingBox,
    pub predicate: usize,
    pub object_label: String,
    pub object_box: BoundingBox,
}

fn matches(
    pred: &RankedPrediction,
    gt: &GroundTruthRel,
    task: Task,
    iou_threshold: f64,
) -> bool {
    if pred.subject.label != gt.subject_label
        || pred.object.label != gt.object_label
        || pred.predicate != gt.predicate
    {
        return false;
    }
    match task {
        Task::Predicate => {
            pred.subject.bbox == gt.subject_box && pred.object.bbox == gt.object_box
        }
        Task::Phrase => {
            let p = union_box(&pred.subject.bbox, &pred.object.bbox);
            let g = union_box(&gt.subject_box, &gt.object_box);
            iou(&p, &g) >= iou_threshold
        }
        Task::Relationship => {
            iou(&pred.subject.bbox, &gt.subject_box) >= iou_threshold
                && iou(&pred.object.bbox, &gt.object_box) >= iou_threshold
        }
    }
}

/// Matched and total ground-truth counts; aggregate across images by
/// summing fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecallResult {
    pub matched: usize,
    pub total: usize,
}

impl RecallResult {
    pub fn add(&mut self, other: RecallResult) {
        self.matched += other.matched;
        self.total += other.total;
    }

    /// `None` when there is no ground truth to recall.
    pub fn fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

/// Match the top-k predictions of one image against its ground truth.
///
/// Predictions must already be in rank order (see [`rank_predictions`]).
/// Matching is one-to-one and maximal: predictions claim compatible
/// ground truths in rank order, and a later prediction may reroute an
/// earlier one to a different compatible ground truth, so the count
/// equals the size of a maximum bipartite matching within the top k.
pub fn recall_at_k(
    ranked: &[RankedPrediction],
    ground_truth: &[GroundTruthRel],
    k: usize,
    task: Task,
    iou_threshold: f64,
) -> Result<RecallResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".to_string()));
    }
    let top = &ranked[..k.min(ranked.len())];
    let compat: Vec<Vec<usize>> = top
        .iter()
        .map(|p| {
            (0..ground_truth.len())
                .filter(|&j| matches(p, &ground_truth[j], task, iou_threshold))
                .collect()
        })
        .collect();
    // Kuhn augmentation, one pass per prediction in rank order.
    let mut gt_owner: Vec<Option<usize>> = vec![None; ground_truth.len()];
    let mut matched = 0usize;
    for i in 0..top.len() {
        let mut visited = vec![false; top.len()];
        if augment(i, &compat, &mut gt_owner, &mut visited) {
            matched += 1;
        }
    }
    Ok(RecallResult {
        matched,
        total: ground_truth.len(),
    })
}

fn augment(
    i: usize,
    compat: &[Vec<usize>],
    gt_owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    if visited[i] {
        return false;
    }
    visited[i] = true;
    for &j in &compat[i] {
        match gt_owner[j] {
            None => {
                gt_owner[j] = Some(i);
                return true;
            }
            Some(owner) => {
                if augment(owner, compat, gt_owner, visited) {
                    gt_owner[j] = Some(i);
                    return true;
                }
            }
        }
    }
    false
}

/// Sort candidates by descending score with a deterministic tie-break on
/// (subject label, object label, predicate index).
pub fn rank_predictions(predictions: &mut [RankedPrediction]) {
    predictions.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| {
            (&a.subject.label, &a.object.label, a.predicate).cmp(&(
                &b.subject.label,
                &b.object.label,
                b.predicate,
            ))
        })
    });
}

/// Nonnegative weights on triplet types, multiplied into prediction
/// scores. Types absent from the table weigh 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorTable {
    map: BTreeMap<TripletType, f64>,
}

#[derive(Serialize, Deserialize)]
struct PriorEntry {
    s: String,
    p: String,
    o: String,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct PriorFile {
    version: u32,
    priors: Vec<PriorEntry>,
}

impl PriorTable {
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TripletType, f64)>,
    {
        let mut map = BTreeMap::new();
        for ((s, p, o), w) in entries {
            if !(w >= 0.0) {
                return Err(Error::NegativePrior {
                    subject: s,
                    predicate: p,
                    object: o,
                    weight: w,
                });
            }
            map.insert((s, p, o), w);
        }
        Ok(PriorTable { map })
    }

    pub fn weight(&self, subject: &str, predicate: &str, object: &str) -> f64 {
        self.map
            .get(&(
                subject.to_string(),
                predicate.to_string(),
                object.to_string(),
            ))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn load(reader: impl std::io::Read) -> Result<Self> {
        let file: PriorFile = serde_json::from_reader(reader)?;
        if file.version != 1 {
            return Err(Error::UnsupportedVersion(file.version));
        }
        Self::from_entries(file.priors.into_iter().map(|e| ((e.s, e.p, e.o), e.w)))
    }

    pub fn save(&self, writer: &mut impl std::io::Write) -> Result<()> {
        let file = PriorFile {
            version: 1,
            priors: self
                .map
                .iter()
                .map(|((s, p, o), &w)| PriorEntry {
                    s: s.clone(),
                    p: p.clone(),
                    o: o.clone(),
                    w,
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut *writer, &file)?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

/// Reweight class probabilities by the prior for (subject, class,
/// object). The output is a ranking key, not a probability vector.
pub fn apply_language_prior(
    probabilities: &[f64],
    subject: &str,
    object: &str,
    predicates: &[String],
    priors: &PriorTable,
) -> Result<Vec<f64>> {
    if probabilities.len() != predicates.len() {
        return Err(Error::DimensionMismatch {
            op: "apply_language_prior",
            left: format!("{} probabilities", probabilities.len()),
            right: format!("{} predicate names", predicates.len()),
        });
    }
    Ok(probabilities
        .iter()
        .zip(predicates)
        .map(|(&p, name)| p * priors.weight(subject, name, object))
        .collect())
}

/// Triplet types present in the test set but absent from training.
pub fn zero_shot_split(train: &Dataset, test: &Dataset) -> BTreeSet<TripletType> {
    let seen = train.triplet_types();
    test.triplet_types()
        .into_iter()
        .filter(|t| !seen.contains(t))
        .collect()
}

/// Everything a model needs to score object pairs at evaluation time.
#[derive(Default)]
pub struct PredictContext<'a> {
    /// Word embeddings; required by context-aware kinds.
    pub store: Option<&'a EmbeddingStore>,
    /// Training combination table; required by Baseline2 kinds.
    pub combos: Option<&'a ComboTable>,
    /// Feature-map source; required by appearance kinds.
    pub fmaps: Option<&'a dyn FeatureMapSource>,
    /// Optional language priors multiplied into scores.
    pub priors: Option<&'a PriorTable>,
    /// Keep only the 50 most confident proposals per image.
    pub top50: bool,
}

/// Per-image evaluation input: proposals, pair feature-map keys, and the
/// ground truth to recall.
#[derive(Debug, Clone)]
pub struct EvalImage {
    pub objects: Vec<Detection>,
    /// Feature-map key per ordered object-index pair, where known.
    pub fmap_keys: BTreeMap<(usize, usize), String>,
    pub size: ImageSize,
    pub ground_truth: Vec<GroundTruthRel>,
}

impl EvalImage {
    /// Build the ground-truth evaluation input for one annotated image:
    /// annotated objects become full-confidence proposals and every
    /// relationship becomes a ground-truth instance.
    pub fn from_record(img: &ImageRecord) -> Self {
        let objects = img
            .objects
            .iter()
            .map(|o| Detection::ground_truth(&o.label, o.bbox()))
            .collect();
        let mut fmap_keys = BTreeMap::new();
        let mut ground_truth = Vec::with_capacity(img.relationships.len());
        for rel in &img.relationships {
            if let Some(key) = &rel.fmap {
                fmap_keys.entry((rel.s, rel.o)).or_insert_with(|| key.clone());
            }
            ground_truth.push(GroundTruthRel {
                subject_label: img.objects[rel.s].label.clone(),
                subject_box: img.objects[rel.s].bbox(),
                predicate: rel.p,
                object_label: img.objects[rel.o].label.clone(),
                object_box: img.objects[rel.o].bbox(),
            });
        }
        EvalImage {
            objects,
            fmap_keys,
            size: img.size(),
            ground_truth,
        }
    }
}

/// Score every ordered object pair of an image and return the ranked
/// candidate list. Fewer than two usable objects yields an empty list.
///
/// Baseline2 kinds classify over training combinations: a pair only
/// receives candidates for combinations whose subject and object labels
/// both match, with the combination's probability mass; pairs matching
/// no combination are unscorable and contribute nothing.
pub fn predict_image(
    params: &ModelParams,
    image: &EvalImage,
    predicates: &[String],
    ctx: &PredictContext<'_>,
) -> Result<Vec<RankedPrediction>> {
    let kind = params.config.kind;
    if kind.uses_context() && ctx.store.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs word embeddings"
        )));
    }
    if kind.is_baseline2() && ctx.combos.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs a combination table"
        )));
    }
    if !kind.takes_spatial() && ctx.fmaps.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs a feature-map source"
        )));
    }
    for det in &image.objects {
        if !(0.0..=1.0).contains(&det.objectness) {
            return Err(Error::InvalidConfig(format!(
                "objectness {} outside [0, 1]",
                det.objectness
            )));
        }
    }

    // Proposal indices, optionally capped to the most confident 50.
    let mut indices: Vec<usize> = (0..image.objects.len()).collect();
    if ctx.top50 && indices.len() > PROPOSAL_CAP {
        indices.sort_by(|&a, &b| {
            image.objects[b]
                .objectness
                .total_cmp(&image.objects[a].objectness)
                .then(a.cmp(&b))
        });
        indices.truncate(PROPOSAL_CAP);
        indices.sort_unstable();
    }

    let mut out = Vec::new();
    for &si in &indices {
        for &oi in &indices {
            if si == oi {
                continue;
            }
            let subj = &image.objects[si];
            let obj = &image.objects[oi];

            let owned_spatial;
            let owned_map;
            let input = if kind.takes_spatial() {
                owned_spatial = spatial_feature(&subj.bbox, &obj.bbox, &image.size)?;
                ModelInput::Spatial(&owned_spatial)
            } else {
                let source = ctx.fmaps.expect("checked above");
                let fm = match image.fmap_keys.get(&(si, oi)) {
                    Some(key) => source.get(key)?,
                    None => None,
                };
                match fm {
                    Some(fm) => {
                        owned_map = fm;
                        ModelInput::Map(&owned_map)
                    }
                    // No appearance feature for this pair; skip it.
                    None => continue,
                }
            };
            let z = kind
                .uses_context()
                .then(|| encode_pair(ctx.store.expect("checked above"), &subj.label, &obj.label));
            let scored = forward_pair(params, &input, z.as_deref())?;

            // (predicate index, probability) candidates for this pair.
            let candidates: Vec<(usize, f64)> = if kind.is_baseline2() {
                let combos = ctx.combos.expect("checked above");
                combos
                    .matching_context(&subj.label, &obj.label)
                    .into_iter()
                    .map(|(combo, predicate)| (predicate, scored.probabilities[combo]))
                    .collect()
            } else {
                scored.probabilities.iter().copied().enumerate().collect()
            };
            let objectness = subj.objectness * obj.objectness;
            for (predicate, probability) in candidates {
                if predicate >= predicates.len() {
                    return Err(Error::ClassOutOfRange {
                        index: predicate,
                        len: predicates.len(),
                    });
                }
                let prior = match ctx.priors {
                    Some(table) => table.weight(&subj.label, &predicates[predicate], &obj.label),
                    None => 1.0,
                };
                out.push(RankedPrediction {
                    subject: subj.clone(),
                    object: obj.clone(),
                    predicate,
                    score: objectness * probability * prior,
                });
            }
        }
    }
    rank_predictions(&mut out);
    Ok(out)
}

/// Recall@k over a whole dataset: predictions and matching are per
/// image, and matched/total counts are summed across images.
///
/// `gt_filter` restricts which ground-truth instances count (used for
/// zero-shot subsets); predictions are never filtered.
pub fn dataset_recall(
    params: &ModelParams,
    dataset: &Dataset,
    ctx: &PredictContext<'_>,
    k: usize,
    task: Task,
    iou_threshold: f64,
    gt_filter: Option<&BTreeSet<TripletType>>,
) -> Result<RecallResult> {
    let mut total = RecallResult::default();
    for img in &dataset.images {
        let mut eval_img = EvalImage::from_record(img);
        if let Some(filter) = gt_filter {
            eval_img.ground_truth.retain(|gt| {
                filter.contains(&(
                    gt.subject_label.clone(),
                    dataset.predicates[gt.predicate].clone(),
                    gt.object_label.clone(),
                ))
            });
        }
        if eval_img.ground_truth.is_empty() {
            continue;
        }
        let ranked = predict_image(params, &eval_img, &dataset.predicates, ctx)?;
        total.add(recall_at_k(
            &ranked,
            &eval_img.ground_truth,
            k,
            task,
            iou_threshold,
        )?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelKind};
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox { x, y, w, h }
    }

    #[test]
    fn iou_of_identical_boxes_is_one() {
        let a = bx(3.0, 4.0, 10.0, 5.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_of_disjoint_boxes_is_zero() {
        assert_eq!(iou(&bx(0.0, 0.0, 1.0, 1.0), &bx(5.0, 5.0, 1.0, 1.0)), 0.0);
        // Touching edges count as disjoint (zero-area intersection).
        assert_eq!(iou(&bx(0.0, 0.0, 1.0, 1.0), &bx(1.0, 0.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn iou_half_overlap_is_one_third() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn union_box_covers_both() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        let b = bx(4.0, 4.0, 2.0, 2.0);
        assert_eq!(union_box(&a, &b), bx(0.0, 0.0, 6.0, 6.0));
        assert_eq!(union_box(&a, &a), a);
        // Containment returns the outer box.
        let inner = bx(1.0, 1.0, 1.0, 1.0);
        let outer = bx(0.0, 0.0, 5.0, 5.0);
        assert_eq!(union_box(&inner, &outer), outer);
    }

    fn det(label: &str, x: f64) -> Detection {
        Detection::ground_truth(label, bx(x, 0.0, 10.0, 10.0))
    }

    fn gt_of(pred: &RankedPrediction) -> GroundTruthRel {
        GroundTruthRel {
            subject_label: pred.subject.label.clone(),
            subject_box: pred.subject.bbox,
            predicate: pred.predicate,
            object_label: pred.object.label.clone(),
            object_box: pred.object.bbox,
        }
    }

    fn prediction(s: &str, o: &str, p: usize, score: f64) -> RankedPrediction {
        RankedPrediction {
            subject: det(s, 0.0),
            object: det(o, 20.0),
            predicate: p,
            score,
        }
    }

    #[test]
    fn all_ground_truth_in_top_k_gives_full_recall() {
        let preds = vec![prediction("a", "b", 0, 0.9), prediction("b", "a", 1, 0.8)];
        let gts: Vec<_> = preds.iter().map(gt_of).collect();
        let r = recall_at_k(&preds, &gts, 10, Task::Predicate, 0.5).unwrap();
        assert_eq!((r.matched, r.total), (2, 2));
        assert_eq!(r.fraction(), Some(1.0));
    }

    #[test]
    fn half_matched_gives_half_recall() {
        let preds = vec![prediction("a", "b", 0, 0.9)];
        let mut gts = vec![gt_of(&preds[0]), gt_of(&preds[0])];
        gts[1].predicate = 1;
        let r = recall_at_k(&preds, &gts, 10, Task::Predicate, 0.5).unwrap();
        assert_eq!(r.fraction(), Some(0.5));
    }

    #[test]
    fn k_truncates_the_candidate_pool() {
        let preds = vec![prediction("a", "b", 0, 0.9), prediction("b", "a", 1, 0.8)];
        let gts = vec![gt_of(&preds[1])];
        let at1 = recall_at_k(&preds, &gts, 1, Task::Predicate, 0.5).unwrap();
        let at2 = recall_at_k(&preds, &gts, 2, Task::Predicate, 0.5).unwrap();
        assert_eq!(at1.matched, 0);
        assert_eq!(at2.matched, 1);
    }

    #[test]
    fn matching_reroutes_earlier_predictions_when_needed() {
        // Prediction 0 fits both ground truths, prediction 1 only the
        // first; a greedy-only matcher would find one match, the
        // augmenting matcher finds two.
        let shared = prediction("a", "b", 0, 0.9);
        let gt_a = gt_of(&shared);
        let mut gt_b = gt_of(&shared);
        gt_b.subject_box = bx(1.0, 0.0, 10.0, 10.0);
        let mut pred_loose = shared.clone();
        pred_loose.subject.bbox = bx(0.5, 0.0, 10.0, 10.0);
        // pred_loose overlaps both ground truths; pred_exact only gt_a.
        let preds = vec![pred_loose, shared];
        let r = recall_at_k(&preds, &[gt_a, gt_b], 10, Task::Relationship, 0.5).unwrap();
        assert_eq!(r.matched, 2);
    }

    #[test]
    fn phrase_matching_uses_the_union_box() {
        // Subject and object boxes are swapped relative to the ground
        // truth: individual overlaps fail but the union is identical.
        let p = prediction("a", "a", 0, 0.9);
        let mut gt = gt_of(&p);
        std::mem::swap(&mut gt.subject_box, &mut gt.object_box);
        assert!(matches(&p, &gt, Task::Phrase, 0.5));
        assert!(!matches(&p, &gt, Task::Relationship, 0.5));
    }

    #[test]
    fn predicate_matching_requires_exact_boxes() {
        let p = prediction("a", "b", 0, 0.9);
        let mut gt = gt_of(&p);
        gt.subject_box.x += 0.25;
        assert!(!matches(&p, &gt, Task::Predicate, 0.5));
        // The shifted box still clears the IoU threshold.
        assert!(matches(&p, &gt, Task::Relationship, 0.5));
    }

    #[test]
    fn ranking_sorts_by_score_then_lexicographically() {
        let mut preds = vec![
            prediction("b", "a", 0, 0.5),
            prediction("a", "b", 1, 0.5),
            prediction("a", "b", 0, 0.5),
            prediction("a", "a", 3, 0.7),
        ];
        rank_predictions(&mut preds);
        let order: Vec<(String, String, usize)> = preds
            .iter()
            .map(|p| (p.subject.label.clone(), p.object.label.clone(), p.predicate))
            .collect();
        assert_eq!(
            order,
            vec![
                ("a".into(), "a".into(), 3),
                ("a".into(), "b".into(), 0),
                ("a".into(), "b".into(), 1),
                ("b".into(), "a".into(), 0),
            ]
        );
    }

    #[test]
    fn priors_default_to_one_and_reject_negatives() {
        let table = PriorTable::from_entries(vec![(
            ("person".into(), "ride".into(), "horse".into()),
            2.0,
        )])
        .unwrap();
        assert_eq!(table.weight("person", "ride", "horse"), 2.0);
        assert_eq!(table.weight("person", "wear", "hat"), 1.0);
        assert!(matches!(
            PriorTable::from_entries(vec![(("a".into(), "b".into(), "c".into()), -0.5)]),
            Err(Error::NegativePrior { .. })
        ));
    }

    #[test]
    fn prior_file_round_trips() {
        let table = PriorTable::from_entries(vec![
            (("person".into(), "ride".into(), "horse".into()), 0.25),
            (("person".into(), "wear".into(), "hat".into()), 0.0),
        ])
        .unwrap();
        let mut buf = Vec::new();
        table.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"version\": 1"));
        assert!(text.contains("\"s\": \"person\""));
        let back = PriorTable::load(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn language_prior_reweights_probabilities() {
        let predicates = vec!["ride".to_string(), "wear".to_string()];
        let priors = PriorTable::from_entries(vec![(
            ("person".into(), "wear".into(), "hat".into()),
            0.0,
        )])
        .unwrap();
        let out =
            apply_language_prior(&[0.4, 0.6], "person", "hat", &predicates, &priors).unwrap();
        assert_eq!(out, vec![0.4, 0.0]);
        let identity =
            apply_language_prior(&[0.4, 0.6], "dog", "hat", &predicates, &priors).unwrap();
        assert_eq!(identity, vec![0.4, 0.6]);
    }

    mod prediction_tests {
        use super::*;
        use crate::model::ModelParams;

        fn spatial_params(kind: ModelKind, predicates: usize) -> ModelParams {
            ModelParams::init(
                ModelConfig::new(kind, predicates, crate::features::SPATIAL_DIM)
                    .with_code_dim(4)
                    .with_embed_dim(3),
                11,
            )
            .unwrap()
        }

        /// Four objects with distinct confidences, for ranking tests.
        pub(super) fn make_confidence_image() -> EvalImage {
            let objects = (0..4)
                .map(|i| {
                    Detection::new(
                        format!("obj{i}"),
                        bx(5.0 + 12.0 * i as f64, 8.0, 10.0, 10.0 + i as f64),
                        [0.9, 0.4, 0.7, 0.2][i],
                    )
                    .unwrap()
                })
                .collect();
            EvalImage {
                objects,
                fmap_keys: BTreeMap::new(),
                size: ImageSize {
                    width: 100.0,
                    height: 100.0,
                },
                ground_truth: Vec::new(),
            }
        }

        fn two_object_image() -> EvalImage {
            let objects = vec![
                Detection::ground_truth("person", bx(10.0, 10.0, 20.0, 40.0)),
                Detection::ground_truth("horse", bx(30.0, 20.0, 40.0, 30.0)),
            ];
            EvalImage {
                objects,
                fmap_keys: BTreeMap::new(),
                size: ImageSize {
                    width: 100.0,
                    height: 100.0,
                },
                ground_truth: Vec::new(),
            }
        }

        fn store_for(labels: &[&str]) -> EmbeddingStore {
            let mut text = String::new();
            for (i, l) in labels.iter().enumerate() {
                text.push_str(&format!("{l} {} {} {}\n", i as f64, 1.0, -(i as f64)));
            }
            EmbeddingStore::load(std::io::Cursor::new(text)).unwrap()
        }

        #[test]
        fn two_objects_and_p_predicates_give_2p_candidates() {
            let params = spatial_params(ModelKind::Baseline1Spatial, 3);
            let image = two_object_image();
            let preds = vec!["on".to_string(), "under".to_string(), "near".to_string()];
            let out =
                predict_image(&params, &image, &preds, &PredictContext::default()).unwrap();
            assert_eq!(out.len(), 2 * 3);
            // Ranked output is sorted by descending score.
            for w in out.windows(2) {
                assert!(w[0].score >= w[1].score);
            }
        }

        #[test]
        fn single_object_yields_no_candidates() {
            let params = spatial_params(ModelKind::Baseline1Spatial, 3);
            let mut image = two_object_image();
            image.objects.truncate(1);
            let preds = vec!["on".to_string(), "under".to_string(), "near".to_string()];
            let out =
                predict_image(&params, &image, &preds, &PredictContext::default()).unwrap();
            assert!(out.is_empty());
        }

        #[test]
        fn context_kind_scores_depend_on_labels() {
            let params = spatial_params(ModelKind::SpatialContext, 2);
            let store = store_for(&["person", "horse", "dog"]);
            let ctx = PredictContext {
                store: Some(&store),
                ..Default::default()
            };
            let image = two_object_image();
            let preds = vec!["on".to_string(), "under".to_string()];
            let a = predict_image(&params, &image, &preds, &ctx).unwrap();
            let mut renamed = image.clone();
            renamed.objects[1].label = "dog".to_string();
            let b = predict_image(&params, &renamed, &preds, &ctx).unwrap();
            let score_of = |v: &[RankedPrediction], s: &str| {
                v.iter()
                    .find(|p| p.subject.label == s && p.predicate == 0)
                    .unwrap()
                    .score
            };
            assert_ne!(score_of(&a, "person"), score_of(&b, "person"));
        }

        #[test]
        fn baseline2_only_scores_matching_combos() {
            let combos = ComboTable::from_triplets(vec![
                ("person".to_string(), 0, "horse".to_string()),
                ("person".to_string(), 1, "horse".to_string()),
                ("dog".to_string(), 0, "person".to_string()),
            ]);
            let params = ModelParams::init(
                ModelConfig::new(ModelKind::Baseline2Spatial, 2, crate::features::SPATIAL_DIM)
                    .with_combos(combos.len()),
                7,
            )
            .unwrap();
            let ctx = PredictContext {
                combos: Some(&combos),
                ..Default::default()
            };
            let image = two_object_image();
            let preds = vec!["on".to_string(), "under".to_string()];
            let out = predict_image(&params, &image, &preds, &ctx).unwrap();
            // (person, horse) matches two combos; (horse, person) none.
            assert_eq!(out.len(), 2);
            assert!(out.iter().all(|p| p.subject.label == "person"));
            let probs: f64 = out.iter().map(|p| p.score).sum();
            assert!(probs < 1.0 + 1e-12);
        }

        #[test]
        fn priors_scale_candidate_scores() {
            let params = spatial_params(ModelKind::Baseline1Spatial, 2);
            let image = two_object_image();
            let preds = vec!["on".to_string(), "under".to_string()];
            let plain =
                predict_image(&params, &image, &preds, &PredictContext::default()).unwrap();
            let priors = PriorTable::from_entries(vec![(
                ("person".into(), "on".into(), "horse".into()),
                0.0,
            )])
            .unwrap();
            let ctx = PredictContext {
                priors: Some(&priors),
                ..Default::default()
            };
            let weighted = predict_image(&params, &image, &preds, &ctx).unwrap();
            let zeroed = weighted
                .iter()
                .find(|p| p.subject.label == "person" && p.predicate == 0)
                .unwrap();
            assert_eq!(zeroed.score, 0.0);
            // Other candidates keep their unweighted scores.
            let untouched = |v: &[RankedPrediction]| {
                v.iter()
                    .find(|p| p.subject.label == "horse" && p.predicate == 1)
                    .unwrap()
                    .score
            };
            assert_eq!(untouched(&plain), untouched(&weighted));
        }

        #[test]
        fn top50_keeps_the_most_confident_proposals() {
            let params = spatial_params(ModelKind::Baseline1Spatial, 1);
            let mut image = two_object_image();
            image.objects = (0..60)
                .map(|i| {
                    Detection::new(
                        format!("obj{i}"),
                        bx(1.0 + i as f64, 1.0, 5.0, 5.0),
                        1.0 - i as f64 / 100.0,
                    )
                    .unwrap()
                })
                .collect();
            let preds = vec!["on".to_string()];
            let ctx = PredictContext {
                top50: true,
                ..Default::default()
            };
            let out = predict_image(&params, &image, &preds, &ctx).unwrap();
            assert_eq!(out.len(), 50 * 49);
            // The ten least confident proposals are gone.
            assert!(!out
                .iter()
                .any(|p| p.subject.label == "obj55" || p.object.label == "obj55"));
        }

        #[test]
        fn zero_shot_split_is_an_exact_set_difference() {
            use crate::data::synth::{generate, SynthConfig};
            let out = generate(&SynthConfig {
                images: 80,
                object_classes: 5,
                ..SynthConfig::linear_defaults()
            })
            .unwrap();
            let split = zero_shot_split(&out.train, &out.test);
            assert_eq!(split, out.holdout_types);
            let train_types = out.train.triplet_types();
            assert!(split.is_disjoint(&train_types));
            // Together they cover every test type.
            for t in out.test.triplet_types() {
                assert!(split.contains(&t) || train_types.contains(&t));
            }
            // A dataset is never zero-shot against itself.
            assert!(zero_shot_split(&out.train, &out.train).is_empty());
        }
    }

    mod brute_force {
        use super::*;

        /// Exhaustive maximum one-to-one matching over all assignment
        /// subsets, exponential and only usable on tiny instances.
        pub fn oracle_recall(
            ranked: &[RankedPrediction],
            gts: &[GroundTruthRel],
            k: usize,
            task: Task,
            threshold: f64,
        ) -> usize {
            let top = &ranked[..k.min(ranked.len())];
            fn explore(
                i: usize,
                top: &[RankedPrediction],
                gts: &[GroundTruthRel],
                used: &mut Vec<bool>,
                task: Task,
                threshold: f64,
            ) -> usize {
                if i == top.len() {
                    return 0;
                }
                // Leave prediction i unmatched.
                let mut best = explore(i + 1, top, gts, used, task, threshold);
                for j in 0..gts.len() {
                    if !used[j] && matches(&top[i], &gts[j], task, threshold) {
                        used[j] = true;
                        best = best.max(1 + explore(i + 1, top, gts, used, task, threshold));
                        used[j] = false;
                    }
                }
                best
            }
            explore(0, top, gts, &mut vec![false; gts.len()], task, threshold)
        }

        fn arb_box() -> impl Strategy<Value = BoundingBox> {
            (0.0..20.0f64, 0.0..20.0f64, 1.0..15.0f64, 1.0..15.0f64)
                .prop_map(|(x, y, w, h)| BoundingBox { x, y, w, h })
        }

        fn arb_gt(objects: usize, predicates: usize) -> impl Strategy<Value = GroundTruthRel> {
            (0..objects, 0..predicates, 0..objects, arb_box(), arb_box()).prop_map(
                |(s, p, o, sb, ob)| GroundTruthRel {
                    subject_label: format!("o{s}"),
                    subject_box: sb,
                    predicate: p,
                    object_label: format!("o{o}"),
                    object_box: ob,
                },
            )
        }

        fn arb_pred(objects: usize, predicates: usize) -> impl Strategy<Value = RankedPrediction> {
            (
                0..objects,
                0..predicates,
                0..objects,
                arb_box(),
                arb_box(),
                0.0..1.0f64,
            )
                .prop_map(|(s, p, o, sb, ob, score)| RankedPrediction {
                    subject: Detection {
                        label: format!("o{s}"),
                        bbox: sb,
                        objectness: 1.0,
                    },
                    object: Detection {
                        label: format!("o{o}"),
                        bbox: ob,
                        objectness: 1.0,
                    },
                    predicate: p,
                    score,
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(120))]
            #[test]
            fn recall_matches_the_exhaustive_oracle(
                mut preds in proptest::collection::vec(arb_pred(5, 4), 0..20),
                gts in proptest::collection::vec(arb_gt(5, 4), 0..6),
                k in 1usize..20,
                task_id in 0usize..3,
                threshold in prop_oneof![Just(0.3), Just(0.5), Just(0.8)],
            ) {
                let task = Task::ALL[task_id];
                rank_predictions(&mut preds);
                let fast = recall_at_k(&preds, &gts, k, task, threshold).unwrap();
                let slow = oracle_recall(&preds, &gts, k, task, threshold);
                prop_assert_eq!(fast.matched, slow);
                prop_assert_eq!(fast.total, gts.len());
            }

            #[test]
            fn recall_is_monotone_in_k(
                mut preds in proptest::collection::vec(arb_pred(4, 3), 0..15),
                gts in proptest::collection::vec(arb_gt(4, 3), 0..5),
                threshold in prop_oneof![Just(0.3), Just(0.5)],
            ) {
                rank_predictions(&mut preds);
                let mut last = 0usize;
                for k in 1..=15 {
                    let r = recall_at_k(&preds, &gts, k, Task::Relationship, threshold).unwrap();
                    prop_assert!(r.matched >= last);
                    last = r.matched;
                }
            }

            #[test]
            fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
                let ab = iou(&a, &b);
                let ba = iou(&b, &a);
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
                // The union box contains both, so its IoU with each input
                // is at least the pairwise IoU.
                let u = union_box(&a, &b);
                prop_assert!(iou(&a, &u) >= ab - 1e-12);
            }
        }
    }

    mod ranking_invariance {
        use super::*;
        use crate::model::ModelParams;

        #[test]
        fn scaling_all_objectness_preserves_the_order() {
            let params = ModelParams::init(
                ModelConfig::new(ModelKind::Baseline1Spatial, 3, crate::features::SPATIAL_DIM),
                3,
            )
            .unwrap();
            let mut image = super::prediction_tests::make_confidence_image();
            let preds = vec!["on".to_string(), "under".to_string(), "near".to_string()];
            let base =
                predict_image(&params, &image, &preds, &PredictContext::default()).unwrap();
            for obj in &mut image.objects {
                obj.objectness *= 0.5;
            }
            let scaled =
                predict_image(&params, &image, &preds, &PredictContext::default()).unwrap();
            let key = |v: &[RankedPrediction]| {
                v.iter()
                    .map(|p| (p.subject.label.clone(), p.object.label.clone(), p.predicate))
                    .collect::<Vec<_>>()
            };
            assert_eq!(key(&base), key(&scaled));
        }

        #[test]
        fn predicate_recall_with_ground_truth_boxes_ignores_the_threshold() {
            use crate::data::synth::{generate, SynthConfig};
            let out = generate(&SynthConfig {
                images: 40,
                ..SynthConfig::xor_defaults()
            })
            .unwrap();
            let params = ModelParams::init(
                ModelConfig::new(
                    ModelKind::Baseline1Spatial,
                    out.train.predicates.len(),
                    crate::features::SPATIAL_DIM,
                ),
                5,
            )
            .unwrap();
            let ctx = PredictContext::default();
            let a = dataset_recall(&params, &out.test, &ctx, 5, Task::Predicate, 0.5, None)
                .unwrap();
            let b = dataset_recall(&params, &out.test, &ctx, 5, Task::Predicate, 0.9, None)
                .unwrap();
            assert_eq!(a, b);
        }
    }
}
