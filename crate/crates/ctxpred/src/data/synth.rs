//! Synthetic dataset generators with planted context-dependent rules.
//!
//! Two rules are available:
//!
//! * `ContextXor` places the subject clearly left or right of the object
//!   and labels the pair with `parity(subject class) XOR side`. Either
//!   signal alone is useless (Bayes accuracy 0.5 for any context-blind
//!   classifier on geometry, and likewise for geometry-blind ones), while
//!   the joint rule is deterministic. Cells (subject class, side) are
//!   visited round-robin so both splits stay exactly balanced.
//! * `ContextLinear` draws a fixed random teacher matrix over the
//!   concatenated pair embedding and labels every (subject, object) pair
//!   with the teacher's argmax. A fraction of pair types is held out of
//!   the training split entirely, giving an exact zero-shot test set.
//!   Relationships carry small near-constant feature maps so appearance
//!   models can train on the context signal alone.
//!
//! Everything is a pure function of the seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Dataset, ImageRecord, ObjectRecord, RelationshipRecord, TripletType};
use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::numcore::{argmax, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthRule {
    ContextXor,
    ContextLinear,
}

impl SynthRule {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "xor" | "context-xor" => Ok(SynthRule::ContextXor),
            "linear" | "context-linear" => Ok(SynthRule::ContextLinear),
            other => Err(Error::InvalidConfig(format!("unknown synth rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub rule: SynthRule,
    /// Number of distinct object classes.
    pub object_classes: usize,
    /// Number of predicates; the XOR rule requires exactly 2.
    pub predicates: usize,
    /// Total instances (one relationship per image) across both splits.
    pub images: usize,
    /// Word-embedding dimension for the emitted embedding table.
    pub embed_dim: usize,
    /// Probability a label is replaced by a different random predicate.
    pub noise: f64,
    /// Fraction of (subject, object) pair types withheld from training
    /// (ContextLinear only).
    pub holdout: f64,
    /// Minimum teacher score margin for a pair type to be kept
    /// (ContextLinear only); 0 keeps everything.
    pub margin: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn xor_defaults() -> Self {
        SynthConfig {
            rule: SynthRule::ContextXor,
            object_classes: 8,
            predicates: 2,
            images: 2500,
            embed_dim: 8,
            noise: 0.0,
            holdout: 0.0,
            margin: 0.0,
            seed: 0,
        }
    }

    pub fn linear_defaults() -> Self {
        SynthConfig {
            rule: SynthRule::ContextLinear,
            object_classes: 10,
            predicates: 4,
            images: 2500,
            embed_dim: 8,
            noise: 0.0,
            holdout: 0.2,
            margin: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.object_classes < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 object classes to form pairs".to_string(),
            ));
        }
        if self.predicates < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 predicates".to_string(),
            ));
        }
        if self.rule == SynthRule::ContextXor && self.predicates != 2 {
            return Err(Error::InvalidConfig(
                "the XOR rule produces exactly 2 predicates".to_string(),
            ));
        }
        if self.images == 0 {
            return Err(Error::InvalidConfig("images must be >= 1".to_string()));
        }
        if self.embed_dim == 0 {
            return Err(Error::InvalidConfig("embed_dim must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::InvalidConfig("noise must be in [0, 1)".to_string()));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::InvalidConfig("holdout must be in [0, 1)".to_string()));
        }
        if self.margin < 0.0 {
            return Err(Error::InvalidConfig("margin must be >= 0".to_string()));
        }
        Ok(())
    }
}

/// Everything a synthetic run needs: the two splits, the embedding table
/// in textual form, per-relationship feature maps (ContextLinear only),
/// and the exact set of held-out triplet types.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train: Dataset,
    pub test: Dataset,
    pub embeddings: String,
    pub feature_maps: BTreeMap<String, FeatureMap>,
    pub holdout_types: BTreeSet<TripletType>,
}

const IMG_SIDE: f64 = 100.0;

fn class_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("obj{i}")).collect()
}

fn predicate_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("rel{i}")).collect()
}

/// Unit-norm random embedding per label, written in load order.
fn sample_embeddings(
    labels: &[String],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, Vec<f64>)> {
    labels
        .iter()
        .map(|label| {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            (label.clone(), v)
        })
        .collect()
}

fn maybe_flip_label(label: usize, predicates: usize, noise: f64, rng: &mut ChaCha8Rng) -> usize {
    if noise > 0.0 && rng.random::<f64>() < noise {
        let mut other = rng.random_range(0..predicates - 1);
        if other >= label {
            other += 1;
        }
        other
    } else {
        label
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    match cfg.rule {
        SynthRule::ContextXor => generate_xor(cfg),
        SynthRule::ContextLinear => generate_linear(cfg),
    }
}

fn generate_xor(cfg: &SynthConfig) -> Result<SynthOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = class_labels(cfg.object_classes);
    let predicates = predicate_names(2);
    let entries = sample_embeddings(&labels, cfg.embed_dim, &mut rng);

    let mut train_images = Vec::new();
    let mut test_images = Vec::new();
    for i in 0..cfg.images {
        let subject_class = i % cfg.object_classes;
        let side = (i / cfg.object_classes) % 2; // 0 = left, 1 = right
        let object_class = rng.random_range(0..cfg.object_classes);

        let obj_box = ObjectRecord {
            label: labels[object_class].clone(),
            x: rng.random_range(40.0..50.0),
            y: rng.random_range(40.0..50.0),
            w: rng.random_range(10.0..20.0),
            h: rng.random_range(10.0..20.0),
        };
        let subj_x = if side == 0 {
            rng.random_range(5.0..15.0)
        } else {
            rng.random_range(70.0..80.0)
        };
        let subj_box = ObjectRecord {
            label: labels[subject_class].clone(),
            x: subj_x,
            y: rng.random_range(40.0..50.0),
            w: rng.random_range(10.0..20.0),
            h: rng.random_range(10.0..20.0),
        };

        let clean = (subject_class % 2) ^ side;
        let label = maybe_flip_label(clean, 2, cfg.noise, &mut rng);

        let to_test = i % 5 == 4;
        let split = if to_test { "test" } else { "train" };
        let image = ImageRecord {
            id: format!("{split}_{i:06}"),
            width: IMG_SIDE,
            height: IMG_SIDE,
            objects: vec![subj_box, obj_box],
            relationships: vec![RelationshipRecord {
                s: 0,
                p: label,
                o: 1,
                fmap: None,
            }],
        };
        if to_test {
            test_images.push(image);
        } else {
            train_images.push(image);
        }
    }

    let mut embeddings = Vec::new();
    EmbeddingStore::write_entries(&mut embeddings, &entries)?;
    Ok(SynthOutput {
        train: Dataset::new(train_images, predicates.clone()),
        test: Dataset::new(test_images, predicates),
        embeddings: String::from_utf8(embeddings).expect("ascii"),
        feature_maps: BTreeMap::new(),
        holdout_types: BTreeSet::new(),
    })
}

fn generate_linear(cfg: &SynthConfig) -> Result<SynthOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = class_labels(cfg.object_classes);
    let predicates = predicate_names(cfg.predicates);
    let entries = sample_embeddings(&labels, cfg.embed_dim, &mut rng);

    // Fixed random teacher over the concatenated pair embedding.
    let teacher = Matrix::from_fn(cfg.predicates, 2 * cfg.embed_dim, |_, _| {
        StandardNormal.sample(&mut rng)
    });

    // Teacher-labelled pair types, margin-filtered.
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new(); // (subject class, object class, predicate)
    for s in 0..cfg.object_classes {
        for o in 0..cfg.object_classes {
            if s == o {
                continue;
            }
            let mut z = entries[s].1.clone();
            z.extend_from_slice(&entries[o].1);
            let scores = teacher.matvec(&z)?;
            let best = argmax(&scores).expect("non-empty scores");
            if cfg.margin > 0.0 {
                let runner_up = scores
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != best)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if scores[best] - runner_up < cfg.margin {
                    continue;
                }
            }
            pairs.push((s, o, best));
        }
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidConfig(
            "margin filter left fewer than 2 pair types".to_string(),
        ));
    }

    // Hold out a fraction of pair types from training entirely.
    let holdout_count = ((pairs.len() as f64) * cfg.holdout).ceil() as usize;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let holdout_set: BTreeSet<usize> = order.into_iter().take(holdout_count).collect();
    let holdout_types: BTreeSet<TripletType> = holdout_set
        .iter()
        .map(|&idx| {
            let (s, o, p) = pairs[idx];
            (labels[s].clone(), predicates[p].clone(), labels[o].clone())
        })
        .collect();

    let jitter = Normal::new(0.0, 0.01).expect("valid std");
    let mut feature_maps = BTreeMap::new();
    let mut train_images = Vec::new();
    let mut test_images = Vec::new();
    for i in 0..cfg.images {
        let pair_idx = i % pairs.len();
        let (s_class, o_class, clean) = pairs[pair_idx];
        let label = maybe_flip_label(clean, cfg.predicates, cfg.noise, &mut rng);

        let mut make_box = |label: &str| ObjectRecord {
            label: label.to_string(),
            x: rng.random_range(0.0..70.0),
            y: rng.random_range(0.0..70.0),
            w: rng.random_range(10.0..30.0),
            h: rng.random_range(10.0..30.0),
        };
        let subj_box = make_box(&labels[s_class]);
        let obj_box = make_box(&labels[o_class]);

        // Split on the pair's occurrence count, not on i: pairs.len() may
        // share a factor with 5, and splitting on i would then push some
        // non-held-out pairs entirely into the test set.
        let occurrence = i / pairs.len();
        let to_test = holdout_set.contains(&pair_idx) || occurrence % 5 == 4;
        let split = if to_test { "test" } else { "train" };
        let fmap_key = format!("fm_{split}_{i:06}.fmap");
        // Nearly constant activations: appearance carries no predicate
        // signal, so models must rely on the context.
        let fm = FeatureMap::from_fn(2, 2, 4, |_, _, _| 1.0 + jitter.sample(&mut rng))?;
        feature_maps.insert(fmap_key.clone(), fm);

        let image = ImageRecord {
            id: format!("{split}_{i:06}"),
            width: IMG_SIDE,
            height: IMG_SIDE,
            objects: vec![subj_box, obj_box],
            relationships: vec![RelationshipRecord {
                s: 0,
                p: label,
                o: 1,
                fmap: Some(fmap_key),
            }],
        };
        if to_test {
            test_images.push(image);
        } else {
            train_images.push(image);
        }
    }

    let mut embeddings = Vec::new();
    EmbeddingStore::write_entries(&mut embeddings, &entries)?;
    Ok(SynthOutput {
        train: Dataset::new(train_images, predicates.clone()),
        test: Dataset::new(test_images, predicates),
        embeddings: String::from_utf8(embeddings).expect("ascii"),
        feature_maps,
        holdout_types,
    })
}
